/// Dense `paths × nodes × width` array of reals, path-major.
///
/// Used for every per-path, per-node process in the crate: `Y` has width 1,
/// `Z` has width `d`, `U` has one column per mark.
#[derive(Debug, Clone, PartialEq)]
pub struct PathArray {
    paths: usize,
    nodes: usize,
    width: usize,
    data: Vec<f64>,
}

impl PathArray {
    pub fn zeros(paths: usize, nodes: usize, width: usize) -> Self {
        Self { paths, nodes, width, data: vec![0.0; paths * nodes * width] }
    }

    pub fn from_fn(paths: usize, nodes: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(paths * nodes * width);
        for p in 0..paths {
            for k in 0..nodes {
                for j in 0..width {
                    data.push(f(p, k, j));
                }
            }
        }
        Self { paths, nodes, width, data }
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn offset(&self, p: usize, k: usize) -> usize {
        debug_assert!(p < self.paths && k < self.nodes);
        (p * self.nodes + k) * self.width
    }

    #[inline]
    pub fn get(&self, p: usize, k: usize, j: usize) -> f64 {
        self.data[self.offset(p, k) + j]
    }

    #[inline]
    pub fn set(&mut self, p: usize, k: usize, j: usize, v: f64) {
        let o = self.offset(p, k);
        self.data[o + j] = v;
    }

    #[inline]
    pub fn row(&self, p: usize, k: usize) -> &[f64] {
        let o = self.offset(p, k);
        &self.data[o..o + self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, p: usize, k: usize) -> &mut [f64] {
        let o = self.offset(p, k);
        &mut self.data[o..o + self.width]
    }

    /// Column of values at node `k`, component `j`, across all paths.
    pub fn node_column(&self, k: usize, j: usize) -> Vec<f64> {
        (0..self.paths).map(|p| self.get(p, k, j)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &PathArray) -> bool {
        self.paths == other.paths && self.nodes == other.nodes && self.width == other.width
    }

    /// Elementwise `self - other`; shapes must agree.
    pub fn difference(&self, other: &PathArray) -> PathArray {
        assert!(self.same_shape(other), "shape mismatch");
        PathArray {
            paths: self.paths,
            nodes: self.nodes,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}
