use crate::error::{Error, Result};
use crate::scalar::Real;

/// Node index on a 2D or 3D grid. Unused trailing axes are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeIndex(pub [usize; 3]);

impl From<[usize; 3]> for NodeIndex {
    fn from(v: [usize; 3]) -> Self {
        NodeIndex(v)
    }
}

impl From<[usize; 2]> for NodeIndex {
    fn from(v: [usize; 2]) -> Self {
        NodeIndex([v[0], v[1], 0])
    }
}

impl From<(usize, usize)> for NodeIndex {
    fn from((i, j): (usize, usize)) -> Self {
        NodeIndex([i, j, 0])
    }
}

impl From<(usize, usize, usize)> for NodeIndex {
    fn from((i, j, k): (usize, usize, usize)) -> Self {
        NodeIndex([i, j, k])
    }
}

/// Cartesian node lattice: node `i` sits at `origin + i * spacing` per axis.
///
/// 2D grids are stored with a unit third axis so that kernels can share one
/// indexing scheme; `dims` tells which axes carry stencil neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry<T> {
    dims: usize,
    size: [usize; 3],
    spacing: [T; 3],
    origin: [T; 3],
}

impl<T: Real> GridGeometry<T> {
    pub fn new(size: &[usize], spacing: &[T], origin: &[T]) -> Result<Self> {
        let dims = size.len();
        if !(dims == 2 || dims == 3) {
            return Err(Error::input(format!(
                "grid must be 2D or 3D, got {dims} axes"
            )));
        }
        if spacing.len() != dims || origin.len() != dims {
            return Err(Error::input(
                "size, spacing and origin must have equal length",
            ));
        }
        if size.contains(&0) {
            return Err(Error::input(format!("zero-sized axis in {size:?}")));
        }
        if spacing.iter().any(|&h| !(h > T::zero()) || !h.is_finite()) {
            return Err(Error::input("grid spacing must be positive and finite"));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::input("grid origin must be finite"));
        }
        let mut g = GridGeometry {
            dims,
            size: [1; 3],
            spacing: [T::one(); 3],
            origin: [T::zero(); 3],
        };
        g.size[..dims].copy_from_slice(size);
        g.spacing[..dims].copy_from_slice(spacing);
        g.origin[..dims].copy_from_slice(origin);
        Ok(g)
    }

    /// Isotropic grid with unit-origin convenience.
    pub fn uniform(size: &[usize], h: T) -> Result<Self> {
        let spacing = vec![h; size.len()];
        let origin = vec![T::zero(); size.len()];
        Self::new(size, &spacing, &origin)
    }

    /// Nodes at the centres of `size` equal cells tiling `[lower, upper]`.
    pub fn cell_centered(lower: &[T], upper: &[T], size: &[usize]) -> Result<Self> {
        if lower.len() != size.len() || upper.len() != size.len() {
            return Err(Error::input("box corners and size must have equal length"));
        }
        let mut spacing = Vec::with_capacity(size.len());
        let mut origin = Vec::with_capacity(size.len());
        for a in 0..size.len() {
            let n = T::from_usize(size[a].max(1)).unwrap();
            let h = (upper[a] - lower[a]) / n;
            spacing.push(h);
            origin.push(lower[a] + h * T::lit(0.5));
        }
        Self::new(size, &spacing, &origin)
    }

    /// `size` nodes per axis with the first and last node on the box corners.
    pub fn vertex_centered(lower: &[T], upper: &[T], size: &[usize]) -> Result<Self> {
        if lower.len() != size.len() || upper.len() != size.len() {
            return Err(Error::input("box corners and size must have equal length"));
        }
        if size.iter().any(|&n| n < 2) {
            return Err(Error::input(
                "vertex-centred grids need at least two nodes per axis",
            ));
        }
        let spacing: Vec<T> = (0..size.len())
            .map(|a| (upper[a] - lower[a]) / T::from_usize(size[a] - 1).unwrap())
            .collect();
        Self::new(size, &spacing, lower)
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn size(&self) -> [usize; 3] {
        self.size
    }

    #[inline]
    pub fn spacing(&self) -> [T; 3] {
        self.spacing
    }

    #[inline]
    pub fn origin(&self) -> [T; 3] {
        self.origin
    }

    /// Smallest spacing over the active axes; the `h` of level-set formulas.
    pub fn h(&self) -> T {
        self.spacing[..self.dims]
            .iter()
            .copied()
            .fold(T::infinity(), T::min)
    }

    pub fn node_count(&self) -> usize {
        self.size.iter().product()
    }

    /// Volume (area in 2D) attributed to one node.
    pub fn cell_volume(&self) -> T {
        self.spacing[..self.dims]
            .iter()
            .fold(T::one(), |acc, &h| acc * h)
    }

    pub fn contains(&self, idx: NodeIndex) -> bool {
        idx.0.iter().zip(self.size.iter()).all(|(&i, &n)| i < n)
    }

    pub(crate) fn check(&self, idx: NodeIndex) -> Result<()> {
        if self.contains(idx) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                index: idx.0,
                size: self.size,
            })
        }
    }

    /// Row-major linear index (last axis fastest).
    #[inline]
    pub fn linear(&self, idx: NodeIndex) -> usize {
        let [i, j, k] = idx.0;
        (i * self.size[1] + j) * self.size[2] + k
    }

    #[inline]
    pub fn unlinear(&self, lin: usize) -> NodeIndex {
        let k = lin % self.size[2];
        let rest = lin / self.size[2];
        NodeIndex([rest / self.size[1], rest % self.size[1], k])
    }

    pub fn position(&self, idx: NodeIndex) -> [T; 3] {
        let mut p = [T::zero(); 3];
        for (a, pa) in p.iter_mut().enumerate().take(self.dims) {
            *pa = self.origin[a] + T::from_usize(idx.0[a]).unwrap() * self.spacing[a];
        }
        p
    }

    /// Length of the box diagonal spanned by the nodes.
    pub fn diameter(&self) -> T {
        let mut s = T::zero();
        for a in 0..self.dims {
            let ext = T::from_usize(self.size[a] - 1).unwrap() * self.spacing[a];
            s = s + ext * ext;
        }
        s.sqrt()
    }

    /// Iterates all node indices in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.node_count()).map(move |l| self.unlinear(l))
    }
}
