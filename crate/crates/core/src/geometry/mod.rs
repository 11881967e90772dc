//! From binary voxel masks to the geometry-adapted sparse grid.

pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DenseField;
use crate::grid::{channels, GridGeometry, NodeIndex, SparseBlockGrid};
use crate::scalar::Real;

/// Segmented volume; `true` marks the transport phase. Row-major, x slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    size: Vec<usize>,
    voxel_size: Vec<f64>,
    bits: Vec<bool>,
}

impl VoxelMask {
    pub fn new(size: &[usize], voxel_size: &[f64], bits: Vec<bool>) -> Result<Self> {
        if !(size.len() == 2 || size.len() == 3) || voxel_size.len() != size.len() {
            return Err(Error::input(
                "mask must be 2D or 3D with one voxel size per axis",
            ));
        }
        if size.contains(&0) {
            return Err(Error::input(format!(
                "mask has a zero-sized axis: {size:?}"
            )));
        }
        if voxel_size.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::input("voxel size must be positive"));
        }
        let n: usize = size.iter().product();
        if bits.len() != n {
            return Err(Error::input(format!(
                "mask holds {} voxels, size {size:?} needs {n}",
                bits.len()
            )));
        }
        Ok(VoxelMask {
            size: size.to_vec(),
            voxel_size: voxel_size.to_vec(),
            bits,
        })
    }

    /// Mask whose voxel centres satisfy `inside` (positions in physical units).
    pub fn from_fn(
        size: &[usize],
        voxel_size: &[f64],
        inside: impl Fn([f64; 3]) -> bool,
    ) -> Result<Self> {
        let geo = mask_geometry::<f64>(size, voxel_size)?;
        let bits = geo.indices().map(|i| inside(geo.position(i))).collect();
        Self::new(size, voxel_size, bits)
    }

    pub fn size(&self) -> &[usize] {
        &self.size
    }

    pub fn voxel_size(&self) -> &[f64] {
        &self.voxel_size
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Node lattice at the voxel centres.
    pub fn geometry<T: Real>(&self) -> Result<GridGeometry<T>> {
        mask_geometry(&self.size, &self.voxel_size)
    }
}

/// Node lattice of a voxel image: one node per voxel centre.
pub fn mask_geometry<T: Real>(size: &[usize], voxel_size: &[f64]) -> Result<GridGeometry<T>> {
    let spacing: Vec<T> = voxel_size.iter().map(|&h| T::lit(h)).collect();
    let origin: Vec<T> = voxel_size.iter().map(|&h| T::lit(0.5 * h)).collect();
    GridGeometry::new(size, &spacing, &origin)
}

/// Strict band `low < phi < high` selecting the simulated phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBand {
    pub low: f64,
    /// `None` in configs means unbounded.
    #[serde(default = "unbounded::inf", with = "unbounded")]
    pub high: f64,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn inf() -> f64 {
        f64::INFINITY
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for PhaseBand {
    fn default() -> Self {
        PhaseBand::positive()
    }
}

impl PhaseBand {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low < high) || low.is_nan() {
            return Err(Error::input(format!(
                "phase band needs low < high, got ({low}, {high})"
            )));
        }
        Ok(PhaseBand { low, high })
    }

    /// `phi > 0`.
    pub fn positive() -> Self {
        PhaseBand {
            low: 0.0,
            high: f64::INFINITY,
        }
    }

    /// Membership test with bounds moved inwards by the machine epsilon of `T`.
    #[inline]
    pub fn contains<T: Real>(&self, phi: T) -> bool {
        let lo = T::lit(self.low) + T::epsilon();
        let hi = T::lit(self.high) - T::epsilon();
        phi > lo && phi < hi
    }
}

/// Parameters of the smooth phase-dependent diffusion coefficient
/// `D(phi) = d_min + d_max / (1 + exp(-(gamma1 + gamma2 * phi)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionProfile {
    pub d_min: f64,
    pub d_max: f64,
    pub gamma1: f64,
    /// Inverse length.
    pub gamma2: f64,
}

impl DiffusionProfile {
    pub fn new(d_min: f64, d_max: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let p = DiffusionProfile {
            d_min,
            d_max,
            gamma1,
            gamma2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Constant coefficient `d` (transition pushed to saturation).
    pub fn uniform(d: f64) -> Self {
        DiffusionProfile {
            d_min: 0.0,
            d_max: d,
            gamma1: 800.0,
            gamma2: 0.0,
        }
    }

    /// Transition of width ~`1/gamma2` whose midpoint sits at `phi_mid`
    /// (typically the smallest phase value, i.e. at the wall).
    pub fn with_midpoint(d_min: f64, d_max: f64, gamma2: f64, phi_mid: f64) -> Result<Self> {
        Self::new(d_min, d_max, -gamma2 * phi_mid, gamma2)
    }

    /// Default smoothing rate: four inverse grid spacings.
    pub fn default_gamma2(h: f64) -> f64 {
        4.0 / h
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_min >= 0.0) || !(self.d_max > 0.0) {
            return Err(Error::input(
                "diffusion profile needs d_min >= 0 and d_max > 0",
            ));
        }
        if !self.gamma1.is_finite() || !self.gamma2.is_finite() {
            return Err(Error::input("diffusion profile gammas must be finite"));
        }
        Ok(())
    }

    /// Largest value the profile can produce.
    pub fn upper_bound(&self) -> f64 {
        self.d_min + self.d_max
    }
}

/// Sigmoid diffusion coefficient; saturates to `d_min` / `d_min + d_max`.
#[inline]
pub fn smooth_diffusion_coefficient<T: Real>(phi: T, profile: &DiffusionProfile) -> T {
    let arg = -(T::lit(profile.gamma1) + T::lit(profile.gamma2) * phi);
    // exp overflow gives inf and the quotient collapses to zero
    T::lit(profile.d_min) + T::lit(profile.d_max) / (T::one() + arg.exp())
}

/// `true -> +1`, `false -> -1`.
pub fn mask_to_indicator<T: Real>(mask: &VoxelMask) -> Result<DenseField<T>> {
    let geo = mask.geometry::<T>()?;
    let data = mask
        .bits
        .iter()
        .map(|&b| if b { T::one() } else { -T::one() })
        .collect();
    DenseField::from_vec(geo, data)
}

/// Thresholds a level function back into a mask (`phi > 0`).
pub fn indicator_to_mask<T: Real>(field: &DenseField<T>) -> Result<VoxelMask> {
    let geo = field.geometry();
    let d = geo.dims();
    let size = &geo.size()[..d];
    let voxel: Vec<f64> = geo.spacing()[..d]
        .iter()
        .map(|h| h.to_f64_lossy())
        .collect();
    VoxelMask::new(
        size,
        &voxel,
        field.data().iter().map(|&v| v > T::zero()).collect(),
    )
}

/// Removes positive features thinner than `min_thickness_cells`.
///
/// Morphological opening of the positive phase with a cubic structuring
/// element of edge `min_thickness_cells`: a voxel survives iff it lies in
/// some fully positive cube of that edge. Values of 0 or 1 leave the field
/// unchanged.
pub fn filter_thin_features<T: Real>(
    indicator: &DenseField<T>,
    min_thickness_cells: usize,
) -> DenseField<T> {
    let k = min_thickness_cells;
    if k <= 1 {
        return indicator.clone();
    }
    let geo = indicator.geometry();
    let mut set: Vec<bool> = indicator.data().iter().map(|&v| v > T::zero()).collect();
    let size = geo.size();
    let strides = [size[1] * size[2], size[2], 1];
    // erosion: anchor x survives iff [x, x + k) is inside along every axis
    for a in 0..geo.dims() {
        sweep_axis(&mut set, size, strides, a, k, true);
    }
    // dilation: x is set iff some anchor in (x - k, x] survived
    for a in 0..geo.dims() {
        sweep_axis(&mut set, size, strides, a, k, false);
    }
    DenseField::from_vec(
        geo.clone(),
        set.iter()
            .map(|&b| if b { T::one() } else { -T::one() })
            .collect(),
    )
    .expect("same geometry")
}

fn sweep_axis(
    set: &mut [bool],
    size: [usize; 3],
    strides: [usize; 3],
    axis: usize,
    k: usize,
    erode: bool,
) {
    let n = size[axis];
    let mut line = vec![false; n];
    let mut out = vec![false; n];
    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    for p in 0..size[others[0]] {
        for q in 0..size[others[1]] {
            let base = p * strides[others[0]] + q * strides[others[1]];
            for (i, l) in line.iter_mut().enumerate() {
                *l = set[base + i * strides[axis]];
            }
            // running count of set entries in the window
            for i in 0..n {
                out[i] = if erode {
                    i + k <= n && line[i..i + k].iter().all(|&b| b)
                } else {
                    let lo = (i + 1).saturating_sub(k);
                    line[lo..=i].iter().any(|&b| b)
                };
            }
            for (i, &o) in out.iter().enumerate() {
                set[base + i * strides[axis]] = o;
            }
        }
    }
}

/// Inserts every node with `phi` strictly inside `band` into a new sparse grid.
///
/// `channels` must include [`channels::PHI`]; it receives the SDF, every
/// other channel starts at zero.
pub fn build_sparse_grid<T: Real, S: AsRef<str>>(
    sdf: &DenseField<T>,
    band: PhaseBand,
    channel_names: &[S],
) -> Result<SparseBlockGrid<T>> {
    if sdf.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::input("SDF contains non-finite values"));
    }
    let geo = sdf.geometry().clone();
    let mut grid = SparseBlockGrid::new(geo.clone(), channel_names)?;
    let phi = grid.property(channels::PHI)?;
    for (lin, &v) in sdf.data().iter().enumerate() {
        if band.contains(v) {
            let idx = geo.unlinear(lin);
            grid.insert_default(idx)?;
            grid.set(idx, phi, v)?;
        }
    }
    if grid.active_node_count() == 0 {
        return Err(Error::EmptyGrid);
    }
    Ok(grid)
}

/// Fills the diffusion channel from the phi channel.
pub fn populate_diffusion_channel<T: Real>(
    grid: &mut SparseBlockGrid<T>,
    profile: &DiffusionProfile,
) -> Result<()> {
    profile.validate()?;
    let phi = grid.property(channels::PHI)?;
    let d = grid.property(channels::DIFFUSION)?;
    let values: Vec<T> = grid.channel(phi).to_vec();
    let out = grid.channel_mut(d);
    for (o, &p) in out.iter_mut().zip(&values) {
        *o = smooth_diffusion_coefficient(p, profile);
    }
    Ok(())
}

/// Smallest phi over the active nodes.
pub fn phase_phi_min<T: Real>(grid: &SparseBlockGrid<T>) -> Result<T> {
    let phi = grid.property(channels::PHI)?;
    let data = grid.channel(phi);
    let mut m = T::infinity();
    grid.for_each_active_node(|_, flat| m = m.min(data[flat]));
    Ok(m)
}

/// Fraction of transport-phase voxels.
pub fn mask_porosity(mask: &VoxelMask) -> f64 {
    mask.bits.iter().filter(|&&b| b).count() as f64 / mask.bits.len() as f64
}

/// Active nodes over box nodes.
pub fn grid_porosity<T: Real>(grid: &SparseBlockGrid<T>) -> f64 {
    grid.occupancy_stats().fill_fraction
}

/// Dense indicator sampled from an analytic level function.
pub fn indicator_from_sdf<T: Real>(
    geo: &GridGeometry<T>,
    sdf: impl Fn([T; 3]) -> T,
) -> DenseField<T> {
    DenseField::from_fn(geo.clone(), |p| {
        if sdf(p) > T::zero() {
            T::one()
        } else {
            -T::one()
        }
    })
}

/// All nodes of `geo`, with `phi` sampled from `sdf` (masked dense layout).
pub fn build_dense_grid<T: Real, S: AsRef<str>>(
    sdf: &DenseField<T>,
    channel_names: &[S],
) -> Result<SparseBlockGrid<T>> {
    let geo = sdf.geometry().clone();
    let mut grid = SparseBlockGrid::new(geo.clone(), channel_names)?;
    let phi = grid.property(channels::PHI)?;
    for (lin, &v) in sdf.data().iter().enumerate() {
        let idx: NodeIndex = geo.unlinear(lin);
        grid.insert_default(idx)?;
        grid.set(idx, phi, v)?;
    }
    Ok(grid)
}
