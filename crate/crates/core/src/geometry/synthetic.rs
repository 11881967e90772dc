//! Seeded analytic microstructures used for tests, benchmarks and demos.
//!
//! Every shape is described by a signed distance with the transport phase
//! on the positive side.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::VoxelMask;
use crate::error::{Error, Result};
use crate::field::DenseField;
use crate::grid::GridGeometry;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticGeometry {
    /// Phase inside a ball.
    Ball { center: [f64; 3], radius: f64 },
    /// Phase outside randomly placed, non-overlapping spheres.
    SpherePacking {
        count: usize,
        radius: f64,
        #[serde(default)]
        min_gap: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Phase inside a cubic lattice of axis-aligned cylindrical struts.
    StrutLattice {
        period: f64,
        radius: f64,
        #[serde(default)]
        offset: [f64; 3],
    },
    /// 2D: phase outside a periodic square array of disks.
    DiskArray { period: f64, radius: f64 },
    /// Whole box is phase; the SDF is the distance to the box walls.
    Open,
}

/// Resolved shape whose SDF can be evaluated pointwise.
#[derive(Debug, Clone)]
pub enum Shape {
    Ball {
        center: [f64; 3],
        radius: f64,
    },
    Spheres(Vec<([f64; 3], f64)>),
    Struts {
        period: f64,
        radius: f64,
        offset: [f64; 3],
    },
    Disks {
        period: f64,
        radius: f64,
    },
    Open {
        lower: [f64; 3],
        upper: [f64; 3],
    },
}

impl SyntheticGeometry {
    /// Fixes random choices for a domain `[lower, upper]`.
    pub fn resolve(&self, lower: [f64; 3], upper: [f64; 3]) -> Result<Shape> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::input(format!("synthetic {what} must be positive")))
            }
        };
        Ok(match *self {
            SyntheticGeometry::Ball { center, radius } => {
                positive(radius, "radius")?;
                Shape::Ball { center, radius }
            }
            SyntheticGeometry::SpherePacking {
                count,
                radius,
                min_gap,
                seed,
            } => {
                positive(radius, "radius")?;
                Shape::Spheres(pack_spheres(lower, upper, count, radius, min_gap, seed)?)
            }
            SyntheticGeometry::StrutLattice {
                period,
                radius,
                offset,
            } => {
                positive(period, "period")?;
                positive(radius, "radius")?;
                Shape::Struts {
                    period,
                    radius,
                    offset,
                }
            }
            SyntheticGeometry::DiskArray { period, radius } => {
                positive(period, "period")?;
                positive(radius, "radius")?;
                Shape::Disks { period, radius }
            }
            SyntheticGeometry::Open => Shape::Open { lower, upper },
        })
    }

    /// Signed distance sampled on `geo`.
    pub fn sdf_field<T: Real>(&self, geo: &GridGeometry<T>) -> Result<DenseField<T>> {
        let (lo, hi) = extent(geo);
        let shape = self.resolve(lo, hi)?;
        Ok(DenseField::from_fn(geo.clone(), |p| {
            T::lit(shape.sdf([
                p[0].to_f64_lossy(),
                p[1].to_f64_lossy(),
                p[2].to_f64_lossy(),
            ]))
        }))
    }

    /// Voxelised shape with voxel centres at `(i + 1/2) * voxel`.
    pub fn mask(&self, size: &[usize], voxel_size: &[f64]) -> Result<VoxelMask> {
        let geo = super::mask_geometry::<f64>(size, voxel_size)?;
        let (lo, hi) = extent(&geo);
        let shape = self.resolve(lo, hi)?;
        let bits = geo
            .indices()
            .map(|i| shape.sdf(geo.position(i)) > 0.0)
            .collect();
        VoxelMask::new(size, voxel_size, bits)
    }
}

fn extent<T: Real>(geo: &GridGeometry<T>) -> ([f64; 3], [f64; 3]) {
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..geo.dims() {
        let h = geo.spacing()[a].to_f64_lossy();
        lo[a] = geo.origin()[a].to_f64_lossy() - 0.5 * h;
        hi[a] = lo[a] + h * geo.size()[a] as f64;
    }
    (lo, hi)
}

impl Shape {
    pub fn sdf(&self, p: [f64; 3]) -> f64 {
        match self {
            Shape::Ball { center, radius } => radius - dist(p, *center),
            Shape::Spheres(list) => list
                .iter()
                .map(|(c, r)| dist(p, *c) - r)
                .fold(f64::INFINITY, f64::min),
            Shape::Struts {
                period,
                radius,
                offset,
            } => {
                let w = [0, 1, 2].map(|a| wrap(p[a] - offset[a], *period));
                // strut along axis a is the line where the other two wrapped coordinates vanish
                let d = [w[1].hypot(w[2]), w[0].hypot(w[2]), w[0].hypot(w[1])];
                radius - d.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            Shape::Disks { period, radius } => {
                let half = 0.5 * period;
                let x = wrap(p[0] - half, *period);
                let y = wrap(p[1] - half, *period);
                x.hypot(y) - radius
            }
            Shape::Open { lower, upper } => (0..3)
                .filter(|&a| upper[a] > lower[a])
                .map(|a| (p[a] - lower[a]).min(upper[a] - p[a]))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Signed offset to the nearest lattice point, in `[-period/2, period/2]`.
fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn pack_spheres(
    lower: [f64; 3],
    upper: [f64; 3],
    count: usize,
    radius: f64,
    min_gap: f64,
    seed: u64,
) -> Result<Vec<([f64; 3], f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_d = 2.0 * radius + min_gap.max(0.0);
    let mut out: Vec<([f64; 3], f64)> = Vec::with_capacity(count);
    let max_attempts = 2000 * count.max(1);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::input(format!(
                "could only place {} of {count} spheres of radius {radius}",
                out.len()
            )));
        }
        let c = [0, 1, 2].map(|a| {
            if upper[a] > lower[a] {
                rng.gen_range(lower[a]..upper[a])
            } else {
                lower[a]
            }
        });
        if out.iter().all(|(o, _)| dist(*o, c) >= min_d) {
            out.push((c, radius));
        }
    }
    Ok(out)
}
