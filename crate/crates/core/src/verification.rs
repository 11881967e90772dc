//! Manufactured-solution benchmark on the unit disk and convergence studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DenseField;
use crate::geometry::{build_sparse_grid, PhaseBand};
use crate::grid::{channels, GridGeometry, SparseBlockGrid};
use crate::levelset::{band_error_norms, redistance_indicator, LevelSetOptions};
use crate::scalar::Real;
use crate::solver::{run_simulation, ReactionSpec, SimulationConfig, SourceFn};

/// Radially symmetric test problem on a disk of radius `radius` with
/// homogeneous Neumann walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManufacturedCase {
    pub b: f64,
    pub radius: f64,
    pub d: f64,
    pub t_final: f64,
}

impl Default for ManufacturedCase {
    fn default() -> Self {
        ManufacturedCase {
            b: 20.0,
            radius: 1.0,
            d: 1.0,
            t_final: 0.025,
        }
    }
}

impl ManufacturedCase {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.radius > 0.0 && self.d > 0.0 && self.t_final > 0.0) {
            return Err(Error::input(
                "manufactured case needs b, radius, d, t_final > 0",
            ));
        }
        Ok(())
    }
}

/// `U(r, t) = (R r^3/3 - r^4/4) exp(-B t)`; `dU/dr` vanishes at `r = R`.
pub fn exact_solution(r: f64, t: f64, case: &ManufacturedCase) -> f64 {
    (case.radius * r.powi(3) / 3.0 - r.powi(4) / 4.0) * (-case.b * t).exp()
}

/// Source making [`exact_solution`] satisfy `u_t = D lap(u) + f` in 2D.
pub fn source_term(r: f64, t: f64, case: &ManufacturedCase) -> f64 {
    let (b, rr, d) = (case.b, case.radius, case.d);
    (b / 4.0 * r.powi(4) - b * rr / 3.0 * r.powi(3) + 4.0 * d * r * r - 3.0 * d * rr * r)
        * (-b * t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub resolutions: Vec<usize>,
    pub h: Vec<f64>,
    pub l2_errors: Vec<f64>,
    pub linf_errors: Vec<f64>,
    /// Least-squares slopes of `log(error)` over `log(h)`; absent below two resolutions.
    pub fitted_slopes: Option<Slopes>,
    /// An error grew under refinement.
    pub non_monotone: bool,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    pub fn new(
        label: &str,
        resolutions: Vec<usize>,
        h: Vec<f64>,
        l2: Vec<f64>,
        linf: Vec<f64>,
    ) -> Self {
        let mut warnings = Vec::new();
        let fitted_slopes = if h.len() >= 2 {
            Some(Slopes {
                l2: fit_slope(&h, &l2),
                linf: fit_slope(&h, &linf),
            })
        } else {
            warnings.push("fewer than two resolutions; no slope fitted".to_string());
            None
        };
        let grows = |e: &[f64]| e.windows(2).any(|w| w[1] > w[0]);
        let non_monotone = grows(&l2) || grows(&linf);
        if non_monotone {
            warnings.push("error does not decrease monotonically under refinement".to_string());
        }
        ConvergenceReport {
            label: label.to_string(),
            resolutions,
            h,
            l2_errors: l2,
            linf_errors: linf,
            fitted_slopes,
            non_monotone,
            warnings,
        }
    }

    /// Both slopes inside `[lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.fitted_slopes
            .is_some_and(|s| (lo..=hi).contains(&s.l2) && (lo..=hi).contains(&s.linf))
    }

    /// `h,error` table for one norm (`"l2"` or `"linf"`).
    pub fn to_csv(&self, norm: &str) -> Result<String> {
        let errors = match norm {
            "l2" => &self.l2_errors,
            "linf" => &self.linf_errors,
            other => return Err(Error::input(format!("unknown norm `{other}`"))),
        };
        let mut s = format!("h,{norm}_error\n");
        for (h, e) in self.h.iter().zip(errors) {
            s.push_str(&format!(
                "{},{}\n",
                crate::io::fmt_f64(*h),
                crate::io::fmt_f64(*e)
            ));
        }
        Ok(s)
    }
}

/// Ordinary least-squares slope of `log(e)` against `log(h)`.
pub fn fit_slope(h: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Half-width of the disk benchmark box in units of the disk radius.
pub const DISK_BOX_HALF_WIDTH: f64 = 1.28;

/// Sparse grid for the disk benchmark at `n x n` nodes spanning the box
/// corner to corner, built
/// from the analytic SDF `R - r` with `D` and `u = U(r, 0)` populated.
pub fn disk_grid<T: Real>(n: usize, case: &ManufacturedCase) -> Result<SparseBlockGrid<T>> {
    case.validate()?;
    let l = T::lit(DISK_BOX_HALF_WIDTH * case.radius);
    let geo = GridGeometry::vertex_centered(&[-l, -l], &[l, l], &[n, n])?;
    let radius = T::lit(case.radius);
    let sdf = DenseField::from_fn(geo, |p| radius - (p[0] * p[0] + p[1] * p[1]).sqrt());
    let mut grid = build_sparse_grid(&sdf, PhaseBand::positive(), &channels::STANDARD)?;
    let (u, d) = (
        grid.property(channels::U)?,
        grid.property(channels::DIFFUSION)?,
    );
    grid.fill_with(d, |_, _| T::lit(case.d));
    let c = *case;
    grid.fill_with(u, |_, p| T::lit(exact_solution(radius_of(p), 0.0, &c)));
    Ok(grid)
}

fn radius_of<T: Real>(p: [T; 3]) -> f64 {
    let (x, y) = (p[0].to_f64_lossy(), p[1].to_f64_lossy());
    (x * x + y * y).sqrt()
}

/// RMS and max of `|u - U(., t)|` over the active nodes.
pub fn disk_error_norms<T: Real>(
    grid: &SparseBlockGrid<T>,
    case: &ManufacturedCase,
    t: f64,
) -> Result<(f64, f64)> {
    let u = grid.property(channels::U)?;
    let data = grid.channel(u);
    let geo = grid.geometry();
    let (mut sq, mut linf, mut n) = (0.0f64, 0.0f64, 0usize);
    grid.for_each_active_node(|idx, flat| {
        let e = (data[flat].to_f64_lossy() - exact_solution(radius_of(geo.position(idx)), t, case))
            .abs();
        sq += e * e;
        linf = linf.max(e);
        n += 1;
    });
    Ok(((sq / n as f64).sqrt(), linf))
}

/// Number of steps and step size reaching `t_final` with `dt <= h^2 / 8`.
pub fn disk_time_step(h: f64, t_final: f64) -> (usize, f64) {
    let n = (t_final / (h * h / 8.0)).ceil() as usize;
    (n, t_final / n as f64)
}

/// Errors of one disk run at resolution `n`. Returns `(h, l2, linf)`.
pub fn run_disk_resolution<T: Real>(n: usize, case: &ManufacturedCase) -> Result<(f64, f64, f64)> {
    let mut grid = disk_grid::<T>(n, case)?;
    let h = grid.geometry().h().to_f64_lossy();
    let (steps, dt) = disk_time_step(h, case.t_final);
    let mut cfg = SimulationConfig::new(dt, steps);
    cfg.record_every = steps;
    let c = *case;
    cfg.reaction = ReactionSpec::Function(SourceFn::new(move |p, t| {
        source_term((p[0] * p[0] + p[1] * p[1]).sqrt(), t, &c)
    }));
    run_simulation(&mut grid, &cfg, &mut [])?;
    let (l2, linf) = disk_error_norms(&grid, case, case.t_final)?;
    log::info!("disk n={n}: h={h:.4e} steps={steps} l2={l2:.4e} linf={linf:.4e}");
    Ok((h, l2, linf))
}

fn check_resolutions(resolutions: &[usize], min: usize) -> Result<()> {
    if resolutions.is_empty() {
        return Err(Error::input("no resolutions given"));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("resolutions must be strictly ascending"));
    }
    if resolutions[0] < min {
        return Err(Error::input(format!("resolutions must be at least {min}")));
    }
    Ok(())
}

/// Manufactured-solution convergence study on the disk.
pub fn run_disk_convergence<T: Real>(
    resolutions: &[usize],
    case: &ManufacturedCase,
) -> Result<ConvergenceReport> {
    check_resolutions(resolutions, 32)?;
    let mut hs = Vec::new();
    let mut l2 = Vec::new();
    let mut linf = Vec::new();
    for &n in resolutions {
        let (h, a, b) = run_disk_resolution::<T>(n, case)?;
        hs.push(h);
        l2.push(a);
        linf.push(b);
    }
    Ok(ConvergenceReport::new(
        "disk2d",
        resolutions.to_vec(),
        hs,
        l2,
        linf,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedistanceShape {
    Ball3d,
    Disk2d,
}

/// Half-width of the redistancing box around the unit shape.
pub const REDISTANCE_BOX_HALF_WIDTH: f64 = 1.5;

fn shape_geometry<T: Real>(shape: RedistanceShape, n: usize) -> Result<GridGeometry<T>> {
    let l = T::lit(REDISTANCE_BOX_HALF_WIDTH);
    match shape {
        RedistanceShape::Ball3d => GridGeometry::vertex_centered(&[-l; 3], &[l; 3], &[n; 3]),
        RedistanceShape::Disk2d => GridGeometry::vertex_centered(&[-l; 2], &[l; 2], &[n; 2]),
    }
}

fn unit_sdf<T: Real>(p: [T; 3]) -> T {
    T::one() - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Redistances the +/-1 indicator of the unit ball (or disk) at each
/// resolution and measures the error against `1 - |x|` in the band.
///
/// With `assume_sdf` the exact SDF is taken as the result and the
/// iteration is bypassed, so the report measures the input alone.
pub fn run_redistance_convergence<T: Real>(
    resolutions: &[usize],
    shape: RedistanceShape,
    opts: &LevelSetOptions,
    assume_sdf: bool,
) -> Result<ConvergenceReport> {
    check_resolutions(resolutions, 8)?;
    let mut hs = Vec::new();
    let mut l2 = Vec::new();
    let mut linf = Vec::new();
    for &n in resolutions {
        let geo = shape_geometry::<T>(shape, n)?;
        let exact = DenseField::from_fn(geo.clone(), unit_sdf);
        let (phi, iterations) = if assume_sdf {
            (exact, 0)
        } else {
            let indicator = exact.map(|v| if v > T::zero() { T::one() } else { -T::one() });
            let (phi, diag) = redistance_indicator(&indicator, opts)?;
            (phi, diag.iterations)
        };
        let e = band_error_norms(&phi, unit_sdf, opts.band_width_for_error)?;
        log::info!(
            "redistance {shape:?} n={n}: iterations={iterations} l2={:.4e} linf={:.4e}",
            e.l2,
            e.linf
        );
        hs.push(geo.h().to_f64_lossy());
        l2.push(e.l2);
        linf.push(e.linf);
    }
    let label = match shape {
        RedistanceShape::Ball3d => "ball3d",
        RedistanceShape::Disk2d => "disk2d_redistance",
    };
    Ok(ConvergenceReport::new(
        label,
        resolutions.to_vec(),
        hs,
        l2,
        linf,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_and_source_values() {
        let c = ManufacturedCase::default();
        assert_eq!(exact_solution(0.0, 0.3, &c), 0.0);
        assert_abs_diff_eq!(exact_solution(1.0, 0.0, &c), 1.0 / 12.0, epsilon = 1e-15);
        let h = 1e-4;
        let du =
            (exact_solution(1.0 + h, 0.01, &c) - exact_solution(1.0 - h, 0.01, &c)) / (2.0 * h);
        assert!(du.abs() < 1e-6, "{du}");
        assert_eq!(source_term(0.0, 0.7, &c), 0.0);
        assert_abs_diff_eq!(source_term(1.0, 0.0, &c), -2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert_abs_diff_eq!(fit_slope(&h, &e), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn report_flags() {
        let r = ConvergenceReport::new("x", vec![32], vec![0.1], vec![1.0], vec![1.0]);
        assert!(r.fitted_slopes.is_none() && !r.warnings.is_empty());
        let r = ConvergenceReport::new(
            "x",
            vec![1, 2, 3],
            vec![0.4, 0.2, 0.1],
            vec![1.0, 2.0, 0.5],
            vec![1.0, 0.5, 0.25],
        );
        assert!(r.non_monotone);
        assert!(r.to_csv("l2").unwrap().starts_with("h,l2_error\n"));
        assert!(r.to_csv("l3").is_err());
    }

    #[test]
    fn identity_run_has_zero_error() {
        let c = ManufacturedCase::default();
        let mut g = disk_grid::<f64>(32, &c).unwrap();
        let u = g.property(channels::U).unwrap();
        g.fill_with(u, |_, p| exact_solution(radius_of(p), c.t_final, &c));
        assert_eq!(disk_error_norms(&g, &c, c.t_final).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn time_step_hits_final_time() {
        let (n, dt) = disk_time_step(2.56 / 31.0, 0.025);
        assert!(dt <= (2.56f64 / 31.0).powi(2) / 8.0);
        assert_abs_diff_eq!(n as f64 * dt, 0.025, epsilon = 1e-15);
    }

    #[test]
    fn resolution_validation() {
        let c = ManufacturedCase::default();
        assert!(run_disk_convergence::<f64>(&[16, 32], &c).is_err());
        assert!(run_disk_convergence::<f64>(&[64, 32], &c).is_err());
    }
}
