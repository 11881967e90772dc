//! FRAP experiments, effective-diffusivity fitting and tortuosity correlations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PhaseBand;
use crate::grid::{channels, SparseBlockGrid};
use crate::scalar::{pairwise_sum, Real};
use crate::solver::{max_diffusion, stability_dt, SimulationConfig, Solver};

/// Axis-aligned box of node indices, `lower <= i < upper` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeBox {
    pub lower: [usize; 3],
    pub upper: [usize; 3],
}

impl NodeBox {
    pub fn new(lower: [usize; 3], upper: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| lower[a] >= upper[a]) {
            return Err(Error::input(format!("empty node box {lower:?}..{upper:?}")));
        }
        Ok(NodeBox { lower, upper })
    }

    /// Centred box spanning `fraction` of each axis (at least one node).
    pub fn central(size: [usize; 3], fraction: f64) -> Self {
        let mut lower = [0; 3];
        let mut upper = [1; 3];
        for a in 0..3 {
            let n = size[a];
            let w = ((n as f64 * fraction).round() as usize).clamp(1, n);
            lower[a] = (n - w) / 2;
            upper[a] = lower[a] + w;
        }
        NodeBox { lower, upper }
    }

    #[inline]
    pub fn contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] >= self.lower[a] && idx[a] < self.upper[a])
    }
}

/// Sampling plan for a FRAP run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrapSchedule {
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Time step as a fraction of the stability bound.
    #[serde(default = "default_dt_fraction")]
    pub dt_fraction: f64,
}

fn default_samples() -> usize {
    200
}

fn default_dt_fraction() -> f64 {
    0.5
}

impl FrapSchedule {
    pub fn new(t_end: f64, samples: usize) -> Self {
        FrapSchedule {
            t_end,
            samples,
            dt_fraction: default_dt_fraction(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) || self.samples == 0 {
            return Err(Error::input(
                "FRAP schedule needs t_end > 0 and samples >= 1",
            ));
        }
        if !(self.dt_fraction > 0.0 && self.dt_fraction < 1.0) {
            return Err(Error::input("dt_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Recovery curve of one bleach experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrapExperiment {
    pub bleach_region: NodeBox,
    pub d_molecular: f64,
    /// `(time, recovery_fraction)`, starting at `(0, 0)`.
    pub curve: Vec<(f64, f64)>,
}

impl FrapExperiment {
    /// Recovery fraction at `t` by linear interpolation (clamped at the ends).
    pub fn recovery_at(&self, t: f64) -> f64 {
        let c = &self.curve;
        if t <= c[0].0 {
            return c[0].1;
        }
        let i = c.partition_point(|p| p.0 < t);
        if i >= c.len() {
            return c[c.len() - 1].1;
        }
        let (t0, y0) = c[i - 1];
        let (t1, y1) = c[i];
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,recovery_fraction\n");
        for (t, r) in &self.curve {
            s.push_str(&format!(
                "{},{}\n",
                crate::io::fmt_f64(*t),
                crate::io::fmt_f64(*r)
            ));
        }
        s
    }
}

/// Bleaches `region` and records the recovery in a sealed domain.
///
/// `u` starts at 1 on phase nodes outside the region and 0 elsewhere. The
/// recovery fraction is the region's mass over its equilibrium share
/// `M * n_region / n_phase`. The grid's `D` channel is used as is.
pub fn run_frap<T: Real>(
    grid: &mut SparseBlockGrid<T>,
    region: NodeBox,
    d_molecular: f64,
    schedule: &FrapSchedule,
    band: PhaseBand,
) -> Result<FrapExperiment> {
    schedule.validate()?;
    if !(d_molecular > 0.0) {
        return Err(Error::input("molecular diffusivity must be positive"));
    }
    let u = grid.property(channels::U)?;
    let phi = grid.property(channels::PHI)?;
    let mut n_phase = 0usize;
    let mut region_nodes = Vec::new();
    let mut values = vec![T::zero(); grid.channel(u).len()];
    {
        let phi_data = grid.channel(phi);
        grid.for_each_active_node(|idx, flat| {
            if band.contains(phi_data[flat]) {
                n_phase += 1;
                if region.contains(idx.0) {
                    region_nodes.push(flat);
                } else {
                    values[flat] = T::one();
                }
            }
        });
    }
    if region_nodes.is_empty() {
        return Err(Error::input("bleach region contains no active phase nodes"));
    }
    if region_nodes.len() == n_phase {
        return Err(Error::input("bleach region covers whole phase"));
    }
    grid.channel_mut(u).copy_from_slice(&values);

    let d_max = max_diffusion(grid)?;
    let bound = stability_dt(grid.geometry(), d_max);
    let interval = schedule.t_end / schedule.samples as f64;
    let per_sample = (interval / (schedule.dt_fraction * bound)).ceil().max(1.0) as usize;
    let dt = interval / per_sample as f64;
    let mut cfg = SimulationConfig::new(dt, schedule.samples * per_sample);
    cfg.phase_band = band;
    let mut solver = Solver::new(grid, cfg)?;

    let n_region = region_nodes.len() as f64;
    let eq = n_region / n_phase as f64 * (n_phase as f64 - n_region);
    let region_mass = |g: &SparseBlockGrid<T>| {
        let data = g.channel(u);
        let vals: Vec<f64> = region_nodes
            .iter()
            .map(|&f| data[f].to_f64_lossy())
            .collect();
        pairwise_sum(&vals)
    };

    let mut curve = Vec::with_capacity(schedule.samples + 1);
    curve.push((0.0, region_mass(grid) / eq));
    for k in 1..=schedule.samples {
        for _ in 0..per_sample {
            solver.step(grid)?;
        }
        curve.push((k as f64 * interval, region_mass(grid) / eq));
    }
    Ok(FrapExperiment {
        bleach_region: region,
        d_molecular,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TortuosityResult {
    pub d_eff: f64,
    pub tau_d: f64,
    pub fit_residual: f64,
    /// Optimum within tolerance of the search interval edge.
    pub at_bracket_edge: bool,
    pub evaluations: usize,
}

/// Squared curve mismatch, candidate interpolated onto the reference times.
pub fn curve_misfit(reference: &FrapExperiment, candidate: &FrapExperiment) -> f64 {
    reference
        .curve
        .iter()
        .map(|&(t, y)| (candidate.recovery_at(t) - y).powi(2))
        .sum()
}

/// Free-box FRAP runner parameterised by a uniform diffusivity.
pub struct FrapFitter<'a, T> {
    pub candidate: &'a mut SparseBlockGrid<T>,
    pub region: NodeBox,
    pub schedule: FrapSchedule,
    pub band: PhaseBand,
}

impl<T: Real> FrapFitter<'_, T> {
    /// FRAP curve of the candidate geometry with uniform `D = d`.
    pub fn curve(&mut self, d: f64) -> Result<FrapExperiment> {
        let dch = self.candidate.property(channels::DIFFUSION)?;
        self.candidate
            .channel_mut(dch)
            .iter_mut()
            .for_each(|v| *v = T::lit(d));
        run_frap(self.candidate, self.region, d, &self.schedule, self.band)
    }

    pub fn objective(&mut self, reference: &FrapExperiment, d: f64) -> Result<f64> {
        Ok(curve_misfit(reference, &self.curve(d)?))
    }

    /// Golden-section search for the `D` whose curve best matches `reference`.
    pub fn fit(
        &mut self,
        reference: &FrapExperiment,
        interval: (f64, f64),
    ) -> Result<TortuosityResult> {
        let (lo, hi) = interval;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::input(format!(
                "invalid search interval ({lo}, {hi})"
            )));
        }
        let (x, fx, evals) = golden_section(lo, hi, 1e-3, |d| self.objective(reference, d))?;
        let edge_tol = 2e-3 * x;
        let at_bracket_edge = x - lo < edge_tol || hi - x < edge_tol;
        if at_bracket_edge {
            log::warn!("fitted D = {x} lies at the edge of the search interval ({lo}, {hi})");
        }
        let tau_d = reference.d_molecular / x;
        Ok(TortuosityResult {
            d_eff: x,
            tau_d,
            fit_residual: fx,
            at_bracket_edge,
            evaluations: evals,
        })
    }

    /// Objective on `points` values spread geometrically by `factor` around `center`.
    pub fn ladder(
        &mut self,
        reference: &FrapExperiment,
        center: f64,
        factor: f64,
        points: usize,
    ) -> Result<Vec<(f64, f64)>> {
        let mid = (points / 2) as i32;
        (0..points as i32)
            .map(|k| {
                let d = center * factor.powi(k - mid);
                Ok((d, self.objective(reference, d)?))
            })
            .collect()
    }
}

/// Fits `D_eff` to `reference` with a free-box candidate geometry.
pub fn fit_effective_d<T: Real>(
    reference: &FrapExperiment,
    candidate: &mut SparseBlockGrid<T>,
    schedule: &FrapSchedule,
    interval: (f64, f64),
) -> Result<TortuosityResult> {
    FrapFitter {
        candidate,
        region: reference.bleach_region,
        schedule: *schedule,
        band: PhaseBand::positive(),
    }
    .fit(reference, interval)
}

/// Minimises `f` on `[a, b]` until the bracket is below `rel_tol` times the
/// current estimate. Returns `(x, f(x), evaluations)`.
pub fn golden_section(
    mut a: f64,
    mut b: f64,
    rel_tol: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64, usize)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evals = 2;
    while (b - a) > rel_tol * 0.5 * (c + d).abs() {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        evals += 1;
    }
    Ok(if fc <= fd {
        (c, fc, evals)
    } else {
        (d, fd, evals)
    })
}

/// True when `values` decreases to a single minimum and increases after it.
pub fn is_unimodal(values: &[f64]) -> bool {
    let Some((imin, _)) = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) else {
        return true;
    };
    values[..=imin].windows(2).all(|w| w[1] <= w[0])
        && values[imin..].windows(2).all(|w| w[1] >= w[0])
}

/// `tau_d = psi^(-n)`.
pub fn tortuosity_power_law(psi: f64, n: f64) -> Result<f64> {
    if !(psi > 0.0 && psi <= 1.0) {
        return Err(Error::Domain(format!(
            "porosity must lie in (0, 1], got {psi}"
        )));
    }
    Ok(psi.powf(-n))
}

/// `tau_d = psi + beta (1 - psi)`.
pub fn tortuosity_linear(psi: f64, beta: f64) -> f64 {
    psi + beta * (1.0 - psi)
}

pub const DEFAULT_BETA: f64 = 1.65;
