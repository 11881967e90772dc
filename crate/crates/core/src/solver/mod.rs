//! Explicit FTCS integration of `du/dt = div(D grad u) + f` on the sparse grid.
//!
//! Walls are imposed at the stencil level: a neighbor that is not an active
//! phase node takes the center's `u` and `D`, so the flux through that face
//! vanishes identically.

mod config;
mod initial;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{BoxBoundary, FaceCondition, ReactionSpec, SimulationConfig, SourceFn};
pub use initial::{apply_initial_condition, InitialCondition};

use crate::error::{Error, Result};
use crate::grid::{channels, node_of, GridGeometry, NodeIndex, PropertyId, SparseBlockGrid};
use crate::scalar::{pairwise_sum, Real};

/// Strict upper bound on the explicit time step: `1 / (2 D_max sum_a 1/h_a^2)`.
pub fn stability_dt<T: Real>(geometry: &GridGeometry<T>, d_max: f64) -> f64 {
    let s: f64 = (0..geometry.dims())
        .map(|a| geometry.spacing()[a].to_f64_lossy().powi(-2))
        .sum();
    1.0 / (2.0 * d_max * s)
}

/// Pointwise reaction rate at one node. `source` is the volumetric value at
/// the node and is ignored by the other kinds.
#[inline]
pub fn apply_reaction<T: Real>(spec: &ReactionSpec, u: T, phi: T, h: T, source: T) -> T {
    match spec {
        ReactionSpec::None => T::zero(),
        ReactionSpec::SurfaceSink { rate, half_width } => {
            if phi.abs() <= T::lit(*half_width) * h {
                -T::lit(*rate) * u
            } else {
                T::zero()
            }
        }
        ReactionSpec::Volumetric | ReactionSpec::Function(_) => source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub total_mass: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub wall_seconds: f64,
}

/// `sum_active u * cell_volume`, reduced pairwise in chunk order.
pub fn total_mass<T: Real>(grid: &SparseBlockGrid<T>) -> Result<f64> {
    let u = grid.property(channels::U)?;
    Ok(diagnostics(grid, u, 0, 0.0).total_mass)
}

fn diagnostics<T: Real>(
    grid: &SparseBlockGrid<T>,
    u: PropertyId,
    step: usize,
    time: f64,
) -> StepDiagnostics {
    let data = grid.channel(u);
    let v = grid.chunk_volume();
    let stats: Vec<ChunkStats> = grid
        .masks()
        .par_iter()
        .enumerate()
        .map(|(slot, mask)| ChunkStats::of(&data[slot * v..(slot + 1) * v], mask.iter()))
        .collect();
    combine(
        &stats,
        grid.geometry().cell_volume().to_f64_lossy(),
        step,
        time,
    )
}

#[derive(Debug, Clone, Copy)]
struct ChunkStats {
    sum: f64,
    min: f64,
    max: f64,
}

impl ChunkStats {
    fn of<T: Real>(values: &[T], offsets: impl Iterator<Item = usize>) -> Self {
        let mut buf = [0.0f64; 512];
        let mut n = 0;
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for off in offsets {
            let x = values[off].to_f64_lossy();
            buf[n] = x;
            n += 1;
            min = min.min(x);
            max = max.max(x);
        }
        ChunkStats {
            sum: pairwise_sum(&buf[..n]),
            min,
            max,
        }
    }
}

fn combine(stats: &[ChunkStats], cell_volume: f64, step: usize, time: f64) -> StepDiagnostics {
    let sums: Vec<f64> = stats.iter().map(|s| s.sum).collect();
    StepDiagnostics {
        step,
        time,
        total_mass: pairwise_sum(&sums) * cell_volume,
        min_u: stats.iter().map(|s| s.min).fold(f64::INFINITY, f64::min),
        max_u: stats
            .iter()
            .map(|s| s.max)
            .fold(f64::NEG_INFINITY, f64::max),
        wall_seconds: 0.0,
    }
}

/// Neighbor slots at or above this value refer to Dirichlet box faces.
const DIRICHLET_BASE: u32 = u32::MAX - 6;

#[derive(Debug, Clone, Copy)]
struct NodePlan {
    offset: u16,
    sink: bool,
    /// Flat indices ordered `[-x, +x, -y, +y, -z, +z]`. A closed face points
    /// at the center itself.
    nb: [u32; 6],
}

#[derive(Debug, Default)]
struct ChunkPlan {
    nodes: Vec<NodePlan>,
    frozen: Vec<u16>,
}

#[derive(Debug, Clone, Copy)]
struct Ids {
    u: PropertyId,
    u_next: PropertyId,
    d: PropertyId,
    phi: PropertyId,
    reaction: Option<PropertyId>,
}

/// FTCS stepper bound to one grid layout.
///
/// The stencil plan is built once from the (static) phase geometry; later
/// steps only read `u`, `D` and the reaction inputs.
pub struct Solver<T> {
    config: SimulationConfig,
    ids: Ids,
    plan: Vec<ChunkPlan>,
    dims: usize,
    dt: T,
    inv_h2: [T; 3],
    h: T,
    dirichlet: [T; 6],
    step: usize,
    revision: u64,
    bound: f64,
}

impl<T: Real> Solver<T> {
    /// Validates `config` against `grid` and precomputes the stencil plan.
    pub fn new(grid: &SparseBlockGrid<T>, config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let ids = Ids {
            u: grid.property(channels::U)?,
            u_next: grid.property(channels::U_NEXT)?,
            d: grid.property(channels::DIFFUSION)?,
            phi: grid.property(channels::PHI)?,
            reaction: match config.reaction {
                ReactionSpec::Volumetric => Some(grid.property(channels::REACTION)?),
                _ => None,
            },
        };
        let geo = grid.geometry();
        let eps = config
            .boundary_epsilon
            .map(T::lit)
            .unwrap_or_else(T::epsilon);
        let cutoff = T::lit(config.phase_band.low) + eps;
        let upper = T::lit(config.phase_band.high) - eps;
        let open = |phi: T| phi > cutoff && phi < upper;

        let n_values = grid.chunk_count() * grid.chunk_volume();
        if n_values >= DIRICHLET_BASE as usize {
            return Err(Error::input("grid too large for 32-bit stencil indices"));
        }

        let v = grid.chunk_volume();
        let dims = geo.dims();
        let size = geo.size();
        let phi = grid.channel(ids.phi);
        let d = grid.channel(ids.d);
        let h = geo.h();
        let sink_width = match config.reaction {
            ReactionSpec::SurfaceSink { half_width, .. } => Some(T::lit(half_width) * h),
            _ => None,
        };

        let mut d_max = 0.0f64;
        let mut plan = Vec::with_capacity(grid.chunk_count());
        for chunk in grid.chunks() {
            let slot = chunk.slot();
            let mut cp = ChunkPlan::default();
            for off in chunk.mask().iter() {
                let c = slot * v + off;
                if !open(phi[c]) {
                    cp.frozen.push(off as u16);
                    continue;
                }
                let dc = d[c];
                if !dc.is_finite() || dc < T::zero() {
                    return Err(Error::input(format!(
                        "diffusion coefficient {dc} at node {:?} is negative or non-finite",
                        node_of(dims, chunk.key(), off)
                    )));
                }
                d_max = d_max.max(dc.to_f64_lossy());
                let idx = node_of(dims, chunk.key(), off);
                let mut nb = [c as u32; 6];
                for a in 0..dims {
                    for (dir, high) in [(0usize, false), (1, true)] {
                        let slot_nb = &mut nb[2 * a + dir];
                        let at_face = if high {
                            idx[a] + 1 == size[a]
                        } else {
                            idx[a] == 0
                        };
                        if at_face {
                            if let FaceCondition::Dirichlet(_) = config.outer_box_bc.face(a, high) {
                                *slot_nb = DIRICHLET_BASE + (2 * a + dir) as u32;
                            }
                            continue;
                        }
                        let mut n = idx;
                        if high {
                            n[a] += 1;
                        } else {
                            n[a] -= 1;
                        }
                        if let Some((s, o)) = grid.locate_active(NodeIndex(n)) {
                            let f = s * v + o;
                            if open(phi[f]) {
                                *slot_nb = f as u32;
                            }
                        }
                    }
                }
                let sink = sink_width.is_some_and(|w| phi[c].abs() <= w);
                cp.nodes.push(NodePlan {
                    offset: off as u16,
                    sink,
                    nb,
                });
            }
            plan.push(cp);
        }

        let bound = if d_max > 0.0 {
            stability_dt(geo, d_max)
        } else {
            f64::INFINITY
        };
        if !(config.dt < bound) && !config.force_dt {
            return Err(Error::Stability {
                dt: config.dt,
                bound,
            });
        }

        let mut inv_h2 = [T::zero(); 3];
        for (a, s) in inv_h2.iter_mut().enumerate().take(dims) {
            *s = T::one() / (geo.spacing()[a] * geo.spacing()[a]);
        }
        let mut dirichlet = [T::zero(); 6];
        for a in 0..3 {
            for (dir, high) in [(0usize, false), (1, true)] {
                if let FaceCondition::Dirichlet(val) = config.outer_box_bc.face(a, high) {
                    dirichlet[2 * a + dir] = T::lit(val);
                }
            }
        }
        Ok(Solver {
            dt: T::lit(config.dt),
            config,
            ids,
            plan,
            dims,
            inv_h2,
            h,
            dirichlet,
            step: 0,
            revision: grid.revision(),
            bound,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    /// Strict time-step bound computed from the largest phase `D`.
    pub fn stability_bound(&self) -> f64 {
        self.bound
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    /// Number of nodes the stencil updates (the rest are carried over).
    pub fn updated_node_count(&self) -> usize {
        self.plan.iter().map(|p| p.nodes.len()).sum()
    }

    /// Diagnostics of the current state without stepping.
    pub fn diagnostics(&self, grid: &SparseBlockGrid<T>) -> StepDiagnostics {
        diagnostics(grid, self.ids.u, self.step, self.time())
    }

    /// One explicit Euler step; `u` holds the new state afterwards.
    pub fn step(&mut self, grid: &mut SparseBlockGrid<T>) -> Result<StepDiagnostics> {
        if grid.revision() != self.revision {
            return Err(Error::input(
                "grid layout changed after the solver was built",
            ));
        }
        let start = Instant::now();
        let v = grid.chunk_volume();
        let time = self.time();
        let ids = self.ids;
        let geo = grid.geometry().clone();
        let keys: Vec<_> = grid.chunk_keys().to_vec();
        let masks: Vec<_> = grid.masks().to_vec();
        let (out, reads) = grid.split_channels(ids.u_next);
        let u = reads[ids.u.index()].expect("u is read-only");
        let d = reads[ids.d.index()].expect("D is read-only");
        let reac = ids
            .reaction
            .map(|r| reads[r.index()].expect("reaction is read-only"));
        let this = &*self;
        let half = T::lit(0.5);

        let results: Vec<std::result::Result<ChunkStats, usize>> = out
            .par_chunks_mut(v)
            .zip(this.plan.par_iter())
            .enumerate()
            .map(|(slot, (o, cp))| {
                let base = slot * v;
                for np in &cp.nodes {
                    let c = base + np.offset as usize;
                    let uc = u[c];
                    let dc = d[c];
                    let mut acc = T::zero();
                    for a in 0..this.dims {
                        let (um, dm) = this.neighbor(u, d, np.nb[2 * a], dc);
                        let (up, dp) = this.neighbor(u, d, np.nb[2 * a + 1], dc);
                        let flux = (dc + dp) * half * (up - uc) - (dc + dm) * half * (uc - um);
                        acc = acc + this.inv_h2[a] * flux;
                    }
                    let r = match &this.config.reaction {
                        ReactionSpec::None => T::zero(),
                        ReactionSpec::SurfaceSink { rate, .. } => {
                            if np.sink {
                                -T::lit(*rate) * uc
                            } else {
                                T::zero()
                            }
                        }
                        ReactionSpec::Volumetric => reac.map_or(T::zero(), |s| s[c]),
                        ReactionSpec::Function(f) => {
                            let idx = node_of(this.dims, keys[slot], np.offset as usize);
                            let p = geo.position(NodeIndex(idx));
                            let x = [
                                p[0].to_f64_lossy(),
                                p[1].to_f64_lossy(),
                                p[2].to_f64_lossy(),
                            ];
                            T::lit((f.0)(x, time))
                        }
                    };
                    let next = uc + this.dt * acc + this.dt * r;
                    if !next.is_finite() {
                        return Err(c);
                    }
                    o[np.offset as usize] = next;
                }
                for &f in &cp.frozen {
                    o[f as usize] = u[base + f as usize];
                }
                Ok(ChunkStats::of(o, masks[slot].iter()))
            })
            .collect();

        let mut stats = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Ok(s) => stats.push(s),
                Err(flat) => {
                    let index = node_of(self.dims, keys[flat / v], flat % v);
                    return Err(Error::NonFinite {
                        step: self.step + 1,
                        index,
                    });
                }
            }
        }
        grid.swap_channels(ids.u, ids.u_next);
        self.step += 1;
        let mut diag = combine(
            &stats,
            geo.cell_volume().to_f64_lossy(),
            self.step,
            self.time(),
        );
        diag.wall_seconds = start.elapsed().as_secs_f64();
        Ok(diag)
    }

    #[inline(always)]
    fn neighbor(&self, u: &[T], d: &[T], nb: u32, dc: T) -> (T, T) {
        if nb >= DIRICHLET_BASE {
            (self.dirichlet[(nb - DIRICHLET_BASE) as usize], dc)
        } else {
            (u[nb as usize], d[nb as usize])
        }
    }

    /// Grid-spacing used for the surface-sink band.
    pub fn band_spacing(&self) -> T {
        self.h
    }
}

/// Builds a one-off solver and advances by a single step.
pub fn ftcs_step<T: Real>(
    grid: &mut SparseBlockGrid<T>,
    config: &SimulationConfig,
) -> Result<StepDiagnostics> {
    Solver::new(grid, config.clone())?.step(grid)
}

/// Callback invoked on the coordinating thread between steps.
pub trait Observer<T: Real> {
    fn observe(&mut self, grid: &SparseBlockGrid<T>, diag: &StepDiagnostics) -> Result<()>;
}

/// Collects every observed [`StepDiagnostics`].
#[derive(Debug, Default, Clone)]
pub struct MassRecorder {
    pub records: Vec<StepDiagnostics>,
}

impl<T: Real> Observer<T> for MassRecorder {
    fn observe(&mut self, _grid: &SparseBlockGrid<T>, diag: &StepDiagnostics) -> Result<()> {
        self.records.push(*diag);
        Ok(())
    }
}

/// Runs `config.n_steps` steps.
///
/// Observers see the initial state (step 0), every `record_every`-th step
/// and the final step. The returned series holds the same samples.
pub fn run_simulation<T: Real>(
    grid: &mut SparseBlockGrid<T>,
    config: &SimulationConfig,
    observers: &mut [&mut dyn Observer<T>],
) -> Result<Vec<StepDiagnostics>> {
    let mut solver = Solver::new(grid, config.clone())?;
    let mut series = Vec::new();
    let initial = solver.diagnostics(grid);
    for o in observers.iter_mut() {
        o.observe(grid, &initial)?;
    }
    series.push(initial);
    for n in 1..=config.n_steps {
        let diag = solver.step(grid)?;
        if n % config.record_every == 0 || n == config.n_steps {
            for o in observers.iter_mut() {
                o.observe(grid, &diag)?;
            }
            series.push(diag);
        }
    }
    Ok(series)
}

/// Largest value of the diffusion channel over the active nodes.
pub fn max_diffusion<T: Real>(grid: &SparseBlockGrid<T>) -> Result<f64> {
    let d = grid.property(channels::DIFFUSION)?;
    let data = grid.channel(d);
    let mut m = 0.0f64;
    grid.for_each_active_node(|_, flat| m = m.max(data[flat].to_f64_lossy()));
    Ok(m)
}
