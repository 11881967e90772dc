//! Subcommand bodies, generic over the scalar type.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use poresim::analysis::{
    fit_effective_d, run_frap, tortuosity_linear, tortuosity_power_law, NodeBox, TortuosityResult,
};
use poresim::geometry::synthetic::SyntheticGeometry;
use poresim::geometry::{build_sparse_grid, grid_porosity, PhaseBand};
use poresim::grid::snapshot::{dense_equivalent_bytes, encode_grid};
use poresim::grid::{channels, OccupancyStats};
use poresim::io::vtk::write_field_vtk;
use poresim::io::{write_json, MassCsvWriter, VtkSeriesWriter};
use poresim::levelset::RedistanceDiagnostics;
use poresim::solver::{max_diffusion, stability_dt, Observer, Solver};
use poresim::verification::{run_disk_convergence, run_redistance_convergence, ConvergenceReport};
use poresim::{Error, Real, Result, SparseBlockGrid};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::pipeline::{build_grid, build_sdf};

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

fn print_json<S: Serialize>(value: &S) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Debug, Serialize)]
struct RedistanceReport {
    iterations: usize,
    final_residual: f64,
    converged: bool,
    size: Vec<usize>,
    spacing: Vec<f64>,
    phi_min: f64,
    phi_max: f64,
}

/// Writes the SDF snapshot and a diagnostics JSON next to it.
pub fn redistance<T: Real>(
    cfg: &PipelineConfig,
    assume_sdf: bool,
    output: Option<PathBuf>,
    diagnostics: Option<PathBuf>,
    vtk: Option<PathBuf>,
) -> Result<()> {
    let (sdf, diag) = build_sdf::<T>(cfg, assume_sdf)?;
    let diag = diag.unwrap_or(RedistanceDiagnostics {
        iterations: 0,
        final_residual: 0.0,
        converged: true,
    });
    let out = output.unwrap_or_else(|| cfg.outputs.path(&cfg.outputs.sdf_snapshot));
    let diag_path = diagnostics.unwrap_or_else(|| out.with_extension("json"));
    ensure_parent(&out)?;
    fs::write(&out, sdf.encode())?;
    let geo = sdf.geometry();
    let (lo, hi) = sdf.min_max();
    let report = RedistanceReport {
        iterations: diag.iterations,
        final_residual: diag.final_residual,
        converged: diag.converged,
        size: geo.size()[..geo.dims()].to_vec(),
        spacing: geo.spacing()[..geo.dims()]
            .iter()
            .map(|h| h.to_f64_lossy())
            .collect(),
        phi_min: lo.to_f64_lossy(),
        phi_max: hi.to_f64_lossy(),
    };
    ensure_parent(&diag_path)?;
    write_json(&diag_path, &report)?;
    if let Some(v) = vtk {
        ensure_parent(&v)?;
        write_field_vtk(
            BufWriter::new(File::create(&v)?),
            &sdf,
            channels::PHI,
            "signed distance",
        )?;
    }
    print_json(&report)
}

#[derive(Debug, Serialize)]
pub struct GridStats {
    #[serde(flatten)]
    pub occupancy: OccupancyStats,
    pub sparse_snapshot_bytes: usize,
    pub dense_snapshot_bytes: usize,
    pub snapshot_ratio: f64,
    pub precision: &'static str,
}

pub fn grid_stats<T: Real>(grid: &SparseBlockGrid<T>) -> GridStats {
    let sparse = encode_grid(grid).len();
    let dense = dense_equivalent_bytes(grid);
    GridStats {
        occupancy: grid.occupancy_stats(),
        sparse_snapshot_bytes: sparse,
        dense_snapshot_bytes: dense,
        snapshot_ratio: sparse as f64 / dense as f64,
        precision: T::NAME,
    }
}

pub fn build_grid_cmd<T: Real>(cfg: &PipelineConfig, output: Option<PathBuf>) -> Result<()> {
    let grid = build_grid::<T>(cfg)?;
    let out = output.unwrap_or_else(|| cfg.outputs.path(&cfg.outputs.grid_snapshot));
    ensure_parent(&out)?;
    fs::write(&out, encode_grid(&grid))?;
    print_json(&grid_stats(&grid))
}

pub fn stats<T: Real>(cfg: &PipelineConfig) -> Result<()> {
    let grid = build_grid::<T>(cfg)?;
    print_json(&grid_stats(&grid))
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    steps: usize,
    time: f64,
    dt: f64,
    stability_bound: f64,
    active_nodes: usize,
    initial_mass: f64,
    final_mass: f64,
    relative_mass_drift: f64,
    mass_csv: PathBuf,
    final_snapshot: PathBuf,
    vtk_files: usize,
}

/// Geometry build, time loop, mass CSV, VTK series and final snapshot.
///
/// `steps` overrides `simulation.n_steps`; zero writes the initial state only.
pub fn simulate<T: Real>(cfg: &PipelineConfig, steps: Option<usize>, force_dt: bool) -> Result<()> {
    let spec = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| Error::Input("field `simulation`: required for simulate".into()))?;
    let mut grid = build_grid::<T>(cfg)?;
    let bound = stability_dt(grid.geometry(), max_diffusion(&grid)?);
    let n = steps.unwrap_or(spec.n_steps);
    let mut conf = spec.resolve(cfg.phase_band, bound);
    conf.force_dt |= force_dt;
    conf.n_steps = n.max(1);
    let record_every = conf.record_every;
    let dt = conf.dt;
    let mut solver = Solver::new(&grid, conf)?;

    let out = &cfg.outputs;
    fs::create_dir_all(&out.dir)?;
    let csv_path = out.path(&out.mass_csv);
    let mut csv = MassCsvWriter::create(&csv_path)?;
    let mut vtk = (out.vtk_every > 0).then(|| {
        VtkSeriesWriter::new(
            &out.dir,
            &out.vtk_prefix,
            out.vtk_every,
            out.blank(),
            &[channels::U, channels::DIFFUSION, channels::PHI],
        )
    });

    let first = solver.diagnostics(&grid);
    csv.observe(&grid, &first)?;
    if let Some(v) = &mut vtk {
        v.observe(&grid, &first)?;
    }
    let mut last = first;
    for s in 1..=n {
        last = solver.step(&mut grid)?;
        if s % record_every == 0 || s == n {
            csv.observe(&grid, &last)?;
        }
        if let Some(v) = &mut vtk {
            v.observe(&grid, &last)?;
        }
    }
    csv.into_inner()?;
    let snap = out.path(&out.final_snapshot);
    fs::write(&snap, encode_grid(&grid))?;
    let drift = if first.total_mass != 0.0 {
        (last.total_mass - first.total_mass) / first.total_mass
    } else {
        last.total_mass - first.total_mass
    };
    print_json(&SimulationSummary {
        steps: n,
        time: last.time,
        dt,
        stability_bound: bound,
        active_nodes: grid.active_node_count(),
        initial_mass: first.total_mass,
        final_mass: last.total_mass,
        relative_mass_drift: drift,
        mass_csv: csv_path,
        final_snapshot: snap,
        vtk_files: vtk.map_or(0, |v| v.written.len()),
    })
}

#[derive(Debug, Serialize)]
pub struct FrapReport {
    #[serde(flatten)]
    pub fit: TortuosityResult,
    pub d_molecular: f64,
    pub bleach_region: NodeBox,
    pub porosity: f64,
    pub tau_linear: f64,
    pub tau_power_law: Option<f64>,
    pub recovery_csv: PathBuf,
}

/// Bleach experiment on the configured geometry with `D = d_molecular` in
/// the phase, then a free-box fit of the effective diffusivity.
pub fn frap<T: Real>(cfg: &PipelineConfig) -> Result<FrapReport> {
    let spec = cfg
        .frap
        .as_ref()
        .ok_or_else(|| Error::Input("field `frap`: required for frap".into()))?;
    let mut grid = build_grid::<T>(cfg)?;
    let d = grid.property(channels::DIFFUSION)?;
    grid.channel_mut(d)
        .iter_mut()
        .for_each(|v| *v = T::lit(spec.d_molecular));
    let region = spec
        .region
        .unwrap_or_else(|| NodeBox::central(grid.geometry().size(), spec.region_fraction));
    let reference = run_frap(
        &mut grid,
        region,
        spec.d_molecular,
        &spec.schedule,
        cfg.phase_band,
    )
    .map_err(|e| match e {
        Error::Input(m) => Error::Input(format!("field `frap.region`: {m}")),
        other => other,
    })?;

    let open = SyntheticGeometry::Open.sdf_field(grid.geometry())?;
    let mut candidate = build_sparse_grid(&open, PhaseBand::positive(), &channels::STANDARD)?;
    let [lo, hi] = spec.search_interval;
    let fit = fit_effective_d(
        &reference,
        &mut candidate,
        &spec.schedule,
        (lo * spec.d_molecular, hi * spec.d_molecular),
    )?;

    let out = &cfg.outputs;
    fs::create_dir_all(&out.dir)?;
    let csv_path = out.path(&out.frap_csv);
    fs::write(&csv_path, reference.to_csv())?;
    let porosity = grid_porosity(&grid);
    let report = FrapReport {
        fit,
        d_molecular: spec.d_molecular,
        bleach_region: region,
        porosity,
        tau_linear: tortuosity_linear(porosity, spec.beta),
        tau_power_law: tortuosity_power_law(porosity, spec.power_law_n).ok(),
        recovery_csv: csv_path,
    };
    write_json(&out.path(&out.tortuosity_json), &report)?;
    Ok(report)
}

/// Convergence study; returns the report and whether both slopes pass.
pub fn verify<T: Real>(cfg: &PipelineConfig) -> Result<(ConvergenceReport, bool)> {
    let v = &cfg.verify;
    let report = match v.redistance_shape() {
        None => run_disk_convergence::<T>(&v.resolutions, &v.manufactured)?,
        Some(shape) => {
            run_redistance_convergence::<T>(&v.resolutions, shape, &cfg.levelset, v.assume_sdf)?
        }
    };
    let [lo, hi] = v.slope_window();
    let pass = report.within(lo, hi);
    let out = &cfg.outputs;
    fs::create_dir_all(&out.dir)?;
    write_json(
        &out.dir.join(format!("verify_{}.json", report.label)),
        &report,
    )?;
    for norm in ["l2", "linf"] {
        fs::write(
            out.dir.join(format!("verify_{}_{norm}.csv", report.label)),
            report.to_csv(norm)?,
        )?;
    }
    Ok((report, pass))
}
