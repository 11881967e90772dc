//! Pipeline configuration document.

use std::path::{Path, PathBuf};

use poresim::analysis::{FrapSchedule, NodeBox};
use poresim::geometry::synthetic::SyntheticGeometry;
use poresim::geometry::{DiffusionProfile, PhaseBand};
use poresim::levelset::LevelSetOptions;
use poresim::solver::{BoxBoundary, InitialCondition, ReactionSpec, SimulationConfig};
use poresim::verification::{ManufacturedCase, RedistanceShape};
use poresim::{Error, Precision, Result};
use serde::{Deserialize, Serialize};

/// Geometry source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// Raw byte mask with a JSON sidecar (`<path>.json` when omitted).
    Raw {
        path: PathBuf,
        #[serde(default)]
        sidecar: Option<PathBuf>,
    },
    /// ASCII PGM file or directory of slices.
    Pgm {
        path: PathBuf,
        #[serde(default = "one")]
        voxel_size: f64,
    },
    /// Dense SDF snapshot (`DFLD`).
    Sdf { path: PathBuf },
    /// Sparse grid snapshot (`SBGR`); precision follows the file.
    Grid { path: PathBuf },
    /// Analytic microstructure on a voxel lattice.
    Synthetic {
        geometry: SyntheticGeometry,
        size: Vec<usize>,
        #[serde(default)]
        voxel_size: Option<Vec<f64>>,
        /// Voxelise and redistance instead of sampling the analytic SDF.
        #[serde(default)]
        voxelize: bool,
    },
}

impl InputSpec {
    /// Infers the format from a path: `.raw`, `.pgm` or a directory, `.dfld`, `.sbgr`.
    pub fn from_path(path: &Path, voxel_size: f64) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        Ok(match ext.as_str() {
            "raw" => InputSpec::Raw {
                path: path.into(),
                sidecar: None,
            },
            "pgm" => InputSpec::Pgm {
                path: path.into(),
                voxel_size,
            },
            "dfld" => InputSpec::Sdf { path: path.into() },
            "sbgr" => InputSpec::Grid { path: path.into() },
            _ if path.is_dir() => InputSpec::Pgm {
                path: path.into(),
                voxel_size,
            },
            _ => {
                return Err(Error::Input(format!(
                    "cannot infer input format of {}; use .raw, .pgm, .dfld, .sbgr or a directory",
                    path.display()
                )))
            }
        })
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            InputSpec::Raw { path, sidecar } => {
                let mut v = vec![path];
                if let Some(s) = sidecar {
                    v.push(s);
                }
                v
            }
            InputSpec::Pgm { path, .. } | InputSpec::Sdf { path } | InputSpec::Grid { path } => {
                vec![path]
            }
            InputSpec::Synthetic { .. } => Vec::new(),
        }
    }
}

/// Diffusion coefficient. `uniform` wins when set; otherwise the sigmoid
/// profile with `gamma2 = 4/h` and the midpoint at the wall by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSpec {
    pub uniform: Option<f64>,
    pub d_min: f64,
    pub d_max: f64,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        DiffusionSpec {
            uniform: Some(1.0),
            d_min: 0.0,
            d_max: 1.0,
            gamma1: None,
            gamma2: None,
        }
    }
}

impl DiffusionSpec {
    /// Concrete profile for spacing `h` and smallest phase value `phi_min`.
    pub fn profile(&self, h: f64, phi_min: f64) -> Result<DiffusionProfile> {
        if let Some(d) = self.uniform {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Input(format!(
                    "field `diffusion.uniform`: must be > 0, got {d}"
                )));
            }
            return Ok(DiffusionProfile::uniform(d));
        }
        let gamma2 = self
            .gamma2
            .unwrap_or_else(|| DiffusionProfile::default_gamma2(h));
        let gamma1 = self.gamma1.unwrap_or(-gamma2 * phi_min);
        DiffusionProfile::new(self.d_min, self.d_max, gamma1, gamma2)
    }

    fn validate(&self) -> Result<()> {
        match self.uniform {
            Some(d) if !(d > 0.0 && d.is_finite()) => Err(Error::Input(format!(
                "field `diffusion.uniform`: must be > 0, got {d}"
            ))),
            Some(_) => Ok(()),
            None => DiffusionProfile::new(
                self.d_min,
                self.d_max,
                self.gamma1.unwrap_or(0.0),
                self.gamma2.unwrap_or(1.0),
            )
            .map(|_| ()),
        }
    }
}

/// Time integration settings; `dt` defaults to `dt_fraction` of the bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "half")]
    pub dt_fraction: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub boundary_epsilon: Option<f64>,
    #[serde(default)]
    pub reaction: ReactionSpec,
    #[serde(default)]
    pub outer_box_bc: BoxBoundary,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default)]
    pub force_dt: bool,
}

impl SimulationSpec {
    /// Solver config for a grid whose stability bound is `bound`.
    pub fn resolve(&self, band: PhaseBand, bound: f64) -> SimulationConfig {
        SimulationConfig {
            dt: self.dt.unwrap_or(self.dt_fraction * bound),
            n_steps: self.n_steps,
            phase_band: band,
            boundary_epsilon: self.boundary_epsilon,
            reaction: self.reaction.clone(),
            outer_box_bc: self.outer_box_bc,
            record_every: self.record_every,
            force_dt: self.force_dt,
        }
    }

    fn validate(&self, band: PhaseBand) -> Result<()> {
        if !(self.dt_fraction > 0.0 && self.dt_fraction.is_finite()) {
            return Err(Error::Input(
                "field `simulation.dt_fraction`: must be > 0".into(),
            ));
        }
        // checked with a stand-in dt; the real one needs the grid
        let mut c = self.resolve(band, 1.0);
        if self.n_steps == 0 {
            c.n_steps = 1;
        }
        c.validate().map_err(|e| prefix("simulation", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// VTK every this many steps; 0 writes none.
    pub vtk_every: usize,
    /// Value written for inactive nodes; NaN when absent.
    pub vtk_blank: Option<f64>,
    pub vtk_prefix: String,
    pub mass_csv: PathBuf,
    pub sdf_snapshot: PathBuf,
    pub grid_snapshot: PathBuf,
    pub final_snapshot: PathBuf,
    pub frap_csv: PathBuf,
    pub tortuosity_json: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            vtk_every: 0,
            vtk_blank: None,
            vtk_prefix: "state".into(),
            mass_csv: "mass.csv".into(),
            sdf_snapshot: "sdf.dfld".into(),
            grid_snapshot: "grid.sbgr".into(),
            final_snapshot: "final.sbgr".into(),
            frap_csv: "frap_recovery.csv".into(),
            tortuosity_json: "tortuosity.json".into(),
        }
    }
}

impl OutputSpec {
    /// `name` under the output directory unless absolute.
    pub fn path(&self, name: &Path) -> PathBuf {
        self.dir.join(name)
    }

    pub fn blank(&self) -> f64 {
        self.vtk_blank.unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrapSpec {
    /// Bleach box in node indices (half-open); a central box when absent.
    #[serde(default)]
    pub region: Option<NodeBox>,
    /// Edge of the central box as a fraction of each axis.
    #[serde(default = "region_fraction")]
    pub region_fraction: f64,
    #[serde(default = "one")]
    pub d_molecular: f64,
    pub schedule: FrapSchedule,
    /// `D` search bracket as multiples of `d_molecular`.
    #[serde(default = "search_interval")]
    pub search_interval: [f64; 2],
    /// Exponent of the reported power-law estimate `psi^(-n)`.
    #[serde(default = "power_n")]
    pub power_law_n: f64,
    /// Slope of the reported linear estimate `psi + beta (1 - psi)`.
    #[serde(default = "beta")]
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyCase {
    /// Manufactured solution on a disk.
    Disk,
    /// Redistancing of the unit ball.
    Ball,
    /// Redistancing of the unit disk.
    DiskRedistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub case: VerifyCase,
    pub resolutions: Vec<usize>,
    /// Accepted slope window; per-case default when absent.
    pub window: Option<[f64; 2]>,
    pub manufactured: ManufacturedCase,
    /// Redistancing cases: measure the exact SDF without iterating.
    pub assume_sdf: bool,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            case: VerifyCase::Disk,
            resolutions: vec![32, 64, 128],
            window: None,
            manufactured: ManufacturedCase::default(),
            assume_sdf: false,
        }
    }
}

impl VerifySpec {
    pub fn slope_window(&self) -> [f64; 2] {
        self.window.unwrap_or(match self.case {
            VerifyCase::Disk => [1.2, 1.8],
            VerifyCase::Ball | VerifyCase::DiskRedistance => [0.75, 1.25],
        })
    }

    pub fn redistance_shape(&self) -> Option<RedistanceShape> {
        match self.case {
            VerifyCase::Disk => None,
            VerifyCase::Ball => Some(RedistanceShape::Ball3d),
            VerifyCase::DiskRedistance => Some(RedistanceShape::Disk2d),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub input: Option<InputSpec>,
    /// Box opening width in voxels applied to the mask before redistancing.
    #[serde(default)]
    pub min_thickness_cells: usize,
    #[serde(default)]
    pub levelset: LevelSetOptions,
    #[serde(default = "PhaseBand::positive")]
    pub phase_band: PhaseBand,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    /// Initial `u`; zero when absent, kept from the file for grid input.
    #[serde(default)]
    pub initial_condition: Option<InitialCondition>,
    #[serde(default)]
    pub simulation: Option<SimulationSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub frap: Option<FrapSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
}

impl PipelineConfig {
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Input(format!("config: {e}")))
    }

    /// Makes relative input and output paths relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let Some(input) = &mut self.input {
            for p in input.paths_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        if self.outputs.dir.is_relative() {
            self.outputs.dir = base.join(&self.outputs.dir);
        }
    }

    /// Checks every section that is present; no file is touched.
    pub fn validate(&self) -> Result<()> {
        self.levelset
            .validate()
            .map_err(|e| prefix("levelset", e))?;
        PhaseBand::new(self.phase_band.low, self.phase_band.high)
            .map_err(|e| prefix("phase_band", e))?;
        self.diffusion.validate()?;
        if let Some(sim) = &self.simulation {
            sim.validate(self.phase_band)?;
        }
        if let Some(f) = &self.frap {
            if !(f.region_fraction > 0.0 && f.region_fraction < 1.0) {
                return Err(Error::Input(
                    "field `frap.region_fraction`: must lie in (0, 1)".into(),
                ));
            }
            if !(f.d_molecular > 0.0 && f.d_molecular.is_finite()) {
                return Err(Error::Input("field `frap.d_molecular`: must be > 0".into()));
            }
            let [lo, hi] = f.search_interval;
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::Input(
                    "field `frap.search_interval`: need 0 < low < high".into(),
                ));
            }
            if !(f.schedule.t_end > 0.0 && f.schedule.t_end.is_finite())
                || f.schedule.samples == 0
                || !(f.schedule.dt_fraction > 0.0 && f.schedule.dt_fraction < 1.0)
            {
                return Err(Error::Input(
                    "field `frap.schedule`: need t_end > 0, samples >= 1, dt_fraction in (0, 1)"
                        .into(),
                ));
            }
            if let Some(r) = f.region {
                NodeBox::new(r.lower, r.upper).map_err(|e| prefix("frap.region", e))?;
            }
        }
        if let Some(input) = &self.input {
            validate_input(input)?;
        }
        self.verify
            .manufactured
            .validate()
            .map_err(|e| prefix("verify.manufactured", e))?;
        if self.verify.resolutions.is_empty() {
            return Err(Error::Input(
                "field `verify.resolutions`: must not be empty".into(),
            ));
        }
        if let Some([lo, hi]) = self.verify.window {
            if !(lo < hi) {
                return Err(Error::Input(
                    "field `verify.window`: need low < high".into(),
                ));
            }
        }
        Ok(())
    }

    /// The input section, or an error naming it.
    pub fn require_input(&self) -> Result<&InputSpec> {
        self.input
            .as_ref()
            .ok_or_else(|| Error::Input("field `input`: required for this command".into()))
    }
}

fn validate_input(input: &InputSpec) -> Result<()> {
    let exists = |p: &Path, field: &str| {
        if p.exists() {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "field `input.{field}`: {} does not exist",
                p.display()
            )))
        }
    };
    match input {
        InputSpec::Raw { path, sidecar } => {
            exists(path, "path")?;
            if let Some(s) = sidecar {
                exists(s, "sidecar")?;
            }
        }
        InputSpec::Pgm { path, voxel_size } => {
            exists(path, "path")?;
            if !(*voxel_size > 0.0 && voxel_size.is_finite()) {
                return Err(Error::Input("field `input.voxel_size`: must be > 0".into()));
            }
        }
        InputSpec::Sdf { path } | InputSpec::Grid { path } => exists(path, "path")?,
        InputSpec::Synthetic {
            size, voxel_size, ..
        } => {
            if !(2..=3).contains(&size.len()) || size.contains(&0) {
                return Err(Error::Input(
                    "field `input.size`: need 2 or 3 positive entries".into(),
                ));
            }
            if let Some(v) = voxel_size {
                if v.len() != size.len() || v.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                    return Err(Error::Input(
                        "field `input.voxel_size`: need one positive entry per axis".into(),
                    ));
                }
            }
        }
    }
    Ok(())
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("section `{section}`: {m}")),
        other => other,
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

fn region_fraction() -> f64 {
    0.25
}

fn search_interval() -> [f64; 2] {
    [0.05, 1.5]
}

fn power_n() -> f64 {
    0.5
}

fn beta() -> f64 {
    poresim::analysis::DEFAULT_BETA
}
