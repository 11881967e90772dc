use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PhaseBand;

/// Boundary condition on one face of the bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceCondition {
    #[default]
    NoFlux,
    /// Fixed value in a one-cell halo outside the face.
    Dirichlet(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxBoundary {
    pub x_low: FaceCondition,
    pub x_high: FaceCondition,
    pub y_low: FaceCondition,
    pub y_high: FaceCondition,
    pub z_low: FaceCondition,
    pub z_high: FaceCondition,
}

impl BoxBoundary {
    pub fn face(&self, axis: usize, high: bool) -> FaceCondition {
        match (axis, high) {
            (0, false) => self.x_low,
            (0, true) => self.x_high,
            (1, false) => self.y_low,
            (1, true) => self.y_high,
            (2, false) => self.z_low,
            (2, true) => self.z_high,
            _ => FaceCondition::NoFlux,
        }
    }

    pub fn set_face(&mut self, axis: usize, high: bool, cond: FaceCondition) {
        let slot = match (axis, high) {
            (0, false) => &mut self.x_low,
            (0, true) => &mut self.x_high,
            (1, false) => &mut self.y_low,
            (1, true) => &mut self.y_high,
            (2, false) => &mut self.z_low,
            _ => &mut self.z_high,
        };
        *slot = cond;
    }

    pub fn is_sealed(&self) -> bool {
        (0..3).all(|a| {
            self.face(a, false) == FaceCondition::NoFlux
                && self.face(a, true) == FaceCondition::NoFlux
        })
    }
}

/// Volumetric source `f(position, time)`.
#[derive(Clone)]
pub struct SourceFn(pub Arc<dyn Fn([f64; 3], f64) -> f64 + Send + Sync>);

impl SourceFn {
    pub fn new(f: impl Fn([f64; 3], f64) -> f64 + Send + Sync + 'static) -> Self {
        SourceFn(Arc::new(f))
    }
}

impl fmt::Debug for SourceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SourceFn(..)")
    }
}

/// Reaction term `f` of the transport equation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionSpec {
    #[default]
    None,
    /// `-rate * u` on nodes with `|phi| <= half_width * h`.
    SurfaceSink {
        rate: f64,
        #[serde(default = "one")]
        half_width: f64,
    },
    /// Rate read from the `reaction` channel.
    Volumetric,
    /// Rate given by a closure; not expressible in config files.
    #[serde(skip)]
    Function(SourceFn),
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl ReactionSpec {
    pub fn validate(&self) -> Result<()> {
        if let ReactionSpec::SurfaceSink { rate, half_width } = *self {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::input(format!("sink rate must be >= 0, got {rate}")));
            }
            if !(half_width > 0.0 && half_width.is_finite()) {
                return Err(Error::input(format!(
                    "sink half_width must be > 0, got {half_width}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub phase_band: PhaseBand,
    /// Extra margin above `phase_band.low` for the wall test; machine epsilon when absent.
    #[serde(default)]
    pub boundary_epsilon: Option<f64>,
    #[serde(default)]
    pub reaction: ReactionSpec,
    #[serde(default)]
    pub outer_box_bc: BoxBoundary,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    /// Skip the stability check.
    #[serde(default)]
    pub force_dt: bool,
}

impl SimulationConfig {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        SimulationConfig {
            dt,
            n_steps,
            phase_band: PhaseBand::positive(),
            boundary_epsilon: None,
            reaction: ReactionSpec::None,
            outer_box_bc: BoxBoundary::default(),
            record_every: 1,
            force_dt: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::input(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::input("n_steps must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::input("record_every must be at least 1"));
        }
        if let Some(e) = self.boundary_epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::input("boundary_epsilon must be >= 0"));
            }
        }
        PhaseBand::new(self.phase_band.low, self.phase_band.high)?;
        self.reaction.validate()?;
        for a in 0..3 {
            for high in [false, true] {
                if let FaceCondition::Dirichlet(v) = self.outer_box_bc.face(a, high) {
                    if !v.is_finite() {
                        return Err(Error::input("Dirichlet values must be finite"));
                    }
                }
            }
        }
        Ok(())
    }
}
