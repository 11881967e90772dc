use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{channels, SparseBlockGrid};
use crate::scalar::Real;

/// Initial `u` over the active nodes, in physical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Uniform {
        value: f64,
    },
    Ball {
        center: [f64; 3],
        radius: f64,
        inside: f64,
        #[serde(default)]
        outside: f64,
    },
    Box {
        lower: [f64; 3],
        upper: [f64; 3],
        inside: f64,
        #[serde(default)]
        outside: f64,
    },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Uniform { value: 0.0 }
    }
}

impl InitialCondition {
    pub fn value_at(&self, p: [f64; 3]) -> f64 {
        match *self {
            InitialCondition::Uniform { value } => value,
            InitialCondition::Ball {
                center,
                radius,
                inside,
                outside,
            } => {
                let r2: f64 = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
                if r2 <= radius * radius {
                    inside
                } else {
                    outside
                }
            }
            InitialCondition::Box {
                lower,
                upper,
                inside,
                outside,
            } => {
                if (0..3).all(|a| p[a] >= lower[a] && p[a] <= upper[a]) {
                    inside
                } else {
                    outside
                }
            }
        }
    }
}

/// Writes the initial state into `u` and clears `u_next`.
pub fn apply_initial_condition<T: Real>(
    grid: &mut SparseBlockGrid<T>,
    ic: &InitialCondition,
) -> Result<()> {
    let u = grid.property(channels::U)?;
    let dims = grid.geometry().dims();
    grid.fill_with(u, |_, p| {
        let mut x = [0.0; 3];
        for a in 0..dims {
            x[a] = p[a].to_f64_lossy();
        }
        T::lit(ic.value_at(x))
    });
    if grid.channel(u).iter().any(|v| !v.is_finite()) {
        return Err(Error::input("initial condition is not finite"));
    }
    let next = grid.property(channels::U_NEXT)?;
    grid.channel_mut(next)
        .iter_mut()
        .for_each(|v| *v = T::zero());
    Ok(())
}
