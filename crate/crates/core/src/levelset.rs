//! Signed distance functions by Sussman redistancing.
//!
//! The level function is evolved in pseudo-time towards `|grad phi| = 1`
//! with first-order Godunov upwinding and the Peng smoothed sign. Updates
//! are Jacobi sweeps over the dense box: every node of sweep `n + 1` reads
//! only sweep `n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DenseField;
use crate::grid::NodeIndex;
use crate::scalar::Real;

/// Controls for [`sussman_redistance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelSetOptions {
    pub max_iterations: usize,
    /// Stop once the largest per-sweep change inside the stopping band is
    /// below `convergence_tolerance * h`.
    pub convergence_tolerance: f64,
    /// Pseudo-time step in units of `h`.
    pub pseudo_time_step: f64,
    /// Half-width (in `h`) of the band used for error norms.
    pub band_width_for_error: f64,
    /// Half-width (in `h`) of the band in which the stopping residual is measured.
    pub stop_band_width: f64,
}

impl Default for LevelSetOptions {
    fn default() -> Self {
        LevelSetOptions {
            max_iterations: 1000,
            convergence_tolerance: 1e-3,
            pseudo_time_step: 0.5,
            band_width_for_error: 4.0,
            stop_band_width: 6.0,
        }
    }
}

impl LevelSetOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::input("levelset.max_iterations must be >= 1"));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::input("levelset.convergence_tolerance must be > 0"));
        }
        if !(self.pseudo_time_step > 0.0 && self.pseudo_time_step <= 1.0) {
            return Err(Error::input("levelset.pseudo_time_step must lie in (0, 1]"));
        }
        if !(self.band_width_for_error > 0.0) || !(self.stop_band_width > 0.0) {
            return Err(Error::input("levelset band widths must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedistanceDiagnostics {
    pub iterations: usize,
    /// Largest |change| of the last sweep inside the stopping band, in units of `h`.
    pub final_residual: f64,
    pub converged: bool,
}

/// Smoothed sign `phi / sqrt(phi^2 + |grad phi|^2 h^2)`; zero when both vanish.
#[inline]
pub fn smoothed_sign<T: Real>(phi: T, grad_mag: T, h: T) -> T {
    if phi == T::zero() {
        return T::zero();
    }
    let denom = (phi * phi + grad_mag * grad_mag * h * h).sqrt();
    if denom == T::zero() || !denom.is_finite() {
        return phi.signum();
    }
    (phi / denom).max(-T::one()).min(T::one())
}

/// Godunov combination of one-sided differences along one axis.
#[inline]
fn godunov_term<T: Real>(d_minus: T, d_plus: T, positive: bool) -> T {
    let z = T::zero();
    if positive {
        let a = d_minus.max(z);
        let b = d_plus.min(z);
        (a * a).max(b * b)
    } else {
        let a = d_minus.min(z);
        let b = d_plus.max(z);
        (a * a).max(b * b)
    }
}

/// First-order upwind `|grad phi|` at one node.
///
/// At box faces the missing one-sided difference is replaced by the
/// available one. `sign_at_index >= 0` selects the positive-side upwinding.
pub fn upwind_gradient_magnitude<T: Real>(
    phi: &DenseField<T>,
    index: impl Into<NodeIndex>,
    sign_at_index: T,
) -> T {
    let geo = phi.geometry();
    let idx = index.into();
    let lin = geo.linear(idx);
    let strides = [geo.size()[1] * geo.size()[2], geo.size()[2], 1];
    gradient_at(
        phi.data(),
        lin,
        idx.0,
        geo.size(),
        strides,
        geo.spacing(),
        geo.dims(),
        sign_at_index >= T::zero(),
    )
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn gradient_at<T: Real>(
    data: &[T],
    lin: usize,
    idx: [usize; 3],
    size: [usize; 3],
    strides: [usize; 3],
    spacing: [T; 3],
    dims: usize,
    positive: bool,
) -> T {
    let c = data[lin];
    let mut sum = T::zero();
    for a in 0..dims {
        if size[a] < 2 {
            continue;
        }
        let inv_h = T::one() / spacing[a];
        let i = idx[a];
        let dm = (i > 0).then(|| (c - data[lin - strides[a]]) * inv_h);
        let dp = (i + 1 < size[a]).then(|| (data[lin + strides[a]] - c) * inv_h);
        let (dm, dp) = match (dm, dp) {
            (Some(m), Some(p)) => (m, p),
            (None, Some(p)) => (p, p),
            (Some(m), None) => (m, m),
            (None, None) => continue,
        };
        sum = sum + godunov_term(dm, dp, positive);
    }
    sum.sqrt()
}

/// Converts a +/-1 indicator into a signed distance function.
///
/// The indicator is scaled by `h` before iterating.
pub fn redistance_indicator<T: Real>(
    indicator: &DenseField<T>,
    opts: &LevelSetOptions,
) -> Result<(DenseField<T>, RedistanceDiagnostics)> {
    let h = indicator.geometry().h();
    sussman_redistance(&indicator.map(|v| v * h), opts)
}

/// Iterates the redistancing PDE from `initial` until the band residual
/// drops below tolerance or `max_iterations` is reached.
///
/// Not reaching the tolerance is reported through
/// [`RedistanceDiagnostics::converged`], not as an error.
pub fn sussman_redistance<T: Real>(
    initial: &DenseField<T>,
    opts: &LevelSetOptions,
) -> Result<(DenseField<T>, RedistanceDiagnostics)> {
    opts.validate()?;
    if initial.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::input("level function contains non-finite values"));
    }
    let has_pos = initial.data().iter().any(|&v| v > T::zero());
    let has_neg = initial.data().iter().any(|&v| v < T::zero());
    if !(has_pos && has_neg) {
        return Err(Error::input(
            "no interface found: level function has a single sign",
        ));
    }

    let geo = initial.geometry().clone();
    let size = geo.size();
    let spacing = geo.spacing();
    let dims = geo.dims();
    let h = geo.h();
    let strides = [size[1] * size[2], size[2], 1];
    let plane = strides[0];
    let dt = T::lit(opts.pseudo_time_step) * h;
    let stop_band = T::lit(opts.stop_band_width) * h;
    let tol = T::lit(opts.convergence_tolerance) * h;
    let sign0: Vec<i8> = initial
        .data()
        .iter()
        .map(|&v| {
            if v > T::zero() {
                1
            } else if v < T::zero() {
                -1
            } else {
                0
            }
        })
        .collect();

    let mut cur = initial.data().to_vec();
    let mut next = cur.clone();
    let mut diag = RedistanceDiagnostics {
        iterations: 0,
        final_residual: f64::INFINITY,
        converged: false,
    };

    for it in 1..=opts.max_iterations {
        let src = &cur;
        let residual = next
            .par_chunks_mut(plane)
            .enumerate()
            .map(|(i, out)| {
                let mut res = T::zero();
                for j in 0..size[1] {
                    for k in 0..size[2] {
                        let local = j * strides[1] + k;
                        let lin = i * plane + local;
                        let s = sign0[lin];
                        let phi = src[lin];
                        if s == 0 {
                            out[local] = phi;
                            continue;
                        }
                        let grad =
                            gradient_at(src, lin, [i, j, k], size, strides, spacing, dims, s > 0);
                        let sigma = smoothed_sign(phi, grad, h);
                        let mut updated = phi + dt * sigma * (T::one() - grad);
                        // the interface may approach a node but never cross it
                        if (s > 0 && updated <= T::zero()) || (s < 0 && updated >= T::zero()) {
                            updated = phi * T::lit(0.5);
                        }
                        out[local] = updated;
                        if updated.abs() <= stop_band {
                            res = res.max((updated - phi).abs());
                        }
                    }
                }
                res
            })
            .reduce(T::zero, T::max);
        std::mem::swap(&mut cur, &mut next);
        diag.iterations = it;
        diag.final_residual = (residual / h).to_f64_lossy();
        if residual < tol {
            diag.converged = true;
            break;
        }
    }
    if !diag.converged {
        log::warn!(
            "redistancing stopped after {} sweeps with residual {:e} h",
            diag.iterations,
            diag.final_residual
        );
    }
    Ok((DenseField::from_vec(geo, cur)?, diag))
}

/// Error norms of a level function against an exact distance inside a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandErrors {
    /// Root mean square of the absolute error over band nodes.
    pub l2: f64,
    pub linf: f64,
    pub nodes: usize,
}

/// Errors over nodes with `|exact(x)| <= band_width * h`.
pub fn band_error_norms<T: Real>(
    phi: &DenseField<T>,
    exact: impl Fn([T; 3]) -> T,
    band_width: f64,
) -> Result<BandErrors> {
    if !(band_width > 0.0) {
        return Err(Error::input("band width must be > 0"));
    }
    let geo = phi.geometry();
    let limit = band_width * geo.h().to_f64_lossy();
    let mut sq = 0.0;
    let mut linf: f64 = 0.0;
    let mut n = 0usize;
    for (lin, &v) in phi.data().iter().enumerate() {
        let e = exact(geo.position(geo.unlinear(lin))).to_f64_lossy();
        if e.abs() <= limit {
            let err = (v.to_f64_lossy() - e).abs();
            sq += err * err;
            linf = linf.max(err);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::input("narrow band contains no nodes"));
    }
    Ok(BandErrors {
        l2: (sq / n as f64).sqrt(),
        linf,
        nodes: n,
    })
}
