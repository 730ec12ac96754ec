//! Online identification of the local incremental model
//! `Δx[t+1] = F·Δx[t] + G·Δu[t]` for one scalar loop.
//!
//! Recursive least squares with exponential forgetting, using the a priori
//! residual. The covariance is re-symmetrized after every step and reset when
//! its smallest eigenvalue falls below [`COVARIANCE_FLOOR`].

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

pub const COVARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementalModel {
    /// State-increment sensitivity.
    pub f: f64,
    /// Input-increment sensitivity.
    pub g: f64,
    /// Estimator covariance, row-major 2×2.
    pub p: [[f64; 2]; 2],
    /// Forgetting factor in (0, 1].
    pub forgetting: f64,
    /// Covariance restored on reset.
    pub initial_covariance: f64,
    /// Number of covariance resets so far.
    pub resets: u64,
}

impl IncrementalModel {
    pub fn new(f: f64, g: f64, forgetting: f64, initial_covariance: f64) -> Result<Self> {
        if !(forgetting > 0.0 && forgetting <= 1.0) {
            return Err(Error::Range(format!("forgetting factor out of range (0,1], got {forgetting}")));
        }
        if !(initial_covariance > 0.0 && initial_covariance.is_finite()) {
            return Err(Error::Range(format!(
                "initial covariance must be positive, got {initial_covariance}"
            )));
        }
        Ok(Self {
            f: finite(f, "F")?,
            g: finite(g, "G")?,
            p: [[initial_covariance, 0.0], [0.0, initial_covariance]],
            forgetting,
            initial_covariance,
            resets: 0,
        })
    }

    pub fn trace(&self) -> f64 {
        self.p[0][0] + self.p[1][1]
    }

    /// Smallest eigenvalue of the (symmetric) covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        let [[a, b], [_, d]] = self.p;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        mean - radius
    }
}

/// One-step prediction `x_t + F·(x_t − x_prev) + G·(u_t − u_prev)`.
pub fn im_predict(m: &IncrementalModel, x_t: f64, x_prev: f64, u_t: f64, u_prev: f64) -> Result<f64> {
    let dx = finite(x_t, "x_t")? - finite(x_prev, "x_prev")?;
    let du = finite(u_t, "u_t")? - finite(u_prev, "u_prev")?;
    Ok(x_t + m.f * dx + m.g * du)
}

/// One RLS step on the regressor `[x_t − x_prev, u_t − u_prev]` against
/// the observed increment `x_next_observed − x_t`.
pub fn im_update(
    m: &IncrementalModel,
    x_next_observed: f64,
    x_t: f64,
    x_prev: f64,
    u_t: f64,
    u_prev: f64,
) -> Result<IncrementalModel> {
    let phi = [
        finite(x_t, "x_t")? - finite(x_prev, "x_prev")?,
        finite(u_t, "u_t")? - finite(u_prev, "u_prev")?,
    ];
    let target = finite(x_next_observed, "x_next")? - x_t;
    if phi == [0.0, 0.0] {
        return Ok(*m);
    }

    let p = m.p;
    let lam = m.forgetting;
    let p_phi = [
        p[0][0] * phi[0] + p[0][1] * phi[1],
        p[1][0] * phi[0] + p[1][1] * phi[1],
    ];
    let denom = lam + phi[0] * p_phi[0] + phi[1] * p_phi[1];
    let residual = target - (m.f * phi[0] + m.g * phi[1]);
    let gain = [p_phi[0] / denom, p_phi[1] / denom];

    let mut next = *m;
    next.f = m.f + gain[0] * residual;
    next.g = m.g + gain[1] * residual;
    for i in 0..2 {
        for j in 0..2 {
            next.p[i][j] = (p[i][j] - gain[i] * p_phi[j]) / lam;
        }
    }
    let off = 0.5 * (next.p[0][1] + next.p[1][0]);
    next.p[0][1] = off;
    next.p[1][0] = off;

    let healthy = next.f.is_finite()
        && next.g.is_finite()
        && next.p.iter().flatten().all(|v| v.is_finite());
    if !healthy {
        return Err(Error::SingularCovariance { f: next.f, g: next.g, trace: next.trace() });
    }
    if next.min_eigenvalue() < COVARIANCE_FLOOR {
        let c = next.initial_covariance;
        next.p = [[c, 0.0], [0.0, c]];
        next.resets += 1;
    }
    Ok(next)
}
