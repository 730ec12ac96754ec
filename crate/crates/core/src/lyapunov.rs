//! Discretization-aware Lyapunov decrease check, the per-step increment
//! metric `ΔV̂ = V̂(t+1) − V̂(t)`, and the equilibrium residual of the
//! angle-of-attack tracking error.
//!
//! A value function `v` decreases along the true dynamics at every state of
//! a grid of resolution `τ` (in the 1-norm) when
//!
//! ```text
//! u_n(x) + L_v·(model error) < v(x) − L_Δv·τ,    L_Δv = L_v·L_f·(L_π + 1) + L_v
//! ```
//!
//! where `u_n(x)` bounds `v` at the model-predicted next state. The
//! `L_v·(model error)` term stands for the confidence radius of the
//! one-step predictor; here it is a deterministic bound, usually the worst
//! prediction error observed over a trailing window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::plant::{aero_phi_z, plant_derivatives, PhysicalParams, PlantState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovBounds {
    /// Lipschitz constant of the value function.
    pub lipschitz_v: f64,
    /// Lipschitz constant of the one-step dynamics.
    pub lipschitz_f: f64,
    /// Lipschitz constant of the policy.
    pub lipschitz_pi: f64,
    /// Grid resolution in the 1-norm.
    pub tau: f64,
    /// Bound on the one-step prediction error.
    pub model_err: f64,
}

impl LyapunovBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("L_v", self.lipschitz_v),
            ("L_f", self.lipschitz_f),
            ("L_pi", self.lipschitz_pi),
            ("model_err", self.model_err),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Range(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Range(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

/// `L_v·L_f·(L_π + 1) + L_v`.
pub fn l_delta_v(b: &LyapunovBounds) -> Result<f64> {
    for v in [b.lipschitz_v, b.lipschitz_f, b.lipschitz_pi] {
        if !(v >= 0.0) {
            return Err(Error::Range(format!("Lipschitz constants must be >= 0, got {v}")));
        }
    }
    Ok(b.lipschitz_v * b.lipschitz_f * (b.lipschitz_pi + 1.0) + b.lipschitz_v)
}

/// Per-axis spacing of the lattice used by [`discretize_state`].
pub fn grid_spacing(dim: usize, tau: f64) -> f64 {
    2.0 * tau / dim as f64
}

/// Nearest lattice point with per-axis spacing `2τ/n`, so that
/// `‖x − [x]_τ‖₁ ≤ τ`.
pub fn discretize_state(x: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let h = grid_spacing(x.len(), tau);
    Ok(x.iter().map(|xi| (xi / h).round() * h).collect())
}

/// Lattice points of resolution `tau` inside the axis-aligned box.
pub fn lattice(bounds: &[(f64, f64)], tau: f64) -> Result<Vec<Vec<f64>>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let h = grid_spacing(bounds.len(), tau);
    let mut points = vec![Vec::new()];
    for &(lo, hi) in bounds {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
        }
        let first = (lo / h).ceil() as i64;
        let last = (hi / h).floor() as i64;
        let mut next = Vec::with_capacity(points.len() * (last - first + 1).max(0) as usize);
        for p in &points {
            for k in first..=last {
                let mut q = p.clone();
                q.push(k as f64 * h);
                next.push(q);
            }
        }
        points = next;
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecreasePoint {
    pub point: Vec<f64>,
    pub v: f64,
    /// Upper bound on `v` at the predicted next state.
    pub bound: f64,
    /// `v − L_Δv·τ − (bound + L_v·model_err)`; positive means satisfied.
    pub margin: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecreaseReport {
    pub bounds: LyapunovBounds,
    pub l_delta_v: f64,
    pub points: Vec<DecreasePoint>,
}

impl DecreaseReport {
    pub fn satisfied(&self) -> usize {
        self.points.iter().filter(|p| p.satisfied).count()
    }

    pub fn fraction_satisfied(&self) -> f64 {
        if self.points.is_empty() {
            0.0
        } else {
            self.satisfied() as f64 / self.points.len() as f64
        }
    }
}

/// Evaluates the practical decrease condition at every grid point.
pub fn practical_decrease_check<V, U>(
    v: V,
    next_bound: U,
    grid: &[Vec<f64>],
    b: &LyapunovBounds,
) -> Result<DecreaseReport>
where
    V: Fn(&[f64]) -> f64,
    U: Fn(&[f64]) -> f64,
{
    b.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("decrease check needs a non-empty grid".into()));
    }
    let ldv = l_delta_v(b)?;
    let slack = ldv * b.tau;
    let points = grid
        .iter()
        .map(|x| {
            let vx = finite(v(x), "v(x)")?;
            let un = finite(next_bound(x), "u_n(x)")?;
            let margin = (vx - slack) - (un + b.lipschitz_v * b.model_err);
            Ok(DecreasePoint { point: x.clone(), v: vx, bound: un, margin, satisfied: margin > 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecreaseReport { bounds: *b, l_delta_v: ldv, points })
}

/// `v_next − v_t`.
pub fn lyapunov_increment(v_t: f64, v_next: f64) -> f64 {
    v_next - v_t
}

/// `ė₁` evaluated at zero angle-of-attack tracking error. A nonzero value
/// means `e₁ = 0` is not an equilibrium at that instant.
pub fn equilibrium_residual(
    alpha_ref: f64,
    alpha_ref_dot: f64,
    q: f64,
    delta: f64,
    params: &PhysicalParams,
) -> Result<f64> {
    let phi = aero_phi_z(alpha_ref)?;
    Ok(params.normal_force_gain() * alpha_ref.to_radians().cos() * (phi + params.b_z * delta) + q
        - alpha_ref_dot)
}

/// Largest ‖∇g‖_∞ (the 1-norm Lipschitz constant of a scalar function)
/// over `samples` random points of the box, by central differences.
pub fn estimate_lipschitz<F>(g: F, bounds: &[(f64, f64)], samples: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    let mut x = vec![0.0; bounds.len()];
    for _ in 0..samples {
        for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *xi = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        }
        for i in 0..x.len() {
            let h = 1e-5 * (1.0 + x[i].abs());
            let orig = x[i];
            x[i] = orig + h;
            let plus = g(&x);
            x[i] = orig - h;
            let minus = g(&x);
            x[i] = orig;
            let slope = ((plus - minus) / (2.0 * h)).abs();
            if slope.is_finite() {
                best = best.max(slope);
            }
        }
    }
    best
}

/// 1-norm Lipschitz constant of the one-step Euler map
/// `(α, q, δ) ↦ (α', q')` over `|α| ≤ 20`, `|q| ≤ 60`, `|δ| ≤ 20`,
/// estimated as the largest Jacobian column sum at random points.
pub fn estimate_plant_lipschitz(params: &PhysicalParams, dt: f64, samples: usize, seed: u64) -> Result<f64> {
    let step = |x: &[f64]| -> Result<[f64; 2]> {
        let s = PlantState::new(x[0], x[1]);
        let (ad, qd) = plant_derivatives(&s, x[2], params)?;
        Ok([x[0] + ad * dt, x[1] + qd * dt])
    };
    let bounds = [(-20.0, 20.0), (-60.0, 60.0), (-20.0, 20.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let mut x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
        for i in 0..3 {
            let h = 1e-6 * (1.0 + x[i].abs());
            let orig = x[i];
            x[i] = orig + h;
            let plus = step(&x)?;
            x[i] = orig - h;
            let minus = step(&x)?;
            x[i] = orig;
            let col: f64 = (0..2).map(|k| ((plus[k] - minus[k]) / (2.0 * h)).abs()).sum();
            best = best.max(col);
        }
    }
    Ok(best)
}
