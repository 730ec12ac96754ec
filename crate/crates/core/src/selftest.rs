//! Numerical oracles run by the `selftest` subcommand: finite-difference
//! gradient checks, an RK4 reference for the Euler plant rollout, recovery
//! of a known incremental model by RLS, and the `L_Δv` formula.
//!
//! None of these reuse the code path they check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::incremental::{im_update, IncrementalModel};
use crate::lyapunov::{l_delta_v, LyapunovBounds};
use crate::network::{Activation, Mlp};
use crate::plant::{actuator_step, integrate_step, plant_derivatives, ActuatorState, PhysicalParams, PlantState};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Largest relative error between analytic and central-difference
/// gradients (parameters and inputs) over `seeds` random networks per head.
/// Relative error is `|a − n| / max(|a|, |n|, 1e-4)`.
pub fn gradient_check_error(seeds: u64, h: f64) -> f64 {
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-4);
    let mut worst: f64 = 0.0;
    for head in [Activation::Tanh, Activation::Abs, Activation::Identity] {
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let input_dim = if seed % 2 == 0 { 2 } else { 1 };
            let net = Mlp::random(input_dim, 7, head, 1.0, &mut rng).expect("valid shape");
            let x: Vec<f64> = (0..input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let upstream = rng.gen_range(0.5..2.0);
            let grads = net.backward(&x, upstream).expect("shapes agree");

            let mut probe = net.clone();
            for i in 0..net.params.len() {
                let orig = probe.params[i];
                probe.params[i] = orig + h;
                let plus = probe.forward(&x).unwrap();
                probe.params[i] = orig - h;
                let minus = probe.forward(&x).unwrap();
                probe.params[i] = orig;
                worst = worst.max(rel(grads.params[i], upstream * (plus - minus) / (2.0 * h)));
            }
            let mut xp = x.clone();
            for i in 0..input_dim {
                xp[i] = x[i] + h;
                let plus = net.forward(&xp).unwrap();
                xp[i] = x[i] - h;
                let minus = net.forward(&xp).unwrap();
                xp[i] = x[i];
                worst = worst.max(rel(grads.input[i], upstream * (plus - minus) / (2.0 * h)));
            }
        }
    }
    worst
}

/// Classic RK4 of the airframe over one step with the deflection held.
fn rk4_step(state: &PlantState, delta: f64, dt: f64, params: &PhysicalParams) -> PlantState {
    let f = |a: f64, q: f64| plant_derivatives(&PlantState::new(a, q), delta, params).expect("finite state");
    let (a, q) = (state.alpha, state.q);
    let k1 = f(a, q);
    let k2 = f(a + 0.5 * dt * k1.0, q + 0.5 * dt * k1.1);
    let k3 = f(a + 0.5 * dt * k2.0, q + 0.5 * dt * k2.1);
    let k4 = f(a + dt * k3.0, q + dt * k3.1);
    PlantState {
        alpha: a + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        q: q + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        t: state.t + dt,
    }
}

/// Largest `(|Δα|, |Δq|)` between the Euler rollout and an RK4 rollout over
/// `duration` seconds from rest, with the surface held at `command` from the
/// first step. Both integrators see the same actuator output.
pub fn euler_vs_rk4(command: f64, dt: f64, duration: f64) -> (f64, f64) {
    let params = PhysicalParams::default();
    let steps = (duration / dt).round() as usize;
    let held = ActuatorState { delta: command, ..ActuatorState::default() };
    let mut euler = PlantState::new(0.0, 0.0);
    let mut act = held;
    let mut rk = PlantState::new(0.0, 0.0);
    let mut oracle_act = held;
    let (mut da, mut dq) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        let (next, next_act) = integrate_step(&euler, &act, command, dt, &params).expect("finite");
        euler = next;
        act = next_act;
        oracle_act = actuator_step(&oracle_act, command, dt).expect("dt > 0");
        rk = rk4_step(&rk, oracle_act.delta, dt, &params);
        da = da.max((euler.alpha - rk.alpha).abs());
        dq = dq.max((euler.q - rk.q).abs());
    }
    (da, dq)
}

/// Worst `(|F − 0.9|, |G − 0.1|)` after `steps` RLS updates on the noiseless
/// system `Δx[t+1] = 0.9·Δx[t] + 0.1·Δu[t]` under multi-sine excitation.
pub fn rls_recovery_error(steps: usize) -> (f64, f64) {
    let mut model = IncrementalModel::new(0.0, 0.0, 1.0, 100.0).expect("valid");
    let input = |k: usize| {
        let t = k as f64;
        10.0 * (0.7 * t).sin() + 5.0 * (1.9 * t).sin() + 3.0 * (3.1 * t).cos()
    };
    let (mut x_prev, mut x) = (0.0, 0.0);
    let mut u_prev = input(0);
    for k in 1..=steps {
        let u = input(k);
        let x_next = x + 0.9 * (x - x_prev) + 0.1 * (u - u_prev);
        model = im_update(&model, x_next, x, x_prev, u, u_prev).expect("well conditioned");
        x_prev = x;
        x = x_next;
        u_prev = u;
    }
    ((model.f - 0.9).abs(), (model.g - 0.1).abs())
}

/// Runs every oracle. Tolerances: gradients 1e-5 relative; Euler vs RK4
/// 1e-3 deg on α and 1e-2 deg/s on q over 1 s at dt = 1e-3 for commands
/// −5, 0, 1 and 5 deg; RLS 1e-3 within 200 steps; `L_Δv(1,1,1) = 3`.
pub fn run_all() -> Vec<Check> {
    let mut checks = Vec::new();

    let grad = gradient_check_error(100, 1e-6);
    checks.push(Check {
        name: "network gradients vs central differences",
        passed: grad < 1e-5,
        detail: format!("max relative error {grad:.3e} (limit 1e-5)"),
    });

    let mut worst = (0.0f64, 0.0f64);
    let mut per_cmd = Vec::new();
    for cmd in [-5.0, 0.0, 1.0, 5.0] {
        let (da, dq) = euler_vs_rk4(cmd, 1e-3, 1.0);
        worst = (worst.0.max(da), worst.1.max(dq));
        per_cmd.push(format!("cmd {cmd}: {da:.2e} deg / {dq:.2e} deg/s"));
    }
    checks.push(Check {
        name: "Euler rollout vs RK4 over 1 s",
        passed: worst.0 < 1e-3 && worst.1 < 1e-2,
        detail: format!("{} (limits 1e-3 deg, 1e-2 deg/s)", per_cmd.join("; ")),
    });

    let (ef, eg) = rls_recovery_error(200);
    checks.push(Check {
        name: "RLS recovers (F, G) = (0.9, 0.1)",
        passed: ef < 1e-3 && eg < 1e-3,
        detail: format!("|dF| = {ef:.2e}, |dG| = {eg:.2e} after 200 steps (limit 1e-3)"),
    });

    let b = LyapunovBounds { lipschitz_v: 1.0, lipschitz_f: 1.0, lipschitz_pi: 1.0, tau: 1.0, model_err: 0.0 };
    let ldv = l_delta_v(&b).unwrap_or(f64::NAN);
    checks.push(Check {
        name: "L_dv(1, 1, 1) = 3",
        passed: ldv == 3.0,
        detail: format!("got {ldv}"),
    });
    checks
}
