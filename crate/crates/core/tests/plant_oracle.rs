//! Euler airframe step against an RK4 integration written out here.

use lyaflight::plant::{aero_phi_m, aero_phi_z, integrate_step, ActuatorState, PhysicalParams, PlantState};

/// Right-hand side rebuilt from the raw airframe table, independent of the
/// crate's gain helpers.
fn rhs(alpha: f64, q: f64, delta: f64) -> (f64, f64) {
    let f = 180.0 / std::f64::consts::PI;
    let (g, w, v, iyy, qbar, s, d) = (9.815, 204.3, 947.715, 247.438, 29969.861, 0.041, 0.229);
    let zg = f * g * qbar * s / (w * v);
    let mg = f * qbar * s * d / iyy;
    let pz = 0.000103 * alpha.powi(3) - 0.00945 * alpha * alpha.abs() - 0.170 * alpha;
    let pm = 0.000215 * alpha.powi(3) - 0.0195 * alpha * alpha.abs() - 0.051 * alpha;
    (zg * alpha.to_radians().cos() * (pz - 0.034 * delta) + q, mg * (pm - 0.206 * delta))
}

fn rk4(alpha: f64, q: f64, delta: f64, dt: f64) -> (f64, f64) {
    let k1 = rhs(alpha, q, delta);
    let k2 = rhs(alpha + 0.5 * dt * k1.0, q + 0.5 * dt * k1.1, delta);
    let k3 = rhs(alpha + 0.5 * dt * k2.0, q + 0.5 * dt * k2.1, delta);
    let k4 = rhs(alpha + dt * k3.0, q + dt * k3.1, delta);
    (
        alpha + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        q + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Worst `(|Δα|, |Δq|)` over one second with the surface held at `delta`.
fn euler_gap(delta: f64, dt: f64) -> (f64, f64) {
    let params = PhysicalParams::default();
    let act = ActuatorState { delta, ..ActuatorState::default() };
    let mut euler = PlantState::new(0.0, 0.0);
    let mut oracle = (0.0, 0.0);
    let mut worst = (0.0f64, 0.0f64);
    let steps = (1.0 / dt).round() as usize;
    for _ in 0..steps {
        let (next, held) = integrate_step(&euler, &act, delta, dt, &params).unwrap();
        assert_eq!(held.delta, delta);
        euler = next;
        oracle = rk4(oracle.0, oracle.1, delta, dt);
        worst = (worst.0.max((euler.alpha - oracle.0).abs()), worst.1.max((euler.q - oracle.1).abs()));
    }
    worst
}

#[test]
fn right_hand_side_agrees_with_the_crate() {
    let params = PhysicalParams::default();
    for &(a, q, d) in &[(0.0, 0.0, 0.0), (10.0, 3.0, -2.0), (-17.5, -40.0, 12.0), (4.2, 0.5, 20.0)] {
        let (ad, qd) = lyaflight::plant::plant_derivatives(&PlantState::new(a, q), d, &params).unwrap();
        let (ra, rq) = rhs(a, q, d);
        assert!((ad - ra).abs() < 1e-10 && (qd - rq).abs() < 1e-9, "({a}, {q}, {d})");
    }
    assert!((aero_phi_z(10.0).unwrap() + 2.542).abs() < 1e-12);
    assert!((aero_phi_m(10.0).unwrap() + 2.245).abs() < 1e-12);
}

#[test]
fn trim_at_origin_matches_exactly() {
    assert_eq!(euler_gap(0.0, 1e-3), (0.0, 0.0));
}

#[test]
fn euler_gap_is_first_order_in_dt() {
    for delta in [-5.0, 1.0, 5.0] {
        let coarse = euler_gap(delta, 1e-3);
        let fine = euler_gap(delta, 5e-4);
        let finer = euler_gap(delta, 2.5e-4);
        for (c, f) in [(coarse.0, fine.0), (fine.0, finer.0), (coarse.1, fine.1), (fine.1, finer.1)] {
            let ratio = c / f;
            assert!((1.8..2.2).contains(&ratio), "delta {delta}: ratio {ratio}");
        }
    }
}

#[test]
fn euler_gap_at_control_period() {
    // Frozen from the RK4 oracle above at dt = 1e-3.
    let (a, q) = euler_gap(5.0, 1e-3);
    assert!((a - 2.073e-2).abs() < 1e-5, "{a}");
    assert!((q - 9.577e-2).abs() < 1e-4, "{q}");
    let (a, q) = euler_gap(1.0, 1e-3);
    assert!((a - 4.546e-3).abs() < 1e-5, "{a}");
    assert!((q - 1.082e-2).abs() < 1e-4, "{q}");
}

#[test]
fn odd_symmetry_of_the_rollout() {
    let (a, q) = euler_gap(5.0, 1e-3);
    let (b, r) = euler_gap(-5.0, 1e-3);
    assert_eq!((a, q), (b, r));
}
