//! Longitudinal short-period dynamics of the airframe, its control-surface
//! actuator, and the fixed-step integrator that advances both.
//!
//! Everything here works in degrees: angle of attack, pitch rate (deg/s) and
//! surface deflection. The aerodynamic polynomials were fitted in degrees and
//! the `rad_to_deg` factor in the force and moment gains converts the
//! radian-based rigid-body equations into the same units. Only the cosine
//! receives radians.

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

/// Angle of attack magnitude (deg) beyond which the aero polynomials are
/// extrapolated rather than fitted.
pub const FIT_RANGE_DEG: f64 = 20.0;

/// Airframe constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Vehicle weight, kg.
    pub weight: f64,
    /// Airspeed, m/s.
    pub speed: f64,
    /// Pitch moment of inertia, kg·m².
    pub pitch_inertia: f64,
    /// Radians to degrees.
    pub rad_to_deg: f64,
    /// Dynamic pressure, kg/m².
    pub dynamic_pressure: f64,
    /// Reference area, m².
    pub ref_area: f64,
    /// Reference diameter, m.
    pub ref_diameter: f64,
    /// Normal-force control effectiveness, per degree.
    pub b_z: f64,
    /// Pitching-moment control effectiveness, per degree.
    pub b_m: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            gravity: 9.815,
            weight: 204.3,
            speed: 947.715,
            pitch_inertia: 247.438,
            rad_to_deg: 180.0 / std::f64::consts::PI,
            dynamic_pressure: 29969.861,
            ref_area: 0.041,
            ref_diameter: 0.229,
            b_z: -0.034,
            b_m: -0.206,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gravity", self.gravity),
            ("weight", self.weight),
            ("speed", self.speed),
            ("pitch_inertia", self.pitch_inertia),
            ("dynamic_pressure", self.dynamic_pressure),
            ("ref_area", self.ref_area),
            ("ref_diameter", self.ref_diameter),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Range(format!("plant.{name} must be positive, got {value}")));
            }
        }
        if (self.rad_to_deg - 180.0 / std::f64::consts::PI).abs() > 1e-12 {
            return Err(Error::Range(format!(
                "plant.rad_to_deg must equal 180/pi, got {}",
                self.rad_to_deg
            )));
        }
        finite(self.b_z, "plant.b_z")?;
        finite(self.b_m, "plant.b_m")?;
        Ok(())
    }

    /// `f·g·Q·S / (W·V)`, the gain on the normal-force bracket of α̇.
    pub fn normal_force_gain(&self) -> f64 {
        self.rad_to_deg * self.gravity * self.dynamic_pressure * self.ref_area
            / (self.weight * self.speed)
    }

    /// `f·Q·S·d / Iyy`, the gain on the pitching-moment bracket of q̇.
    pub fn pitch_moment_gain(&self) -> f64 {
        self.rad_to_deg * self.dynamic_pressure * self.ref_area * self.ref_diameter
            / self.pitch_inertia
    }
}

/// Normal-force polynomial in α (degrees).
pub fn aero_phi_z(alpha: f64) -> Result<f64> {
    let a = finite(alpha, "alpha")?;
    Ok(0.000103 * a * a * a - 0.00945 * a * a.abs() - 0.170 * a)
}

/// Pitching-moment polynomial in α (degrees).
pub fn aero_phi_m(alpha: f64) -> Result<f64> {
    let a = finite(alpha, "alpha")?;
    Ok(0.000215 * a * a * a - 0.0195 * a * a.abs() - 0.051 * a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Angle of attack, deg.
    pub alpha: f64,
    /// Pitch rate, deg/s.
    pub q: f64,
    /// Simulation time, s.
    pub t: f64,
}

impl PlantState {
    pub fn new(alpha: f64, q: f64) -> Self {
        Self { alpha, q, t: 0.0 }
    }

    /// False when α has left the range the aero polynomials were fitted on.
    /// Not an error; early learning transients can briefly leave it.
    pub fn in_fit_range(&self) -> bool {
        self.alpha.abs() <= FIT_RANGE_DEG
    }
}

/// Continuous-time `(α̇, q̇)` for a given actual deflection `delta` (deg).
pub fn plant_derivatives(
    state: &PlantState,
    delta: f64,
    params: &PhysicalParams,
) -> Result<(f64, f64)> {
    finite(state.q, "q")?;
    finite(delta, "delta")?;
    let alpha = state.alpha;
    let phi_z = aero_phi_z(alpha)?;
    let phi_m = aero_phi_m(alpha)?;
    let alpha_dot = params.normal_force_gain() * alpha.to_radians().cos() * (phi_z + params.b_z * delta)
        + state.q;
    let q_dot = params.pitch_moment_gain() * (phi_m + params.b_m * delta);
    Ok((alpha_dot, q_dot))
}

/// First-order surface actuator with rate and position saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    /// Actual deflection, deg.
    pub delta: f64,
    /// Lag time constant, s.
    pub time_constant: f64,
    /// deg/s
    pub rate_limit: f64,
    /// deg
    pub position_limit: f64,
}

impl Default for ActuatorState {
    fn default() -> Self {
        Self {
            delta: 0.0,
            time_constant: 0.005,
            rate_limit: 600.0,
            position_limit: 20.0,
        }
    }
}

impl ActuatorState {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("actuator.time_constant", self.time_constant),
            ("actuator.rate_limit", self.rate_limit),
            ("actuator.position_limit", self.position_limit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Range(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Advances the actuator one step toward `command`.
///
/// The command is clamped to the position limit, the lag rate is clamped to
/// the rate limit, and the integrated deflection is clamped again.
pub fn actuator_step(act: &ActuatorState, command: f64, dt: f64) -> Result<ActuatorState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let command = finite(command, "actuator command")?;
    let limit = act.position_limit;
    let target = command.clamp(-limit, limit);
    let rate = ((target - act.delta) / act.time_constant).clamp(-act.rate_limit, act.rate_limit);
    let delta = (act.delta + rate * dt).clamp(-limit, limit);
    Ok(ActuatorState { delta, ..*act })
}

/// One control period: actuator first, then a forward-Euler step of the
/// airframe using the new deflection.
pub fn integrate_step(
    state: &PlantState,
    act: &ActuatorState,
    command: f64,
    dt: f64,
    params: &PhysicalParams,
) -> Result<(PlantState, ActuatorState)> {
    let act = actuator_step(act, command, dt)?;
    let (alpha_dot, q_dot) = plant_derivatives(state, act.delta, params)?;
    let next = PlantState {
        alpha: state.alpha + alpha_dot * dt,
        q: state.q + q_dot * dt,
        t: state.t + dt,
    };
    Ok((next, act))
}
