//! Angle-of-attack reference and the low-pass filter applied to the outer
//! loop's pitch-rate command.

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

/// Reference-side signals for one control step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    pub alpha_ref: f64,
    pub alpha_ref_dot: f64,
    /// Pitch-rate command as emitted by the outer agent.
    pub q_ref_raw: f64,
    /// The same command after low-pass filtering; what the inner loop tracks.
    pub q_ref_filtered: f64,
}

/// Sinusoidal α reference `A·sin(2πt/T)` and its analytic derivative.
pub fn alpha_reference(t: f64, amplitude: f64, period: f64) -> Result<(f64, f64)> {
    if !(period > 0.0) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    finite(t, "t")?;
    let omega = 2.0 * std::f64::consts::PI / period;
    let phase = omega * t;
    Ok((amplitude * phase.sin(), amplitude * omega * phase.cos()))
}

/// Discrete first-order lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowPassState {
    pub y: f64,
    pub time_constant: f64,
}

impl LowPassState {
    pub fn new(time_constant: f64) -> Self {
        Self { y: 0.0, time_constant }
    }

    /// Output gain `dt/tc` applied to the innovation `input − y`.
    pub fn gain(&self, dt: f64) -> f64 {
        dt / self.time_constant
    }
}

pub fn lowpass_step(f: &LowPassState, input: f64, dt: f64) -> Result<LowPassState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(f.time_constant > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "filter time constant must be positive, got {}",
            f.time_constant
        )));
    }
    let input = finite(input, "filter input")?;
    Ok(LowPassState {
        y: f.y + f.gain(dt) * (input - f.y),
        time_constant: f.time_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sinusoid_points() {
        let (a, ad) = alpha_reference(0.0, 10.0, 10.0).unwrap();
        assert_eq!(a, 0.0);
        assert!((ad - 2.0 * PI).abs() < 1e-12);
        let (a, ad) = alpha_reference(2.5, 10.0, 10.0).unwrap();
        assert!((a - 10.0).abs() < 1e-12);
        assert!(ad.abs() < 1e-12);
        let (a, ad) = alpha_reference(5.0, 10.0, 10.0).unwrap();
        assert!(a.abs() < 1e-12);
        assert!((ad + 2.0 * PI).abs() < 1e-12);
        assert!(alpha_reference(1.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-4;
        for i in 0..200 {
            let t = i as f64 * 0.173;
            let (_, analytic) = alpha_reference(t, 10.0, 10.0).unwrap();
            let (p, _) = alpha_reference(t + h, 10.0, 10.0).unwrap();
            let (m, _) = alpha_reference(t - h, 10.0, 10.0).unwrap();
            assert!((analytic - (p - m) / (2.0 * h)).abs() < 1e-6);
        }
    }

    #[test]
    fn lowpass_examples() {
        let f = LowPassState::new(0.05);
        assert_eq!(lowpass_step(&f, 0.0, 0.001).unwrap().y, 0.0);
        assert!((lowpass_step(&f, 1.0, 0.001).unwrap().y - 0.02).abs() < 1e-15);
        assert!(lowpass_step(&f, 1.0, 0.0).is_err());

        // 5 time constants of a first-order step response leave e^-5 < 1%.
        let mut f = LowPassState::new(0.05);
        for _ in 0..250 {
            f = lowpass_step(&f, 3.0, 0.001).unwrap();
        }
        assert!((f.y - 3.0).abs() < 0.03);
    }

    #[test]
    fn lowpass_monotone_without_overshoot() {
        let mut f = LowPassState::new(0.05);
        let mut last = f.y;
        for i in 0..2000 {
            let input = (i as f64 * 0.01).min(7.0);
            f = lowpass_step(&f, input, 0.001).unwrap();
            assert!(f.y >= last);
            assert!(f.y <= 7.0);
            last = f.y;
        }
    }
}
