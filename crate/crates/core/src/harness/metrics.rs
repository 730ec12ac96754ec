//! Windowed tracking and Lyapunov-increment statistics over an episode log.

use serde::{Deserialize, Serialize};

use crate::cascade::StepLog;
use crate::error::{Error, Result};

/// Half-open time window `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        // tolerate accumulated rounding in sample times
        t >= self.start - 1e-9 && t < self.end - 1e-9
    }

    /// Windows discussed for the reference experiments.
    pub fn defaults() -> Vec<Window> {
        vec![
            Window::new(0.0, 10.0),
            Window::new(5.0, 10.0),
            Window::new(15.0, 16.0),
            Window::new(20.0, 40.0),
            Window::new(25.0, 26.0),
        ]
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("window must look like START-END, got {s:?}"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let start: f64 = a.trim().parse().map_err(|_| bad())?;
        let end: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(end > start) {
            return Err(bad());
        }
        Ok(Window::new(start, end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window: Window,
    pub samples: usize,
    pub rms_e_alpha: f64,
    pub rms_e_q: f64,
    pub peak_e_alpha: f64,
    pub mean_dv1: f64,
    pub mean_dv2: f64,
    pub frac_dv1_nonpos: f64,
    pub frac_dv2_nonpos: f64,
    pub peak_delta: f64,
}

impl WindowMetrics {
    pub const NAMES: [&'static str; 8] = [
        "rms_e_alpha", "rms_e_q", "peak_e_alpha", "mean_dV1", "mean_dV2", "frac_dV1_nonpos", "frac_dV2_nonpos",
        "peak_delta",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.rms_e_alpha, self.rms_e_q, self.peak_e_alpha, self.mean_dv1, self.mean_dv2,
            self.frac_dv1_nonpos, self.frac_dv2_nonpos, self.peak_delta,
        ]
    }
}

fn rms(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (sum / n as f64).sqrt()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Metrics for each window. A window that selects no rows is an error.
pub fn compute_metrics(log: &[StepLog], windows: &[Window]) -> Result<Vec<WindowMetrics>> {
    windows
        .iter()
        .map(|w| {
            let rows: Vec<&StepLog> = log.iter().filter(|r| w.contains(r.t)).collect();
            if rows.is_empty() {
                return Err(Error::EmptyWindow { start: w.start, end: w.end });
            }
            let n = rows.len() as f64;
            Ok(WindowMetrics {
                window: *w,
                samples: rows.len(),
                rms_e_alpha: rms(rows.iter().map(|r| r.e_alpha)),
                rms_e_q: rms(rows.iter().map(|r| r.e_q)),
                peak_e_alpha: rows.iter().map(|r| r.e_alpha.abs()).fold(0.0, f64::max),
                mean_dv1: mean(rows.iter().map(|r| r.dv1)),
                mean_dv2: mean(rows.iter().map(|r| r.dv2)),
                frac_dv1_nonpos: rows.iter().filter(|r| r.dv1 <= 0.0).count() as f64 / n,
                frac_dv2_nonpos: rows.iter().filter(|r| r.dv2 <= 0.0).count() as f64 / n,
                peak_delta: rows.iter().map(|r| r.delta.abs()).fold(0.0, f64::max),
            })
        })
        .collect()
}
