//! The cascaded control loop: the outer agent turns angle-of-attack error
//! into a pitch-rate command, a low-pass filter smooths it, and the inner
//! agent turns pitch-rate error into a surface command. Both agents learn
//! online at every control step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentConfig, Observation, StepReport};
use crate::error::{Error, Result};
use crate::harness::metrics::{compute_metrics, Window, WindowMetrics};
use crate::plant::{integrate_step, ActuatorState, PhysicalParams, PlantState};
use crate::reference::{alpha_reference, lowpass_step, LowPassState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    /// deg
    pub amplitude: f64,
    /// s
    pub period: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { amplitude: 10.0, period: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub higher: AgentConfig,
    pub lower: AgentConfig,
    pub reference: ReferenceConfig,
    /// Time constant of the pitch-rate command filter, s.
    pub filter_time_constant: f64,
    /// Whether the outer actor differentiates through the filter. Off by
    /// default: the raw command is taken as the outer model's input.
    pub filter_in_objective: bool,
    pub plant: PhysicalParams,
    pub actuator: ActuatorState,
    /// |α| (deg) at which the episode is aborted.
    pub divergence_limit: f64,
    /// Trailing window (s) over which the worst model prediction error is
    /// reported.
    pub model_error_window: f64,
    /// Expected bound on that prediction error (deg or deg/s).
    pub model_error_bound: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            duration: 40.0,
            dt: 0.001,
            seed: 0,
            higher: AgentConfig::higher(),
            lower: AgentConfig::lower(),
            reference: ReferenceConfig::default(),
            filter_time_constant: 0.05,
            filter_in_objective: false,
            plant: PhysicalParams::default(),
            actuator: ActuatorState::default(),
            divergence_limit: 60.0,
            model_error_window: 10.0,
            model_error_bound: 0.05,
        }
    }
}

impl EpisodeConfig {
    /// Number of control steps; `duration/dt` must be an integer.
    pub fn step_count(&self) -> Result<usize> {
        let ratio = self.duration / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-6 {
            return Err(Error::Range(format!(
                "duration {} is not an integer multiple of dt {}",
                self.duration, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Range(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Range(format!("duration must be >= 0, got {}", self.duration)));
        }
        self.step_count()?;
        self.higher.validate().map_err(|e| Error::Range(format!("higher: {e}")))?;
        self.lower.validate().map_err(|e| Error::Range(format!("lower: {e}")))?;
        self.plant.validate()?;
        self.actuator.validate()?;
        if !(self.reference.period > 0.0) {
            return Err(Error::Range(format!("reference.period must be > 0, got {}", self.reference.period)));
        }
        if !(self.filter_time_constant > 0.0) {
            return Err(Error::Range(format!(
                "filter.time_constant must be > 0, got {}",
                self.filter_time_constant
            )));
        }
        if !(self.divergence_limit > 0.0) {
            return Err(Error::Range("divergence_limit must be > 0".into()));
        }
        Ok(())
    }

    /// Initial input sensitivity of each loop's incremental model: a tenth of
    /// the nominal one-step effect, with the physical sign.
    pub fn initial_model_gains(&self) -> (f64, f64) {
        // α̇ = … + q, so a pitch-rate command raises α
        let higher = 0.1 * self.dt;
        let lower = 0.1 * self.plant.b_m * self.plant.pitch_moment_gain() * self.dt;
        (higher, lower)
    }
}

/// One row of the episode log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: f64,
    pub alpha_ref: f64,
    pub alpha_ref_dot: f64,
    pub alpha: f64,
    pub e_alpha: f64,
    pub q_ref_raw: f64,
    pub q_ref_filtered: f64,
    pub q: f64,
    pub e_q: f64,
    pub delta_cmd: f64,
    /// Deflection applied during this step.
    pub delta: f64,
    pub v1: f64,
    pub dv1: f64,
    pub v2: f64,
    pub dv2: f64,
    pub critic_loss1: f64,
    pub actor_loss1: f64,
    pub cost1: f64,
    pub gamma_v1: f64,
    pub lambda_v1: f64,
    pub smooth1: f64,
    pub critic_loss2: f64,
    pub actor_loss2: f64,
    pub cost2: f64,
    pub gamma_v2: f64,
    pub lambda_v2: f64,
    pub smooth2: f64,
    pub f1: f64,
    pub g1: f64,
    pub pred_err1: f64,
    pub f2: f64,
    pub g2: f64,
    pub pred_err2: f64,
    pub in_fit_range: bool,
}

impl StepLog {
    pub const COLUMNS: [&'static str; 34] = [
        "t", "alpha_ref", "alpha_ref_dot", "alpha", "e_alpha", "q_ref_raw", "q_ref_filtered", "q", "e_q",
        "delta_cmd", "delta", "V1", "dV1", "V2", "dV2", "critic_loss1", "actor_loss1", "cost1", "gamma_v1",
        "lambda_v1", "smooth1", "critic_loss2", "actor_loss2", "cost2", "gamma_v2", "lambda_v2", "smooth2",
        "F1", "G1", "pred_err1", "F2", "G2", "pred_err2", "in_fit_range",
    ];

    /// Numeric columns in [`StepLog::COLUMNS`] order; the fit-range flag is 0 or 1.
    pub fn values(&self) -> [f64; 34] {
        [
            self.t, self.alpha_ref, self.alpha_ref_dot, self.alpha, self.e_alpha, self.q_ref_raw,
            self.q_ref_filtered, self.q, self.e_q, self.delta_cmd, self.delta, self.v1, self.dv1, self.v2,
            self.dv2, self.critic_loss1, self.actor_loss1, self.cost1, self.gamma_v1, self.lambda_v1,
            self.smooth1, self.critic_loss2, self.actor_loss2, self.cost2, self.gamma_v2, self.lambda_v2,
            self.smooth2, self.f1, self.g1, self.pred_err1, self.f2, self.g2, self.pred_err2,
            if self.in_fit_range { 1.0 } else { 0.0 },
        ]
    }

    pub fn from_values(v: &[f64; 34]) -> Self {
        Self {
            t: v[0], alpha_ref: v[1], alpha_ref_dot: v[2], alpha: v[3], e_alpha: v[4], q_ref_raw: v[5],
            q_ref_filtered: v[6], q: v[7], e_q: v[8], delta_cmd: v[9], delta: v[10], v1: v[11], dv1: v[12],
            v2: v[13], dv2: v[14], critic_loss1: v[15], actor_loss1: v[16], cost1: v[17], gamma_v1: v[18],
            lambda_v1: v[19], smooth1: v[20], critic_loss2: v[21], actor_loss2: v[22], cost2: v[23],
            gamma_v2: v[24], lambda_v2: v[25], smooth2: v[26], f1: v[27], g1: v[28], pred_err1: v[29],
            f2: v[30], g2: v[31], pred_err2: v[32], in_fit_range: v[33] != 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Diverged { t: f64, reason: String },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::Completed => write!(f, "completed"),
            Termination::Diverged { t, reason } => write!(f, "diverged at t={t}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Episode {
    pub log: Vec<StepLog>,
    pub termination: Termination,
    pub higher: Agent,
    pub lower: Agent,
    /// Worst `(α, q)` one-step prediction errors over the trailing window.
    pub model_error: (f64, f64),
    /// Actor updates skipped for non-finite gradients, per loop.
    pub skipped_actor_steps: (u64, u64),
}

impl Episode {
    pub fn model_error_within(&self, bound: f64) -> bool {
        self.model_error.0 <= bound && self.model_error.1 <= bound
    }
}

fn fill_row(row: &mut StepLog, h: &StepReport, l: &StepReport, higher: &Agent, lower: &Agent) {
    row.v1 = h.value;
    row.v2 = l.value;
    row.critic_loss1 = h.critic_loss;
    row.actor_loss1 = h.actor_loss.total;
    row.cost1 = h.actor_loss.cost;
    row.gamma_v1 = h.actor_loss.gamma_v;
    row.lambda_v1 = h.actor_loss.lambda_v;
    row.smooth1 = h.actor_loss.smoothness;
    row.critic_loss2 = l.critic_loss;
    row.actor_loss2 = l.actor_loss.total;
    row.cost2 = l.actor_loss.cost;
    row.gamma_v2 = l.actor_loss.gamma_v;
    row.lambda_v2 = l.actor_loss.lambda_v;
    row.smooth2 = l.actor_loss.smoothness;
    row.f1 = higher.model.f;
    row.g1 = higher.model.g;
    row.pred_err1 = h.prediction_error;
    row.f2 = lower.model.f;
    row.g2 = lower.model.g;
    row.pred_err2 = l.prediction_error;
}

/// Runs one closed-loop learning episode from rest.
///
/// Returns `Err` only for invalid configuration. Divergence (|α| beyond the
/// limit, a non-finite signal, or a failed learning step) ends the episode
/// early with the partial log and [`Termination::Diverged`].
pub fn run_episode(cfg: &EpisodeConfig) -> Result<Episode> {
    cfg.validate()?;
    let n = cfg.step_count()?;
    let dt = cfg.dt;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (g_higher, g_lower) = cfg.initial_model_gains();
    let mut higher = Agent::new(&cfg.higher, g_higher, &mut rng)?;
    let mut lower = Agent::new(&cfg.lower, g_lower, &mut rng)?;

    let mut plant = PlantState::new(0.0, 0.0);
    let mut act = ActuatorState { delta: 0.0, ..cfg.actuator };
    let mut filter = LowPassState::new(cfg.filter_time_constant);
    let filter_gain = filter.gain(dt);

    let mut log: Vec<StepLog> = Vec::with_capacity(n);
    let mut termination = Termination::Completed;
    let mut skipped = (0u64, 0u64);

    for k in 0..n {
        let t = k as f64 * dt;
        let step = (|| -> Result<(StepLog, PlantState, ActuatorState, LowPassState)> {
            let (alpha_ref, alpha_ref_dot) = alpha_reference(t, cfg.reference.amplitude, cfg.reference.period)?;
            let (alpha_ref_next, _) = alpha_reference(t + dt, cfg.reference.amplitude, cfg.reference.period)?;
            let e_alpha = plant.alpha - alpha_ref;
            let obs_h = Observation {
                state: plant.alpha,
                error: e_alpha,
                next_reference: alpha_ref_next,
                input_base: (1.0 - filter_gain) * filter.y,
                input_gain: filter_gain,
                chain_input_map: cfg.filter_in_objective,
            };
            let rep_h = higher.step(&obs_h, &cfg.higher)?;
            let next_filter = lowpass_step(&filter, rep_h.action, dt)?;
            let q_ref_filtered = next_filter.y;

            let e_q = plant.q - q_ref_filtered;
            let obs_l = Observation {
                state: plant.q,
                error: e_q,
                next_reference: q_ref_filtered,
                input_base: 0.0,
                input_gain: 1.0,
                chain_input_map: true,
            };
            let rep_l = lower.step(&obs_l, &cfg.lower)?;
            let (next_plant, next_act) = integrate_step(&plant, &act, rep_l.action, dt, &cfg.plant)?;

            skipped.0 += rep_h.skipped_actor_steps as u64;
            skipped.1 += rep_l.skipped_actor_steps as u64;
            let mut row = StepLog {
                t,
                alpha_ref,
                alpha_ref_dot,
                alpha: plant.alpha,
                e_alpha,
                q_ref_raw: rep_h.action,
                q_ref_filtered,
                q: plant.q,
                e_q,
                delta_cmd: rep_l.action,
                delta: next_act.delta,
                in_fit_range: plant.in_fit_range(),
                ..StepLog::default()
            };
            fill_row(&mut row, &rep_h, &rep_l, &higher, &lower);
            Ok((row, next_plant, next_act, next_filter))
        })();

        match step {
            Ok((row, next_plant, next_act, next_filter)) => {
                log.push(row);
                plant = next_plant;
                act = next_act;
                filter = next_filter;
                if !(plant.alpha.is_finite() && plant.q.is_finite()) {
                    termination = Termination::Diverged { t: plant.t, reason: "non-finite plant state".into() };
                    break;
                }
                if plant.alpha.abs() > cfg.divergence_limit {
                    termination = Termination::Diverged {
                        t: plant.t,
                        reason: format!("|alpha| = {:.3} deg exceeds {}", plant.alpha.abs(), cfg.divergence_limit),
                    };
                    break;
                }
            }
            Err(e) => {
                termination = Termination::Diverged { t, reason: e.to_string() };
                break;
            }
        }
    }

    for i in 0..log.len().saturating_sub(1) {
        log[i].dv1 = crate::lyapunov::lyapunov_increment(log[i].v1, log[i + 1].v1);
        log[i].dv2 = crate::lyapunov::lyapunov_increment(log[i].v2, log[i + 1].v2);
    }

    let window_start = cfg.duration - cfg.model_error_window;
    let model_error = log
        .iter()
        .filter(|r| r.t >= window_start)
        .fold((0.0f64, 0.0f64), |(a, b), r| (a.max(r.pred_err1), b.max(r.pred_err2)));

    Ok(Episode { log, termination, higher, lower, model_error, skipped_actor_steps: skipped })
}

/// A named λ setting for [`run_comparison`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Variant {
    pub fn new(name: impl Into<String>, lambda1: f64, lambda2: f64) -> Self {
        Self { name: name.into(), lambda1, lambda2 }
    }

    /// The three settings compared in the reference experiments.
    pub fn defaults() -> Vec<Variant> {
        vec![
            Variant::new("ihdp", 0.0, 0.0),
            Variant::new("lambda1_500", 500.0, 0.0),
            Variant::new("lambda1_500_lambda2_0.1", 500.0, 0.1),
        ]
    }

    pub fn apply(&self, base: &EpisodeConfig) -> EpisodeConfig {
        let mut cfg = base.clone();
        cfg.higher.lyapunov_weight = self.lambda1;
        cfg.lower.lyapunov_weight = self.lambda2;
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    pub termination: Termination,
    pub metrics: Vec<WindowMetrics>,
    pub episode: Option<Episode>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub windows: Vec<Window>,
    pub results: Vec<VariantResult>,
}

/// Runs every variant with the base seed and reference, in parallel, and
/// collects windowed metrics. A failing variant is recorded, not fatal.
pub fn run_comparison(base: &EpisodeConfig, variants: &[Variant], windows: &[Window]) -> Result<ComparisonReport> {
    if variants.len() < 2 {
        return Err(Error::InvalidArgument("a comparison needs at least two variants".into()));
    }
    base.validate()?;
    let results = std::thread::scope(|s| {
        let handles: Vec<_> = variants
            .iter()
            .map(|v| {
                let cfg = v.apply(base);
                s.spawn(move || run_episode(&cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("episode thread panicked")).collect::<Vec<_>>()
    });

    let results = variants
        .iter()
        .zip(results)
        .map(|(v, res)| match res {
            Ok(ep) => {
                let usable: Vec<Window> = windows
                    .iter()
                    .copied()
                    .filter(|w| ep.log.iter().any(|r| w.contains(r.t)))
                    .collect();
                let metrics = compute_metrics(&ep.log, &usable).unwrap_or_default();
                VariantResult { variant: v.clone(), termination: ep.termination.clone(), metrics, episode: Some(ep) }
            }
            Err(e) => VariantResult {
                variant: v.clone(),
                termination: Termination::Diverged { t: 0.0, reason: e.to_string() },
                metrics: Vec::new(),
                episode: None,
            },
        })
        .collect();
    Ok(ComparisonReport { windows: windows.to_vec(), results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duration_is_empty() {
        let cfg = EpisodeConfig { duration: 0.0, ..EpisodeConfig::default() };
        let ep = run_episode(&cfg).unwrap();
        assert!(ep.log.is_empty());
        assert!(ep.termination.is_completed());
    }

    #[test]
    fn step_count_must_be_integral() {
        let cfg = EpisodeConfig { duration: 1.0005, ..EpisodeConfig::default() };
        assert!(cfg.step_count().is_err());
        let cfg = EpisodeConfig { duration: 0.3, ..EpisodeConfig::default() };
        assert_eq!(cfg.step_count().unwrap(), 300);
    }

    #[test]
    fn short_episode_rows_are_consistent() {
        let cfg = EpisodeConfig { duration: 0.2, ..EpisodeConfig::default() };
        let ep = run_episode(&cfg).unwrap();
        assert_eq!(ep.log.len(), 200);
        for r in &ep.log {
            assert_eq!(r.e_alpha, r.alpha - r.alpha_ref);
            assert_eq!(r.e_q, r.q - r.q_ref_filtered);
            assert!(r.delta.abs() <= 20.0);
        }
    }

    #[test]
    fn comparison_needs_two_variants() {
        let cfg = EpisodeConfig { duration: 0.01, ..EpisodeConfig::default() };
        assert!(run_comparison(&cfg, &[Variant::new("a", 0.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn initial_gain_signs() {
        let (h, l) = EpisodeConfig::default().initial_model_gains();
        assert!(h > 0.0);
        assert!(l < 0.0);
        assert!((l + 0.1 * 0.206 * 65.15 * 0.001).abs() < 1e-5);
    }
}
