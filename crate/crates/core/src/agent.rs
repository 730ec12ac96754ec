//! One incremental-model actor-critic agent controlling a scalar loop.
//!
//! Each control step the agent
//! 1. refits its incremental model on the newest realized transition,
//! 2. alternates critic (TD) and actor passes `policy_iterations` times,
//! 3. emits the action of the updated actor.
//!
//! The actor minimizes, at the predicted next tracking error `ê`,
//!
//! ```text
//! w·ê² + a·u² + γ·V̂(ê) + λ·V̂(ê) + ρ·(u − u_prev)²
//! ```
//!
//! where `ê` comes from the incremental model so that gradients reach the
//! actor through `∂ê/∂u = G`. With `λ = 0` this is the plain incremental
//! HDP actor objective; the λ term pushes the policy toward actions that
//! shrink the critic (the Lyapunov candidate) at the next step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::incremental::{im_predict, im_update, IncrementalModel};
use crate::network::{adam_step, Activation, AdamState, Mlp};

/// Hyperparameters of one loop's agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub gamma: f64,
    pub forgetting: f64,
    pub policy_iterations: usize,
    pub hidden: usize,
    pub error_weight: f64,
    /// `a` for the outer loop, `b` for the inner loop.
    pub action_weight: f64,
    /// ρ
    pub smoothness_weight: f64,
    /// λ
    pub lyapunov_weight: f64,
    pub critic_loss_threshold: f64,
    pub max_update_steps: usize,
    /// Actor output scale in physical units (deg/s or deg).
    pub action_limit: f64,
    /// Half-width of the uniform weight initialization.
    pub init_range: f64,
    pub initial_covariance: f64,
}

impl AgentConfig {
    /// Outer (angle-of-attack) loop defaults.
    pub fn higher() -> Self {
        Self {
            critic_lr: 0.1,
            actor_lr: 5e-7,
            gamma: 0.6,
            forgetting: 0.99,
            policy_iterations: 3,
            hidden: 7,
            error_weight: 1.0,
            action_weight: 5e-6,
            smoothness_weight: 9.3e-3,
            lyapunov_weight: 0.0,
            critic_loss_threshold: 5e-5,
            max_update_steps: 50,
            action_limit: 30.0,
            init_range: 0.1,
            initial_covariance: 100.0,
        }
    }

    /// Inner (pitch-rate) loop defaults.
    pub fn lower() -> Self {
        Self {
            actor_lr: 1e-7,
            action_weight: 1e-5,
            smoothness_weight: 1e-5,
            critic_loss_threshold: 1e-4,
            action_limit: 20.0,
            ..Self::higher()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Range(msg)) };
        range(self.gamma > 0.0 && self.gamma < 1.0, format!("gamma out of range (0,1): {}", self.gamma))?;
        range(self.critic_lr > 0.0, format!("critic_lr must be > 0: {}", self.critic_lr))?;
        range(self.actor_lr > 0.0, format!("actor_lr must be > 0: {}", self.actor_lr))?;
        range(
            self.forgetting > 0.0 && self.forgetting <= 1.0,
            format!("forgetting out of range (0,1]: {}", self.forgetting),
        )?;
        range(self.policy_iterations >= 1, "policy_iterations must be >= 1".into())?;
        range(self.max_update_steps >= 1, "max_update_steps must be >= 1".into())?;
        range(
            self.hidden >= 1 && self.hidden <= crate::network::MAX_HIDDEN,
            format!("hidden out of range: {}", self.hidden),
        )?;
        for (name, v) in [
            ("error_weight", self.error_weight),
            ("action_weight", self.action_weight),
            ("smoothness_weight", self.smoothness_weight),
            ("lambda", self.lyapunov_weight),
            ("critic_loss_threshold", self.critic_loss_threshold),
            ("init_range", self.init_range),
        ] {
            range(v.is_finite() && v >= 0.0, format!("{name} must be >= 0: {v}"))?;
        }
        range(self.action_limit > 0.0, format!("action_limit must be > 0: {}", self.action_limit))?;
        range(
            self.initial_covariance > 0.0,
            format!("initial_covariance must be > 0: {}", self.initial_covariance),
        )?;
        Ok(())
    }
}

/// `error_weight·ê² + action_weight·u²`.
pub fn one_step_cost(e_next_pred: f64, action: f64, cfg: &AgentConfig) -> Result<f64> {
    finite(e_next_pred, "predicted error")?;
    finite(action, "action")?;
    Ok(cfg.error_weight * e_next_pred * e_next_pred + cfg.action_weight * action * action)
}

/// What the agent sees of its loop at one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Loop state `x_t` (α or q).
    pub state: f64,
    /// Tracking error `x_t − r_t`.
    pub error: f64,
    /// Reference the predicted state is compared against at `t+1`.
    pub next_reference: f64,
    /// The realized model input is `input_base + input_gain·action`. The outer
    /// loop's model is driven by the filtered command, which depends affinely
    /// on the raw action through the filter.
    pub input_base: f64,
    pub input_gain: f64,
    /// Whether the actor objective predicts through the input map above. When
    /// false the action itself is the model's current input.
    pub chain_input_map: bool,
}

impl Observation {
    pub fn actor_input(&self) -> [f64; 2] {
        [self.error, self.state]
    }

    pub fn model_input(&self, action: f64) -> f64 {
        self.input_base + self.input_gain * action
    }

    pub fn objective_input(&self, action: f64) -> f64 {
        if self.chain_input_map {
            self.model_input(action)
        } else {
            action
        }
    }

    /// d(objective input)/d(action).
    pub fn objective_gain(&self) -> f64 {
        if self.chain_input_map {
            self.input_gain
        } else {
            1.0
        }
    }
}

/// Terms of the actor objective at one action.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActorLoss {
    pub cost: f64,
    pub gamma_v: f64,
    pub lambda_v: f64,
    pub smoothness: f64,
    pub total: f64,
    pub predicted_error: f64,
}

/// Per-step report from [`Agent::step`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub action: f64,
    /// Critic value at the current error after this step's updates.
    pub value: f64,
    pub critic_loss: f64,
    pub actor_loss: ActorLoss,
    /// `|x_t − x̂_t|` for the prediction made one step earlier.
    pub prediction_error: f64,
    pub skipped_actor_steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Memory {
    /// x[t-1]
    state: f64,
    /// x[t-2]
    state_prev: f64,
    /// model input at t-1
    input: f64,
    /// model input at t-2
    input_prev: f64,
    /// e[t-1]
    error: f64,
    /// prediction of x[t] made at t-1
    predicted_state: f64,
    steps: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agent {
    pub critic: Mlp,
    pub critic_opt: AdamState,
    pub actor: Mlp,
    pub actor_opt: AdamState,
    pub model: IncrementalModel,
    /// Last commanded action.
    pub prev_action: f64,
    /// Last tracking error.
    pub prev_error: f64,
    memory: Option<Memory>,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl Agent {
    /// Critic input: tracking error. Actor input: (tracking error, state).
    pub fn new<R: Rng + ?Sized>(cfg: &AgentConfig, initial_g: f64, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let critic = Mlp::random(1, cfg.hidden, Activation::Abs, cfg.init_range, rng)?;
        let actor = Mlp::random(2, cfg.hidden, Activation::Tanh, cfg.init_range, rng)?;
        Self::from_parts(critic, actor, IncrementalModel::new(0.0, initial_g, cfg.forgetting, cfg.initial_covariance)?)
    }

    pub fn from_parts(critic: Mlp, actor: Mlp, model: IncrementalModel) -> Result<Self> {
        if critic.input_dim != 1 || actor.input_dim != 2 {
            return Err(Error::InvalidArgument("critic takes 1 input and actor takes 2".into()));
        }
        Ok(Self {
            critic_opt: AdamState::new(critic.params.len()),
            actor_opt: AdamState::new(actor.params.len()),
            scratch: vec![0.0; critic.params.len().max(actor.params.len())],
            critic,
            actor,
            model,
            prev_action: 0.0,
            prev_error: 0.0,
            memory: None,
        })
    }

    pub fn value(&self, error: f64) -> Result<f64> {
        self.critic.forward(&[error])
    }

    /// Actor output in physical units, within ±`action_limit`.
    pub fn policy(&self, input: &[f64], cfg: &AgentConfig) -> Result<f64> {
        let u = cfg.action_limit * self.actor.forward(input)?;
        Ok(u.clamp(-cfg.action_limit, cfg.action_limit))
    }

    /// Previous state and model input used for prediction at this step.
    fn prediction_anchor(&self, obs: &Observation) -> (f64, f64) {
        match &self.memory {
            Some(m) => (m.state, m.input),
            None => (obs.state, 0.0),
        }
    }

    fn predicted_state(&self, obs: &Observation, action: f64) -> Result<f64> {
        let (x_prev, u_prev) = self.prediction_anchor(obs);
        im_predict(&self.model, obs.state, x_prev, obs.model_input(action), u_prev)
    }

    fn objective_state(&self, obs: &Observation, action: f64) -> Result<f64> {
        let (x_prev, u_prev) = self.prediction_anchor(obs);
        im_predict(&self.model, obs.state, x_prev, obs.objective_input(action), u_prev)
    }

    /// TD update of the critic on the transition `e_t → e_next` with cost
    /// `c_t`. The target is frozen for the whole call.
    pub fn critic_update(&mut self, e_t: f64, c_t: f64, e_next: f64, cfg: &AgentConfig) -> Result<f64> {
        let target = c_t + cfg.gamma * self.value(e_next)?;
        let input = [e_t];
        let mut input_grad = [0.0];
        for _ in 0..cfg.max_update_steps {
            let v = self.critic.forward(&input)?;
            let loss = 0.5 * (v - target) * (v - target);
            if !loss.is_finite() {
                return Err(Error::NonFinite("critic loss"));
            }
            if loss < cfg.critic_loss_threshold {
                return Ok(loss);
            }
            let n = self.critic.params.len();
            self.critic.backward_into(&input, v - target, &mut self.scratch[..n], &mut input_grad)?;
            adam_step(&mut self.critic.params, &self.scratch[..n], &mut self.critic_opt, cfg.critic_lr)?;
        }
        let v = self.critic.forward(&input)?;
        finite(0.5 * (v - target) * (v - target), "critic loss")
    }

    /// Actor objective at the current actor output.
    pub fn actor_loss(&self, obs: &Observation, cfg: &AgentConfig) -> Result<ActorLoss> {
        let u = cfg.action_limit * self.actor.forward(&obs.actor_input())?;
        self.loss_at_action(obs, u, cfg)
    }

    /// Actor objective evaluated at an explicit action `u`.
    pub fn loss_at_action(&self, obs: &Observation, u: f64, cfg: &AgentConfig) -> Result<ActorLoss> {
        let e_hat = self.objective_state(obs, u)? - obs.next_reference;
        let v = self.value(e_hat)?;
        let du = u - self.prev_action;
        let cost = one_step_cost(e_hat, u, cfg)?;
        let out = ActorLoss {
            cost,
            gamma_v: cfg.gamma * v,
            lambda_v: cfg.lyapunov_weight * v,
            smoothness: cfg.smoothness_weight * du * du,
            total: 0.0,
            predicted_error: e_hat,
        };
        let total = out.cost + out.gamma_v + out.lambda_v + out.smoothness;
        Ok(ActorLoss { total: finite(total, "actor loss")?, ..out })
    }

    /// Gradient of the actor objective with respect to the actor parameters,
    /// written into `grads`. Returns the loss terms.
    pub fn actor_gradient(&self, obs: &Observation, cfg: &AgentConfig, grads: &mut [f64]) -> Result<ActorLoss> {
        let input = obs.actor_input();
        let out = self.actor.forward(&input)?;
        let u = cfg.action_limit * out;
        let loss = self.loss_at_action(obs, u, cfg)?;
        let e_hat = loss.predicted_error;
        let mut dv = [0.0];
        self.critic.input_gradient(&[e_hat], &mut dv)?;
        let de_du = self.model.g * obs.objective_gain();
        let dl_du = (2.0 * cfg.error_weight * e_hat + (cfg.gamma + cfg.lyapunov_weight) * dv[0]) * de_du
            + 2.0 * cfg.action_weight * u
            + 2.0 * cfg.smoothness_weight * (u - self.prev_action);
        let mut input_grad = [0.0; 2];
        self.actor.backward_into(&input, dl_du * cfg.action_limit, grads, &mut input_grad)?;
        Ok(loss)
    }

    /// Runs `max_update_steps` Adam steps on the actor objective. Steps with
    /// non-finite gradients are skipped and counted.
    fn actor_pass(&mut self, obs: &Observation, cfg: &AgentConfig) -> Result<u32> {
        let n = self.actor.params.len();
        let mut grads = std::mem::take(&mut self.scratch);
        let mut skipped = 0;
        for _ in 0..cfg.max_update_steps {
            let ok = match self.actor_gradient(obs, cfg, &mut grads[..n]) {
                Ok(_) => adam_step(&mut self.actor.params, &grads[..n], &mut self.actor_opt, cfg.actor_lr).is_ok(),
                Err(Error::NonFinite(_)) => false,
                Err(e) => {
                    self.scratch = grads;
                    return Err(e);
                }
            };
            if !ok {
                skipped += 1;
            }
        }
        self.scratch = grads;
        Ok(skipped)
    }

    /// Actor update for one control step: `policy_iterations` alternating
    /// critic and actor passes, then the clamped post-update action.
    /// `transition` is the realized `(e_prev, cost_prev)` feeding the critic.
    pub fn actor_update(
        &mut self,
        obs: &Observation,
        transition: Option<(f64, f64)>,
        cfg: &AgentConfig,
    ) -> Result<(f64, f64, u32)> {
        let mut critic_loss = 0.0;
        let mut skipped = 0;
        for _ in 0..cfg.policy_iterations {
            if let Some((e_prev, cost_prev)) = transition {
                critic_loss = self.critic_update(e_prev, cost_prev, obs.error, cfg)?;
            }
            skipped += self.actor_pass(obs, cfg)?;
        }
        let action = self.policy(&obs.actor_input(), cfg)?;
        Ok((action, critic_loss, skipped))
    }

    /// One full control step: identify, evaluate, improve, act.
    pub fn step(&mut self, obs: &Observation, cfg: &AgentConfig) -> Result<StepReport> {
        finite(obs.state, "loop state")?;
        finite(obs.error, "loop error")?;

        let mut prediction_error = 0.0;
        let mut transition = None;
        if let Some(m) = self.memory {
            prediction_error = (obs.state - m.predicted_state).abs();
            if m.steps >= 2 {
                self.model = im_update(&self.model, obs.state, m.state, m.state_prev, m.input, m.input_prev)?;
            }
            // realized cost of the previous action
            let cost = one_step_cost(obs.error, self.prev_action, cfg)?;
            transition = Some((m.error, cost));
        }

        let (action, critic_loss, skipped) = self.actor_update(obs, transition, cfg)?;
        let actor_loss = self.loss_at_action(obs, action, cfg)?;
        let value = self.value(obs.error)?;
        let predicted_state = self.predicted_state(obs, action)?;

        let input = obs.model_input(action);
        self.memory = Some(match self.memory {
            Some(m) => Memory {
                state: obs.state,
                state_prev: m.state,
                input,
                input_prev: m.input,
                error: obs.error,
                predicted_state,
                steps: m.steps + 1,
            },
            None => Memory {
                state: obs.state,
                state_prev: obs.state,
                input,
                input_prev: 0.0,
                error: obs.error,
                predicted_state,
                steps: 1,
            },
        });
        self.prev_action = action;
        self.prev_error = obs.error;

        Ok(StepReport {
            action,
            value,
            critic_loss,
            actor_loss,
            prediction_error,
            skipped_actor_steps: skipped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(error: f64, state: f64) -> Observation {
        Observation { state, error, next_reference: state - error, input_base: 0.0, input_gain: 1.0, chain_input_map: true }
    }

    fn agent(seed: u64, cfg: &AgentConfig) -> Agent {
        Agent::new(cfg, -0.01, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn cost_examples() {
        let cfg = AgentConfig::higher();
        assert_eq!(one_step_cost(0.0, 0.0, &cfg).unwrap(), 0.0);
        assert_eq!(one_step_cost(1.0, 0.0, &cfg).unwrap(), 1.0);
        assert!((one_step_cost(2.0, 100.0, &cfg).unwrap() - 4.05).abs() < 1e-12);
        assert!(one_step_cost(f64::NAN, 0.0, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        AgentConfig::higher().validate().unwrap();
        AgentConfig::lower().validate().unwrap();
        let bad = AgentConfig { gamma: 1.5, ..AgentConfig::higher() };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("gamma out of range (0,1)"), "{msg}");
        assert!(AgentConfig { policy_iterations: 0, ..AgentConfig::lower() }.validate().is_err());
        assert!(AgentConfig { actor_lr: 0.0, ..AgentConfig::lower() }.validate().is_err());
    }

    #[test]
    fn critic_target_and_perfect_critic() {
        let cfg = AgentConfig::higher();
        let mut a = agent(1, &cfg);
        // constant critic V = 2 everywhere: hidden weights zero, b2 = 2
        a.critic.params.iter_mut().for_each(|p| *p = 0.0);
        a.critic.set_b2(2.0);
        // target = 1 + 0.6·2 = 2.2
        let loss = a.critic_update(0.5, 1.0, -0.3, &AgentConfig { max_update_steps: 1, ..cfg.clone() }).unwrap();
        assert!(loss < 0.5 * 0.2 * 0.2, "one step should reduce the initial loss");

        let mut a = agent(1, &cfg);
        a.critic.params.iter_mut().for_each(|p| *p = 0.0);
        a.critic.set_b2(2.0);
        let before = a.critic.clone();
        // c = 0.8 makes the target exactly 2.0
        let loss = a.critic_update(0.5, 0.8, -0.3, &cfg).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(a.critic, before);
    }

    #[test]
    fn critic_converges_on_fixed_transition() {
        let cfg = AgentConfig::higher();
        let mut a = agent(2, &cfg);
        let mut loss = f64::INFINITY;
        for _ in 0..20 {
            loss = a.critic_update(0.3, 0.09, 0.25, &cfg).unwrap();
            if loss < cfg.critic_loss_threshold {
                break;
            }
        }
        assert!(loss < cfg.critic_loss_threshold, "loss {loss}");
    }

    #[test]
    fn zero_actor_gives_zero_action() {
        let cfg = AgentConfig::lower();
        let mut a = agent(3, &cfg);
        a.actor.params.iter_mut().for_each(|p| *p = 0.0);
        assert_eq!(a.policy(&[1.0, 2.0], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn lambda_enters_linearly() {
        let cfg = AgentConfig::higher();
        let a = agent(4, &cfg);
        let o = obs(1.5, 3.0);
        let l0 = a.actor_loss(&o, &cfg).unwrap();
        let l500 = a.actor_loss(&o, &AgentConfig { lyapunov_weight: 500.0, ..cfg.clone() }).unwrap();
        let v = a.value(l0.predicted_error).unwrap();
        assert!((l500.total - l0.total - 500.0 * v).abs() < 1e-9 * (1.0 + l500.total.abs()));
        assert_eq!(l0.lambda_v, 0.0);
    }

    #[test]
    fn dead_model_leaves_only_direct_action_terms() {
        let cfg = AgentConfig { lyapunov_weight: 500.0, ..AgentConfig::higher() };
        let mut a = agent(5, &cfg);
        a.model.f = 0.0;
        a.model.g = 0.0;
        a.prev_action = 0.7;
        let o = obs(2.0, 1.0);
        let mut grads = vec![0.0; a.actor.params.len()];
        a.actor_gradient(&o, &cfg, &mut grads).unwrap();

        let u = a.policy(&o.actor_input(), &cfg).unwrap();
        let dl_du = 2.0 * cfg.action_weight * u + 2.0 * cfg.smoothness_weight * (u - 0.7);
        let expected = a.actor.backward(&o.actor_input(), dl_du * cfg.action_limit).unwrap();
        for (g, e) in grads.iter().zip(&expected.params) {
            assert!((g - e).abs() <= 1e-15 + 1e-12 * e.abs());
        }
    }

    #[test]
    fn actor_step_moves_action_to_reduce_predicted_error() {
        // positive predicted error and negative G: the action should grow
        let cfg = AgentConfig { actor_lr: 1e-3, ..AgentConfig::lower() };
        let mut a = agent(6, &cfg);
        a.model.g = -0.05;
        let o = obs(3.0, 3.0);
        let before = a.policy(&o.actor_input(), &cfg).unwrap();
        let (after, _, skipped) = a.actor_update(&o, None, &AgentConfig { policy_iterations: 1, ..cfg.clone() }).unwrap();
        assert_eq!(skipped, 0);
        assert!(after > before, "{before} -> {after}");
    }

    #[test]
    fn step_runs_and_bounds_action() {
        let cfg = AgentConfig::lower();
        let mut a = agent(7, &cfg);
        for k in 0..50 {
            let e = (k as f64 * 0.1).sin() * 5.0;
            let r = a.step(&obs(e, e), &cfg).unwrap();
            assert!(r.action.abs() <= cfg.action_limit);
            assert!(r.value >= 0.0);
        }
    }
}
