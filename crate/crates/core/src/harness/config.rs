//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments run to end of line
//! duration = 40
//! higher.lambda = 500      # outer-loop Lyapunov weight
//! gamma = 0.6              # bare agent keys set both loops
//! ```
//!
//! Missing keys keep their defaults; unknown keys, malformed lines and
//! out-of-range values are errors that carry the line number.

use crate::agent::AgentConfig;
use crate::cascade::EpisodeConfig;
use crate::error::{Error, Result};

const AGENT_KEYS: [&str; 15] = [
    "critic_lr",
    "actor_lr",
    "gamma",
    "forgetting",
    "policy_iterations",
    "hidden",
    "error_weight",
    "action_weight",
    "smoothness_weight",
    "lambda",
    "critic_loss_threshold",
    "max_update_steps",
    "action_limit",
    "init_range",
    "initial_covariance",
];

fn parse_f64(value: &str, key: &str, line: usize) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| Error::Config {
        line,
        message: format!("{key}: expected a number, got {value:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Config { line, message: format!("{key}: value must be finite") });
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("{key}: expected a non-negative integer, got {value:?}"),
    })
}

fn parse_bool(value: &str, key: &str, line: usize) -> Result<bool> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("{key}: expected true or false, got {value:?}"),
    })
}

fn set_agent(a: &mut AgentConfig, field: &str, value: &str, key: &str, line: usize) -> Result<bool> {
    let num = || parse_f64(value, key, line);
    match field {
        "critic_lr" => a.critic_lr = num()?,
        "actor_lr" => a.actor_lr = num()?,
        "gamma" => a.gamma = num()?,
        "forgetting" => a.forgetting = num()?,
        "policy_iterations" => a.policy_iterations = parse_int(value, key, line)?,
        "hidden" => a.hidden = parse_int(value, key, line)?,
        "error_weight" => a.error_weight = num()?,
        "action_weight" => a.action_weight = num()?,
        "smoothness_weight" => a.smoothness_weight = num()?,
        "lambda" => a.lyapunov_weight = num()?,
        "critic_loss_threshold" => a.critic_loss_threshold = num()?,
        "max_update_steps" => a.max_update_steps = parse_int(value, key, line)?,
        "action_limit" => a.action_limit = num()?,
        "init_range" => a.init_range = num()?,
        "initial_covariance" => a.initial_covariance = num()?,
        _ => return Ok(false),
    }
    a.validate().map_err(|e| Error::Config { line, message: e.to_string() })?;
    Ok(true)
}

fn set_key(cfg: &mut EpisodeConfig, key: &str, value: &str, line: usize) -> Result<()> {
    let num = || parse_f64(value, key, line);
    let known = match key {
        "duration" => {
            cfg.duration = num()?;
            true
        }
        "dt" => {
            cfg.dt = num()?;
            true
        }
        "seed" => {
            cfg.seed = parse_int(value, key, line)?;
            true
        }
        "divergence_limit" => {
            cfg.divergence_limit = num()?;
            true
        }
        "model_error_window" => {
            cfg.model_error_window = num()?;
            true
        }
        "model_error_bound" => {
            cfg.model_error_bound = num()?;
            true
        }
        "reference.amplitude" => {
            cfg.reference.amplitude = num()?;
            true
        }
        "reference.period" => {
            cfg.reference.period = num()?;
            true
        }
        "filter.time_constant" => {
            cfg.filter_time_constant = num()?;
            true
        }
        "filter.in_objective" => {
            cfg.filter_in_objective = parse_bool(value, key, line)?;
            true
        }
        "actuator.time_constant" => {
            cfg.actuator.time_constant = num()?;
            true
        }
        "actuator.rate_limit" => {
            cfg.actuator.rate_limit = num()?;
            true
        }
        "actuator.position_limit" => {
            cfg.actuator.position_limit = num()?;
            true
        }
        _ => false,
    };
    if known {
        return Ok(());
    }
    if let Some(field) = key.strip_prefix("plant.") {
        let p = &mut cfg.plant;
        let slot = match field {
            "gravity" => &mut p.gravity,
            "weight" => &mut p.weight,
            "speed" => &mut p.speed,
            "pitch_inertia" => &mut p.pitch_inertia,
            "rad_to_deg" => &mut p.rad_to_deg,
            "dynamic_pressure" => &mut p.dynamic_pressure,
            "ref_area" => &mut p.ref_area,
            "ref_diameter" => &mut p.ref_diameter,
            "b_z" => &mut p.b_z,
            "b_m" => &mut p.b_m,
            _ => return Err(Error::Config { line, message: format!("unknown key {key:?}") }),
        };
        *slot = num()?;
        return p.validate().map_err(|e| Error::Config { line, message: e.to_string() });
    }
    let handled = if let Some(field) = key.strip_prefix("higher.") {
        set_agent(&mut cfg.higher, field, value, key, line)?
    } else if let Some(field) = key.strip_prefix("lower.") {
        set_agent(&mut cfg.lower, field, value, key, line)?
    } else if AGENT_KEYS.contains(&key) {
        set_agent(&mut cfg.higher, key, value, key, line)? && set_agent(&mut cfg.lower, key, value, key, line)?
    } else {
        false
    };
    if handled {
        Ok(())
    } else {
        Err(Error::Config { line, message: format!("unknown key {key:?}") })
    }
}

/// Applies the assignments in `text` on top of `base`.
pub fn apply_config(base: EpisodeConfig, text: &str) -> Result<EpisodeConfig> {
    let mut cfg = base;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got {content:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::Config { line, message: format!("malformed assignment {content:?}") });
        }
        set_key(&mut cfg, key, value, line)?;
    }
    cfg.validate().map_err(|e| Error::Config { line: 0, message: e.to_string() })?;
    Ok(cfg)
}

/// Parses a configuration file; missing keys take the default values.
pub fn parse_config(text: &str) -> Result<EpisodeConfig> {
    apply_config(EpisodeConfig::default(), text)
}

fn agent_lines(out: &mut String, prefix: &str, a: &AgentConfig) {
    let values: [String; 15] = [
        a.critic_lr.to_string(),
        a.actor_lr.to_string(),
        a.gamma.to_string(),
        a.forgetting.to_string(),
        a.policy_iterations.to_string(),
        a.hidden.to_string(),
        a.error_weight.to_string(),
        a.action_weight.to_string(),
        a.smoothness_weight.to_string(),
        a.lyapunov_weight.to_string(),
        a.critic_loss_threshold.to_string(),
        a.max_update_steps.to_string(),
        a.action_limit.to_string(),
        a.init_range.to_string(),
        a.initial_covariance.to_string(),
    ];
    for (k, v) in AGENT_KEYS.iter().zip(values) {
        out.push_str(&format!("{prefix}.{k} = {v}\n"));
    }
}

/// Renders every key; `parse_config(&to_config_text(c)) == c`.
pub fn to_config_text(cfg: &EpisodeConfig) -> String {
    let p = &cfg.plant;
    let mut out = String::new();
    for (k, v) in [
        ("duration", cfg.duration.to_string()),
        ("dt", cfg.dt.to_string()),
        ("seed", cfg.seed.to_string()),
        ("divergence_limit", cfg.divergence_limit.to_string()),
        ("model_error_window", cfg.model_error_window.to_string()),
        ("model_error_bound", cfg.model_error_bound.to_string()),
        ("reference.amplitude", cfg.reference.amplitude.to_string()),
        ("reference.period", cfg.reference.period.to_string()),
        ("filter.time_constant", cfg.filter_time_constant.to_string()),
        ("filter.in_objective", cfg.filter_in_objective.to_string()),
        ("actuator.time_constant", cfg.actuator.time_constant.to_string()),
        ("actuator.rate_limit", cfg.actuator.rate_limit.to_string()),
        ("actuator.position_limit", cfg.actuator.position_limit.to_string()),
        ("plant.gravity", p.gravity.to_string()),
        ("plant.weight", p.weight.to_string()),
        ("plant.speed", p.speed.to_string()),
        ("plant.pitch_inertia", p.pitch_inertia.to_string()),
        ("plant.rad_to_deg", p.rad_to_deg.to_string()),
        ("plant.dynamic_pressure", p.dynamic_pressure.to_string()),
        ("plant.ref_area", p.ref_area.to_string()),
        ("plant.ref_diameter", p.ref_diameter.to_string()),
        ("plant.b_z", p.b_z.to_string()),
        ("plant.b_m", p.b_m.to_string()),
    ] {
        out.push_str(&format!("{k} = {v}\n"));
    }
    agent_lines(&mut out, "higher", &cfg.higher);
    agent_lines(&mut out, "lower", &cfg.lower);
    out
}
