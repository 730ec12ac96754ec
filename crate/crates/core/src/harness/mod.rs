//! The runnable side: configuration files, CSV and manifest persistence,
//! windowed metrics, network dumps and the grid decrease check.

pub mod config;
pub mod csv_io;
pub mod metrics;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::cascade::{run_comparison, run_episode, Episode, EpisodeConfig, Termination, Variant};
use crate::error::{io_err, Error, Result};
use crate::incremental::IncrementalModel;
use crate::lyapunov::{
    estimate_lipschitz, estimate_plant_lipschitz, lattice, practical_decrease_check, DecreaseReport, LyapunovBounds,
};
use crate::network::Mlp;
use crate::plant::PhysicalParams;

pub use config::{parse_config, to_config_text};
pub use csv_io::{emit_csv, read_csv};
pub use metrics::{compute_metrics, Window, WindowMetrics};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Run metadata written next to every `steps.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: EpisodeConfig,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
    /// `running` until the run finishes.
    pub status: String,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = format!(
            "version = {}\nseed = {}\nstatus = {}\nwall_clock_s = {:.3}\n",
            self.version, self.config.seed, self.status, self.wall_clock_s
        );
        for p in &self.outputs {
            out.push_str(&format!("output = {}\n", p.display()));
        }
        out.push_str("\n[config]\n");
        out.push_str(&to_config_text(&self.config));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(io_err(path))
    }

    /// Recovers the configuration snapshot from a rendered manifest.
    pub fn config_from_text(text: &str) -> Result<EpisodeConfig> {
        let section = text
            .split_once("[config]\n")
            .map(|(_, cfg)| cfg)
            .ok_or_else(|| Error::InvalidArgument("manifest has no [config] section".into()))?;
        parse_config(section)
    }
}

/// Network and model snapshot of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub critic: Mlp,
    pub actor: Mlp,
    pub model: IncrementalModel,
    pub action_limit: f64,
    /// Worst one-step prediction error over the trailing window.
    pub model_error: f64,
}

impl AgentSnapshot {
    fn of(agent: &Agent, action_limit: f64, model_error: f64) -> Self {
        Self {
            critic: agent.critic.clone(),
            actor: agent.actor.clone(),
            model: agent.model,
            action_limit,
            model_error,
        }
    }
}

/// Contents of `weights.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsDump {
    pub version: String,
    pub seed: u64,
    pub dt: f64,
    /// d(outer model input)/d(outer action) as seen by the outer actor.
    pub objective_gain: f64,
    pub plant: PhysicalParams,
    pub higher: AgentSnapshot,
    pub lower: AgentSnapshot,
}

impl WeightsDump {
    pub fn from_episode(cfg: &EpisodeConfig, ep: &Episode) -> Self {
        Self {
            version: VERSION.into(),
            seed: cfg.seed,
            dt: cfg.dt,
            objective_gain: if cfg.filter_in_objective { cfg.dt / cfg.filter_time_constant } else { 1.0 },
            plant: cfg.plant,
            higher: AgentSnapshot::of(&ep.higher, cfg.higher.action_limit, ep.model_error.0),
            lower: AgentSnapshot::of(&ep.lower, cfg.lower.action_limit, ep.model_error.1),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(io_err(path))
    }
}

/// Windows from `requested` that contain at least one logged sample.
pub fn usable_windows(log: &[crate::cascade::StepLog], requested: &[Window]) -> Vec<Window> {
    requested.iter().copied().filter(|w| log.iter().any(|r| w.contains(r.t))).collect()
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub termination: Termination,
    pub metrics: Vec<WindowMetrics>,
    pub steps: usize,
    pub model_error: (f64, f64),
    pub wall_clock_s: f64,
    pub steps_path: PathBuf,
}

/// Runs one episode and writes `manifest.txt`, `steps.csv`, `metrics.csv`
/// and `weights.json` into `out_dir`. The manifest is written first with
/// status `running` and rewritten at the end.
pub fn run_to_dir(cfg: &EpisodeConfig, out_dir: &Path, windows: &[Window]) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let steps_path = out_dir.join("steps.csv");
    let metrics_path = out_dir.join("metrics.csv");
    let weights_path = out_dir.join("weights.json");
    let manifest_path = out_dir.join("manifest.txt");
    let mut manifest = RunManifest {
        config: cfg.clone(),
        version: VERSION.into(),
        outputs: vec![steps_path.clone(), metrics_path.clone(), weights_path.clone()],
        wall_clock_s: 0.0,
        status: "running".into(),
    };
    manifest.write(&manifest_path)?;

    let started = Instant::now();
    let ep = run_episode(cfg)?;
    manifest.wall_clock_s = started.elapsed().as_secs_f64();

    emit_csv(&ep.log, &steps_path)?;
    let metrics = compute_metrics(&ep.log, &usable_windows(&ep.log, windows))?;
    let file = fs::File::create(&metrics_path).map_err(io_err(&metrics_path))?;
    csv_io::write_metrics(&[("run".to_string(), metrics.clone())], file)?;
    WeightsDump::from_episode(cfg, &ep).save(&weights_path)?;

    manifest.status = ep.termination.to_string();
    manifest.write(&manifest_path)?;
    Ok(RunSummary {
        termination: ep.termination,
        metrics,
        steps: ep.log.len(),
        model_error: ep.model_error,
        wall_clock_s: manifest.wall_clock_s,
        steps_path,
    })
}

/// Side-by-side table: one row per (window, metric), one column per variant.
pub fn comparison_table(report: &crate::cascade::ComparisonReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut header = vec!["window".to_string(), "metric".to_string()];
    header.extend(report.results.iter().map(|r| r.variant.name.clone()));
    rows.push(header);
    for w in &report.windows {
        for (mi, name) in WindowMetrics::NAMES.iter().enumerate() {
            let mut row = vec![w.to_string(), name.to_string()];
            for r in &report.results {
                let cell = r
                    .metrics
                    .iter()
                    .find(|m| m.window == *w)
                    .map(|m| csv_io::format_float(m.values()[mi]))
                    .unwrap_or_else(|| "NA".into());
                row.push(cell);
            }
            rows.push(row);
        }
    }
    rows
}

/// Runs every variant, writing each into `out_dir/<name>/` and the
/// side-by-side table into `out_dir/comparison.csv`.
pub fn compare_to_dir(
    base: &EpisodeConfig,
    variants: &[Variant],
    out_dir: &Path,
    windows: &[Window],
) -> Result<crate::cascade::ComparisonReport> {
    let report = run_comparison(base, variants, windows)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for r in &report.results {
        let dir = out_dir.join(&r.variant.name);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let cfg = r.variant.apply(base);
        let mut manifest = RunManifest {
            config: cfg.clone(),
            version: VERSION.into(),
            outputs: vec![dir.join("steps.csv"), dir.join("metrics.csv"), dir.join("weights.json")],
            wall_clock_s: 0.0,
            status: "running".into(),
        };
        manifest.write(&dir.join("manifest.txt"))?;
        if let Some(ep) = &r.episode {
            emit_csv(&ep.log, &dir.join("steps.csv"))?;
            WeightsDump::from_episode(&cfg, ep).save(&dir.join("weights.json"))?;
        }
        let file = fs::File::create(dir.join("metrics.csv")).map_err(io_err(dir.join("metrics.csv")))?;
        csv_io::write_metrics(&[(r.variant.name.clone(), r.metrics.clone())], file)?;
        manifest.status = r.termination.to_string();
        manifest.write(&dir.join("manifest.txt"))?;
    }
    let path = out_dir.join("comparison.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for row in comparison_table(&report) {
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopKind {
    Higher,
    Lower,
}

impl std::str::FromStr for LoopKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher" | "outer" => Ok(LoopKind::Higher),
            "lower" | "inner" => Ok(LoopKind::Lower),
            _ => Err(Error::InvalidArgument(format!("loop must be `higher` or `lower`, got {s:?}"))),
        }
    }
}

/// Settings for [`check_snapshot`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSettings {
    pub loop_kind: LoopKind,
    /// Grid resolution in the error coordinate.
    pub tau: f64,
    /// The grid spans `[-extent, extent]`.
    pub extent: f64,
    /// Reference value the state is measured from (α_ref or q′_ref).
    pub reference: f64,
    /// Overrides the recorded model error when set.
    pub model_err: Option<f64>,
    pub lipschitz_samples: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            loop_kind: LoopKind::Higher,
            tau: 1e-3,
            extent: 5.0,
            reference: 0.0,
            model_err: None,
            lipschitz_samples: 2000,
        }
    }
}

/// Grid decrease check of a trained agent's critic along its own one-step
/// incremental-model prediction from rest: `ê = e + G·g·π(e, r + e)`, where
/// `g` is the recorded objective gain of the loop.
pub fn check_snapshot(dump: &WeightsDump, settings: &CheckSettings) -> Result<DecreaseReport> {
    let (snap, gain) = match settings.loop_kind {
        LoopKind::Higher => (&dump.higher, dump.objective_gain),
        LoopKind::Lower => (&dump.lower, 1.0),
    };
    let r = settings.reference;
    let policy = |e: f64, x: f64| snap.action_limit * snap.actor.forward(&[e, x]).unwrap_or(f64::NAN);
    let value = |e: f64| snap.critic.forward(&[e]).unwrap_or(f64::NAN);
    let ext = settings.extent;

    let bounds = LyapunovBounds {
        lipschitz_v: estimate_lipschitz(|x| value(x[0]), &[(-ext, ext)], settings.lipschitz_samples, 1),
        lipschitz_f: estimate_plant_lipschitz(&dump.plant, dump.dt, settings.lipschitz_samples, 2)?,
        lipschitz_pi: estimate_lipschitz(
            |x| policy(x[0], x[1]),
            &[(-ext, ext), (r - ext, r + ext)],
            settings.lipschitz_samples,
            3,
        ),
        tau: settings.tau,
        model_err: settings.model_err.unwrap_or(snap.model_error),
    };
    let grid = lattice(&[(-ext, ext)], settings.tau)?;
    practical_decrease_check(
        |x| value(x[0]),
        |x| {
            let e = x[0];
            value(e + snap.model.g * gain * policy(e, r + e))
        },
        &grid,
        &bounds,
    )
}

pub fn write_check_csv(report: &DecreaseReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point", "v", "u_n", "margin", "satisfied"])?;
    for p in &report.points {
        let point = p.point.iter().map(|x| csv_io::format_float(*x)).collect::<Vec<_>>().join(" ");
        w.write_record([
            point,
            csv_io::format_float(p.v),
            csv_io::format_float(p.bound),
            csv_io::format_float(p.margin),
            (p.satisfied as u8).to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
