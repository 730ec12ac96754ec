use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lyaflight::cascade::{EpisodeConfig, Variant};
use lyaflight::harness::{
    self, check_snapshot, compare_to_dir, compute_metrics, csv_io, parse_config, read_csv, run_to_dir,
    usable_windows, write_check_csv, CheckSettings, LoopKind, Window, WeightsDump,
};

#[derive(Parser)]
#[command(name = "lyaflight", version, about = "Cascaded online actor-critic flight control workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EpisodeArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Lyapunov weight of the outer (angle-of-attack) agent.
    #[arg(long)]
    lambda1: Option<f64>,
    /// Lyapunov weight of the inner (pitch-rate) agent.
    #[arg(long)]
    lambda2: Option<f64>,
    /// Episode length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Control period in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Metric window START-END in seconds; repeatable.
    #[arg(long = "window")]
    windows: Vec<Window>,
}

impl EpisodeArgs {
    fn episode_config(&self) -> Result<EpisodeConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_config(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => EpisodeConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = self.lambda1 {
            cfg.higher.lyapunov_weight = l;
        }
        if let Some(l) = self.lambda2 {
            cfg.lower.lyapunov_weight = l;
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn windows(&self) -> Vec<Window> {
        if self.windows.is_empty() {
            Window::defaults()
        } else {
            self.windows.clone()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a single learning episode.
    Run(EpisodeArgs),
    /// Run several λ settings with the same seed and compare them.
    Compare {
        #[command(flatten)]
        episode: EpisodeArgs,
        /// NAME:LAMBDA1:LAMBDA2; repeatable. Defaults to the three reference settings.
        #[arg(long = "variant")]
        variants: Vec<String>,
    },
    /// Grid check of the practical decrease condition on a saved weights.json.
    Check {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long = "loop", default_value = "higher")]
        loop_kind: LoopKind,
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
        /// Half-width of the error grid.
        #[arg(long, default_value_t = 5.0)]
        extent: f64,
        /// Reference value of the loop state at which the grid is taken.
        #[arg(long, default_value_t = 0.0)]
        reference: f64,
        /// Override the recorded model prediction error bound.
        #[arg(long)]
        model_err: Option<f64>,
        #[arg(long, default_value = "check.csv")]
        out: PathBuf,
    },
    /// Recompute window metrics from a steps.csv.
    Metrics {
        #[arg(long)]
        steps: PathBuf,
        #[arg(long = "window")]
        windows: Vec<Window>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical oracles.
    Selftest,
}

fn parse_variant(s: &str) -> Result<Variant> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("variant must be NAME:LAMBDA1:LAMBDA2, got {s:?}");
    }
    Ok(Variant::new(parts[0], parts[1].parse()?, parts[2].parse()?))
}

fn print_metrics(label: &str, metrics: &[harness::WindowMetrics]) {
    for m in metrics {
        println!(
            "{label} [{}] rms_e_alpha={:.4} rms_e_q={:.4} mean_dV1={:.3e} mean_dV2={:.3e} peak_delta={:.3}",
            m.window, m.rms_e_alpha, m.rms_e_q, m.mean_dv1, m.mean_dv2, m.peak_delta
        );
    }
}

fn write_metrics_file(path: &Path, label: &str, metrics: &[harness::WindowMetrics]) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    csv_io::write_metrics(&[(label.to_string(), metrics.to_vec())], file)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.episode_config()?;
            let summary = run_to_dir(&cfg, &args.out, &args.windows())?;
            println!(
                "{} steps in {:.1} s: {} (model error α {:.3e}, q {:.3e})",
                summary.steps, summary.wall_clock_s, summary.termination, summary.model_error.0, summary.model_error.1
            );
            print_metrics("run", &summary.metrics);
            Ok(summary.termination.is_completed())
        }
        Command::Compare { episode, variants } => {
            let cfg = episode.episode_config()?;
            let variants = if variants.is_empty() {
                Variant::defaults()
            } else {
                variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?
            };
            let report = compare_to_dir(&cfg, &variants, &episode.out, &episode.windows())?;
            let mut ok = true;
            for r in &report.results {
                println!("{}: {}", r.variant.name, r.termination);
                print_metrics(&r.variant.name, &r.metrics);
                ok &= r.termination.is_completed();
            }
            Ok(ok)
        }
        Command::Check { weights, loop_kind, tau, extent, reference, model_err, out } => {
            let dump = WeightsDump::load(&weights)?;
            let settings = CheckSettings { loop_kind, tau, extent, reference, model_err, ..CheckSettings::default() };
            let report = check_snapshot(&dump, &settings)?;
            write_check_csv(&report, &out)?;
            let b = report.bounds;
            println!(
                "L_v={:.4e} L_f={:.4e} L_pi={:.4e} tau={:.1e} model_err={:.3e} L_dv={:.4e}",
                b.lipschitz_v, b.lipschitz_f, b.lipschitz_pi, b.tau, b.model_err, report.l_delta_v
            );
            println!(
                "{} of {} grid points satisfy the decrease condition ({:.2}%)",
                report.satisfied(),
                report.points.len(),
                100.0 * report.fraction_satisfied()
            );
            Ok(true)
        }
        Command::Metrics { steps, windows, out } => {
            let log = read_csv(&steps)?;
            let requested = if windows.is_empty() { Window::defaults() } else { windows };
            let metrics = compute_metrics(&log, &usable_windows(&log, &requested))?;
            print_metrics("metrics", &metrics);
            if let Some(path) = out {
                write_metrics_file(&path, "metrics", &metrics)?;
            }
            Ok(true)
        }
        Command::Selftest => {
            let started = std::time::Instant::now();
            let checks = lyaflight::selftest::run_all();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("selftest finished in {:.2} s", started.elapsed().as_secs_f64());
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
