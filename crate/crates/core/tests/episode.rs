use std::sync::OnceLock;

use lyaflight::cascade::{run_comparison, run_episode, Episode, EpisodeConfig, Termination, Variant};
use lyaflight::harness::comparison_table;
use lyaflight::harness::metrics::Window;

/// One shared 20 s episode, seed 2.
fn episode() -> &'static (EpisodeConfig, Episode) {
    static EP: OnceLock<(EpisodeConfig, Episode)> = OnceLock::new();
    EP.get_or_init(|| {
        let cfg = EpisodeConfig { duration: 20.0, seed: 2, ..EpisodeConfig::default() };
        let ep = run_episode(&cfg).unwrap();
        (cfg, ep)
    })
}

#[test]
fn completes_with_one_row_per_step() {
    let (cfg, ep) = episode();
    assert!(ep.termination.is_completed(), "{}", ep.termination);
    assert_eq!(ep.log.len(), cfg.step_count().unwrap());
    assert_eq!(ep.skipped_actor_steps, (0, 0));
    for (k, r) in ep.log.iter().enumerate() {
        assert!((r.t - k as f64 * cfg.dt).abs() < 1e-9);
    }
}

#[test]
fn tracking_errors_hold_exactly_per_row() {
    let (_, ep) = episode();
    for r in &ep.log {
        assert_eq!(r.e_alpha, r.alpha - r.alpha_ref);
        assert_eq!(r.e_q, r.q - r.q_ref_filtered);
    }
}

#[test]
fn value_increments_telescope() {
    let (_, ep) = episode();
    let first = ep.log.first().unwrap();
    let last = ep.log.last().unwrap();
    assert_eq!(last.dv1, 0.0);
    assert_eq!(last.dv2, 0.0);
    let sum1: f64 = ep.log.iter().map(|r| r.dv1).sum();
    let sum2: f64 = ep.log.iter().map(|r| r.dv2).sum();
    let scale1 = ep.log.iter().map(|r| r.v1.abs()).fold(1.0, f64::max);
    let scale2 = ep.log.iter().map(|r| r.v2.abs()).fold(1.0, f64::max);
    assert!((sum1 - (last.v1 - first.v1)).abs() < 1e-9 * scale1 * ep.log.len() as f64);
    assert!((sum2 - (last.v2 - first.v2)).abs() < 1e-9 * scale2 * ep.log.len() as f64);
    assert!(ep.log.iter().all(|r| r.v1 >= 0.0 && r.v2 >= 0.0));
}

#[test]
fn actuator_limits_hold_at_every_step() {
    let (cfg, ep) = episode();
    let mut prev = 0.0;
    for r in &ep.log {
        assert!(r.delta.abs() <= 20.0 + 1e-9);
        assert!((r.delta - prev).abs() <= 600.0 * cfg.dt + 1e-9);
        assert!(r.q_ref_raw.abs() <= cfg.higher.action_limit);
        assert!(r.delta_cmd.abs() <= cfg.lower.action_limit);
        prev = r.delta;
    }
}

#[test]
fn filtered_command_lags_the_raw_command() {
    let (_, ep) = episode();
    let raw: Vec<f64> = ep.log.iter().map(|r| r.q_ref_raw).collect();
    let filt: Vec<f64> = ep.log.iter().map(|r| r.q_ref_filtered).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mr, mf) = (mean(&raw), mean(&filt));
    let n = raw.len() as i64;
    let xcorr = |lag: i64| -> f64 {
        // filtered[k + lag] against raw[k]
        (0..n)
            .filter(|k| (0..n).contains(&(k + lag)))
            .map(|k| (raw[k as usize] - mr) * (filt[(k + lag) as usize] - mf))
            .sum()
    };
    let best = (-300..=300).max_by(|a, b| xcorr(*a).total_cmp(&xcorr(*b))).unwrap();
    assert!(best >= 0, "peak at lag {best}");
}

#[test]
fn model_error_stays_within_bound_over_trailing_window() {
    let (cfg, ep) = episode();
    assert!(ep.model_error_within(cfg.model_error_bound), "{:?}", ep.model_error);
    let start = cfg.duration - cfg.model_error_window;
    let worst = ep.log.iter().filter(|r| r.t >= start).map(|r| r.pred_err1.max(r.pred_err2)).fold(0.0, f64::max);
    assert_eq!(worst, ep.model_error.0.max(ep.model_error.1));
}

#[test]
fn replay_is_identical() {
    let cfg = EpisodeConfig { duration: 1.0, seed: 9, ..EpisodeConfig::default() };
    let a = run_episode(&cfg).unwrap();
    let b = run_episode(&cfg).unwrap();
    assert_eq!(a.log, b.log);
    let other = run_episode(&EpisodeConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.log, other.log);
}

#[test]
fn divergence_guard_returns_partial_log() {
    let cfg = EpisodeConfig { duration: 5.0, divergence_limit: 0.5, ..EpisodeConfig::default() };
    let ep = run_episode(&cfg).unwrap();
    match &ep.termination {
        Termination::Diverged { t, reason } => {
            assert!(*t < 5.0);
            assert!(reason.contains("alpha"), "{reason}");
        }
        other => panic!("expected divergence, got {other}"),
    }
    assert!(!ep.log.is_empty() && ep.log.len() < cfg.step_count().unwrap());
}

#[test]
fn comparison_against_itself_is_identical() {
    let base = EpisodeConfig { duration: 2.0, seed: 4, ..EpisodeConfig::default() };
    let windows = [Window::new(0.0, 1.0), Window::new(1.0, 2.0)];
    let report = run_comparison(&base, &[Variant::new("a", 0.0, 0.0), Variant::new("b", 0.0, 0.0)], &windows).unwrap();
    assert_eq!(report.results[0].metrics, report.results[1].metrics);
    assert_eq!(report.results[0].metrics.len(), 2);
}

#[test]
fn three_variants_give_three_columns() {
    let base = EpisodeConfig { duration: 1.0, ..EpisodeConfig::default() };
    let windows = [Window::new(0.0, 1.0)];
    let report = run_comparison(&base, &Variant::defaults(), &windows).unwrap();
    let table = comparison_table(&report);
    assert_eq!(table[0], ["window", "metric", "ihdp", "lambda1_500", "lambda1_500_lambda2_0.1"]);
    assert!(table.iter().all(|row| row.len() == 5));
    let dv1_rows: Vec<_> = table.iter().filter(|row| row[1] == "mean_dV1").collect();
    assert_eq!(dv1_rows.len(), 1);
}
