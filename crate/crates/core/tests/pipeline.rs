use adaptive_gpr::bench::{
    read_kl_csv, read_snapshots, run_benchmark, true_posterior_kl, write_report, KlMethod,
};
use adaptive_gpr::config::ExperimentConfig;
use adaptive_gpr::driver::{run, StrategyKind};
use adaptive_gpr::Exec;

fn short_1d() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::analytic_1d();
    cfg.problem.budget = 135.0;
    cfg.schedule.max_iterations = 3;
    cfg
}

#[test]
fn one_dimensional_run_budget_accounting() {
    let cfg = ExperimentConfig::analytic_1d();
    let out = run(&cfg, StrategyKind::AdaptiveFull, 4, Exec::Parallel).unwrap();
    assert_eq!(out.iterations, 12);
    let last = out.snapshots.last().unwrap();
    assert!((last.budget_counter - 495.0).abs() < 1e-9);
    assert!(last.work_spent <= cfg.problem.budget + cfg.iteration_budget(12) + 1e-9);
    assert!((out.ledger.total - out.design.total_work()).abs() < 1e-9);
    for w in out.snapshots.windows(2) {
        assert!(w[1].design(1.0).refines(&w[0].design(1.0)));
    }
    let s = &cfg.schedule;
    let mut len = 0;
    for j in 1..=12 {
        len = len - s.removals.count(j).min(len) + s.samples.count(j);
    }
    assert_eq!(out.chain.len(), len + s.samples.count(13));
}

#[test]
fn stopping_by_budget() {
    let mut cfg = short_1d();
    cfg.schedule.max_iterations = 12;
    cfg.problem.budget = 100.0;
    let out = run(&cfg, StrategyKind::AdaptivePositionOnly, 2, Exec::Parallel).unwrap();
    let w_d = out.snapshots.last().unwrap().budget_counter;
    assert!(w_d >= cfg.problem.budget);
    assert!(w_d <= cfg.problem.budget + 40.0);
    assert_eq!(out.iterations, 3);
    assert!(out
        .design
        .entries
        .iter()
        .skip(3)
        .all(|e| (e.tolerance - 0.05).abs() < 1e-15));
}

#[test]
fn snapshots_reload_and_reproduce_predictions() {
    let cfg = short_1d();
    let dir = tempfile::tempdir().unwrap();
    let report = run_benchmark(
        &cfg,
        &[StrategyKind::AdaptiveFull],
        &[3],
        KlMethod::Grid,
        Exec::Parallel,
    )
    .unwrap();
    write_report(&report, dir.path()).unwrap();
    let snaps = read_snapshots(&dir.path().join("designs/adaptive_full_seed3.json")).unwrap();
    assert_eq!(snaps, report.runs[0].snapshots);
    for (a, b) in snaps.iter().zip(&report.runs[0].snapshots) {
        let (ma, mb) = (a.model(1.0).unwrap(), b.model(1.0).unwrap());
        for q in [0.05, 0.5, 0.61, 0.95] {
            let (pa, pb) = (ma.predict(&[q]), mb.predict(&[q]));
            for k in 0..2 {
                assert!((pa.mean[k] - pb.mean[k]).abs() <= 1e-10);
                assert!((pa.variance[k] - pb.variance[k]).abs() <= 1e-10);
            }
        }
    }
    let curve = read_kl_csv(&dir.path().join("klcurve.csv")).unwrap();
    assert_eq!(curve, report.curve);
    assert!(curve.windows(2).all(|w| w[1].work >= w[0].work));
    assert!(curve.iter().all(|r| r.kl >= -1e-6));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["strategies"][0]["strategy"], "adaptive_full");
}

#[test]
fn grid_refinement_changes_kl_by_under_one_percent() {
    let cfg = short_1d();
    let out = run(&cfg, StrategyKind::AdaptiveFull, 1, Exec::Parallel).unwrap();
    let snap = out.snapshots.last().unwrap();
    let coarse = true_posterior_kl(snap, &cfg, KlMethod::Grid, Exec::Parallel).unwrap();
    let mut fine_cfg = cfg.clone();
    fine_cfg.output.kl_grid = Some(4000);
    let fine = true_posterior_kl(snap, &fine_cfg, KlMethod::Grid, Exec::Parallel).unwrap();
    assert!(
        (coarse - fine).abs() <= 0.01 * fine.abs(),
        "{coarse} vs {fine}"
    );
}

#[test]
fn unknown_model_is_rejected() {
    let mut bad = short_1d();
    bad.problem.model = "nope".into();
    assert!(run_benchmark(
        &bad,
        &[StrategyKind::Lhs],
        &[1],
        KlMethod::Grid,
        Exec::Parallel
    )
    .is_err());
}
