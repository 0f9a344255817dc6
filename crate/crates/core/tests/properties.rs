use adaptive_gpr::bayes::PriorBox;
use adaptive_gpr::config::ExperimentConfig;
use adaptive_gpr::doe::simplex_project;
use adaptive_gpr::gp::{GpModel, KernelParams, TrainingDesign};
use adaptive_gpr::lhs::latin_hypercube;
use adaptive_gpr::models::{tolerance_of_work, work_of_tolerance};
use adaptive_gpr::sampler::SampleChain;
use proptest::prelude::*;

fn design_strategy() -> impl Strategy<Value = (Vec<(f64, f64, f64)>, f64, f64)> {
    (
        prop::collection::vec((0.0..1.0f64, -3.0..-0.5f64, -1.0..1.0f64), 1..8),
        0.03..0.15f64,
        0.1..2.0f64,
    )
}

fn build(entries: &[(f64, f64, f64)], shrink: Option<usize>) -> TrainingDesign {
    let mut d = TrainingDesign::new();
    for (i, (p, lt, y)) in entries.iter().enumerate() {
        let mut tau = 10f64.powf(*lt);
        if shrink == Some(i) {
            tau *= 0.5;
        }
        d.push(vec![*p], tau, vec![*y], 0.0).unwrap();
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_feasible_and_idempotent(
        w in prop::collection::vec(-5.0..10.0f64, 1..6),
        cap in 0.0..8.0f64,
    ) {
        let lower: Vec<f64> = w.iter().enumerate().map(|(i, _)| i as f64 * 0.5).collect();
        let x = simplex_project(&w, &lower, cap);
        let spent: f64 = x.iter().zip(&lower).map(|(a, l)| a - l).sum();
        prop_assert!(spent <= cap + 1e-9);
        prop_assert!(x.iter().zip(&lower).all(|(a, l)| *a >= *l));
        let again = simplex_project(&x, &lower, cap);
        for (a, b) in x.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_is_bounded_by_prior((entries, ls, s) in design_strategy(), q in 0.0..1.0f64) {
        let params = KernelParams::new(ls, vec![s]).unwrap();
        let model = GpModel::fit(&build(&entries, None), &params, &[0.0]).unwrap();
        let v = model.predict(&[q]).variance[0];
        prop_assert!(v >= 0.0);
        prop_assert!(v <= s * (1.0 + 1e-12));
    }

    #[test]
    fn refining_a_tolerance_never_increases_variance(
        (entries, ls, s) in design_strategy(),
        which in 0usize..8,
        q in 0.0..1.0f64,
    ) {
        let which = which % entries.len();
        let params = KernelParams::new(ls, vec![s]).unwrap();
        let coarse = build(&entries, None);
        let fine = build(&entries, Some(which));
        prop_assert!(fine.refines(&coarse));
        let vc = GpModel::fit(&coarse, &params, &[0.0]).unwrap().predict(&[q]).variance[0];
        let vf = GpModel::fit(&fine, &params, &[0.0]).unwrap().predict(&[q]).variance[0];
        prop_assert!(vf <= vc + 1e-12 * s);
    }

    #[test]
    fn work_model_round_trip(tau in 1e-4..10.0f64, l_over_r in 0.5..3.0f64) {
        let w = work_of_tolerance(tau, l_over_r);
        prop_assert!((tolerance_of_work(w, l_over_r) - tau).abs() <= 1e-12 * tau);
    }

    #[test]
    fn latin_hypercube_is_stratified(n in 1usize..40, seed in any::<u64>()) {
        let dom = PriorBox::new(vec![-0.5, 0.0], vec![0.5, 2.0]).unwrap();
        let pts = latin_hypercube(n, &dom, seed);
        prop_assert_eq!(pts.len(), n);
        for k in 0..2 {
            let width = dom.upper[k] - dom.lower[k];
            let mut strata: Vec<usize> = pts
                .iter()
                .map(|p| (((p[k] - dom.lower[k]) / width * n as f64).floor() as usize).min(n - 1))
                .collect();
            strata.sort_unstable();
            prop_assert_eq!(strata, (0..n).collect::<Vec<_>>());
        }
    }
}

#[test]
fn preset_schedules_are_consistent() {
    for cfg in [
        ExperimentConfig::analytic_1d(),
        ExperimentConfig::analytic_2d(),
        ExperimentConfig::analytic_2d_smoke(),
    ] {
        cfg.validate().unwrap();
        let s = &cfg.schedule;
        assert_eq!(s.removals.count(1), 0);
        for j in 1..=s.max_iterations {
            assert!(s.removals.count(j) < s.samples.count(j));
            assert!(cfg.iteration_budget(j) > 0.0);
        }
    }
}

#[test]
fn chain_csv_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.csv");
    let chain = SampleChain {
        samples: vec![vec![0.1, -0.2], vec![0.30000000000000004, 1e-17]],
        source_iteration: vec![1, 2],
        rng_seed: 0,
        proposal_scale: None,
    };
    chain
        .write_csv(std::fs::File::create(&path).unwrap())
        .unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("iteration_tag,p_1,p_2\n"));
    let back = SampleChain::read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.samples, chain.samples);
    assert_eq!(back.source_iteration, chain.source_iteration);
}
