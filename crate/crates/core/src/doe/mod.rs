//! Goal-oriented design of experiments.
//!
//! The local error `e(p)` approximately bounds the log-ratio of the true and
//! the surrogated likelihood at `p`; its posterior average `E` is the
//! training objective. Candidate points minimise the sensitivity `dE/dW`
//! of that objective to work spent at a new location, and evaluation
//! tolerances are then distributed over the design under the work budget.

mod candidates;
mod simplex;
mod tolerance;
mod utility;

pub use candidates::{compass_search, select_candidates, CompassSettings};
pub use simplex::simplex_project;
pub use tolerance::{
    optimize_tolerances, variance_only_gradient, variance_only_objective, ToleranceProblem,
    ToleranceResult, ToleranceSettings,
};
pub use utility::UtilityContext;

use serde::{Deserialize, Serialize};

use crate::bayes::MeasurementModel;
use crate::exec::Exec;
use crate::gp::GpModel;

/// Which trace term the local error uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorVariant {
    /// `-tr(S^-1 G (I - S^-1))`.
    #[default]
    Printed,
    /// `-tr(S^-1 G)`, the term produced by the trace-based bound on the norms.
    DerivationConsistent,
}

impl ErrorVariant {
    fn trace_weight(self, sigma: f64) -> f64 {
        match self {
            ErrorVariant::Printed => (1.0 - 1.0 / sigma) / sigma,
            ErrorVariant::DerivationConsistent => 1.0 / sigma,
        }
    }
}

/// Local error `e(p)` from the predictive mean and diagonal variance.
///
/// `0.5 * sum_k [ ln(1 + G_k/S_k) - w_k G_k + 2 |ybar_k - y_k| sqrt(G_k) / S_k ]`
/// with `w_k` the variant's trace weight.
pub fn local_error(
    mean: &[f64],
    variance: &[f64],
    meas: &MeasurementModel,
    variant: ErrorVariant,
) -> f64 {
    let mut acc = 0.0;
    for k in 0..meas.outputs() {
        let s = meas.sigma_l[k];
        let g = variance[k].max(0.0);
        let r = (mean[k] - meas.y_meas[k]).abs();
        acc += (g / s).ln_1p() - variant.trace_weight(s) * g + 2.0 * r * g.sqrt() / s;
    }
    0.5 * acc
}

/// `d e / d G_k`. The square-root term is dropped where `G_k = 0`.
pub fn local_error_variance_gradient(
    mean: &[f64],
    variance: &[f64],
    meas: &MeasurementModel,
    variant: ErrorVariant,
) -> Vec<f64> {
    (0..meas.outputs())
        .map(|k| {
            let s = meas.sigma_l[k];
            let g = variance[k].max(0.0);
            let r = (mean[k] - meas.y_meas[k]).abs();
            let sqrt_term = if g > 0.0 { r / (s * g.sqrt()) } else { 0.0 };
            0.5 * (1.0 / (s + g) - variant.trace_weight(s) + sqrt_term)
        })
        .collect()
}

/// Monte Carlo estimate of `E` over `points` using the model's predictions.
pub fn global_error(
    model: &GpModel,
    meas: &MeasurementModel,
    points: &[Vec<f64>],
    variant: ErrorVariant,
    exec: Exec,
) -> f64 {
    exec.mean(points, |p| {
        let pred = model.predict(p);
        local_error(&pred.mean, &pred.variance, meas, variant)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{KernelParams, TrainingDesign};

    fn unit() -> MeasurementModel {
        MeasurementModel::new(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn zero_variance_gives_zero() {
        let meas = MeasurementModel::new(vec![0.3, 2.0], vec![1e-4, 5.0]).unwrap();
        for v in [ErrorVariant::Printed, ErrorVariant::DerivationConsistent] {
            assert_eq!(local_error(&[10.0, -4.0], &[0.0, 0.0], &meas, v), 0.0);
        }
    }

    #[test]
    fn unit_noise_zero_residual() {
        let e = local_error(&[0.0], &[1.0], &unit(), ErrorVariant::Printed);
        assert!((e - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((e - 0.34657359027997264).abs() < 1e-15);
    }

    #[test]
    fn term_by_term_reference() {
        // sigma = 0.5, Gamma = 0.1, |r| = 0.2; reference from an mpmath evaluation.
        let meas = MeasurementModel::new(vec![0.0], vec![0.5]).unwrap();
        let e = local_error(&[0.2], &[0.1], &meas, ErrorVariant::Printed);
        let by_hand = 0.5 * (1.2f64.ln() + 0.2 + 2.0 * 0.2 * 2.0 * 0.1f64.sqrt());
        assert!((e - by_hand).abs() < 1e-15);
        assert!((e - 0.317_651_884_803_712_5).abs() < 1e-15);
        let c = local_error(&[0.2], &[0.1], &meas, ErrorVariant::DerivationConsistent);
        assert!((c - 0.5 * (1.2f64.ln() - 0.2 + 0.8 * 0.1f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn variance_gradient_matches_finite_differences() {
        let meas = MeasurementModel::new(vec![0.1, -0.3], vec![0.02, 0.7]).unwrap();
        let mean = [0.15, -0.1];
        let var = [0.004, 0.05];
        for v in [ErrorVariant::Printed, ErrorVariant::DerivationConsistent] {
            let g = local_error_variance_gradient(&mean, &var, &meas, v);
            for k in 0..2 {
                let h = 1e-7 * var[k];
                let mut up = var;
                up[k] += h;
                let mut dn = var;
                dn[k] -= h;
                let fd = (local_error(&mean, &up, &meas, v) - local_error(&mean, &dn, &meas, v))
                    / (2.0 * h);
                assert!(
                    (fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0),
                    "{v:?} k={k}"
                );
            }
        }
    }

    #[test]
    fn printed_variant_is_monotone_for_small_noise() {
        let mut state = 7u64;
        let mut uniform = move || {
            state = crate::rng::derive_seed(state, 1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let s = 1e-4 + uniform() * 0.9;
            let meas = MeasurementModel::new(vec![0.0], vec![s]).unwrap();
            let r = uniform() - 0.5;
            let g0 = uniform() * 0.5;
            let g1 = g0 + uniform() * 0.5;
            let e0 = local_error(&[r], &[g0], &meas, ErrorVariant::Printed);
            let e1 = local_error(&[r], &[g1], &meas, ErrorVariant::Printed);
            assert!(e1 >= e0 - 1e-15);
        }
    }

    #[test]
    fn global_error_examples() {
        let params = KernelParams::new(0.1, vec![0.5, 0.5]).unwrap();
        let mut d = TrainingDesign::new();
        d.push(vec![0.2], 0.05, vec![0.1, 0.3], 0.0).unwrap();
        d.push(vec![0.6], 0.02, vec![0.2, 0.1], 0.0).unwrap();
        let model = GpModel::fit(&d, &params, &[0.0, 0.0]).unwrap();
        let meas = MeasurementModel::new(vec![0.15, 0.2], vec![1e-3, 4e-3]).unwrap();
        let pts: Vec<Vec<f64>> = (0..37).map(|i| vec![i as f64 / 36.0]).collect();
        let single = global_error(
            &model,
            &meas,
            &pts[3..4],
            ErrorVariant::Printed,
            Exec::Sequential,
        );
        let pred = model.predict(&pts[3]);
        assert_eq!(
            single,
            local_error(&pred.mean, &pred.variance, &meas, ErrorVariant::Printed)
        );

        let mut loop_sum = 0.0;
        for p in &pts {
            let pr = model.predict(p);
            loop_sum += local_error(&pr.mean, &pr.variance, &meas, ErrorVariant::Printed);
        }
        let g = global_error(&model, &meas, &pts, ErrorVariant::Printed, Exec::Parallel);
        assert!((g - loop_sum / pts.len() as f64).abs() < 1e-12);
    }
}
