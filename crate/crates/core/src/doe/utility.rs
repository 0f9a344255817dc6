use crate::bayes::MeasurementModel;
use crate::exec::Exec;
use crate::gp::{GpModel, PointCache};
use crate::models::{tolerance_work_derivative, work_of_tolerance};

use super::{local_error_variance_gradient, ErrorVariant};

/// Precomputed state for evaluating `dE/dW` at many candidate locations.
///
/// A candidate at `p'` is linearised at `tau' = sqrt(mean_k Gamma_k(p'))`:
/// the model is augmented with a hypothetical observation at `p'` with that
/// tolerance, and the chain `de/dGamma * dGamma/dtau * dtau/dW` is evaluated
/// at the augmented state.
pub struct UtilityContext<'a> {
    model: &'a GpModel,
    meas: &'a MeasurementModel,
    variant: ErrorVariant,
    work_exponent: f64,
    caches: Vec<PointCache>,
}

impl<'a> UtilityContext<'a> {
    pub fn new(
        model: &'a GpModel,
        meas: &'a MeasurementModel,
        integration_points: &[Vec<f64>],
        variant: ErrorVariant,
        work_exponent: f64,
        exec: Exec,
    ) -> Self {
        let caches = exec.map(integration_points, |p| model.cache_point(p));
        Self {
            model,
            meas,
            variant,
            work_exponent,
            caches,
        }
    }

    pub fn integration_points(&self) -> impl Iterator<Item = &[f64]> {
        self.caches.iter().map(|c| c.point.as_slice())
    }

    /// Linearisation tolerance at a candidate; zero where the GP interpolates exactly.
    pub fn linearization_tolerance(cand: &PointCache) -> f64 {
        let m = cand.variance.len() as f64;
        (cand.variance.iter().sum::<f64>() / m).sqrt()
    }

    /// MC estimate of `dE/dW(p_cand)`; non-positive, more negative is better.
    pub fn utility(&self, p_cand: &[f64]) -> f64 {
        let cand = self.model.cache_point(p_cand);
        let tau = Self::linearization_tolerance(&cand);
        if !(tau > 0.0) || self.caches.is_empty() {
            return 0.0;
        }
        let t2 = tau * tau;
        let dtau_dw = tolerance_work_derivative(
            work_of_tolerance(tau, self.work_exponent),
            self.work_exponent,
        );
        let mut sum = 0.0;
        for at in &self.caches {
            let cov = self.model.posterior_covariance(at, &cand);
            let aug_var: Vec<f64> = at
                .variance
                .iter()
                .zip(&cov)
                .zip(&cand.variance)
                .map(|((g, c), v)| (g - c * c / (v + t2)).max(0.0))
                .collect();
            let de = local_error_variance_gradient(&at.mean, &aug_var, self.meas, self.variant);
            for k in 0..de.len() {
                let denom = cand.variance[k] + t2;
                let dgamma_dtau = 2.0 * tau * cov[k] * cov[k] / (denom * denom);
                sum += de[k] * dgamma_dtau;
            }
        }
        sum / self.caches.len() as f64 * dtau_dw
    }
}
