//! Measurement model, likelihoods and unnormalised log-posteriors.
//!
//! All covariances are diagonal, so log-determinants and quadratic forms
//! reduce to scalar sums. Normalising constants of the posterior are never
//! computed here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::models::ForwardModel;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `y_meas = y(p) + eta`, `eta ~ N(0, diag(sigma_l))`. `sigma_l` holds variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub y_meas: Vec<f64>,
    pub sigma_l: Vec<f64>,
}

impl MeasurementModel {
    pub fn new(y_meas: Vec<f64>, sigma_l: Vec<f64>) -> Result<Self> {
        if y_meas.len() != sigma_l.len() {
            return Err(Error::Dimension {
                expected: sigma_l.len(),
                got: y_meas.len(),
                context: "measurement vector",
            });
        }
        if sigma_l.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!(
                "noise variances must be positive: {sigma_l:?}"
            )));
        }
        Ok(Self { y_meas, sigma_l })
    }

    pub fn outputs(&self) -> usize {
        self.y_meas.len()
    }
}

/// Axis-aligned box carrying a uniform prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PriorBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config(
                "prior box bounds must have equal, nonzero length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Config(format!(
                "prior box needs lower < upper: {lower:?} {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| x >= l && x <= u)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for (x, (l, u)) in p.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*l, *u);
        }
    }

    pub fn log_density(&self, p: &[f64]) -> f64 {
        if self.contains(p) {
            -self.volume().ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Log of the Gaussian likelihood with covariance `diag(sigma_l + extra)`.
fn log_gaussian(mean: &[f64], extra_var: Option<&[f64]>, meas: &MeasurementModel) -> f64 {
    let m = meas.outputs();
    let mut acc = -0.5 * m as f64 * LN_2PI;
    for k in 0..m {
        let var = meas.sigma_l[k] + extra_var.map_or(0.0, |v| v[k]);
        let r = meas.y_meas[k] - mean[k];
        acc -= 0.5 * (var.ln() + r * r / var);
    }
    acc
}

/// Likelihood with the surrogate mean substituted for the forward model.
pub fn log_plugin_likelihood(mean: &[f64], meas: &MeasurementModel) -> f64 {
    log_gaussian(mean, None, meas)
}

/// Likelihood marginalised over GP realisations: covariance `sigma_l + Gamma(p)`.
pub fn log_marginal_likelihood(mean: &[f64], variance: &[f64], meas: &MeasurementModel) -> f64 {
    log_gaussian(mean, Some(variance), meas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodKind {
    Plugin,
    #[default]
    Marginal,
    True,
}

/// Where the likelihood gets its forward-model information from.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Surrogate(&'a GpModel),
    Exact(&'a ForwardModel),
}

/// Unnormalised log-posterior; `-inf` outside the prior box.
pub fn log_posterior(
    p: &[f64],
    source: Source<'_>,
    meas: &MeasurementModel,
    prior: &PriorBox,
    kind: LikelihoodKind,
) -> Result<f64> {
    let lp = prior.log_density(p);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    let ll = match (source, kind) {
        (Source::Exact(fm), _) => log_plugin_likelihood(&fm.exact(p)?, meas),
        (Source::Surrogate(gp), LikelihoodKind::Plugin) => {
            log_plugin_likelihood(&gp.predict(p).mean, meas)
        }
        (Source::Surrogate(gp), LikelihoodKind::Marginal) => {
            let pred = gp.predict(p);
            log_marginal_likelihood(&pred.mean, &pred.variance, meas)
        }
        (Source::Surrogate(_), LikelihoodKind::True) => {
            return Err(Error::Config(
                "the true likelihood needs the exact forward model".into(),
            ))
        }
    };
    Ok(lp + ll)
}
