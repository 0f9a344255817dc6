//! Forward models, simulated tolerance-controlled evaluation and the work model.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::PriorBox;
use crate::error::{Error, Result};
use crate::rng::rng_from;

type ExactFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A forward model `y: Omega -> R^m` whose numerical evaluation at tolerance
/// `tau` costs `tau^(-work_exponent)`.
#[derive(Clone)]
pub struct ForwardModel {
    pub name: String,
    pub domain: PriorBox,
    pub outputs: usize,
    pub work_exponent: f64,
    exact: Arc<ExactFn>,
}

impl fmt::Debug for ForwardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForwardModel")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("outputs", &self.outputs)
            .field("work_exponent", &self.work_exponent)
            .finish()
    }
}

impl ForwardModel {
    pub fn new<F>(
        name: &str,
        domain: PriorBox,
        outputs: usize,
        work_exponent: f64,
        exact: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if !(work_exponent > 0.0) {
            return Err(Error::Config(format!(
                "work exponent must be positive, got {work_exponent}"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            domain,
            outputs,
            work_exponent,
            exact: Arc::new(exact),
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn exact(&self, p: &[f64]) -> Result<Vec<f64>> {
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain(p.to_vec()));
        }
        Ok((self.exact)(p))
    }

    pub fn work(&self, tau: f64) -> f64 {
        work_of_tolerance(tau, self.work_exponent)
    }

    pub fn tolerance(&self, work: f64) -> f64 {
        tolerance_of_work(work, self.work_exponent)
    }
}

/// `W(tau) = tau^(-l/r)`; an infinite tolerance costs nothing.
pub fn work_of_tolerance(tau: f64, l_over_r: f64) -> f64 {
    if tau.is_infinite() {
        0.0
    } else {
        tau.powf(-l_over_r)
    }
}

/// Inverse of [`work_of_tolerance`]; zero work means an infinite tolerance.
pub fn tolerance_of_work(work: f64, l_over_r: f64) -> f64 {
    if work <= 0.0 {
        f64::INFINITY
    } else {
        work.powf(-1.0 / l_over_r)
    }
}

/// `d tau / d W` evaluated at work `w`.
pub fn tolerance_work_derivative(work: f64, l_over_r: f64) -> f64 {
    let e = 1.0 / l_over_r;
    -e * work.powf(-e - 1.0)
}

/// `exact(p) + tau * xi` with `xi ~ N(0, I)`.
pub fn evaluate_noisy(fm: &ForwardModel, p: &[f64], tau: f64, seed: u64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!(
            "evaluation tolerance must be positive, got {tau}"
        )));
    }
    let exact = fm.exact(p)?;
    let mut rng = rng_from(seed);
    Ok(exact
        .into_iter()
        .map(|y| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            y + tau * xi
        })
        .collect())
}

/// Re-evaluates at a decreased tolerance. The previous value is discarded;
/// the new draw is independent of it.
pub fn refine_evaluation(
    fm: &ForwardModel,
    p: &[f64],
    tau_old: f64,
    tau_new: f64,
    _value_old: Option<&[f64]>,
    seed: u64,
) -> Result<Vec<f64>> {
    if tau_new > tau_old {
        return Err(Error::ToleranceIncrease {
            old: tau_old,
            new: tau_new,
        });
    }
    evaluate_noisy(fm, p, tau_new, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub point: Vec<f64>,
    #[serde(with = "crate::serde_inf")]
    pub old_tolerance: f64,
    pub new_tolerance: f64,
    pub charged_work: f64,
}

/// Record of every evaluation charged against the budget.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkLedger {
    pub entries: Vec<LedgerEntry>,
    pub total: f64,
}

impl WorkLedger {
    /// Charges `W(new) - W(old)`; a new point has `old = inf`.
    pub fn charge(&mut self, point: &[f64], old: f64, new: f64, l_over_r: f64) -> Result<f64> {
        if new > old {
            return Err(Error::ToleranceIncrease { old, new });
        }
        let charged = work_of_tolerance(new, l_over_r) - work_of_tolerance(old, l_over_r);
        self.entries.push(LedgerEntry {
            point: point.to_vec(),
            old_tolerance: old,
            new_tolerance: new,
            charged_work: charged,
        });
        self.total += charged;
        Ok(charged)
    }
}

pub fn analytic_1d(p: f64) -> [f64; 2] {
    let f = |i: f64| 0.5 * p + 0.5 * p * p * ((12.0 * p - i).sin() / 3.0).exp();
    [f(0.0), f(1.0)]
}

pub fn analytic_2d(p: [f64; 2]) -> [f64; 3] {
    let [p1, p2] = p;
    let f = |k: f64| {
        (10.0 * k).sin() * (p1 - p2) * ((8.0 * p2).sin() / 3.0).exp()
            + (10.0 * k).cos() * (p1 + p2) * ((8.0 * p1).sin() / 3.0).exp()
    };
    [f(0.0), f(2.0), f(3.0)]
}

/// Toy model `y(p) = p^2 sin(p)` on `[0, 1]` used by the likelihood demo.
pub fn demo_model(p: f64) -> f64 {
    p * p * p.sin()
}

pub const MODEL_KEYS: [&str; 3] = ["analytic1d", "analytic2d", "demo1d"];

/// Looks up a registered model by name.
pub fn registry(name: &str, work_exponent: f64) -> Result<ForwardModel> {
    match name {
        "analytic1d" => ForwardModel::new(
            name,
            PriorBox::new(vec![0.0], vec![1.0])?,
            2,
            work_exponent,
            |p| analytic_1d(p[0]).to_vec(),
        ),
        "analytic2d" => ForwardModel::new(
            name,
            PriorBox::new(vec![-0.5, -0.5], vec![0.5, 0.5])?,
            3,
            work_exponent,
            |p| analytic_2d([p[0], p[1]]).to_vec(),
        ),
        "demo1d" => ForwardModel::new(
            name,
            PriorBox::new(vec![0.0], vec![1.0])?,
            1,
            work_exponent,
            |p| vec![demo_model(p[0])],
        ),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}
