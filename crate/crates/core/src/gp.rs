//! Gaussian process regression with per-point noise levels.
//!
//! Each output component is an independent GP sharing one Gaussian
//! correlation function (separable kernel with diagonal output structure).
//! Component `i` has prior covariance `output_scales[i] * r(p, q)` and the
//! training point `j` carries observation noise with standard deviation
//! `tau_j`, so the training covariance per component is
//! `output_scales[i] * R + diag(tau_j^2)`. This is the Cholesky-friendly
//! equivalent of `(K^-1 + T^-2)^-1`, which does not exist as `tau -> 0`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative diagonal jitter added to every training covariance.
pub const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub length_scale: f64,
    pub output_scales: Vec<f64>,
}

impl KernelParams {
    pub const MAX_LENGTH_SCALE: f64 = 0.15;

    pub fn new(length_scale: f64, output_scales: Vec<f64>) -> Result<Self> {
        if !(length_scale > 0.0 && length_scale <= Self::MAX_LENGTH_SCALE) {
            return Err(Error::Config(format!(
                "length scale {length_scale} outside (0, {}]",
                Self::MAX_LENGTH_SCALE
            )));
        }
        if output_scales.is_empty() || output_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!(
                "output scales must be positive and finite: {output_scales:?}"
            )));
        }
        Ok(Self {
            length_scale,
            output_scales,
        })
    }

    pub fn outputs(&self) -> usize {
        self.output_scales.len()
    }
}

pub(crate) fn sq_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Shared Gaussian correlation `exp(-|p-q|^2 / (2 l^2))`.
pub fn correlation(length_scale: f64, p: &[f64], q: &[f64]) -> f64 {
    (-sq_dist(p, q) / (2.0 * length_scale * length_scale)).exp()
}

/// Diagonal block of the separable kernel.
pub fn kernel_eval(params: &KernelParams, p: &[f64], q: &[f64]) -> Vec<f64> {
    let r = correlation(params.length_scale, p, q);
    params.output_scales.iter().map(|s| s * r).collect()
}

/// One training record. `value` is present iff `tolerance` is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEntry {
    pub point: Vec<f64>,
    #[serde(with = "crate::serde_inf")]
    pub tolerance: f64,
    pub value: Option<Vec<f64>>,
    pub work: f64,
}

impl DesignEntry {
    pub fn is_active(&self) -> bool {
        self.tolerance.is_finite() && self.value.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingDesign {
    pub entries: Vec<DesignEntry>,
}

impl TrainingDesign {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(
        &mut self,
        point: Vec<f64>,
        tolerance: f64,
        value: Vec<f64>,
        work: f64,
    ) -> Result<()> {
        if !(tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {tolerance}"
            )));
        }
        if let Some(first) = self.entries.first() {
            if first.point.len() != point.len() {
                return Err(Error::Dimension {
                    expected: first.point.len(),
                    got: point.len(),
                    context: "design point",
                });
            }
        }
        let value = tolerance.is_finite().then_some(value);
        self.entries.push(DesignEntry {
            point,
            tolerance,
            value,
            work,
        });
        Ok(())
    }

    pub fn active(&self) -> impl Iterator<Item = &DesignEntry> {
        self.entries.iter().filter(|e| e.is_active())
    }

    pub fn active_len(&self) -> usize {
        self.active().count()
    }

    pub fn total_work(&self) -> f64 {
        self.entries.iter().map(|e| e.work).sum()
    }

    /// `self <= coarser`: `self` keeps every point of `coarser`, in order,
    /// with pointwise lesser or equal tolerances.
    pub fn refines(&self, coarser: &TrainingDesign) -> bool {
        coarser.len() <= self.len()
            && coarser
                .entries
                .iter()
                .zip(&self.entries)
                .all(|(c, f)| c.point == f.point && f.tolerance <= c.tolerance)
    }
}

/// Predictive mean and diagonal variance at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Prediction plus the whitened cross-covariance `L_i^-1 k_i(p)` per
/// component, which lets posterior covariances between cached points be
/// formed with a single dot product.
#[derive(Debug, Clone)]
pub struct PointCache {
    pub point: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    whitened: Vec<DVector<f64>>,
}

/// Fitted surrogate. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    design: TrainingDesign,
    params: KernelParams,
    prior_mean: Vec<f64>,
    points: Vec<Vec<f64>>,
    noise_var: Vec<f64>,
    chol: Vec<Cholesky<f64, Dyn>>,
    alpha: Vec<DVector<f64>>,
}

impl GpModel {
    /// Fits the GP on every active entry of `design`.
    pub fn fit(design: &TrainingDesign, params: &KernelParams, prior_mean: &[f64]) -> Result<Self> {
        let m = params.outputs();
        if prior_mean.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: prior_mean.len(),
                context: "prior mean",
            });
        }
        let active: Vec<&DesignEntry> = design.active().collect();
        for e in &active {
            let v = e.value.as_ref().expect("active entry has a value");
            if v.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    got: v.len(),
                    context: "training value",
                });
            }
        }
        let points: Vec<Vec<f64>> = active.iter().map(|e| e.point.clone()).collect();
        let noise_var: Vec<f64> = active.iter().map(|e| e.tolerance * e.tolerance).collect();
        let s = points.len();
        let corr = correlation_matrix(params.length_scale, &points);

        let mut chol = Vec::with_capacity(m);
        let mut alpha = Vec::with_capacity(m);
        for (i, &scale) in params.output_scales.iter().enumerate() {
            let mut c = &corr * scale;
            for j in 0..s {
                c[(j, j)] += noise_var[j] + JITTER * scale;
            }
            let factor = Cholesky::new(c).ok_or(Error::Factorization {
                component: i,
                points: s,
            })?;
            let resid = DVector::from_iterator(
                s,
                active
                    .iter()
                    .map(|e| e.value.as_ref().unwrap()[i] - prior_mean[i]),
            );
            alpha.push(factor.solve(&resid));
            chol.push(factor);
        }

        Ok(Self {
            design: design.clone(),
            params: params.clone(),
            prior_mean: prior_mean.to_vec(),
            points,
            noise_var,
            chol,
            alpha,
        })
    }

    pub fn design(&self) -> &TrainingDesign {
        &self.design
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn prior_mean(&self) -> &[f64] {
        &self.prior_mean
    }

    pub fn outputs(&self) -> usize {
        self.params.outputs()
    }

    /// Number of training points entering the factorization.
    pub fn active_len(&self) -> usize {
        self.points.len()
    }

    pub fn active_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Noise standard deviations of the active training points.
    pub fn active_tolerances(&self) -> Vec<f64> {
        self.noise_var.iter().map(|v| v.sqrt()).collect()
    }

    fn cross_correlation(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|q| correlation(self.params.length_scale, p, q)),
        )
    }

    pub fn predict(&self, p: &[f64]) -> Prediction {
        let c = self.cache_point(p);
        Prediction {
            mean: c.mean,
            variance: c.variance,
        }
    }

    pub fn cache_point(&self, p: &[f64]) -> PointCache {
        let m = self.outputs();
        let r = self.cross_correlation(p);
        let mut mean = Vec::with_capacity(m);
        let mut variance = Vec::with_capacity(m);
        let mut whitened = Vec::with_capacity(m);
        for i in 0..m {
            let scale = self.params.output_scales[i];
            let k = &r * scale;
            mean.push(self.prior_mean[i] + k.dot(&self.alpha[i]));
            let v = if self.points.is_empty() {
                k
            } else {
                self.chol[i]
                    .l_dirty()
                    .solve_lower_triangular(&k)
                    .expect("cholesky factor has a nonzero diagonal")
            };
            variance.push((scale - v.norm_squared()).max(0.0));
            whitened.push(v);
        }
        PointCache {
            point: p.to_vec(),
            mean,
            variance,
            whitened,
        }
    }

    /// Posterior covariance between two cached points, per component.
    pub fn posterior_covariance(&self, a: &PointCache, b: &PointCache) -> Vec<f64> {
        let r = correlation(self.params.length_scale, &a.point, &b.point);
        (0..self.outputs())
            .map(|i| self.params.output_scales[i] * r - a.whitened[i].dot(&b.whitened[i]))
            .collect()
    }

    /// `C_i^-1 k_i(p)` for every component.
    pub fn weights(&self, cache: &PointCache) -> Vec<DVector<f64>> {
        (0..self.outputs())
            .map(|i| {
                if self.points.is_empty() {
                    DVector::zeros(0)
                } else {
                    self.chol[i]
                        .l_dirty()
                        .ad_solve_lower_triangular(&cache.whitened[i])
                        .expect("cholesky factor has a nonzero diagonal")
                }
            })
            .collect()
    }

    /// Derivative of the predictive variance at the cached point with
    /// respect to each active training tolerance: `out[j][i] = dGamma_i/dtau_j`.
    pub fn variance_tolerance_gradient(&self, cache: &PointCache) -> Vec<Vec<f64>> {
        let w = self.weights(cache);
        let m = self.outputs();
        (0..self.points.len())
            .map(|j| {
                let tau = self.noise_var[j].sqrt();
                (0..m).map(|i| 2.0 * tau * w[i][j] * w[i][j]).collect()
            })
            .collect()
    }

    /// Log marginal likelihood of the training values, summed over components.
    pub fn log_evidence(&self) -> f64 {
        let s = self.points.len() as f64;
        let mut total = 0.0;
        for i in 0..self.outputs() {
            let resid = self.residuals(i);
            let logdet: f64 = self.chol[i]
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>()
                * 2.0;
            total += -0.5 * resid.dot(&self.alpha[i])
                - 0.5 * logdet
                - 0.5 * s * (2.0 * std::f64::consts::PI).ln();
        }
        total
    }

    fn residuals(&self, component: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.design
                .active()
                .map(|e| e.value.as_ref().unwrap()[component] - self.prior_mean[component]),
        )
    }
}

pub(crate) fn correlation_matrix(length_scale: f64, points: &[Vec<f64>]) -> DMatrix<f64> {
    let s = points.len();
    DMatrix::from_fn(s, s, |a, b| {
        correlation(length_scale, &points[a], &points[b])
    })
}

/// Derivative of the predictive variance at `p` with respect to the
/// tolerance of a hypothetical extra training point at `p_cand` whose
/// tolerance currently equals `tau_lin`.
///
/// With posterior covariance `c` between `p` and `p_cand` and posterior
/// variance `v` at `p_cand`, adding the point gives
/// `Gamma'(p) = Gamma(p) - c^2 / (v + tau^2)`, hence
/// `dGamma'/dtau = 2 tau c^2 / (v + tau^2)^2`.
pub fn variance_derivative(
    model: &GpModel,
    p: &[f64],
    p_cand: &[f64],
    tau_lin: f64,
) -> Result<Vec<f64>> {
    let a = model.cache_point(p);
    let b = model.cache_point(p_cand);
    variance_derivative_cached(model, &a, &b, tau_lin)
}

pub fn variance_derivative_cached(
    model: &GpModel,
    at: &PointCache,
    cand: &PointCache,
    tau_lin: f64,
) -> Result<Vec<f64>> {
    if !(tau_lin > 0.0 && tau_lin.is_finite()) {
        return Err(Error::Config(format!(
            "linearization tolerance must be positive, got {tau_lin}"
        )));
    }
    let cov = model.posterior_covariance(at, cand);
    let t2 = tau_lin * tau_lin;
    cov.iter()
        .zip(&cand.variance)
        .enumerate()
        .map(|(i, (c, v))| {
            let denom = v + t2;
            if !(denom > 0.0) {
                return Err(Error::Factorization {
                    component: i,
                    points: model.active_len() + 1,
                });
            }
            Ok(2.0 * tau_lin * c * c / (denom * denom))
        })
        .collect()
}
