//! Hyperparameter calibration by marginal-likelihood maximisation.
//!
//! Adam ascent on `(log l, log s_1, ..., log s_m)` with the length scale
//! projected into `[MIN_LENGTH_SCALE, 0.15]`. The best iterate seen is
//! returned, so the result never scores worse than the initial guess.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::gp::{correlation_matrix, sq_dist, KernelParams, TrainingDesign, JITTER};

pub const MIN_LENGTH_SCALE: f64 = 1e-3;
const LOG_SCALE_BOUND: f64 = 25.0;

#[derive(Debug, Clone)]
pub struct AdamSettings {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Additional length scales tried as starting points besides `init`.
    pub length_scale_starts: Vec<f64>,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            iterations: 200,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            length_scale_starts: vec![0.03, 0.08, 0.15],
        }
    }
}

#[derive(Debug, Clone)]
pub struct HyperFit {
    pub params: KernelParams,
    pub log_evidence: f64,
    pub initial_log_evidence: f64,
    /// Set when the objective was non-finite at the initial guess.
    pub diverged: bool,
}

struct Data {
    points: Vec<Vec<f64>>,
    noise_var: Vec<f64>,
    /// Residuals `y - mu0` per component.
    resid: Vec<DVector<f64>>,
    sqd: DMatrix<f64>,
}

impl Data {
    fn new(design: &TrainingDesign, prior_mean: &[f64]) -> Self {
        let active: Vec<_> = design.active().collect();
        let points: Vec<Vec<f64>> = active.iter().map(|e| e.point.clone()).collect();
        let noise_var = active.iter().map(|e| e.tolerance * e.tolerance).collect();
        let s = points.len();
        let resid = (0..prior_mean.len())
            .map(|i| {
                DVector::from_iterator(
                    s,
                    active
                        .iter()
                        .map(|e| e.value.as_ref().unwrap()[i] - prior_mean[i]),
                )
            })
            .collect();
        let sqd = DMatrix::from_fn(s, s, |a, b| sq_dist(&points[a], &points[b]));
        Self {
            points,
            noise_var,
            resid,
            sqd,
        }
    }

    /// Log evidence and its gradient in log-parameters.
    fn evaluate(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let ls = theta[0].exp();
        let s = self.points.len();
        let corr = correlation_matrix(ls, &self.points);
        let mut grad = vec![0.0; theta.len()];
        let mut total = 0.0;
        for (i, resid) in self.resid.iter().enumerate() {
            let scale = theta[i + 1].exp();
            let mut c = &corr * scale;
            for j in 0..s {
                c[(j, j)] += self.noise_var[j] + JITTER * scale;
            }
            let chol = c.cholesky()?;
            let alpha = chol.solve(resid);
            let logdet: f64 = 2.0
                * chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|d| d.ln())
                    .sum::<f64>();
            total += -0.5 * resid.dot(&alpha)
                - 0.5 * logdet
                - 0.5 * s as f64 * (2.0 * std::f64::consts::PI).ln();
            let cinv = chol.inverse();
            for a in 0..s {
                for b in 0..s {
                    let w = alpha[a] * alpha[b] - cinv[(a, b)];
                    let k = scale * corr[(a, b)];
                    grad[0] += 0.5 * w * k * self.sqd[(a, b)] / (ls * ls);
                    grad[i + 1] += 0.5 * w * k;
                }
            }
        }
        total.is_finite().then_some((total, grad))
    }
}

fn project(theta: &mut [f64]) {
    theta[0] = theta[0].clamp(MIN_LENGTH_SCALE.ln(), KernelParams::MAX_LENGTH_SCALE.ln());
    for t in &mut theta[1..] {
        *t = t.clamp(-LOG_SCALE_BOUND, LOG_SCALE_BOUND);
    }
}

fn to_params(theta: &[f64]) -> KernelParams {
    KernelParams {
        length_scale: theta[0].exp().min(KernelParams::MAX_LENGTH_SCALE),
        output_scales: theta[1..].iter().map(|t| t.exp()).collect(),
    }
}

fn adam(data: &Data, start: Vec<f64>, settings: &AdamSettings) -> Option<(Vec<f64>, f64)> {
    let mut theta = start;
    project(&mut theta);
    let (mut best_val, mut grad) = data.evaluate(&theta)?;
    let mut best = theta.clone();
    let n = theta.len();
    let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
    for t in 1..=settings.iterations {
        for k in 0..n {
            m1[k] = settings.beta1 * m1[k] + (1.0 - settings.beta1) * grad[k];
            m2[k] = settings.beta2 * m2[k] + (1.0 - settings.beta2) * grad[k] * grad[k];
            let mh = m1[k] / (1.0 - settings.beta1.powi(t as i32));
            let vh = m2[k] / (1.0 - settings.beta2.powi(t as i32));
            theta[k] += settings.learning_rate * mh / (vh.sqrt() + 1e-8);
        }
        project(&mut theta);
        match data.evaluate(&theta) {
            Some((val, g)) => {
                if val > best_val {
                    best_val = val;
                    best.clone_from(&theta);
                }
                grad = g;
            }
            None => break,
        }
    }
    Some((best, best_val))
}

/// Maximises the GP log evidence of the active design entries.
pub fn optimize_hyperparameters(
    design: &TrainingDesign,
    init: &KernelParams,
    prior_mean: &[f64],
    settings: &AdamSettings,
) -> Result<HyperFit> {
    let data = Data::new(design, prior_mean);
    let mut theta0: Vec<f64> = std::iter::once(init.length_scale.ln())
        .chain(init.output_scales.iter().map(|s| s.ln()))
        .collect();
    project(&mut theta0);
    let init_params = to_params(&theta0);

    let Some((init_val, _)) = data.evaluate(&theta0) else {
        log::warn!("hyperparameter objective is non-finite at the initial guess");
        return Ok(HyperFit {
            params: init.clone(),
            log_evidence: f64::NEG_INFINITY,
            initial_log_evidence: f64::NEG_INFINITY,
            diverged: true,
        });
    };
    if data.points.is_empty() {
        return Ok(HyperFit {
            params: init_params,
            log_evidence: init_val,
            initial_log_evidence: init_val,
            diverged: false,
        });
    }

    let data_scales: Vec<f64> = data
        .resid
        .iter()
        .map(|r| (r.norm_squared() / r.len() as f64).max(1e-8).ln())
        .collect();
    let mut starts = vec![theta0.clone()];
    for &ls in &settings.length_scale_starts {
        starts.push(
            std::iter::once(ls.ln())
                .chain(data_scales.iter().copied())
                .collect(),
        );
    }

    let (mut best, mut best_val) = (theta0, init_val);
    for start in starts {
        if let Some((theta, val)) = adam(&data, start, settings) {
            if val > best_val {
                best = theta;
                best_val = val;
            }
        }
    }
    Ok(HyperFit {
        params: to_params(&best),
        log_evidence: best_val,
        initial_log_evidence: init_val,
        diverged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::GpModel;

    fn design(xs: &[f64], tau: f64) -> TrainingDesign {
        let mut d = TrainingDesign::new();
        for &x in xs {
            d.push(vec![x], tau, vec![(8.0 * x).sin(), x * x], 0.0)
                .unwrap();
        }
        d
    }

    #[test]
    fn evidence_matches_fitted_model() {
        let d = design(&[0.1, 0.3, 0.45, 0.8], 0.05);
        let params = KernelParams::new(0.12, vec![0.7, 0.2]).unwrap();
        let data = Data::new(&d, &[0.0, 0.0]);
        let theta = [0.12f64.ln(), 0.7f64.ln(), 0.2f64.ln()];
        let (val, _) = data.evaluate(&theta).unwrap();
        let model = GpModel::fit(&d, &params, &[0.0, 0.0]).unwrap();
        assert!((val - model.log_evidence()).abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = design(&[0.05, 0.2, 0.33, 0.6, 0.9], 0.03);
        let data = Data::new(&d, &[0.1, 0.0]);
        let theta = vec![0.1f64.ln(), 0.5f64.ln(), 0.1f64.ln()];
        let (_, grad) = data.evaluate(&theta).unwrap();
        for k in 0..theta.len() {
            let h = 1e-6;
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            let fd = (data.evaluate(&tp).unwrap().0 - data.evaluate(&tm).unwrap().0) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() <= 1e-5 * (1.0 + fd.abs()),
                "k={k} fd={fd} g={}",
                grad[k]
            );
        }
    }

    #[test]
    fn monotone_improvement_and_box() {
        let d = design(&[0.0, 0.1, 0.2, 0.5, 0.55, 0.7, 0.95], 0.01);
        let init = KernelParams::new(0.02, vec![3.0, 3.0]).unwrap();
        let fit =
            optimize_hyperparameters(&d, &init, &[0.0, 0.0], &AdamSettings::default()).unwrap();
        assert!(fit.log_evidence >= fit.initial_log_evidence);
        assert!(fit.params.length_scale <= KernelParams::MAX_LENGTH_SCALE);
        assert!(fit.params.length_scale > 0.0);
    }

    #[test]
    fn single_point_design_is_no_worse() {
        let d = design(&[0.4], 0.1);
        let init = KernelParams::new(0.1, vec![0.5, 0.5]).unwrap();
        let fit =
            optimize_hyperparameters(&d, &init, &[0.0, 0.0], &AdamSettings::default()).unwrap();
        assert!(fit.log_evidence >= fit.initial_log_evidence);
    }
}
