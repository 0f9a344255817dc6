use rand::Rng;
use rand_distr::Exp1;

use crate::bayes::MeasurementModel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gp::{GpModel, KernelParams, TrainingDesign};
use crate::models::{tolerance_of_work, tolerance_work_derivative, work_of_tolerance};
use crate::rng::{derive_seed, rng_from};

use super::{local_error, local_error_variance_gradient, simplex_project, ErrorVariant};

/// Budget allocation over the existing design points and the new candidates.
#[derive(Debug, Clone)]
pub struct ToleranceProblem {
    pub existing_points: Vec<Vec<f64>>,
    pub prev_tolerances: Vec<f64>,
    pub candidate_points: Vec<Vec<f64>>,
    pub delta_budget: f64,
    pub work_exponent: f64,
}

impl ToleranceProblem {
    fn validate(&self) -> Result<()> {
        if self.existing_points.len() != self.prev_tolerances.len() {
            return Err(Error::Dimension {
                expected: self.existing_points.len(),
                got: self.prev_tolerances.len(),
                context: "previous tolerances",
            });
        }
        if !(self.delta_budget >= 0.0) || !(self.work_exponent > 0.0) {
            return Err(Error::Config(format!(
                "tolerance problem needs delta_budget >= 0 and work_exponent > 0, got {} and {}",
                self.delta_budget, self.work_exponent
            )));
        }
        if self
            .prev_tolerances
            .iter()
            .any(|t| !(*t > 0.0 && t.is_finite()))
        {
            return Err(Error::Config(
                "existing design tolerances must be finite".into(),
            ));
        }
        Ok(())
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.existing_points
            .iter()
            .chain(&self.candidate_points)
            .cloned()
            .collect()
    }

    /// Lower bounds in work coordinates: previous work for existing points, 0 for new.
    fn lower(&self) -> Vec<f64> {
        self.prev_tolerances
            .iter()
            .map(|t| work_of_tolerance(*t, self.work_exponent))
            .chain(std::iter::repeat_n(0.0, self.candidate_points.len()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ToleranceSettings {
    /// Random feasible budget splits, in addition to the even split over candidates.
    pub random_starts: usize,
    pub armijo: f64,
    pub contraction: f64,
    pub max_iterations: usize,
    pub max_backtracks: usize,
    /// New points receiving less than this fraction of the budget are dropped.
    pub exclusion_threshold: f64,
}

impl Default for ToleranceSettings {
    fn default() -> Self {
        Self {
            random_starts: 4,
            armijo: 1e-4,
            contraction: 0.5,
            max_iterations: 50,
            max_backtracks: 30,
            exclusion_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToleranceResult {
    /// Existing points first, then candidates; `inf` marks an excluded candidate.
    pub tolerances: Vec<f64>,
    pub works: Vec<f64>,
    pub objective: f64,
    pub start_objective: f64,
    pub included: Vec<bool>,
}

/// Variance-only error estimate: the predictive mean is frozen, the variance
/// is recomputed for the design with work vector `works`.
struct Objective<'a> {
    points: Vec<Vec<f64>>,
    params: &'a KernelParams,
    prior_mean: &'a [f64],
    integration_points: &'a [Vec<f64>],
    frozen_mean: Vec<Vec<f64>>,
    meas: &'a MeasurementModel,
    variant: ErrorVariant,
    work_exponent: f64,
    exec: Exec,
}

impl Objective<'_> {
    fn model(&self, works: &[f64]) -> Result<(GpModel, Vec<usize>)> {
        let m = self.params.outputs();
        let mut design = TrainingDesign::new();
        let mut index = Vec::new();
        for (i, (p, w)) in self.points.iter().zip(works).enumerate() {
            if *w > 0.0 {
                design.push(
                    p.clone(),
                    tolerance_of_work(*w, self.work_exponent),
                    vec![0.0; m],
                    *w,
                )?;
                index.push(i);
            }
        }
        Ok((GpModel::fit(&design, self.params, self.prior_mean)?, index))
    }

    fn value(&self, works: &[f64]) -> Result<f64> {
        let (model, _) = self.model(works)?;
        let vals = self.exec.map_range(self.integration_points.len(), |q| {
            let var = model.predict(&self.integration_points[q]).variance;
            local_error(&self.frozen_mean[q], &var, self.meas, self.variant)
        });
        Ok(vals.iter().sum::<f64>() / vals.len().max(1) as f64)
    }

    fn value_and_gradient(&self, works: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (model, index) = self.model(works)?;
        let n = self.integration_points.len();
        let per_point = self.exec.map_range(n, |q| {
            let cache = model.cache_point(&self.integration_points[q]);
            let e = local_error(
                &self.frozen_mean[q],
                &cache.variance,
                self.meas,
                self.variant,
            );
            let de = local_error_variance_gradient(
                &self.frozen_mean[q],
                &cache.variance,
                self.meas,
                self.variant,
            );
            let dtau: Vec<f64> = model
                .variance_tolerance_gradient(&cache)
                .iter()
                .map(|row| row.iter().zip(&de).map(|(a, b)| a * b).sum())
                .collect();
            (e, dtau)
        });
        let scale = 1.0 / n.max(1) as f64;
        let mut value = 0.0;
        let mut dtau = vec![0.0; index.len()];
        for (e, g) in &per_point {
            value += e;
            for (acc, v) in dtau.iter_mut().zip(g) {
                *acc += v;
            }
        }
        let mut grad = vec![0.0; works.len()];
        for (j, &i) in index.iter().enumerate() {
            grad[i] = dtau[j] * scale * tolerance_work_derivative(works[i], self.work_exponent);
        }
        Ok((value * scale, grad))
    }
}

/// Projected gradient descent with Armijo backtracking from one start.
fn descend(
    obj: &Objective<'_>,
    start: Vec<f64>,
    lower: &[f64],
    cap: f64,
    settings: &ToleranceSettings,
) -> Result<(Vec<f64>, f64, f64)> {
    let mut w = simplex_project(&start, lower, cap);
    let (mut f, mut g) = obj.value_and_gradient(&w)?;
    let f_start = f;
    for _ in 0..settings.max_iterations {
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax == 0.0 {
            break;
        }
        let mut alpha = cap / gmax;
        let mut moved = false;
        for _ in 0..settings.max_backtracks {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x - alpha * d).collect();
            let trial = simplex_project(&trial, lower, cap);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&w))
                .map(|(d, (a, b))| d * (a - b))
                .sum();
            let step = trial
                .iter()
                .zip(&w)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            if step <= 1e-12 * cap {
                break;
            }
            let ft = obj.value(&trial)?;
            if ft <= f + settings.armijo * decrease {
                w = trial;
                moved = true;
                break;
            }
            alpha *= settings.contraction;
        }
        if !moved {
            break;
        }
        (f, g) = obj.value_and_gradient(&w)?;
    }
    Ok((w, f, f_start))
}

fn random_split(lower: &[f64], cap: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    let e: Vec<f64> = lower.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    lower
        .iter()
        .zip(&e)
        .map(|(l, x)| l + cap * x / total)
        .collect()
}

/// Distributes `delta_budget` of work over the design in work coordinates
/// `w_i = tau_i^(-l/r)`, minimising the variance-only global error estimate
/// subject to `w_i >= w_i_prev` and `sum(w_i - w_i_prev) <= delta_budget`.
pub fn optimize_tolerances(
    problem: &ToleranceProblem,
    model: &GpModel,
    meas: &MeasurementModel,
    integration_points: &[Vec<f64>],
    variant: ErrorVariant,
    seed: u64,
    settings: &ToleranceSettings,
    exec: Exec,
) -> Result<ToleranceResult> {
    problem.validate()?;
    let lower = problem.lower();
    let n_old = problem.existing_points.len();
    let n = lower.len();
    let cap = problem.delta_budget;

    let frozen_mean = exec.map(integration_points, |p| model.predict(p).mean);
    let obj = Objective {
        points: problem.points(),
        params: model.params(),
        prior_mean: model.prior_mean(),
        integration_points,
        frozen_mean,
        meas,
        variant,
        work_exponent: problem.work_exponent,
        exec,
    };

    if !(cap > 0.0) || n == 0 {
        let value = obj.value(&lower)?;
        return Ok(finish(problem, &lower, &lower, value, value));
    }

    let mut starts = Vec::new();
    let spread = if n > n_old { n_old..n } else { 0..n };
    let share = cap / spread.len() as f64;
    starts.push(
        lower
            .iter()
            .enumerate()
            .map(|(i, l)| if spread.contains(&i) { l + share } else { *l })
            .collect::<Vec<f64>>(),
    );
    for k in 0..settings.random_starts {
        starts.push(random_split(&lower, cap, derive_seed(seed, k as u64)));
    }

    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut last_err = None;
    for start in starts {
        match descend(&obj, start, &lower, cap, settings) {
            Ok(run) => {
                if best.as_ref().is_none_or(|b| run.1 < b.1) {
                    best = Some(run);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((w, _, f_start)) = best else {
        return Err(
            last_err.unwrap_or_else(|| Error::Config("tolerance optimisation failed".into()))
        );
    };

    let snapped = snap(&w, &lower, n_old, settings.exclusion_threshold * cap);
    let value = obj.value(&snapped)?;
    Ok(finish(problem, &lower, &snapped, value, f_start))
}

/// Rounds negligible allocations back to the lower bound.
fn snap(w: &[f64], lower: &[f64], n_old: usize, threshold: f64) -> Vec<f64> {
    w.iter()
        .zip(lower)
        .enumerate()
        .map(|(i, (x, l))| {
            if x - l < threshold {
                *l
            } else if i >= n_old && *x < threshold {
                0.0
            } else {
                *x
            }
        })
        .collect()
}

fn finish(
    problem: &ToleranceProblem,
    lower: &[f64],
    w: &[f64],
    value: f64,
    start_value: f64,
) -> ToleranceResult {
    let n_old = problem.existing_points.len();
    let tolerances: Vec<f64> = w
        .iter()
        .zip(lower)
        .enumerate()
        .map(|(i, (x, l))| {
            if i < n_old && x == l {
                problem.prev_tolerances[i]
            } else {
                tolerance_of_work(*x, problem.work_exponent)
            }
        })
        .collect();
    let included = tolerances[n_old..].iter().map(|t| t.is_finite()).collect();
    ToleranceResult {
        tolerances,
        works: w.to_vec(),
        objective: value,
        start_objective: start_value,
        included,
    }
}

/// Variance-only error estimate for explicit tolerances, mean taken from `model`.
pub fn variance_only_objective(
    model: &GpModel,
    points: &[Vec<f64>],
    tolerances: &[f64],
    meas: &MeasurementModel,
    integration_points: &[Vec<f64>],
    variant: ErrorVariant,
    work_exponent: f64,
    exec: Exec,
) -> Result<f64> {
    let obj = Objective {
        points: points.to_vec(),
        params: model.params(),
        prior_mean: model.prior_mean(),
        integration_points,
        frozen_mean: exec.map(integration_points, |p| model.predict(p).mean),
        meas,
        variant,
        work_exponent,
        exec,
    };
    let works: Vec<f64> = tolerances
        .iter()
        .map(|t| work_of_tolerance(*t, work_exponent))
        .collect();
    obj.value(&works)
}

/// Value and gradient of the variance-only error estimate with respect to
/// the work coordinates `works` (zero work excludes a point).
pub fn variance_only_gradient(
    model: &GpModel,
    points: &[Vec<f64>],
    works: &[f64],
    meas: &MeasurementModel,
    integration_points: &[Vec<f64>],
    variant: ErrorVariant,
    work_exponent: f64,
    exec: Exec,
) -> Result<(f64, Vec<f64>)> {
    let obj = Objective {
        points: points.to_vec(),
        params: model.params(),
        prior_mean: model.prior_mean(),
        integration_points,
        frozen_mean: exec.map(integration_points, |p| model.predict(p).mean),
        meas,
        variant,
        work_exponent,
        exec,
    };
    obj.value_and_gradient(works)
}
