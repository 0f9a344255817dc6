//! Experiment configuration, read from TOML.
//!
//! Sections: `[problem]`, `[gp]`, `[mcmc]`, `[doe]`, `[schedule]`, `[output]`.
//! Per-iteration quantities are expressed with the [`ScheduleFn`] families.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayes::{LikelihoodKind, MeasurementModel};
use crate::doe::{CompassSettings, ErrorVariant, ToleranceSettings};
use crate::error::{Error, Result};
use crate::gp::KernelParams;
use crate::hyper::AdamSettings;
use crate::models::{registry, ForwardModel};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    None,
    Nearest,
    Floor,
}

impl Rounding {
    fn apply(self, x: f64) -> f64 {
        match self {
            Rounding::None => x,
            Rounding::Nearest => x.round(),
            // Guard against products such as 26.4 * 25 landing a hair below an integer.
            Rounding::Floor => (x + 1e-9 * x.abs().max(1.0)).floor(),
        }
    }
}

/// A per-iteration quantity as a function of the 1-based iteration index `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleFn {
    Constant {
        value: f64,
    },
    /// `sum_k coefficients[k] * j^k`.
    Polynomial {
        coefficients: Vec<f64>,
        #[serde(default)]
        rounding: Rounding,
    },
    /// `base + amplitude * (j / horizon)^exponent`.
    NormalizedPower {
        base: f64,
        amplitude: f64,
        horizon: f64,
        exponent: f64,
        #[serde(default)]
        rounding: Rounding,
    },
    /// `first` at `j = 1`, `then(j)` afterwards.
    FirstThen {
        first: f64,
        then: Box<ScheduleFn>,
    },
}

impl ScheduleFn {
    pub fn eval(&self, j: usize) -> f64 {
        let x = j as f64;
        match self {
            ScheduleFn::Constant { value } => *value,
            ScheduleFn::Polynomial {
                coefficients,
                rounding,
            } => {
                let v = coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c);
                rounding.apply(v)
            }
            ScheduleFn::NormalizedPower {
                base,
                amplitude,
                horizon,
                exponent,
                rounding,
            } => rounding.apply(base + amplitude * x.powf(*exponent) / horizon.powf(*exponent)),
            ScheduleFn::FirstThen { first, then } => {
                if j <= 1 {
                    *first
                } else {
                    then.eval(j)
                }
            }
        }
    }

    pub fn count(&self, j: usize) -> usize {
        self.eval(j).round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub max_iterations: usize,
    /// `n_j`, samples drawn per iteration.
    pub samples: ScheduleFn,
    /// `h_j`, oldest samples removed per iteration.
    pub removals: ScheduleFn,
    /// `c_j`, candidate points per iteration.
    pub candidates: ScheduleFn,
    /// `Delta W_j`; defaults to `c_j * doe.budget_per_point`.
    #[serde(default)]
    pub iteration_budget: Option<ScheduleFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub model: String,
    pub work_exponent: f64,
    /// Diagonal of the measurement noise covariance (variances).
    pub sigma_l: Vec<f64>,
    /// Parameter used to synthesise the measurement.
    pub p_true: Vec<f64>,
    #[serde(default)]
    pub noise_seed: u64,
    /// Explicit measurement; overrides the synthetic one when given.
    #[serde(default)]
    pub y_meas: Option<Vec<f64>>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    #[serde(default = "default_length_scale")]
    pub length_scale: f64,
    #[serde(default = "default_output_scale")]
    pub output_scale: f64,
    /// Constant prior mean; zero when omitted.
    #[serde(default)]
    pub prior_mean: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub retune: bool,
    #[serde(default = "default_adam_iterations")]
    pub adam_iterations: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    #[serde(default = "default_subsample")]
    pub subsample_size: usize,
    #[serde(default)]
    pub likelihood: LikelihoodKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeConfig {
    /// Work per point for the fixed-tolerance strategies.
    pub budget_per_point: f64,
    #[serde(default)]
    pub error_variant: ErrorVariant,
    pub initial_points: usize,
    #[serde(default = "default_initial_tolerance")]
    pub initial_tolerance: f64,
    #[serde(default = "default_starts_per_dim")]
    pub starts_per_dim: usize,
    #[serde(default = "default_random_starts")]
    pub tolerance_random_starts: usize,
    #[serde(default = "default_descent_iterations")]
    pub tolerance_max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    /// Grid nodes per dimension for the KL evaluator; 2000 (1D) / 200 (2D) when omitted.
    #[serde(default)]
    pub kl_grid: Option<usize>,
    #[serde(default = "default_kl_mcmc_samples")]
    pub kl_mcmc_samples: usize,
}

fn default_length_scale() -> f64 {
    0.1
}
fn default_output_scale() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_adam_iterations() -> usize {
    200
}
fn default_learning_rate() -> f64 {
    0.05
}
fn default_subsample() -> usize {
    500
}
fn default_initial_tolerance() -> f64 {
    0.2
}
fn default_starts_per_dim() -> usize {
    8
}
fn default_random_starts() -> usize {
    4
}
fn default_descent_iterations() -> usize {
    50
}
fn default_out_dir() -> String {
    "out".into()
}
fn default_kl_mcmc_samples() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub gp: GpConfig,
    pub mcmc: McmcConfig,
    pub doe: DoeConfig,
    pub schedule: Schedule,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn forward_model(&self) -> Result<ForwardModel> {
        registry(&self.problem.model, self.problem.work_exponent)
    }

    pub fn iteration_budget(&self, j: usize) -> f64 {
        match &self.schedule.iteration_budget {
            Some(f) => f.eval(j),
            None => self.schedule.candidates.count(j) as f64 * self.doe.budget_per_point,
        }
    }

    /// Fixed tolerance of the non-adaptive strategies.
    pub fn fixed_tolerance(&self) -> f64 {
        crate::models::tolerance_of_work(self.doe.budget_per_point, self.problem.work_exponent)
    }

    pub fn prior_mean(&self, outputs: usize) -> Vec<f64> {
        self.gp
            .prior_mean
            .clone()
            .unwrap_or_else(|| vec![0.0; outputs])
    }

    pub fn initial_params(&self, outputs: usize) -> Result<KernelParams> {
        KernelParams::new(self.gp.length_scale, vec![self.gp.output_scale; outputs])
    }

    pub fn adam(&self) -> AdamSettings {
        AdamSettings {
            iterations: self.gp.adam_iterations,
            learning_rate: self.gp.learning_rate,
            ..AdamSettings::default()
        }
    }

    pub fn compass(&self) -> CompassSettings {
        CompassSettings {
            starts_per_dim: self.doe.starts_per_dim,
            ..CompassSettings::default()
        }
    }

    pub fn tolerance_settings(&self) -> ToleranceSettings {
        ToleranceSettings {
            random_starts: self.doe.tolerance_random_starts,
            max_iterations: self.doe.tolerance_max_iterations,
            ..ToleranceSettings::default()
        }
    }

    pub fn kl_grid_nodes(&self, dim: usize) -> usize {
        self.output
            .kl_grid
            .unwrap_or(if dim == 1 { 2000 } else { 200 })
    }

    /// `y_m = y(p_true) + eta`, `eta ~ N(0, diag(sigma_l))`, unless given explicitly.
    pub fn measurement(&self, fm: &ForwardModel) -> Result<MeasurementModel> {
        let y = match &self.problem.y_meas {
            Some(y) => y.clone(),
            None => {
                use rand::Rng;
                use rand_distr::StandardNormal;
                let mut rng = rng_from(self.problem.noise_seed);
                fm.exact(&self.problem.p_true)?
                    .into_iter()
                    .zip(&self.problem.sigma_l)
                    .map(|(y, s)| y + s.sqrt() * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        };
        MeasurementModel::new(y, self.problem.sigma_l.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let fm = self.forward_model()?;
        if self.problem.sigma_l.len() != fm.outputs {
            return Err(Error::Config(format!(
                "model '{}' has {} outputs but sigma_l has {}",
                fm.name,
                fm.outputs,
                self.problem.sigma_l.len()
            )));
        }
        if self.problem.p_true.len() != fm.dim() || !fm.domain.contains(&self.problem.p_true) {
            return Err(Error::Config(format!(
                "p_true {:?} is not in the model domain",
                self.problem.p_true
            )));
        }
        if !(self.problem.budget >= 0.0) {
            return Err(Error::Config("budget must be nonnegative".into()));
        }
        if !(self.doe.budget_per_point > 0.0) {
            return Err(Error::Config("budget_per_point must be positive".into()));
        }
        if let Some(mu) = &self.gp.prior_mean {
            if mu.len() != fm.outputs {
                return Err(Error::Config(
                    "prior_mean length must equal the number of outputs".into(),
                ));
            }
        }
        self.initial_params(fm.outputs)?;
        if self.mcmc.subsample_size == 0 {
            return Err(Error::Config("subsample_size must be at least 1".into()));
        }
        let s = &self.schedule;
        if s.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if s.removals.count(1) != 0 {
            return Err(Error::Config(
                "h_1 must be 0: the chain is empty at the first iteration".into(),
            ));
        }
        let mut total = 0.0;
        for j in 1..=s.max_iterations + 1 {
            let (n, h) = (s.samples.count(j), s.removals.count(j));
            if n == 0 || h >= n {
                return Err(Error::Config(format!(
                    "schedule needs 0 <= h_j < n_j, got h_{j}={h}, n_{j}={n}"
                )));
            }
            if j > s.max_iterations {
                break;
            }
            if s.candidates.count(j) == 0 {
                return Err(Error::Config(format!(
                    "c_{j} = 0: no candidates, no training"
                )));
            }
            let dw = self.iteration_budget(j);
            if !(dw > 0.0) {
                return Err(Error::Config(format!("Delta W_{j} must be positive")));
            }
            total += dw;
        }
        let last = self.iteration_budget(s.max_iterations);
        if total > self.problem.budget + last + 1e-9 {
            log::warn!(
                "iteration budgets sum to {total}; the budget {} stops the loop early",
                self.problem.budget
            );
        }
        Ok(())
    }

    /// One-dimensional analytic experiment.
    pub fn analytic_1d() -> Self {
        Self {
            problem: ProblemConfig {
                model: "analytic1d".into(),
                work_exponent: 1.0,
                sigma_l: vec![1e-4 * 16.0 / 9.0, 1e-4 * 4.0 / 9.0],
                p_true: vec![0.6],
                noise_seed: 2024,
                y_meas: None,
                budget: 500.0,
            },
            gp: GpConfig {
                length_scale: 0.1,
                output_scale: 1.0,
                prior_mean: None,
                retune: true,
                adam_iterations: 200,
                learning_rate: 0.05,
            },
            mcmc: McmcConfig {
                subsample_size: 500,
                likelihood: LikelihoodKind::Marginal,
            },
            doe: DoeConfig {
                budget_per_point: 20.0,
                error_variant: ErrorVariant::Printed,
                initial_points: 3,
                initial_tolerance: 0.2,
                starts_per_dim: 8,
                tolerance_random_starts: 4,
                tolerance_max_iterations: 50,
            },
            schedule: Schedule {
                max_iterations: 12,
                samples: ScheduleFn::NormalizedPower {
                    base: 200.0,
                    amplitude: 1800.0,
                    horizon: 12.0,
                    exponent: 2.0,
                    rounding: Rounding::Nearest,
                },
                removals: ScheduleFn::FirstThen {
                    first: 0.0,
                    then: Box::new(ScheduleFn::NormalizedPower {
                        base: 200.0,
                        amplitude: 800.0,
                        horizon: 12.0,
                        exponent: 2.0,
                        rounding: Rounding::Nearest,
                    }),
                },
                candidates: ScheduleFn::Constant { value: 2.0 },
                iteration_budget: None,
            },
            output: OutputConfig {
                dir: "out".into(),
                kl_grid: None,
                kl_mcmc_samples: 200_000,
            },
        }
    }

    /// Two-dimensional analytic experiment.
    pub fn analytic_2d() -> Self {
        let mut cfg = Self::analytic_1d();
        cfg.problem = ProblemConfig {
            model: "analytic2d".into(),
            work_exponent: 1.5,
            sigma_l: vec![1e-4, 1e-4, 4e-4],
            p_true: vec![0.1, -0.15],
            noise_seed: 2024,
            y_meas: None,
            budget: 3600.0,
        };
        cfg.doe.budget_per_point = 100.0;
        cfg.doe.initial_points = 5;
        cfg.schedule = Schedule {
            max_iterations: 12,
            samples: ScheduleFn::Polynomial {
                coefficients: vec![200.0, 0.0, 26.4],
                rounding: Rounding::Floor,
            },
            removals: ScheduleFn::FirstThen {
                first: 0.0,
                then: Box::new(ScheduleFn::Polynomial {
                    coefficients: vec![200.0, 0.0, 12.5],
                    rounding: Rounding::Floor,
                }),
            },
            candidates: ScheduleFn::Constant { value: 3.0 },
            iteration_budget: None,
        };
        cfg
    }

    /// Reduced-budget variant of the 2D experiment for quick checks.
    pub fn analytic_2d_smoke() -> Self {
        let mut cfg = Self::analytic_2d();
        cfg.problem.budget = 1200.0;
        cfg.schedule.max_iterations = 4;
        cfg
    }
}
