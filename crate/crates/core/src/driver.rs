//! The interleaved training and sampling loop.
//!
//! Each iteration updates the MCMC chain on the current surrogate posterior,
//! picks candidate points by their utility, distributes the iteration's work
//! budget over old and new points, evaluates the forward model where
//! tolerances decreased and refits the GP. After the loop a final batch of
//! samples is drawn from the last surrogate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::{log_posterior, MeasurementModel, Source};
use crate::config::ExperimentConfig;
use crate::doe::{
    global_error, optimize_tolerances, select_candidates, ToleranceProblem, UtilityContext,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gp::{DesignEntry, GpModel, KernelParams, TrainingDesign};
use crate::hyper::optimize_hyperparameters;
use crate::lhs::latin_hypercube;
use crate::models::{
    evaluate_noisy, refine_evaluation, work_of_tolerance, ForwardModel, WorkLedger,
};
use crate::rng::{derive_seed, derive_seed2, stream};
use crate::sampler::{subsample, update_chain, SampleChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    AdaptiveFull,
    AdaptivePositionOnly,
    Lhs,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::AdaptiveFull,
        StrategyKind::AdaptivePositionOnly,
        StrategyKind::Lhs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::AdaptiveFull => "adaptive_full",
            StrategyKind::AdaptivePositionOnly => "adaptive_position_only",
            StrategyKind::Lhs => "lhs",
        }
    }

    fn tag(self) -> u64 {
        match self {
            StrategyKind::AdaptiveFull => 11,
            StrategyKind::AdaptivePositionOnly => 12,
            StrategyKind::Lhs => 13,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy '{s}'")))
    }
}

/// State of the design after one iteration, sufficient to rebuild the surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(with = "crate::serde_inf::vec")]
    pub tolerances: Vec<f64>,
    pub values: Vec<Option<Vec<f64>>>,
    /// Cumulative work charged by the ledger.
    pub work_spent: f64,
    /// Budget counter of the loop condition.
    pub budget_counter: f64,
    pub params: KernelParams,
    pub prior_mean: Vec<f64>,
    pub chain_len: usize,
    pub acceptance_rate: Option<f64>,
    /// Global error estimate on this iteration's integration points, before the update.
    pub global_error: Option<f64>,
}

impl Snapshot {
    fn capture(
        iteration: usize,
        design: &TrainingDesign,
        params: &KernelParams,
        prior_mean: &[f64],
    ) -> Self {
        Self {
            iteration,
            points: design.entries.iter().map(|e| e.point.clone()).collect(),
            tolerances: design.entries.iter().map(|e| e.tolerance).collect(),
            values: design.entries.iter().map(|e| e.value.clone()).collect(),
            work_spent: 0.0,
            budget_counter: 0.0,
            params: params.clone(),
            prior_mean: prior_mean.to_vec(),
            chain_len: 0,
            acceptance_rate: None,
            global_error: None,
        }
    }

    pub fn design(&self, work_exponent: f64) -> TrainingDesign {
        let entries = self
            .points
            .iter()
            .zip(&self.tolerances)
            .zip(&self.values)
            .map(|((p, t), v)| DesignEntry {
                point: p.clone(),
                tolerance: *t,
                value: v.clone(),
                work: work_of_tolerance(*t, work_exponent),
            })
            .collect();
        TrainingDesign { entries }
    }

    pub fn model(&self, work_exponent: f64) -> Result<GpModel> {
        GpModel::fit(&self.design(work_exponent), &self.params, &self.prior_mean)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub chain: SampleChain,
    pub snapshots: Vec<Snapshot>,
    pub ledger: WorkLedger,
    pub design: TrainingDesign,
    /// Outer iterations executed.
    pub iterations: usize,
}

/// Mutable state of one run.
struct RunState<'a> {
    config: &'a ExperimentConfig,
    fm: ForwardModel,
    meas: MeasurementModel,
    seed: u64,
    design: TrainingDesign,
    params: KernelParams,
    prior_mean: Vec<f64>,
    chain: SampleChain,
    ledger: WorkLedger,
}

impl<'a> RunState<'a> {
    fn new(config: &'a ExperimentConfig, strategy: StrategyKind, seed: u64) -> Result<Self> {
        config.validate()?;
        let fm = config.forward_model()?;
        let meas = config.measurement(&fm)?;
        let seed = derive_seed(seed, strategy.tag());
        Ok(Self {
            params: config.initial_params(fm.outputs)?,
            prior_mean: config.prior_mean(fm.outputs),
            config,
            meas,
            seed,
            design: TrainingDesign::new(),
            chain: SampleChain::new(derive_seed(seed, stream::MCMC)),
            ledger: WorkLedger::default(),
            fm,
        })
    }

    fn l_over_r(&self) -> f64 {
        self.config.problem.work_exponent
    }

    fn retune(&mut self) -> Result<()> {
        if !self.config.gp.retune || self.design.active_len() == 0 {
            return Ok(());
        }
        let fit = optimize_hyperparameters(
            &self.design,
            &self.params,
            &self.prior_mean,
            &self.config.adam(),
        )?;
        if fit.diverged {
            log::warn!(
                "hyperparameter optimisation diverged; keeping {:?}",
                self.params
            );
        } else {
            self.params = fit.params;
        }
        Ok(())
    }

    fn model(&self) -> Result<GpModel> {
        GpModel::fit(&self.design, &self.params, &self.prior_mean)
    }

    fn snapshot(&self, iteration: usize, budget_counter: f64) -> Snapshot {
        let mut s = Snapshot::capture(iteration, &self.design, &self.params, &self.prior_mean);
        s.work_spent = self.ledger.total;
        s.budget_counter = budget_counter;
        s.chain_len = self.chain.len();
        s
    }

    /// Evaluates a new point at `tau` and charges the ledger.
    fn add_point(&mut self, p: Vec<f64>, tau: f64, eval_seed: u64) -> Result<()> {
        let value = evaluate_noisy(&self.fm, &p, tau, eval_seed)?;
        self.ledger
            .charge(&p, f64::INFINITY, tau, self.l_over_r())?;
        let work = work_of_tolerance(tau, self.l_over_r());
        self.design.push(p, tau, value, work)
    }

    /// Re-evaluates entry `i` at a smaller tolerance and charges the difference.
    fn refine_point(&mut self, i: usize, tau: f64, eval_seed: u64) -> Result<()> {
        let l_over_r = self.l_over_r();
        let e = &self.design.entries[i];
        let value = refine_evaluation(
            &self.fm,
            &e.point,
            e.tolerance,
            tau,
            e.value.as_deref(),
            eval_seed,
        )?;
        self.ledger.charge(&e.point, e.tolerance, tau, l_over_r)?;
        let e = &mut self.design.entries[i];
        e.tolerance = tau;
        e.value = Some(value);
        e.work = work_of_tolerance(tau, l_over_r);
        Ok(())
    }

    fn log_density(&self, model: &GpModel) -> impl Fn(&[f64]) -> f64 + '_ {
        let kind = self.config.mcmc.likelihood;
        let meas = &self.meas;
        let domain = &self.fm.domain;
        let model = model.clone();
        move |p: &[f64]| {
            log_posterior(p, Source::Surrogate(&model), meas, domain, kind).unwrap_or(f64::NAN)
        }
    }

    /// Draws `n` samples after removing `h` (clamped to the chain length).
    fn sample(
        &mut self,
        model: &GpModel,
        iteration: usize,
        n: usize,
        h: usize,
        seed: u64,
    ) -> Result<f64> {
        let h = h.min(self.chain.len());
        let update = update_chain(
            &self.chain,
            n,
            h,
            iteration,
            self.log_density(model),
            &self.fm.domain,
            seed,
        )?;
        if update.acceptance_rate == 0.0 {
            log::warn!("iteration {iteration}: MCMC accepted no proposals");
        }
        self.chain = update.chain;
        Ok(update.acceptance_rate)
    }

    fn final_sampling(&mut self, j: usize) -> Result<()> {
        let model = self.model()?;
        let n = self.config.schedule.samples.count(j);
        let seed = derive_seed2(self.seed, stream::FINAL, j as u64);
        self.sample(&model, j, n, 0, seed)?;
        Ok(())
    }
}

/// Initial design: a Latin hypercube at the configured coarse tolerance,
/// charged to `ledger`.
pub fn initial_design(
    config: &ExperimentConfig,
    seed: u64,
    ledger: &mut WorkLedger,
) -> Result<TrainingDesign> {
    let fm = config.forward_model()?;
    let tau = config.doe.initial_tolerance;
    let l_over_r = config.problem.work_exponent;
    let points = latin_hypercube(
        config.doe.initial_points,
        &fm.domain,
        derive_seed(seed, stream::INITIAL_DESIGN),
    );
    let mut design = TrainingDesign::new();
    for (i, p) in points.into_iter().enumerate() {
        let value = evaluate_noisy(
            &fm,
            &p,
            tau,
            derive_seed2(seed, stream::INITIAL_DESIGN, i as u64 + 1),
        )?;
        ledger.charge(&p, f64::INFINITY, tau, l_over_r)?;
        design.push(p, tau, value, work_of_tolerance(tau, l_over_r))?;
    }
    Ok(design)
}

/// Runs one strategy; see [`run_with_hook`].
pub fn run(
    config: &ExperimentConfig,
    strategy: StrategyKind,
    seed: u64,
    exec: Exec,
) -> Result<RunOutput> {
    run_with_hook(config, strategy, seed, exec, &mut |_| Ok(()))
}

/// Runs one strategy, calling `on_snapshot` after every completed iteration
/// so that callers can persist progress before a later failure.
pub fn run_with_hook(
    config: &ExperimentConfig,
    strategy: StrategyKind,
    seed: u64,
    exec: Exec,
    on_snapshot: &mut dyn FnMut(&Snapshot) -> Result<()>,
) -> Result<RunOutput> {
    match strategy {
        StrategyKind::Lhs => run_lhs(config, seed, on_snapshot),
        _ => run_adaptive(config, strategy, seed, exec, on_snapshot),
    }
}

fn run_adaptive(
    config: &ExperimentConfig,
    strategy: StrategyKind,
    seed: u64,
    exec: Exec,
    on_snapshot: &mut dyn FnMut(&Snapshot) -> Result<()>,
) -> Result<RunOutput> {
    let mut st = RunState::new(config, strategy, seed)?;
    let schedule = &config.schedule;
    let fixed_tau = config.fixed_tolerance();

    st.design = initial_design(config, st.seed, &mut st.ledger)?;
    st.retune()?;
    let mut w_d = st.ledger.total;
    let mut snapshots = vec![st.snapshot(0, w_d)];
    on_snapshot(&snapshots[0])?;

    let mut j = 1;
    while w_d < config.problem.budget && j <= schedule.max_iterations {
        let model = st.model()?;
        let it = j as u64;
        let acceptance = st.sample(
            &model,
            j,
            schedule.samples.count(j),
            schedule.removals.count(j),
            derive_seed2(st.seed, stream::MCMC, it),
        )?;
        let ipoints = subsample(
            &st.chain,
            config.mcmc.subsample_size,
            derive_seed2(st.seed, stream::SUBSAMPLE, it),
        )?;
        let variant = config.doe.error_variant;
        let err = global_error(&model, &st.meas, &ipoints, variant, exec);

        let ctx = UtilityContext::new(&model, &st.meas, &ipoints, variant, st.l_over_r(), exec);
        let candidates = select_candidates(
            &ctx,
            schedule.candidates.count(j),
            &st.fm.domain,
            derive_seed2(st.seed, stream::CANDIDATES, it),
            &config.compass(),
            exec,
        );
        let n_old = st.design.len();
        let new_tolerances: Vec<f64> = match strategy {
            StrategyKind::AdaptiveFull => {
                let problem = ToleranceProblem {
                    existing_points: st.design.entries.iter().map(|e| e.point.clone()).collect(),
                    prev_tolerances: st.design.entries.iter().map(|e| e.tolerance).collect(),
                    candidate_points: candidates.clone(),
                    delta_budget: config.iteration_budget(j),
                    work_exponent: st.l_over_r(),
                };
                optimize_tolerances(
                    &problem,
                    &model,
                    &st.meas,
                    &ipoints,
                    variant,
                    derive_seed2(st.seed, stream::TOLERANCES, it),
                    &config.tolerance_settings(),
                    exec,
                )?
                .tolerances
            }
            _ => st
                .design
                .entries
                .iter()
                .map(|e| e.tolerance)
                .chain(candidates.iter().map(|_| fixed_tau))
                .collect(),
        };

        let eval_base = derive_seed2(st.seed, stream::EVALUATION, it);
        for (i, &tau) in new_tolerances[..n_old].iter().enumerate() {
            if tau < st.design.entries[i].tolerance {
                st.refine_point(i, tau, derive_seed(eval_base, i as u64))?;
            }
        }
        for (k, (p, &tau)) in candidates
            .into_iter()
            .zip(&new_tolerances[n_old..])
            .enumerate()
        {
            if tau.is_finite() {
                st.add_point(p, tau, derive_seed(eval_base, (n_old + k) as u64))?;
            }
        }
        st.retune()?;
        w_d += config.iteration_budget(j);

        let mut snap = st.snapshot(j, w_d);
        snap.acceptance_rate = Some(acceptance);
        snap.global_error = Some(err);
        log::info!(
            "{strategy} seed {seed} iteration {j}: {} points, work {:.3}, E = {err:.4e}, acceptance {acceptance:.3}",
            st.design.active_len(),
            st.ledger.total
        );
        on_snapshot(&snap)?;
        snapshots.push(snap);
        j += 1;
    }

    st.final_sampling(j)?;
    Ok(RunOutput {
        strategy,
        seed,
        chain: st.chain,
        snapshots,
        ledger: st.ledger,
        design: st.design,
        iterations: j - 1,
    })
}

/// Number of points of the Latin hypercube baseline.
pub fn lhs_point_count(config: &ExperimentConfig) -> usize {
    let points_budget: f64 = (1..=config.schedule.max_iterations)
        .map(|j| config.iteration_budget(j))
        .sum();
    (points_budget / config.doe.budget_per_point + 1e-9).floor() as usize
}

/// Single-shot Latin hypercube at the fixed tolerance. Snapshot `k` holds the
/// first `round(k N / J)` points so that work checkpoints line up with the
/// adaptive strategies.
fn run_lhs(
    config: &ExperimentConfig,
    seed: u64,
    on_snapshot: &mut dyn FnMut(&Snapshot) -> Result<()>,
) -> Result<RunOutput> {
    let mut st = RunState::new(config, StrategyKind::Lhs, seed)?;
    let tau = config.fixed_tolerance();
    let n_total = lhs_point_count(config);
    let iterations = config.schedule.max_iterations;
    let points = latin_hypercube(n_total, &st.fm.domain, derive_seed(st.seed, stream::LHS));
    let eval_base = derive_seed(st.seed, stream::EVALUATION);

    let mut snapshots = Vec::with_capacity(iterations + 1);
    let mut next = 0;
    for k in 0..=iterations {
        let upto = ((k * n_total) as f64 / iterations as f64).round() as usize;
        while next < upto {
            st.add_point(
                points[next].clone(),
                tau,
                derive_seed(eval_base, next as u64),
            )?;
            next += 1;
        }
        st.retune()?;
        let snap = st.snapshot(k, st.ledger.total);
        on_snapshot(&snap)?;
        snapshots.push(snap);
    }
    st.final_sampling(iterations + 1)?;
    Ok(RunOutput {
        strategy: StrategyKind::Lhs,
        seed,
        chain: st.chain,
        snapshots,
        ledger: st.ledger,
        design: st.design,
        iterations,
    })
}
