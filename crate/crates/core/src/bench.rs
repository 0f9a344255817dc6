//! Benchmark harness: true-posterior KL evaluation, the likelihood demo
//! and multi-strategy, multi-seed experiment orchestration.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{
    log_marginal_likelihood, log_plugin_likelihood, log_posterior, LikelihoodKind, PriorBox, Source,
};
use crate::config::ExperimentConfig;
use crate::driver::{run, RunOutput, Snapshot, StrategyKind};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gp::{GpModel, KernelParams, TrainingDesign};
use crate::lhs::latin_hypercube;
use crate::models::demo_model;
use crate::rng::{derive_seed, rng_from, stream};
use crate::sampler::mcmc_sample;

pub use crate::driver::lhs_point_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlMethod {
    #[default]
    Grid,
    Mcmc,
}

impl std::str::FromStr for KlMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(KlMethod::Grid),
            "mcmc" => Ok(KlMethod::Mcmc),
            _ => Err(Error::Config(format!(
                "unknown KL method '{s}' (grid|mcmc)"
            ))),
        }
    }
}

/// Midpoints of a tensor grid with `nodes` cells per axis, and the cell volume.
pub fn grid_nodes(domain: &PriorBox, nodes: usize) -> (Vec<Vec<f64>>, f64) {
    let d = domain.dim();
    let widths = domain.widths();
    let total = nodes.pow(d as u32);
    let pts = (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|k| {
                    let i = idx % nodes;
                    idx /= nodes;
                    domain.lower[k] + widths[k] * (i as f64 + 0.5) / nodes as f64
                })
                .collect()
        })
        .collect();
    let cell = widths.iter().map(|w| w / nodes as f64).product();
    (pts, cell)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `KL(p || q)` by midpoint quadrature of two unnormalised log-densities,
/// each normalised on the grid. Returns `+inf` if `q` vanishes where `p` does not.
pub fn grid_kl<F, G>(log_p: F, log_q: G, domain: &PriorBox, nodes: usize, exec: Exec) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    let (pts, cell) = grid_nodes(domain, nodes);
    let vals = exec.map(&pts, |p| (log_p(p), log_q(p)));
    let lp: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let lq: Vec<f64> = vals.iter().map(|v| v.1).collect();
    let zp = log_sum_exp(&lp) + cell.ln();
    let zq = log_sum_exp(&lq) + cell.ln();
    let mut acc = 0.0;
    for (a, b) in lp.iter().zip(&lq) {
        let w = (a - zp).exp() * cell;
        if w == 0.0 {
            continue;
        }
        if *b == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        acc += w * ((a - zp) - (b - zq));
    }
    acc
}

/// `KL(p || q)` from samples of both densities.
///
/// With `r = p~/q~`, `KL = E_p[log r] + log(Z_q / Z_p)`. The constant ratio is
/// the geometric bridge estimate `E_p[r^-1/2] / E_q[r^1/2]`, whose variance stays
/// bounded when `q` is wider than `p` (the one-sided `E_p[1/r]` does not).
pub fn sample_kl<F, G>(
    log_p: F,
    log_q: G,
    p_samples: &[Vec<f64>],
    q_samples: &[Vec<f64>],
    exec: Exec,
) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    let log_r = exec.map(p_samples, |s| log_p(s) - log_q(s));
    if log_r.contains(&f64::INFINITY) {
        return f64::INFINITY;
    }
    let log_r_q = exec.map(q_samples, |s| log_p(s) - log_q(s));
    let half_neg: Vec<f64> = log_r.iter().map(|r| -0.5 * r).collect();
    let half_pos: Vec<f64> = log_r_q.iter().map(|r| 0.5 * r).collect();
    let log_ratio = (log_sum_exp(&half_neg) - (half_neg.len() as f64).ln())
        - (log_sum_exp(&half_pos) - (half_pos.len() as f64).ln());
    log_r.iter().sum::<f64>() / log_r.len() as f64 + log_ratio
}

/// Random-walk Metropolis samples of `exp(log_density)` on `domain`: a pilot
/// run from the best of a space-filling set of starts, then a production run
/// with the pilot's spread whose warm-up quarter is discarded.
pub fn posterior_samples<F>(
    log_density: F,
    domain: &PriorBox,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let starts = latin_hypercube(200 * domain.dim(), domain, derive_seed(seed, 1));
    let vals = exec.map(&starts, |p| log_density(p));
    let best = (0..starts.len())
        .max_by(|a, b| vals[*a].total_cmp(&vals[*b]))
        .unwrap_or(0);
    let pilot = mcmc_sample(
        &log_density,
        5000,
        &starts[best],
        domain,
        None,
        derive_seed(seed, 2),
    )?;
    let tail = &pilot.samples[pilot.samples.len() / 2..];
    let d = domain.dim();
    let scale: Vec<f64> = (0..d)
        .map(|k| {
            let m = tail.iter().map(|s| s[k]).sum::<f64>() / tail.len() as f64;
            let v = tail.iter().map(|s| (s[k] - m).powi(2)).sum::<f64>() / tail.len() as f64;
            (2.38 / (d as f64).sqrt() * v.sqrt()).max(1e-6 * domain.widths()[k])
        })
        .collect();
    let burn = n / 4;
    let init = pilot.samples.last().expect("pilot is non-empty").clone();
    let out = mcmc_sample(
        &log_density,
        n + burn,
        &init,
        domain,
        Some(&scale),
        derive_seed(seed, 3),
    )?;
    Ok(out.samples[burn..].to_vec())
}

/// Samples of the true posterior of `config`'s problem.
pub fn true_posterior_samples(
    config: &ExperimentConfig,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<f64>>> {
    let fm = config.forward_model()?;
    let meas = config.measurement(&fm)?;
    let log_true = |p: &[f64]| {
        log_posterior(
            p,
            Source::Exact(&fm),
            &meas,
            &fm.domain,
            LikelihoodKind::True,
        )
        .unwrap_or(f64::NAN)
    };
    posterior_samples(log_true, &fm.domain, n, seed, exec)
}

/// `KL(true posterior || surrogate posterior)` for the surrogate rebuilt from `snapshot`.
pub fn true_posterior_kl(
    snapshot: &Snapshot,
    config: &ExperimentConfig,
    method: KlMethod,
    exec: Exec,
) -> Result<f64> {
    let model = snapshot.model(config.problem.work_exponent)?;
    surrogate_kl(&model, config, method, exec)
}

pub fn surrogate_kl(
    model: &GpModel,
    config: &ExperimentConfig,
    method: KlMethod,
    exec: Exec,
) -> Result<f64> {
    let fm = config.forward_model()?;
    let meas = config.measurement(&fm)?;
    let domain = &fm.domain;
    let kind = config.mcmc.likelihood;
    let log_true = |p: &[f64]| {
        log_posterior(p, Source::Exact(&fm), &meas, domain, LikelihoodKind::True)
            .unwrap_or(f64::NAN)
    };
    let log_sur = |p: &[f64]| {
        log_posterior(p, Source::Surrogate(model), &meas, domain, kind).unwrap_or(f64::NAN)
    };
    let kl = match method {
        KlMethod::Grid => grid_kl(
            log_true,
            log_sur,
            domain,
            config.kl_grid_nodes(domain.dim()),
            exec,
        ),
        KlMethod::Mcmc => {
            let n = config.output.kl_mcmc_samples;
            let seed = derive_seed(config.problem.noise_seed, stream::KL);
            let p_samples = posterior_samples(log_true, domain, n, seed, exec)?;
            let q_samples = posterior_samples(log_sur, domain, n, derive_seed(seed, 1), exec)?;
            sample_kl(log_true, log_sur, &p_samples, &q_samples, exec)
        }
    };
    if kl.is_nan() {
        return Err(Error::NanDensity(Vec::new()));
    }
    Ok(kl)
}

/// Toy problem of the likelihood demo: `y(p) = p^2 sin(p)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub grid_nodes: usize,
    pub training_points: Vec<f64>,
    pub training_tolerance: f64,
    pub length_scale: f64,
    pub output_scale: f64,
    pub y_meas: f64,
    /// Measurement noise variance.
    pub sigma_l: f64,
    /// Replace the surrogate variance by zero.
    pub zero_variance: bool,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            grid_nodes: 1000,
            training_points: vec![0.05, 0.3, 0.9],
            training_tolerance: 1e-3,
            length_scale: 0.15,
            output_scale: 0.1,
            y_meas: 0.2,
            sigma_l: 4e-4,
            zero_variance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub p: f64,
    pub exact: f64,
    pub surrogate_mean: f64,
    pub surrogate_sd: f64,
    pub plugin_posterior_density: f64,
    pub marginal_posterior_density: f64,
}

/// Grid posterior densities under the plug-in and the marginal likelihood.
pub fn demo_likelihoods(cfg: &DemoConfig) -> Result<Vec<DemoRow>> {
    let mut design = TrainingDesign::new();
    for &p in &cfg.training_points {
        design.push(vec![p], cfg.training_tolerance, vec![demo_model(p)], 0.0)?;
    }
    let params = KernelParams::new(cfg.length_scale, vec![cfg.output_scale])?;
    let model = GpModel::fit(&design, &params, &[0.0])?;
    let meas = crate::bayes::MeasurementModel::new(vec![cfg.y_meas], vec![cfg.sigma_l])?;
    let domain = PriorBox::new(vec![0.0], vec![1.0])?;
    let (pts, cell) = grid_nodes(&domain, cfg.grid_nodes);
    let preds: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            let pr = model.predict(p);
            let var = if cfg.zero_variance {
                0.0
            } else {
                pr.variance[0]
            };
            (pr.mean[0], var)
        })
        .collect();
    let lp: Vec<f64> = preds
        .iter()
        .map(|(m, _)| log_plugin_likelihood(&[*m], &meas))
        .collect();
    let lm: Vec<f64> = preds
        .iter()
        .map(|(m, v)| log_marginal_likelihood(&[*m], &[*v], &meas))
        .collect();
    let (zp, zm) = (log_sum_exp(&lp) + cell.ln(), log_sum_exp(&lm) + cell.ln());
    Ok(pts
        .iter()
        .zip(&preds)
        .zip(lp.iter().zip(&lm))
        .map(|((p, (m, v)), (a, b))| DemoRow {
            p: p[0],
            exact: demo_model(p[0]),
            surrogate_mean: *m,
            surrogate_sd: v.sqrt(),
            plugin_posterior_density: (a - zp).exp(),
            marginal_posterior_density: (b - zm).exp(),
        })
        .collect())
}

/// Differential entropy `-int pi ln pi` of a density tabulated on a uniform grid.
pub fn grid_entropy(density: &[f64], cell: f64) -> f64 {
    -density
        .iter()
        .filter(|d| **d > 0.0)
        .map(|d| d * d.ln() * cell)
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRecord {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub iteration: usize,
    pub work: f64,
    pub kl: f64,
}

pub fn write_kl_csv(records: &[KlRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kl_csv(path: &Path) -> Result<Vec<KlRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|rec| rec.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub runs: usize,
    pub failures: usize,
    pub median_final_kl: Option<f64>,
    pub final_kl: Vec<f64>,
    pub final_work: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub model: String,
    pub kl_method: KlMethod,
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategySummary>,
    pub failures: Vec<RunFailure>,
}

impl BenchSummary {
    pub fn median(&self, strategy: StrategyKind) -> Option<f64> {
        self.strategies
            .iter()
            .find(|s| s.strategy == strategy)?
            .median_final_kl
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub curve: Vec<KlRecord>,
    pub summary: BenchSummary,
    pub runs: Vec<RunOutput>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Runs every `(strategy, seed)` pair and evaluates the KL of each snapshot.
/// Failing runs are recorded and skipped.
pub fn run_benchmark(
    config: &ExperimentConfig,
    strategies: &[StrategyKind],
    seeds: &[u64],
    method: KlMethod,
    exec: Exec,
) -> Result<BenchReport> {
    if strategies.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "benchmark needs at least one strategy and one seed".into(),
        ));
    }
    config.validate()?;
    let jobs: Vec<(StrategyKind, u64)> = strategies
        .iter()
        .flat_map(|s| seeds.iter().map(move |seed| (*s, *seed)))
        .collect();
    let results = exec.map(
        &jobs,
        |(strategy, seed)| -> Result<(RunOutput, Vec<KlRecord>)> {
            let out = run(config, *strategy, *seed, exec)?;
            let mut curve = Vec::with_capacity(out.snapshots.len());
            for s in &out.snapshots {
                curve.push(KlRecord {
                    strategy: *strategy,
                    seed: *seed,
                    iteration: s.iteration,
                    work: s.work_spent,
                    kl: true_posterior_kl(s, config, method, exec)?,
                });
            }
            log::info!(
                "{strategy} seed {seed}: final KL {:.4e}",
                curve.last().map_or(f64::NAN, |r| r.kl)
            );
            Ok((out, curve))
        },
    );

    let mut curve = Vec::new();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for ((strategy, seed), res) in jobs.iter().zip(results) {
        match res {
            Ok((out, c)) => {
                curve.extend(c);
                runs.push(out);
            }
            Err(e) => {
                log::error!("{strategy} seed {seed} failed: {e}");
                failures.push(RunFailure {
                    strategy: *strategy,
                    seed: *seed,
                    error: e.to_string(),
                });
            }
        }
    }

    let summaries = strategies
        .iter()
        .map(|&strategy| {
            let finals: Vec<&KlRecord> = seeds
                .iter()
                .filter_map(|seed| {
                    curve
                        .iter()
                        .rfind(|r| r.strategy == strategy && r.seed == *seed)
                })
                .collect();
            let final_kl: Vec<f64> = finals.iter().map(|r| r.kl).collect();
            StrategySummary {
                strategy,
                runs: seeds.len(),
                failures: failures.iter().filter(|f| f.strategy == strategy).count(),
                median_final_kl: median(&final_kl),
                final_kl,
                final_work: finals.iter().map(|r| r.work).collect(),
            }
        })
        .collect();

    Ok(BenchReport {
        curve,
        summary: BenchSummary {
            model: config.problem.model.clone(),
            kl_method: method,
            seeds: seeds.to_vec(),
            strategies: summaries,
            failures,
        },
        runs,
    })
}

fn run_tag(out: &RunOutput) -> String {
    format!("{}_seed{}", out.strategy, out.seed)
}

/// Writes one run's chain and design history under `dir`.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("chains"))?;
    fs::create_dir_all(dir.join("designs"))?;
    let tag = run_tag(out);
    out.chain.write_csv(fs::File::create(
        dir.join("chains").join(format!("{tag}.csv")),
    )?)?;
    write_snapshots(
        &out.snapshots,
        &dir.join("designs").join(format!("{tag}.json")),
    )
}

pub fn write_snapshots(snapshots: &[Snapshot], path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(snapshots)?)?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<Vec<Snapshot>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes `chains/`, `designs/`, `klcurve.csv` and `summary.json` under `dir`.
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for out in &report.runs {
        write_run(out, dir)?;
    }
    write_kl_csv(&report.curve, &dir.join("klcurve.csv"))?;
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&report.summary)?,
    )?;
    Ok(())
}

/// Surrogate standard deviation on a grid plus a thinned posterior sample,
/// for plotting the state of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDump {
    pub iteration: usize,
    pub grid: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    pub point_work: Vec<f64>,
    pub posterior_sample: Vec<Vec<f64>>,
}

pub fn field_dump(
    snapshot: &Snapshot,
    config: &ExperimentConfig,
    chain: &[Vec<f64>],
    nodes: usize,
    sample_size: usize,
    seed: u64,
) -> Result<FieldDump> {
    let fm = config.forward_model()?;
    let model = snapshot.model(config.problem.work_exponent)?;
    let (grid, _) = grid_nodes(&fm.domain, nodes);
    let std = grid
        .iter()
        .map(|p| model.predict(p).variance.iter().map(|v| v.sqrt()).collect())
        .collect();
    let mut rng = rng_from(seed);
    let posterior_sample = if chain.is_empty() {
        Vec::new()
    } else {
        (0..sample_size.min(chain.len()))
            .map(|_| chain[rng.random_range(0..chain.len())].clone())
            .collect()
    };
    let design = snapshot.design(config.problem.work_exponent);
    Ok(FieldDump {
        iteration: snapshot.iteration,
        grid,
        std,
        points: snapshot.points.clone(),
        point_work: design.entries.iter().map(|e| e.work).collect(),
        posterior_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> PriorBox {
        PriorBox::new(vec![-12.0], vec![12.0]).unwrap()
    }

    #[test]
    fn identical_densities_have_zero_kl() {
        let f = |p: &[f64]| -0.5 * p[0] * p[0] / 0.3;
        assert!(grid_kl(f, f, &line(), 2000, Exec::Parallel).abs() < 1e-12);
    }

    #[test]
    fn gaussian_pair() {
        let p = |x: &[f64]| -0.5 * x[0] * x[0];
        let q = |x: &[f64]| -0.25 * x[0] * x[0];
        let kl = grid_kl(p, q, &line(), 2000, Exec::Sequential);
        let exact = 0.5 * (2f64.ln() + 0.5 - 1.0);
        assert!((kl - exact).abs() < 1e-6, "{kl} vs {exact}");
    }

    #[test]
    fn disjoint_support_is_infinite() {
        let dom = PriorBox::new(vec![0.0], vec![1.0]).unwrap();
        let q = |x: &[f64]| if x[0] < 0.5 { 0.0 } else { f64::NEG_INFINITY };
        assert_eq!(
            grid_kl(|_| 0.0, q, &dom, 100, Exec::Sequential),
            f64::INFINITY
        );
    }

    #[test]
    fn sample_estimator_on_exact_gaussians() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rng_from(4);
        let xs: Vec<Vec<f64>> = (0..200_000)
            .map(|_| vec![StandardNormal.sample(&mut rng)])
            .collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * 2f64.sqrt()]).collect();
        let kl = sample_kl(
            |x| -0.5 * x[0] * x[0],
            |x| -0.25 * x[0] * x[0],
            &xs,
            &ys,
            Exec::Parallel,
        );
        assert!((kl - 0.5 * (2f64.ln() - 0.5)).abs() < 5e-3, "{kl}");
    }

    #[test]
    fn grid_nodes_cover_box() {
        let dom = PriorBox::new(vec![-0.5, 0.0], vec![0.5, 2.0]).unwrap();
        let (pts, cell) = grid_nodes(&dom, 4);
        assert_eq!(pts.len(), 16);
        assert!((cell * 16.0 - dom.volume()).abs() < 1e-14);
        assert_eq!(pts[0], vec![-0.375, 0.25]);
        assert_eq!(pts[15], vec![0.375, 1.75]);
    }

    #[test]
    fn demo_normalisation_and_reduction() {
        let rows = demo_likelihoods(&DemoConfig::default()).unwrap();
        let cell = 1.0 / rows.len() as f64;
        let a: f64 = rows.iter().map(|r| r.plugin_posterior_density).sum::<f64>() * cell;
        let b: f64 = rows
            .iter()
            .map(|r| r.marginal_posterior_density)
            .sum::<f64>()
            * cell;
        assert!((a - 1.0).abs() < 1e-10 && (b - 1.0).abs() < 1e-10);

        let cfg = DemoConfig {
            zero_variance: true,
            ..DemoConfig::default()
        };
        for r in demo_likelihoods(&cfg).unwrap() {
            assert_eq!(r.plugin_posterior_density, r.marginal_posterior_density);
        }
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn kl_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let recs = vec![
            KlRecord {
                strategy: StrategyKind::Lhs,
                seed: 1,
                iteration: 0,
                work: 0.0,
                kl: 1.25,
            },
            KlRecord {
                strategy: StrategyKind::AdaptiveFull,
                seed: 2,
                iteration: 3,
                work: 135.5,
                kl: 0.1 + 0.2,
            },
        ];
        write_kl_csv(&recs, &path).unwrap();
        let head = std::fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("strategy,seed,iteration,work,kl\n"));
        assert_eq!(read_kl_csv(&path).unwrap(), recs);
    }
}
