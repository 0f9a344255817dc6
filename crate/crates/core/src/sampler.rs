//! Random-walk Metropolis sampling and sample-chain bookkeeping.

use std::io::{Read, Write};

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bayes::PriorBox;
use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const TARGET_ACCEPTANCE: f64 = 0.25;
/// Fraction of each batch used to adapt the proposal scale.
pub const BURN_IN_FRACTION: f64 = 0.2;

/// Ordered sample set, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleChain {
    pub samples: Vec<Vec<f64>>,
    pub source_iteration: Vec<usize>,
    pub rng_seed: u64,
    /// Adapted proposal scale per coordinate, carried between batches.
    pub proposal_scale: Option<Vec<f64>>,
}

impl SampleChain {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.samples.last().map(Vec::as_slice)
    }

    /// Writes `iteration_tag,p_1,...,p_d` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.samples.first().map_or(0, Vec::len);
        let mut header = vec!["iteration_tag".to_string()];
        header.extend((1..=d).map(|i| format!("p_{i}")));
        w.write_record(&header)?;
        for (s, tag) in self.samples.iter().zip(&self.source_iteration) {
            let mut row = vec![tag.to_string()];
            row.extend(s.iter().map(|x| format!("{x:?}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut chain = SampleChain::default();
        for rec in r.records() {
            let rec = rec?;
            let mut it = rec.iter();
            let tag = it
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| Error::Config("bad iteration tag in chain csv".into()))?;
            let p = it
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad chain value: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            chain.samples.push(p);
            chain.source_iteration.push(tag);
        }
        Ok(chain)
    }
}

#[derive(Debug, Clone)]
pub struct McmcOutput {
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub proposal_scale: Vec<f64>,
    /// No proposal was accepted.
    pub all_rejected: bool,
}

/// Gaussian random-walk Metropolis targeting `exp(logdensity)` on `domain`.
///
/// The proposal scale is multiplied by a factor adapted by Robbins-Monro
/// towards [`TARGET_ACCEPTANCE`] during the first [`BURN_IN_FRACTION`] of
/// the steps; those states are still returned. Proposals outside the
/// domain are rejected.
pub fn mcmc_sample<F>(
    logdensity: F,
    n: usize,
    init: &[f64],
    domain: &PriorBox,
    initial_scale: Option<&[f64]>,
    seed: u64,
) -> Result<McmcOutput>
where
    F: Fn(&[f64]) -> f64,
{
    if n == 0 {
        return Err(Error::Config(
            "number of MCMC samples must be at least 1".into(),
        ));
    }
    let d = domain.dim();
    let mut x = init.to_vec();
    let mut lx = logdensity(&x);
    if lx.is_nan() {
        return Err(Error::NanDensity(x));
    }
    if !lx.is_finite() || !domain.contains(&x) {
        return Err(Error::Config(format!(
            "MCMC initial state {x:?} has zero density"
        )));
    }

    let mut scale: Vec<f64> = match initial_scale {
        Some(s) if s.len() == d && s.iter().all(|v| *v > 0.0 && v.is_finite()) => s.to_vec(),
        _ => domain.widths().iter().map(|w| 0.1 * w).collect(),
    };
    let max_scale: Vec<f64> = domain.widths();
    let burn_in = ((n as f64) * BURN_IN_FRACTION).ceil() as usize;

    let mut rng = rng_from(seed);
    let mut samples = Vec::with_capacity(n);
    let mut accepted = 0usize;
    let mut proposal = vec![0.0; d];
    for t in 0..n {
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            proposal[k] = x[k] + scale[k] * z;
        }
        let lp = if domain.contains(&proposal) {
            logdensity(&proposal)
        } else {
            f64::NEG_INFINITY
        };
        if lp.is_nan() {
            return Err(Error::NanDensity(proposal));
        }
        let u: f64 = rng.random();
        let accept = lp > f64::NEG_INFINITY && u.ln() < lp - lx;
        if accept {
            x.copy_from_slice(&proposal);
            lx = lp;
            accepted += 1;
        }
        if t < burn_in {
            let gain = 1.0 / ((t + 1) as f64).sqrt();
            let a = if accept { 1.0 } else { 0.0 };
            let factor = (gain * (a - TARGET_ACCEPTANCE)).exp();
            for k in 0..d {
                scale[k] = (scale[k] * factor).clamp(1e-12 * max_scale[k], max_scale[k]);
            }
        }
        samples.push(x.clone());
    }
    if accepted == 0 {
        log::warn!("MCMC batch of {n} steps accepted no proposal");
    }
    Ok(McmcOutput {
        samples,
        acceptance_rate: accepted as f64 / n as f64,
        proposal_scale: scale,
        all_rejected: accepted == 0,
    })
}

#[derive(Debug, Clone)]
pub struct ChainUpdate {
    pub chain: SampleChain,
    pub acceptance_rate: f64,
    pub removed: usize,
}

/// Drops the `h` oldest samples and appends `n` new ones from a chain
/// started at the newest existing sample (box midpoint for an empty chain).
pub fn update_chain<F>(
    chain: &SampleChain,
    n: usize,
    h: usize,
    iteration: usize,
    logdensity: F,
    domain: &PriorBox,
    seed: u64,
) -> Result<ChainUpdate>
where
    F: Fn(&[f64]) -> f64,
{
    if h > chain.len() {
        return Err(Error::Config(format!(
            "cannot remove {h} samples from a chain of {}",
            chain.len()
        )));
    }
    if h >= n {
        return Err(Error::Config(format!(
            "samples removed ({h}) must be fewer than drawn ({n})"
        )));
    }
    let mut init = chain
        .last()
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| domain.midpoint());
    if !logdensity(&init).is_finite() {
        init = domain.midpoint();
    }

    let retained = &chain.samples[h..];
    let scale = shape_from_samples(retained, domain).or_else(|| chain.proposal_scale.clone());
    let out = mcmc_sample(&logdensity, n, &init, domain, scale.as_deref(), seed)?;

    let mut next = SampleChain {
        samples: retained.to_vec(),
        source_iteration: chain.source_iteration[h..].to_vec(),
        rng_seed: chain.rng_seed,
        proposal_scale: Some(out.proposal_scale),
    };
    next.samples.extend(out.samples);
    next.source_iteration
        .extend(std::iter::repeat_n(iteration, n));
    Ok(ChainUpdate {
        chain: next,
        acceptance_rate: out.acceptance_rate,
        removed: h,
    })
}

/// Per-coordinate RWM scale `2.38 / sqrt(d) * sd` from existing samples.
fn shape_from_samples(samples: &[Vec<f64>], domain: &PriorBox) -> Option<Vec<f64>> {
    if samples.len() < 50 {
        return None;
    }
    let d = domain.dim();
    let n = samples.len() as f64;
    let widths = domain.widths();
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let mean = samples.iter().map(|s| s[k]).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if !(sd > 1e-9 * widths[k]) {
            return None;
        }
        out.push((2.38 / (d as f64).sqrt() * sd).min(widths[k]));
    }
    Some(out)
}

/// Uniform random subset without replacement, kept in chain order.
pub fn subsample(chain: &SampleChain, size: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if size == 0 {
        return Err(Error::Config("subsample size must be at least 1".into()));
    }
    if size >= chain.len() {
        return Ok(chain.samples.clone());
    }
    let mut rng = rng_from(seed);
    let mut idx = index::sample(&mut rng, chain.len(), size).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| chain.samples[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(d: usize) -> PriorBox {
        PriorBox::new(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    #[test]
    fn uniform_target_mean() {
        let dom = PriorBox::new(vec![-1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let out = mcmc_sample(|_| 0.0, 5000, &dom.midpoint(), &dom, None, 11).unwrap();
        assert_eq!(out.samples.len(), 5000);
        // Autocorrelation inflates the standard error; estimate it with batch means.
        for (k, center) in [1.0, 3.0].iter().enumerate() {
            let xs: Vec<f64> = out.samples.iter().map(|s| s[k]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let batch = 250;
            let means: Vec<f64> = xs
                .chunks(batch)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect();
            let nb = means.len() as f64;
            let bvar = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (nb - 1.0);
            let se = (bvar / nb).sqrt();
            assert!(
                (mean - center).abs() < 3.0 * se,
                "k={k} mean={mean} se={se}"
            );
        }
        assert!(out.samples.iter().all(|s| dom.contains(s)));
    }

    #[test]
    fn truncated_normal_variance() {
        let dom = PriorBox::new(vec![-10.0], vec![10.0]).unwrap();
        let out = mcmc_sample(|p| -0.5 * p[0] * p[0], 20_000, &[0.0], &dom, None, 5).unwrap();
        let xs: Vec<f64> = out.samples.iter().map(|s| s[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "var={var}");
        assert!(
            (out.acceptance_rate - TARGET_ACCEPTANCE).abs() < 0.1,
            "acc={}",
            out.acceptance_rate
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let dom = unit_box(2);
        let f = |p: &[f64]| -((p[0] - 0.3).powi(2) + (p[1] - 0.6).powi(2)) / 0.02;
        let a = mcmc_sample(f, 500, &[0.5, 0.5], &dom, None, 42).unwrap();
        let b = mcmc_sample(f, 500, &[0.5, 0.5], &dom, None, 42).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn nan_density_aborts() {
        let dom = unit_box(1);
        let res = mcmc_sample(
            |p| if p[0] > 0.6 { f64::NAN } else { 0.0 },
            1000,
            &[0.5],
            &dom,
            None,
            1,
        );
        assert!(matches!(res, Err(Error::NanDensity(_))));
    }

    #[test]
    fn two_state_stationary_distribution() {
        // Piecewise-constant target: mass 0.3 on [0, 0.5), 0.7 on [0.5, 1].
        let dom = unit_box(1);
        let f = |p: &[f64]| if p[0] < 0.5 { 0.3f64.ln() } else { 0.7f64.ln() };
        let out = mcmc_sample(f, 100_000, &[0.25], &dom, Some(&[0.3]), 3).unwrap();
        let upper = out.samples.iter().filter(|s| s[0] >= 0.5).count() as f64 / 100_000.0;
        assert!((upper - 0.7).abs() < 0.02, "upper={upper}");
    }

    #[test]
    fn chain_bookkeeping() {
        let dom = unit_box(1);
        let f = |p: &[f64]| -(p[0] - 0.5).powi(2) / 0.01;
        let chain = SampleChain::new(0);
        let up = update_chain(&chain, 200, 0, 1, f, &dom, 1).unwrap();
        assert_eq!(up.chain.len(), 200);
        let h2 = (200.0 + 800.0 * (2.0f64 / 12.0).powi(2)).round() as usize;
        assert_eq!(h2, 222);
        let n2 = 250;
        let up1 = update_chain(&up.chain, 300, 200, 2, f, &dom, 2).unwrap();
        assert_eq!(up1.chain.len(), 300);
        assert!(up1.chain.source_iteration.iter().all(|t| *t == 2));
        let up2 = update_chain(&up1.chain, n2, 100, 3, f, &dom, 3).unwrap();
        assert_eq!(up2.chain.len(), 200 + 300 + n2 - 200 - 100);
        assert_eq!(&up2.chain.samples[..200], &up1.chain.samples[100..]);
        assert!(update_chain(&up2.chain, 10, 20, 4, f, &dom, 4).is_err());
        assert!(update_chain(&chain, 10, 1, 1, f, &dom, 4).is_err());
    }

    #[test]
    fn subsample_contract() {
        let mut chain = SampleChain::new(0);
        assert!(matches!(subsample(&chain, 3, 0), Err(Error::EmptyChain)));
        for i in 0..10 {
            chain.samples.push(vec![i as f64]);
            chain.source_iteration.push(1);
        }
        assert_eq!(subsample(&chain, 10, 0).unwrap(), chain.samples);
        assert_eq!(subsample(&chain, 50, 0).unwrap(), chain.samples);
        assert_eq!(
            subsample(&chain, 4, 7).unwrap(),
            subsample(&chain, 4, 7).unwrap()
        );
        let s = subsample(&chain, 4, 7).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.windows(2).all(|w| w[0][0] < w[1][0]));
    }

    #[test]
    fn single_element_subsample_is_uniform() {
        let mut chain = SampleChain::new(0);
        let len = 10;
        for i in 0..len {
            chain.samples.push(vec![i as f64]);
            chain.source_iteration.push(0);
        }
        let draws = 10_000;
        let mut counts = vec![0usize; len];
        for seed in 0..draws {
            let s = subsample(&chain, 1, seed as u64).unwrap();
            counts[s[0][0] as usize] += 1;
        }
        let expected = draws as f64 / len as f64;
        let chi2: f64 = counts
            .iter()
            .map(|c| (*c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square with 9 dof: P(X > 27.88) = 0.001
        assert!(chi2 < 27.88, "chi2={chi2}");
    }

    #[test]
    fn csv_round_trip() {
        let mut chain = SampleChain::new(0);
        chain.samples = vec![vec![0.1, 0.2], vec![1.0 / 3.0, -0.5]];
        chain.source_iteration = vec![1, 2];
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iteration_tag,p_1,p_2\n"));
        let back = SampleChain::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, chain.samples);
        assert_eq!(back.source_iteration, chain.source_iteration);
    }
}
