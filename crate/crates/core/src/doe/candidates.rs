use rand::seq::index;

use crate::bayes::PriorBox;
use crate::exec::Exec;
use crate::rng::rng_from;

use super::UtilityContext;

#[derive(Debug, Clone)]
pub struct CompassSettings {
    /// Initial step as a fraction of the domain diameter.
    pub initial_step: f64,
    pub contraction: f64,
    /// Terminate once the step drops below this fraction of the diameter.
    pub min_step: f64,
    /// Random starts per parameter dimension.
    pub starts_per_dim: usize,
    pub max_evaluations: usize,
    /// Converged points closer than this fraction of the diameter are merged.
    pub dedup_radius: f64,
}

impl Default for CompassSettings {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            contraction: 0.5,
            min_step: 1e-3,
            starts_per_dim: 8,
            max_evaluations: 2000,
            dedup_radius: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Coordinate-wise compass search minimising `f` inside `domain`.
pub fn compass_search<F>(
    f: F,
    start: &[f64],
    domain: &PriorBox,
    settings: &CompassSettings,
) -> SearchResult
where
    F: Fn(&[f64]) -> f64,
{
    let diam = domain.diameter();
    let mut step = settings.initial_step * diam;
    let min_step = settings.min_step * diam;
    let mut x = start.to_vec();
    domain.clamp(&mut x);
    let mut fx = f(&x);
    let mut evals = 1;
    while step >= min_step {
        if evals >= settings.max_evaluations {
            return SearchResult {
                point: x,
                value: fx,
                converged: false,
            };
        }
        let mut improved = false;
        'dirs: for k in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] += sign * step;
                domain.clamp(&mut y);
                if y[k] == x[k] {
                    continue;
                }
                let fy = f(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break 'dirs;
                }
            }
        }
        if !improved {
            step *= settings.contraction;
        }
    }
    SearchResult {
        point: x,
        value: fx,
        converged: true,
    }
}

/// Multistart compass search on `dE/dW`, returning up to `count` distinct
/// local minimisers ordered from most to least promising. If the searches
/// collapse onto fewer minimisers, the remaining slots are filled with the
/// best distinct start points.
pub fn select_candidates(
    ctx: &UtilityContext<'_>,
    count: usize,
    domain: &PriorBox,
    seed: u64,
    settings: &CompassSettings,
    exec: Exec,
) -> Vec<Vec<f64>> {
    let pool: Vec<&[f64]> = ctx.integration_points().collect();
    let n_starts = settings.starts_per_dim * domain.dim();
    let starts: Vec<Vec<f64>> = if pool.is_empty() {
        vec![domain.midpoint()]
    } else {
        let mut rng = rng_from(seed);
        index::sample(&mut rng, pool.len(), n_starts.min(pool.len()))
            .into_iter()
            .map(|i| pool[i].to_vec())
            .collect()
    };
    let results = exec.map(&starts, |s| {
        compass_search(|p| ctx.utility(p), s, domain, settings)
    });
    let radius = settings.dedup_radius * domain.diameter();
    let mut picked = rank_and_dedup(results, count, radius);
    if picked.len() < count && !pool.is_empty() {
        let values = exec.map(&starts, |s| ctx.utility(s));
        let mut order: Vec<usize> = (0..starts.len()).collect();
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        for i in order {
            if picked.len() == count {
                break;
            }
            if !picked
                .iter()
                .any(|q| crate::gp::sq_dist(q, &starts[i]).sqrt() < radius)
            {
                picked.push(starts[i].clone());
            }
        }
    }
    picked
}

fn rank_and_dedup(mut results: Vec<SearchResult>, count: usize, radius: f64) -> Vec<Vec<f64>> {
    if count == 0 {
        return Vec::new();
    }
    let any_converged = results.iter().any(|r| r.converged);
    if !any_converged {
        let best = results
            .into_iter()
            .min_by(|a, b| a.value.total_cmp(&b.value));
        return best.map(|b| vec![b.point]).unwrap_or_default();
    }
    results.retain(|r| r.converged);
    results.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut picked: Vec<Vec<f64>> = Vec::new();
    for r in results {
        let dup = picked
            .iter()
            .any(|q| crate::gp::sq_dist(q, &r.point).sqrt() < radius);
        if !dup {
            picked.push(r.point);
            if picked.len() == count {
                break;
            }
        }
    }
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_argmin(f: impl Fn(&[f64]) -> f64, n: usize) -> f64 {
        (0..=n)
            .map(|i| i as f64 / n as f64)
            .min_by(|a, b| f(&[*a]).total_cmp(&f(&[*b])))
            .unwrap()
    }

    #[test]
    fn compass_finds_sharp_minimum() {
        let dom = PriorBox::new(vec![0.0], vec![1.0]).unwrap();
        let f = |p: &[f64]| -(-(p[0] - 0.637).powi(2) / 0.002).exp();
        let star = grid_argmin(f, 100_000);
        let r = compass_search(f, &[0.55], &dom, &CompassSettings::default());
        assert!(r.converged);
        assert!((r.point[0] - star).abs() < 1e-2);
    }

    #[test]
    fn dedup_and_ranking() {
        let dom = PriorBox::new(vec![0.0], vec![1.0]).unwrap();
        let f = |p: &[f64]| {
            -(-(p[0] - 0.25).powi(2) / 0.003).exp() - (-(p[0] - 0.75).powi(2) / 0.003).exp()
        };
        let settings = CompassSettings::default();
        let results: Vec<SearchResult> = [0.1, 0.2, 0.3, 0.6, 0.7, 0.9]
            .iter()
            .map(|s| compass_search(f, &[*s], &dom, &settings))
            .collect();
        let picked = rank_and_dedup(results.clone(), 2, 1e-3 * dom.diameter());
        assert_eq!(picked.len(), 2);
        let mut xs: Vec<f64> = picked.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 0.25).abs() < 1e-2 && (xs[1] - 0.75).abs() < 1e-2);
        assert_eq!(rank_and_dedup(results, 1, 1e-3).len(), 1);
    }

    #[test]
    fn unconverged_falls_back_to_best_start() {
        let results = vec![
            SearchResult {
                point: vec![0.1],
                value: 2.0,
                converged: false,
            },
            SearchResult {
                point: vec![0.2],
                value: 1.0,
                converged: false,
            },
        ];
        assert_eq!(rank_and_dedup(results, 3, 1e-3), vec![vec![0.2]]);
    }
}
