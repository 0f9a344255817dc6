//! Latin hypercube designs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bayes::PriorBox;
use crate::rng::rng_from;

/// `n` points in `domain`, one per stratum along every axis, jittered
/// uniformly within each stratum. Row order is random.
pub fn latin_hypercube(n: usize, domain: &PriorBox, seed: u64) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut rng = rng_from(seed);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let (lo, hi) = (domain.lower[k], domain.upper[k]);
        columns.push(
            strata
                .into_iter()
                .map(|s| {
                    let u: f64 = rng.random();
                    lo + (hi - lo) * (s as f64 + u) / n as f64
                })
                .collect(),
        );
    }
    (0..n)
        .map(|i| (0..d).map(|k| columns[k][i]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_per_stratum() {
        let dom = PriorBox::new(vec![-0.5, 0.0], vec![0.5, 2.0]).unwrap();
        let pts = latin_hypercube(24, &dom, 3);
        assert_eq!(pts.len(), 24);
        for k in 0..2 {
            let mut bins: Vec<usize> = pts
                .iter()
                .map(|p| ((p[k] - dom.lower[k]) / (dom.upper[k] - dom.lower[k]) * 24.0) as usize)
                .collect();
            bins.sort_unstable();
            assert_eq!(bins, (0..24).collect::<Vec<_>>());
        }
        assert!(pts.iter().all(|p| dom.contains(p)));
        assert_eq!(latin_hypercube(24, &dom, 3), pts);
    }

    #[test]
    fn single_point_lies_in_domain() {
        let dom = PriorBox::new(vec![0.0], vec![1.0]).unwrap();
        let p = latin_hypercube(1, &dom, 9);
        assert_eq!(p.len(), 1);
        assert!(dom.contains(&p[0]));
    }
}
