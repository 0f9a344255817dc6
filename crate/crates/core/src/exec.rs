//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled, [`Exec::Parallel`] dispatches to
//! rayon. Without it, both variants run sequentially. Results always come
//! back in input order and every reduction in this crate is performed
//! sequentially over the collected values, so output is bitwise identical
//! regardless of the execution mode or the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this mode actually fans out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<U, F>(self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Mean of `f` over `items`, summed sequentially in input order.
    pub fn mean<T, F>(self, items: &[T], f: F) -> f64
    where
        T: Sync,
        F: Fn(&T) -> f64 + Sync + Send,
    {
        if items.is_empty() {
            return 0.0;
        }
        let vals = self.map(items, f);
        vals.iter().sum::<f64>() / items.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = Exec::Sequential.mean(&xs, |x| x.exp());
        let b = Exec::Parallel.mean(&xs, |x| x.exp());
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(
            Exec::Sequential.map_range(17, |i| i * i),
            Exec::Parallel.map_range(17, |i| i * i)
        );
    }
}
