//! Execution strategy for the data-parallel loops.
//!
//! Every batch operation in the crate (family sweeps, seed replications,
//! pair scoring, per-timestamp signal evaluation, log-likelihood sums) goes
//! through [`Exec`]. With the `parallel` feature disabled, `Exec::Parallel`
//! silently runs sequentially.
//!
//! Results never depend on the strategy: maps preserve input order and sums
//! are accumulated per fixed-size chunk, then the chunk totals are added in
//! order. Sequential and parallel runs are therefore bit-identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of terms accumulated per chunk in [`Exec::sum`].
pub const SUM_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Deterministic sum of `f` over `items`.
    pub fn sum<T, F>(self, items: &[T], f: F) -> f64
    where
        T: Sync,
        F: Fn(&T) -> f64 + Sync + Send,
    {
        let chunk_sum = |chunk: &[T]| chunk.iter().map(&f).sum::<f64>();
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && items.len() > SUM_CHUNK {
            let partial: Vec<f64> = items.par_chunks(SUM_CHUNK).map(chunk_sum).collect();
            return partial.iter().sum();
        }
        items.chunks(SUM_CHUNK).map(chunk_sum).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_bitwise() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.37).sin() * 1e3).collect();
        let a = Exec::Sequential.sum(&xs, |x| x.exp().ln() * 1.1);
        let b = Exec::Parallel.sum(&xs, |x| x.exp().ln() * 1.1);
        assert_eq!(a.to_bits(), b.to_bits());

        let m1 = Exec::Sequential.map_range(100, |i| i * i);
        let m2 = Exec::Parallel.map_range(100, |i| i * i);
        assert_eq!(m1, m2);
    }

    #[test]
    fn empty_sum_is_zero() {
        let xs: Vec<f64> = Vec::new();
        assert_eq!(Exec::Parallel.sum(&xs, |x| *x), 0.0);
    }
}
