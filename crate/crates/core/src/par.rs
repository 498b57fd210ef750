//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it, or with [`Exec::Sequential`], the same closures run in order.
//! Results are always returned in input order so callers stay deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for the data-parallel loops in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Map `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Map `f` over a slice, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Fold `f(i)` for `i in 0..n` with an associative `combine`.
    ///
    /// The parallel reduction tree differs from the sequential left fold, so
    /// floating-point sums agree only to rounding.
    pub fn map_reduce<R, F, I, G>(self, n: usize, f: F, identity: I, combine: G) -> R
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
        I: Fn() -> R + Sync + Send,
        G: Fn(R, R) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).fold(identity(), combine),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).reduce(identity, combine),
        }
    }
}

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "BPMS_WORKERS";

/// Size the global pool from `BPMS_WORKERS` when set. Call once, early.
pub fn configure_workers() -> crate::Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| crate::Error::Config(format!("{WORKERS_ENV}={raw:?} is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| crate::Error::Config(format!("cannot size worker pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_default_agree() {
        let seq = Exec::Sequential.map_range(100, |i| i * i);
        let def = Exec::default().map_range(100, |i| i * i);
        assert_eq!(seq, def);
        let s: usize = Exec::default().map_reduce(100, |i| i, || 0, |a, b| a + b);
        assert_eq!(s, 4950);
    }
}
