//! Parallel/sequential execution switch.
//!
//! Heavy loops (independent networks within a wave, MCMC chains, power
//! analysis simulations, amplification grids) run through [`for_each_index`]
//! so the same code path drives both the rayon thread pool (feature
//! `parallel`, on by default) and a plain sequential loop. Results are
//! always collected in index order, and every task derives its own RNG
//! stream, so the two modes produce identical output.

use serde::{Deserialize, Serialize};

/// How independent tasks are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// One task at a time, in index order.
    Sequential,
    /// Rayon work-stealing pool. Falls back to sequential when the crate
    /// is built without the `parallel` feature.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

impl ExecMode {
    /// Whether this mode will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Map `f` over `0..n`, returning results in index order.
///
/// `f` must be deterministic given its index; under `ExecMode::Parallel`
/// tasks run on the rayon pool, otherwise inline.
pub fn map_indexed<U, F>(mode: ExecMode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]: stops at the first error in index
/// order (under parallel execution all tasks may still run, but the
/// reported error is the lowest-index one, keeping behavior deterministic).
pub fn try_map_indexed<U, E, F>(mode: ExecMode, n: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    let results = map_indexed(mode, n, f);
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

/// Configure the global rayon pool size. Call once, early, from the CLI;
/// later calls (or calls when the pool already exists) are ignored. A
/// no-op without the `parallel` feature.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            // Error just means the global pool was already initialized.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let f = |i: usize| (i as f64).sqrt() * 3.0;
        let seq = map_indexed(ExecMode::Sequential, 100, f);
        let par = map_indexed(ExecMode::Parallel, 100, f);
        assert_eq!(seq, par);
    }

    #[test]
    fn results_arrive_in_index_order() {
        let out = map_indexed(ExecMode::Parallel, 1000, |i| i);
        assert!(out.iter().enumerate().all(|(i, &v)| i == v));
    }

    #[test]
    fn try_map_reports_lowest_index_error() {
        let r: Result<Vec<usize>, usize> = try_map_indexed(ExecMode::Parallel, 100, |i| {
            if i % 7 == 3 {
                Err(i)
            } else {
                Ok(i)
            }
        });
        assert_eq!(r.unwrap_err(), 3);
    }
}
