//! Deterministic parallel ensembles of independent trajectories.
//!
//! Trajectory `i` always draws from stream `i` of the master seed, and results
//! are reduced in index order, so the output does not depend on the worker
//! count or on scheduling.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CollapseError, Result};
use crate::grw::trajectory_rng;

const BATCH: u64 = 256;

pub struct Ensemble {
    seed: u64,
    trajectories: u64,
    pool: rayon::ThreadPool,
}

impl Ensemble {
    /// `workers == 0` uses the machine's parallelism.
    pub fn new(seed: u64, trajectories: u64, workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CollapseError::invalid("workers", e.to_string()))?;
        Ok(Ensemble {
            seed,
            trajectories,
            pool,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trajectories(&self) -> u64 {
        self.trajectories
    }

    /// Runs `job` for every trajectory and feeds the results to `reduce` in index order.
    ///
    /// Only one batch of results is alive at a time. The first failing
    /// trajectory, by index, aborts the run.
    pub fn fold<T, A, F, R>(&self, init: A, job: F, mut reduce: R) -> Result<A>
    where
        T: Send,
        F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
        R: FnMut(&mut A, u64, T),
    {
        let mut acc = init;
        let mut start = 0;
        while start < self.trajectories {
            let end = (start + BATCH).min(self.trajectories);
            let batch: Vec<Result<T>> = self.pool.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = trajectory_rng(self.seed, i);
                        job(i, &mut rng)
                    })
                    .collect()
            });
            for (i, r) in (start..end).zip(batch) {
                reduce(&mut acc, i, r?);
            }
            start = end;
        }
        Ok(acc)
    }

    /// Collects every trajectory's result in index order.
    pub fn map<T, F>(&self, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
    {
        self.fold(Vec::with_capacity(self.trajectories as usize), job, |v, _, t| v.push(t))
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
