//! Rayon-backed trial execution.

use aerolink_core::montecarlo::TrialRunner;
use rayon::prelude::*;

/// Environment variable selecting the number of worker threads.
pub const THREADS_ENV: &str = "AEROLINK_THREADS";

pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `threads == 0` lets rayon pick.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(Self { pool: rayon::ThreadPoolBuilder::new().num_threads(threads).build()? })
    }

    pub fn from_env() -> anyhow::Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => {
                v.trim().parse().map_err(|_| anyhow::anyhow!("{THREADS_ENV}: expected a thread count, got `{v}`"))?
            }
            Err(_) => 0,
        };
        Ok(Self::new(threads)?)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl TrialRunner for Parallel {
    fn run<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}
