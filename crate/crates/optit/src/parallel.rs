//! Thread-pool executor for searches and sweep cells.

use optit_core::Executor;
use rayon::prelude::*;

/// Maps task indices on a rayon pool; results keep index order.
pub struct PoolExecutor {
    pool: rayon::ThreadPool,
}

impl PoolExecutor {
    /// `threads = 0` uses rayon's default (one per core).
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(PoolExecutor { pool: rayon::ThreadPoolBuilder::new().num_threads(threads).build()? })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send, F: FnOnce() -> R + Send>(&self, f: F) -> R {
        self.pool.install(f)
    }
}

impl Executor for PoolExecutor {
    fn map<R: Send, F: Fn(usize) -> R + Sync + Send>(&self, n: usize, f: F) -> Vec<R> {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_index_order() {
        let ex = PoolExecutor::new(3).unwrap();
        assert_eq!(ex.map(100, |i| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert!(ex.map(0, |i| i).is_empty());
    }
}
