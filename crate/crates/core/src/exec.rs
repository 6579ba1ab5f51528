//! Index-parallel map abstraction.
//!
//! The core never spawns threads. Callers hand an [`Executor`] to the search
//! and the trainer; the std companion provides a thread-pool backed one.
//! Results are always returned in index order.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
