//! Replica fan-out.
//!
//! Monte Carlo routines take a [`Replicas`] runner and a master seed. Replica
//! `i` always receives seed `replica_seed(master, i)` and results come back in
//! index order, so reductions do not depend on how the work was scheduled.

use alloc::vec::Vec;

use crate::rng::replica_seed;

pub trait Replicas {
    /// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
    fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs replicas one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Replicas for Sequential {
    fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over replica seeds derived from `master`.
pub fn run_seeded<R, T, F>(runner: &R, master: u64, n: u64, f: F) -> Vec<T>
where
    R: Replicas,
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    runner.map(n, |i| f(replica_seed(master, i)))
}
