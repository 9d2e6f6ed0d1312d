use ips_core::replicas::Replicas;
use rayon::prelude::*;

use crate::LabError;

/// A fixed-size Rayon pool. Results come back in replica order whatever the
/// worker count, so outputs do not depend on scheduling.
pub struct Pool {
    inner: rayon::ThreadPool,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self, LabError> {
        let inner = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| LabError::Usage { key: "workers".into(), msg: e.to_string() })?;
        Ok(Pool { inner })
    }

    pub fn workers(&self) -> usize {
        self.inner.current_num_threads()
    }
}

impl Replicas for Pool {
    fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        let n = usize::try_from(n).expect("replica count fits in usize");
        self.inner.install(|| (0..n).into_par_iter().map(|i| f(i as u64)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ips_core::replicas::{run_seeded, Sequential};

    #[test]
    fn order_matches_sequential() {
        let f = |s: u64| s.rotate_left(7) ^ 0x9e37;
        let want = run_seeded(&Sequential, 11, 1000, f);
        for w in [1, 2, 5] {
            assert_eq!(run_seeded(&Pool::new(w).unwrap(), 11, 1000, f), want);
        }
        assert!(Pool::new(3).unwrap().map(0, |i| i).is_empty());
    }
}
