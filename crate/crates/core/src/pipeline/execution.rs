//! How work items are scheduled: a rayon pool when the `parallel` feature
//! is on and more than one worker is asked for, a plain loop otherwise.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Execution {
    Parallel { workers: usize },
    Sequential,
}

impl Execution {
    pub fn from_workers(workers: usize) -> Self {
        if workers > 1 {
            Execution::Parallel { workers }
        } else {
            Execution::Sequential
        }
    }

    /// What will actually run, after the feature gate.
    pub fn effective(self) -> Self {
        match self {
            Execution::Parallel { workers } if cfg!(feature = "parallel") && workers > 1 => self,
            _ => Execution::Sequential,
        }
    }

    /// Apply `f` to every item. Output order follows input order in both
    /// modes; only the interleaving of side effects differs.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self.effective() {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel { workers } => parallel_map(workers, items, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            tracing::warn!(error = %e, "cannot start worker pool, running sequentially");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(_workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}
