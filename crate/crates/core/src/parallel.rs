//! Data-parallel helpers. With the `parallel` feature (default) the
//! `Parallel` mode runs on rayon; without it every mode runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecutionMode {
    /// Whether work actually runs on more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecutionMode::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map_slice<T, U, F>(mode: ExecutionMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == ExecutionMode::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Runs `f` inside a pool of `workers` threads when parallel, or directly.
pub fn with_workers<R, F>(mode: ExecutionMode, workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if mode == ExecutionMode::Parallel {
        match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("thread pool unavailable ({e}); running sequentially"),
        }
    }
    let _ = (mode, workers);
    f()
}
