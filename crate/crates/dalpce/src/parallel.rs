//! Worker-pool plumbing. `DALPCE_THREADS` caps the pool size (0 or unset
//! means automatic). Parallel maps collect in input order, so results are
//! identical for any worker count.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

fn thread_cap() -> usize {
    std::env::var("DALPCE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// The process-wide worker pool.
pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        ThreadPoolBuilder::new()
            .num_threads(thread_cap())
            .build()
            .expect("worker pool initialization should succeed")
    })
}

/// Parallel map preserving input order.
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if items.len() < 64 {
        return items.iter().map(f).collect();
    }
    pool().install(|| items.par_iter().map(f).collect())
}
