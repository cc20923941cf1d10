//! Shared worker pool, capped by the `PARBALS_THREADS` environment variable.
//!
//! Results never depend on the thread count: parallel sections write
//! independent slots and every floating-point reduction runs in a fixed
//! order on the calling thread.

use std::sync::OnceLock;

use rayon::ThreadPool;

static POOL: OnceLock<ThreadPool> = OnceLock::new();

pub fn pool() -> &'static ThreadPool {
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Ok(v) = std::env::var("PARBALS_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    builder = builder.num_threads(n);
                }
            } else {
                log::warn!("ignoring unparseable PARBALS_THREADS={v:?}");
            }
        }
        builder.build().expect("worker pool")
    })
}
