//! Thread-count control for the data-parallel sweeps.
//!
//! `XFL_THREADS` caps the worker count; unset or `0` lets rayon decide.
//! Results never depend on the thread count: every parallel stage collects in
//! input order.

pub const THREADS_ENV: &str = "XFL_THREADS";

/// Worker limit requested through the environment, if any.
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `op` on a pool sized by [`thread_limit`].
pub fn install<R, F>(op: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match thread_limit().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(op),
        None => op(),
    }
}
