//! Worker pool shared by the design search and policy evaluation.

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CIRCUFLOW_THREADS";

/// Worker count from `CIRCUFLOW_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    let raw = std::env::var(THREADS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            log::warn!("ignoring {THREADS_ENV}={raw:?}: expected a positive integer");
            None
        }
    }
}

/// A pool sized by [`thread_cap`], or by rayon's default when unset.
///
/// Callers collect results in input order, so output never depends on the
/// pool size.
pub fn pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}
