//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) batches fan out over rayon's pool;
//! without it every helper runs in order on the calling thread. Results are
//! always collected in index order, so outputs are identical either way.

/// How a batch is executed. `Parallel` degrades to sequential when the
/// `parallel` feature is disabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `true` if this build can actually run batches concurrently.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f)` collected in order.
pub fn map<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps over a slice of inputs, preserving order.
pub fn map_slice<I, T, F>(exec: Execution, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map(exec, items.len(), |i| f(&items[i]))
}

/// Caps the global pool at `threads` workers (from `LAMBDA_LAB_THREADS` when
/// `None`). Returns the effective worker count. Safe to call more than once;
/// only the first successful call configures the pool.
pub fn configure_threads(threads: Option<usize>) -> usize {
    let requested = threads.or_else(|| {
        std::env::var("LAMBDA_LAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    #[cfg(feature = "parallel")]
    {
        if let Some(t) = requested.filter(|&t| t > 0) {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        1
    }
}
