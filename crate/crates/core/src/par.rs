//! Order-preserving parallel map with a sequential fallback.
//!
//! With the `parallel` feature, work is spread over a rayon pool of the
//! requested size; without it (or with `jobs == 1`) items are processed in
//! order on the calling thread. Output order always matches input order, so
//! downstream reductions are deterministic.

/// Map `f` over `items`, preserving order. `jobs == 0` means "use every
/// available core".
pub fn map_ordered<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    imp::map(items, jobs, f)
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel_build() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        if jobs == 0 {
            return items.par_iter().map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => items.iter().map(f).collect(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map<T, R, F>(items: &[T], _jobs: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}
