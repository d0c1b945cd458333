//! Data-parallel helpers. With the `parallel` feature (on by default) work is
//! spread over rayon's pool; without it every call runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// `Parallel` degrades to `Sequential` when the crate is built without rayon.
    pub fn effective(self) -> Parallelism {
        if cfg!(feature = "parallel") {
            self
        } else {
            Parallelism::Sequential
        }
    }
}

/// Maps every item, preserving input order in the output.
pub fn map_collect<T, U, F>(items: &[T], mode: Parallelism, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Folds every item into an accumulator and combines the partial results.
///
/// With `ordered` set, every item is folded into a fresh accumulator and the
/// partial results are combined strictly left to right, so floating-point sums
/// are bit-identical across thread counts and between the two modes.
pub fn fold_reduce<T, A, I, F, R>(
    items: &[T],
    mode: Parallelism,
    ordered: bool,
    identity: I,
    fold: F,
    reduce: R,
) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
{
    if ordered {
        let parts = map_collect(items, mode, |item| fold(identity(), item));
        return parts.into_iter().fold(identity(), &reduce);
    }
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            items
                .par_iter()
                .fold(&identity, &fold)
                .reduce(&identity, &reduce)
        }
        _ => {
            let _ = &reduce;
            items.iter().fold(identity(), fold)
        }
    }
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if workers > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(f);
            }
        }
    }
    let _ = workers;
    f()
}
