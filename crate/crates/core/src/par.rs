//! Data-parallel helpers with a sequential fallback.
//!
//! Every parallel path produces its output by index, never through an
//! order-dependent reduction, so results do not depend on the worker count.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 128;

impl Execution {
    /// Evaluates `f(0..n)` into a vector, stopping at the first error.
    pub fn try_map<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().with_min_len(MIN_CHUNK).map(f).collect()
            }
        }
    }

    /// Applies `f` to every element of `out` together with its index.
    pub fn for_each_indexed<T, F>(self, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        match self {
            Execution::Sequential => out.iter_mut().enumerate().for_each(|(i, x)| f(i, x)),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                out.par_iter_mut()
                    .with_min_len(MIN_CHUNK)
                    .enumerate()
                    .for_each(|(i, x)| f(i, x))
            }
        }
    }
}

/// Runs `op` inside a dedicated pool of `threads` workers. Without the
/// `parallel` feature the closure simply runs on the calling thread.
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("thread pool construction");
        pool.install(op)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}
