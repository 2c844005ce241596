//! Chunked execution backends for the elementwise kernels.
//!
//! Work over `0..T` is always split into the same contiguous chunks of
//! `chunk` elements, whichever backend runs it. Reductions produce one
//! partial per chunk and fold the partials left to right, so a result
//! depends only on the chunk size and never on the worker count.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;

/// Default work granularity, matching a 512-thread block.
pub const DEFAULT_CHUNK: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("chunk size must be at least 1")]
    ZeroChunk,
    #[error("failed to build thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Which execution backend to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Serial,
    Parallel { workers: usize },
}

impl Backend {
    /// Short label used in report file names.
    pub fn label(&self) -> String {
        match self {
            Backend::Serial => "serial".to_string(),
            Backend::Parallel { workers } => format!("parallel{workers}"),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Serial => f.write_str("serial"),
            Backend::Parallel { workers } => write!(f, "parallel({workers})"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    /// Accepts `serial`, `parallel` (uses all available cores) or `parallel:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("serial") {
            return Ok(Backend::Serial);
        }
        let rest = s
            .strip_prefix("parallel")
            .ok_or_else(|| format!("unknown backend '{s}'"))?;
        if rest.is_empty() {
            return Ok(Backend::Parallel {
                workers: default_workers(),
            });
        }
        let n = rest
            .trim_start_matches([':', '('])
            .trim_end_matches(')')
            .parse::<usize>()
            .map_err(|_| format!("bad worker count in backend '{s}'"))?;
        Ok(Backend::Parallel { workers: n })
    }
}

/// Number of hardware threads, at least 1.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Runs chunked elementwise work on a serial loop or a dedicated rayon pool.
#[derive(Clone)]
pub struct Executor {
    backend: Backend,
    chunk: usize,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl fmt::Debug for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Executor")
            .field("backend", &self.backend)
            .field("chunk", &self.chunk)
            .finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Executor::serial()
    }
}

impl Executor {
    pub fn serial() -> Self {
        Executor {
            backend: Backend::Serial,
            chunk: DEFAULT_CHUNK,
            pool: None,
        }
    }

    pub fn parallel(workers: usize) -> Result<Self, ExecError> {
        Executor::new(Backend::Parallel { workers })
    }

    pub fn new(backend: Backend) -> Result<Self, ExecError> {
        let pool = match backend {
            Backend::Serial => None,
            Backend::Parallel { workers: 0 } => return Err(ExecError::NoWorkers),
            Backend::Parallel { workers } => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(|i| format!("rsv-kernel-{i}"))
                    .build()?,
            )),
        };
        Ok(Executor {
            backend,
            chunk: DEFAULT_CHUNK,
            pool,
        })
    }

    pub fn with_chunk(mut self, chunk: usize) -> Result<Self, ExecError> {
        if chunk == 0 {
            return Err(ExecError::ZeroChunk);
        }
        self.chunk = chunk;
        Ok(self)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn chunk(&self) -> usize {
        self.chunk
    }

    /// Applies `f(offset, chunk)` to every chunk of `data` and returns the
    /// per-chunk results in chunk order.
    pub fn map_chunks_mut<T, R, F>(&self, data: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> R + Sync + Send,
    {
        let chunk = self.chunk;
        match &self.pool {
            None => data
                .chunks_mut(chunk)
                .enumerate()
                .map(|(i, c)| f(i * chunk, c))
                .collect(),
            Some(pool) => pool.install(|| {
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .map(|(i, c)| f(i * chunk, c))
                    .collect()
            }),
        }
    }

    /// Applies `f` to every chunk of `data`; returns `true` iff every call did.
    pub fn all_chunks_mut<T, F>(&self, data: &mut [T], f: F) -> bool
    where
        T: Send,
        F: Fn(usize, &mut [T]) -> bool + Sync + Send,
    {
        self.map_chunks_mut(data, f).into_iter().all(|ok| ok)
    }

    /// Evaluates `f` on each index range of the fixed partition of `0..len`
    /// and folds the partials sequentially in range order.
    pub fn chunked_sum<S, F>(&self, len: usize, f: F) -> S
    where
        S: Send + Copy + std::ops::Add<Output = S> + num_traits::Zero,
        F: Fn(Range<usize>) -> S + Sync + Send,
    {
        let chunk = self.chunk;
        let n_chunks = len.div_ceil(chunk);
        let range = |i: usize| i * chunk..((i + 1) * chunk).min(len);
        let partials: Vec<S> = match &self.pool {
            None => (0..n_chunks).map(|i| f(range(i))).collect(),
            Some(pool) => pool.install(|| {
                (0..n_chunks)
                    .into_par_iter()
                    .map(|i| f(range(i)))
                    .collect()
            }),
        };
        partials.into_iter().fold(S::zero(), |acc, x| acc + x)
    }
}
