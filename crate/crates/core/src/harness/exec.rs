use crate::error::{Error, Result};

/// How replications are scheduled.
///
/// Results are always gathered in replication order, so the choice affects
/// wall time only. Without the `parallel` feature every variant runs on the
/// calling thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel { threads: usize },
}

impl Execution {
    /// `None` means the available parallelism of the machine.
    pub fn from_threads(threads: Option<usize>) -> Self {
        let t = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if t <= 1 {
            Self::Sequential
        } else {
            Self::Parallel { threads: t }
        }
    }

    pub fn threads(&self) -> usize {
        match self {
            Self::Sequential => 1,
            Self::Parallel { threads } => *threads,
        }
    }
}

/// A ready-to-use scheduler; the worker pool is built once per run.
pub(crate) struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub(crate) fn new(exec: Execution) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            let pool = match exec {
                Execution::Sequential => None,
                Execution::Parallel { threads } => Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build()
                        .map_err(|e| Error::Config(format!("threads: {e}")))?,
                ),
            };
            Ok(Self { pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            if exec.threads() == 0 {
                return Err(Error::Config("threads: must be at least 1".into()));
            }
            Ok(Self {})
        }
    }

    /// `f(0), …, f(count − 1)` in index order; the first error in index
    /// order wins.
    pub(crate) fn map<T, F>(&self, count: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            let slots: Vec<Result<T>> = pool.install(|| (0..count).into_par_iter().map(&f).collect());
            return slots.into_iter().collect();
        }
        (0..count).map(f).collect()
    }
}
