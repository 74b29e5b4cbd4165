//! Trial scheduling. Results always come back in trial order, so every
//! downstream reduction is independent of the schedule.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executor {
    Sequential,
    /// Thread pool of the given size; 0 lets the runtime pick. Without the
    /// `parallel` feature this runs sequentially.
    Parallel { threads: usize },
}

impl Default for Executor {
    fn default() -> Self {
        Executor::Parallel { threads: 0 }
    }
}

impl Executor {
    pub fn with_threads(threads: usize) -> Self {
        if threads == 1 {
            Executor::Sequential
        } else {
            Executor::Parallel { threads }
        }
    }

    pub fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Executor::Sequential => (0..count).map(f).collect(),
            Executor::Parallel { threads } => parallel_map(threads, count, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(threads: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_threads: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}
