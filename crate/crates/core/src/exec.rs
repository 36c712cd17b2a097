//! Data-parallel map helpers. With the `parallel` feature the work is spread
//! over the rayon pool; without it, or under `Execution::Sequential`, the same
//! closures run in order. Output order never depends on scheduling.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    let _ = exec;
    items.iter().map(f).collect()
}

pub fn map_range<U, F>(exec: Execution, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub fn try_map<T, U, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    map(exec, items, f).into_iter().collect()
}

pub fn try_map_range<U, E, F>(exec: Execution, n: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    map_range(exec, n, f).into_iter().collect()
}

/// Configure the global pool. Falls back to `RESOFLOW_THREADS` when `threads`
/// is `None`. Calling it twice is harmless.
pub fn init_threads(threads: Option<usize>) {
    let n = threads.or_else(|| {
        std::env::var("RESOFLOW_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
    });
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let xs: Vec<usize> = (0..257).collect();
        let a = map(Execution::Parallel, &xs, |x| x * x);
        let b = map(Execution::Sequential, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[16], 256);
    }

    #[test]
    fn try_map_reports_first_error_in_order() {
        let r: Result<Vec<usize>, usize> =
            try_map_range(
                Execution::Parallel,
                10,
                |i| if i >= 3 { Err(i) } else { Ok(i) },
            );
        assert_eq!(r, Err(3));
    }
}
