//! Per-group fan-out. With the `parallel` feature the closure runs on the
//! ambient rayon pool; results are always collected in group order.

#[cfg(feature = "parallel")]
pub(crate) fn map_groups<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if count < 2 || rayon::current_num_threads() < 2 {
        return (0..count).map(f).collect();
    }
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_groups<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
