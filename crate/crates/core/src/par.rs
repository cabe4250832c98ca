//! Index-ordered parallel maps with a sequential fallback.
//!
//! Every helper returns results in index order, so reductions done afterwards
//! are identical whichever path ran.

/// Map `f` over `0..n`. Runs on the rayon pool when `parallel` is true and the
/// crate was built with the `parallel` feature.
pub fn map_indexed<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel && n > 1 {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Map `f` over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], parallel: bool, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_indexed(items.len(), parallel, |i| f(&items[i]))
}

/// Whether the parallel path is compiled in.
pub const fn available() -> bool {
    cfg!(feature = "parallel")
}

/// Index of the first minimum. NaN entries never win.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
