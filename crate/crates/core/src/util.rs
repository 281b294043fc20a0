//! Small shared helpers: deterministic float formatting and the parallel map
//! used by the sweep drivers.

/// Format with 17 significant digits, enough to round-trip an f64 exactly.
/// All CSV output goes through this so reruns are byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Multi-index of a flat tensor index, fastest direction first.
pub(crate) fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = Vec::with_capacity(shape.len());
    for &n in shape {
        idx.push(flat % n);
        flat /= n;
    }
    idx
}

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled
/// and `parallel` is true. The output order always matches the input order,
/// and each item is processed independently, so the result does not depend
/// on the execution mode.
pub fn maybe_par_map<T, U, F>(items: Vec<T>, parallel: bool, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            use rayon::prelude::*;
            return items.into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    items.into_iter().map(f).collect()
}
