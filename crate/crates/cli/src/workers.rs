//! Per-sample fan-out over the worker pool.

use anyhow::Result;

/// Sets the global worker count; `None` keeps the default of one worker per core.
#[cfg(feature = "parallel")]
pub fn configure(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            anyhow::bail!(mmgesture_core::Error::Validation("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
pub fn configure(workers: Option<usize>) -> Result<()> {
    if workers == Some(0) {
        anyhow::bail!(mmgesture_core::Error::Validation("--workers must be at least 1".into()));
    }
    Ok(())
}

/// Applies `f(index, item)` to every item; results keep input order.
#[cfg(feature = "parallel")]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R>(items: &[T], f: impl Fn(usize, &T) -> R) -> Vec<R> {
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}
