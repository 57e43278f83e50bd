//! Column-parallel map used by the gradient kernels.
//!
//! Every column is computed by the same sequential code regardless of the
//! `parallel` feature, so results are bitwise identical with and without it.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_columns<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// True when the crate was built with rayon support.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
