//! Row-parallel helpers. With the `parallel` feature rows run on the rayon
//! pool; otherwise serially. Each row is written by exactly one task, so the
//! output does not depend on scheduling.

use alloc::vec::Vec;

use crate::error::Result;

/// Fills `out` (row-major, `width` per row) by calling `f(row, slice)` for
/// every row. The first error in row order is returned.
pub fn fill_rows<T, F>(out: &mut [T], width: usize, f: F) -> Result<()>
where
    T: Send,
    F: Fn(usize, &mut [T]) -> Result<()> + Sync + Send,
{
    if width == 0 {
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    let results: Vec<Result<()>> = {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .map(|(y, row)| f(y, row))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<()>> = out
        .chunks_mut(width)
        .enumerate()
        .map(|(y, row)| f(y, row))
        .collect();
    results.into_iter().collect()
}

/// `(0..n).map(f)` evaluated in parallel when available, in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
