//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers dispatch to rayon; without
//! it they run plain loops. [`set_sequential`] forces the sequential path at
//! runtime, which the benches use to compare both code paths in one binary.
//!
//! Reductions are always computed over fixed-size chunks whose partial results
//! are combined in index order, so sums are bitwise identical for any thread
//! count and for the sequential path.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Raw pointer that may be shared with worker threads.
///
/// Callers must guarantee that concurrent accesses through it touch disjoint
/// elements and that the pointee outlives the parallel region.
#[derive(Clone, Copy)]
pub struct SyncPtr<T>(*mut T);

unsafe impl<T> Send for SyncPtr<T> {}
unsafe impl<T> Sync for SyncPtr<T> {}

impl<T> SyncPtr<T> {
    pub fn new(p: *mut T) -> Self {
        SyncPtr(p)
    }

    #[inline(always)]
    pub fn get(self) -> *mut T {
        self.0
    }
}

/// Chunk length used by the ordered reductions.
pub const REDUCE_CHUNK: usize = 8192;

/// Force (or release) the sequential code path at runtime.
pub fn set_sequential(sequential: bool) {
    FORCE_SEQUENTIAL.store(sequential, Ordering::SeqCst);
}

/// True when loops are dispatched to rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Configure the global thread pool. `None` keeps rayon's default.
///
/// Returns the number of worker threads in use. Calling this after the pool
/// has been initialised is harmless; the existing pool is kept.
pub fn init_threads(threads: Option<usize>) -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        1
    }
}

/// Number of threads the parallel path would use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            return rayon::current_num_threads();
        }
    }
    1
}

/// Apply `f(chunk_index, chunk)` to consecutive chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Call `f(i)` for every `i` in `0..n`.
pub fn for_each_index<F>(n: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            (0..n).into_par_iter().for_each(f);
            return;
        }
    }
    (0..n).for_each(f);
}

/// Collect `f(i)` for `i` in `0..n`, preserving order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Ordered reduction over `0..len`: `f` maps a chunk range to a partial value
/// and the partials are folded left to right with `combine`.
pub fn reduce_chunks<T, F, C>(len: usize, chunk: usize, init: T, f: F, combine: C) -> T
where
    T: Send + Clone,
    F: Fn(Range<usize>) -> T + Sync + Send,
    C: Fn(T, T) -> T,
{
    let chunk = chunk.max(1);
    let n_chunks = len.div_ceil(chunk);
    let partials = map_range(n_chunks, |c| {
        let start = c * chunk;
        f(start..(start + chunk).min(len))
    });
    partials.into_iter().fold(init, combine)
}

/// Ordered sum of `f` over fixed chunks of `0..len`.
pub fn sum_chunks<F>(len: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    reduce_chunks(len, REDUCE_CHUNK, 0.0, f, |a, b| a + b)
}

/// Dot product with a thread-count independent summation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_chunks(a.len(), |r| {
        let mut s = 0.0;
        for i in r {
            s += a[i] * b[i];
        }
        s
    })
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for_each_chunk_mut(y, REDUCE_CHUNK, |c, ys| {
        let off = c * REDUCE_CHUNK;
        for (k, v) in ys.iter_mut().enumerate() {
            *v += alpha * x[off + k];
        }
    });
}

/// `y = x + beta * y`
pub fn xpby(x: &[f64], beta: f64, y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for_each_chunk_mut(y, REDUCE_CHUNK, |c, ys| {
        let off = c * REDUCE_CHUNK;
        for (k, v) in ys.iter_mut().enumerate() {
            *v = x[off + k] + beta * *v;
        }
    });
}

/// Maximum absolute entry.
pub fn max_abs(a: &[f64]) -> f64 {
    reduce_chunks(
        a.len(),
        REDUCE_CHUNK,
        0.0f64,
        |r| a[r].iter().fold(0.0f64, |m, v| m.max(v.abs())),
        f64::max,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_sum_matches_between_paths() {
        let v: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin()).collect();
        let par = dot(&v, &v);
        set_sequential(true);
        let seq = dot(&v, &v);
        set_sequential(false);
        assert_eq!(par.to_bits(), seq.to_bits());
    }

    #[test]
    fn axpy_and_xpby() {
        let x = vec![1.0, 2.0, 3.0];
        let mut y = vec![1.0, 1.0, 1.0];
        axpy(2.0, &x, &mut y);
        assert_eq!(y, vec![3.0, 5.0, 7.0]);
        xpby(&x, 0.5, &mut y);
        assert_eq!(y, vec![2.5, 4.5, 6.5]);
        assert_eq!(max_abs(&[-4.0, 2.0]), 4.0);
    }

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
