//! Sequential / data-parallel dispatch for the hot kernels.
//!
//! Every parallel loop in the crate goes through these helpers. Work is
//! split into independent items (batch samples, channel planes, element
//! chunks) whose results land in disjoint output slots; any reduction
//! across items is performed afterwards in index order. Parallel and
//! sequential execution therefore produce bit-identical results.
//!
//! With the `parallel` feature disabled rayon is not linked at all. With
//! it enabled, [`set_sequential`] switches to the sequential path at run
//! time, which is what the benchmark suite uses to compare the two.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Minimum slice length worth splitting across threads for elementwise work.
pub const ELEMENTWISE_GRAIN: usize = 1 << 14;

/// Forces the sequential path even when the `parallel` feature is on.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// Whether the data-parallel path is active.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Calls `f(index, chunk)` for each `chunk`-sized piece of `out`.
pub fn for_each_chunk<T, F>(out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk == 0 || out.is_empty() {
        return;
    }
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Evaluates `f(i)` for `i in 0..n`, returning results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Elementwise map of `src` into a fresh vector.
pub fn map_slice<F>(src: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && src.len() >= ELEMENTWISE_GRAIN {
        use rayon::prelude::*;
        return src.par_iter().with_min_len(ELEMENTWISE_GRAIN).map(|&x| f(x)).collect();
    }
    src.iter().map(|&x| f(x)).collect()
}

/// Elementwise map producing two outputs per element.
pub fn map_slice2<F>(src: &[f64], f: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(f64) -> (f64, f64) + Sync + Send,
{
    let mut a = vec![0.0; src.len()];
    let mut b = vec![0.0; src.len()];
    let body = |(s, (a, b)): (&[f64], (&mut [f64], &mut [f64]))| {
        for ((&x, p), q) in s.iter().zip(a).zip(b) {
            (*p, *q) = f(x);
        }
    };
    #[cfg(feature = "parallel")]
    if is_parallel() && src.len() >= ELEMENTWISE_GRAIN {
        use rayon::prelude::*;
        src.par_chunks(ELEMENTWISE_GRAIN)
            .zip(a.par_chunks_mut(ELEMENTWISE_GRAIN).zip(b.par_chunks_mut(ELEMENTWISE_GRAIN)))
            .for_each(body);
        return (a, b);
    }
    body((src, (&mut a, &mut b)));
    (a, b)
}

/// Elementwise combination of two equal-length slices.
pub fn zip_map<F>(a: &[f64], b: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    debug_assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    if is_parallel() && a.len() >= ELEMENTWISE_GRAIN {
        use rayon::prelude::*;
        return a
            .par_iter()
            .zip(b)
            .with_min_len(ELEMENTWISE_GRAIN)
            .map(|(&x, &y)| f(x, y))
            .collect();
    }
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// Three-way elementwise combination (used by activation backward passes).
pub fn zip3_map<F>(a: &[f64], b: &[f64], c: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64, f64, f64) -> f64 + Sync + Send,
{
    debug_assert!(a.len() == b.len() && b.len() == c.len());
    #[cfg(feature = "parallel")]
    if is_parallel() && a.len() >= ELEMENTWISE_GRAIN {
        use rayon::prelude::*;
        return a
            .par_iter()
            .zip(b)
            .zip(c)
            .with_min_len(ELEMENTWISE_GRAIN)
            .map(|((&x, &y), &z)| f(x, y, z))
            .collect();
    }
    a.iter().zip(b).zip(c).map(|((&x, &y), &z)| f(x, y, z)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn chunked_map_matches_sequential() {
        let src: Vec<f64> = (0..(3 * ELEMENTWISE_GRAIN + 17)).map(|i| i as f64).collect();
        let out = map_slice(&src, |x| x * 0.5 + 1.0);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i as f64 * 0.5 + 1.0);
        }
    }
}
