//! Order-fixed reductions.
//!
//! Work is split into chunks whose boundaries depend only on the problem
//! size; each chunk is summed sequentially and the chunk results are combined
//! by pairwise summation in index order. The result is therefore identical
//! for every thread count.

use rayon::prelude::*;

use crate::scalar::Scalar;

/// Items per parallel chunk.
pub const CHUNK: usize = 256;

/// Pairwise (cascade) summation.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    if xs.len() <= 16 {
        return xs.iter().fold(T::zero(), |a, &b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise combination of equally long accumulators.
pub fn pairwise_reduce<T: Scalar>(mut parts: Vec<Vec<T>>, width: usize) -> Vec<T> {
    if parts.is_empty() {
        return vec![T::zero(); width];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = *x + y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Sums `body(i, acc)` over `i in 0..n` into a `width`-vector, in parallel
/// and deterministically. `body` adds its contribution into `acc`; an error
/// from any item aborts the sum.
pub fn chunked_sum<T, E, F>(n: usize, width: usize, chunk: usize, body: F) -> Result<Vec<T>, E>
where
    T: Scalar,
    E: Send,
    F: Fn(usize, &mut [T]) -> Result<(), E> + Sync,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let parts = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![T::zero(); width];
            for i in c * chunk..((c + 1) * chunk).min(n) {
                body(i, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, E>>()?;
    Ok(pairwise_reduce(parts, width))
}
