//! Deterministic Monte Carlo.
//!
//! Sample `i` belongs to chunk `i / MC_CHUNK`; each chunk draws from its own
//! ChaCha8 stream of the user seed, so the sample set does not depend on the
//! number of worker threads and reductions are order-fixed.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::gauge::{HomogeneousNorm, Norm};
use crate::group::{Aabb, CarnotGroup, MAX_DIM};
use crate::scalar::Scalar;

/// Samples per random stream.
pub const MC_CHUNK: usize = 1 << 16;

/// A stochastic (or deterministic, with `std_err = 0`) estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub std_err: T,
    pub n: usize,
    pub seed: u64,
}

impl<T: Scalar> Estimate<T> {
    pub fn exact(value: T) -> Self {
        Self { value, std_err: T::zero(), n: 0, seed: 0 }
    }

    /// `|a - b| / sqrt(se_a^2 + se_b^2)`.
    pub fn z_score(&self, other: &Self) -> T {
        let se = (self.std_err * self.std_err + other.std_err * other.std_err).sqrt();
        (self.value - other.value).abs() / se
    }

    pub fn scale(self, c: T) -> Self {
        Self { value: self.value * c, std_err: self.std_err * c.abs(), ..self }
    }
}

/// Region sampled uniformly (via rejection from a bounding box).
#[derive(Clone, Debug, PartialEq)]
pub enum Target<T> {
    Box(Aabb<T>),
    /// `{N(x) < r}`.
    Ball { r: T },
    /// `{lo <= N(x) <= hi}`.
    Shell { lo: T, hi: T },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MCSampler<T> {
    pub seed: u64,
    pub n_samples: usize,
    pub target: Target<T>,
}

/// Raw first and second moments of a vector-valued integrand.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub n: usize,
    pub accepted: usize,
    pub sum: Vec<T>,
    pub sum_sq: Vec<T>,
    pub seed: u64,
}

impl<T: Scalar> Moments<T> {
    /// Mean over accepted samples with its standard error.
    pub fn conditional_mean(&self, k: usize) -> Estimate<T> {
        let m = T::from_usize_lossy(self.accepted.max(1));
        let mean = self.sum[k] / m;
        let var = (self.sum_sq[k] / m - mean * mean).max(T::zero());
        let se = (var / (m - T::one()).max(T::one())).sqrt();
        Estimate { value: mean, std_err: se, n: self.n, seed: self.seed }
    }

    /// `scale * mean` over all samples (rejected ones count as zero).
    pub fn integral(&self, k: usize, scale: T) -> Estimate<T> {
        let m = T::from_usize_lossy(self.n.max(1));
        let mean = self.sum[k] / m;
        let var = (self.sum_sq[k] / m - mean * mean).max(T::zero());
        let se = (var / (m - T::one()).max(T::one())).sqrt();
        Estimate { value: mean * scale, std_err: se * scale.abs(), n: self.n, seed: self.seed }
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Accumulates `k` integrand values over `n` draws. `draw(rng, out)` fills
/// `out` and returns whether the sample was accepted.
pub fn accumulate<T, F>(seed: u64, n: usize, k: usize, draw: F) -> Moments<T>
where
    T: Scalar,
    F: Fn(&mut ChaCha8Rng, &mut [T]) -> bool + Sync,
{
    let n_chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<(usize, Vec<T>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut acc = vec![T::zero(); 2 * k + 1];
            let mut out = vec![T::zero(); k];
            let cnt = ((c + 1) * MC_CHUNK).min(n) - c * MC_CHUNK;
            let mut accepted = 0usize;
            for _ in 0..cnt {
                if draw(&mut rng, &mut out) {
                    accepted += 1;
                    for j in 0..k {
                        acc[j] = acc[j] + out[j];
                        acc[k + j] = acc[k + j] + out[j] * out[j];
                    }
                }
            }
            (accepted, acc)
        })
        .collect();
    let accepted = parts.iter().map(|p| p.0).sum();
    let tot = super::sum::pairwise_reduce(parts.into_iter().map(|p| p.1).collect(), 2 * k + 1);
    Moments { n, accepted, sum: tot[..k].to_vec(), sum_sq: tot[k..2 * k].to_vec(), seed }
}

/// Uniform point of `bbox` written into `out`.
#[inline]
pub fn uniform_in_box<T: Scalar>(rng: &mut ChaCha8Rng, bbox: &Aabb<T>, out: &mut [T]) {
    for i in 0..out.len() {
        let u: f64 = rng.random();
        out[i] = bbox.lo[i] + (bbox.hi[i] - bbox.lo[i]) * T::lit(u);
    }
}

impl<T: Scalar> MCSampler<T> {
    pub fn new(seed: u64, n_samples: usize, target: Target<T>) -> Self {
        Self { seed, n_samples, target }
    }

    fn region(&self, norm: &Norm<T>) -> (Aabb<T>, T, T) {
        match &self.target {
            Target::Box(b) => (b.clone(), -T::one(), T::infinity()),
            Target::Ball { r } => (norm.bounding_box(*r), -T::one(), *r),
            Target::Shell { lo, hi } => (norm.bounding_box(*hi), *lo, *hi),
        }
    }

    /// Integrates the `k`-vector integrand over the target region. `f(x, n_x,
    /// out)` receives the point and its norm.
    pub fn integrate_multi<F>(&self, g: &CarnotGroup<T>, norm: &Norm<T>, k: usize, f: F) -> Result<Vec<Estimate<T>>>
    where
        F: Fn(&[T], T, &mut [T]) + Sync,
    {
        norm.check_group(g)?;
        let (bbox, lo, hi) = self.region(norm);
        let n = g.dim();
        let vol = bbox.volume();
        let is_box = matches!(self.target, Target::Box(_));
        let m = accumulate(self.seed, self.n_samples, k, |rng, out| {
            let mut x = [T::zero(); MAX_DIM];
            uniform_in_box(rng, &bbox, &mut x[..n]);
            let r = if is_box { T::zero() } else { norm.eval(&x[..n]) };
            if !is_box && (r < lo || r > hi || (r == hi && matches!(self.target, Target::Ball { .. }))) {
                return false;
            }
            f(&x[..n], r, out);
            true
        });
        Ok((0..k).map(|j| m.integral(j, vol)).collect())
    }

    pub fn integrate<F>(&self, g: &CarnotGroup<T>, norm: &Norm<T>, f: F) -> Result<Estimate<T>>
    where
        F: Fn(&[T]) -> T + Sync,
    {
        Ok(self.integrate_multi(g, norm, 1, |x, _, out| out[0] = f(x))?[0])
    }

    /// Volume of the target region.
    pub fn volume(&self, g: &CarnotGroup<T>, norm: &Norm<T>) -> Result<Estimate<T>> {
        self.integrate(g, norm, |_| T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_disc_area() {
        let g = CarnotGroup::<f64>::euclidean(2).unwrap();
        let s = MCSampler::new(11, 200_000, Target::Ball { r: 1.0 });
        let e = s.volume(&g, &Norm::euclidean(2)).unwrap();
        assert!((e.value - std::f64::consts::PI).abs() < 4.0 * e.std_err);
        assert!(e.std_err < 0.01);
    }

    #[test]
    fn same_seed_same_bits_different_seed_different_bits() {
        let g = CarnotGroup::<f64>::heisenberg();
        let n = Norm::Koranyi;
        let a = MCSampler::new(5, 70_000, Target::Ball { r: 1.0 }).volume(&g, &n).unwrap();
        let b = MCSampler::new(5, 70_000, Target::Ball { r: 1.0 }).volume(&g, &n).unwrap();
        let c = MCSampler::new(6, 70_000, Target::Ball { r: 1.0 }).volume(&g, &n).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn box_mean() {
        let g = CarnotGroup::<f64>::euclidean(1).unwrap();
        let s = MCSampler::new(1, 100_000, Target::Box(Aabb::new(vec![0.0], vec![2.0]).unwrap()));
        let e = s.integrate(&g, &Norm::euclidean(1), |x| x[0]).unwrap();
        assert_abs_diff_eq!(e.value, 2.0, epsilon = 4.0 * e.std_err);
    }
}
