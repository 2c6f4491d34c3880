//! Deterministic quadrature for the polar measure `sigma` on the unit
//! sphere `S = {N = 1}`.
//!
//! Every dilation orbit meets the boundary of a centred box
//! `prod_i [-b_i, b_i]` exactly once; `b` is taken from the bounding box of
//! the unit ball so that the faces hug the sphere. On the face
//! `x_i = +-b_i`, parametrised by `w` with `phi_l = b_l w_l`, a point is
//! pushed to the sphere as `y = delta_{1/N(phi)} phi` and the polar
//! decomposition of Lebesgue measure gives
//! `d sigma(y) = alpha_i (prod_l b_l) N(phi(w))^-Q dw`. Each face carries a
//! tensor Gauss-Legendre rule, split at `w_l = 0` so that no node sits on a
//! coordinate plane.

use crate::error::{Error, Result};
use crate::gauge::{HomogeneousNorm, Norm};
use crate::group::CarnotGroup;
use crate::quad::radial::gauss_panel;
use crate::scalar::Scalar;

/// Weighted directions on the unit sphere together with the norm's
/// horizontal gradient at each of them.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereRule<T> {
    pub n: usize,
    pub m1: usize,
    pub q: usize,
    dirs: Vec<T>,
    pub weights: Vec<T>,
    grads: Vec<T>,
}

impl<T: Scalar> SphereRule<T> {
    /// `k` Gauss nodes per half-edge, so `2n (2k)^(n-1)` directions.
    pub fn new(g: &CarnotGroup<T>, norm: &Norm<T>, k: usize) -> Result<Self> {
        norm.check_group(g)?;
        if k == 0 {
            return Err(Error::InvalidParameter("sphere rule needs at least one node per half-edge".into()));
        }
        let n = g.dim();
        let m1 = g.m1();
        let q = g.homogeneous_dim();
        let mut edge = gauss_panel(-T::one(), T::zero(), k);
        edge.extend(gauss_panel(T::zero(), T::one(), k));
        let per_face = edge.len().pow((n - 1) as u32);
        let mut dirs = Vec::with_capacity(2 * n * per_face * n);
        let mut weights = Vec::with_capacity(2 * n * per_face);
        let mut grads = Vec::with_capacity(2 * n * per_face * m1);
        let b = norm.bounding_box(T::one()).hi;
        let b_prod = b.iter().fold(T::one(), |a, &v| a * v);
        let mut phi = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        for face in 0..n {
            let alpha = T::from_usize_lossy(g.weights()[face] as usize);
            for sign in [-T::one(), T::one()] {
                for idx in 0..per_face {
                    let mut rem = idx;
                    let mut w = alpha * b_prod;
                    for j in 0..n {
                        if j == face {
                            phi[j] = sign * b[j];
                            continue;
                        }
                        let (x, wx) = edge[rem % edge.len()];
                        rem /= edge.len();
                        phi[j] = x * b[j];
                        w = w * wx;
                    }
                    let r = norm.eval(&phi);
                    g.dilate_into(T::one() / r, &phi, &mut y);
                    let gr = norm.horizontal_grad(g, &y)?;
                    dirs.extend_from_slice(&y);
                    weights.push(w * r.powi(-(q as i32)));
                    grads.extend_from_slice(&gr);
                }
            }
        }
        Ok(Self { n, m1, q, dirs, weights, grads })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn dir(&self, j: usize) -> &[T] {
        &self.dirs[j * self.n..(j + 1) * self.n]
    }

    /// `pi(y_j)`: the horizontal coordinates of the direction.
    #[inline]
    pub fn horizontal(&self, j: usize) -> &[T] {
        &self.dirs[j * self.n..j * self.n + self.m1]
    }

    #[inline]
    pub fn grad(&self, j: usize) -> &[T] {
        &self.grads[j * self.m1..(j + 1) * self.m1]
    }

    /// `sigma(S)`.
    pub fn total(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// `|B(0, 1)| = sigma(S) / Q`.
    pub fn ball_volume(&self) -> T {
        self.total() / T::from_usize_lossy(self.q)
    }

    pub fn integrate<F: Fn(&[T]) -> T>(&self, f: F) -> T {
        (0..self.len()).fold(T::zero(), |a, j| a + self.weights[j] * f(self.dir(j)))
    }

    /// `sigma`-average.
    pub fn average<F: Fn(&[T]) -> T>(&self, f: F) -> T {
        self.integrate(f) / self.total()
    }

    /// `max_j |grad N(y_j)|`.
    pub fn max_grad_norm(&self) -> T {
        (0..self.len())
            .map(|j| self.grad(j).iter().fold(T::zero(), |a, &v| a + v * v).sqrt())
            .fold(T::zero(), T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn circle_and_sphere_lengths() {
        let g2 = CarnotGroup::<f64>::euclidean(2).unwrap();
        let s2 = SphereRule::new(&g2, &Norm::euclidean(2), 8).unwrap();
        assert_abs_diff_eq!(s2.total(), 2.0 * PI, epsilon = 1e-9);
        assert_abs_diff_eq!(s2.integrate(|y| y[0] * y[0]), PI, epsilon = 1e-9);
        let g3 = CarnotGroup::<f64>::euclidean(3).unwrap();
        let s3 = SphereRule::new(&g3, &Norm::euclidean(3), 8).unwrap();
        assert_abs_diff_eq!(s3.total(), 4.0 * PI, epsilon = 1e-8);
        let g1 = CarnotGroup::<f64>::euclidean(1).unwrap();
        let s1 = SphereRule::new(&g1, &Norm::euclidean(1), 3).unwrap();
        assert_eq!(s1.len(), 2);
        assert_abs_diff_eq!(s1.total(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn koranyi_ball_volume() {
        // |B(1)| = pi^2 / 8 by slicing in x3.
        let g = CarnotGroup::<f64>::heisenberg();
        let s = SphereRule::new(&g, &Norm::Koranyi, 8).unwrap();
        assert_abs_diff_eq!(s.ball_volume(), PI * PI / 8.0, epsilon = 1e-8);
        assert!(s.max_grad_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn directions_lie_on_the_sphere() {
        let g = CarnotGroup::<f64>::heisenberg();
        let s = SphereRule::new(&g, &Norm::Koranyi, 3).unwrap();
        for j in 0..s.len() {
            assert_abs_diff_eq!(Norm::Koranyi.eval(s.dir(j)), 1.0, epsilon = 1e-14);
        }
        assert_eq!(s.len(), 6 * 36);
    }
}
