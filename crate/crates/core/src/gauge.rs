//! Homogeneous norms and their horizontal gradients.

use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::{Aabb, CarnotGroup, HorizontalVec, MAX_DIM};
use crate::scalar::Scalar;

/// Default central-difference step for horizontal derivatives.
pub const FD_STEP: f64 = 1e-4;

/// A homogeneous norm `N` on a Carnot group: `N(delta_l x) = l N(x)`,
/// `N(x^-1) = N(x)` and `N(x . y) <= N(x) + N(y)`.
pub trait HomogeneousNorm<T: Scalar>: Send + Sync {
    fn eval(&self, x: &[T]) -> T;

    /// Euclidean partial derivatives. Returns `false` when no analytic
    /// gradient is available or `x` is a non-differentiability point.
    fn euclidean_grad(&self, _x: &[T], _out: &mut [T]) -> bool {
        false
    }

    /// Coordinate box containing the closed ball `B(0, r)`.
    fn bounding_box(&self, r: T) -> Aabb<T>;

    /// Invariance under rotations of the horizontal layer.
    fn rotation_invariant(&self) -> bool {
        false
    }

    fn label(&self) -> String;

    /// Checks that the norm is homogeneous for the dilations of `group`.
    fn check_group(&self, _group: &CarnotGroup<T>) -> Result<()> {
        Ok(())
    }
}

/// The norms shipped with the crate, plus an escape hatch for user norms.
#[derive(Clone)]
pub enum Norm<T> {
    /// `|x|_2` on `R^n`.
    Euclidean { n: usize },
    /// `(sum_i |x_i / s_i|^q)^(1/q)` on `R^n`.
    Lq { q: T, scales: Vec<T> },
    /// Cygan-Koranyi norm on the first Heisenberg group.
    Koranyi,
    /// `(|x_h|^4 + c |x_v|^2)^(1/4)` on a step-2 group of dimension `n` with
    /// first layer of dimension `m1`.
    Gauge { m1: usize, n: usize, c: T },
    Custom(Arc<dyn HomogeneousNorm<T>>),
}

impl<T: fmt::Debug> fmt::Debug for Norm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::Euclidean { n } => write!(f, "Euclidean({n})"),
            Norm::Lq { q, scales } => write!(f, "Lq({q:?}, {scales:?})"),
            Norm::Koranyi => write!(f, "Koranyi"),
            Norm::Gauge { m1, n, c } => write!(f, "Gauge({m1}, {n}, {c:?})"),
            Norm::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[inline]
fn gauge_eval<T: Scalar>(x: &[T], m1: usize, c: T) -> T {
    let h2 = x[..m1].iter().fold(T::zero(), |a, &v| a + v * v);
    let v2 = x[m1..].iter().fold(T::zero(), |a, &v| a + v * v);
    (h2 * h2 + c * v2).sqrt().sqrt()
}

#[inline]
fn gauge_grad<T: Scalar>(x: &[T], m1: usize, c: T, out: &mut [T]) -> bool {
    let h2 = x[..m1].iter().fold(T::zero(), |a, &v| a + v * v);
    let v2 = x[m1..].iter().fold(T::zero(), |a, &v| a + v * v);
    let n4 = h2 * h2 + c * v2;
    if n4 == T::zero() {
        return false;
    }
    let n = n4.sqrt().sqrt();
    let inv3 = T::one() / (n * n * n);
    for i in 0..m1 {
        out[i] = h2 * x[i] * inv3;
    }
    let half_c = c * T::lit(0.5);
    for i in m1..x.len() {
        out[i] = half_c * x[i] * inv3;
    }
    true
}

impl<T: Scalar> HomogeneousNorm<T> for Norm<T> {
    #[inline]
    fn eval(&self, x: &[T]) -> T {
        match self {
            Norm::Euclidean { .. } => x.iter().fold(T::zero(), |a, &v| a + v * v).sqrt(),
            Norm::Lq { q, scales } => {
                let s = x
                    .iter()
                    .zip(scales)
                    .fold(T::zero(), |a, (&v, &sc)| a + (v / sc).abs().powf(*q));
                s.powf(T::one() / *q)
            }
            Norm::Koranyi => gauge_eval(x, 2, T::lit(16.0)),
            Norm::Gauge { m1, c, .. } => gauge_eval(x, *m1, *c),
            Norm::Custom(n) => n.eval(x),
        }
    }

    fn euclidean_grad(&self, x: &[T], out: &mut [T]) -> bool {
        match self {
            Norm::Euclidean { .. } => {
                let r = self.eval(x);
                if r == T::zero() {
                    return false;
                }
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = v / r;
                }
                true
            }
            Norm::Lq { q, scales } => {
                let r = self.eval(x);
                if r == T::zero() {
                    return false;
                }
                let rq = r.powf(T::one() - *q);
                for ((o, &v), &sc) in out.iter_mut().zip(x).zip(scales) {
                    let u = v / sc;
                    *o = u.signum() * u.abs().powf(*q - T::one()) * rq / sc;
                    if u == T::zero() {
                        *o = T::zero();
                    }
                }
                true
            }
            Norm::Koranyi => gauge_grad(x, 2, T::lit(16.0), out),
            Norm::Gauge { m1, c, .. } => gauge_grad(x, *m1, *c, out),
            Norm::Custom(n) => n.euclidean_grad(x, out),
        }
    }

    fn bounding_box(&self, r: T) -> Aabb<T> {
        match self {
            Norm::Euclidean { n } => Aabb::symmetric(vec![r; *n]),
            Norm::Lq { scales, .. } => Aabb::symmetric(scales.iter().map(|&s| s * r).collect()),
            Norm::Koranyi => Aabb::symmetric(vec![r, r, r * r * T::lit(0.25)]),
            Norm::Gauge { m1, n, c } => {
                let mut hw = vec![r; *m1];
                hw.resize(*n, r * r / c.sqrt());
                Aabb::symmetric(hw)
            }
            Norm::Custom(n) => n.bounding_box(r),
        }
    }

    fn rotation_invariant(&self) -> bool {
        match self {
            Norm::Euclidean { .. } | Norm::Koranyi => true,
            // Horizontal rotations extend to automorphisms preserving |x_v|
            // when the second layer is one-dimensional.
            Norm::Gauge { m1, n, .. } => *m1 == 2 && *n == 3,
            Norm::Lq { q, scales } => {
                *q == T::lit(2.0) && scales.iter().all(|&s| s == scales[0])
            }
            Norm::Custom(n) => n.rotation_invariant(),
        }
    }

    fn label(&self) -> String {
        match self {
            Norm::Euclidean { .. } => "euclidean".into(),
            Norm::Lq { q, .. } => format!("l{}", q.as_f64()),
            Norm::Koranyi => "koranyi".into(),
            Norm::Gauge { c, .. } => format!("gauge(c={})", c.as_f64()),
            Norm::Custom(n) => n.label(),
        }
    }

    fn check_group(&self, g: &CarnotGroup<T>) -> Result<()> {
        let fail = |reason: &str| Err(Error::IncompatibleNorm { norm: self.label(), reason: reason.into() });
        match self {
            Norm::Euclidean { n } => {
                if !g.is_euclidean() {
                    return fail("the Euclidean norm is not homogeneous for step-2 dilations");
                }
                if *n != g.dim() {
                    return Err(Error::DimensionMismatch { expected: g.dim(), got: *n });
                }
                Ok(())
            }
            Norm::Lq { scales, .. } => {
                if !g.is_euclidean() {
                    return fail("l^q norms are only homogeneous on Euclidean groups");
                }
                if scales.len() != g.dim() {
                    return Err(Error::DimensionMismatch { expected: g.dim(), got: scales.len() });
                }
                Ok(())
            }
            Norm::Koranyi => {
                if !g.is_heisenberg() {
                    return fail("the Koranyi norm is defined on the first Heisenberg group only");
                }
                Ok(())
            }
            Norm::Gauge { m1, n, .. } => {
                if *m1 != g.m1() || *n != g.dim() {
                    return fail("gauge built for a different layer structure");
                }
                Ok(())
            }
            Norm::Custom(n) => n.check_group(g),
        }
    }
}

impl<T: Scalar> Norm<T> {
    pub fn euclidean(n: usize) -> Self {
        Norm::Euclidean { n }
    }

    pub fn lq(q: T, scales: Vec<T>) -> Result<Self> {
        if !(q >= T::one()) {
            return Err(Error::InvalidParameter(format!("l^q norm needs q >= 1, got {q}")));
        }
        if scales.is_empty() || scales.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::InvalidParameter("l^q scales must be positive".into()));
        }
        Ok(Norm::Lq { q, scales })
    }

    pub fn koranyi() -> Self {
        Norm::Koranyi
    }

    /// Koranyi-type gauge for a step-2 group. With `c = None` the weight is
    /// `16 / b^2`, `b` the largest operator norm of the correction matrices,
    /// which gives back the Koranyi norm on the Heisenberg group.
    pub fn gauge(g: &CarnotGroup<T>, c: Option<T>) -> Result<Self> {
        let c = match c {
            Some(c) if c > T::zero() => c,
            Some(c) => return Err(Error::InvalidParameter(format!("gauge weight must be positive, got {c}"))),
            None => {
                let b = g.corrections().iter().map(|m| op_norm(m, g.m1())).fold(T::zero(), T::max);
                if b > T::zero() {
                    T::lit(16.0) / (b * b)
                } else {
                    T::one()
                }
            }
        };
        Ok(Norm::Gauge { m1: g.m1(), n: g.dim(), c })
    }

    /// The natural norm of a group: Euclidean on `R^n`, Koranyi on the
    /// Heisenberg group and the step-2 gauge otherwise.
    pub fn default_for(g: &CarnotGroup<T>) -> Result<Self> {
        if g.is_euclidean() {
            Ok(Self::euclidean(g.dim()))
        } else if g.is_heisenberg() {
            Ok(Self::koranyi())
        } else {
            Self::gauge(g, None)
        }
    }

    /// `sup |grad_G N|` when it is known in closed form.
    pub fn grad_sup_known(&self) -> Option<T> {
        match self {
            Norm::Euclidean { .. } | Norm::Koranyi => Some(T::one()),
            _ => None,
        }
    }

    /// Horizontal gradient from the analytic Euclidean gradient, if any.
    #[inline]
    pub fn analytic_horizontal_grad(&self, g: &CarnotGroup<T>, x: &[T], out: &mut [T]) -> bool {
        let mut e = [T::zero(); MAX_DIM];
        let n = g.dim();
        if !self.euclidean_grad(x, &mut e[..n]) {
            return false;
        }
        g.pull_back_into(x, &e[..n], out);
        true
    }

    /// Horizontal gradient: analytic when available, otherwise a central
    /// difference evaluated on the unit sphere (the gradient is invariant
    /// under dilations).
    pub fn horizontal_grad(&self, g: &CarnotGroup<T>, x: &[T]) -> Result<HorizontalVec<T>> {
        g.check_point(x)?;
        let mut out = vec![T::zero(); g.m1()];
        if self.analytic_horizontal_grad(g, x, &mut out) {
            return Ok(HorizontalVec(out));
        }
        let r = self.eval(x);
        if !(r > T::zero()) {
            return Err(Error::GradientAtOrigin);
        }
        let y = g.dilate(T::one() / r, x)?;
        grad_norm_fd(g, self, &y, T::lit(FD_STEP))
    }
}

fn op_norm<T: Scalar>(b: &[T], m: usize) -> T {
    // Power iteration on B^T B.
    let mut v = vec![T::one(); m];
    let mut lambda = T::zero();
    for _ in 0..200 {
        let bv: Vec<T> = (0..m).map(|i| (0..m).fold(T::zero(), |a, j| a + b[i * m + j] * v[j])).collect();
        let w: Vec<T> = (0..m).map(|j| (0..m).fold(T::zero(), |a, i| a + b[i * m + j] * bv[i])).collect();
        let nw = w.iter().fold(T::zero(), |a, &t| a + t * t).sqrt();
        if nw == T::zero() {
            return T::zero();
        }
        lambda = nw / v.iter().fold(T::zero(), |a, &t| a + t * t).sqrt();
        v = w.into_iter().map(|t| t / nw).collect();
    }
    lambda.sqrt()
}

/// The Cygan-Koranyi norm `((x1^2 + x2^2)^2 + 16 x3^2)^(1/4)`.
pub fn koranyi_norm<T: Scalar>(x: &[T]) -> Result<T> {
    if x.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: x.len() });
    }
    Ok(gauge_eval(x, 2, T::lit(16.0)))
}

/// Closed-form horizontal gradient of the Koranyi norm,
/// `N^-3 ((x1^2+x2^2) x1 - 4 x2 x3, (x1^2+x2^2) x2 + 4 x1 x3)`.
pub fn koranyi_grad<T: Scalar>(x: &[T]) -> Result<HorizontalVec<T>> {
    let n = koranyi_norm(x)?;
    if n == T::zero() {
        return Err(Error::GradientAtOrigin);
    }
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let r2 = x1 * x1 + x2 * x2;
    let four = T::lit(4.0);
    let inv3 = T::one() / (n * n * n);
    Ok(HorizontalVec(vec![(r2 * x1 - four * x2 * x3) * inv3, (r2 * x2 + four * x1 * x3) * inv3]))
}

/// Horizontal gradient of `N` by central differences along the frame.
pub fn grad_norm_fd<T: Scalar, N: HomogeneousNorm<T> + ?Sized>(
    g: &CarnotGroup<T>,
    norm: &N,
    x: &[T],
    step: T,
) -> Result<HorizontalVec<T>> {
    g.check_point(x)?;
    let r = norm.eval(x);
    if !(r > T::lit(10.0) * step) {
        return Err(Error::TooCloseToOrigin { norm_value: r.as_f64(), step: step.as_f64() });
    }
    let f = |y: &[T]| norm.eval(y);
    let out = (0..g.m1())
        .map(|i| g.x_derivative(&f, i, x, step))
        .collect::<Result<Vec<T>>>()?;
    Ok(HorizontalVec(out))
}

/// Result of [`norm_diagnostics`].
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct NormDiagnostics {
    pub samples: usize,
    pub seed: u64,
    pub min_grad: f64,
    pub max_grad: f64,
    /// `sup |pi(y)|` over the sampled unit sphere: `|pi(h)| <= C N(h)`.
    pub max_horizontal_projection: f64,
    pub triangle_violations: usize,
    pub symmetry_violations: usize,
    pub homogeneity_violations: usize,
    pub max_triangle_excess: f64,
}

/// Uniform point of the coordinate box, then pushed onto the unit sphere.
fn sample_unit_sphere<T: Scalar>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    bbox: &Aabb<T>,
    rng: &mut ChaCha8Rng,
    out: &mut [T],
) -> bool {
    for i in 0..g.dim() {
        let u: f64 = rng.random();
        out[i] = bbox.lo[i] + (bbox.hi[i] - bbox.lo[i]) * T::lit(u);
    }
    let r = norm.eval(out);
    if !(r > T::lit(1e-6)) {
        return false;
    }
    let y = out.to_vec();
    g.dilate_into(T::one() / r, &y, out);
    true
}

/// Sampled quality report for a norm: gradient range on the unit sphere and
/// counts of violated norm axioms.
pub fn norm_diagnostics<T: Scalar>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    samples: usize,
    seed: u64,
) -> Result<NormDiagnostics> {
    norm.check_group(g)?;
    let n = g.dim();
    let m1 = g.m1();
    let bbox = norm.bounding_box(T::one());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gmin, mut gmax, mut pmax) = (f64::INFINITY, 0.0f64, 0.0f64);
    let grad_at = |y: &[T], gmin: &mut f64, gmax: &mut f64, pmax: &mut f64| -> Result<()> {
        let gr = norm.horizontal_grad(g, y)?;
        let v = gr.norm().as_f64();
        *gmin = gmin.min(v);
        *gmax = gmax.max(v);
        let p = y[..m1].iter().fold(0.0, |a, &t| a + t.as_f64() * t.as_f64()).sqrt();
        *pmax = pmax.max(p);
        Ok(())
    };
    // Coordinate axes first: that is where gauges typically degenerate.
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut e = vec![T::zero(); n];
            e[i] = T::lit(s);
            let r = norm.eval(&e);
            let y = g.dilate(T::one() / r, &e)?;
            grad_at(&y, &mut gmin, &mut gmax, &mut pmax)?;
        }
    }
    let mut y = vec![T::zero(); n];
    let mut taken = 0;
    while taken < samples {
        if !sample_unit_sphere(g, norm, &bbox, &mut rng, &mut y) {
            continue;
        }
        grad_at(&y, &mut gmin, &mut gmax, &mut pmax)?;
        taken += 1;
    }

    let tol = T::lit(1e-12);
    let (mut tri, mut sym, mut hom) = (0, 0, 0);
    let mut excess = 0.0f64;
    let mut x = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut xy = vec![T::zero(); n];
    for _ in 0..samples {
        for i in 0..n {
            x[i] = bbox.lo[i] + (bbox.hi[i] - bbox.lo[i]) * T::lit(rng.random::<f64>());
            z[i] = bbox.lo[i] + (bbox.hi[i] - bbox.lo[i]) * T::lit(rng.random::<f64>());
        }
        let (nx, nz) = (norm.eval(&x), norm.eval(&z));
        g.multiply_into(&x, &z, &mut xy);
        let d = norm.eval(&xy) - nx - nz;
        if d > tol * (nx + nz) {
            tri += 1;
        }
        excess = excess.max(d.as_f64());
        let inv: Vec<T> = x.iter().map(|&v| -v).collect();
        if (norm.eval(&inv) - nx).abs() > tol * (T::one() + nx) {
            sym += 1;
        }
        let lambda = T::lit(0.25 + 3.0 * rng.random::<f64>());
        g.dilate_into(lambda, &x, &mut xy);
        if (norm.eval(&xy) - lambda * nx).abs() > tol * (T::one() + lambda * nx) {
            hom += 1;
        }
    }
    Ok(NormDiagnostics {
        samples,
        seed,
        min_grad: gmin,
        max_grad: gmax,
        max_horizontal_projection: pmax,
        triangle_violations: tri,
        symmetry_violations: sym,
        homogeneity_violations: hom,
        max_triangle_excess: excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn koranyi_values() {
        assert_eq!(koranyi_norm(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(koranyi_norm(&[0.0, 0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(koranyi_norm(&[0.0f64, 0.0, 0.0]).unwrap(), 0.0);
        assert!(koranyi_norm(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn koranyi_gradient_closed_form() {
        assert_eq!(koranyi_grad(&[1.0, 0.0, 0.0]).unwrap().0, vec![1.0, 0.0]);
        assert_eq!(koranyi_grad(&[0.0, 0.0, 1.0]).unwrap().0, vec![0.0, 0.0]);
        assert!(matches!(koranyi_grad(&[0.0f64; 3]), Err(Error::GradientAtOrigin)));
        let g = CarnotGroup::<f64>::heisenberg();
        let x = [1.0, 1.0, 1.0];
        let fd = grad_norm_fd(&g, &Norm::Koranyi, &x, 1e-5).unwrap();
        let cf = koranyi_grad(&x).unwrap();
        assert_abs_diff_eq!(fd[0], cf[0], epsilon = 1e-8);
        assert_abs_diff_eq!(fd[1], cf[1], epsilon = 1e-8);
        let via_frame = Norm::Koranyi.horizontal_grad(&g, &x).unwrap();
        assert_abs_diff_eq!(via_frame[0], cf[0], epsilon = 1e-14);
        assert_abs_diff_eq!(via_frame[1], cf[1], epsilon = 1e-14);
    }

    #[test]
    fn euclidean_eikonal() {
        let g = CarnotGroup::<f64>::euclidean(2).unwrap();
        let gr = grad_norm_fd(&g, &Norm::euclidean(2), &[0.6, 0.8], 1e-5).unwrap();
        assert_abs_diff_eq!(gr[0], 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(gr[1], 0.8, epsilon = 1e-9);
        assert_abs_diff_eq!(gr.norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fd_refuses_points_near_origin() {
        let g = CarnotGroup::<f64>::heisenberg();
        assert!(matches!(
            grad_norm_fd(&g, &Norm::Koranyi, &[1e-5, 0.0, 0.0], 1e-4),
            Err(Error::TooCloseToOrigin { .. })
        ));
    }

    #[test]
    fn incompatible_norms_are_rejected() {
        let h = CarnotGroup::<f64>::heisenberg();
        assert!(Norm::euclidean(3).check_group(&h).is_err());
        let r2 = CarnotGroup::<f64>::euclidean(2).unwrap();
        assert!(Norm::<f64>::Koranyi.check_group(&r2).is_err());
        assert!(Norm::lq(4.0, vec![1.0, 2.0]).unwrap().check_group(&r2).is_ok());
        assert!(Norm::lq(0.5, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn default_gauge_is_koranyi_on_heisenberg() {
        let h = CarnotGroup::<f64>::heisenberg();
        let gauge = Norm::gauge(&h, None).unwrap();
        for x in [[0.3, -0.2, 0.7], [1.0, 2.0, -3.0]] {
            assert_abs_diff_eq!(gauge.eval(&x), koranyi_norm(&x).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn diagnostics_koranyi_and_euclidean() {
        let h = CarnotGroup::<f64>::heisenberg();
        let d = norm_diagnostics(&h, &Norm::Koranyi, 2000, 7).unwrap();
        assert_eq!(d.min_grad, 0.0);
        assert!(d.max_grad <= 1.0 + 1e-9 && d.max_grad > 0.99);
        assert_eq!(d.triangle_violations, 0);
        assert_eq!(d.symmetry_violations, 0);
        assert_eq!(d.homogeneity_violations, 0);
        let e = CarnotGroup::<f64>::euclidean(3).unwrap();
        let d = norm_diagnostics(&e, &Norm::euclidean(3), 500, 1).unwrap();
        assert_abs_diff_eq!(d.min_grad, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.max_grad, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn generic_step2_gauge_passes_sampled_axioms() {
        // Free step-2 group on three generators.
        let b = |i: usize, j: usize| {
            let mut m = vec![0.0; 9];
            m[i * 3 + j] = 1.0;
            m[j * 3 + i] = -1.0;
            m
        };
        let g = CarnotGroup::<f64>::step2(3, vec![b(0, 1), b(0, 2), b(1, 2)]).unwrap();
        let n = Norm::gauge(&g, None).unwrap();
        let d = norm_diagnostics(&g, &n, 3000, 3).unwrap();
        assert_eq!(d.symmetry_violations, 0);
        assert_eq!(d.homogeneity_violations, 0);
        assert_eq!(d.triangle_violations, 0, "excess {}", d.max_triangle_excess);
    }
}
