//! Test fields with hand-coded Euclidean partials.

use crate::error::{Error, Result};
use crate::gauge::{HomogeneousNorm, Norm};
use crate::group::{Aabb, CarnotGroup, HorizontalVec, MAX_DIM};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    Indicator,
}

/// A scalar function on the group.
pub trait ScalarField<T: Scalar>: Send + Sync {
    fn eval(&self, x: &[T]) -> T;

    /// Exact Euclidean partials; `false` for fields without a gradient.
    fn euclidean_grad(&self, x: &[T], out: &mut [T]) -> bool;

    /// Coordinate box outside of which the field vanishes (`None` when the
    /// support is unbounded).
    fn support_box(&self) -> Option<Aabb<T>>;

    fn smoothness(&self) -> Smoothness {
        Smoothness::Smooth
    }

    /// For indicators of balls `B_N(c, r)`: `(c, r)`.
    fn ball(&self) -> Option<(&[T], T)> {
        None
    }

    fn label(&self) -> String;
}

/// `grad_G f(x)` in frame coefficients: `X_i f = <X_i(x), grad f(x)>`.
pub fn frame_pullback<T: Scalar, F: ScalarField<T> + ?Sized>(
    g: &CarnotGroup<T>,
    field: &F,
    x: &[T],
) -> Result<HorizontalVec<T>> {
    g.check_point(x)?;
    let mut out = vec![T::zero(); g.m1()];
    if !frame_pullback_into(g, field, x, &mut out) {
        return Err(Error::NoGradient);
    }
    Ok(HorizontalVec(out))
}

/// Allocation-free [`frame_pullback`].
#[inline]
pub fn frame_pullback_into<T: Scalar, F: ScalarField<T> + ?Sized>(
    g: &CarnotGroup<T>,
    field: &F,
    x: &[T],
    out: &mut [T],
) -> bool {
    let n = g.dim();
    let mut e = [T::zero(); MAX_DIM];
    if !field.euclidean_grad(x, &mut e[..n]) {
        return false;
    }
    g.pull_back_into(x, &e[..n], out);
    true
}

/// `exp(-1 / (1 - s^2))` for `s < 1`, where
/// `s^2 = sum_i ((x_i - c_i) / radius^alpha_i)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump<T> {
    center: Vec<T>,
    radius: T,
    scales: Vec<T>,
    inv_sq: Vec<T>,
}

impl<T: Scalar> Bump<T> {
    pub fn new(g: &CarnotGroup<T>, center: Vec<T>, radius: T) -> Result<Self> {
        g.check_point(&center)?;
        if !(radius > T::zero()) {
            return Err(Error::InvalidParameter(format!("bump radius must be positive, got {radius}")));
        }
        let scales: Vec<T> = g.weights().iter().map(|&w| radius.powi(w as i32)).collect();
        let inv_sq = scales.iter().map(|&s| T::one() / (s * s)).collect();
        Ok(Self { center, radius, scales, inv_sq })
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    #[inline]
    fn s2(&self, x: &[T]) -> T {
        let mut u = T::zero();
        for i in 0..x.len() {
            let d = x[i] - self.center[i];
            u = u + d * d * self.inv_sq[i];
        }
        u
    }
}

impl<T: Scalar> ScalarField<T> for Bump<T> {
    #[inline]
    fn eval(&self, x: &[T]) -> T {
        let u = self.s2(x);
        if u < T::one() {
            (-T::one() / (T::one() - u)).exp()
        } else {
            T::zero()
        }
    }

    fn euclidean_grad(&self, x: &[T], out: &mut [T]) -> bool {
        let u = self.s2(x);
        if u >= T::one() {
            out.iter_mut().for_each(|o| *o = T::zero());
            return true;
        }
        let om = T::one() - u;
        let f = (-T::one() / om).exp();
        let c = -f / (om * om) * T::lit(2.0);
        for i in 0..x.len() {
            out[i] = c * (x[i] - self.center[i]) * self.inv_sq[i];
        }
        true
    }

    fn support_box(&self) -> Option<Aabb<T>> {
        Some(Aabb {
            lo: self.center.iter().zip(&self.scales).map(|(&c, &s)| c - s).collect(),
            hi: self.center.iter().zip(&self.scales).map(|(&c, &s)| c + s).collect(),
        })
    }

    fn label(&self) -> String {
        format!("bump(r={})", self.radius.as_f64())
    }
}

/// `(sum_i a_i (x_i - c_i)) * e * bump(x)`: locally linear with
/// `grad_G f(c) = a`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCutoff<T> {
    a: Vec<T>,
    cutoff: Bump<T>,
}

impl<T: Scalar> PolyCutoff<T> {
    pub fn new(g: &CarnotGroup<T>, center: Vec<T>, a: Vec<T>, radius: T) -> Result<Self> {
        if a.len() != g.m1() {
            return Err(Error::DimensionMismatch { expected: g.m1(), got: a.len() });
        }
        Ok(Self { a, cutoff: Bump::new(g, center, radius)? })
    }

    #[inline]
    fn linear(&self, x: &[T]) -> T {
        self.a.iter().enumerate().fold(T::zero(), |s, (i, &ai)| s + ai * (x[i] - self.cutoff.center[i]))
    }
}

impl<T: Scalar> ScalarField<T> for PolyCutoff<T> {
    fn eval(&self, x: &[T]) -> T {
        self.linear(x) * T::E() * self.cutoff.eval(x)
    }

    fn euclidean_grad(&self, x: &[T], out: &mut [T]) -> bool {
        self.cutoff.euclidean_grad(x, out);
        let l = self.linear(x);
        let b = self.cutoff.eval(x);
        let e = T::E();
        for i in 0..x.len() {
            out[i] = e * l * out[i];
        }
        for (i, &ai) in self.a.iter().enumerate() {
            out[i] = out[i] + e * ai * b;
        }
        true
    }

    fn support_box(&self) -> Option<Aabb<T>> {
        self.cutoff.support_box()
    }

    fn label(&self) -> String {
        format!("poly_cutoff(r={})", self.cutoff.radius.as_f64())
    }
}

/// `b + sum_i a_i x_i` (all coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<T> {
    pub a: Vec<T>,
    pub b: T,
}

impl<T: Scalar> ScalarField<T> for Affine<T> {
    fn eval(&self, x: &[T]) -> T {
        self.a.iter().zip(x).fold(self.b, |s, (&a, &v)| s + a * v)
    }

    fn euclidean_grad(&self, _x: &[T], out: &mut [T]) -> bool {
        out.copy_from_slice(&self.a);
        true
    }

    fn support_box(&self) -> Option<Aabb<T>> {
        None
    }

    fn label(&self) -> String {
        "affine".into()
    }
}

/// `chi_{B_N(c, r)}`, i.e. `N(c^-1 . x) < r`.
#[derive(Clone, Debug)]
pub struct BallIndicator<T> {
    group: CarnotGroup<T>,
    norm: Norm<T>,
    center: Vec<T>,
    neg_center: Vec<T>,
    r: T,
}

impl<T: Scalar> BallIndicator<T> {
    pub fn new(g: &CarnotGroup<T>, norm: &Norm<T>, center: Vec<T>, r: T) -> Result<Self> {
        g.check_point(&center)?;
        norm.check_group(g)?;
        if !(r > T::zero()) {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {r}")));
        }
        let neg_center = center.iter().map(|&v| -v).collect();
        Ok(Self { group: g.clone(), norm: norm.clone(), center, neg_center, r })
    }

    /// `N(c^-1 . x)`.
    #[inline]
    pub fn distance(&self, x: &[T]) -> T {
        let n = x.len();
        let mut y = [T::zero(); MAX_DIM];
        self.group.multiply_into(&self.neg_center, x, &mut y[..n]);
        self.norm.eval(&y[..n])
    }
}

impl<T: Scalar> ScalarField<T> for BallIndicator<T> {
    #[inline]
    fn eval(&self, x: &[T]) -> T {
        if self.distance(x) < self.r {
            T::one()
        } else {
            T::zero()
        }
    }

    fn euclidean_grad(&self, _x: &[T], _out: &mut [T]) -> bool {
        false
    }

    fn support_box(&self) -> Option<Aabb<T>> {
        self.group.product_box(&Aabb::point(&self.center), &self.norm.bounding_box(self.r)).ok()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::Indicator
    }

    fn ball(&self) -> Option<(&[T], T)> {
        Some((&self.center, self.r))
    }

    fn label(&self) -> String {
        format!("ball_indicator(r={})", self.r.as_f64())
    }
}

#[inline]
fn psi<T: Scalar>(t: T) -> T {
    if t > T::zero() {
        (-T::one() / t).exp()
    } else {
        T::zero()
    }
}

/// C-infinity step: 0 for `u <= -1`, 1 for `u >= 1`.
#[inline]
pub fn smooth_step<T: Scalar>(u: T) -> T {
    let (a, b) = (psi(T::one() + u), psi(T::one() - u));
    a / (a + b)
}

#[inline]
pub fn smooth_step_deriv<T: Scalar>(u: T) -> T {
    let (tp, tm) = (T::one() + u, T::one() - u);
    let (a, b) = (psi(tp), psi(tm));
    if a == T::zero() || b == T::zero() {
        return T::zero();
    }
    let da = a / (tp * tp);
    let db = b / (tm * tm);
    (da * b + a * db) / ((a + b) * (a + b))
}

/// `H((r - N(c^-1 . x)) / w)` with the smooth step `H`: equal to 1 on
/// `B(c, r - w)` and 0 outside `B(c, r + w)`.
#[derive(Clone, Debug)]
pub struct SmoothedBallIndicator<T> {
    ball: BallIndicator<T>,
    width: T,
}

impl<T: Scalar> SmoothedBallIndicator<T> {
    pub fn new(g: &CarnotGroup<T>, norm: &Norm<T>, center: Vec<T>, r: T, width: T) -> Result<Self> {
        if !(width > T::zero()) || !(width < r) {
            return Err(Error::InvalidParameter(format!("smoothing width must lie in (0, r), got {width}")));
        }
        Ok(Self { ball: BallIndicator::new(g, norm, center, r)?, width })
    }

    pub fn width(&self) -> T {
        self.width
    }
}

impl<T: Scalar> ScalarField<T> for SmoothedBallIndicator<T> {
    fn eval(&self, x: &[T]) -> T {
        smooth_step((self.ball.r - self.ball.distance(x)) / self.width)
    }

    fn euclidean_grad(&self, x: &[T], out: &mut [T]) -> bool {
        let n = x.len();
        let mut y = [T::zero(); MAX_DIM];
        self.ball.group.multiply_into(&self.ball.neg_center, x, &mut y[..n]);
        let d = self.ball.norm.eval(&y[..n]);
        let h = smooth_step_deriv((self.ball.r - d) / self.width);
        if h == T::zero() {
            out.iter_mut().for_each(|o| *o = T::zero());
            return true;
        }
        let mut gn = [T::zero(); MAX_DIM];
        if !self.ball.norm.euclidean_grad(&y[..n], &mut gn[..n]) {
            return false;
        }
        // Chain rule through y = c^-1 . x: d y / d x is the left-translation
        // Jacobian at c^-1.
        let jac = match self.ball.group.left_translation_jacobian(&self.ball.neg_center) {
            Ok(j) => j,
            Err(_) => return false,
        };
        let c = -h / self.width;
        for k in 0..n {
            let mut s = T::zero();
            for r in 0..n {
                s = s + gn[r] * jac[r * n + k];
            }
            out[k] = c * s;
        }
        true
    }

    fn support_box(&self) -> Option<Aabb<T>> {
        let g = &self.ball.group;
        g.product_box(&Aabb::point(&self.ball.center), &self.ball.norm.bounding_box(self.ball.r + self.width)).ok()
    }

    fn label(&self) -> String {
        format!("smoothed_ball(r={}, w={})", self.ball.r.as_f64(), self.width.as_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pullback_of_vertical_coordinate() {
        let g = CarnotGroup::<f64>::heisenberg();
        let f = Affine { a: vec![0.0, 0.0, 1.0], b: 0.0 };
        assert_eq!(frame_pullback(&g, &f, &[1.0, 2.0, 0.0]).unwrap().0, vec![-1.0, 0.5]);
        let e = CarnotGroup::<f64>::euclidean(3).unwrap();
        let f = Affine { a: vec![1.0, 2.0, 3.0], b: 0.0 };
        assert_eq!(frame_pullback(&e, &f, &[5.0, 5.0, 5.0]).unwrap().0, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn bump_basics() {
        let g = CarnotGroup::<f64>::heisenberg();
        let b = Bump::new(&g, vec![0.1, 0.2, 0.3], 0.5).unwrap();
        assert_abs_diff_eq!(b.eval(&[0.1, 0.2, 0.3]), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(b.eval(&[1.0, 0.2, 0.3]), 0.0);
        let mut gr = [1.0; 3];
        b.euclidean_grad(&[0.1, 0.2, 0.3], &mut gr);
        assert_eq!(gr, [0.0; 3]);
        let sb = b.support_box().unwrap();
        assert_abs_diff_eq!(sb.hi[2], 0.3 + 0.25, epsilon = 1e-15);
    }

    #[test]
    fn poly_cutoff_gradient_at_center() {
        let g = CarnotGroup::<f64>::heisenberg();
        let f = PolyCutoff::new(&g, vec![0.0; 3], vec![0.7, -1.3], 1.0).unwrap();
        let gr = frame_pullback(&g, &f, &[0.0; 3]).unwrap();
        assert_abs_diff_eq!(gr[0], 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(gr[1], -1.3, epsilon = 1e-14);
        assert_eq!(f.eval(&[0.0; 3]), 0.0);
    }

    #[test]
    fn indicators_have_no_gradient() {
        let g = CarnotGroup::<f64>::heisenberg();
        let b = BallIndicator::new(&g, &Norm::Koranyi, vec![0.5, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(b.eval(&[0.5, 0.0, 0.0]), 1.0);
        assert_eq!(b.eval(&[5.0, 0.0, 0.0]), 0.0);
        assert!(matches!(frame_pullback(&g, &b, &[0.5, 0.0, 0.0]), Err(Error::NoGradient)));
        assert_eq!(b.smoothness(), Smoothness::Indicator);
    }

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(-1.5f64), 0.0);
        assert_eq!(smooth_step(1.0f64), 1.0);
        assert_abs_diff_eq!(smooth_step(0.0f64), 0.5, epsilon = 1e-15);
        let h = 1e-6;
        for u in [-0.7, -0.1, 0.3, 0.9] {
            let fd = (smooth_step(u + h) - smooth_step(u - h)) / (2.0 * h);
            assert_abs_diff_eq!(smooth_step_deriv(u), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn smoothed_indicator_gradient_matches_differences() {
        let g = CarnotGroup::<f64>::heisenberg();
        let f = SmoothedBallIndicator::new(&g, &Norm::Koranyi, vec![0.2, -0.1, 0.05], 1.0, 0.25).unwrap();
        let x = [0.9, 0.3, 0.1];
        let mut e = [0.0; 3];
        assert!(f.euclidean_grad(&x, &mut e));
        for i in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            assert_abs_diff_eq!(e[i], (f.eval(&xp) - f.eval(&xm)) / (2.0 * h), epsilon = 1e-6);
        }
    }
}
