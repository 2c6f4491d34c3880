//! Carnot groups of step at most two in exponential coordinates.
//!
//! A point is an `n`-tuple whose first `m1` entries are the horizontal
//! coordinates and whose remaining `m2` entries are the second-layer
//! coordinates. The group law is
//!
//! ```text
//! (x . y)_i     = x_i + y_i                                   i < m1
//! (x . y)_{m1+k} = x_{m1+k} + y_{m1+k} + 1/2 sum_ij B^k_ij x_i y_j
//! ```
//!
//! with one skew-symmetric `m1 x m1` correction matrix `B^k` per
//! second-layer coordinate. Euclidean space is the case `m2 = 0` and the
//! first Heisenberg group is `m1 = 2, m2 = 1, B = [[0, 1], [-1, 0]]`.

use std::ops::{Deref, DerefMut};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scalar::{powu, Scalar};

/// Largest topological dimension supported by the stack buffers used in the
/// quadrature inner loops.
pub const MAX_DIM: usize = 12;

/// A point of the group in exponential coordinates.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Point<T>(pub Vec<T>);

/// Coefficients of a horizontal vector in the orthonormal frame `X_1..X_m1`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HorizontalVec<T>(pub Vec<T>);

macro_rules! vec_newtype {
    ($name:ident) => {
        impl<T> Deref for $name<T> {
            type Target = [T];
            fn deref(&self) -> &[T] {
                &self.0
            }
        }
        impl<T> DerefMut for $name<T> {
            fn deref_mut(&mut self) -> &mut [T] {
                &mut self.0
            }
        }
        impl<T> From<Vec<T>> for $name<T> {
            fn from(v: Vec<T>) -> Self {
                Self(v)
            }
        }
        impl<T: Clone> From<&[T]> for $name<T> {
            fn from(v: &[T]) -> Self {
                Self(v.to_vec())
            }
        }
    };
}
vec_newtype!(Point);
vec_newtype!(HorizontalVec);

impl<T: Scalar> Point<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }
}

impl<T: Scalar> HorizontalVec<T> {
    pub fn zeros(m1: usize) -> Self {
        Self(vec![T::zero(); m1])
    }

    pub fn norm(&self) -> T {
        self.0.iter().fold(T::zero(), |a, &v| a + v * v).sqrt()
    }

    pub fn dot(&self, other: &[T]) -> T {
        self.0.iter().zip(other).fold(T::zero(), |a, (&u, &v)| a + u * v)
    }
}

/// Axis-aligned coordinate box.
#[derive(Clone, Debug, PartialEq)]
pub struct Aabb<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidParameter("box with lo > hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// The box `[-h_i, h_i]`.
    pub fn symmetric(half_widths: Vec<T>) -> Self {
        Self { lo: half_widths.iter().map(|&h| -h).collect(), hi: half_widths }
    }

    pub fn point(x: &[T]) -> Self {
        Self { lo: x.to_vec(), hi: x.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> T {
        self.lo.iter().zip(&self.hi).fold(T::one(), |v, (&a, &b)| v * (b - a))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    pub fn center(&self) -> Vec<T> {
        self.lo.iter().zip(&self.hi).map(|(&a, &b)| (a + b) * T::lit(0.5)).collect()
    }
}

/// Which family the group belongs to; only used for validation of norms and
/// for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Euclidean,
    Heisenberg,
    Step2,
}

/// A Carnot group of step one or two.
#[derive(Clone, Debug, PartialEq)]
pub struct CarnotGroup<T> {
    kind: GroupKind,
    layer_dims: Vec<usize>,
    weights: Vec<u32>,
    /// One row-major `m1 x m1` skew matrix per second-layer coordinate.
    corrections: Vec<Vec<T>>,
}

/// On-disk description of a step-2 group.
///
/// ```toml
/// layer_dims = [2, 1]
/// corrections = [[0.0, 1.0, -1.0, 0.0]]
/// ```
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub corrections: Vec<Vec<f64>>,
}

impl<T: Scalar> CarnotGroup<T> {
    /// `(R^n, +)`.
    pub fn euclidean(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidGroup(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        Ok(Self {
            kind: GroupKind::Euclidean,
            layer_dims: vec![n],
            weights: vec![1; n],
            corrections: Vec::new(),
        })
    }

    /// The first Heisenberg group with `x3 + y3 + (x1 y2 - x2 y1) / 2`.
    pub fn heisenberg() -> Self {
        Self {
            kind: GroupKind::Heisenberg,
            layer_dims: vec![2, 1],
            weights: vec![1, 1, 2],
            corrections: vec![vec![T::zero(), T::one(), -T::one(), T::zero()]],
        }
    }

    /// A step-2 group from user-supplied skew-symmetric correction matrices.
    pub fn step2(m1: usize, corrections: Vec<Vec<T>>) -> Result<Self> {
        let m2 = corrections.len();
        if m1 == 0 {
            return Err(Error::InvalidGroup("first layer must be non-empty".into()));
        }
        if m1 + m2 > MAX_DIM {
            return Err(Error::InvalidGroup(format!("dimension {} exceeds {MAX_DIM}", m1 + m2)));
        }
        for (k, b) in corrections.iter().enumerate() {
            if b.len() != m1 * m1 {
                return Err(Error::InvalidGroup(format!(
                    "correction matrix {k} has {} entries, expected {}",
                    b.len(),
                    m1 * m1
                )));
            }
            for i in 0..m1 {
                for j in 0..m1 {
                    let (a, c) = (b[i * m1 + j], b[j * m1 + i]);
                    if !a.is_finite() || (a + c).abs() > T::lit(1e-12) * (T::one() + a.abs()) {
                        return Err(Error::InvalidGroup(format!(
                            "correction matrix {k} is not skew-symmetric at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        if m2 == 0 {
            return Self::euclidean(m1);
        }
        let heis = m1 == 2 && m2 == 1 && {
            let b = &corrections[0];
            b[1] == T::one() && b[2] == -T::one()
        };
        let mut weights = vec![1; m1];
        weights.extend(std::iter::repeat_n(2, m2));
        Ok(Self {
            kind: if heis { GroupKind::Heisenberg } else { GroupKind::Step2 },
            layer_dims: vec![m1, m2],
            weights,
            corrections,
        })
    }

    pub fn from_config(cfg: &GroupConfig) -> Result<Self> {
        match cfg.layer_dims.as_slice() {
            [m1] => {
                if !cfg.corrections.is_empty() {
                    return Err(Error::InvalidGroup("step-1 group with correction matrices".into()));
                }
                Self::euclidean(*m1)
            }
            [m1, m2] => {
                if cfg.corrections.len() != *m2 {
                    return Err(Error::InvalidGroup(format!(
                        "{} correction matrices for a second layer of dimension {m2}",
                        cfg.corrections.len()
                    )));
                }
                let corr = cfg
                    .corrections
                    .iter()
                    .map(|b| b.iter().map(|&v| T::lit(v)).collect())
                    .collect();
                Self::step2(*m1, corr)
            }
            other => Err(Error::InvalidGroup(format!(
                "unsupported layer structure {other:?} (step must be 1 or 2)"
            ))),
        }
    }

    /// Parses the TOML group description documented on [`GroupConfig`].
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: GroupConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_config(&cfg)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn is_euclidean(&self) -> bool {
        self.kind == GroupKind::Euclidean
    }

    pub fn is_heisenberg(&self) -> bool {
        self.kind == GroupKind::Heisenberg
    }

    /// Topological dimension.
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Dimension of the first layer.
    pub fn m1(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn corrections(&self) -> &[Vec<T>] {
        &self.corrections
    }

    /// Homogeneous dimension `Q = sum_j j m_j`.
    pub fn homogeneous_dim(&self) -> usize {
        self.layer_dims.iter().enumerate().map(|(j, m)| (j + 1) * m).sum()
    }

    pub fn name(&self) -> String {
        match self.kind {
            GroupKind::Euclidean => format!("R{}", self.dim()),
            GroupKind::Heisenberg => "H1".to_string(),
            GroupKind::Step2 => format!("step2({},{})", self.layer_dims[0], self.layer_dims[1]),
        }
    }

    pub fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Group product written into `out`; no allocation, no checks.
    #[inline]
    pub fn multiply_into(&self, x: &[T], y: &[T], out: &mut [T]) {
        let m1 = self.layer_dims[0];
        for i in 0..m1 {
            out[i] = x[i] + y[i];
        }
        let half = T::lit(0.5);
        for (k, b) in self.corrections.iter().enumerate() {
            let mut s = T::zero();
            for i in 0..m1 {
                let xi = x[i];
                if xi == T::zero() {
                    continue;
                }
                let row = &b[i * m1..(i + 1) * m1];
                for j in 0..m1 {
                    s = s + row[j] * xi * y[j];
                }
            }
            let c = m1 + k;
            out[c] = x[c] + y[c] + half * s;
        }
    }

    pub fn multiply(&self, x: &[T], y: &[T]) -> Result<Point<T>> {
        self.check_point(x)?;
        self.check_point(y)?;
        let mut out = vec![T::zero(); self.dim()];
        self.multiply_into(x, y, &mut out);
        Ok(Point(out))
    }

    /// The inverse is the negation in exponential coordinates.
    pub fn inverse(&self, x: &[T]) -> Result<Point<T>> {
        self.check_point(x)?;
        Ok(Point(x.iter().map(|&v| -v).collect()))
    }

    #[inline]
    pub fn dilate_into(&self, lambda: T, x: &[T], out: &mut [T]) {
        for ((o, &v), &w) in out.iter_mut().zip(x).zip(&self.weights) {
            *o = powu(lambda, w) * v;
        }
    }

    /// Intrinsic dilation `delta_lambda`.
    pub fn dilate(&self, lambda: T, x: &[T]) -> Result<Point<T>> {
        self.check_point(x)?;
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("dilation factor must be positive, got {lambda}")));
        }
        let mut out = vec![T::zero(); self.dim()];
        self.dilate_into(lambda, x, &mut out);
        Ok(Point(out))
    }

    /// Coordinates of the frame vector `X_i(x)` written into `out` (length n).
    #[inline]
    pub fn frame_column_into(&self, i: usize, x: &[T], out: &mut [T]) {
        let m1 = self.layer_dims[0];
        for v in out.iter_mut() {
            *v = T::zero();
        }
        out[i] = T::one();
        let half = T::lit(0.5);
        for (k, b) in self.corrections.iter().enumerate() {
            let mut s = T::zero();
            for j in 0..m1 {
                s = s + b[j * m1 + i] * x[j];
            }
            out[m1 + k] = half * s;
        }
    }

    /// The `n x m1` matrix whose columns are `X_1(x), ..., X_m1(x)`.
    pub fn horizontal_frame(&self, x: &[T]) -> Result<FrameMatrix<T>> {
        self.check_point(x)?;
        let (n, m1) = (self.dim(), self.m1());
        let mut cols = vec![T::zero(); n * m1];
        for i in 0..m1 {
            self.frame_column_into(i, x, &mut cols[i * n..(i + 1) * n]);
        }
        Ok(FrameMatrix { n, m1, cols })
    }

    /// `<X_i(x), g>` for every `i`, i.e. the horizontal part of a covector.
    #[inline]
    pub fn pull_back_into(&self, x: &[T], euclid_grad: &[T], out: &mut [T]) {
        let m1 = self.layer_dims[0];
        let half = T::lit(0.5);
        for i in 0..m1 {
            let mut v = euclid_grad[i];
            for (k, b) in self.corrections.iter().enumerate() {
                let mut s = T::zero();
                for j in 0..m1 {
                    s = s + b[j * m1 + i] * x[j];
                }
                v = v + half * s * euclid_grad[m1 + k];
            }
            out[i] = v;
        }
    }

    /// Frame coefficients of `pi_x(h) = sum_i h_i X_i(x)`: the first `m1`
    /// coordinates of `h`, independently of the base point.
    pub fn pi_x(&self, h: &[T]) -> Result<HorizontalVec<T>> {
        self.check_point(h)?;
        Ok(HorizontalVec(h[..self.m1()].to_vec()))
    }

    /// Left-invariant derivative `X_i f(x)` by the central difference of
    /// `t -> f(x . (t e_i))`.
    pub fn x_derivative<F>(&self, f: &F, i: usize, x: &[T], step: T) -> Result<T>
    where
        F: Fn(&[T]) -> T + ?Sized,
    {
        self.check_point(x)?;
        if i >= self.m1() {
            return Err(Error::HorizontalIndex { index: i, m1: self.m1() });
        }
        if !(step > T::zero()) {
            return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {step}")));
        }
        Ok(self.x_derivative_unchecked(f, i, x, step))
    }

    pub(crate) fn x_derivative_unchecked<F>(&self, f: &F, i: usize, x: &[T], step: T) -> T
    where
        F: Fn(&[T]) -> T + ?Sized,
    {
        let n = self.dim();
        let mut e = [T::zero(); MAX_DIM];
        let mut buf = [T::zero(); MAX_DIM];
        e[i] = step;
        self.multiply_into(x, &e[..n], &mut buf[..n]);
        let fp = f(&buf[..n]);
        e[i] = -step;
        self.multiply_into(x, &e[..n], &mut buf[..n]);
        let fm = f(&buf[..n]);
        (fp - fm) / (step + step)
    }

    /// Richardson-extrapolated `X_i f(x)` together with the difference to the
    /// plain central difference, which serves as an error estimate.
    pub fn x_derivative_richardson<F>(&self, f: &F, i: usize, x: &[T], step: T) -> Result<(T, T)>
    where
        F: Fn(&[T]) -> T + ?Sized,
    {
        let coarse = self.x_derivative(f, i, x, step)?;
        let fine = self.x_derivative_unchecked(f, i, x, step * T::lit(0.5));
        let extrap = (T::lit(4.0) * fine - coarse) / T::lit(3.0);
        Ok((extrap, (extrap - fine).abs()))
    }

    /// Jacobian of `y -> x . y` (row-major `n x n`). It is the identity plus
    /// a block strictly below the diagonal.
    pub fn left_translation_jacobian(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_point(x)?;
        let (n, m1) = (self.dim(), self.m1());
        let mut jac = vec![T::zero(); n * n];
        for r in 0..n {
            jac[r * n + r] = T::one();
        }
        let half = T::lit(0.5);
        for (k, b) in self.corrections.iter().enumerate() {
            let r = m1 + k;
            for c in 0..m1 {
                let mut s = T::zero();
                for i in 0..m1 {
                    s = s + b[i * m1 + c] * x[i];
                }
                jac[r * n + c] = half * s;
            }
        }
        Ok(jac)
    }

    /// Bounding box of `{a . b : a in A, b in B}` by interval arithmetic.
    pub fn product_box(&self, a: &Aabb<T>, b: &Aabb<T>) -> Result<Aabb<T>> {
        self.check_point(&a.lo)?;
        self.check_point(&b.lo)?;
        let m1 = self.m1();
        let mut lo: Vec<T> = a.lo.iter().zip(&b.lo).map(|(&u, &v)| u + v).collect();
        let mut hi: Vec<T> = a.hi.iter().zip(&b.hi).map(|(&u, &v)| u + v).collect();
        let half = T::lit(0.5);
        for (k, bm) in self.corrections.iter().enumerate() {
            let (mut slo, mut shi) = (T::zero(), T::zero());
            for i in 0..m1 {
                for j in 0..m1 {
                    let c = bm[i * m1 + j];
                    if c == T::zero() {
                        continue;
                    }
                    let (plo, phi) = interval_mul((a.lo[i], a.hi[i]), (b.lo[j], b.hi[j]));
                    let (plo, phi) = interval_mul((c, c), (plo, phi));
                    slo = slo + plo;
                    shi = shi + phi;
                }
            }
            lo[m1 + k] = lo[m1 + k] + half * slo;
            hi[m1 + k] = hi[m1 + k] + half * shi;
        }
        Ok(Aabb { lo, hi })
    }

    /// Box containing `A^{-1}`.
    pub fn inverse_box(&self, a: &Aabb<T>) -> Aabb<T> {
        Aabb { lo: a.hi.iter().map(|&v| -v).collect(), hi: a.lo.iter().map(|&v| -v).collect() }
    }

    /// `delta_lambda(A)` for `lambda > 0`.
    pub fn dilate_box(&self, lambda: T, a: &Aabb<T>) -> Aabb<T> {
        let mut lo = a.lo.clone();
        let mut hi = a.hi.clone();
        self.dilate_into(lambda, &a.lo, &mut lo);
        self.dilate_into(lambda, &a.hi, &mut hi);
        Aabb { lo, hi }
    }
}

fn interval_mul<T: Scalar>(a: (T, T), b: (T, T)) -> (T, T) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    let lo = p.iter().fold(T::infinity(), |m, &v| m.min(v));
    let hi = p.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    (lo, hi)
}

/// Column-major `n x m1` matrix of frame vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMatrix<T> {
    pub n: usize,
    pub m1: usize,
    cols: Vec<T>,
}

impl<T: Scalar> FrameMatrix<T> {
    pub fn column(&self, i: usize) -> &[T] {
        &self.cols[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.cols[col * self.n + row]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn h1() -> CarnotGroup<f64> {
        CarnotGroup::heisenberg()
    }

    #[test]
    fn heisenberg_law() {
        let g = h1();
        assert_eq!(g.multiply(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap().0, vec![1.0, 1.0, 0.5]);
        assert_eq!(g.multiply(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap().0, vec![0.0, 0.0, 0.0]);
        let x = [0.3, -1.2, 2.5];
        assert_eq!(g.multiply(&x, &[0.0; 3]).unwrap().0, x.to_vec());
        assert_eq!(g.homogeneous_dim(), 4);
    }

    #[test]
    fn inverse_and_dilation() {
        let g = h1();
        assert_eq!(g.inverse(&[1.0, 2.0, 3.0]).unwrap().0, vec![-1.0, -2.0, -3.0]);
        assert_eq!(g.inverse(&[0.0; 3]).unwrap().0, vec![0.0; 3]);
        assert_eq!(g.dilate(2.0, &[1.0, 1.0, 1.0]).unwrap().0, vec![2.0, 2.0, 4.0]);
        assert_eq!(g.dilate(1.0, &[0.4, 0.1, -2.0]).unwrap().0, vec![0.4, 0.1, -2.0]);
        assert!(g.dilate(0.0, &[1.0, 1.0, 1.0]).is_err());
        assert!(g.dilate(-1.0, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let g = h1();
        assert!(matches!(
            g.multiply(&[1.0, 2.0], &[0.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn frame_matches_heisenberg_fields() {
        let g = h1();
        let f0 = g.horizontal_frame(&[0.0; 3]).unwrap();
        assert_eq!(f0.column(0), &[1.0, 0.0, 0.0]);
        assert_eq!(f0.column(1), &[0.0, 1.0, 0.0]);
        let f = g.horizontal_frame(&[1.0, 2.0, 0.0]).unwrap();
        assert_eq!(f.column(0), &[1.0, 0.0, -1.0]);
        assert_eq!(f.column(1), &[0.0, 1.0, 0.5]);
        let e = CarnotGroup::<f64>::euclidean(2).unwrap();
        let fe = e.horizontal_frame(&[3.0, -7.0]).unwrap();
        assert_eq!(fe.column(0), &[1.0, 0.0]);
        assert_eq!(fe.column(1), &[0.0, 1.0]);
    }

    #[test]
    fn pi_x_takes_horizontal_coordinates() {
        let g = h1();
        assert_eq!(g.pi_x(&[3.0, 4.0, 7.0]).unwrap().0, vec![3.0, 4.0]);
        assert_eq!(g.pi_x(&[0.0; 3]).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn x_derivative_of_vertical_coordinate() {
        let g = h1();
        let f = |x: &[f64]| x[2];
        let d1 = g.x_derivative(&f, 0, &[1.0, 2.0, 0.0], 1e-4).unwrap();
        let d2 = g.x_derivative(&f, 1, &[1.0, 2.0, 0.0], 1e-4).unwrap();
        assert_abs_diff_eq!(d1, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d2, 0.5, epsilon = 1e-10);
        let c = |_: &[f64]| 3.0;
        assert_eq!(g.x_derivative(&c, 0, &[0.2, 0.1, 0.3], 1e-4).unwrap(), 0.0);
        assert!(matches!(g.x_derivative(&f, 2, &[0.0; 3], 1e-4), Err(Error::HorizontalIndex { .. })));
    }

    #[test]
    fn richardson_improves_central_difference() {
        let g = h1();
        let f = |x: &[f64]| (x[0] * 3.0).sin() * x[2].exp();
        let x: [f64; 3] = [0.4, -0.3, 0.2];
        // X_1 = d1 - x2/2 d3
        let exact = 3.0 * (x[0] * 3.0).cos() * x[2].exp() - x[1] / 2.0 * (x[0] * 3.0).sin() * x[2].exp();
        let plain = g.x_derivative(&f, 0, &x, 1e-2).unwrap();
        let (rich, est) = g.x_derivative_richardson(&f, 0, &x, 1e-2).unwrap();
        assert!((rich - exact).abs() < 0.01 * (plain - exact).abs());
        assert!(est < 1e-3);
    }

    #[test]
    fn step2_validation() {
        assert!(CarnotGroup::<f64>::step2(2, vec![vec![0.0, 1.0, 1.0, 0.0]]).is_err());
        assert!(CarnotGroup::<f64>::step2(2, vec![vec![0.0, 1.0, -1.0]]).is_err());
        let g = CarnotGroup::<f64>::step2(2, vec![vec![0.0, 1.0, -1.0, 0.0]]).unwrap();
        assert!(g.is_heisenberg());
        let g4 = CarnotGroup::<f64>::step2(
            4,
            vec![
                vec![0., 1., 0., 0., -1., 0., 0., 0., 0., 0., 0., 1., 0., 0., -1., 0.],
                vec![0., 0., 1., 0., 0., 0., 0., 0., -1., 0., 0., 0., 0., 0., 0., 0.],
            ],
        )
        .unwrap();
        assert_eq!(g4.homogeneous_dim(), 8);
        assert_eq!(g4.kind(), GroupKind::Step2);
    }

    #[test]
    fn group_from_toml() {
        let g = CarnotGroup::<f64>::from_toml_str("layer_dims = [2, 1]\ncorrections = [[0.0, 1.0, -1.0, 0.0]]\n")
            .unwrap();
        assert!(g.is_heisenberg());
        let e = CarnotGroup::<f64>::from_toml_str("layer_dims = [3]").unwrap();
        assert!(e.is_euclidean());
        assert!(CarnotGroup::<f64>::from_toml_str("layer_dims = [2, 1, 1]").is_err());
        assert!(CarnotGroup::<f64>::from_toml_str("layer_dims = [2, 2]\ncorrections = [[0.0, 1.0, -1.0, 0.0]]").is_err());
    }

    #[test]
    fn product_box_contains_products() {
        let g = h1();
        let a = Aabb::symmetric(vec![1.0, 1.0, 1.0]);
        let b = Aabb::symmetric(vec![0.5, 0.5, 0.0625]);
        let pb = g.product_box(&a, &b).unwrap();
        for &s in &[-1.0, 1.0] {
            for &t in &[-1.0, 1.0] {
                let p = g.multiply(&[s, t, 1.0], &[-0.5 * t, 0.5 * s, 0.0625]).unwrap();
                assert!(pb.contains(&p));
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = CarnotGroup::<f32>::heisenberg();
        assert_eq!(g.multiply(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap().0, vec![1.0f32, 1.0, 0.5]);
        assert_eq!(g.dilate(2.0f32, &[1.0, 1.0, 1.0]).unwrap().0, vec![2.0f32, 2.0, 4.0]);
    }
}
