//! Radial mollifiers `rho_eps(h) = rho~_eps(N(h))` and the kernel `K_eps`.
//!
//! A [`Profile`] stores the radial representative together with `Q` and
//! `sigma(S)`, so that every full-space quantity reduces to the radial
//! moments `int_a^b rho~(t) t^k dt`, which are available in closed form for
//! all built-in shapes.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{log_panel_integral, NormConstants};
use crate::scalar::Scalar;

/// Radial profile function of a custom mollifier.
pub type ProfileFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
pub enum Shape<T> {
    /// `density` on `[0, eps)`.
    Ball { eps: T, density: T },
    /// `c t^beta` on `(0, radius]`.
    Power { c: T, beta: T, radius: T },
    /// `scale * base` restricted to `[lo, hi]`.
    Annular { base: Box<Profile<T>>, lo: T, hi: T, scale: T },
    /// `K(t) = Q int_t^inf base(s) / s ds`.
    Kernel { base: Box<Profile<T>> },
    Custom { f: ProfileFn<T>, lo: T, hi: T, singular: bool },
}

/// A radial mollifier profile.
#[derive(Clone)]
pub struct Profile<T> {
    shape: Shape<T>,
    q: usize,
    sigma: T,
    mass: T,
}

impl<T: Scalar> fmt::Debug for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.support();
        write!(f, "Profile({}, support [{lo:e}, {hi:e}], mass {:e})", self.kind(), self.mass)
    }
}

/// `int_a^b t^k dt`; `+inf` when the integral diverges at `a = 0`.
pub fn power_integral<T: Scalar>(k: T, a: T, b: T) -> T {
    if !(b > a) {
        return T::zero();
    }
    let s = k + T::one();
    if s.abs() < T::lit(1e-14) {
        return if a > T::zero() { (b / a).ln() } else { T::infinity() };
    }
    if a == T::zero() {
        return if s > T::zero() { b.powf(s) / s } else { T::infinity() };
    }
    if !b.is_finite() {
        return if s < T::zero() { -a.powf(s) / s } else { T::infinity() };
    }
    // b^s - a^s without cancellation when s is small.
    a.powf(s) * (s * (b / a).ln()).exp_m1() / s
}

impl<T: Scalar> Profile<T> {
    fn build(shape: Shape<T>, q: usize, sigma: T) -> Self {
        let mut p = Self { shape, q, sigma, mass: T::zero() };
        p.mass = sigma * p.radial_moment(T::from_usize_lossy(q - 1), T::zero(), T::infinity());
        p
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `int_G rho_eps`, from the closed-form radial moment.
    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Ball { .. } => "ball",
            Shape::Power { .. } => "fractional",
            Shape::Annular { .. } => "annular",
            Shape::Kernel { .. } => "kernel",
            Shape::Custom { .. } => "custom",
        }
    }

    /// `[r_lo, r_hi]` outside of which the profile vanishes.
    pub fn support(&self) -> (T, T) {
        match &self.shape {
            Shape::Ball { eps, .. } => (T::zero(), *eps),
            Shape::Power { radius, .. } => (T::zero(), *radius),
            Shape::Annular { lo, hi, .. } => (*lo, *hi),
            Shape::Kernel { base } => (T::zero(), base.support().1),
            Shape::Custom { lo, hi, .. } => (*lo, *hi),
        }
    }

    /// Whether `rho~` is unbounded near `t = 0`.
    pub fn singular_at_zero(&self) -> bool {
        match &self.shape {
            Shape::Ball { .. } => false,
            Shape::Power { beta, .. } => *beta < T::zero(),
            Shape::Annular { base, lo, .. } => *lo == T::zero() && base.singular_at_zero(),
            Shape::Kernel { base } => base.support().0 == T::zero(),
            Shape::Custom { singular, lo, .. } => *singular && *lo == T::zero(),
        }
    }

    /// Interior points where `rho~` may be discontinuous or kinked.
    pub fn breakpoints(&self) -> Vec<T> {
        match &self.shape {
            Shape::Annular { base, .. } => base.breakpoints(),
            Shape::Kernel { base } => {
                let mut b = base.breakpoints();
                let lo = base.support().0;
                if lo > T::zero() {
                    b.push(lo);
                }
                b
            }
            _ => Vec::new(),
        }
    }

    /// `rho~(t)`.
    #[inline]
    pub fn rho_tilde(&self, t: T) -> T {
        match &self.shape {
            Shape::Ball { eps, density } => {
                if t >= T::zero() && t < *eps {
                    *density
                } else {
                    T::zero()
                }
            }
            Shape::Power { c, beta, radius } => {
                if t > T::zero() && t <= *radius {
                    *c * t.powf(*beta)
                } else if t == T::zero() && *beta < T::zero() {
                    T::infinity()
                } else {
                    T::zero()
                }
            }
            Shape::Annular { base, lo, hi, scale } => {
                if t >= *lo && t <= *hi {
                    *scale * base.rho_tilde(t)
                } else {
                    T::zero()
                }
            }
            Shape::Kernel { base } => {
                if t < T::zero() {
                    T::zero()
                } else {
                    T::from_usize_lossy(self.q) * base.radial_moment(-T::one(), t, T::infinity())
                }
            }
            Shape::Custom { f, lo, hi, .. } => {
                if t >= *lo && t <= *hi {
                    f(t)
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Full-space value `rho_eps(h)` given `N(h)`.
    pub fn eval_at_norm(&self, n_h: T) -> T {
        self.rho_tilde(n_h)
    }

    /// `int_a^b rho~(t) t^k dt` (either bound may lie outside the support;
    /// `b` may be infinite). Returns `+inf` for divergent moments.
    pub fn radial_moment(&self, k: T, a: T, b: T) -> T {
        let (lo, hi) = self.support();
        let a = a.max(lo).max(T::zero());
        let b = b.min(hi);
        if !(b > a) {
            return T::zero();
        }
        match &self.shape {
            Shape::Ball { density, .. } => *density * power_integral(k, a, b),
            Shape::Power { c, beta, .. } => *c * power_integral(k + *beta, a, b),
            Shape::Annular { base, scale, .. } => *scale * base.radial_moment(k, a, b),
            Shape::Kernel { base } => {
                let q = T::from_usize_lossy(self.q);
                let s = k + T::one();
                if s.abs() < T::lit(1e-12) {
                    return log_panel_integral(|t| self.rho_tilde(t) * t.powf(k), a, b, T::lit(1e-13))
                        .unwrap_or(T::infinity());
                }
                // Fubini: int_a^b t^k int_t^inf rho(s)/s ds dt.
                let inner = base.radial_moment(k, a, b);
                let near = if a > T::zero() { a.powf(s) * base.radial_moment(-T::one(), a, b) } else { T::zero() };
                let far = base.radial_moment(-T::one(), b, T::infinity());
                let far = if far == T::zero() { T::zero() } else { (b.powf(s) - a.powf(s)) * far };
                q / s * (inner - near + far)
            }
            Shape::Custom { f, .. } => {
                log_panel_integral(|t| f(t) * t.powf(k), a, b, T::lit(1e-12)).unwrap_or(T::infinity())
            }
        }
    }

    /// `int_{N(h) > delta} rho_eps(h) dh`.
    pub fn tail_mass(&self, delta: T) -> T {
        self.sigma * self.radial_moment(T::from_usize_lossy(self.q - 1), delta, T::infinity())
    }

    /// Closed-form `K(t) = Q int_t^inf rho~(s) / s ds`.
    pub fn kernel_value(&self, t: T) -> T {
        T::from_usize_lossy(self.q) * self.radial_moment(-T::one(), t, T::infinity())
    }

    /// `K(t)` by adaptive quadrature of `rho~(s) / s` (absolute tolerance
    /// `1e-10`), independent of the closed-form moments.
    pub fn kernel_quadrature(&self, t: T) -> Result<T> {
        let (lo, hi) = self.support();
        let start = t.max(lo);
        let mut pts = vec![start];
        pts.extend(self.breakpoints().into_iter().filter(|&b| b > start && b < hi));
        pts.push(hi);
        let mut total = T::zero();
        for w in pts.windows(2) {
            total = total + log_panel_integral(|s| self.rho_tilde(s) / s, w[0], w[1], T::lit(1e-10))?;
        }
        Ok(T::from_usize_lossy(self.q) * total)
    }

    /// Multiplies the profile by a constant.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::InvalidParameter(format!("profile scale must be positive, got {c}")));
        }
        let (lo, hi) = self.support();
        Ok(Self::build(Shape::Annular { base: Box::new(self.clone()), lo, hi, scale: c }, self.q, self.sigma))
    }
}

/// `chi_{B(0, eps)} / |B(0, eps)|`.
pub fn ball_profile<T: Scalar>(consts: &NormConstants<T>, eps: T) -> Result<Profile<T>> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("mollifier radius must be positive, got {eps}")));
    }
    let density = T::one() / (consts.ball_volume * eps.powi(consts.q as i32));
    Ok(Profile::build(Shape::Ball { eps, density }, consts.q, consts.sigma))
}

/// `c_eps chi_{B(0,R)} / N^(Q - eps p)` with `c_eps = eps p / (R^(eps p) sigma(S))`.
pub fn fractional_profile<T: Scalar>(consts: &NormConstants<T>, eps: T, p: T, radius: T) -> Result<Profile<T>> {
    let q = T::from_usize_lossy(consts.q);
    let s = eps * p;
    if !(s > T::zero()) {
        return Err(Error::InvalidParameter(format!("fractional mollifier needs eps p > 0, got {s}")));
    }
    if s >= q {
        return Err(Error::InvalidParameter(format!("fractional mollifier needs eps p < Q = {q}, got {s}")));
    }
    if !(radius > T::zero()) {
        return Err(Error::InvalidParameter(format!("support radius must be positive, got {radius}")));
    }
    let c = s / (radius.powf(s) * consts.sigma);
    Ok(Profile::build(Shape::Power { c, beta: s - q, radius }, consts.q, consts.sigma))
}

/// Unnormalised `c t^beta` on `(0, radius]`.
pub fn power_profile<T: Scalar>(consts: &NormConstants<T>, c: T, beta: T, radius: T) -> Result<Profile<T>> {
    if !(c > T::zero()) || !(radius > T::zero()) {
        return Err(Error::InvalidParameter("power profile needs c > 0 and radius > 0".into()));
    }
    Ok(Profile::build(Shape::Power { c, beta, radius }, consts.q, consts.sigma))
}

/// A user-supplied profile on `[lo, hi]`, normalised to unit mass.
pub fn custom_profile<T: Scalar>(
    consts: &NormConstants<T>,
    f: ProfileFn<T>,
    lo: T,
    hi: T,
    singular: bool,
) -> Result<Profile<T>> {
    if !(hi > lo) || lo < T::zero() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("custom profile support [{lo}, {hi}] is invalid")));
    }
    let raw = Profile::build(Shape::Custom { f, lo, hi, singular }, consts.q, consts.sigma);
    if !raw.mass.is_finite() {
        return Err(Error::Divergent("custom profile has infinite mass".into()));
    }
    annular_truncate(&raw, lo, hi)
}

/// Restriction of `profile` to `[m, hi]`, renormalised to unit mass.
pub fn annular_truncate<T: Scalar>(profile: &Profile<T>, m: T, hi: T) -> Result<Profile<T>> {
    let restricted = profile.sigma * profile.radial_moment(T::from_usize_lossy(profile.q - 1), m, hi);
    if !(restricted > T::zero()) || !restricted.is_finite() {
        return Err(Error::EmptyMass { lo: m.as_f64(), hi: hi.as_f64() });
    }
    let (plo, phi) = profile.support();
    let lo = m.max(plo);
    let hi = hi.min(phi);
    Ok(Profile::build(
        Shape::Annular { base: Box::new(profile.clone()), lo, hi, scale: T::one() / restricted },
        profile.q,
        profile.sigma,
    ))
}

/// The kernel `K_eps(h) = Q int_{N(h)}^inf rho~(t) / t dt` as a profile.
pub fn kernel_k<T: Scalar>(profile: &Profile<T>) -> Result<Profile<T>> {
    if !profile.mass.is_finite() {
        return Err(Error::Divergent("kernel of a profile with infinite mass".into()));
    }
    if !profile.support().1.is_finite() {
        return Err(Error::UnboundedSupport);
    }
    Ok(Profile::build(Shape::Kernel { base: Box::new(profile.clone()) }, profile.q, profile.sigma))
}

/// The two families of the examples: normalised balls and the fractional
/// family truncated to `B(0, R)`.
#[derive(Clone, Debug, PartialEq)]
pub enum MollifierFamily<T> {
    Ball { consts: NormConstants<T> },
    Fractional { consts: NormConstants<T>, p: T, radius: T },
}

impl<T: Scalar> MollifierFamily<T> {
    pub fn make(&self, eps: T) -> Result<Profile<T>> {
        match self {
            MollifierFamily::Ball { consts } => ball_profile(consts, eps),
            MollifierFamily::Fractional { consts, p, radius } => fractional_profile(consts, eps, *p, *radius),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MollifierFamily::Ball { .. } => "ball",
            MollifierFamily::Fractional { .. } => "fractional",
        }
    }

    pub fn consts(&self) -> &NormConstants<T> {
        match self {
            MollifierFamily::Ball { consts } | MollifierFamily::Fractional { consts, .. } => consts,
        }
    }
}

/// `eps0 2^-j`, `j = 0..levels`.
pub fn eps_grid<T: Scalar>(eps0: T, levels: usize) -> Vec<T> {
    (0..levels).map(|j| eps0 * T::lit(0.5).powi(j as i32)).collect()
}
