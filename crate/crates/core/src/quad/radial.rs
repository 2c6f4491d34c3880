//! One-dimensional rules: Gauss-Legendre panels, adaptive Simpson and the
//! radial rules used for the inner (mollifier-weighted) integrals.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::mollifier::Profile;
use crate::scalar::Scalar;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, sorted by node.
pub fn gauss_legendre<T: Scalar>(k: usize) -> Vec<(T, T)> {
    let k = NonZeroUsize::new(k.max(1)).unwrap();
    let rule = GaussLegendre::new(k);
    let mut pairs: Vec<(T, T)> = rule.as_node_weight_pairs().iter().map(|&(x, w)| (T::lit(x), T::lit(w))).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_panel<T: Scalar>(a: T, b: T, k: usize) -> Vec<(T, T)> {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    gauss_legendre::<T>(k).into_iter().map(|(x, w)| (mid + half * x, half * w)).collect()
}

fn simpson_step<T: Scalar, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let m = (a + b) * T::lit(0.5);
    let lm = (a + m) * T::lit(0.5);
    let rm = (m + b) * T::lit(0.5);
    let flm = f(lm);
    let frm = f(rm);
    let six = T::lit(6.0);
    let left = (m - a) / six * (fa + T::lit(4.0) * flm + fm);
    let right = (b - m) / six * (fm + T::lit(4.0) * frm + fb);
    let delta = left + right - whole;
    // Non-finite values never meet the tolerance; refining them only burns depth.
    if depth == 0 || !delta.is_finite() || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    let half_tol = tol * T::lit(0.5);
    simpson_step(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> T {
    if !(b > a) {
        return T::zero();
    }
    let m = (a + b) * T::lit(0.5);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    // Roundoff floor relative to the integral's scale: an absolute tolerance
    // below the integrand's noise would otherwise refine to full depth.
    let tol = tol.max(T::epsilon() * T::lit(256.0) * whole.abs());
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `int_a^b f` on geometric (ratio 4) panels with adaptive Simpson on each.
/// `a = 0` is allowed for integrable endpoint singularities: panels are
/// added towards zero until they stop contributing, and a geometric tail is
/// extrapolated when the panel contributions decay slowly. Reports
/// [`Error::Divergent`] if the contributions do not decay.
pub fn log_panel_integral<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> Result<T> {
    if !(b > a) {
        return Ok(T::zero());
    }
    let four = T::lit(4.0);
    if a > T::zero() {
        let mut total = T::zero();
        let mut hi = b;
        while hi > a {
            let lo = (hi / four).max(a);
            total = total + adaptive_simpson(&f, lo, hi, tol);
            hi = lo;
        }
        return Ok(total);
    }
    let tiny = T::min_positive_value().sqrt();
    let mut total = T::zero();
    let mut prev = T::zero();
    let mut prev_prev = T::zero();
    let mut hi = b;
    let mut stagnant = 0;
    let mut j = 0;
    loop {
        let lo = hi / four;
        let c = adaptive_simpson(&f, lo, hi, tol * T::lit(1e-3));
        if !c.is_finite() {
            // Overflow this close to 0: fall back on the geometric tail of
            // the panels seen so far.
            return match (j >= 2).then(|| prev / prev_prev) {
                Some(ratio) if ratio.abs() < T::one() => Ok(total + prev * ratio / (T::one() - ratio)),
                _ => Err(Error::Divergent("radial integrand overflows near 0".into())),
            };
        }
        total = total + c;
        if j >= 2 && c.abs() <= T::lit(1e-14) * total.abs() {
            return Ok(total);
        }
        if j >= 1 && prev != T::zero() {
            let ratio = c / prev;
            if ratio.abs() >= T::one() - T::lit(1e-9) {
                stagnant += 1;
                if stagnant >= 8 {
                    return Err(Error::Divergent(format!("radial integrand not integrable at 0 (panel ratio {ratio})")));
                }
            } else {
                stagnant = 0;
                let tail = c * ratio / (T::one() - ratio);
                if j >= 3 && ratio > T::zero() && tail.abs() <= T::lit(1e-15) * total.abs() {
                    return Ok(total + tail);
                }
            }
            if lo < tiny {
                if ratio.abs() >= T::one() {
                    return Err(Error::Divergent("radial integrand not integrable at 0".into()));
                }
                return Ok(total + c * ratio / (T::one() - ratio));
            }
        } else if lo < tiny {
            return Ok(total);
        }
        prev_prev = prev;
        prev = c;
        hi = lo;
        j += 1;
    }
}

/// Nodes and weights for `int_0^inf F(r) w(r) dr` with `w = rho~(r) r^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> RadialRule<T> {
    /// Plain Gauss-Legendre rule on `[a, b]` (unit weight).
    pub fn gauss(a: T, b: T, k: usize) -> Self {
        let (nodes, weights) = gauss_panel(a, b, k).into_iter().unzip();
        Self { nodes, weights }
    }

    /// Rule for the weight `rho~(r) r^k` of a profile. Each panel's weights
    /// are rescaled to the panel's exact moment, so the rule integrates
    /// constants exactly. Profiles unbounded at the origin get `panels`
    /// geometric panels and one lumped node carrying the exact mass of the
    /// remaining innermost interval.
    pub fn for_profile(profile: &Profile<T>, k: T, nodes_per_panel: usize, panels: usize) -> Result<Self> {
        let (lo, hi) = profile.support();
        if !hi.is_finite() {
            return Err(Error::UnboundedSupport);
        }
        let four = T::lit(4.0);
        let mut bounds: Vec<(T, T)> = Vec::new();
        let mut lump = None;
        if lo > T::zero() {
            let mut a = lo;
            while a < hi {
                let b = (a * four).min(hi);
                let b = if hi / b < T::lit(1.5) { hi } else { b };
                bounds.push((a, b));
                a = b;
            }
        } else if !profile.singular_at_zero() {
            bounds.push((T::zero(), hi));
        } else {
            let mut b = hi;
            for _ in 0..panels.max(1) {
                bounds.push((b / four, b));
                b = b / four;
            }
            lump = Some(b);
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if let Some(a) = lump {
            let m = profile.radial_moment(k, T::zero(), a);
            if !m.is_finite() {
                return Err(Error::Divergent(format!("radial moment of order {k} diverges at 0")));
            }
            if m > T::zero() {
                nodes.push(a * T::lit(0.5));
                weights.push(m);
            }
        }
        for (a, b) in bounds.into_iter().rev() {
            let exact = profile.radial_moment(k, a, b);
            if !exact.is_finite() {
                return Err(Error::Divergent(format!("radial moment of order {k} on [{a}, {b}]")));
            }
            if exact == T::zero() {
                continue;
            }
            let panel = gauss_panel(a, b, nodes_per_panel);
            let raw: Vec<T> = panel.iter().map(|&(r, w)| w * profile.rho_tilde(r) * r.powf(k)).collect();
            let s: T = raw.iter().copied().sum();
            let scale = if s > T::zero() { exact / s } else { T::one() };
            for ((r, _), w) in panel.into_iter().zip(raw) {
                nodes.push(r);
                weights.push(w * scale);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn apply<F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes.iter().zip(&self.weights).fold(T::zero(), |a, (&r, &w)| a + w * f(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_is_exact_for_polynomials() {
        let r = RadialRule::<f64>::gauss(0.0, 2.0, 5);
        assert_abs_diff_eq!(r.apply(|t| t.powi(9)), 2f64.powi(10) / 10.0, epsilon = 1e-10);
    }

    #[test]
    fn simpson_on_smooth_function() {
        let v = adaptive_simpson(|t: f64| t.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn log_panels_handle_integrable_singularities() {
        let v = log_panel_integral(|t: f64| t.powf(-0.5), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-8);
        let v = log_panel_integral(|t: f64| -t.ln(), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
        // Slowly decaying panels: t^(-0.97).
        let v = log_panel_integral(|t: f64| t.powf(-0.97), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 0.03, epsilon = 1e-6);
        let v = log_panel_integral(|t: f64| t * t, 0.5, 3.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, (27.0 - 0.125) / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn large_scale_and_overflow_terminate() {
        // Integrand of size 1e9 with an absolute tolerance far below roundoff.
        let v = adaptive_simpson(|t: f64| 1e9 * (0.01 / t).ln() / t, 0.007, 0.01, 1e-10);
        let exact = 1e9 * 0.5 * (0.01f64 / 0.007).ln().powi(2);
        assert!((v - exact).abs() <= 1e-9 * exact);
        // t^(-3.9) t^3 overflows in the first factor long before the panels
        // reach the underflow threshold.
        let v = log_panel_integral(|t: f64| t.powf(-3.9) * t.powi(3), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 10.0, epsilon = 1e-8);
    }

    #[test]
    fn log_panels_flag_divergence() {
        assert!(matches!(log_panel_integral(|t: f64| 1.0 / t, 0.0, 1.0, 1e-10), Err(Error::Divergent(_))));
        assert!(matches!(log_panel_integral(|t: f64| t.powi(-2), 0.0, 1.0, 1e-10), Err(Error::Divergent(_))));
    }
}
