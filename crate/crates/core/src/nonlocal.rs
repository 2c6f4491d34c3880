//! Nonlocal horizontal gradients, the associated energies and their limits.
//!
//! Inner integrals over `h` use polar coordinates `h = delta_r y`:
//!
//! ```text
//! int_G F(h) rho(N(h)) dh = int_S int_0^inf F(delta_r y) rho~(r) r^(Q-1) dr d sigma(y)
//! ```
//!
//! with the cube-face [`SphereRule`] for `sigma` and a [`RadialRule`] for the
//! weight `rho~(r) r^(Q-1)`. Because `grad N(delta_r y) = grad N(y)` and
//! `pi(delta_r y) = r pi(y)`, every integrand reduces to difference quotients
//! `(f(x . delta_r y) - f(x)) / r` along rays.
//!
//! For piecewise constant fields (indicators) the difference quotient is
//! integrated exactly along each ray: the level crossings are located by
//! sampling and bisection and the resulting pieces use the profile's
//! closed-form radial moments.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::{HomogeneousNorm, Norm};
use crate::group::{CarnotGroup, HorizontalVec, MAX_DIM};
use crate::mollifier::{power_profile, Profile};
use crate::quad::{
    mc, sphere_average_multi, BoxGrid, Estimate, NormConstants, QuadBudget, RadialRule, SphereRule, XDomain,
};
use crate::scalar::Scalar;
use crate::testfn::{frame_pullback_into, ScalarField, Smoothness};

#[inline(always)]
fn pow_p<T: Scalar>(x: T, p: T) -> T {
    if p == T::one() {
        x
    } else if p == T::lit(2.0) {
        x * x
    } else {
        x.powf(p)
    }
}

/// Everything needed to evaluate the functionals for one mollifier.
#[derive(Clone)]
pub struct NonlocalContext<T: Scalar> {
    pub group: CarnotGroup<T>,
    pub norm: Norm<T>,
    pub profile: Profile<T>,
    pub p: T,
    pub budget: QuadBudget,
    sphere: Arc<SphereRule<T>>,
    radial: RadialRule<T>,
    /// `delta_{r_k} y_j`, `k` fastest.
    table: Vec<T>,
    inv_r: Vec<T>,
    grad_abs: Vec<T>,
    grad_p: Vec<T>,
}

/// Per-point values of the nonlocal gradient and the integrands of the
/// energies.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSums<T> {
    /// `V_eps(f)(x)`.
    pub v: Vec<T>,
    /// `V~_eps(f)(x)`.
    pub v_tilde: T,
    /// `int |f(x.h) - f(x)|^p / N(h)^p |grad N(h)|^p rho(h) dh`.
    pub i_density: T,
    /// `int |f(x.h) - f(x)|^p / N(h)^p rho(h) dh`.
    pub i_star_density: T,
}

/// Outer integrals of the local quantities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Energies<T> {
    /// `||V~_eps f||_p^p`.
    pub v_tilde_pp: T,
    pub i: T,
    pub i_star: T,
    /// `||V_eps f||_1`.
    pub v_l1: T,
}

/// `||V_eps f - grad_G f||_p` and friends over an outer domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientError<T> {
    pub lp_error: T,
    pub grad_lp: T,
    /// Maximum pointwise error over the domain nodes.
    pub linf_error_sampled: T,
    pub n_samples: usize,
}

impl<T: Scalar> NonlocalContext<T> {
    pub fn new(group: CarnotGroup<T>, norm: Norm<T>, profile: Profile<T>, p: T, budget: QuadBudget) -> Result<Self> {
        let sphere = Arc::new(SphereRule::new(&group, &norm, budget.sphere_nodes)?);
        Self::with_sphere(group, norm, sphere, profile, p, budget)
    }

    /// Reuses a sphere rule (it only depends on the group and the norm).
    pub fn with_sphere(
        group: CarnotGroup<T>,
        norm: Norm<T>,
        sphere: Arc<SphereRule<T>>,
        profile: Profile<T>,
        p: T,
        budget: QuadBudget,
    ) -> Result<Self> {
        norm.check_group(&group)?;
        if !(p >= T::one()) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("exponent p must satisfy p >= 1, got {p}")));
        }
        if profile.q() != group.homogeneous_dim() {
            return Err(Error::InvalidParameter(format!(
                "profile built for Q = {} on a group with Q = {}",
                profile.q(),
                group.homogeneous_dim()
            )));
        }
        if sphere.n != group.dim() || sphere.q != group.homogeneous_dim() {
            return Err(Error::InvalidParameter("sphere rule built for another group".into()));
        }
        let q1 = T::from_usize_lossy(group.homogeneous_dim() - 1);
        let radial = RadialRule::for_profile(&profile, q1, budget.radial_nodes, budget.radial_panels)?;
        let n = group.dim();
        let nk = radial.len();
        let mut table = vec![T::zero(); sphere.len() * nk * n];
        for j in 0..sphere.len() {
            for (k, &r) in radial.nodes.iter().enumerate() {
                let o = (j * nk + k) * n;
                group.dilate_into(r, sphere.dir(j), &mut table[o..o + n]);
            }
        }
        let inv_r = radial.nodes.iter().map(|&r| T::one() / r).collect();
        let grad_abs: Vec<T> = (0..sphere.len())
            .map(|j| sphere.grad(j).iter().fold(T::zero(), |a, &v| a + v * v).sqrt())
            .collect();
        let grad_p = grad_abs.iter().map(|&g| pow_p(g, p)).collect();
        Ok(Self { group, norm, profile, p, budget, sphere, radial, table, inv_r, grad_abs, grad_p })
    }

    pub fn sphere(&self) -> &Arc<SphereRule<T>> {
        &self.sphere
    }

    pub fn radial(&self) -> &RadialRule<T> {
        &self.radial
    }

    pub fn consts(&self) -> NormConstants<T> {
        NormConstants::from_rule(&self.sphere)
    }

    /// `sup |grad_G N|`: closed form when known, else the maximum over the
    /// sphere rule's nodes.
    pub fn grad_sup(&self) -> T {
        self.norm.grad_sup_known().unwrap_or_else(|| self.sphere.max_grad_norm())
    }

    /// Number of `(direction, radius)` nodes of the inner rule.
    pub fn inner_len(&self) -> usize {
        self.sphere.len() * self.radial.len()
    }

    #[inline]
    fn h(&self, j: usize, k: usize) -> &[T] {
        let n = self.group.dim();
        let o = (j * self.radial.len() + k) * n;
        &self.table[o..o + n]
    }

    /// Difference quotients `(f(x . delta_{r_k} y_j) - f(x)) / r_k` for all
    /// `k`, written into `out`.
    #[inline]
    fn quotients<F: ScalarField<T> + ?Sized>(&self, f: &F, x: &[T], fx: T, j: usize, out: &mut [T]) -> Result<()> {
        let n = self.group.dim();
        let mut buf = [T::zero(); MAX_DIM];
        for k in 0..self.radial.len() {
            self.group.multiply_into(x, self.h(j, k), &mut buf[..n]);
            let d = (f.eval(&buf[..n]) - fx) * self.inv_r[k];
            if !d.is_finite() {
                return Err(Error::NonFinite { value: d.as_f64(), location: buf[..n].iter().map(|t| t.as_f64()).collect() });
            }
            out[k] = d;
        }
        Ok(())
    }

    /// Pieces `(a, b, g)` of `[0, r_hi]` on which `f(x . delta_t y_j) - f(x)`
    /// equals the nonzero constant `g`.
    fn ray_pieces<F: ScalarField<T> + ?Sized>(&self, f: &F, x: &[T], fx: T, j: usize, pieces: &mut Vec<(T, T, T)>) {
        pieces.clear();
        let n = self.group.dim();
        let y = self.sphere.dir(j);
        let (lo, hi) = self.profile.support();
        let m = self.budget.ray_samples.max(2);
        let mut d = [T::zero(); MAX_DIM];
        let mut buf = [T::zero(); MAX_DIM];
        let mut val = |t: T| -> T {
            self.group.dilate_into(t, y, &mut d[..n]);
            self.group.multiply_into(x, &d[..n], &mut buf[..n]);
            f.eval(&buf[..n])
        };
        let step = hi / T::from_usize_lossy(m);
        let mut start = T::zero();
        let mut cur = fx;
        let mut t_prev = T::zero();
        let mut v_prev = fx;
        for i in 1..=m {
            let t = step * T::from_usize_lossy(i);
            let v = val(t);
            if v != v_prev {
                // Bisect the jump inside (t_prev, t].
                let (mut a, mut b) = (t_prev, t);
                for _ in 0..48 {
                    let mid = (a + b) * T::lit(0.5);
                    if val(mid) == v_prev {
                        a = mid;
                    } else {
                        b = mid;
                    }
                    if b - a <= hi * T::lit(1e-13) {
                        break;
                    }
                }
                let cross = (a + b) * T::lit(0.5);
                if cur != fx {
                    pieces.push((start.max(lo), cross, cur - fx));
                }
                start = cross;
                cur = v;
            }
            t_prev = t;
            v_prev = v;
        }
        if cur != fx {
            pieces.push((start.max(lo), hi, cur - fx));
        }
    }

    /// `V_eps`, `V~_eps` and the energy densities at `x` in one sweep.
    pub fn local<F: ScalarField<T> + ?Sized>(&self, f: &F, x: &[T]) -> Result<LocalSums<T>> {
        self.group.check_point(x)?;
        let m1 = self.group.m1();
        let q = T::from_usize_lossy(self.group.homogeneous_dim());
        let p = self.p;
        let fx = f.eval(x);
        let mut v = vec![T::zero(); m1];
        let (mut vt, mut idens, mut istar) = (T::zero(), T::zero(), T::zero());
        match f.smoothness() {
            Smoothness::Smooth => {
                let mut dq = vec![T::zero(); self.radial.len()];
                for j in 0..self.sphere.len() {
                    self.quotients(f, x, fx, j, &mut dq)?;
                    let (mut s1, mut sa, mut sp) = (T::zero(), T::zero(), T::zero());
                    for (k, &w) in self.radial.weights.iter().enumerate() {
                        let d = dq[k];
                        s1 = s1 + w * d;
                        sa = sa + w * d.abs();
                        sp = sp + w * pow_p(d.abs(), p);
                    }
                    let sw = self.sphere.weights[j];
                    let gr = self.sphere.grad(j);
                    for i in 0..m1 {
                        v[i] = v[i] + sw * gr[i] * s1;
                    }
                    vt = vt + sw * self.grad_abs[j] * sa;
                    idens = idens + sw * self.grad_p[j] * sp;
                    istar = istar + sw * sp;
                }
            }
            Smoothness::Indicator => {
                let q2 = q - T::lit(2.0);
                let qp = q - T::one() - p;
                let mut pieces = Vec::new();
                for j in 0..self.sphere.len() {
                    self.ray_pieces(f, x, fx, j, &mut pieces);
                    if pieces.is_empty() {
                        continue;
                    }
                    let (mut s1, mut sa, mut sp) = (T::zero(), T::zero(), T::zero());
                    for &(a, b, g) in &pieces {
                        let m = self.profile.radial_moment(q2, a, b);
                        s1 = s1 + g * m;
                        sa = sa + g.abs() * m;
                        sp = sp + pow_p(g.abs(), p) * self.profile.radial_moment(qp, a, b);
                    }
                    let sw = self.sphere.weights[j];
                    let gr = self.sphere.grad(j);
                    for i in 0..m1 {
                        v[i] = v[i] + sw * gr[i] * s1;
                    }
                    vt = vt + sw * self.grad_abs[j] * sa;
                    idens = idens + sw * self.grad_p[j] * sp;
                    istar = istar + sw * sp;
                }
            }
        }
        for c in v.iter_mut() {
            *c = *c * q;
        }
        Ok(LocalSums { v, v_tilde: vt, i_density: idens, i_star_density: istar })
    }

    /// `V_eps(f)(x) = Q int (f(x.h) - f(x)) / N(h) grad_G N(h) rho_eps(h) dh`.
    pub fn v_eps<F: ScalarField<T> + ?Sized>(&self, f: &F, x: &[T]) -> Result<HorizontalVec<T>> {
        Ok(HorizontalVec(self.local(f, x)?.v))
    }

    /// `V~_eps(f)(x) = int |f(x.h) - f(x)| / N(h) |grad_G N(h)| rho_eps(h) dh`.
    pub fn v_tilde_eps<F: ScalarField<T> + ?Sized>(&self, f: &F, x: &[T]) -> Result<T> {
        Ok(self.local(f, x)?.v_tilde)
    }

    /// Outer domain on which every integrand of this context vanishes
    /// outside: a spherical shell around the boundary for ball indicators,
    /// otherwise the support box thickened by the profile support.
    pub fn default_domain<F: ScalarField<T> + ?Sized>(&self, f: &F) -> Result<XDomain<T>> {
        let hi = self.profile.support().1;
        if f.smoothness() == Smoothness::Indicator {
            if let Some((c, r)) = f.ball() {
                return XDomain::shell(&self.group, &self.norm, c.to_vec(), r - hi, r + hi, &self.budget);
            }
        }
        let supp = f.support_box().ok_or(Error::UnboundedSupport)?;
        let thick = self.group.product_box(&supp, &self.norm.bounding_box(hi))?;
        let n = self.group.dim();
        let grid = BoxGrid::with_total_cells(thick, self.budget.grid_resolution.pow(n as u32))?;
        Ok(XDomain::Grid(grid))
    }

    /// `||V~||_p^p`, `I_{eps,p}`, `I*_{eps,p}` and `||V||_1` over `domain`.
    pub fn energies<F: ScalarField<T> + ?Sized>(&self, f: &F, domain: &XDomain<T>) -> Result<Energies<T>> {
        let p = self.p;
        let s = domain.integrate_multi(&self.group, 4, |x, out| {
            let l = self.local(f, x)?;
            out[0] = pow_p(l.v_tilde, p);
            out[1] = l.i_density;
            out[2] = l.i_star_density;
            out[3] = l.v.iter().fold(T::zero(), |a, &c| a + c * c).sqrt();
            Ok(())
        })?;
        Ok(Energies { v_tilde_pp: s[0], i: s[1], i_star: s[2], v_l1: s[3] })
    }

    /// `I_{eps,p}(f)` on the default domain.
    pub fn i_eps_p<F: ScalarField<T> + ?Sized>(&self, f: &F) -> Result<T> {
        Ok(self.energies(f, &self.default_domain(f)?)?.i)
    }

    /// `I*_{eps,p}(f)` on the default domain.
    pub fn i_star_eps_p<F: ScalarField<T> + ?Sized>(&self, f: &F) -> Result<T> {
        Ok(self.energies(f, &self.default_domain(f)?)?.i_star)
    }

    /// `||V_eps f - grad_G f||_p` together with `||grad_G f||_p`.
    pub fn gradient_error<F: ScalarField<T> + ?Sized>(&self, f: &F, domain: &XDomain<T>) -> Result<GradientError<T>> {
        let m1 = self.group.m1();
        let p = self.p;
        let worst = std::sync::Mutex::new(T::zero());
        let s = domain.integrate_multi(&self.group, 2, |x, out| {
            let v = self.local(f, x)?.v;
            let mut gr = [T::zero(); MAX_DIM];
            if !frame_pullback_into(&self.group, f, x, &mut gr[..m1]) {
                return Err(Error::NoGradient);
            }
            let e = (0..m1).fold(T::zero(), |a, i| a + (v[i] - gr[i]) * (v[i] - gr[i])).sqrt();
            let gn = (0..m1).fold(T::zero(), |a, i| a + gr[i] * gr[i]).sqrt();
            out[0] = pow_p(e, p);
            out[1] = pow_p(gn, p);
            let mut w = worst.lock().unwrap();
            *w = w.max(e);
            Ok(())
        })?;
        let inv = T::one() / p;
        let linf = worst.into_inner().unwrap();
        Ok(GradientError { lp_error: s[0].powf(inv), grad_lp: s[1].powf(inv), linf_error_sampled: linf, n_samples: domain.len() })
    }

    /// `(grad_G f * K)(x) = int grad_G f(x . y^-1) K(y) dy`.
    pub fn convolve_gradient<F: ScalarField<T> + ?Sized>(
        &self,
        f: &F,
        kernel: &Profile<T>,
        x: &[T],
    ) -> Result<HorizontalVec<T>> {
        self.group.check_point(x)?;
        let q1 = T::from_usize_lossy(self.group.homogeneous_dim() - 1);
        let rule = RadialRule::for_profile(kernel, q1, self.budget.radial_nodes, self.budget.radial_panels)?;
        let n = self.group.dim();
        let m1 = self.group.m1();
        let mut acc = vec![T::zero(); m1];
        let mut d = [T::zero(); MAX_DIM];
        let mut buf = [T::zero(); MAX_DIM];
        let mut gr = [T::zero(); MAX_DIM];
        for j in 0..self.sphere.len() {
            let y = self.sphere.dir(j);
            let mut s = [T::zero(); MAX_DIM];
            for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
                self.group.dilate_into(-r, y, &mut d[..n]);
                // delta_r(y)^-1 = -delta_r(y); dilate_into with -r negates
                // first-layer coordinates only, so fix the rest.
                for (i, &wt) in self.group.weights().iter().enumerate() {
                    if wt % 2 == 0 {
                        d[i] = -d[i];
                    }
                }
                self.group.multiply_into(x, &d[..n], &mut buf[..n]);
                if !frame_pullback_into(&self.group, f, &buf[..n], &mut gr[..m1]) {
                    return Err(Error::NoGradient);
                }
                for i in 0..m1 {
                    s[i] = s[i] + w * gr[i];
                }
            }
            let sw = self.sphere.weights[j];
            for i in 0..m1 {
                acc[i] = acc[i] + sw * s[i];
            }
        }
        Ok(HorizontalVec(acc))
    }

    /// `int int |f(x.h) - f(x) - <v(x), pi(h)>|^p / N(h)^p rho(h) dh dx`.
    /// `v` must vanish where the domain does not cover.
    pub fn taylor_remainder<F, V>(&self, f: &F, v: V, domain: &XDomain<T>) -> Result<T>
    where
        F: ScalarField<T> + ?Sized,
        V: Fn(&[T], &mut [T]) + Sync,
    {
        let m1 = self.group.m1();
        let p = self.p;
        Ok(domain.integrate_multi(&self.group, 1, |x, out| {
            let fx = f.eval(x);
            let mut vx = [T::zero(); MAX_DIM];
            v(x, &mut vx[..m1]);
            let mut dq = vec![T::zero(); self.radial.len()];
            let mut tot = T::zero();
            for j in 0..self.sphere.len() {
                self.quotients(f, x, fx, j, &mut dq)?;
                let pi = self.sphere.horizontal(j);
                let lin = (0..m1).fold(T::zero(), |a, i| a + vx[i] * pi[i]);
                let mut s = T::zero();
                for (k, &w) in self.radial.weights.iter().enumerate() {
                    s = s + w * pow_p((dq[k] - lin).abs(), p);
                }
                tot = tot + self.sphere.weights[j] * s;
            }
            out[0] = tot;
            Ok(())
        })?[0])
    }
}

/// `M = Q fint_S pi(y) (x) grad_G N(y) d sigma` from a deterministic sphere
/// rule; the representation identity states `M = I`.
pub fn reconstruction_matrix_polar<T: Scalar>(sphere: &SphereRule<T>) -> Vec<Vec<T>> {
    let m1 = sphere.m1;
    let q = T::from_usize_lossy(sphere.q);
    let total = sphere.total();
    let mut m = vec![vec![T::zero(); m1]; m1];
    for j in 0..sphere.len() {
        let (pi, gr, w) = (sphere.horizontal(j), sphere.grad(j), sphere.weights[j]);
        for a in 0..m1 {
            for b in 0..m1 {
                m[a][b] = m[a][b] + w * gr[a] * pi[b];
            }
        }
    }
    for row in m.iter_mut() {
        for c in row.iter_mut() {
            *c = *c * q / total;
        }
    }
    m
}

/// Monte Carlo estimate of the reconstruction matrix, entry `[a][b]` being
/// `Q fint grad_a N(y) pi_b(y)` (so that `M v = v`).
pub fn reconstruction_matrix<T: Scalar>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<Estimate<T>>>> {
    let m1 = g.m1();
    let q = T::from_usize_lossy(g.homogeneous_dim());
    let est = sphere_average_multi(
        g,
        norm,
        m1 * m1,
        |y, out| {
            let mut gr = [T::zero(); MAX_DIM];
            if !norm.analytic_horizontal_grad(g, y, &mut gr[..m1]) {
                let h = norm.horizontal_grad(g, y).expect("sphere point away from the origin");
                gr[..m1].copy_from_slice(&h);
            }
            for a in 0..m1 {
                for b in 0..m1 {
                    out[a * m1 + b] = gr[a] * y[b];
                }
            }
        },
        seed,
        samples,
    )?;
    Ok((0..m1).map(|a| (0..m1).map(|b| est[a * m1 + b].scale(q)).collect()).collect())
}

/// `int_x fint_S |<grad_G f(x), pi(y)>|^p d sigma(y) dx`, the limit of
/// `I*_{eps,p}(f)`, by the sphere rule. For `p = 2` the sphere average is a
/// quadratic form that is assembled once.
pub fn bbm_limit_constant<T, F>(
    g: &CarnotGroup<T>,
    sphere: &SphereRule<T>,
    f: &F,
    p: T,
    domain: &XDomain<T>,
) -> Result<T>
where
    T: Scalar,
    F: ScalarField<T> + ?Sized,
{
    let m1 = g.m1();
    let total = sphere.total();
    if p == T::lit(2.0) {
        let mut a = vec![T::zero(); m1 * m1];
        for j in 0..sphere.len() {
            let pi = sphere.horizontal(j);
            for r in 0..m1 {
                for c in 0..m1 {
                    a[r * m1 + c] = a[r * m1 + c] + sphere.weights[j] * pi[r] * pi[c];
                }
            }
        }
        a.iter_mut().for_each(|v| *v = *v / total);
        return quadratic_form_integral(g, f, &a, domain);
    }
    Ok(domain.integrate_multi(g, 1, |x, out| {
        let mut gr = [T::zero(); MAX_DIM];
        if !frame_pullback_into(g, f, x, &mut gr[..m1]) {
            return Err(Error::NoGradient);
        }
        out[0] = sphere.integrate(|y| pow_p((0..m1).fold(T::zero(), |a, i| a + gr[i] * y[i]).abs(), p)) / total;
        Ok(())
    })?[0])
}

/// `int_x grad_G f(x)^T A grad_G f(x) dx`.
pub fn quadratic_form_integral<T, F>(g: &CarnotGroup<T>, f: &F, a: &[T], domain: &XDomain<T>) -> Result<T>
where
    T: Scalar,
    F: ScalarField<T> + ?Sized,
{
    let m1 = g.m1();
    Ok(domain.integrate_multi(g, 1, |x, out| {
        let mut gr = [T::zero(); MAX_DIM];
        if !frame_pullback_into(g, f, x, &mut gr[..m1]) {
            return Err(Error::NoGradient);
        }
        let mut s = T::zero();
        for r in 0..m1 {
            for c in 0..m1 {
                s = s + gr[r] * a[r * m1 + c] * gr[c];
            }
        }
        out[0] = s;
        Ok(())
    })?[0])
}

/// Monte Carlo second moments `fint_S pi pi^T` (shell route) and
/// `(p + Q)/Q * mean_{B(1)} pi pi^T` (ball route, here with `p = 2`).
pub fn horizontal_second_moments<T: Scalar>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    ball_route: bool,
    samples: usize,
    seed: u64,
) -> Result<Vec<Estimate<T>>> {
    let m1 = g.m1();
    if !ball_route {
        return sphere_average_multi(
            g,
            norm,
            m1 * m1,
            |y, out| {
                for r in 0..m1 {
                    for c in 0..m1 {
                        out[r * m1 + c] = y[r] * y[c];
                    }
                }
            },
            seed,
            samples,
        );
    }
    let factor = T::from_usize_lossy(2 + g.homogeneous_dim()) / T::from_usize_lossy(g.homogeneous_dim());
    let est = ball_mean(g, norm, m1 * m1, seed, samples, |y, out| {
        for r in 0..m1 {
            for c in 0..m1 {
                out[r * m1 + c] = y[r] * y[c];
            }
        }
    })?;
    Ok(est.into_iter().map(|e| e.scale(factor)).collect())
}

/// Monte Carlo means over the unit ball `B(0, 1)`.
pub fn ball_mean<T, F>(g: &CarnotGroup<T>, norm: &Norm<T>, k: usize, seed: u64, samples: usize, f: F) -> Result<Vec<Estimate<T>>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) + Sync,
{
    norm.check_group(g)?;
    let n = g.dim();
    let bbox = norm.bounding_box(T::one());
    let m = mc::accumulate(seed, samples, k, |rng, out| {
        let mut y = [T::zero(); MAX_DIM];
        mc::uniform_in_box(rng, &bbox, &mut y[..n]);
        if norm.eval(&y[..n]) >= T::one() {
            return false;
        }
        f(&y[..n], out);
        true
    });
    Ok((0..k).map(|j| m.conditional_mean(j)).collect())
}

fn check_unit<T: Scalar>(v: &[T]) -> Result<()> {
    let len = v.iter().fold(T::zero(), |a, &t| a + t * t).sqrt();
    if (len - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::InvalidParameter(format!("direction must be a unit vector, |v| = {len}")));
    }
    Ok(())
}

/// `fint_S |<v, pi(y)>|^p d sigma(y)` for a unit horizontal vector `v`.
pub fn barbieri_constant<T: Scalar>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    p: T,
    v: &[T],
    samples: usize,
    seed: u64,
) -> Result<Estimate<T>> {
    if v.len() != g.m1() {
        return Err(Error::DimensionMismatch { expected: g.m1(), got: v.len() });
    }
    check_unit(v)?;
    let m1 = g.m1();
    Ok(sphere_average_multi(
        g,
        norm,
        1,
        |y, out| out[0] = pow_p((0..m1).fold(T::zero(), |a, i| a + v[i] * y[i]).abs(), p),
        seed,
        samples,
    )?[0])
}

/// Second route for the same constant:
/// `(p + Q) / sigma(S) int_{B(1)} |<v, pi(y)>|^p dy = (p + Q)/Q mean_{B(1)}`.
pub fn barbieri_ball_route<T: Scalar>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    p: T,
    v: &[T],
    samples: usize,
    seed: u64,
) -> Result<Estimate<T>> {
    if v.len() != g.m1() {
        return Err(Error::DimensionMismatch { expected: g.m1(), got: v.len() });
    }
    check_unit(v)?;
    let m1 = g.m1();
    let q = T::from_usize_lossy(g.homogeneous_dim());
    let e = ball_mean(g, norm, 1, seed, samples, |y, out| {
        out[0] = pow_p((0..m1).fold(T::zero(), |a, i| a + v[i] * y[i]).abs(), p);
    })?;
    Ok(e[0].scale((p + q) / q))
}

/// Result of [`ludwig_lhs`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LudwigValue<T> {
    /// `eps int int_{N(h) < R} |f(x.h) - f(x)|^p / N(h)^(Q+p-eps p) dh dx`.
    pub truncated: T,
    /// Upper bound for the part with `N(h) >= R`.
    pub tail_bound: T,
}

/// The anisotropic fractional seminorm scaled by `eps`, truncated to
/// `B(0, R)`, with the analytic bound `eps 2^p ||f||_p^p sigma R^(eps p - p) / (p - eps p)`
/// for the remainder.
pub fn ludwig_lhs<T, F>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    sphere: Arc<SphereRule<T>>,
    f: &F,
    p: T,
    eps: T,
    radius: T,
    budget: &QuadBudget,
    domain: Option<&XDomain<T>>,
) -> Result<LudwigValue<T>>
where
    T: Scalar,
    F: ScalarField<T> + ?Sized,
{
    let s = eps * p;
    if !(eps > T::zero()) || s >= p {
        return Err(Error::InvalidParameter(format!("fractional order needs 0 < eps p < p, got eps p = {s}")));
    }
    let consts = NormConstants::from_rule(&sphere);
    let q = T::from_usize_lossy(consts.q);
    // rho~(r) r^(Q-1) = eps r^(eps p - 1).
    let prof = power_profile(&consts, eps, s - q, radius)?;
    let ctx = NonlocalContext::with_sphere(g.clone(), norm.clone(), sphere, prof, p, budget.clone())?;
    let own;
    let dom = match domain {
        Some(d) => d,
        None => {
            own = ctx.default_domain(f)?;
            &own
        }
    };
    let truncated = ctx.energies(f, dom)?.i_star;
    let f_pp = lp_pp_field(g, f, p, budget)?;
    Ok(LudwigValue { truncated, tail_bound: ludwig_tail_bound(eps, p, f_pp, consts.sigma, radius) })
}

/// `eps 2^p ||f||_p^p sigma(S) R^(eps p - p) / (p - eps p)`.
pub fn ludwig_tail_bound<T: Scalar>(eps: T, p: T, f_pp: T, sigma: T, radius: T) -> T {
    let s = eps * p;
    eps * T::lit(2.0).powf(p) * f_pp * sigma * radius.powf(s - p) / (p - s)
}

/// `||f||_p^p` on a grid over the support box.
pub fn lp_pp_field<T, F>(g: &CarnotGroup<T>, f: &F, p: T, budget: &QuadBudget) -> Result<T>
where
    T: Scalar,
    F: ScalarField<T> + ?Sized,
{
    let supp = f.support_box().ok_or(Error::UnboundedSupport)?;
    let n = g.dim();
    let grid = BoxGrid::with_total_cells(supp, budget.grid_resolution.pow(n as u32).max(1000))?;
    crate::quad::integrate_box(|x| pow_p(f.eval(x).abs(), p), &grid)
}

/// `(p + Q)/p int int_{B(1)} |<grad f(x), pi(y)>|^p dy dx = sigma(S)/p
/// int fint_S |<grad f, pi>|^p`.
pub fn ludwig_limit<T, F>(g: &CarnotGroup<T>, sphere: &SphereRule<T>, f: &F, p: T, domain: &XDomain<T>) -> Result<T>
where
    T: Scalar,
    F: ScalarField<T> + ?Sized,
{
    Ok(bbm_limit_constant(g, sphere, f, p, domain)? * sphere.total() / p)
}

/// Certified `C` with `I*_{eps,p}(f) <= C ||grad_G f||_p^p ||rho||_1` from
/// the length of horizontal paths joining `0` to points of the unit sphere:
/// `|y|` for Euclidean groups and `|y_h| + 2 sqrt(pi |y_3|)` (segment plus
/// a circle enclosing area `|y_3|`) on the Heisenberg group. `None` for
/// other groups.
pub fn sobolev_path_bound<T: Scalar>(g: &CarnotGroup<T>, norm: &Norm<T>, p: T, samples: usize, seed: u64) -> Result<Option<T>> {
    if !g.is_euclidean() && !g.is_heisenberg() {
        return Ok(None);
    }
    let heis = g.is_heisenberg();
    let len = |y: &[T]| -> T {
        if heis {
            (y[0] * y[0] + y[1] * y[1]).sqrt() + T::lit(2.0) * (T::PI() * y[2].abs()).sqrt()
        } else {
            y.iter().fold(T::zero(), |a, &t| a + t * t).sqrt()
        }
    };
    let rule = SphereRule::new(g, norm, 8)?;
    let mut best = (0..rule.len()).map(|j| len(rule.dir(j))).fold(T::zero(), T::max);
    let bbox = norm.bounding_box(T::lit(2.0));
    let n = g.dim();
    // Extra directions from a seeded sample to sharpen the supremum.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    for _ in 0..samples {
        let mut x = [T::zero(); MAX_DIM];
        mc::uniform_in_box(&mut rng, &bbox, &mut x[..n]);
        let r = norm.eval(&x[..n]);
        if !(r > T::lit(1e-3)) {
            continue;
        }
        let mut y = [T::zero(); MAX_DIM];
        g.dilate_into(T::one() / r, &x[..n], &mut y[..n]);
        best = best.max(len(&y[..n]));
    }
    // 1% margin for the sampled supremum.
    Ok(Some(pow_p(best * T::lit(1.01), p)))
}

/// Horizontal perimeter of `B(c, r)`: `r^(Q-1) int_S |grad_G N| d sigma`.
pub fn ball_perimeter<T: Scalar>(sphere: &SphereRule<T>, r: T) -> T {
    let tot = (0..sphere.len()).fold(T::zero(), |a, j| {
        a + sphere.weights[j] * sphere.grad(j).iter().fold(T::zero(), |s, &v| s + v * v).sqrt()
    });
    r.powi(sphere.q as i32 - 1) * tot
}

/// `||grad_G f||_1` of a smooth field on a grid over its support box.
pub fn gradient_l1<T, F>(g: &CarnotGroup<T>, f: &F, cells: usize) -> Result<T>
where
    T: Scalar,
    F: ScalarField<T> + ?Sized,
{
    let supp = f.support_box().ok_or(Error::UnboundedSupport)?;
    let grid = BoxGrid::with_total_cells(supp, cells)?;
    let m1 = g.m1();
    Ok(crate::quad::integrate_box_multi(&grid, 1, |x, out| {
        let mut gr = [T::zero(); MAX_DIM];
        if !frame_pullback_into(g, f, x, &mut gr[..m1]) {
            return Err(Error::NoGradient);
        }
        out[0] = gr[..m1].iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        Ok(())
    })?[0])
}

/// Least-squares slope of `log(err)` against `log(eps)`.
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(err)
        .filter(|(e, r)| **e > 0.0 && **r > 0.0)
        .map(|(e, r)| (e.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::{ball_profile, fractional_profile, kernel_k};
    use crate::testfn::{Affine, Bump, BallIndicator};
    use approx::assert_abs_diff_eq;

    fn small_budget() -> QuadBudget {
        QuadBudget { sphere_nodes: 4, radial_nodes: 6, grid_resolution: 10, ..QuadBudget::default() }
    }

    fn h1_ctx(eps: f64) -> NonlocalContext<f64> {
        let g = CarnotGroup::heisenberg();
        let n = Norm::Koranyi;
        let b = small_budget();
        let s = Arc::new(SphereRule::new(&g, &n, b.sphere_nodes).unwrap());
        let prof = ball_profile(&NormConstants::from_rule(&s), eps).unwrap();
        NonlocalContext::with_sphere(g, n, s, prof, 2.0, b).unwrap()
    }

    #[test]
    fn constant_field_has_zero_gradient_and_energy() {
        let ctx = h1_ctx(0.3);
        let c = Affine { a: vec![0.0; 3], b: 2.5 };
        let l = ctx.local(&c, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(l.v, vec![0.0, 0.0]);
        assert_eq!(l.v_tilde, 0.0);
        assert_eq!(l.i_star_density, 0.0);
    }

    #[test]
    fn affine_horizontal_field_is_reproduced() {
        // f = a . x_h has f(x.h) - f(x) = <a, pi(h)>, so V = M a = a exactly
        // up to the sphere rule.
        let ctx = h1_ctx(0.3);
        let f = Affine { a: vec![0.7, -0.4, 0.0], b: 0.0 };
        let v = ctx.v_eps(&f, &[0.5, -0.2, 0.9]).unwrap();
        assert_abs_diff_eq!(v[0], 0.7, epsilon = 1e-3);
        assert_abs_diff_eq!(v[1], -0.4, epsilon = 1e-3);
    }

    #[test]
    fn first_estimate_pointwise() {
        let ctx = h1_ctx(0.4);
        let g = CarnotGroup::heisenberg();
        let f = Bump::new(&g, vec![0.0; 3], 1.0).unwrap();
        for x in [[0.2, 0.1, -0.1], [0.6, -0.3, 0.2], [-0.1, 0.7, 0.4]] {
            let l = ctx.local(&f, &x).unwrap();
            let vn = (l.v[0] * l.v[0] + l.v[1] * l.v[1]).sqrt();
            assert!(vn <= 4.0 * l.v_tilde + 1e-14);
        }
    }

    #[test]
    fn convolution_matches_nonlocal_gradient() {
        let ctx = h1_ctx(0.3);
        let g = CarnotGroup::heisenberg();
        let f = Bump::new(&g, vec![0.0; 3], 1.0).unwrap();
        let k = kernel_k(&ctx.profile).unwrap();
        let x = [0.3, -0.2, 0.1];
        let v = ctx.v_eps(&f, &x).unwrap();
        let c = ctx.convolve_gradient(&f, &k, &x).unwrap();
        assert_abs_diff_eq!(v[0], c[0], epsilon = 2e-3);
        assert_abs_diff_eq!(v[1], c[1], epsilon = 2e-3);
    }

    #[test]
    fn reconstruction_polar_is_identity() {
        let g = CarnotGroup::<f64>::heisenberg();
        let s = SphereRule::new(&g, &Norm::Koranyi, 8).unwrap();
        let m = reconstruction_matrix_polar(&s);
        assert_abs_diff_eq!(m[0][0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(m[1][1], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(m[0][1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn barbieri_requires_unit_vectors() {
        let g = CarnotGroup::<f64>::heisenberg();
        assert!(barbieri_constant(&g, &Norm::Koranyi, 2.0, &[0.0, 0.0], 1000, 1).is_err());
        assert!(barbieri_constant(&g, &Norm::Koranyi, 2.0, &[1.0, 0.0], 1000, 1).is_ok());
    }

    #[test]
    fn indicator_energy_is_finite_and_positive() {
        let g = CarnotGroup::<f64>::heisenberg();
        let n = Norm::Koranyi;
        let b = QuadBudget { sphere_nodes: 3, shell_sphere_nodes: 3, shell_nodes: 6, ..QuadBudget::default() };
        let s = Arc::new(SphereRule::new(&g, &n, b.sphere_nodes).unwrap());
        let prof = ball_profile(&NormConstants::from_rule(&s), 0.2).unwrap();
        let mut ctx = NonlocalContext::with_sphere(g.clone(), n.clone(), s, prof, 1.0, b).unwrap();
        ctx.p = 1.0;
        let f = BallIndicator::new(&g, &n, vec![0.0; 3], 1.0).unwrap();
        let e = ctx.energies(&f, &ctx.default_domain(&f).unwrap()).unwrap();
        assert!(e.i_star > 0.0 && e.i_star.is_finite());
        assert!(e.v_l1 > 0.0 && e.v_l1 <= 4.0 * e.v_tilde_pp + 1e-12);
    }

    #[test]
    fn fractional_context_builds() {
        let g = CarnotGroup::<f64>::euclidean(1).unwrap();
        let n = Norm::euclidean(1);
        let b = small_budget();
        let s = Arc::new(SphereRule::new(&g, &n, 1).unwrap());
        let prof = fractional_profile(&NormConstants::from_rule(&s), 0.2, 2.0, 1.0).unwrap();
        let ctx = NonlocalContext::with_sphere(g, n, s, prof, 2.0, b).unwrap();
        assert_abs_diff_eq!(ctx.radial().mass(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let e = [1.0, 0.5, 0.25];
        let r: Vec<f64> = e.iter().map(|x: &f64| 3.0 * x * x).collect();
        assert_abs_diff_eq!(loglog_slope(&e, &r).unwrap(), 2.0, epsilon = 1e-12);
    }
}
