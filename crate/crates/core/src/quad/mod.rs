//! Integration engine.

pub mod grid;
pub mod mc;
pub mod radial;
pub mod sphere;
pub mod sum;

use serde::{Deserialize, Serialize};

pub use grid::{integrate_box, integrate_box_multi, BoxGrid};
pub use mc::{Estimate, MCSampler, Target};
pub use radial::{adaptive_simpson, gauss_legendre, log_panel_integral, RadialRule};
pub use sphere::SphereRule;

use crate::error::{Error, Result};
use crate::gauge::{HomogeneousNorm, Norm};
use crate::group::{CarnotGroup, MAX_DIM};
use crate::mollifier::Profile;
use crate::scalar::Scalar;

/// Resolution knobs shared by all integrators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadBudget {
    /// Gauss nodes per half-edge of the cube-face sphere rule.
    pub sphere_nodes: usize,
    /// Gauss nodes per radial panel.
    pub radial_nodes: usize,
    /// Geometric panels towards the origin for singular profiles.
    pub radial_panels: usize,
    /// Cells per axis of outer box grids (scaled by the box aspect).
    pub grid_resolution: usize,
    /// Samples per ray when locating level crossings of indicator fields.
    pub ray_samples: usize,
    /// Gauss nodes across a spherical shell in the outer integral.
    pub shell_nodes: usize,
    /// Sphere rule for outer shell integrals (nodes per half-edge).
    pub shell_sphere_nodes: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadBudget {
    fn default() -> Self {
        Self {
            sphere_nodes: 6,
            radial_nodes: 8,
            radial_panels: 10,
            grid_resolution: 24,
            ray_samples: 32,
            shell_nodes: 16,
            shell_sphere_nodes: 5,
            mc_samples: 1_000_000,
            seed: 20_240_917,
        }
    }
}

/// `Q`, `|B(0,1)|` and `sigma(S) = Q |B(0,1)|` of a norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormConstants<T> {
    pub q: usize,
    pub ball_volume: T,
    pub sigma: T,
}

impl<T: Scalar> NormConstants<T> {
    pub fn new(q: usize, ball_volume: T) -> Self {
        Self { q, ball_volume, sigma: T::from_usize_lossy(q) * ball_volume }
    }

    pub fn from_rule(rule: &SphereRule<T>) -> Self {
        Self::new(rule.q, rule.ball_volume())
    }

    pub fn compute(g: &CarnotGroup<T>, norm: &Norm<T>, budget: &QuadBudget) -> Result<Self> {
        Ok(Self::from_rule(&SphereRule::new(g, norm, budget.sphere_nodes.max(8))?))
    }
}

/// How [`ball_volume`] computes `|B(0,1)|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    /// Cube-face sphere rule: `sigma(S) / Q`.
    Polar,
    /// Midpoint rule for the indicator on the bounding box.
    Grid,
    MonteCarlo,
}

/// `C_N = |B_N(0,1)|`, with a standard error for Monte Carlo.
pub fn ball_volume<T: Scalar>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    method: VolumeMethod,
    budget: &QuadBudget,
) -> Result<Estimate<T>> {
    norm.check_group(g)?;
    match method {
        VolumeMethod::Polar => Ok(Estimate::exact(SphereRule::new(g, norm, budget.sphere_nodes.max(8))?.ball_volume())),
        VolumeMethod::Grid => {
            let grid = BoxGrid::uniform(norm.bounding_box(T::one()), budget.grid_resolution)?;
            let v = integrate_box(|x| if norm.eval(x) < T::one() { T::one() } else { T::zero() }, &grid)?;
            Ok(Estimate::exact(v))
        }
        VolumeMethod::MonteCarlo => {
            MCSampler::new(budget.seed, budget.mc_samples, Target::Ball { r: T::one() }).volume(g, norm)
        }
    }
}

/// `sigma(S_G) = Q |B(0,1)|`.
pub fn sphere_measure_total<T: Scalar>(g: &CarnotGroup<T>, norm: &Norm<T>, budget: &QuadBudget) -> Result<T> {
    Ok(NormConstants::compute(g, norm, budget)?.sigma)
}

/// Monte Carlo `int_S g_j d sigma` for a vector of integrands, by the shell
/// identity `int_S g d sigma = Q / (2^Q - 1) int_{1 <= N <= 2} g(delta_{1/N} x) dx`.
pub fn sphere_integral_multi<T, F>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    k: usize,
    f: F,
    seed: u64,
    samples: usize,
) -> Result<Vec<Estimate<T>>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) + Sync,
{
    let q = g.homogeneous_dim();
    let factor = T::from_usize_lossy(q) / (T::lit(2.0).powi(q as i32) - T::one());
    let n = g.dim();
    let sampler = MCSampler::new(seed, samples, Target::Shell { lo: T::one(), hi: T::lit(2.0) });
    let est = sampler.integrate_multi(g, norm, k, |x, r, out| {
        let mut y = [T::zero(); MAX_DIM];
        g.dilate_into(T::one() / r, x, &mut y[..n]);
        f(&y[..n], out);
    })?;
    Ok(est.into_iter().map(|e| e.scale(factor)).collect())
}

pub fn sphere_integral<T, F>(g: &CarnotGroup<T>, norm: &Norm<T>, f: F, budget: &QuadBudget) -> Result<Estimate<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    Ok(sphere_integral_multi(g, norm, 1, |y, out| out[0] = f(y), budget.seed, budget.mc_samples)?[0])
}

/// Monte Carlo `sigma`-averages of `k` integrands: the mean over uniform
/// samples of the shell, pushed to the sphere (the push-forward of the
/// normalised shell measure is the normalised `sigma`).
pub fn sphere_average_multi<T, F>(
    g: &CarnotGroup<T>,
    norm: &Norm<T>,
    k: usize,
    f: F,
    seed: u64,
    samples: usize,
) -> Result<Vec<Estimate<T>>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) + Sync,
{
    norm.check_group(g)?;
    let n = g.dim();
    let bbox = norm.bounding_box(T::lit(2.0));
    let m = mc::accumulate(seed, samples, k, |rng, out| {
        let mut x = [T::zero(); MAX_DIM];
        mc::uniform_in_box(rng, &bbox, &mut x[..n]);
        let r = norm.eval(&x[..n]);
        if r < T::one() || r > T::lit(2.0) {
            return false;
        }
        let mut y = [T::zero(); MAX_DIM];
        g.dilate_into(T::one() / r, &x[..n], &mut y[..n]);
        f(&y[..n], out);
        true
    });
    Ok((0..k).map(|j| m.conditional_mean(j)).collect())
}

/// `int_G u = sigma(S) int_0^inf u~(r) r^(Q-1) dr` for a radial function
/// with profile `u~` supported in `[lo, hi]`, by a 1-D adaptive rule.
pub fn radial_integral<T, F>(q: usize, sigma: T, u: F, lo: T, hi: T) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if !hi.is_finite() {
        return Err(Error::UnboundedSupport);
    }
    let qm1 = (q - 1) as i32;
    let v = log_panel_integral(|r: T| u(r) * r.powi(qm1), lo, hi, T::lit(1e-12))?;
    Ok(sigma * v)
}

/// Full-space mass `int_G rho~(N(h)) dh` of a profile by 1-D quadrature of
/// its pointwise values (independent of the profile's closed-form moments).
pub fn profile_mass<T: Scalar>(profile: &Profile<T>) -> Result<T> {
    let (lo, hi) = profile.support();
    let mut total = T::zero();
    // Split at interior discontinuities of the profile.
    let mut pts = vec![lo];
    pts.extend(profile.breakpoints().into_iter().filter(|&t| t > lo && t < hi));
    pts.push(hi);
    for w in pts.windows(2) {
        total = total + radial_integral(profile.q(), profile.sigma(), |r| profile.rho_tilde(r), w[0], w[1])?;
    }
    Ok(total)
}

/// `(int |F|^p)^(1/p)` of a vector field over a box grid (Euclidean length
/// of the vector at each node).
pub fn lp_norm<T, F>(grid: &BoxGrid<T>, k: usize, p: T, field: F) -> Result<T>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) + Sync,
{
    if !(p >= T::one()) {
        return Err(Error::InvalidParameter(format!("L^p norm needs p >= 1, got {p}")));
    }
    let s = integrate_box_multi(grid, 1, |x, out| {
        let mut v = vec![T::zero(); k];
        field(x, &mut v);
        out[0] = v.iter().fold(T::zero(), |a, &t| a + t * t).sqrt().powf(p);
        Ok(())
    })?[0];
    Ok(s.powf(T::one() / p))
}

/// Outer integration domain for double integrals.
#[derive(Clone, Debug)]
pub enum XDomain<T> {
    Grid(BoxGrid<T>),
    /// `{c . delta_rho y : lo <= rho <= hi, y in S}` by a sphere rule times
    /// Gauss-Legendre in `rho`.
    Shell { center: Vec<T>, lo: T, hi: T, sphere: SphereRule<T>, radial: RadialRule<T> },
}

impl<T: Scalar> XDomain<T> {
    pub fn shell(
        g: &CarnotGroup<T>,
        norm: &Norm<T>,
        center: Vec<T>,
        lo: T,
        hi: T,
        budget: &QuadBudget,
    ) -> Result<Self> {
        g.check_point(&center)?;
        let lo = lo.max(T::zero());
        if !(hi > lo) {
            return Err(Error::InvalidParameter("empty shell".into()));
        }
        let sphere = SphereRule::new(g, norm, budget.shell_sphere_nodes)?;
        let radial = RadialRule::gauss(lo, hi, budget.shell_nodes);
        Ok(XDomain::Shell { center, lo, hi, sphere, radial })
    }

    pub fn len(&self) -> usize {
        match self {
            XDomain::Grid(gr) => gr.n_cells(),
            XDomain::Shell { sphere, radial, .. } => sphere.len() * radial.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `int F(x) dx` for a `k`-vector integrand.
    pub fn integrate_multi<F>(&self, g: &CarnotGroup<T>, k: usize, f: F) -> Result<Vec<T>>
    where
        F: Fn(&[T], &mut [T]) -> Result<()> + Sync,
    {
        match self {
            XDomain::Grid(grid) => integrate_box_multi(grid, k, f),
            XDomain::Shell { center, sphere, radial, .. } => {
                let n = g.dim();
                let q = g.homogeneous_dim() as i32;
                let nr = radial.len();
                sum::chunked_sum(sphere.len() * nr, k, 16, |i, acc: &mut [T]| {
                    let (j, l) = (i / nr, i % nr);
                    let rho = radial.nodes[l];
                    let w = sphere.weights[j] * radial.weights[l] * rho.powi(q - 1);
                    let mut d = [T::zero(); MAX_DIM];
                    let mut x = [T::zero(); MAX_DIM];
                    g.dilate_into(rho, sphere.dir(j), &mut d[..n]);
                    g.multiply_into(center, &d[..n], &mut x[..n]);
                    let mut vals = vec![T::zero(); k];
                    f(&x[..n], &mut vals)?;
                    for (a, v) in acc.iter_mut().zip(&vals) {
                        if !v.is_finite() {
                            return Err(Error::NonFinite {
                                value: v.as_f64(),
                                location: x[..n].iter().map(|t| t.as_f64()).collect(),
                            });
                        }
                        *a = *a + w * *v;
                    }
                    Ok(())
                })
            }
        }
    }

    /// Evaluation points (for sampling fields).
    pub fn points(&self, g: &CarnotGroup<T>) -> Vec<Vec<T>> {
        match self {
            XDomain::Grid(grid) => grid.nodes(),
            XDomain::Shell { center, sphere, radial, .. } => {
                let n = g.dim();
                let mut out = Vec::with_capacity(self.len());
                for j in 0..sphere.len() {
                    for &rho in &radial.nodes {
                        let mut d = vec![T::zero(); n];
                        g.dilate_into(rho, sphere.dir(j), &mut d);
                        let mut x = vec![T::zero(); n];
                        g.multiply_into(center, &d, &mut x);
                        out.push(x);
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn budget() -> QuadBudget {
        QuadBudget { mc_samples: 400_000, grid_resolution: 80, ..QuadBudget::default() }
    }

    #[test]
    fn disc_area_three_ways() {
        let g = CarnotGroup::<f64>::euclidean(2).unwrap();
        let n = Norm::euclidean(2);
        let b = budget();
        let p = ball_volume(&g, &n, VolumeMethod::Polar, &b).unwrap().value;
        let gr = ball_volume(&g, &n, VolumeMethod::Grid, &b).unwrap().value;
        let mc = ball_volume(&g, &n, VolumeMethod::MonteCarlo, &b).unwrap();
        assert_abs_diff_eq!(p, PI, epsilon = 1e-9);
        assert!((gr - PI).abs() < 0.01 * PI);
        assert!((mc.value - PI).abs() < 4.0 * mc.std_err);
    }

    #[test]
    fn shell_identity_matches_polar_rule() {
        let g = CarnotGroup::<f64>::heisenberg();
        let n = Norm::Koranyi;
        let b = budget();
        let s = sphere_integral(&g, &n, |_| 1.0, &b).unwrap();
        let total = sphere_measure_total(&g, &n, &b).unwrap();
        assert!((s.value - total).abs() < 0.02 * total);
        let odd = sphere_integral(&g, &n, |y| y[0], &b).unwrap();
        assert!(odd.value.abs() < 4.0 * odd.std_err);
    }

    #[test]
    fn radial_integral_of_zero_and_ball() {
        assert_eq!(radial_integral(3, 1.0, |_| 0.0, 0.0, 1.0).unwrap(), 0.0);
        // Indicator of the unit ball in R^3: sigma / 3.
        let v = radial_integral(3, 4.0 * PI, |_| 1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, 4.0 * PI / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn lp_norm_basics() {
        let grid = BoxGrid::uniform(crate::group::Aabb::new(vec![0.0; 2], vec![1.0; 2]).unwrap(), 10).unwrap();
        assert_eq!(lp_norm(&grid, 2, 2.0, |_, v| v.fill(0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(lp_norm(&grid, 1, 1.0, |_, v| v[0] = 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(lp_norm(&grid, 1, 0.5, |_, v| v[0] = 1.0).is_err());
    }

    #[test]
    fn shell_domain_volume() {
        let g = CarnotGroup::<f64>::heisenberg();
        let n = Norm::Koranyi;
        let b = QuadBudget { shell_sphere_nodes: 6, ..QuadBudget::default() };
        let d = XDomain::shell(&g, &n, vec![0.3, -0.2, 0.1], 0.5, 1.0, &b).unwrap();
        let v = d.integrate_multi(&g, 1, |_, o| {
            o[0] = 1.0;
            Ok(())
        })
        .unwrap()[0];
        assert_abs_diff_eq!(v, PI * PI / 8.0 * (1.0 - 0.0625), epsilon = 1e-6);
    }
}
