//! The named experiments. Each returns a table (one row per `eps` or per
//! check) and a list of verdicts.

use std::sync::Arc;

use carnot_nonlocal::gauge::{grad_norm_fd, koranyi_grad, koranyi_norm, norm_diagnostics};
use carnot_nonlocal::group::MAX_DIM;
use carnot_nonlocal::mollifier::{kernel_k, MollifierFamily};
use carnot_nonlocal::nonlocal::{
    ball_perimeter, barbieri_ball_route, barbieri_constant, bbm_limit_constant, gradient_l1, horizontal_second_moments,
    loglog_slope, ludwig_lhs, ludwig_limit, quadratic_form_integral, reconstruction_matrix, reconstruction_matrix_polar,
    sobolev_path_bound,
};
use carnot_nonlocal::quad::{profile_mass, BoxGrid, NormConstants, XDomain};
use carnot_nonlocal::testfn::{frame_pullback_into, SmoothedBallIndicator};
use carnot_nonlocal::{
    Aabb, CarnotGroup, HomogeneousNorm, NonlocalContext, Norm, QuadBudget, ScalarField, SphereRule,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, EXPERIMENTS};
use crate::report::{num, Criterion, ExperimentReport};
use crate::RunError;

type CoreResult<T> = carnot_nonlocal::Result<T>;

const COLUMNS: &[(&str, &[&str])] = &[
    ("grad_convergence", &["eps", "lp_error", "linf_error_sampled", "slope_running", "seed", "n_samples", "budget"]),
    ("repr_formula", &["eps", "max_discrepancy", "bound", "min_first_estimate_slack", "seed", "n_points", "budget"]),
    (
        "energy_limit",
        &[
            "eps", "v_tilde_pp", "i", "i_star", "rho_mass", "chain_lower_excess", "chain_upper_excess", "sobolev_ratio",
            "limit", "rel_gap", "seed", "budget",
        ],
    ),
    ("taylor", &["eps", "remainder_true", "remainder_wrong", "limit_wrong", "seed", "budget"]),
    ("ludwig", &["eps", "lhs_truncated", "tail_bound", "limit", "rel_gap", "seed", "budget"]),
    ("reconstruction", &["row", "col", "value", "std_err", "target", "polar_value", "seed", "n_samples", "budget"]),
    (
        "bv_mass",
        &["eps", "i_star", "v_l1", "perimeter_smoothed", "perimeter_polar", "rel_gap", "seed", "budget"],
    ),
    ("kernel_props", &["family", "eps", "kernel_mass", "rho_mass", "max_closed_vs_quad", "seed", "budget"]),
    ("norm_diagnostics", &["check", "value", "seed", "n_samples", "budget"]),
];

fn columns(id: &str) -> &'static [&'static str] {
    COLUMNS.iter().find(|(n, _)| *n == id).map(|(_, c)| *c).unwrap_or(&[])
}

/// Description and CSV columns of an experiment.
pub fn describe(id: &str) -> Option<String> {
    let (_, d) = EXPERIMENTS.iter().find(|(n, _)| *n == id)?;
    Some(format!("{id}: {d}\ncolumns: {}", columns(id).join(",")))
}

pub fn run_experiments(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>, RunError> {
    cfg.validate()?;
    Ok(cfg.experiments.iter().map(|id| run_experiment(cfg, id)).collect())
}

/// Runs one experiment; numerical failures become a failed report.
pub fn run_experiment(cfg: &ExperimentConfig, id: &str) -> ExperimentReport {
    let res = Setup::new(cfg).and_then(|s| match id {
        "grad_convergence" => s.grad_convergence(),
        "repr_formula" => s.repr_formula(),
        "energy_limit" => s.energy_limit(),
        "taylor" => s.taylor(),
        "ludwig" => s.ludwig(),
        "reconstruction" => s.reconstruction(),
        "bv_mass" => s.bv_mass(),
        "kernel_props" => s.kernel_props(),
        "norm_diagnostics" => s.norm_diagnostics(),
        other => Err(carnot_nonlocal::Error::Config(format!("unknown experiment `{other}`"))),
    });
    res.unwrap_or_else(|e| ExperimentReport::failed(id, e.to_string()))
}

fn budget_tag(b: &QuadBudget) -> String {
    format!(
        "sphere={};radial={}x{};grid={};ray={};shell={}x{};mc={}",
        b.sphere_nodes,
        b.radial_nodes,
        b.radial_panels,
        b.grid_resolution,
        b.ray_samples,
        b.shell_nodes,
        b.shell_sphere_nodes,
        b.mc_samples
    )
}

/// Number of strict increases along a sequence.
fn increases(v: &[f64]) -> usize {
    v.windows(2).filter(|w| w[1] > w[0]).count()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    g: CarnotGroup<f64>,
    norm: Norm<f64>,
    sphere: Arc<SphereRule<f64>>,
    consts: NormConstants<f64>,
    field: Box<dyn ScalarField<f64>>,
    eps: Vec<f64>,
    budget: QuadBudget,
    p: f64,
    seed: u64,
    tag: String,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a ExperimentConfig) -> CoreResult<Self> {
        let err = |e: RunError| carnot_nonlocal::Error::Config(e.to_string());
        let g = cfg.build_group().map_err(err)?;
        let norm = cfg.build_norm(&g).map_err(err)?;
        let field = cfg.build_field(&g).map_err(err)?;
        let eps = cfg.eps_grid().map_err(err)?;
        let budget = cfg.budget();
        let sphere = Arc::new(SphereRule::new(&g, &norm, budget.sphere_nodes)?);
        let consts = NormConstants::from_rule(&sphere);
        Ok(Self {
            cfg,
            g,
            norm,
            sphere,
            consts,
            field,
            eps,
            tag: budget_tag(&budget),
            seed: budget.seed,
            budget,
            p: cfg.p,
        })
    }

    fn family(&self, p: f64) -> MollifierFamily<f64> {
        self.cfg.family(self.consts, p)
    }

    fn ctx(&self, eps: f64, p: f64) -> CoreResult<NonlocalContext<f64>> {
        let prof = self.family(p).make(eps)?;
        NonlocalContext::with_sphere(self.g.clone(), self.norm.clone(), self.sphere.clone(), prof, p, self.budget.clone())
    }

    /// Support box of the field thickened by `B(0, hi)`, as a grid.
    fn domain(&self, hi: f64) -> CoreResult<XDomain<f64>> {
        let supp = self.field.support_box().ok_or(carnot_nonlocal::Error::UnboundedSupport)?;
        let b = self.g.product_box(&supp, &self.norm.bounding_box(hi))?;
        let n = self.g.dim();
        Ok(XDomain::Grid(BoxGrid::with_total_cells(b, self.budget.grid_resolution.pow(n as u32))?))
    }

    /// Domain shared by all scales: thickened by the largest support.
    fn common_domain(&self, p: f64) -> CoreResult<XDomain<f64>> {
        self.domain(self.ctx(self.eps[0], p)?.profile.support().1)
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) -> CoreResult<()> {
        if !frame_pullback_into(&self.g, self.field.as_ref(), x, out) {
            return Err(carnot_nonlocal::Error::NoGradient);
        }
        Ok(())
    }

    fn grad_lp_pp(&self, domain: &XDomain<f64>, p: f64) -> CoreResult<f64> {
        let m1 = self.g.m1();
        Ok(domain.integrate_multi(&self.g, 1, |x, out| {
            let mut gr = [0.0; MAX_DIM];
            self.grad_into(x, &mut gr[..m1])?;
            out[0] = gr[..m1].iter().map(|v| v * v).sum::<f64>().sqrt().powf(p);
            Ok(())
        })?[0])
    }

    /// `int fint_S |<grad f, pi>|^p` by Monte Carlo on the sphere: a
    /// quadratic form for `p = 2`, the rotation-invariant constant times
    /// `||grad f||_p^p` otherwise, and a finer sphere rule as last resort.
    fn sphere_average_oracle(&self, domain: &XDomain<f64>, p: f64, ball_route: bool, seed: u64) -> CoreResult<f64> {
        let m1 = self.g.m1();
        if p == 2.0 {
            let a: Vec<f64> = horizontal_second_moments(&self.g, &self.norm, ball_route, self.budget.mc_samples, seed)?
                .iter()
                .map(|e| e.value)
                .collect();
            return quadratic_form_integral(&self.g, self.field.as_ref(), &a, domain);
        }
        if self.norm.rotation_invariant() || m1 == 1 {
            let mut e1 = vec![0.0; m1];
            e1[0] = 1.0;
            let c = if ball_route {
                barbieri_ball_route(&self.g, &self.norm, p, &e1, self.budget.mc_samples, seed)?
            } else {
                barbieri_constant(&self.g, &self.norm, p, &e1, self.budget.mc_samples, seed)?
            };
            return Ok(c.value * self.grad_lp_pp(domain, p)?);
        }
        let fine = SphereRule::new(&self.g, &self.norm, self.budget.sphere_nodes + 3)?;
        bbm_limit_constant(&self.g, &fine, self.field.as_ref(), p, domain)
    }

    fn grad_convergence(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("grad_convergence", columns("grad_convergence"));
        let domain = self.common_domain(self.p)?;
        let (mut eps_done, mut errs) = (Vec::new(), Vec::new());
        let mut grad_lp = 0.0;
        for &eps in &self.eps {
            let ctx = self.ctx(eps, self.p)?;
            let e = ctx.gradient_error(self.field.as_ref(), &domain)?;
            eps_done.push(eps);
            errs.push(e.lp_error);
            grad_lp = e.grad_lp;
            let slope = loglog_slope(&eps_done, &errs).unwrap_or(f64::NAN);
            rep.push(vec![
                num(eps),
                num(e.lp_error),
                num(e.linf_error_sampled),
                num(slope),
                self.seed.to_string(),
                e.n_samples.to_string(),
                self.tag.clone(),
            ]);
        }
        rep.criteria.push(Criterion::at_most("error_increases", increases(&errs) as f64, 0.0));
        rep.criteria.push(Criterion::at_most("final_relative_error", errs[errs.len() - 1] / grad_lp, 0.05));
        if let Some(m) = self.cfg.checks.min_slope {
            rep.criteria.push(Criterion::at_least("fitted_slope", loglog_slope(&eps_done, &errs).unwrap_or(f64::NAN), m));
        }
        Ok(rep)
    }

    fn repr_formula(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("repr_formula", columns("repr_formula"));
        let supp = self.field.support_box().ok_or(carnot_nonlocal::Error::UnboundedSupport)?;
        let n = self.g.dim();
        let m1 = self.g.m1();
        let q = self.g.homogeneous_dim() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let pts: Vec<Vec<f64>> = (0..self.cfg.checks.repr_points)
            .map(|_| (0..n).map(|i| supp.lo[i] + (supp.hi[i] - supp.lo[i]) * rng.random::<f64>()).collect())
            .collect();
        // sup |grad f| over a grid of the support plus the sample points.
        let mut grad_sup: f64 = 0.0;
        let grid = BoxGrid::with_total_cells(supp.clone(), 40usize.pow(n as u32).min(200_000))?;
        for x in grid.nodes().iter().chain(&pts) {
            let mut gr = [0.0; MAX_DIM];
            self.grad_into(x, &mut gr[..m1])?;
            grad_sup = grad_sup.max(gr[..m1].iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        let bound = 1e-3 * (1.0 + grad_sup);
        let (mut worst, mut worst_slack) = (0.0f64, f64::INFINITY);
        for &eps in &self.eps {
            let ctx = self.ctx(eps, self.p)?;
            let k = kernel_k(&ctx.profile)?;
            let (mut d_max, mut slack) = (0.0f64, f64::INFINITY);
            for x in &pts {
                let l = ctx.local(self.field.as_ref(), x)?;
                let c = ctx.convolve_gradient(self.field.as_ref(), &k, x)?;
                let d = (0..m1).map(|i| (l.v[i] - c[i]).powi(2)).sum::<f64>().sqrt();
                d_max = d_max.max(d);
                let vn = l.v.iter().map(|v| v * v).sum::<f64>().sqrt();
                slack = slack.min(q * l.v_tilde - vn);
            }
            worst = worst.max(d_max);
            worst_slack = worst_slack.min(slack);
            rep.push(vec![
                num(eps),
                num(d_max),
                num(bound),
                num(slack),
                self.seed.to_string(),
                pts.len().to_string(),
                self.tag.clone(),
            ]);
        }
        rep.criteria.push(Criterion::at_most("max_discrepancy", worst, bound));
        rep.criteria.push(Criterion::at_least("first_estimate_slack", worst_slack, -1e-12));
        Ok(rep)
    }

    fn energy_limit(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("energy_limit", columns("energy_limit"));
        let p = self.p;
        let f = self.field.as_ref();
        let domain = self.common_domain(p)?;
        let limit = bbm_limit_constant(&self.g, &self.sphere, f, p, &domain)?;
        let grad_pp = self.grad_lp_pp(&domain, p)?;
        let (mut lower, mut upper, mut eq_gap) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
        let mut ratios = Vec::new();
        let mut last_gap = f64::NAN;
        for &eps in &self.eps {
            let ctx = self.ctx(eps, p)?;
            let e = ctx.energies(f, &domain)?;
            // Mass of the discrete rule, for which the chain is exact.
            let m = ctx.sphere().total() * ctx.radial().mass();
            let gp = ctx.grad_sup().powf(p);
            let lo = (e.v_tilde_pp - m.powf(p - 1.0) * e.i) / e.i;
            let up = (e.i - gp * e.i_star) / e.i_star;
            lower = lower.max(lo);
            upper = upper.max(up);
            eq_gap = eq_gap.max(rel(e.i, e.i_star));
            let ratio = e.i_star / (m * grad_pp);
            ratios.push(ratio);
            last_gap = rel(e.i_star, limit);
            rep.push(vec![
                num(eps),
                num(e.v_tilde_pp),
                num(e.i),
                num(e.i_star),
                num(m),
                num(lo),
                num(up),
                num(ratio),
                num(limit),
                num(last_gap),
                self.seed.to_string(),
                self.tag.clone(),
            ]);
        }
        rep.criteria.push(Criterion::at_most("limit_gap_final", last_gap, 0.05));
        let route_b = self.sphere_average_oracle(&domain, p, true, self.seed)?;
        rep.criteria.push(Criterion::at_most("limit_routes_agree", rel(route_b, limit), 0.02));
        rep.criteria.push(Criterion::at_most("chain_vtilde_le_i", lower, 1e-9));
        rep.criteria.push(Criterion::at_most("chain_i_le_istar", upper, 1e-9));
        let fitted = ratios.iter().cloned().fold(0.0, f64::max);
        let cert = sobolev_path_bound(&self.g, &self.norm, p, 100_000, self.seed)?;
        rep.criteria.push(match cert {
            Some(c) => Criterion::at_most("sobolev_constant", fitted, c),
            None => Criterion { name: "sobolev_constant".into(), measured: fitted, bound: f64::NAN, pass: fitted.is_finite() },
        });
        if matches!(self.norm, Norm::Euclidean { .. }) {
            rep.criteria.push(Criterion::at_most("i_equals_istar", eq_gap, 1e-6));
        }
        if self.norm.rotation_invariant() && self.g.m1() >= 2 {
            let (z, ball_gap) = self.barbieri(p)?;
            rep.criteria.push(Criterion::at_most("barbieri_direction_spread", z, 3.0));
            rep.criteria.push(Criterion::at_most("barbieri_ball_route", ball_gap, 0.02));
        }
        Ok(rep)
    }

    /// Largest z-score between the Barbieri constant for `e_1` and those for
    /// `e_2` and ten random unit vectors (independent seeds), and the
    /// relative gap of the ball route for `e_1`.
    fn barbieri(&self, p: f64) -> CoreResult<(f64, f64)> {
        let m1 = self.g.m1();
        let n = self.budget.mc_samples;
        let mut dirs = Vec::new();
        for i in 0..2 {
            let mut v = vec![0.0; m1];
            v[i] = 1.0;
            dirs.push(v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        while dirs.len() < 12 {
            let v: Vec<f64> = (0..m1).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let len = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            if len > 0.1 && len <= 1.0 {
                dirs.push(v.iter().map(|t| t / len).collect());
            }
        }
        let est: Vec<_> = dirs
            .iter()
            .enumerate()
            .map(|(i, v)| barbieri_constant(&self.g, &self.norm, p, v, n, self.seed + 1 + i as u64))
            .collect::<CoreResult<_>>()?;
        let z = est[1..].iter().map(|e| est[0].z_score(e).abs()).fold(0.0, f64::max);
        let ball = barbieri_ball_route(&self.g, &self.norm, p, &dirs[0], n, self.seed + 100)?;
        Ok((z, rel(ball.value, est[0].value)))
    }

    fn taylor(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("taylor", columns("taylor"));
        let p = self.p;
        let f = self.field.as_ref();
        let m1 = self.g.m1();
        let domain = self.common_domain(p)?;
        // With v = 2 grad f the integrand tends to |<grad f - v, pi>|^p = |<grad f, pi>|^p.
        let limit = self.sphere_average_oracle(&domain, p, false, self.seed)?;
        let grad_scaled = |c: f64| {
            move |x: &[f64], out: &mut [f64]| {
                if frame_pullback_into(&self.g, f, x, out) {
                    out[..m1].iter_mut().for_each(|v| *v *= c);
                } else {
                    out[..m1].iter_mut().for_each(|v| *v = f64::NAN);
                }
            }
        };
        let (mut good, mut bad) = (Vec::new(), Vec::new());
        for &eps in &self.eps {
            let ctx = self.ctx(eps, p)?;
            let r1 = ctx.taylor_remainder(f, grad_scaled(1.0), &domain)?;
            let r2 = ctx.taylor_remainder(f, grad_scaled(2.0), &domain)?;
            good.push(r1);
            bad.push(r2);
            rep.push(vec![num(eps), num(r1), num(r2), num(limit), self.seed.to_string(), self.tag.clone()]);
        }
        rep.criteria.push(Criterion::at_most("true_remainder_increases", increases(&good) as f64, 0.0));
        rep.criteria.push(Criterion::at_most("true_remainder_final_fraction", good[good.len() - 1] / good[0], 0.1));
        rep.criteria.push(Criterion::at_least("wrong_limit_positive", limit, f64::MIN_POSITIVE));
        rep.criteria.push(Criterion::at_most("wrong_remainder_limit_gap", rel(bad[bad.len() - 1], limit), 0.05));
        Ok(rep)
    }

    fn ludwig(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("ludwig", columns("ludwig"));
        let p = self.p;
        let f = self.field.as_ref();
        let radius = self.cfg.mollifier.radius;
        let domain = self.domain(radius)?;
        let limit = ludwig_limit(&self.g, &self.sphere, f, p, &domain)?;
        let mut last = f64::NAN;
        for &eps in &self.eps {
            let v = ludwig_lhs(&self.g, &self.norm, self.sphere.clone(), f, p, eps, radius, &self.budget, Some(&domain))?;
            last = rel(v.truncated, limit);
            rep.push(vec![
                num(eps),
                num(v.truncated),
                num(v.tail_bound),
                num(limit),
                num(last),
                self.seed.to_string(),
                self.tag.clone(),
            ]);
        }
        rep.criteria.push(Criterion::at_most("limit_gap_final", last, 0.10));
        Ok(rep)
    }

    fn reconstruction(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("reconstruction", columns("reconstruction"));
        let m = reconstruction_matrix(&self.g, &self.norm, self.budget.mc_samples, self.seed)?;
        let polar = reconstruction_matrix_polar(&self.sphere);
        let (mut z, mut dev, mut pdev) = (0.0f64, 0.0f64, 0.0f64);
        for (a, row) in m.iter().enumerate() {
            for (b, e) in row.iter().enumerate() {
                let t = if a == b { 1.0 } else { 0.0 };
                let d = (e.value - t).abs();
                dev = dev.max(d);
                z = z.max(if e.std_err > 0.0 { d / e.std_err } else if d <= 1e-12 { 0.0 } else { f64::INFINITY });
                pdev = pdev.max((polar[a][b] - t).abs());
                rep.push(vec![
                    a.to_string(),
                    b.to_string(),
                    num(e.value),
                    num(e.std_err),
                    num(t),
                    num(polar[a][b]),
                    self.seed.to_string(),
                    e.n.to_string(),
                    self.tag.clone(),
                ]);
            }
        }
        rep.criteria.push(Criterion::at_most("max_z_score", z, 3.0));
        rep.criteria.push(Criterion::at_most("max_abs_deviation", dev, 0.02));
        rep.criteria.push(Criterion::at_most("polar_max_abs_deviation", pdev, 1e-4));
        Ok(rep)
    }

    fn bv_mass(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("bv_mass", columns("bv_mass"));
        let f = self.field.as_ref();
        let (center, r) = match f.ball() {
            Some((c, r)) => (c.to_vec(), r),
            None => return Err(carnot_nonlocal::Error::InvalidParameter("bv_mass needs a ball_indicator field".into())),
        };
        let smoothed = self.smoothed_perimeter(&center, r)?;
        let polar = ball_perimeter(&self.sphere, r);
        let (mut istar, mut last) = (Vec::new(), f64::NAN);
        for &eps in &self.eps {
            let ctx = self.ctx(eps, 1.0)?;
            let e = ctx.energies(f, &ctx.default_domain(f)?)?;
            istar.push(e.i_star);
            last = rel(e.v_l1, smoothed);
            rep.push(vec![
                num(eps),
                num(e.i_star),
                num(e.v_l1),
                num(smoothed),
                num(polar),
                num(last),
                self.seed.to_string(),
                self.tag.clone(),
            ]);
        }
        let hi = istar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = istar.iter().cloned().fold(f64::INFINITY, f64::min);
        rep.criteria.push(Criterion::at_most("i_star_max_over_min", hi / lo, 2.0));
        rep.criteria.push(Criterion::at_most("v_l1_plateau_gap", last, 0.05));
        rep.criteria.push(Criterion::at_most("smoothed_vs_polar_perimeter", rel(smoothed, polar), 0.01));
        Ok(rep)
    }

    /// `||grad_G f_w||_1` for smoothed indicators with `w = r/4, r/8, r/16`
    /// on a box grid, extrapolated to `w = 0` (the error is `O(w^2)`).
    fn smoothed_perimeter(&self, center: &[f64], r: f64) -> CoreResult<f64> {
        let mut vals = Vec::new();
        for w in [r / 4.0, r / 8.0, r / 16.0] {
            let s = SmoothedBallIndicator::new(&self.g, &self.norm, center.to_vec(), r, w)?;
            vals.push(gradient_l1(&self.g, &s, self.cfg.checks.smooth_cells)?);
        }
        Ok((4.0 * vals[2] - vals[1]) / 3.0)
    }

    fn kernel_props(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("kernel_props", columns("kernel_props"));
        let families = [
            MollifierFamily::Ball { consts: self.consts },
            MollifierFamily::Fractional { consts: self.consts, p: self.p, radius: self.cfg.mollifier.radius },
        ];
        for fam in &families {
            let (mut mass_dev, mut closed) = (0.0f64, 0.0f64);
            for &eps in &self.eps {
                let prof = fam.make(eps)?;
                let k = kernel_k(&prof)?;
                let km = profile_mass(&k)?;
                let rm = profile_mass(&prof)?;
                let hi = k.support().1;
                let mut d = 0.0f64;
                for i in 1..10 {
                    let t = hi * i as f64 / 10.0;
                    let (a, b) = (k.kernel_value(t), k.kernel_quadrature(t)?);
                    d = d.max(rel(a, b));
                }
                mass_dev = mass_dev.max((km - 1.0).abs());
                closed = closed.max(d);
                rep.push(vec![
                    fam.name().into(),
                    num(eps),
                    num(km),
                    num(rm),
                    num(d),
                    self.seed.to_string(),
                    self.tag.clone(),
                ]);
            }
            rep.criteria.push(Criterion::at_most(&format!("kernel_mass_{}", fam.name()), mass_dev, 1e-3));
            if matches!(fam, MollifierFamily::Ball { .. }) {
                rep.criteria.push(Criterion::at_most("closed_form_vs_quadrature_ball", closed, 1e-8));
            }
        }
        Ok(rep)
    }

    fn norm_diagnostics(&self) -> CoreResult<ExperimentReport> {
        let mut rep = ExperimentReport::new("norm_diagnostics", columns("norm_diagnostics"));
        let n_ax = self.cfg.checks.axiom_samples;
        let row = |rep: &mut ExperimentReport, name: &str, v: f64, n: usize| {
            rep.push(vec![name.into(), num(v), self.seed.to_string(), n.to_string(), self.tag.clone()]);
        };
        let ax = group_axioms(&self.g, n_ax, self.seed);
        for (name, v) in [
            ("associativity", ax.assoc),
            ("inverse", ax.inverse),
            ("identity", ax.identity),
            ("dilation_homomorphism", ax.dil_hom),
            ("dilation_composition", ax.dil_comp),
        ] {
            row(&mut rep, name, v, n_ax);
            rep.criteria.push(Criterion::at_most(name, v, 1e-12));
        }
        let d = norm_diagnostics(&self.g, &self.norm, n_ax, self.seed)?;
        for (name, v) in [
            ("triangle_violations", d.triangle_violations),
            ("symmetry_violations", d.symmetry_violations),
            ("homogeneity_violations", d.homogeneity_violations),
        ] {
            row(&mut rep, name, v as f64, d.samples);
            rep.criteria.push(Criterion::at_most(name, v as f64, 0.0));
        }
        row(&mut rep, "min_grad", d.min_grad, d.samples);
        row(&mut rep, "max_grad", d.max_grad, d.samples);
        row(&mut rep, "max_horizontal_projection", d.max_horizontal_projection, d.samples);
        if let Some(v) = grad_vs_fd(&self.g, &self.norm, 100, self.seed)? {
            row(&mut rep, "grad_vs_fd_relative", v, 100);
            rep.criteria.push(Criterion::at_most("grad_vs_fd_relative", v, 1e-6));
        }
        if self.g.is_heisenberg() && matches!(self.norm, Norm::Koranyi) {
            let pole = koranyi_grad(&[0.0, 0.0, 1.0])?.norm();
            row(&mut rep, "koranyi_grad_at_pole", pole, 1);
            rep.criteria.push(Criterion::at_most("koranyi_grad_at_pole", pole, 0.0));
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let x: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
                let lhs = koranyi_grad(&x)?.norm();
                let rhs = (x[0] * x[0] + x[1] * x[1]).sqrt() / koranyi_norm(&x)?;
                worst = worst.max((lhs - rhs).abs());
            }
            row(&mut rep, "koranyi_grad_modulus", worst, 100);
            rep.criteria.push(Criterion::at_most("koranyi_grad_modulus", worst, 1e-10));
        }
        Ok(rep)
    }
}

/// Largest coordinate errors of the group identities on random samples.
pub struct AxiomErrors {
    pub assoc: f64,
    pub inverse: f64,
    pub identity: f64,
    pub dil_hom: f64,
    pub dil_comp: f64,
}

pub fn group_axioms(g: &CarnotGroup<f64>, samples: usize, seed: u64) -> AxiomErrors {
    let n = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pt = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect() };
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let mul = |a: &[f64], b: &[f64]| {
        let mut o = vec![0.0; n];
        g.multiply_into(a, b, &mut o);
        o
    };
    let dil = |l: f64, a: &[f64]| {
        let mut o = vec![0.0; n];
        g.dilate_into(l, a, &mut o);
        o
    };
    let e = vec![0.0; n];
    let mut r = AxiomErrors { assoc: 0.0, inverse: 0.0, identity: 0.0, dil_hom: 0.0, dil_comp: 0.0 };
    for _ in 0..samples {
        let (x, y, z) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
        let (l, m) = (0.5 + 1.5 * rng.random::<f64>(), 0.5 + 1.5 * rng.random::<f64>());
        r.assoc = r.assoc.max(dist(&mul(&mul(&x, &y), &z), &mul(&x, &mul(&y, &z))));
        let xi: Vec<f64> = g.inverse(&x).map(|p| p.0).unwrap_or_else(|_| vec![f64::NAN; n]);
        r.inverse = r.inverse.max(dist(&mul(&x, &xi), &e)).max(dist(&mul(&xi, &x), &e));
        r.identity = r.identity.max(dist(&mul(&x, &e), &x)).max(dist(&mul(&e, &x), &x));
        r.dil_hom = r.dil_hom.max(dist(&dil(l, &mul(&x, &y)), &mul(&dil(l, &x), &dil(l, &y))));
        r.dil_comp = r.dil_comp.max(dist(&dil(l, &dil(m, &x)), &dil(l * m, &x)));
    }
    r
}

/// Largest relative gap between the analytic horizontal gradient of the
/// norm and central differences along the frame; `None` if the norm has no
/// closed-form gradient.
pub fn grad_vs_fd(g: &CarnotGroup<f64>, norm: &Norm<f64>, samples: usize, seed: u64) -> CoreResult<Option<f64>> {
    let n = g.dim();
    let m1 = g.m1();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut seen = 0;
    let bbox: Aabb<f64> = norm.bounding_box(1.0);
    while seen < samples {
        let x: Vec<f64> = (0..n).map(|i| bbox.lo[i] + (bbox.hi[i] - bbox.lo[i]) * rng.random::<f64>()).collect();
        if norm.eval(&x) < 0.2 {
            continue;
        }
        let mut a = vec![0.0; m1];
        if !norm.analytic_horizontal_grad(g, &x, &mut a) {
            return Ok(None);
        }
        let fd = grad_norm_fd(g, norm, &x, 1e-4)?;
        let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let d = a.iter().zip(fd.iter()).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(d / scale);
        seen += 1;
    }
    Ok(Some(worst))
}
