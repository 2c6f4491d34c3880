use std::sync::Arc;

use carnot_nonlocal::mollifier::{ball_profile, fractional_profile, kernel_k};
use carnot_nonlocal::nonlocal::{
    barbieri_constant, ludwig_lhs, ludwig_tail_bound, reconstruction_matrix, LocalSums,
};
use carnot_nonlocal::quad::{adaptive_simpson, NormConstants, XDomain};
use carnot_nonlocal::testfn::{frame_pullback, Affine, Bump, ScalarField};
use carnot_nonlocal::{Group64, NonlocalContext, Norm, QuadBudget, SphereRule};
use proptest::prelude::*;

fn budget() -> QuadBudget {
    QuadBudget { sphere_nodes: 4, radial_nodes: 6, radial_panels: 8, grid_resolution: 12, ..QuadBudget::default() }
}

fn ctx(g: Group64, norm: Norm<f64>, eps: f64, p: f64, fractional: bool) -> NonlocalContext<f64> {
    let b = budget();
    let s = Arc::new(SphereRule::new(&g, &norm, b.sphere_nodes).unwrap());
    let c = NormConstants::from_rule(&s);
    let prof = if fractional { fractional_profile(&c, eps, p, 1.0).unwrap() } else { ball_profile(&c, eps).unwrap() };
    NonlocalContext::with_sphere(g, norm, s, prof, p, b).unwrap()
}

fn h1(eps: f64, p: f64) -> NonlocalContext<f64> {
    ctx(Group64::heisenberg(), Norm::koranyi(), eps, p, false)
}

fn vnorm(l: &LocalSums<f64>) -> f64 {
    l.v.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn first_estimate_holds_pointwise(x in prop::collection::vec(-1.0..1.0f64, 3), eps in 0.05..0.5f64) {
        let c = h1(eps, 2.0);
        let f = Bump::new(&c.group, vec![0.0; 3], 1.0).unwrap();
        let l = c.local(&f, &x).unwrap();
        prop_assert!(vnorm(&l) <= 4.0 * l.v_tilde + 1e-14);
    }

    #[test]
    fn representation_formula_on_h1(x in prop::collection::vec(-0.8..0.8f64, 3), fractional in any::<bool>()) {
        let c = ctx(Group64::heisenberg(), Norm::koranyi(), 0.2, 2.0, fractional);
        let f = Bump::new(&c.group, vec![0.0; 3], 1.0).unwrap();
        let k = kernel_k(&c.profile).unwrap();
        let v = c.v_eps(&f, &x).unwrap();
        let w = c.convolve_gradient(&f, &k, &x).unwrap();
        prop_assert!((v[0] - w[0]).abs() < 2e-3 && (v[1] - w[1]).abs() < 2e-3, "{:?} vs {:?}", v, w);
    }
}

#[test]
fn zero_field_has_zero_energies_and_remainder() {
    let c = h1(0.3, 2.0);
    let f = Bump::new(&c.group, vec![0.0; 3], 1.0).unwrap();
    let zero = Affine { a: vec![0.0; 3], b: 0.0 };
    let d = c.default_domain(&f).unwrap();
    let e = c.energies(&zero, &d).unwrap();
    assert_eq!((e.i, e.i_star, e.v_tilde_pp, e.v_l1), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(c.taylor_remainder(&zero, |_, o| o.fill(0.0), &d).unwrap(), 0.0);
}

#[test]
fn euclidean_norm_makes_both_energies_equal() {
    let c = ctx(Group64::euclidean(2).unwrap(), Norm::euclidean(2), 0.2, 1.5, false);
    let f = Bump::new(&c.group, vec![0.1, 0.0], 1.0).unwrap();
    let e = c.energies(&f, &c.default_domain(&f).unwrap()).unwrap();
    assert!((e.i - e.i_star).abs() <= 1e-12 * e.i_star);
}

#[test]
fn energy_chain_on_h1() {
    let c = h1(0.25, 2.0);
    let f = Bump::new(&c.group, vec![0.0; 3], 1.0).unwrap();
    let e = c.energies(&f, &c.default_domain(&f).unwrap()).unwrap();
    let m = c.sphere().total() * c.radial().mass();
    assert!(e.v_tilde_pp <= m * e.i * (1.0 + 1e-12));
    assert!(e.i <= e.i_star);
}

#[test]
fn unit_mass_kernel_reproduces_constant_gradients() {
    let c = h1(0.3, 2.0);
    let k = kernel_k(&c.profile).unwrap();
    // Affine in the first layer: grad_G f = (0.4, -1.1) everywhere.
    let f = Affine { a: vec![0.4, -1.1, 0.0], b: 3.0 };
    let w = c.convolve_gradient(&f, &k, &[0.3, 0.2, -0.7]).unwrap();
    assert!((w[0] - 0.4).abs() < 1e-6 && (w[1] + 1.1).abs() < 1e-6, "{w:?}");
}

#[test]
fn real_line_matches_brute_force_convolution() {
    let eps = 0.2;
    let c = ctx(Group64::euclidean(1).unwrap(), Norm::euclidean(1), eps, 2.0, false);
    let f = Bump::new(&c.group, vec![0.0], 1.0).unwrap();
    let df = |t: f64| frame_pullback(&c.group, &f, &[t]).unwrap()[0];
    // K(t) = ln(eps / t) / (2 eps); substitute y = eps u^2 to remove the log.
    // Near the edge of the support the bump is flat to all orders, which
    // slows the radial Gauss rule down, hence the loose tolerance.
    for x in [-0.7, -0.2, 0.05, 0.4, 0.85] {
        let g = |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            let y = eps * u * u;
            (df(x - y) + df(x + y)) * (eps / y).ln() / (2.0 * eps) * 2.0 * eps * u
        };
        let oracle = adaptive_simpson(g, 0.0, 1.0, 1e-11);
        let v = c.v_eps(&f, &[x]).unwrap()[0];
        assert!((v - oracle).abs() < 1e-4, "x = {x}: {v} vs {oracle}");
    }
}

#[test]
fn reconstruction_on_the_plane() {
    let g = Group64::euclidean(2).unwrap();
    let m = reconstruction_matrix(&g, &Norm::euclidean(2), 200_000, 11).unwrap();
    for (a, row) in m.iter().enumerate() {
        for (b, e) in row.iter().enumerate() {
            let t = if a == b { 1.0 } else { 0.0 };
            assert!((e.value - t).abs() < 0.01);
        }
    }
}

#[test]
fn barbieri_rejects_zero_direction() {
    let g = Group64::heisenberg();
    assert!(barbieri_constant(&g, &Norm::koranyi(), 2.0, &[0.0, 0.0], 1000, 1).is_err());
}

#[test]
fn ludwig_preconditions_and_tail_bound() {
    let g = Group64::heisenberg();
    let n = Norm::koranyi();
    let b = budget();
    let s = Arc::new(SphereRule::new(&g, &n, 3).unwrap());
    let f = Bump::new(&g, vec![0.0; 3], 1.0).unwrap();
    assert!(ludwig_lhs(&g, &n, s.clone(), &f, 2.0, 1.0, 1.0, &b, None).is_err());
    let zero = Affine { a: vec![0.0; 3], b: 0.0 };
    let dom = XDomain::Grid(carnot_nonlocal::quad::BoxGrid::uniform(f.support_box().unwrap(), 6).unwrap());
    // The zero field has no support box, so the grid is supplied; the tail
    // bound then needs ||f||_p and fails cleanly.
    assert!(ludwig_lhs(&g, &n, s.clone(), &zero, 2.0, 0.1, 1.0, &b, Some(&dom)).is_err());
    let v = ludwig_lhs(&g, &n, s, &f, 2.0, 0.1, 1.0, &b, None).unwrap();
    assert!(v.truncated > 0.0 && v.tail_bound > 0.0);
    // eps 2^p ||f||^p sigma R^(eps p - p) / (p - eps p) at R = 2, p = 2, eps = 0.25:
    let t = ludwig_tail_bound(0.25, 2.0, 3.0, 5.0, 2.0);
    assert!((t - 0.25 * 4.0 * 3.0 * 5.0 * 2f64.powf(-1.5) / 1.5).abs() < 1e-14);
}
