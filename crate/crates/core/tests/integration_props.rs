use carnot_nonlocal::quad::{
    ball_volume, integrate_box, mc, radial_integral, BoxGrid, NormConstants, VolumeMethod,
};
use carnot_nonlocal::testfn::{Bump, ScalarField};
use carnot_nonlocal::{Aabb, Group64, HomogeneousNorm, Norm, QuadBudget, SphereRule};
use proptest::prelude::*;

fn h1_bump() -> (Group64, Bump<f64>) {
    let g = Group64::heisenberg();
    let f = Bump::new(&g, vec![0.1, -0.2, 0.05], 0.8).unwrap();
    (g, f)
}

fn integral_over(f: &(dyn Fn(&[f64]) -> f64 + Sync), b: Aabb<f64>) -> f64 {
    integrate_box(f, &BoxGrid::uniform(b, 60).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn haar_measure_is_left_invariant(a in prop::collection::vec(-0.5..0.5f64, 3)) {
        let (g, f) = h1_bump();
        let supp = f.support_box().unwrap();
        let base = integral_over(&|x| f.eval(x), supp.clone());
        // x -> f(a . x) is supported in a^-1 . supp.
        let ainv = g.inverse(&a).unwrap();
        let moved = g.product_box(&Aabb::point(&ainv), &supp).unwrap();
        let shifted = integral_over(&|x| f.eval(&g.multiply(&a, x).unwrap()), moved);
        prop_assert!((shifted - base).abs() <= 2e-3 * base, "{} vs {}", shifted, base);
    }

    #[test]
    fn dilation_scales_by_q(l in 0.5..2.0f64) {
        let (g, f) = h1_bump();
        let supp = f.support_box().unwrap();
        let base = integral_over(&|x| f.eval(x), supp.clone());
        let b = g.dilate_box(1.0 / l, &supp);
        let scaled = integral_over(&|x| f.eval(&g.dilate(l, x).unwrap()), b);
        prop_assert!((scaled * l.powi(4) - base).abs() <= 2e-3 * base);
    }
}

#[test]
fn polar_formula_matches_grid_for_radial_functions() {
    let g = Group64::heisenberg();
    let n = Norm::koranyi();
    let s = SphereRule::new(&g, &n, 8).unwrap();
    let c = NormConstants::from_rule(&s);
    let u = |r: f64| (1.0 - r * r).max(0.0).powi(3);
    let polar = radial_integral(4, c.sigma, u, 0.0, 1.0).unwrap();
    let grid = integrate_box(|x| u(n.eval(x)), &BoxGrid::uniform(n.bounding_box(1.0), 120).unwrap()).unwrap();
    assert!((polar - grid).abs() < 2e-3 * polar, "{polar} vs {grid}");
}

#[test]
fn koranyi_volume_three_routes() {
    let g = Group64::heisenberg();
    let n = Norm::koranyi();
    let b = QuadBudget { mc_samples: 400_000, grid_resolution: 100, ..QuadBudget::default() };
    let exact = std::f64::consts::PI.powi(2) / 8.0;
    let p = ball_volume(&g, &n, VolumeMethod::Polar, &b).unwrap();
    let gr = ball_volume(&g, &n, VolumeMethod::Grid, &b).unwrap();
    let m = ball_volume(&g, &n, VolumeMethod::MonteCarlo, &b).unwrap();
    assert!((p.value - exact).abs() < 1e-7);
    assert!((gr.value - exact).abs() < 5e-3 * exact);
    assert!((m.value - exact).abs() < 4.0 * m.std_err);
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let bbox = Aabb::symmetric(vec![1.0; 3]);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            mc::accumulate(7, 300_000, 2, |rng, out: &mut [f64]| {
                let mut x = [0.0f64; 3];
                mc::uniform_in_box(rng, &bbox, &mut x);
                out[0] = x[0] * x[1];
                out[1] = x.iter().map(|v| v * v).sum();
                true
            })
        })
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.conditional_mean(0).value.to_bits(), b.conditional_mean(0).value.to_bits());
    assert_eq!(a.conditional_mean(1).value.to_bits(), b.conditional_mean(1).value.to_bits());
}
