//! Acceptance suite: runs the shipped configs and checks each criterion at
//! its stated tolerance and runtime. Prints one PASS/FAIL line per criterion.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use carnot_exp::{run, run_experiment, ExperimentConfig, ExperimentReport};

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Runs each (config, experiment) pair at most once and keeps its wall time.
#[derive(Default)]
struct Runs {
    done: HashMap<(String, String), (ExperimentReport, Duration)>,
}

impl Runs {
    fn get(&mut self, cfg: &str, exp: &str) -> &(ExperimentReport, Duration) {
        self.done.entry((cfg.into(), exp.into())).or_insert_with(|| {
            let c = config(cfg);
            assert!(c.experiments.iter().any(|e| e == exp), "{cfg} does not list {exp}");
            let t = Instant::now();
            let r = run_experiment(&c, exp);
            (r, t.elapsed())
        })
    }
}

/// Collected sub-checks of one criterion.
struct Verdict {
    lines: Vec<String>,
    ok: bool,
    time: Duration,
}

impl Verdict {
    fn new() -> Self {
        Self { lines: Vec::new(), ok: true, time: Duration::ZERO }
    }

    fn check(&mut self, label: &str, pass: bool, detail: String) {
        self.ok &= pass;
        self.lines.push(format!("    {} {label}: {detail}", if pass { "ok  " } else { "FAIL" }));
    }

    /// Requires the named criteria of a report (the report must also have
    /// completed without error).
    fn require(&mut self, runs: &mut Runs, cfg: &str, exp: &str, names: &[&str]) {
        let (rep, t) = runs.get(cfg, exp);
        let (rep, t) = (rep.clone(), *t);
        self.time += t;
        if let Some(e) = &rep.error {
            self.check(&format!("{cfg}/{exp}"), false, format!("aborted: {e}"));
            return;
        }
        for n in names {
            match rep.criterion(n) {
                Some(c) => self.check(
                    &format!("{cfg}/{exp}/{n}"),
                    c.pass,
                    format!("measured {:.3e}, bound {:.3e}", c.measured, c.bound),
                ),
                None => self.check(&format!("{cfg}/{exp}/{n}"), false, "criterion missing".into()),
            }
        }
    }

    fn runtime(&mut self, limit_s: f64) {
        let s = self.time.as_secs_f64();
        self.check("runtime", s < limit_s, format!("{s:.2} s, limit {limit_s} s"));
    }
}

const AXIOMS: [&str; 5] = ["associativity", "inverse", "identity", "dilation_homomorphism", "dilation_composition"];

fn criterion(id: usize, runs: &mut Runs) -> (&'static str, Verdict) {
    let mut v = Verdict::new();
    let title = match id {
        1 => {
            for cfg in ["r1_bump.toml", "r2_bump.toml", "h1_bump.toml"] {
                v.require(runs, cfg, "norm_diagnostics", &AXIOMS);
            }
            // Per group: each diagnostic run must stay under a second.
            let per_group = v.time.as_secs_f64() / 3.0;
            v.check("runtime per group", per_group < 1.0, format!("{per_group:.3} s, limit 1 s"));
            "group axioms on R^n and H^1"
        }
        2 => {
            v.require(
                runs,
                "h1_bump.toml",
                "norm_diagnostics",
                &["grad_vs_fd_relative", "koranyi_grad_at_pole", "koranyi_grad_modulus"],
            );
            v.runtime(1.0);
            "Koranyi closed forms"
        }
        3 => {
            v.require(
                runs,
                "h1_bump.toml",
                "kernel_props",
                &["kernel_mass_ball", "kernel_mass_fractional", "closed_form_vs_quadrature_ball"],
            );
            v.runtime(5.0);
            "kernel mass identity"
        }
        4 => {
            v.require(runs, "h1_bump.toml", "repr_formula", &["max_discrepancy"]);
            v.runtime(120.0);
            "representation formula on H^1"
        }
        5 => {
            for cfg in ["r1_bump.toml", "r2_bump.toml", "h1_bump.toml"] {
                v.require(runs, cfg, "grad_convergence", &["error_increases", "final_relative_error"]);
            }
            v.runtime(600.0);
            "gradient convergence on R^1, R^2, H^1"
        }
        6 => {
            for cfg in ["r2_bump.toml", "r2_l4.toml", "h1_bump.toml"] {
                let mut one = Verdict::new();
                one.require(runs, cfg, "reconstruction", &["max_z_score", "max_abs_deviation"]);
                one.runtime(60.0);
                v.ok &= one.ok;
                v.time += one.time;
                v.lines.extend(one.lines);
            }
            "reconstruction identity"
        }
        7 => {
            v.require(
                runs,
                "h1_bump.toml",
                "energy_limit",
                &["limit_gap_final", "limit_routes_agree", "barbieri_direction_spread", "barbieri_ball_route"],
            );
            v.runtime(600.0);
            "energy limit and Barbieri constant"
        }
        8 => {
            v.require(runs, "h1_ludwig.toml", "ludwig", &["limit_gap_final"]);
            let (rep, _) = runs.get("h1_ludwig.toml", "ludwig");
            let col = rep.columns.iter().position(|c| c == "tail_bound");
            let reported = col.is_some_and(|i| {
                !rep.rows.is_empty() && rep.rows.iter().all(|r| r[i].parse::<f64>().is_ok_and(f64::is_finite))
            });
            v.check("tail bound reported", reported, format!("{} rows", rep.rows.len()));
            v.runtime(600.0);
            "Ludwig limit"
        }
        9 => {
            v.require(runs, "h1_bump.toml", "energy_limit", &["chain_vtilde_le_i", "chain_i_le_istar", "sobolev_constant"]);
            v.require(runs, "r2_bump.toml", "energy_limit", &["chain_vtilde_le_i", "chain_i_le_istar", "i_equals_istar"]);
            v.runtime(300.0);
            "inequality chain and Sobolev bound"
        }
        10 => {
            v.require(
                runs,
                "h1_bump.toml",
                "taylor",
                &["true_remainder_increases", "true_remainder_final_fraction", "wrong_limit_positive", "wrong_remainder_limit_gap"],
            );
            v.runtime(600.0);
            "Taylor remainder"
        }
        11 => {
            v.require(
                runs,
                "h1_bv.toml",
                "bv_mass",
                &["i_star_max_over_min", "v_l1_plateau_gap", "smoothed_vs_polar_perimeter"],
            );
            v.runtime(600.0);
            "BV boundedness for a Koranyi ball"
        }
        12 => {
            let t = Instant::now();
            let mut cfg = config("h1_bump.toml");
            cfg.experiments = vec!["reconstruction".into(), "repr_formula".into(), "kernel_props".into()];
            let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
            for d in &dirs {
                run(&cfg, d.path()).expect("run");
            }
            for name in ["reconstruction.csv", "repr_formula.csv", "kernel_props.csv", "summary.json"] {
                let a = std::fs::read(dirs[0].path().join(name)).unwrap();
                let b = std::fs::read(dirs[1].path().join(name)).unwrap();
                v.check(name, !a.is_empty() && a == b, format!("{} bytes", a.len()));
            }
            v.time = t.elapsed();
            "determinism of CSV output"
        }
        _ => unreachable!(),
    };
    (title, v)
}

#[test]
fn acceptance() {
    let mut runs = Runs::default();
    let mut failed = Vec::new();
    let mut summary = Vec::new();
    for id in 1..=12 {
        let (title, v) = criterion(id, &mut runs);
        let line = format!(
            "criterion {id:>2} {}: {title} ({:.1} s)",
            if v.ok { "PASS" } else { "FAIL" },
            v.time.as_secs_f64()
        );
        println!("{line}");
        for l in &v.lines {
            println!("{l}");
        }
        if !v.ok {
            failed.push(id);
        }
        summary.push(line);
    }
    println!("\nsummary:");
    for l in &summary {
        println!("{l}");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
