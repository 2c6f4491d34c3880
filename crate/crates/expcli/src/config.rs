//! TOML experiment configuration.
//!
//! ```toml
//! experiments = ["grad_convergence", "energy_limit"]
//! seed = 20240917          # overrides quad.seed
//! out = "out/h1"           # default output directory
//! p = 2.0
//!
//! [group]                  # kind = euclidean (n) | heisenberg | step2
//! kind = "heisenberg"      # step2: layer_dims = [m1, m2], corrections = [[..], ..]
//!
//! [norm]                   # kind = default | euclidean | lq (q, scales) | koranyi | gauge (c)
//! kind = "koranyi"
//!
//! [mollifier]              # family = ball | fractional; radius = R of the fractional family
//! family = "ball"
//!
//! [field]                  # kind = bump | poly_cutoff (a) | ball_indicator; center, radius
//! kind = "bump"
//! radius = 1.0
//!
//! [eps]                    # eps0 * 2^-j, j = 0..levels; eps0 defaults to radius / 4
//! levels = 6               # or values = [..] (strictly decreasing)
//!
//! [quad]                   # carnot_nonlocal::QuadBudget
//! sphere_nodes = 6
//!
//! [checks]
//! min_slope = 1.0          # assert the fitted slope of grad_convergence
//! ```

use std::path::PathBuf;

use carnot_nonlocal::group::GroupConfig;
use carnot_nonlocal::mollifier::{eps_grid, MollifierFamily};
use carnot_nonlocal::quad::NormConstants;
use carnot_nonlocal::testfn::{BallIndicator, Bump, PolyCutoff};
use carnot_nonlocal::{CarnotGroup, Norm, QuadBudget, ScalarField};
use serde::Deserialize;

use crate::RunError;

/// Experiment ids with one-line descriptions.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("grad_convergence", "L^p error of V_eps f against the horizontal gradient along the eps grid"),
    ("repr_formula", "V_eps f against the convolution grad_G f * K_eps at random points"),
    ("energy_limit", "I*_{eps,p}, I_{eps,p}, ||V~_eps||_p^p against the limit constant, the inequality chain and the Barbieri constant"),
    ("taylor", "L^p Taylor remainder for v = grad_G f and for v = 2 grad_G f"),
    ("ludwig", "eps-scaled anisotropic fractional seminorm against its limit, with the tail bound"),
    ("reconstruction", "Monte Carlo matrix Q fint pi (x) grad_G N against the identity"),
    ("bv_mass", "I*_{eps,1} and ||V_eps||_1 of a ball indicator against the horizontal perimeter"),
    ("kernel_props", "mass of K_eps and closed form against quadrature, ball and fractional families"),
    ("norm_diagnostics", "group axioms, norm axioms on samples and gradient checks"),
];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiments: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_p")]
    pub p: f64,
    pub group: GroupSpec,
    #[serde(default)]
    pub norm: NormSpec,
    #[serde(default)]
    pub mollifier: MollifierSpec,
    pub field: FieldSpec,
    #[serde(default)]
    pub eps: EpsSpec,
    #[serde(default)]
    pub quad: QuadBudget,
    #[serde(default)]
    pub checks: Checks,
}

fn default_p() -> f64 {
    2.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpec {
    Euclidean { n: usize },
    Heisenberg,
    Step2 {
        layer_dims: Vec<usize>,
        #[serde(default)]
        corrections: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormSpec {
    #[default]
    Default,
    Euclidean,
    Lq {
        q: f64,
        #[serde(default)]
        scales: Option<Vec<f64>>,
    },
    Koranyi,
    Gauge {
        #[serde(default)]
        c: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Ball,
    Fractional,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MollifierSpec {
    pub family: Family,
    /// Truncation radius of the fractional family.
    pub radius: f64,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        Self { family: Family::Ball, radius: 1.0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Bump {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
    },
    PolyCutoff {
        #[serde(default)]
        center: Option<Vec<f64>>,
        a: Vec<f64>,
        radius: f64,
    },
    BallIndicator {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsSpec {
    pub eps0: Option<f64>,
    pub levels: usize,
    pub values: Option<Vec<f64>>,
}

impl Default for EpsSpec {
    fn default() -> Self {
        Self { eps0: None, levels: 6, values: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Lower bound asserted on the fitted log-log slope of `grad_convergence`.
    pub min_slope: Option<f64>,
    /// Random points for `repr_formula`.
    pub repr_points: usize,
    /// Samples for the group and norm axiom checks.
    pub axiom_samples: usize,
    /// Grid cells for the smoothed-indicator perimeter oracle.
    pub smooth_cells: usize,
}

impl Default for Checks {
    fn default() -> Self {
        Self { min_slope: None, repr_points: 100, axiom_samples: 1000, smooth_cells: 2_000_000 }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, RunError> {
        let cfg: Self = toml::from_str(src).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, RunError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        for e in &self.experiments {
            if !EXPERIMENTS.iter().any(|(id, _)| id == e) {
                return Err(RunError::Config(format!("unknown experiment `{e}`")));
            }
        }
        if !(self.p >= 1.0) {
            return Err(RunError::Config(format!("p must be >= 1, got {}", self.p)));
        }
        let g = self.build_group()?;
        self.build_norm(&g)?;
        self.build_field(&g)?;
        self.eps_grid()?;
        Ok(())
    }

    /// The effective seed: top-level `seed`, else `quad.seed`.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.quad.seed)
    }

    pub fn budget(&self) -> QuadBudget {
        QuadBudget { seed: self.seed(), ..self.quad.clone() }
    }

    pub fn build_group(&self) -> Result<CarnotGroup<f64>, RunError> {
        Ok(match &self.group {
            GroupSpec::Euclidean { n } => CarnotGroup::euclidean(*n)?,
            GroupSpec::Heisenberg => CarnotGroup::heisenberg(),
            GroupSpec::Step2 { layer_dims, corrections } => {
                CarnotGroup::from_config(&GroupConfig { layer_dims: layer_dims.clone(), corrections: corrections.clone() })?
            }
        })
    }

    pub fn build_norm(&self, g: &CarnotGroup<f64>) -> Result<Norm<f64>, RunError> {
        let n = match &self.norm {
            NormSpec::Default => Norm::default_for(g)?,
            NormSpec::Euclidean => Norm::euclidean(g.dim()),
            NormSpec::Lq { q, scales } => Norm::lq(*q, scales.clone().unwrap_or_else(|| vec![1.0; g.dim()]))?,
            NormSpec::Koranyi => Norm::koranyi(),
            NormSpec::Gauge { c } => Norm::gauge(g, *c)?,
        };
        carnot_nonlocal::HomogeneousNorm::check_group(&n, g)?;
        Ok(n)
    }

    fn center(&self, g: &CarnotGroup<f64>, c: &Option<Vec<f64>>) -> Vec<f64> {
        c.clone().unwrap_or_else(|| vec![0.0; g.dim()])
    }

    pub fn field_radius(&self) -> f64 {
        match &self.field {
            FieldSpec::Bump { radius, .. } | FieldSpec::PolyCutoff { radius, .. } | FieldSpec::BallIndicator { radius, .. } => {
                *radius
            }
        }
    }

    pub fn build_field(&self, g: &CarnotGroup<f64>) -> Result<Box<dyn ScalarField<f64>>, RunError> {
        Ok(match &self.field {
            FieldSpec::Bump { center, radius } => Box::new(Bump::new(g, self.center(g, center), *radius)?),
            FieldSpec::PolyCutoff { center, a, radius } => {
                Box::new(PolyCutoff::new(g, self.center(g, center), a.clone(), *radius)?)
            }
            FieldSpec::BallIndicator { center, radius } => {
                let norm = self.build_norm(g)?;
                Box::new(BallIndicator::new(g, &norm, self.center(g, center), *radius)?)
            }
        })
    }

    pub fn family(&self, consts: NormConstants<f64>, p: f64) -> MollifierFamily<f64> {
        match self.mollifier.family {
            Family::Ball => MollifierFamily::Ball { consts },
            Family::Fractional => MollifierFamily::Fractional { consts, p, radius: self.mollifier.radius },
        }
    }

    /// Strictly decreasing positive scales.
    pub fn eps_grid(&self) -> Result<Vec<f64>, RunError> {
        let v = match &self.eps.values {
            Some(v) => v.clone(),
            None => eps_grid(self.eps.eps0.unwrap_or(self.field_radius() / 4.0), self.eps.levels),
        };
        if v.is_empty() || v.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || v.windows(2).any(|w| w[1] >= w[0]) {
            return Err(RunError::Config(format!("eps grid must be strictly decreasing and positive: {v:?}")));
        }
        Ok(v)
    }
}
