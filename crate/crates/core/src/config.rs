//! Experiment configuration: a TOML file with `[problem]`, `[solver]`,
//! `[reduction]` and `[run]` sections, overridable by `key=value` strings.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::VectorField;
use crate::fields::{
    AffineDiffusion, ConstantDiffusion, ConstantPotential, DiagonalQuadratic, DiffusionField,
    GaussianWell, GaussianWells, PotentialField, QuadraticWell,
};
use crate::grid::{GridDomain, DEFAULT_MEMORY_CAP};
use crate::penalty::{default_k, default_theta, PenaltyConfig};
use crate::problem::ProblemSpec;
use crate::reduction::ReductionOptions;
use crate::region::BoxRegion;
use crate::solvers::SolverOptions;
use crate::{Error, Result};

/// Potential family selected by `family = "..."`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        value: f64,
    },
    /// `base + curvature |z - center|^2`.
    QuadraticWell {
        #[serde(default = "one")]
        base: f64,
        curvature: f64,
        center: Vec<f64>,
    },
    /// `base - sum depth exp(-|z - center|^2 / width^2)`.
    GaussianWells {
        base: f64,
        wells: Vec<GaussianWell>,
    },
}

/// Diffusion family selected by `family = "..."`; identity when the section is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    #[default]
    Identity,
    Diagonal {
        diag: Vec<f64>,
    },
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    /// `J_ii = base_i + sum_k quad[i][k] z_k^2`.
    DiagonalQuadratic {
        base: Vec<f64>,
        quad: Vec<Vec<f64>>,
    },
    /// `J = offset + sum_k z_k slopes[k]` with declared bounds `nu` and `upper`.
    Affine {
        offset: Vec<Vec<f64>>,
        slopes: Vec<Vec<Vec<f64>>>,
        nu: f64,
        upper: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    /// Penalisation box `[lo1, hi1, lo2, hi2, ...]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Penalty lower bound `alpha`; defaults to the declared infimum of `V`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Half-width `L` of the fixed computational box.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Nodes per axis `n` of the fixed computational box.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_p() -> f64 {
    3.0
}
fn default_half_width() -> f64 {
    15.0
}
fn default_nodes() -> usize {
    257
}

/// Subcommand parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `eps` for solve, reduce, multiplicity and identity-check.
    pub eps: f64,
    /// Coarsest `eps` and number of halvings for concentrate.
    pub eps0: f64,
    pub levels: usize,
    /// Seed points (solve and concentrate use the first; default: argmin of Gamma).
    pub seed_points: Vec<Vec<f64>>,
    /// Points for frozen-sigma; the pin point for identity-check.
    pub z_points: Vec<Vec<f64>>,
    /// Box of `xi` for reduce, flat `[lo1, hi1, ...]`; default `lambda / eps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_box: Option<Vec<f64>>,
    /// Landscape samples per axis for reduce.
    pub landscape_nodes: usize,
    /// Box for gamma-map; default `lambda`, else the computational box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_box: Option<Vec<f64>>,
    /// Lattice size per axis for gamma-map samples and critical-point scans.
    pub gamma_nodes: usize,
    /// Bisection tolerance on `U(0)`.
    pub profile_tol: f64,
    /// Test field for identity-check; default a dilation over most of the box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<VectorField>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            eps0: 0.5,
            levels: 4,
            seed_points: Vec::new(),
            z_points: Vec::new(),
            xi_box: None,
            landscape_nodes: 5,
            gamma_box: None,
            gamma_nodes: 41,
            profile_tol: 1e-13,
            field: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub reduction: ReductionOptions,
    #[serde(default)]
    pub run: RunConfig,
}

/// Applies one `a.b.c=value` override; `value` is parsed as a TOML value,
/// falling back to a bare string.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let key = key.trim();
    let raw = raw.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed table holds v"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut table = root;
    for part in &path[..path.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a section")))?;
    }
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text, applies overrides, fills defaults and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.resolve()
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    /// Fills the penalty defaults and checks every section.
    fn resolve(mut self) -> Result<Self> {
        self.validate()?;
        if self.problem.lambda.is_some() {
            let p = self.problem.p;
            let alpha = match self.problem.alpha {
                Some(a) => a,
                None => self.potential()?.lower_bound(),
            };
            let theta = self.problem.theta.unwrap_or_else(|| default_theta(p));
            let k = self.problem.k.unwrap_or_else(|| default_k(theta));
            self.problem.alpha = Some(alpha);
            self.problem.theta = Some(theta);
            self.problem.k = Some(k);
            self.penalty()?;
        }
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let pr = &self.problem;
        let n = pr.dim;
        if !(1..=3).contains(&n) {
            return Err(Error::Config(format!(
                "problem.dim must be 1, 2 or 3, got {n}"
            )));
        }
        let check_len = |name: &str, len: usize, want: usize| -> Result<()> {
            if len != want {
                return Err(Error::Config(format!(
                    "{name} has {len} entries, expected {want}"
                )));
            }
            Ok(())
        };
        match &pr.potential {
            PotentialSpec::Constant { value } if !(*value > 0.0) => {
                return Err(Error::Config(format!(
                    "problem.potential.value must be positive, got {value}"
                )))
            }
            PotentialSpec::QuadraticWell { center, .. } => {
                check_len("problem.potential.center", center.len(), n)?
            }
            PotentialSpec::GaussianWells { wells, .. } => {
                for w in wells {
                    check_len("problem.potential.wells.center", w.center.len(), n)?;
                    if !(w.width > 0.0) {
                        return Err(Error::Config(format!(
                            "well width must be positive, got {}",
                            w.width
                        )));
                    }
                }
            }
            _ => {}
        }
        let square = |name: &str, m: &[Vec<f64>]| -> Result<()> {
            check_len(name, m.len(), n)?;
            m.iter().try_for_each(|row| check_len(name, row.len(), n))
        };
        match &pr.diffusion {
            DiffusionSpec::Identity => {}
            DiffusionSpec::Diagonal { diag } => check_len("problem.diffusion.diag", diag.len(), n)?,
            DiffusionSpec::Constant { matrix } => square("problem.diffusion.matrix", matrix)?,
            DiffusionSpec::DiagonalQuadratic { base, quad } => {
                check_len("problem.diffusion.base", base.len(), n)?;
                square("problem.diffusion.quad", quad)?;
                if quad.iter().flatten().any(|q| *q < 0.0) {
                    return Err(Error::Config(
                        "problem.diffusion.quad entries must be non-negative".into(),
                    ));
                }
            }
            DiffusionSpec::Affine { offset, slopes, .. } => {
                square("problem.diffusion.offset", offset)?;
                check_len("problem.diffusion.slopes", slopes.len(), n)?;
                slopes
                    .iter()
                    .try_for_each(|s| square("problem.diffusion.slopes", s))?;
            }
        }
        if let Some(l) = &pr.lambda {
            check_len("problem.lambda", l.len(), 2 * n)?;
        }
        if !(pr.half_width > 0.0) || pr.nodes < 8 {
            return Err(Error::Config(format!(
                "problem.half_width must be positive and problem.nodes >= 8, got {} and {}",
                pr.half_width, pr.nodes
            )));
        }
        let run = &self.run;
        if !(run.eps > 0.0) || !(run.eps0 > 0.0) || !(run.profile_tol > 0.0) {
            return Err(Error::Config(
                "run.eps, run.eps0 and run.profile_tol must be positive".into(),
            ));
        }
        for (name, pts) in [
            ("run.seed_points", &run.seed_points),
            ("run.z_points", &run.z_points),
        ] {
            pts.iter().try_for_each(|p| check_len(name, p.len(), n))?;
        }
        for (name, b) in [
            ("run.xi_box", &run.xi_box),
            ("run.gamma_box", &run.gamma_box),
        ] {
            if let Some(b) = b {
                check_len(name, b.len(), 2 * n)?;
                BoxRegion::from_flat(b)?;
            }
        }
        if run.landscape_nodes < 1 || run.gamma_nodes < 3 {
            return Err(Error::Config(
                "run.landscape_nodes must be >= 1 and run.gamma_nodes >= 3".into(),
            ));
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Arc<dyn PotentialField>> {
        Ok(match &self.problem.potential {
            PotentialSpec::Constant { value } => Arc::new(ConstantPotential { value: *value }),
            PotentialSpec::QuadraticWell {
                base,
                curvature,
                center,
            } => Arc::new(QuadraticWell {
                base: *base,
                curvature: *curvature,
                center: center.clone(),
            }),
            PotentialSpec::GaussianWells { base, wells } => Arc::new(GaussianWells {
                base: *base,
                wells: wells.clone(),
            }),
        })
    }

    pub fn diffusion(&self) -> Result<Arc<dyn DiffusionField>> {
        let n = self.problem.dim;
        let mat = |m: &[Vec<f64>]| DMatrix::from_fn(n, n, |i, j| m[i][j]);
        Ok(match &self.problem.diffusion {
            DiffusionSpec::Identity => Arc::new(ConstantDiffusion::identity(n)),
            DiffusionSpec::Diagonal { diag } => Arc::new(ConstantDiffusion::diagonal(diag)),
            DiffusionSpec::Constant { matrix } => Arc::new(ConstantDiffusion {
                matrix: mat(matrix),
            }),
            DiffusionSpec::DiagonalQuadratic { base, quad } => Arc::new(DiagonalQuadratic {
                base: base.clone(),
                quad: quad.clone(),
            }),
            DiffusionSpec::Affine {
                offset,
                slopes,
                nu,
                upper,
            } => Arc::new(AffineDiffusion {
                offset: mat(offset),
                slopes: slopes.iter().map(|s| mat(s)).collect(),
                nu: *nu,
                upper: *upper,
            }),
        })
    }

    /// Penalisation data, or a configuration error naming `problem.lambda`.
    pub fn penalty(&self) -> Result<PenaltyConfig> {
        let flat =
            self.problem.lambda.as_ref().ok_or_else(|| {
                Error::Config("missing key problem.lambda (penalisation box)".into())
            })?;
        let region = BoxRegion::from_flat(flat)?;
        let p = self.problem.p;
        let alpha = self
            .problem
            .alpha
            .unwrap_or(self.potential()?.lower_bound());
        let theta = self.problem.theta.unwrap_or_else(|| default_theta(p));
        let k = self.problem.k.unwrap_or_else(|| default_k(theta));
        PenaltyConfig::new(region, p, alpha, theta, k)
    }

    /// Problem without penalisation.
    pub fn spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::new(
            self.problem.dim,
            self.problem.p,
            self.potential()?,
            self.diffusion()?,
        )
    }

    /// Problem with the penalisation; fails if `lambda` is absent.
    pub fn penalized_spec(&self) -> Result<ProblemSpec> {
        Ok(self.spec()?.with_penalty(self.penalty()?))
    }

    /// The fixed computational box `[-L, L]^N` with `n` nodes per axis.
    pub fn grid(&self) -> Result<GridDomain> {
        let cap = if self.solver.memory_cap_mb == 0 {
            DEFAULT_MEMORY_CAP
        } else {
            self.solver.memory_cap_mb << 20
        };
        GridDomain::new(
            self.problem.dim,
            self.problem.half_width,
            self.problem.nodes,
            vec![0.0; self.problem.dim],
            cap,
        )
    }

    /// Resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    /// `# `-prefixed header recording the version and the resolved configuration.
    pub fn header(&self) -> String {
        let mut out = format!(
            "# concentra {}\n# resolved configuration:\n",
            env!("CARGO_PKG_VERSION")
        );
        for line in self.to_toml().lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }
}
