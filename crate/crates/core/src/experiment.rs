//! Subcommand runner: each subcommand fronts one pipeline, builds its artifacts
//! in memory and writes them once at the end. Every artifact starts with the
//! resolved configuration (comment lines for text files, a leading `config`
//! member for JSON).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::diagnostics::{
    concentration_gradient_test, concentration_series, exterior_bound_check, gamma_minimum,
    global_max_point, pucci_serrin_residual, ConcentrationRecord, ConcentrationSeries,
    PucciSerrinReport, SeriesSummary, VectorField,
};
use crate::fields::{
    find_gamma_critical_points, gamma_value_gradient, is_degenerate_landscape, LandscapeSample,
};
use crate::frozen::frozen_sigma_numeric;
use crate::grid::{GridDomain, GridFunction};
use crate::problem::ProblemSpec;
use crate::profile::{sigma_closed_form, solve_radial_ground_state, RadialProfile};
use crate::reduction::{write_landscape_csv, ReducedProblem, ReducedSample};
use crate::region::BoxRegion;
use crate::solvers::{concentration_grid, multi_start, solve_concentrating, SolveReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    LimitProfile,
    GammaMap,
    FrozenSigma,
    Solve,
    Concentrate,
    Reduce,
    Multiplicity,
    IdentityCheck,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::LimitProfile,
        Subcommand::GammaMap,
        Subcommand::FrozenSigma,
        Subcommand::Solve,
        Subcommand::Concentrate,
        Subcommand::Reduce,
        Subcommand::Multiplicity,
        Subcommand::IdentityCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::LimitProfile => "limit-profile",
            Subcommand::GammaMap => "gamma-map",
            Subcommand::FrozenSigma => "frozen-sigma",
            Subcommand::Solve => "solve",
            Subcommand::Concentrate => "concentrate",
            Subcommand::Reduce => "reduce",
            Subcommand::Multiplicity => "multiplicity",
            Subcommand::IdentityCheck => "identity-check",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand `{s}`")))
    }
}

/// Artifacts produced by one run, in write order.
#[derive(Debug, Default)]
struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    fn add(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    fn write_all(self, out: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out)?;
        self.files
            .into_iter()
            .map(|(name, body)| {
                let path = out.join(name);
                std::fs::write(&path, body)?;
                Ok(path)
            })
            .collect()
    }
}

#[derive(Serialize)]
struct JsonArtifact<'a, T: Serialize> {
    config: &'a ExperimentConfig,
    result: T,
}

fn json(cfg: &ExperimentConfig, result: impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(&JsonArtifact {
        config: cfg,
        result,
    })
    .expect("artifact serialises to JSON");
    s.push('\n');
    s
}

fn num(v: f64) -> String {
    format!("{v:.15e}")
}

fn with_header(cfg: &ExperimentConfig, body: &[u8]) -> String {
    let mut s = cfg.header();
    s.push_str(&String::from_utf8_lossy(body));
    s
}

fn lattice(region: &BoxRegion, per_axis: usize) -> Vec<Vec<f64>> {
    let dim = region.dim();
    let total = per_axis.pow(dim as u32);
    (0..total)
        .map(|mut flat| {
            (0..dim)
                .map(|a| {
                    let k = flat % per_axis;
                    flat /= per_axis;
                    if per_axis == 1 {
                        0.5 * (region.lo[a] + region.hi[a])
                    } else {
                        region.lo[a]
                            + (region.hi[a] - region.lo[a]) * k as f64 / (per_axis - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn profile(cfg: &ExperimentConfig) -> Result<Arc<RadialProfile>> {
    Ok(Arc::new(solve_radial_ground_state(
        cfg.problem.dim,
        cfg.problem.p,
        cfg.run.profile_tol,
    )?))
}

/// Runs `cmd` and writes its artifacts under `out`; returns the written paths.
///
/// Solver failures discovered after the artifacts are assembled (an unconverged
/// solve, a truncated series) are reported as errors after writing.
pub fn run(cmd: Subcommand, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut art = Artifacts::default();
    let outcome = match cmd {
        Subcommand::LimitProfile => limit_profile(cfg, &mut art),
        Subcommand::GammaMap => gamma_map(cfg, &mut art),
        Subcommand::FrozenSigma => frozen_sigma(cfg, &mut art),
        Subcommand::Solve => solve(cfg, &mut art),
        Subcommand::Concentrate => concentrate(cfg, &mut art),
        Subcommand::Reduce => reduce(cfg, &mut art),
        Subcommand::Multiplicity => multiplicity(cfg, &mut art),
        Subcommand::IdentityCheck => identity_check(cfg, &mut art),
    };
    let written = art.write_all(out)?;
    outcome.map(|_| written)
}

#[derive(Serialize)]
struct ProfileSummary {
    dim: usize,
    p: f64,
    u0: f64,
    c0: f64,
    c1: f64,
    r_max: f64,
    h: f64,
    splice_radius: f64,
    ode_residual: f64,
}

fn limit_profile(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let prof = profile(cfg)?;
    let mut body = Vec::new();
    prof.write(&mut body)?;
    art.add("profile.txt", with_header(cfg, &body));
    art.add(
        "limit_profile.json",
        json(
            cfg,
            ProfileSummary {
                dim: prof.dim,
                p: prof.p,
                u0: prof.u0,
                c0: prof.c0,
                c1: prof.c1(),
                r_max: prof.r_max,
                h: prof.h,
                splice_radius: prof.splice_radius,
                ode_residual: prof.ode_residual(),
            },
        ),
    );
    Ok(())
}

#[derive(Serialize)]
struct CriticalPoints {
    degenerate_landscape: bool,
    points: Vec<LandscapeSample>,
}

fn gamma_region(cfg: &ExperimentConfig) -> Result<BoxRegion> {
    match (&cfg.run.gamma_box, &cfg.problem.lambda) {
        (Some(b), _) | (None, Some(b)) => BoxRegion::from_flat(b),
        (None, None) => Ok(BoxRegion::cube(cfg.problem.dim, cfg.problem.half_width)),
    }
}

fn gamma_map(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let spec = cfg.spec()?;
    let region = gamma_region(cfg)?;
    let dim = spec.dim;
    let pts = lattice(&region, cfg.run.gamma_nodes);
    let rows: Vec<String> = pts
        .par_iter()
        .map(|z| {
            let (g, dg) = gamma_value_gradient(z, spec.v(), spec.j(), spec.p)?;
            let mut row: Vec<String> = z.iter().map(|v| num(*v)).collect();
            row.push(num(g));
            row.extend(dg.iter().map(|v| num(*v)));
            Ok(row.join(","))
        })
        .collect::<Result<_>>()?;
    let mut body = String::new();
    let mut cols: Vec<String> = (0..dim).map(|i| format!("z{i}")).collect();
    cols.push("gamma".into());
    cols.extend((0..dim).map(|i| format!("dgamma{i}")));
    writeln!(body, "{}", cols.join(",")).unwrap();
    for r in rows {
        writeln!(body, "{r}").unwrap();
    }
    art.add("gamma_map.csv", with_header(cfg, body.as_bytes()));
    let points = find_gamma_critical_points(
        &region,
        cfg.run.gamma_nodes,
        1e-10,
        spec.v(),
        spec.j(),
        spec.p,
    )?;
    art.add(
        "critical_points.json",
        json(
            cfg,
            CriticalPoints {
                degenerate_landscape: is_degenerate_landscape(&points),
                points,
            },
        ),
    );
    Ok(())
}

fn frozen_sigma(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let spec = cfg.spec()?;
    let prof = profile(cfg)?;
    let grid = cfg.grid()?;
    let dim = spec.dim;
    let points = if cfg.run.z_points.is_empty() {
        vec![vec![0.0; dim]]
    } else {
        cfg.run.z_points.clone()
    };
    let rows: Vec<String> = points
        .par_iter()
        .map(|z| {
            let st = frozen_sigma_numeric(z, &grid, &spec, &prof, &cfg.solver)?;
            let closed = sigma_closed_form(z, &prof, spec.v(), spec.j())?;
            let mut row: Vec<String> = z.iter().map(|v| num(*v)).collect();
            row.extend([
                num(st.energy),
                num(closed),
                num(st.energy / closed - 1.0),
                num(st.nehari_residual),
                num(st.grad_max),
                st.iterations.to_string(),
                st.newton_steps.to_string(),
                st.converged.to_string(),
            ]);
            Ok(row.join(","))
        })
        .collect::<Result<_>>()?;
    let mut cols: Vec<String> = (0..dim).map(|i| format!("z{i}")).collect();
    cols.extend(
        [
            "sigma_num",
            "c1_gamma",
            "rel_err",
            "nehari_residual",
            "grad_max",
            "iterations",
            "newton_steps",
            "converged",
        ]
        .map(String::from),
    );
    let mut body = format!("{}\n", cols.join(","));
    for r in rows {
        writeln!(body, "{r}").unwrap();
    }
    art.add("frozen_sigma.csv", with_header(cfg, body.as_bytes()));
    Ok(())
}

#[derive(Serialize)]
struct GridInfo {
    dim: usize,
    nodes: usize,
    h: f64,
    half_width: f64,
    center: Vec<f64>,
}

impl GridInfo {
    fn of(d: &GridDomain) -> Self {
        Self {
            dim: d.dim,
            nodes: d.n,
            h: d.h,
            half_width: d.half_width,
            center: d.center.clone(),
        }
    }
}

/// Solve summary without wall-clock data, so that artifacts are reproducible.
#[derive(Serialize)]
struct SolveSummary {
    eps: f64,
    seed_point: Vec<f64>,
    energy: f64,
    scaled_energy: f64,
    grad_max: f64,
    nehari_residual: f64,
    iterations: usize,
    newton_steps: usize,
    converged: bool,
    max_point: Vec<f64>,
    peak: f64,
    unique_max: bool,
    exterior_ok: bool,
    max_exterior: f64,
    grid: GridInfo,
}

fn seed_point(cfg: &ExperimentConfig, spec: &ProblemSpec) -> Result<Vec<f64>> {
    match cfg.run.seed_points.first() {
        Some(s) => Ok(s.clone()),
        None => {
            let pen = spec.penalty.as_ref().expect("penalised spec");
            Ok(gamma_minimum(spec, pen, cfg.run.gamma_nodes)?.0)
        }
    }
}

fn solve_one(cfg: &ExperimentConfig, spec: &ProblemSpec) -> Result<(SolveReport, SolveSummary)> {
    let pen = spec.penalty.clone().expect("penalised spec");
    let prof = profile(cfg)?;
    let seed = seed_point(cfg, spec)?;
    let eps = cfg.run.eps;
    let dom = concentration_grid(eps, &pen, &cfg.solver)?;
    let rep = solve_concentrating(eps, spec, &prof, &seed, &dom, &cfg.solver)?;
    let mp = global_max_point(&rep.solution)?;
    let (ext_ok, ext) = exterior_bound_check(&rep.solution, &pen);
    let summary = SolveSummary {
        eps,
        seed_point: seed,
        energy: rep.energy,
        scaled_energy: rep.energy / eps.powi(spec.dim as i32),
        grad_max: rep.grad_max,
        nehari_residual: rep.nehari_residual,
        iterations: rep.iterations,
        newton_steps: rep.newton_steps,
        converged: rep.converged,
        max_point: mp.x,
        peak: mp.peak,
        unique_max: mp.unique,
        exterior_ok: ext_ok,
        max_exterior: ext,
        grid: GridInfo::of(&dom),
    };
    Ok((rep, summary))
}

fn unconverged(solver: &'static str, rep: &SolveReport) -> Error {
    Error::NonConvergence {
        solver,
        iterations: rep.iterations,
        residual: rep.grad_max,
    }
}

fn solution_csv(cfg: &ExperimentConfig, u: &GridFunction, art: &mut Artifacts) -> Result<()> {
    if u.domain.dim <= 2 {
        let mut body = Vec::new();
        u.write_csv(&mut body)?;
        art.add("solution.csv", with_header(cfg, &body));
    }
    Ok(())
}

fn solve(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let spec = cfg.penalized_spec()?;
    let (rep, summary) = solve_one(cfg, &spec)?;
    art.add("solve_report.json", json(cfg, &summary));
    solution_csv(cfg, &rep.solution, art)?;
    if !rep.converged {
        return Err(unconverged("solve_concentrating", &rep));
    }
    Ok(())
}

#[derive(Serialize)]
struct SeriesArtifact<'a> {
    z0: &'a [f64],
    gamma_min: f64,
    sigma_z0: f64,
    seed_point: &'a [f64],
    truncated: &'a Option<String>,
    checks: SeriesSummary,
    records: &'a [ConcentrationRecord],
}

fn concentrate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let spec = cfg.penalized_spec()?;
    let prof = profile(cfg)?;
    let seed = cfg.run.seed_points.first().map(|s| s.as_slice());
    let s: ConcentrationSeries = concentration_series(
        &spec,
        &prof,
        cfg.run.eps0,
        cfg.run.levels,
        seed,
        &cfg.solver,
    )?;
    let mut body = Vec::new();
    s.write_csv(&mut body)?;
    art.add("concentration.csv", with_header(cfg, &body));
    art.add(
        "concentration_summary.json",
        json(
            cfg,
            SeriesArtifact {
                z0: &s.z0,
                gamma_min: s.gamma_min,
                sigma_z0: s.sigma_z0,
                seed_point: &s.seed_point,
                truncated: &s.truncated,
                checks: s.summary(),
                records: &s.records,
            },
        ),
    );
    match &s.truncated {
        Some(reason) => Err(Error::NonConvergence {
            solver: "concentration_series",
            iterations: s.records.len(),
            residual: f64::NAN,
        })
        .inspect_err(|_| log::error!("series truncated: {reason}")),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct ReducedPointArtifact {
    xi: Vec<f64>,
    z: Vec<f64>,
    gamma_point: Vec<f64>,
    classification: crate::fields::Classification,
    phi: f64,
    wnorm: f64,
    residual: f64,
}

fn reduce(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let spec = cfg.spec()?;
    let eps = cfg.run.eps;
    let xi_box = match (&cfg.run.xi_box, &cfg.problem.lambda) {
        (Some(b), _) => BoxRegion::from_flat(b)?,
        (None, Some(l)) => BoxRegion::from_flat(l)?.scaled(1.0 / eps),
        (None, None) => {
            return Err(Error::Config(
                "missing key run.xi_box (or problem.lambda)".into(),
            ))
        }
    };
    let rp = ReducedProblem::new(spec, profile(cfg)?, cfg.reduction.clone())?;
    let samples: Vec<ReducedSample> = lattice(&xi_box, cfg.run.landscape_nodes)
        .par_iter()
        .map(|xi| rp.reduced_energy(xi, eps, true))
        .collect::<Result<_>>()?;
    let mut body = Vec::new();
    write_landscape_csv(&mut body, &samples)?;
    art.add("landscape.csv", with_header(cfg, &body));
    let found = rp.reduced_critical_points(&xi_box, eps, cfg.run.gamma_nodes, &cfg.solver)?;
    let list: Vec<ReducedPointArtifact> = found
        .into_iter()
        .map(|c| ReducedPointArtifact {
            xi: c.xi,
            z: c.z,
            gamma_point: c.gamma_point,
            classification: c.classification,
            phi: c.sample.phi,
            wnorm: c.sample.wnorm,
            residual: c.residual,
        })
        .collect();
    art.add("reduced_critical_points.json", json(cfg, &list));
    Ok(())
}

fn multiplicity(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let spec = cfg.penalized_spec()?;
    if cfg.run.seed_points.is_empty() {
        return Err(Error::Config("missing key run.seed_points".into()));
    }
    let pen = spec.penalty.clone().expect("penalised spec");
    let eps = cfg.run.eps;
    let dom = concentration_grid(eps, &pen, &cfg.solver)?;
    let sols = multi_start(
        &cfg.run.seed_points,
        eps,
        &spec,
        &profile(cfg)?,
        &dom,
        &cfg.solver,
    )?;
    let dim = spec.dim;
    let mut cols = vec!["index".to_string(), "energy".into(), "scaled_energy".into()];
    cols.extend((0..dim).map(|i| format!("barycenter{i}")));
    cols.extend(["grad_max".into(), "seeds".into()]);
    let mut body = format!("{}\n", cols.join(","));
    for (i, s) in sols.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            num(s.report.energy),
            num(s.report.energy / eps.powi(dim as i32)),
        ];
        row.extend(s.barycenter.iter().map(|v| num(*v)));
        row.push(num(s.report.grad_max));
        row.push(
            s.seeds
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        writeln!(body, "{}", row.join(",")).unwrap();
    }
    art.add("multiplicity.csv", with_header(cfg, body.as_bytes()));
    Ok(())
}

#[derive(Serialize)]
struct IdentityReport {
    solve: SolveSummary,
    field: VectorField,
    pucci_serrin: PucciSerrinReport,
    /// Residual divided by `eps^N`, the natural scale of the integrals.
    pucci_serrin_scaled: f64,
    z0: Vec<f64>,
    gradient_integrals: Vec<f64>,
    minus_grad_gamma: Vec<f64>,
}

fn identity_check(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let spec = cfg.penalized_spec()?;
    let pen = spec.penalty.clone().expect("penalised spec");
    let (rep, summary) = solve_one(cfg, &spec)?;
    let eps = cfg.run.eps;
    let field = match &cfg.run.field {
        Some(f) => f.clone(),
        None => {
            let l = summary.grid.half_width;
            VectorField::Dilation {
                center: pen.region.center(),
                r_in: 0.85 * l,
                r_out: l,
            }
        }
    };
    let ps = pucci_serrin_residual(&rep.solution, eps, &spec, &field)?;
    let z0 = match cfg.run.z_points.first() {
        Some(z) => z.clone(),
        None => gamma_minimum(&spec, &pen, cfg.run.gamma_nodes)?.0,
    };
    let integrals = concentration_gradient_test(&rep.solution, eps, &z0, &spec)?;
    let (_, dg) = gamma_value_gradient(&z0, spec.v(), spec.j(), spec.p)?;
    let converged = rep.converged;
    art.add(
        "identity_check.json",
        json(
            cfg,
            IdentityReport {
                pucci_serrin_scaled: ps.residual / eps.powi(spec.dim as i32),
                solve: summary,
                field,
                pucci_serrin: ps,
                z0,
                gradient_integrals: integrals,
                minus_grad_gamma: dg.iter().map(|v| -v).collect(),
            },
        ),
    );
    if !converged {
        return Err(unconverged("solve_concentrating", &rep));
    }
    Ok(())
}
