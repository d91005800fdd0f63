//! Checks on computed solutions: maximum points, concentration series, the
//! Pucci-Serrin identity, the necessary-condition integrals, the barycentre map
//! and the exterior bound.

use std::io::Write;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::fields::{find_gamma_critical_points, gamma_value_gradient, Classification};
use crate::grid::{DiscreteFunctional, GridDomain, GridFunction, Mode};
use crate::penalty::PenaltyConfig;
use crate::problem::ProblemSpec;
use crate::profile::{sigma_closed_form, RadialProfile};
use crate::solvers::{concentration_grid, concentration_seed, solve_concentrating, SolverOptions};
use crate::{Error, Result};

/// Largest nodal value, its position refined by a three-point quadratic fit
/// along each axis, and whether it is the only maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxPoint {
    pub x: Vec<f64>,
    pub peak: f64,
    pub unique: bool,
}

/// Relative closeness below which a second node counts as a tie.
const TIE_RTOL: f64 = 1e-10;

pub fn global_max_point(u: &GridFunction) -> Result<MaxPoint> {
    let d = &u.domain;
    let dim = d.dim;
    let m = d.m();
    let mut best: Option<(usize, [usize; 3])> = None;
    for (i, &v) in u.values.iter().enumerate() {
        let idx = d.unflatten(i);
        best = match best {
            None => Some((i, idx)),
            Some((b, bidx)) => {
                let bv = u.values[b];
                // ties go to the lexicographically smallest multi-index
                let tie = (v - bv).abs() <= TIE_RTOL * bv.abs();
                if (v > bv && !tie) || (tie && idx[..dim] < bidx[..dim]) {
                    Some((i, idx))
                } else {
                    Some((b, bidx))
                }
            }
        };
    }
    let (imax, idx) = best.ok_or_else(|| Error::Precondition("empty grid function".into()))?;
    let peak = u.values[imax];
    if !(peak > 0.0) && u.values.iter().all(|v| *v == 0.0) {
        return Err(Error::Precondition(
            "global maximum of a zero function".into(),
        ));
    }
    let unique = !u.values.iter().enumerate().any(|(i, &v)| {
        if i == imax || v < peak - TIE_RTOL * peak.abs() {
            return false;
        }
        let o = d.unflatten(i);
        (0..dim).any(|k| o[k].abs_diff(idx[k]) > 1)
    });
    let mut x = d.point(imax);
    for k in 0..dim {
        let neighbour = |delta: isize| -> f64 {
            let j = idx[k] as isize + delta;
            if j < 0 || j >= m as isize {
                return 0.0;
            }
            let mut o = idx;
            o[k] = j as usize;
            u.values[d.flatten(&o[..dim])]
        };
        let (a, c) = (neighbour(-1), neighbour(1));
        let curv = a - 2.0 * peak + c;
        if curv < 0.0 {
            let shift = 0.5 * (a - c) / curv;
            x[k] += shift.clamp(-0.5, 0.5) * d.h;
        }
    }
    Ok(MaxPoint { x, peak, unique })
}

/// Truncated barycentre `int chi(x) u^2 / int u^2` with `chi(x) = x` for
/// `|x| <= R` and `R x / |x|` beyond.
pub fn barycenter(u: &GridFunction, r: f64) -> Result<Vec<f64>> {
    let dim = u.domain.dim;
    let mut num = vec![0.0; dim];
    let mut den = 0.0;
    for (i, v) in u.values.iter().enumerate() {
        let w = v * v;
        if w == 0.0 {
            continue;
        }
        let x = u.domain.point(i);
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let s = if norm > r { r / norm } else { 1.0 };
        for d in 0..dim {
            num[d] += w * x[d] * s;
        }
        den += w;
    }
    if den == 0.0 {
        return Err(Error::Precondition("barycentre of a zero function".into()));
    }
    Ok(num.into_iter().map(|v| v / den).collect())
}

/// Largest nodal value outside the penalisation region and whether it stays
/// below `ell (1 + 1e-6)`.
pub fn exterior_bound_check(u: &GridFunction, cfg: &PenaltyConfig) -> (bool, f64) {
    let mut worst = 0.0_f64;
    for (i, &v) in u.values.iter().enumerate() {
        if !cfg.inside(&u.domain.point(i)) {
            worst = worst.max(v);
        }
    }
    (worst <= cfg.ell * (1.0 + 1e-6), worst)
}

/// Test vector field `h = a(x) eta(|x - c|)` with a smooth plateau `eta`
/// (1 inside `r_in`, 0 beyond `r_out`, quintic ramp in between).
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum VectorField {
    Zero,
    /// `a = e_axis`.
    Translation {
        axis: usize,
        center: Vec<f64>,
        r_in: f64,
        r_out: f64,
    },
    /// `a = x - c`.
    Dilation {
        center: Vec<f64>,
        r_in: f64,
        r_out: f64,
    },
}

impl VectorField {
    fn plateau(center: &[f64], r_in: f64, r_out: f64, x: &[f64]) -> (f64, Vec<f64>) {
        let y: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r <= r_in {
            return (1.0, vec![0.0; x.len()]);
        }
        if r >= r_out {
            return (0.0, vec![0.0; x.len()]);
        }
        let w = r_out - r_in;
        let s = (r - r_in) / w;
        let eta = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let deta = -30.0 * s * s * (1.0 - s) * (1.0 - s) / w;
        (eta, y.iter().map(|v| deta * v / r).collect())
    }

    /// `(h(x), Dh(x))` with `Dh[i][k] = d_i h^k`.
    pub fn eval(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = x.len();
        match self {
            VectorField::Zero => (vec![0.0; n], vec![vec![0.0; n]; n]),
            VectorField::Translation {
                axis,
                center,
                r_in,
                r_out,
            } => {
                let (eta, deta) = Self::plateau(center, *r_in, *r_out, x);
                let mut h = vec![0.0; n];
                h[*axis] = eta;
                let mut dh = vec![vec![0.0; n]; n];
                for i in 0..n {
                    dh[i][*axis] = deta[i];
                }
                (h, dh)
            }
            VectorField::Dilation {
                center,
                r_in,
                r_out,
            } => {
                let (eta, deta) = Self::plateau(center, *r_in, *r_out, x);
                let a: Vec<f64> = x.iter().zip(center).map(|(p, q)| p - q).collect();
                let h = a.iter().map(|v| v * eta).collect();
                let dh = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|k| if i == k { eta } else { 0.0 } + a[k] * deta[i])
                            .collect()
                    })
                    .collect();
                (h, dh)
            }
        }
    }

    /// Centre and inner radius of the plateau, if any.
    fn plateau_ball(&self) -> Option<(&[f64], f64)> {
        match self {
            VectorField::Zero => None,
            VectorField::Translation { center, r_in, .. }
            | VectorField::Dilation { center, r_in, .. } => Some((center.as_slice(), *r_in)),
        }
    }
}

/// Pucci-Serrin identity residual and the support check.
#[derive(Debug, Clone, Serialize)]
pub struct PucciSerrinReport {
    /// `sum int d_i h^k (eps^2 J grad u)_i d_k u - int [(div h) L + h . d_x L]`.
    pub lhs: f64,
    pub residual: f64,
    /// False if `u` exceeds `1e-6` of its peak outside the plateau.
    pub support_ok: bool,
}

/// Residual of the Pucci-Serrin identity for the Lagrangian
/// `L = eps^2/2 <J grad u, grad u> + V u^2 / 2 - F(u)` (right-hand side zero),
/// evaluated with the energy quadrature.
pub fn pucci_serrin_residual(
    u: &GridFunction,
    eps: f64,
    spec: &ProblemSpec,
    field: &VectorField,
) -> Result<PucciSerrinReport> {
    let f = DiscreteFunctional::new(&u.domain, spec, eps, &Mode::Raw)?;
    let dim = spec.dim;
    let e2 = eps * eps;
    let mut lhs = 0.0;
    f.for_each_quadrature_point(&u.values, |q| {
        let (h, dh) = field.eval(&q.x);
        if h.iter().all(|v| *v == 0.0) && dh.iter().flatten().all(|v| *v == 0.0) {
            return;
        }
        let j = spec.j().value(&q.x);
        let v = spec.v().value(&q.x);
        let gv = spec.v().gradient(&q.x);
        let g = nalgebra::DVector::from_iterator(dim, q.grad[..dim].iter().copied());
        let jg = &j * &g;
        let lag = 0.5 * e2 * g.dot(&jg) + 0.5 * v * q.u * q.u - q.primitive;
        let mut term = 0.0;
        let mut div = 0.0;
        for i in 0..dim {
            div += dh[i][i];
            for k in 0..dim {
                term += dh[i][k] * e2 * jg[i] * g[k];
            }
        }
        let mut hdl = 0.0;
        for k in 0..dim {
            if h[k] == 0.0 {
                continue;
            }
            let djk = spec.j().partial(&q.x, k);
            let dxl = 0.5 * e2 * g.dot(&(&djk * &g)) + 0.5 * gv[k] * q.u * q.u;
            hdl += h[k] * dxl;
        }
        lhs += q.weight * (term - div * lag - hdl);
    });
    let support_ok = match field.plateau_ball() {
        None => true,
        Some((c, r_in)) => {
            let peak = u.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            u.values.iter().enumerate().all(|(i, v)| {
                let x = u.domain.point(i);
                let r = x
                    .iter()
                    .zip(c)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                r < r_in || v.abs() <= 1e-6 * peak
            })
        }
    };
    if !support_ok {
        warn!("Pucci-Serrin check: u is not negligible outside the plateau of h");
    }
    Ok(PucciSerrinReport {
        lhs,
        residual: lhs.abs(),
        support_ok,
    })
}

/// The necessary-condition integrals at `z0` for `w(x) = u(z0 + eps x)`,
/// written as the Pucci-Serrin left-hand side with the frozen Lagrangian and
/// `h = e_i`: component `i` is `-1/2 int <d_i J(z0) grad w, grad w> + d_i V(z0) w^2`.
///
/// `w` is resampled by multilinear interpolation onto a grid with spacing
/// `h / eps` on the largest cube around `z0` that fits in the box.
pub fn concentration_gradient_test(
    u: &GridFunction,
    eps: f64,
    z0: &[f64],
    spec: &ProblemSpec,
) -> Result<Vec<f64>> {
    let dim = spec.dim;
    if z0.len() != dim {
        return Err(Error::InvalidInput("z0 has the wrong dimension".into()));
    }
    let beta = spec.v().value(z0).sqrt();
    let mp = global_max_point(u)?;
    let dist =
        mp.x.iter()
            .zip(z0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
    if dist > 3.0 * eps / beta {
        return Err(Error::Precondition(format!(
            "solution peak at {:?} is {dist:.3e} from z0, beyond 3 eps / beta = {:.3e}",
            mp.x,
            3.0 * eps / beta
        )));
    }
    let region = u.domain.region();
    let reach = region.distance_to_boundary(z0);
    if !(reach > 0.0) {
        return Err(Error::domain(
            "resampling",
            format!("z0={z0:?} outside the grid box"),
        ));
    }
    let half = reach / eps;
    let h_new = u.domain.h / eps;
    let n = ((2.0 * half / h_new).floor() as usize + 1).max(8);
    let grid = GridDomain::new(
        dim,
        half,
        n,
        vec![0.0; dim],
        crate::grid::DEFAULT_MEMORY_CAP,
    )?;
    let mut values = Vec::with_capacity(grid.len());
    for x in grid.points() {
        let y: Vec<f64> = x.iter().zip(z0).map(|(a, b)| b + eps * a).collect();
        let v = u.domain.interpolate(&u.values, &y).ok_or_else(|| {
            Error::domain(
                "resampling",
                format!("point {y:?} outside the solution grid"),
            )
        })?;
        values.push(v);
    }
    let w = GridFunction::new(grid.clone(), values)?;
    let (g, mass) = DiscreteFunctional::h1_form(&grid).gradient_moments(&w.values);
    let gv = spec.v().gradient(z0);
    Ok((0..dim)
        .map(|i| {
            let dj = spec.j().partial(z0, i);
            let tr: f64 = (0..dim)
                .flat_map(|k| (0..dim).map(move |l| (k, l)))
                .map(|(k, l)| dj[(k, l)] * g[(l, k)])
                .sum();
            -0.5 * (tr + gv[i] * mass)
        })
        .collect())
}

/// Minimum of `Gamma` over the penalisation region, located by the critical-point
/// search (falling back to the best lattice sample), after checking
/// `min_Lambda Gamma < min_boundary Gamma` on a lattice.
pub fn gamma_minimum(
    spec: &ProblemSpec,
    cfg: &PenaltyConfig,
    lattice: usize,
) -> Result<(Vec<f64>, f64)> {
    let region = &cfg.region;
    let dim = region.dim();
    let gamma =
        |z: &[f64]| -> Result<f64> { Ok(gamma_value_gradient(z, spec.v(), spec.j(), spec.p)?.0) };
    let boundary_min = region
        .boundary_samples(lattice)
        .iter()
        .map(|z| gamma(z))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut best = (region.center(), f64::INFINITY);
    let total = lattice.pow(dim as u32);
    for flat in 0..total {
        let mut rest = flat;
        let z: Vec<f64> = (0..dim)
            .map(|d| {
                let k = rest % lattice;
                rest /= lattice;
                region.lo[d] + (region.hi[d] - region.lo[d]) * k as f64 / (lattice - 1) as f64
            })
            .collect();
        let g = gamma(&z)?;
        if g < best.1 {
            best = (z, g);
        }
    }
    let crit = find_gamma_critical_points(region, lattice, 1e-12, spec.v(), spec.j(), spec.p)?;
    if let Some(m) = crit
        .iter()
        .filter(|c| c.classification == Classification::Min && region.contains(&c.point))
        .min_by(|a, b| a.value.total_cmp(&b.value))
    {
        if m.value <= best.1 {
            best = (m.point.clone(), m.value);
        }
    }
    if !(best.1 < boundary_min) {
        return Err(Error::Precondition(format!(
            "min of Gamma over Lambda ({:.6e}) is not below its boundary minimum ({boundary_min:.6e})",
            best.1
        )));
    }
    Ok(best)
}

/// One level of a concentration series.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationRecord {
    pub eps: f64,
    pub h: f64,
    pub x: Vec<f64>,
    pub gamma_at_x: f64,
    /// `eps^{-N} E(u_eps)`.
    pub scaled_energy: f64,
    /// `eps^{-N} E(seed)` after Nehari projection.
    pub seed_scaled_energy: f64,
    pub peak: f64,
    pub unique_max: bool,
    pub exterior_ok: bool,
    pub max_exterior: f64,
    pub grad_max: f64,
    pub converged: bool,
    #[serde(skip)]
    pub solution: GridFunction,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationSeries {
    pub records: Vec<ConcentrationRecord>,
    /// Minimiser and minimum of `Gamma` over the penalisation region.
    pub z0: Vec<f64>,
    pub gamma_min: f64,
    /// `C1 Gamma(z0)`.
    pub sigma_z0: f64,
    pub seed_point: Vec<f64>,
    /// Reason the series stopped early, if it did.
    pub truncated: Option<String>,
}

/// Acceptance-style summary of a series.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesSummary {
    pub distances: Vec<f64>,
    pub gamma_gaps: Vec<f64>,
    pub energy_errors: Vec<f64>,
    pub distance_nonincreasing: bool,
    pub finest_within_3h: bool,
    pub gamma_gap_decreasing: bool,
    pub energy_within_5pct: bool,
    pub exterior_two_finest: bool,
    pub seed_energy_within_5pct: bool,
}

impl ConcentrationSeries {
    pub fn summary(&self) -> SeriesSummary {
        let dist = |x: &[f64]| {
            x.iter()
                .zip(&self.z0)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let distances: Vec<f64> = self.records.iter().map(|r| dist(&r.x)).collect();
        let gamma_gaps: Vec<f64> = self
            .records
            .iter()
            .map(|r| r.gamma_at_x - self.gamma_min)
            .collect();
        let energy_errors: Vec<f64> = self
            .records
            .iter()
            .map(|r| r.scaled_energy / self.sigma_z0 - 1.0)
            .collect();
        let n = self.records.len();
        let last = self.records.last();
        SeriesSummary {
            distance_nonincreasing: distances.windows(2).all(|w| w[1] <= w[0]),
            finest_within_3h: last.map(|r| dist(&r.x) < 3.0 * r.h).unwrap_or(false),
            gamma_gap_decreasing: gamma_gaps.windows(2).all(|w| w[1] < w[0]),
            energy_within_5pct: energy_errors
                .last()
                .map(|e| e.abs() <= 0.05)
                .unwrap_or(false),
            exterior_two_finest: n >= 2 && self.records[n - 2..].iter().all(|r| r.exterior_ok),
            seed_energy_within_5pct: last
                .map(|r| {
                    let sig = self.sigma_z0;
                    (r.seed_scaled_energy / sig - 1.0).abs() <= 0.05
                })
                .unwrap_or(false),
            distances,
            gamma_gaps,
            energy_errors,
        }
    }

    /// Rows `eps, x..., gamma_at_x, scaled_energy, peak, exterior_ok`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.z0.len();
        let mut header = vec!["eps".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.extend(["gamma_at_x", "scaled_energy", "peak", "exterior_ok"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![format!("{:.17e}", r.eps)];
            row.extend(r.x.iter().map(|v| format!("{v:.17e}")));
            row.push(format!("{:.17e}", r.gamma_at_x));
            row.push(format!("{:.17e}", r.scaled_energy));
            row.push(format!("{:.17e}", r.peak));
            row.push(r.exterior_ok.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Solves the penalised problem at `eps_j = eps0 2^{-j}`, `j < levels`, from the
/// explicit profile at `seed_point` (default: the minimiser of `Gamma` over
/// Lambda), and records the concentration data. Levels run in parallel; the
/// series is truncated at the first failed or unconverged level.
pub fn concentration_series(
    spec: &ProblemSpec,
    profile: &Arc<RadialProfile>,
    eps0: f64,
    levels: usize,
    seed_point: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<ConcentrationSeries> {
    if levels < 3 {
        return Err(Error::InvalidInput(format!(
            "a series needs at least 3 levels, got {levels}"
        )));
    }
    let cfg = spec
        .penalty
        .as_ref()
        .ok_or_else(|| Error::Config("concentration series requires lambda".into()))?;
    let (z0, gamma_min) = gamma_minimum(spec, cfg, 41)?;
    let sigma_z0 = sigma_closed_form(&z0, profile, spec.v(), spec.j())?;
    let seed: Vec<f64> = seed_point.map(|s| s.to_vec()).unwrap_or_else(|| z0.clone());
    let n = spec.dim as i32;
    let eps_list: Vec<f64> = (0..levels).map(|j| eps0 * 0.5f64.powi(j as i32)).collect();
    let results: Vec<Result<ConcentrationRecord>> = eps_list
        .par_iter()
        .map(|&eps| {
            let dom = concentration_grid(eps, cfg, opts)?;
            let f = DiscreteFunctional::new(&dom, spec, eps, &Mode::Penalized)?;
            let seed_u = concentration_seed(eps, spec, profile, &seed, &f)?;
            let seed_energy = f.value(&seed_u.values)?;
            let rep = solve_concentrating(eps, spec, profile, &seed, &dom, opts)?;
            let mp = global_max_point(&rep.solution)?;
            let (ext_ok, ext) = exterior_bound_check(&rep.solution, cfg);
            Ok(ConcentrationRecord {
                eps,
                h: dom.h,
                gamma_at_x: gamma_value_gradient(&mp.x, spec.v(), spec.j(), spec.p)?.0,
                x: mp.x,
                scaled_energy: rep.energy / eps.powi(n),
                seed_scaled_energy: seed_energy / eps.powi(n),
                peak: mp.peak,
                unique_max: mp.unique,
                exterior_ok: ext_ok,
                max_exterior: ext,
                grad_max: rep.grad_max,
                converged: rep.converged,
                solution: rep.solution,
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut truncated = None;
    for (eps, r) in eps_list.iter().zip(results) {
        match r {
            Ok(rec) if rec.converged => records.push(rec),
            Ok(rec) => {
                truncated = Some(format!(
                    "eps={eps}: not converged (gradient {:e})",
                    rec.grad_max
                ));
                break;
            }
            Err(e) => {
                truncated = Some(format!("eps={eps}: {e}"));
                break;
            }
        }
    }
    if let Some(t) = &truncated {
        warn!("concentration series truncated: {t}");
    }
    Ok(ConcentrationSeries {
        records,
        z0,
        gamma_min,
        sigma_z0,
        seed_point: seed,
        truncated,
    })
}
