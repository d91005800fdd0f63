//! Critical-point solvers for the discrete energies: Nehari scaling, projected
//! descent on the Nehari manifold, damped Newton, a path-deformation estimate of
//! the mountain-pass level, the concentrating-solution pipeline and multi-start.

use std::sync::Arc;
use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::barycenter;
use crate::grid::{DiscreteFunctional, GridDomain, GridFunction, Mode};
use crate::linalg::{minres, norm_inf, Preconditioner, SpectralPreconditioner};
use crate::penalty::PenaltyConfig;
use crate::problem::ProblemSpec;
use crate::profile::{scaled_profile, RadialProfile};
use crate::{Error, Result};

/// Tolerances and caps, read from the `[solver]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Gradient max-norm at which projected descent stops.
    pub descent_tol: f64,
    pub descent_max_iter: usize,
    /// Gradient max-norm targeted by Newton refinement.
    pub newton_tol: f64,
    pub newton_max_steps: usize,
    /// Newton is only attempted below this gradient max-norm.
    pub newton_entry: f64,
    pub krylov_max_iter: usize,
    /// Relative accuracy of the Nehari scaling bisection.
    pub nehari_rtol: f64,
    /// Interior nodes of the mountain-pass path plus one.
    pub mp_nodes: usize,
    pub mp_max_sweeps: usize,
    /// Relative level decrease over ten sweeps below which the path is stable.
    pub mp_stall_rtol: f64,
    /// Grid resolution in the concentration pipeline: cells per `eps`.
    pub cells_per_eps: f64,
    /// Smallest box half-width margin around the penalisation region.
    pub box_margin: f64,
    /// Box margin in units of `eps / sqrt(alpha)`.
    pub box_margin_eps: f64,
    pub memory_cap_mb: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            descent_tol: 1e-4,
            descent_max_iter: 10_000,
            newton_tol: 1e-10,
            newton_max_steps: 50,
            newton_entry: 1e-2,
            krylov_max_iter: 2000,
            nehari_rtol: 1e-13,
            mp_nodes: 16,
            mp_max_sweeps: 3000,
            mp_stall_rtol: 1e-6,
            cells_per_eps: 6.0,
            box_margin: 0.5,
            box_margin_eps: 10.0,
            memory_cap_mb: 4096,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GridFunction,
    pub energy: f64,
    pub grad_max: f64,
    /// `|DE(u)[u]| / Q(u)`.
    pub nehari_residual: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub converged: bool,
    /// Wall time in seconds (never written to data files).
    pub wall_time: f64,
    /// Gradient max-norms after each accepted Newton step.
    pub newton_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MountainPassReport {
    pub path: Vec<GridFunction>,
    pub level: f64,
    pub endpoint_energy: f64,
    pub sweeps: usize,
    /// Level after each accepted sweep (non-increasing).
    pub level_history: Vec<f64>,
    pub converged: bool,
}

fn preconditioner_for(f: &DiscreteFunctional) -> SpectralPreconditioner {
    f.exact_constant_preconditioner()
        .unwrap_or_else(|| f.preconditioner())
}

fn nehari_residual(f: &DiscreteFunctional, u: &[f64]) -> f64 {
    let q = f.quadratic(u);
    if q == 0.0 {
        return 0.0;
    }
    (q - f.nonlinear_pairing(u, 1.0)).abs() / q
}

/// The multiplier `t > 0` with `DE(tu)[tu] = 0`.
pub fn nehari_scale(f: &DiscreteFunctional, u: &[f64], rtol: f64) -> Result<f64> {
    let q = f.quadratic(u);
    let pm = f.power_moment(u);
    if !(pm > 0.0) {
        return Err(Error::Precondition(
            "Nehari scaling needs a state that is positive somewhere".into(),
        ));
    }
    let p = f.exponent();
    let t_power = (q / pm).powf(1.0 / (p - 1.0));
    if f.is_pure_power() {
        return Ok(t_power);
    }
    // penalised: the closed form is exact while t u stays below ell outside Lambda
    if let (Some(ext), Some(ell)) = (f.exterior_max(u), f.penalty_threshold()) {
        if t_power * ext <= ell {
            return Ok(t_power);
        }
    }
    // psi(t) = Q - int g(x, t u) u / t is increasing; find its zero
    let psi = |t: f64| q - f.nonlinear_pairing(u, t) / t;
    let (mut lo, mut hi) = (t_power.min(1.0) * 0.5, t_power.max(1.0) * 2.0);
    let mut guard = 0;
    while psi(lo) < 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 200 {
            return Err(Error::Precondition(
                "Nehari scaling: no lower bracket".into(),
            ));
        }
    }
    guard = 0;
    while psi(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Precondition(
                "Nehari scaling: the state does not reach the Nehari manifold (mass outside the penalisation region only)".into(),
            ));
        }
    }
    while (hi - lo) > rtol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn scaled(u: &[f64], t: f64) -> Vec<f64> {
    u.iter().map(|v| v * t).collect()
}

/// Projected descent on the Nehari manifold with a sine-transform (Sobolev)
/// metric, Armijo backtracking and Barzilai-Borwein step sizes.
pub fn nehari_minimize(
    f: &DiscreteFunctional,
    seed: &GridFunction,
    tol: f64,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let domain = f.domain().clone();
    let pre = preconditioner_for(f);
    let t0 = nehari_scale(f, &seed.values, opts.nehari_rtol)?;
    let mut u = scaled(&seed.values, t0);
    let (mut e, mut g) = f.value_gradient(&u)?;
    let mut z = vec![0.0; u.len()];
    let mut alpha = 1.0_f64;
    let mut iterations = 0;
    let mut converged = false;
    let c_armijo = 1e-4;
    let vol = domain.cell_volume();

    for it in 0..opts.descent_max_iter {
        iterations = it;
        let gmax = norm_inf(&g);
        if gmax <= tol {
            converged = true;
            break;
        }
        pre.apply_inverse(&g, &mut z);
        let slope = -vol * crate::linalg::dot(&g, &z);
        let mut accepted = None;
        let mut a = alpha;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(&z).map(|(x, d)| x - a * d).collect();
            if let Ok(t) = nehari_scale(f, &trial, opts.nehari_rtol) {
                let trial = scaled(&trial, t);
                if let Ok(et) = f.value(&trial) {
                    if et <= e + c_armijo * a * slope {
                        accepted = Some((trial, et));
                        break;
                    }
                }
            }
            a *= 0.5;
        }
        let Some((un, en)) = accepted else {
            debug!("nehari_minimize: line search failed at iteration {it}, gmax={gmax:e}");
            break;
        };
        let gn = f.gradient(&un)?;
        // Barzilai-Borwein step in the preconditioned metric
        let s: Vec<f64> = un.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let mut my = vec![0.0; y.len()];
        pre.apply_inverse(&y, &mut my);
        let sy = crate::linalg::dot(&s, &y);
        let ymy = crate::linalg::dot(&y, &my);
        alpha = if sy > 0.0 && ymy > 0.0 {
            (sy / ymy).clamp(1e-6, 1e3)
        } else {
            (2.0 * a).min(1e3)
        };
        u = un;
        e = en;
        g = gn;
        iterations = it + 1;
    }
    let grad_max = norm_inf(&g);
    if !converged && grad_max <= tol {
        converged = true;
    }
    if !converged {
        warn!("nehari_minimize stopped after {iterations} iterations with gmax={grad_max:e}");
    }
    Ok(SolveReport {
        nehari_residual: nehari_residual(f, &u),
        solution: GridFunction::new(domain, u)?,
        energy: e,
        grad_max,
        iterations,
        newton_steps: 0,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        newton_history: Vec::new(),
    })
}

/// Damped Newton with MINRES on the Hessian action; a step is accepted only if
/// the gradient max-norm decreases.
pub fn newton_refine(
    f: &DiscreteFunctional,
    u0: &GridFunction,
    tol: f64,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let pre = preconditioner_for(f);
    let mut u = u0.values.clone();
    let mut g = f.gradient(&u)?;
    let mut gmax = norm_inf(&g);
    if gmax > opts.newton_entry {
        return Err(Error::Precondition(format!(
            "Newton refinement needs gradient max-norm below {:e}, got {gmax:e}",
            opts.newton_entry
        )));
    }
    let mut history = Vec::new();
    let mut steps = 0;
    let mut converged = gmax <= tol;
    while !converged && steps < opts.newton_max_steps {
        let lin = f.linearize(&u);
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let rtol = (1e-2 * gmax).clamp(1e-13, 1e-4);
        let rep = minres(&lin, &pre, &rhs, rtol, opts.krylov_max_iter);
        if let Some(b) = &rep.breakdown {
            warn!("newton_refine: Krylov breakdown: {b}");
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(&rep.x).map(|(a, d)| a + lambda * d).collect();
            let gt = f.gradient(&trial)?;
            let gtm = norm_inf(&gt);
            if gtm < gmax {
                u = trial;
                g = gt;
                gmax = gtm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        steps += 1;
        if !accepted {
            debug!("newton_refine: no decrease along the Newton direction (gmax={gmax:e})");
            break;
        }
        history.push(gmax);
        debug!(
            "newton step {steps}: gmax={gmax:e}, krylov its={}",
            rep.iterations
        );
        converged = gmax <= tol;
    }
    let energy = f.value(&u)?;
    Ok(SolveReport {
        nehari_residual: nehari_residual(f, &u),
        solution: GridFunction::new(u0.domain.clone(), u)?,
        energy,
        grad_max: gmax,
        iterations: 0,
        newton_steps: steps,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        newton_history: history,
    })
}

/// Scales `bump` until its energy is negative.
pub fn negative_endpoint(f: &DiscreteFunctional, bump: &[f64]) -> Result<Vec<f64>> {
    let mut t = nehari_scale(f, bump, 1e-12)?;
    for _ in 0..60 {
        t *= 1.5;
        let e = scaled(bump, t);
        if f.value(&e)? < 0.0 {
            return Ok(e);
        }
    }
    Err(Error::Precondition(
        "could not reach negative energy by scaling".into(),
    ))
}

fn m_norm(pre: &SpectralPreconditioner, v: &[f64], scratch: &mut [f64]) -> f64 {
    pre.apply_forward(v, scratch);
    crate::linalg::dot(v, scratch).max(0.0).sqrt()
}

fn segment_max(f: &DiscreteFunctional, a: &[f64], b: &[f64]) -> Result<f64> {
    let eval = |s: f64| -> Result<f64> {
        let x: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(p, q)| (1.0 - s) * p + s * q)
            .collect();
        f.value(&x)
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut best = eval(0.0)?.max(eval(1.0)?);
    for _ in 0..24 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    best = best.max(f1).max(f2);
    Ok(best)
}

fn polyline_level(f: &DiscreteFunctional, path: &[Vec<f64>], energies: &[f64]) -> Result<f64> {
    let (imax, &emax) = energies
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let mut level = emax;
    if imax > 0 {
        level = level.max(segment_max(f, &path[imax - 1], &path[imax])?);
    }
    if imax + 1 < path.len() {
        level = level.max(segment_max(f, &path[imax], &path[imax + 1])?);
    }
    Ok(level)
}

/// Largest ratio of segment lengths that is left alone by [`redistribute`].
const SPACING_RATIO_MAX: f64 = 3.0;

/// Equal arc-length reparametrisation, applied only when the segment lengths
/// differ by more than [`SPACING_RATIO_MAX`]. Interpolating along the polyline
/// cuts corners and may raise the level, so a well-spaced path is kept as is.
fn redistribute(path: &[Vec<f64>], pre: &SpectralPreconditioner) -> Vec<Vec<f64>> {
    let k = path.len() - 1;
    let n = path[0].len();
    let mut scratch = vec![0.0; n];
    let mut cum = vec![0.0; k + 1];
    let (mut shortest, mut longest) = (f64::INFINITY, 0.0_f64);
    for i in 1..=k {
        let d: Vec<f64> = path[i]
            .iter()
            .zip(&path[i - 1])
            .map(|(a, b)| a - b)
            .collect();
        let len = m_norm(pre, &d, &mut scratch);
        shortest = shortest.min(len);
        longest = longest.max(len);
        cum[i] = cum[i - 1] + len;
    }
    if longest <= SPACING_RATIO_MAX * shortest {
        return path.to_vec();
    }
    let total = cum[k];
    let mut out = Vec::with_capacity(k + 1);
    out.push(path[0].clone());
    let mut seg = 1;
    for j in 1..k {
        let target = total * j as f64 / k as f64;
        while seg < k && cum[seg] < target {
            seg += 1;
        }
        let len = cum[seg] - cum[seg - 1];
        let s = if len > 0.0 {
            (target - cum[seg - 1]) / len
        } else {
            0.0
        };
        out.push(
            path[seg - 1]
                .iter()
                .zip(&path[seg])
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect(),
        );
    }
    out.push(path[k].clone());
    out
}

/// Path-deformation estimate of the mountain-pass level between `0` and `endpoint`.
///
/// Interior nodes with non-negative energy take preconditioned descent steps
/// perpendicular to the path (Armijo per node); the highest node climbs along
/// the path instead. Unevenly spaced nodes are redistributed by arc length in
/// the preconditioner metric, and the level is the maximum along the polyline
/// refined by golden-section search next to the highest node. Sweeps that would
/// raise the level are rejected, so the recorded levels never increase; the
/// path counts as stabilised once even negligible steps are rejected.
pub fn mountain_pass_level(
    f: &DiscreteFunctional,
    endpoint: &GridFunction,
    k: usize,
    opts: &SolverOptions,
) -> Result<MountainPassReport> {
    if k < 2 {
        return Err(Error::InvalidInput("path needs at least 2 segments".into()));
    }
    let e_end = f.value(&endpoint.values)?;
    if !(e_end < 0.0) {
        return Err(Error::Precondition(format!(
            "mountain-pass endpoint must have negative energy, got {e_end:e}"
        )));
    }
    let domain = endpoint.domain.clone();
    let vol = domain.cell_volume();
    let n = endpoint.values.len();
    let pre = preconditioner_for(f);
    let mut path: Vec<Vec<f64>> = (0..=k)
        .map(|i| scaled(&endpoint.values, i as f64 / k as f64))
        .collect();
    let mut energies: Vec<f64> = path.iter().map(|x| f.value(x)).collect::<Result<_>>()?;
    let mut level = polyline_level(f, &path, &energies)?;
    let mut history = vec![level];
    let mut steps = vec![1.0_f64; k + 1];
    let mut z = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut converged = false;
    let mut sweeps = 0;
    let c_armijo = 1e-4;

    while sweeps < opts.mp_max_sweeps {
        sweeps += 1;
        let mut new_path = path.clone();
        let mut new_energies = energies.clone();
        let steps_before = steps.clone();
        // highest interior node climbs along the path towards the saddle
        let climber = (1..k)
            .max_by(|a, b| energies[*a].total_cmp(&energies[*b]))
            .unwrap_or(1);
        for i in 1..k {
            // below zero a node cannot carry the level; descending it only
            // stretches the path into the unbounded-below region
            if energies[i] < 0.0 {
                continue;
            }
            let mut tau: Vec<f64> = path[i + 1]
                .iter()
                .zip(&path[i - 1])
                .map(|(a, b)| a - b)
                .collect();
            let tn = m_norm(&pre, &tau, &mut scratch);
            if tn > 0.0 {
                tau.iter_mut().for_each(|t| *t /= tn);
            }
            let g = f.gradient(&path[i])?;
            pre.apply_inverse(&g, &mut z);
            let gt = crate::linalg::dot(&g, &tau);
            if i == climber {
                // no descent function along a climbing direction: fixed step, kept if finite
                let a = steps[i].min(1.0);
                let trial: Vec<f64> = path[i]
                    .iter()
                    .zip(z.iter().zip(&tau))
                    .map(|(x, (zi, ti))| x - a * (zi - 2.0 * gt * ti))
                    .collect();
                if let Ok(et) = f.value(&trial) {
                    new_path[i] = trial;
                    new_energies[i] = et;
                }
                continue;
            }
            let d: Vec<f64> = z.iter().zip(&tau).map(|(zi, ti)| zi - gt * ti).collect();
            let gd = vol * crate::linalg::dot(&g, &d);
            if gd <= 0.0 {
                continue;
            }
            let mut a = steps[i];
            let mut moved = false;
            for _ in 0..20 {
                let trial: Vec<f64> = path[i].iter().zip(&d).map(|(x, di)| x - a * di).collect();
                // an overflowing trial counts as a failed Armijo test
                let et = f.value(&trial).unwrap_or(f64::INFINITY);
                if et <= energies[i] - c_armijo * a * gd {
                    new_path[i] = trial;
                    new_energies[i] = et;
                    moved = true;
                    break;
                }
                a *= 0.5;
            }
            steps[i] = if moved { (a * 1.5).min(10.0) } else { a };
        }
        let redistributed = redistribute(&new_path, &pre);
        let red_energies: Vec<f64> = redistributed
            .iter()
            .map(|x| f.value(x))
            .collect::<Result<_>>()?;
        let new_level = polyline_level(f, &redistributed, &red_energies)?;
        if new_level > level {
            steps = steps_before.iter().map(|s| 0.5 * s).collect();
            if steps.iter().skip(1).take(k - 1).all(|s| *s < 1e-8) {
                // Even negligible steps raise the level: the path has stabilised.
                debug!("mountain_pass_level: path stabilised after {sweeps} sweeps");
                converged = true;
                break;
            }
            continue;
        }
        path = redistributed;
        energies = red_energies;
        level = new_level;
        history.push(level);
        let h = history.len();
        if h > 10 {
            let old = history[h - 11];
            if (old - level) <= opts.mp_stall_rtol * level.abs() {
                converged = true;
                break;
            }
        }
    }
    info!("mountain_pass_level: level {level:.10e} after {sweeps} sweeps");
    Ok(MountainPassReport {
        path: path
            .into_iter()
            .map(|v| GridFunction {
                domain: domain.clone(),
                values: v,
            })
            .collect(),
        level,
        endpoint_energy: e_end,
        sweeps,
        level_history: history,
        converged,
    })
}

/// Grid for the concentration pipeline: the penalisation region plus a margin of
/// `max(box_margin, box_margin_eps * eps / sqrt(alpha))`, spacing `eps / cells_per_eps`.
pub fn concentration_grid(
    eps: f64,
    cfg: &PenaltyConfig,
    opts: &SolverOptions,
) -> Result<GridDomain> {
    let center = cfg.region.center();
    let half = cfg
        .region
        .lo
        .iter()
        .zip(&cfg.region.hi)
        .map(|(a, b)| 0.5 * (b - a))
        .fold(0.0, f64::max);
    let margin = opts
        .box_margin
        .max(opts.box_margin_eps * eps / cfg.alpha.sqrt());
    let l = half + margin;
    let h_target = eps / opts.cells_per_eps;
    let n = ((2.0 * l / h_target).ceil() as usize + 1).max(9);
    GridDomain::new(cfg.region.dim(), l, n, center, opts.memory_cap_mb << 20)
}

/// Explicit profile `alpha U(beta |T^t (x - y0)| / eps)` for the fields at
/// `seed_point = y0`, projected on the Nehari manifold of `f`.
pub fn concentration_seed(
    eps: f64,
    spec: &ProblemSpec,
    profile: &Arc<RadialProfile>,
    seed_point: &[f64],
    f: &DiscreteFunctional,
) -> Result<GridFunction> {
    let cfg = spec.penalty.as_ref().ok_or_else(|| {
        Error::Config("concentration solve requires a penalty configuration (lambda)".into())
    })?;
    if !cfg.region.contains(seed_point) {
        return Err(Error::Precondition(format!(
            "seed point {seed_point:?} is outside the penalisation region"
        )));
    }
    let xi: Vec<f64> = seed_point.iter().map(|x| x / eps).collect();
    let sp = scaled_profile(&xi, eps, profile.clone(), spec.v(), spec.j())?;
    let width = sp.beta * cfg.region.distance_to_boundary(seed_point) / eps;
    if width < 5.0 {
        return Err(Error::Precondition(format!(
            "eps={eps} too large for the seed: beta*dist/eps = {width:.3} < 5"
        )));
    }
    let domain = f.domain();
    let raw = domain.sample(|y| {
        let x: Vec<f64> = y.iter().map(|c| c / eps).collect();
        sp.value(&x)
    });
    let t = nehari_scale(f, &raw.values, 1e-13)?;
    GridFunction::new(domain.clone(), scaled(&raw.values, t))
}

/// Seed from the rescaled profile at `seed_point`, projected on the Nehari
/// manifold, then penalised projected descent and Newton refinement.
pub fn solve_concentrating(
    eps: f64,
    spec: &ProblemSpec,
    profile: &Arc<RadialProfile>,
    seed_point: &[f64],
    domain: &GridDomain,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if spec.penalty.is_none() {
        return Err(Error::Config(
            "concentration solve requires a penalty configuration (lambda)".into(),
        ));
    }
    let f = DiscreteFunctional::new(domain, spec, eps, &Mode::Penalized)?;
    let seed = concentration_seed(eps, spec, profile, seed_point, &f)?;
    let start = Instant::now();
    let desc = nehari_minimize(&f, &seed, opts.descent_tol, opts)?;
    if !desc.converged && desc.grad_max > opts.newton_entry {
        return Err(Error::NonConvergence {
            solver: "nehari_minimize",
            iterations: desc.iterations,
            residual: desc.grad_max,
        });
    }
    let mut rep = newton_refine(&f, &desc.solution, opts.newton_tol, opts)?;
    rep.iterations = desc.iterations;
    rep.wall_time = start.elapsed().as_secs_f64();
    if !rep.converged {
        warn!(
            "solve_concentrating eps={eps}: Newton stopped at gmax={:e}",
            rep.grad_max
        );
    }
    Ok(rep)
}

/// Outcome of one seed of [`multi_start`].
#[derive(Debug, Clone)]
pub struct DistinctSolution {
    pub report: SolveReport,
    pub barycenter: Vec<f64>,
    /// Indices of the seeds that converged to this solution.
    pub seeds: Vec<usize>,
}

/// Runs [`solve_concentrating`] from every seed (in parallel) and keeps distinct
/// solutions: two are duplicates when their energies agree to 1e-6 relative and
/// their barycentres are closer than `2h`. Sorted by energy.
pub fn multi_start(
    seed_points: &[Vec<f64>],
    eps: f64,
    spec: &ProblemSpec,
    profile: &Arc<RadialProfile>,
    domain: &GridDomain,
    opts: &SolverOptions,
) -> Result<Vec<DistinctSolution>> {
    if seed_points.is_empty() {
        return Err(Error::InvalidInput(
            "multi_start needs at least one seed".into(),
        ));
    }
    let radius = domain.region().corner_radius() * 2.0;
    let results: Vec<(usize, Result<SolveReport>)> = seed_points
        .par_iter()
        .enumerate()
        .map(|(i, s)| (i, solve_concentrating(eps, spec, profile, s, domain, opts)))
        .collect();
    let mut found: Vec<DistinctSolution> = Vec::new();
    let mut ok: Vec<(usize, SolveReport, Vec<f64>)> = Vec::new();
    for (i, r) in results {
        match r {
            Ok(rep) if rep.converged => {
                let b = barycenter(&rep.solution, radius)?;
                ok.push((i, rep, b));
            }
            Ok(rep) => warn!(
                "seed {i} did not converge (gmax={:e}); skipped",
                rep.grad_max
            ),
            Err(e) => warn!("seed {i} failed: {e}; skipped"),
        }
    }
    ok.sort_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)));
    let h = domain.h;
    for (i, rep, b) in ok {
        let dup = found.iter_mut().find(|d| {
            let de = (d.report.energy - rep.energy).abs() / d.report.energy.abs().max(1e-300);
            let db = d
                .barycenter
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            de < 1e-6 && db < 2.0 * h
        });
        match dup {
            Some(d) => d.seeds.push(i),
            None => found.push(DistinctSolution {
                report: rep,
                barycenter: b,
                seeds: vec![i],
            }),
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ConstantDiffusion, ConstantPotential, QuadraticWell};
    use crate::grid::build_grid;
    use crate::profile::solve_radial_ground_state;
    use crate::region::BoxRegion;

    fn unit_spec(dim: usize) -> ProblemSpec {
        ProblemSpec::new(
            dim,
            3.0,
            Arc::new(ConstantPotential { value: 1.0 }),
            Arc::new(ConstantDiffusion::identity(dim)),
        )
        .unwrap()
    }

    #[test]
    fn nehari_scale_closed_form() {
        let g = build_grid(1, 10.0, 201).unwrap();
        let spec = unit_spec(1);
        let f = DiscreteFunctional::new(&g, &spec, 1.0, &Mode::Raw).unwrap();
        let u = g.sample(|x| (-x[0] * x[0]).exp());
        let q = f.quadratic(&u.values);
        let p = f.power_moment(&u.values);
        let t = nehari_scale(&f, &u.values, 1e-13).unwrap();
        assert!((t - (q / p).sqrt()).abs() < 1e-14 * t);
        let tu = scaled(&u.values, t);
        assert!(nehari_residual(&f, &tu) < 1e-10);
        assert!((nehari_scale(&f, &tu, 1e-13).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            nehari_scale(&f, &vec![-1.0; g.len()], 1e-13),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn penalized_scale_matches_closed_form_inside_lambda() {
        let g = build_grid(1, 10.0, 201).unwrap();
        let cfg = PenaltyConfig::with_defaults(BoxRegion::cube(1, 5.0), 3.0, 1.0).unwrap();
        let spec = unit_spec(1).with_penalty(cfg);
        let raw = DiscreteFunctional::new(&g, &spec, 1.0, &Mode::Raw).unwrap();
        let pen = DiscreteFunctional::new(&g, &spec, 1.0, &Mode::Penalized).unwrap();
        let u = g.sample(|x| {
            if x[0].abs() < 4.0 {
                (16.0 - x[0] * x[0]) / 16.0
            } else {
                0.0
            }
        });
        let a = nehari_scale(&raw, &u.values, 1e-13).unwrap();
        let b = nehari_scale(&pen, &u.values, 1e-13).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
        // a bump straddling the boundary of Lambda needs the bisection
        let w = g.sample(|x| (-(x[0] - 4.5).powi(2)).exp());
        let t = nehari_scale(&pen, &w.values, 1e-13).unwrap();
        let tw = scaled(&w.values, t);
        assert!(nehari_residual(&pen, &tw) < 1e-10);
    }

    #[test]
    fn one_dimensional_ground_energy() {
        let g = build_grid(1, 20.0, 2048).unwrap();
        let spec = unit_spec(1);
        let f = DiscreteFunctional::new(&g, &spec, 1.0, &Mode::Frozen(vec![0.0])).unwrap();
        let seed = g.sample(|x| 1.2 * (-x[0] * x[0] / 2.0).exp());
        let rep = nehari_minimize(&f, &seed, 1e-6, &SolverOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(
            (rep.energy / (4.0 / 3.0) - 1.0).abs() < 1e-2,
            "{}",
            rep.energy
        );
        let refined = newton_refine(&f, &rep.solution, 1e-10, &SolverOptions::default()).unwrap();
        assert!(refined.converged);
        assert!(refined.newton_steps <= 8);
        for w in refined.newton_history.windows(2) {
            assert!(w[1] < w[0]);
        }
        // a converged solution is a fixed point of both solvers
        let again =
            nehari_minimize(&f, &refined.solution, 1e-6, &SolverOptions::default()).unwrap();
        assert!(again.iterations <= 2);
        let again = newton_refine(&f, &refined.solution, 1e-10, &SolverOptions::default()).unwrap();
        assert_eq!(again.newton_steps, 0);
    }

    #[test]
    fn frozen_energy_increases_with_potential() {
        let g = build_grid(1, 15.0, 601).unwrap();
        let spec = ProblemSpec::new(
            1,
            3.0,
            Arc::new(QuadraticWell::new(1.0, vec![0.0])),
            Arc::new(ConstantDiffusion::identity(1)),
        )
        .unwrap();
        let seed = g.sample(|x| 1.5 * (-x[0] * x[0]).exp());
        let e = |z: f64| {
            let f = DiscreteFunctional::new(&g, &spec, 1.0, &Mode::Frozen(vec![z])).unwrap();
            nehari_minimize(&f, &seed, 1e-6, &SolverOptions::default())
                .unwrap()
                .energy
        };
        assert!(e(0.8) > e(0.2));
    }

    #[test]
    fn mountain_pass_rejects_positive_endpoint() {
        let g = build_grid(1, 10.0, 101).unwrap();
        let f = DiscreteFunctional::new(&g, &unit_spec(1), 1.0, &Mode::Raw).unwrap();
        let u = g.sample(|x| 0.1 * (-x[0] * x[0]).exp());
        assert!(matches!(
            mountain_pass_level(&f, &u, 8, &SolverOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn mountain_pass_matches_nehari_in_one_dimension() {
        let g = build_grid(1, 15.0, 301).unwrap();
        let f = DiscreteFunctional::new(&g, &unit_spec(1), 1.0, &Mode::Frozen(vec![0.0])).unwrap();
        let bump = g.sample(|x| (-x[0] * x[0] / 3.0).exp());
        let end = negative_endpoint(&f, &bump.values).unwrap();
        let end = GridFunction::new(g.clone(), end).unwrap();
        let mp = mountain_pass_level(&f, &end, 12, &SolverOptions::default()).unwrap();
        let neh = nehari_minimize(&f, &bump, 1e-7, &SolverOptions::default()).unwrap();
        assert!(mp.level_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(
            ((mp.level - neh.energy) / neh.energy).abs() < 1e-3,
            "{} vs {}",
            mp.level,
            neh.energy
        );
        assert!(mp.level >= neh.energy * (1.0 - 1e-3));
    }

    #[test]
    fn concentrating_solution_constant_coefficients() {
        let profile = Arc::new(solve_radial_ground_state(2, 3.0, 1e-12).unwrap());
        let cfg = PenaltyConfig::with_defaults(BoxRegion::cube(2, 1.5), 3.0, 1.0).unwrap();
        let spec = unit_spec(2).with_penalty(cfg.clone());
        let eps = 0.2;
        let opts = SolverOptions::default();
        let dom = concentration_grid(eps, &cfg, &opts).unwrap();
        let rep = solve_concentrating(eps, &spec, &profile, &[0.0, 0.0], &dom, &opts).unwrap();
        assert!(rep.converged, "gmax={:e}", rep.grad_max);
        let ratio = rep.energy / eps.powi(2) / profile.c1();
        assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
        let neg = rep.solution.values.iter().fold(0.0_f64, |m, v| m.min(*v));
        assert!(-neg <= 1e-8 * rep.solution.max());
    }
}
