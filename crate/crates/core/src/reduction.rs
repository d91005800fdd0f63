//! Lyapunov-Schmidt reduction in the rescaled variable `x -> eps x`.
//!
//! Around the explicit profile `z_xi` the unknown is split as `z_xi + w` with `w`
//! orthogonal (in `H^1`) to the tangent vectors `d z_xi / d xi_i`. The correction
//! solves the projected equation by a Newton-Kantorovich iteration with the
//! Hessian frozen at `z_xi`; the reduced energy is `Phi(xi) = f_eps(z_xi + w)`.

use std::io::Write;
use std::sync::Arc;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::fields::{find_gamma_critical_points, Classification};
use crate::grid::{mesh_dot, DiscreteFunctional, GridDomain, GridFunction, Linearization, Mode};
use crate::linalg::{minres, LinearOperator, SpectralPreconditioner};
use crate::problem::ProblemSpec;
use crate::profile::{scaled_profile, RadialProfile, ScaledProfile};
use crate::region::BoxRegion;
use crate::solvers::{newton_refine, SolverOptions};
use crate::{Error, Result};

/// Parameters of the reduction, read from the `[reduction]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionOptions {
    /// Half-width of the box around `xi` in rescaled units.
    pub half_width: f64,
    /// Nodes per axis.
    pub nodes: usize,
    /// Update-norm tolerance of the correction iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest admissible `eps`.
    pub eps_max: f64,
    /// Finite-difference step in `xi` for the reduced gradient.
    pub h_xi: f64,
    /// Finite-difference step in `xi` for the reduced Hessian.
    pub h_hessian: f64,
    pub krylov_rtol: f64,
    pub krylov_max_iter: usize,
    /// Largest admissible condition number of the tangent Gram matrix.
    pub gram_condition_max: f64,
    /// Reduced Newton stops when the step falls below this.
    pub newton_step_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            half_width: 12.0,
            nodes: 193,
            tol: 1e-8,
            max_iter: 100,
            eps_max: 0.5,
            h_xi: 1e-3,
            h_hessian: 0.05,
            krylov_rtol: 1e-10,
            krylov_max_iter: 3000,
            gram_condition_max: 1e8,
            newton_step_tol: 1e-6,
            newton_max_iter: 30,
        }
    }
}

/// One evaluation of the reduced energy.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedSample {
    pub xi: Vec<f64>,
    pub eps: f64,
    /// `H^1` mesh norm of the correction `w`.
    pub wnorm: f64,
    pub phi: f64,
    /// Reduced gradient (present when requested).
    pub grad: Option<Vec<f64>>,
    pub iterations: usize,
    /// Max-norm of the projected residual.
    pub residual: f64,
    /// Largest relative `H^1` inner product of `w` with a tangent vector.
    pub orthogonality: f64,
}

/// Reduction problem: fields, limit profile and discretisation parameters.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub spec: ProblemSpec,
    pub profile: Arc<RadialProfile>,
    pub opts: ReductionOptions,
}

/// Profile, tangent space and projector at one `(eps, xi)`.
#[derive(Debug, Clone)]
pub struct ProfileFrame {
    pub xi: Vec<f64>,
    pub eps: f64,
    pub grid: GridDomain,
    /// Rescaled functional `f_eps` with coefficients `J(eps x)`, `V(eps x)`.
    pub functional: DiscreteFunctional,
    pub profile: ScaledProfile,
    pub z: GridFunction,
    pub tangents: Vec<Vec<f64>>,
    /// `H^1` Riesz images `A t_i` of the tangent vectors.
    duals: Vec<Vec<f64>>,
    gram_inv: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    h1: Linearization,
}

impl ProfileFrame {
    /// `H^1` inner product `int grad a . grad b + a b`.
    pub fn h1_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        mesh_dot(&self.grid, a, &self.h1.apply_vec(b))
    }

    pub fn h1_norm(&self, a: &[f64]) -> f64 {
        self.h1_dot(a, a).max(0.0).sqrt()
    }

    fn coefficients(&self, c: DVector<f64>) -> DVector<f64> {
        &self.gram_inv * c
    }

    /// `H^1`-orthogonal projection onto the complement of the tangent space.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let c = DVector::from_iterator(
            self.duals.len(),
            self.duals.iter().map(|s| mesh_dot(&self.grid, s, v)),
        );
        let a = self.coefficients(c);
        let mut out = v.to_vec();
        for (i, t) in self.tangents.iter().enumerate() {
            crate::linalg::axpy(-a[i], t, &mut out);
        }
        out
    }

    /// Adjoint of [`Self::project`] in the mesh inner product; removes the
    /// `span{A t_i}` component of a residual.
    pub fn project_dual(&self, r: &[f64]) -> Vec<f64> {
        let c = DVector::from_iterator(
            self.tangents.len(),
            self.tangents.iter().map(|t| mesh_dot(&self.grid, t, r)),
        );
        let a = self.coefficients(c);
        let mut out = r.to_vec();
        for (i, s) in self.duals.iter().enumerate() {
            crate::linalg::axpy(-a[i], s, &mut out);
        }
        out
    }

    /// Hessian of `f_eps` at `z_xi`.
    pub fn hessian(&self) -> Linearization {
        self.functional.linearize(&self.z.values)
    }

    /// Largest relative inner product `|<w, t_i>| / (|w| |t_i|)` in `H^1`.
    pub fn orthogonality(&self, w: &[f64]) -> f64 {
        let wn = self.h1_norm(w);
        if wn == 0.0 {
            return 0.0;
        }
        self.tangents
            .iter()
            .map(|t| self.h1_dot(w, t).abs() / (wn * self.h1_norm(t)))
            .fold(0.0, f64::max)
    }
}

/// Discretised tangent vectors `d z_xi / d xi_i` (chain rule through `alpha`,
/// `beta`, `J^{-1}` and the centre).
pub fn tangent_basis(sp: &ScaledProfile, grid: &GridDomain) -> Vec<GridFunction> {
    let dim = grid.dim;
    let mut cols = vec![vec![0.0; grid.len()]; dim];
    for (k, x) in grid.points().enumerate() {
        let d = sp.xi_derivatives(&x);
        for i in 0..dim {
            cols[i][k] = d[i];
        }
    }
    cols.into_iter()
        .map(|values| GridFunction {
            domain: grid.clone(),
            values,
        })
        .collect()
}

/// Size `eps |DJ(eps xi)| + eps |grad V(eps xi)| + eps^2` expected of the correction.
pub fn natural_size(spec: &ProblemSpec, eps: f64, xi: &[f64]) -> f64 {
    let z: Vec<f64> = xi.iter().map(|x| eps * x).collect();
    let dj: f64 = (0..spec.dim)
        .map(|i| spec.j().partial(&z, i).norm_squared())
        .sum::<f64>()
        .sqrt();
    let dv = spec.v().gradient(&z).norm();
    eps * dj + eps * dv + eps * eps
}

struct Projected<'a> {
    frame: &'a ProfileFrame,
    hessian: &'a Linearization,
}

impl LinearOperator for Projected<'_> {
    /// `P' L P x + Q' H Q x` with `Q = I - P` and `H` the `H^1` Gram operator.
    /// The second block keeps the operator nonsingular on the tangent space
    /// without changing solutions that lie in the range of `P`.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let px = self.frame.project(x);
        let lx = self.hessian.apply_vec(&px);
        y.copy_from_slice(&self.frame.project_dual(&lx));
        let c = DVector::from_iterator(
            self.frame.duals.len(),
            self.frame
                .duals
                .iter()
                .map(|s| mesh_dot(&self.frame.grid, s, x)),
        );
        let a = self.frame.coefficients(c);
        for (i, s) in self.frame.duals.iter().enumerate() {
            crate::linalg::axpy(a[i], s, y);
        }
    }
}

impl ReducedProblem {
    pub fn new(
        spec: ProblemSpec,
        profile: Arc<RadialProfile>,
        opts: ReductionOptions,
    ) -> Result<Self> {
        if profile.dim != spec.dim || profile.p != spec.p {
            return Err(Error::InvalidInput(format!(
                "profile (N={}, p={}) does not match the problem (N={}, p={})",
                profile.dim, profile.p, spec.dim, spec.p
            )));
        }
        if opts.nodes < 8 || !(opts.half_width > 0.0) || !(opts.tol > 0.0) {
            return Err(Error::Config("reduction grid or tolerance invalid".into()));
        }
        Ok(Self {
            spec,
            profile,
            opts,
        })
    }

    /// Grid in rescaled coordinates centred at `xi`.
    pub fn grid(&self, xi: &[f64]) -> Result<GridDomain> {
        GridDomain::new(
            self.spec.dim,
            self.opts.half_width,
            self.opts.nodes,
            xi.to_vec(),
            crate::grid::DEFAULT_MEMORY_CAP,
        )
    }

    pub fn frame(&self, xi: &[f64], eps: f64) -> Result<ProfileFrame> {
        if !(eps > 0.0 && eps <= self.opts.eps_max) {
            return Err(Error::Precondition(format!(
                "eps={eps} outside (0, {}] for the reduction",
                self.opts.eps_max
            )));
        }
        let grid = self.grid(xi)?;
        let functional = DiscreteFunctional::new(&grid, &self.spec, eps, &Mode::Rescaled)?;
        let sp = scaled_profile(xi, eps, self.profile.clone(), self.spec.v(), self.spec.j())?;
        let z = grid.sample(|x| sp.value(x));
        let h1 = DiscreteFunctional::h1_form(&grid).linear_part();
        let tangents: Vec<Vec<f64>> = tangent_basis(&sp, &grid)
            .into_iter()
            .map(|t| t.values)
            .collect();
        let duals: Vec<Vec<f64>> = tangents.iter().map(|t| h1.apply_vec(t)).collect();
        let n = tangents.len();
        let gram = DMatrix::from_fn(n, n, |i, j| mesh_dot(&grid, &tangents[i], &duals[j]));
        let eig = crate::linalg::symmetric_eigenvalues(&gram);
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &e| {
            (a.min(e), b.max(e.abs()))
        });
        if !(lo > 0.0) || hi / lo > self.opts.gram_condition_max {
            return Err(Error::Precondition(format!(
                "tangent basis degenerate at xi={xi:?}: Gram eigenvalues {eig:?} (grid too coarse)"
            )));
        }
        let gram_inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("tangent Gram matrix not invertible".into()))?;
        Ok(ProfileFrame {
            xi: xi.to_vec(),
            eps,
            grid,
            functional,
            profile: sp,
            z,
            tangents,
            duals,
            gram_inv,
            gram,
            h1,
        })
    }

    fn preconditioner(&self, frame: &ProfileFrame) -> SpectralPreconditioner {
        frame
            .functional
            .exact_constant_preconditioner()
            .unwrap_or_else(|| frame.functional.preconditioner())
    }

    /// Correction `w` with `w` orthogonal to the tangent space and
    /// `grad f_eps(z_xi + w)` in the span of the tangent images.
    pub fn solve_correction(&self, frame: &ProfileFrame) -> Result<(Vec<f64>, ReducedSample)> {
        let f = &frame.functional;
        let hessian = frame.hessian();
        let op = Projected {
            frame,
            hessian: &hessian,
        };
        let pre = self.preconditioner(frame);
        let stop = self
            .opts
            .tol
            .max(1e-3 * natural_size(&self.spec, frame.eps, &frame.xi));
        let n = frame.z.values.len();
        let mut w = vec![0.0; n];
        let mut last_update = f64::INFINITY;
        let mut growth = 0;
        let mut iterations = 0;
        loop {
            let u: Vec<f64> = frame.z.values.iter().zip(&w).map(|(a, b)| a + b).collect();
            let g = f.gradient(&u)?;
            let rhs: Vec<f64> = frame.project_dual(&g).iter().map(|v| -v).collect();
            let rep = minres(
                &op,
                &pre,
                &rhs,
                self.opts.krylov_rtol,
                self.opts.krylov_max_iter,
            );
            if let Some(b) = rep.breakdown {
                return Err(Error::Breakdown(format!(
                    "correction solve at xi={:?}: {b}",
                    frame.xi
                )));
            }
            let delta = frame.project(&rep.x);
            crate::linalg::axpy(1.0, &delta, &mut w);
            iterations += 1;
            let update = frame.h1_norm(&delta);
            debug!(
                "correction it {iterations}: |P'g|={:e}, |dw|={update:e}, krylov {} its, rel residual {:e}",
                crate::linalg::norm_inf(&rhs),
                rep.iterations,
                rep.relative_residual
            );
            if update < stop {
                break;
            }
            growth = if update > last_update { growth + 1 } else { 0 };
            if growth >= 3 {
                return Err(Error::Contraction {
                    eps: frame.eps,
                    xi: frame.xi.clone(),
                    reason: "update norm grew for 3 consecutive iterations".into(),
                });
            }
            if iterations >= self.opts.max_iter {
                return Err(Error::Contraction {
                    eps: frame.eps,
                    xi: frame.xi.clone(),
                    reason: format!(
                        "no convergence in {} iterations (last update {update:e})",
                        self.opts.max_iter
                    ),
                });
            }
            last_update = update;
        }
        let u: Vec<f64> = frame.z.values.iter().zip(&w).map(|(a, b)| a + b).collect();
        let (phi, g) = f.value_gradient(&u)?;
        let residual = crate::linalg::norm_inf(&frame.project_dual(&g));
        let sample = ReducedSample {
            xi: frame.xi.clone(),
            eps: frame.eps,
            wnorm: frame.h1_norm(&w),
            phi,
            grad: None,
            iterations,
            residual,
            orthogonality: frame.orthogonality(&w),
        };
        Ok((w, sample))
    }

    fn phi_at(&self, xi: &[f64], eps: f64) -> Result<f64> {
        let frame = self.frame(xi, eps)?;
        Ok(self.solve_correction(&frame)?.1.phi)
    }

    /// `Phi_eps(xi)`; with `with_gradient`, also the centred finite-difference
    /// gradient in `xi` (step `h_xi`, correction re-solved at every stencil point).
    pub fn reduced_energy(
        &self,
        xi: &[f64],
        eps: f64,
        with_gradient: bool,
    ) -> Result<ReducedSample> {
        let frame = self.frame(xi, eps)?;
        let (_, mut sample) = self.solve_correction(&frame)?;
        if with_gradient {
            sample.grad = Some(self.reduced_gradient(xi, eps)?);
        }
        Ok(sample)
    }

    pub fn reduced_gradient(&self, xi: &[f64], eps: f64) -> Result<Vec<f64>> {
        let h = self.opts.h_xi;
        (0..xi.len())
            .map(|i| {
                let mut a = xi.to_vec();
                let mut b = xi.to_vec();
                a[i] += h;
                b[i] -= h;
                Ok((self.phi_at(&a, eps)? - self.phi_at(&b, eps)?) / (2.0 * h))
            })
            .collect()
    }

    /// Centred second differences of `Phi` with step `h_hessian`.
    pub fn reduced_hessian(&self, xi: &[f64], eps: f64, phi0: f64) -> Result<DMatrix<f64>> {
        let n = xi.len();
        let h = self.opts.h_hessian;
        let shifted = |pairs: &[(usize, f64)]| -> Result<f64> {
            let mut x = xi.to_vec();
            for &(i, s) in pairs {
                x[i] += s * h;
            }
            self.phi_at(&x, eps)
        };
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            hess[(i, i)] = (shifted(&[(i, 1.0)])? - 2.0 * phi0 + shifted(&[(i, -1.0)])?) / (h * h);
            for j in 0..i {
                let v = (shifted(&[(i, 1.0), (j, 1.0)])?
                    - shifted(&[(i, 1.0), (j, -1.0)])?
                    - shifted(&[(i, -1.0), (j, 1.0)])?
                    + shifted(&[(i, -1.0), (j, -1.0)])?)
                    / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        Ok(hess)
    }

    /// Damped Newton on `grad Phi` from `xi0`; returns the converged centre.
    pub fn reduced_newton(&self, xi0: &[f64], eps: f64) -> Result<(Vec<f64>, ReducedSample)> {
        let mut xi = xi0.to_vec();
        let mut sample = self.reduced_energy(&xi, eps, true)?;
        let mut gnorm = norm(sample.grad.as_ref().unwrap());
        for it in 0..self.opts.newton_max_iter {
            let hess = self.reduced_hessian(&xi, eps, sample.phi)?;
            let g = DVector::from_vec(sample.grad.clone().unwrap());
            let step = hess
                .lu()
                .solve(&(-&g))
                .ok_or_else(|| Error::Numeric("singular reduced Hessian".into()))?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let trial: Vec<f64> = xi
                    .iter()
                    .zip(step.iter())
                    .map(|(a, d)| a + lambda * d)
                    .collect();
                let s = self.reduced_energy(&trial, eps, true)?;
                let tn = norm(s.grad.as_ref().unwrap());
                if tn < gnorm {
                    xi = trial;
                    sample = s;
                    gnorm = tn;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            let moved = lambda * step.norm();
            debug!("reduced Newton it {it}: |grad Phi|={gnorm:e}, step={moved:e}");
            if !accepted || moved <= self.opts.newton_step_tol {
                break;
            }
        }
        Ok((xi, sample))
    }

    /// Critical points of `Phi_eps` in a box of `xi`, seeded at the nondegenerate
    /// critical points of `Gamma` in the image box, each emitted with the assembled
    /// full solution polished by Newton on the unreduced functional.
    pub fn reduced_critical_points(
        &self,
        xi_box: &BoxRegion,
        eps: f64,
        coarse_grid: usize,
        solver: &SolverOptions,
    ) -> Result<Vec<ReducedCriticalPoint>> {
        let zbox = xi_box.scaled(eps);
        let crit = find_gamma_critical_points(
            &zbox,
            coarse_grid,
            1e-10,
            self.spec.v(),
            self.spec.j(),
            self.spec.p,
        )?;
        let mut out: Vec<ReducedCriticalPoint> = Vec::new();
        for c in crit
            .iter()
            .filter(|c| c.classification != Classification::Degenerate)
        {
            let seed: Vec<f64> = c.point.iter().map(|z| z / eps).collect();
            let (xi, sample) = match self.reduced_newton(&seed, eps) {
                Ok(r) => r,
                Err(e) => {
                    warn!("reduced Newton from xi={seed:?} failed: {e}; skipped");
                    continue;
                }
            };
            if !xi_box.contains(&xi) {
                warn!("reduced Newton from xi={seed:?} left the box; skipped");
                continue;
            }
            if out.iter().any(|o| norm_diff(&o.xi, &xi) < 1e-3) {
                continue;
            }
            let frame = self.frame(&xi, eps)?;
            let (w, _) = self.solve_correction(&frame)?;
            let assembled: Vec<f64> = frame.z.values.iter().zip(&w).map(|(a, b)| a + b).collect();
            let assembled = GridFunction::new(frame.grid.clone(), assembled)?;
            let polished = newton_refine(&frame.functional, &assembled, solver.newton_tol, solver)?;
            out.push(ReducedCriticalPoint {
                z: xi.iter().map(|x| eps * x).collect(),
                xi,
                gamma_point: c.point.clone(),
                classification: c.classification,
                sample,
                residual: polished.grad_max,
                solution: polished.solution,
            });
        }
        Ok(out)
    }
}

/// Output of [`ReducedProblem::reduced_critical_points`].
#[derive(Debug, Clone)]
pub struct ReducedCriticalPoint {
    pub xi: Vec<f64>,
    /// `eps * xi`.
    pub z: Vec<f64>,
    /// Critical point of `Gamma` that seeded the search.
    pub gamma_point: Vec<f64>,
    pub classification: Classification,
    pub sample: ReducedSample,
    /// Euler-Lagrange residual (max-norm) of the polished full solution.
    pub residual: f64,
    pub solution: GridFunction,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Writes rows `xi..., phi, grad..., wnorm, iters`.
pub fn write_landscape_csv<W: Write>(mut w: W, samples: &[ReducedSample]) -> Result<()> {
    let dim = samples.first().map(|s| s.xi.len()).unwrap_or(0);
    let mut header: Vec<String> = (0..dim).map(|i| format!("xi{i}")).collect();
    header.push("phi".into());
    header.extend((0..dim).map(|i| format!("grad{i}")));
    header.push("wnorm".into());
    header.push("iters".into());
    writeln!(w, "{}", header.join(","))?;
    for s in samples {
        let mut row: Vec<String> = s.xi.iter().map(|v| format!("{v:.17e}")).collect();
        row.push(format!("{:.17e}", s.phi));
        match &s.grad {
            Some(g) => row.extend(g.iter().map(|v| format!("{v:.17e}"))),
            None => row.extend((0..dim).map(|_| "nan".to_string())),
        }
        row.push(format!("{:.17e}", s.wnorm));
        row.push(s.iterations.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ConstantDiffusion, ConstantPotential, QuadraticWell};
    use crate::profile::solve_radial_ground_state;

    fn problem(
        v: Arc<dyn crate::fields::PotentialField>,
        dim: usize,
        opts: ReductionOptions,
    ) -> ReducedProblem {
        let spec =
            ProblemSpec::new(dim, 3.0, v, Arc::new(ConstantDiffusion::identity(dim))).unwrap();
        let prof = Arc::new(solve_radial_ground_state(dim, 3.0, 1e-12).unwrap());
        ReducedProblem::new(spec, prof, opts).unwrap()
    }

    fn opts_1d() -> ReductionOptions {
        ReductionOptions {
            nodes: 1201,
            ..Default::default()
        }
    }

    #[test]
    fn constant_coefficients_give_pure_translations() {
        let rp = problem(Arc::new(ConstantPotential { value: 1.0 }), 1, opts_1d());
        let frame = rp.frame(&[0.7], 0.2).unwrap();
        for (k, x) in frame.grid.points().enumerate() {
            let g = frame.profile.gradient(&x)[0];
            assert!((frame.tangents[0][k] + g).abs() < 1e-14);
        }
        let (w, s) = rp.solve_correction(&frame).unwrap();
        let zn = frame.h1_norm(&frame.z.values);
        assert!(s.wnorm <= 1e-4 * zn, "{} vs {}", s.wnorm, zn);
        assert!(frame.orthogonality(&w) < 1e-8);
        let a = rp.reduced_energy(&[0.7], 0.2, false).unwrap().phi;
        let b = rp.reduced_energy(&[-2.3], 0.2, false).unwrap().phi;
        assert!(((a - b) / a).abs() < 1e-6);
    }

    #[test]
    fn projector_is_idempotent_and_symmetric() {
        let rp = problem(Arc::new(QuadraticWell::new(1.0, vec![0.5])), 1, opts_1d());
        let frame = rp.frame(&[1.0], 0.2).unwrap();
        let n = frame.z.values.len();
        let v: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin()).collect();
        let w: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.11).cos()).collect();
        let pv = frame.project(&v);
        let ppv = frame.project(&pv);
        let scale = frame.h1_norm(&pv);
        assert!(
            frame.h1_norm(&pv.iter().zip(&ppv).map(|(a, b)| a - b).collect::<Vec<_>>())
                < 1e-10 * scale
        );
        let lhs = frame.h1_dot(&pv, &w);
        let rhs = frame.h1_dot(&v, &frame.project(&w));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        assert!(frame.orthogonality(&pv) < 1e-10);
    }

    #[test]
    fn correction_grows_with_field_gradient() {
        let rp = problem(Arc::new(QuadraticWell::new(1.0, vec![0.5])), 1, opts_1d());
        let a = rp.reduced_energy(&[0.0], 0.1, false).unwrap();
        let b = rp.reduced_energy(&[0.0], 0.2, false).unwrap();
        assert!(b.wnorm > 1.5 * a.wnorm, "{} {}", a.wnorm, b.wnorm);
        assert!(a.orthogonality < 1e-8);
    }

    #[test]
    fn landscape_csv_layout() {
        let s = ReducedSample {
            xi: vec![1.0, 2.0],
            eps: 0.1,
            wnorm: 0.5,
            phi: 3.0,
            grad: Some(vec![0.1, 0.2]),
            iterations: 4,
            residual: 0.0,
            orthogonality: 0.0,
        };
        let mut buf = Vec::new();
        write_landscape_csv(&mut buf, &[s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "xi0,xi1,phi,grad0,grad1,wnorm,iters");
        assert_eq!(lines.next().unwrap().split(',').count(), 7);
    }
}
