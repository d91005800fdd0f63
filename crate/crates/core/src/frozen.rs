//! Numerical ground energy of the frozen-coefficient problem
//! `-div(J(z) grad u) + V(z) u = (u+)^p` and its directional derivatives.

use std::sync::Arc;

use log::warn;

use crate::grid::{DiscreteFunctional, GridDomain, GridFunction, Mode};
use crate::problem::ProblemSpec;
use crate::profile::{scaled_profile, RadialProfile};
use crate::solvers::{nehari_minimize, newton_refine, SolverOptions};
use crate::{Error, Result};

/// Largest admissible ratio of the seed at the box boundary to its peak.
pub const BOUNDARY_DECAY: f64 = 1e-6;

/// Discrete Nehari minimiser of the frozen functional `I_z`.
#[derive(Debug, Clone)]
pub struct FrozenGroundState {
    pub z: Vec<f64>,
    pub solution: GridFunction,
    /// `Sigma_num(z)`.
    pub energy: f64,
    /// `|DI_z(u)[u]| / |u|^2`, with `|u|^2` the quadratic part.
    pub nehari_residual: f64,
    pub grad_max: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub converged: bool,
}

impl FrozenGroundState {
    pub fn domain(&self) -> &GridDomain {
        &self.solution.domain
    }
}

/// Frozen functional at `z` on `grid`.
pub fn frozen_functional(
    z: &[f64],
    grid: &GridDomain,
    spec: &ProblemSpec,
) -> Result<DiscreteFunctional> {
    DiscreteFunctional::new(grid, spec, 1.0, &Mode::Frozen(z.to_vec()))
}

/// Seed for the frozen problem: the explicit profile for the coefficients at `z`,
/// centred in the box. Fails if it has not decayed to [`BOUNDARY_DECAY`] at the boundary.
pub fn frozen_seed(
    z: &[f64],
    grid: &GridDomain,
    spec: &ProblemSpec,
    profile: &Arc<RadialProfile>,
) -> Result<GridFunction> {
    let sp = scaled_profile(z, 1.0, profile.clone(), spec.v(), spec.j())?.centered_at(&grid.center);
    let edge = grid
        .region()
        .boundary_samples(33)
        .iter()
        .map(|x| sp.value(x))
        .fold(0.0, f64::max);
    if edge > BOUNDARY_DECAY * sp.peak() {
        return Err(Error::Precondition(format!(
            "box half-width {} too small at z={z:?}: profile is {:.2e} of its peak at the boundary",
            grid.half_width,
            edge / sp.peak()
        )));
    }
    Ok(grid.sample(|x| sp.value(x)))
}

/// `Sigma_num(z)`: projected descent on the discrete Nehari manifold of `I_z`
/// from the explicit profile, polished by Newton.
pub fn frozen_sigma_numeric(
    z: &[f64],
    grid: &GridDomain,
    spec: &ProblemSpec,
    profile: &Arc<RadialProfile>,
    opts: &SolverOptions,
) -> Result<FrozenGroundState> {
    let f = frozen_functional(z, grid, spec)?;
    let seed = frozen_seed(z, grid, spec, profile)?;
    let desc = nehari_minimize(&f, &seed, opts.descent_tol, opts)?;
    let rep = if desc.grad_max <= opts.newton_entry {
        let r = newton_refine(&f, &desc.solution, opts.newton_tol, opts)?;
        if r.grad_max <= desc.grad_max {
            r
        } else {
            desc.clone()
        }
    } else {
        desc.clone()
    };
    if !desc.converged && rep.nehari_residual > 1e-8 {
        return Err(Error::NonConvergence {
            solver: "frozen_sigma_numeric",
            iterations: desc.iterations,
            residual: rep.grad_max,
        });
    }
    if rep.nehari_residual > 1e-8 {
        warn!(
            "frozen ground state at z={z:?}: Nehari residual {:e}",
            rep.nehari_residual
        );
    }
    Ok(FrozenGroundState {
        z: z.to_vec(),
        nehari_residual: rep.nehari_residual,
        energy: rep.energy,
        grad_max: rep.grad_max,
        iterations: desc.iterations,
        newton_steps: rep.newton_steps,
        converged: desc.converged || rep.converged,
        solution: rep.solution,
    })
}

/// `1/2 int <d_i J(z) grad v, grad v> + 1/2 d_i V(z) int v^2` for the computed
/// ground state `v`; the derivative of `Sigma` along axis `i` when the ground
/// state is unique.
pub fn sigma_directional_derivative(
    z: &[f64],
    axis: usize,
    state: &FrozenGroundState,
    spec: &ProblemSpec,
) -> Result<f64> {
    if axis >= spec.dim || z.len() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "axis {axis} or point {z:?} incompatible with N={}",
            spec.dim
        )));
    }
    let f = frozen_functional(z, state.domain(), spec)?;
    let (g, mass) = f.gradient_moments(&state.solution.values);
    let dj = spec.j().partial(z, axis);
    let dv = spec.v().gradient(z)[axis];
    let tr: f64 = (0..spec.dim)
        .flat_map(|k| (0..spec.dim).map(move |l| (k, l)))
        .map(|(k, l)| dj[(k, l)] * g[(l, k)])
        .sum();
    Ok(0.5 * tr + 0.5 * dv * mass)
}
