//! Lyapunov-Schmidt reduced energy Phi_eps(xi) against C1 Gamma(eps xi).

use std::sync::Arc;

use concentra::fields::{gamma_value_gradient, DiagonalQuadratic, QuadraticWell};
use concentra::problem::ProblemSpec;
use concentra::profile::solve_radial_ground_state;
use concentra::reduction::{ReducedProblem, ReductionOptions};

fn main() -> concentra::Result<()> {
    let spec = ProblemSpec::new(
        2,
        3.0,
        Arc::new(QuadraticWell::new(0.5, vec![0.5, 0.2])),
        Arc::new(DiagonalQuadratic {
            base: vec![1.0, 1.0],
            quad: vec![vec![0.25, 0.0], vec![0.0, 0.0]],
        }),
    )?;
    let prof = Arc::new(solve_radial_ground_state(2, 3.0, 1e-13)?);
    let c1 = prof.c1();
    let opts = ReductionOptions {
        nodes: 129,
        ..ReductionOptions::default()
    };
    let rp = ReducedProblem::new(spec.clone(), prof, opts)?;
    let xi = [2.0, -1.0];
    for eps in [0.2, 0.1, 0.05] {
        let s = rp.reduced_energy(&xi, eps, true)?;
        let z: Vec<f64> = xi.iter().map(|x| eps * x).collect();
        let (g, dg) = gamma_value_gradient(&z, spec.v(), spec.j(), 3.0)?;
        let grad = s.grad.unwrap_or_default();
        println!(
            "eps={eps}: Phi={:.6} C1 Gamma={:.6} |w|={:.3e}; grad Phi={:.4e},{:.4e} vs C1 eps grad Gamma={:.4e},{:.4e}",
            s.phi,
            c1 * g,
            s.wnorm,
            grad[0],
            grad[1],
            c1 * eps * dg[0],
            c1 * eps * dg[1]
        );
    }
    Ok(())
}
