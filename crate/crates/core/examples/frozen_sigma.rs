//! Ground energy of the frozen problem at a point z compared with C1 Gamma(z).

use std::sync::Arc;

use concentra::fields::{DiagonalQuadratic, QuadraticWell};
use concentra::frozen::frozen_sigma_numeric;
use concentra::grid::build_grid;
use concentra::problem::ProblemSpec;
use concentra::profile::{sigma_closed_form, solve_radial_ground_state};
use concentra::solvers::SolverOptions;

fn main() -> concentra::Result<()> {
    let v = Arc::new(QuadraticWell::new(0.5, vec![0.0, 0.0]));
    let j = Arc::new(DiagonalQuadratic {
        base: vec![1.0, 1.0],
        quad: vec![vec![0.25, 0.0], vec![0.0, 0.0]],
    });
    let spec = ProblemSpec::new(2, 3.0, v, j)?;
    let prof = Arc::new(solve_radial_ground_state(2, 3.0, 1e-13)?);
    let grid = build_grid(2, 14.0, 129)?;
    for z in [[0.0, 0.0], [0.8, -0.3]] {
        let st = frozen_sigma_numeric(&z, &grid, &spec, &prof, &SolverOptions::default())?;
        let closed = sigma_closed_form(&z, &prof, spec.v(), spec.j())?;
        println!(
            "z={z:?}: Sigma_num={:.6} C1 Gamma={:.6} rel err={:.2e} ({} descent its, {} Newton steps)",
            st.energy,
            closed,
            st.energy / closed - 1.0,
            st.iterations,
            st.newton_steps
        );
    }
    Ok(())
}
