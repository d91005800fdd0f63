//! Concentration series: solutions at eps0 2^-j and their maximum points.

use std::sync::Arc;

use concentra::diagnostics::concentration_series;
use concentra::fields::{DiagonalQuadratic, QuadraticWell};
use concentra::penalty::PenaltyConfig;
use concentra::problem::ProblemSpec;
use concentra::profile::solve_radial_ground_state;
use concentra::region::BoxRegion;
use concentra::solvers::SolverOptions;

fn main() -> concentra::Result<()> {
    let region = BoxRegion::new(vec![-2.0, -2.0], vec![2.0, 2.0])?;
    let spec = ProblemSpec::new(
        2,
        3.0,
        Arc::new(QuadraticWell::new(1.0, vec![0.3, -0.2])),
        Arc::new(DiagonalQuadratic {
            base: vec![1.0, 1.0],
            quad: vec![vec![0.25, 0.0], vec![0.0, 0.0]],
        }),
    )?
    .with_penalty(PenaltyConfig::with_defaults(region, 3.0, 1.0)?);
    let prof = Arc::new(solve_radial_ground_state(2, 3.0, 1e-13)?);
    let s = concentration_series(&spec, &prof, 0.3, 3, None, &SolverOptions::default())?;
    s.write_csv(std::io::stdout().lock())?;
    let sum = s.summary();
    println!("argmin Gamma {:?}, Sigma(z0) {:.6}", s.z0, s.sigma_z0);
    println!("distances {:?}", sum.distances);
    println!("energy errors {:?}", sum.energy_errors);
    Ok(())
}
