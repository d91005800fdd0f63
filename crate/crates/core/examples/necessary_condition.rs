//! The necessary-condition integrals at the concentration point, and at a pin
//! point where grad Gamma does not vanish.

use std::sync::Arc;

use concentra::diagnostics::{concentration_gradient_test, gamma_minimum};
use concentra::fields::{gamma_value_gradient, DiagonalQuadratic, QuadraticWell};
use concentra::grid::{DiscreteFunctional, Mode};
use concentra::penalty::PenaltyConfig;
use concentra::problem::ProblemSpec;
use concentra::profile::solve_radial_ground_state;
use concentra::region::BoxRegion;
use concentra::solvers::{
    concentration_grid, concentration_seed, solve_concentrating, SolverOptions,
};

fn main() -> concentra::Result<()> {
    let cfg =
        PenaltyConfig::with_defaults(BoxRegion::new(vec![-2.0, -2.0], vec![2.0, 2.0])?, 3.0, 1.0)?;
    let spec = ProblemSpec::new(
        2,
        3.0,
        Arc::new(QuadraticWell::new(1.0, vec![0.3, -0.2])),
        Arc::new(DiagonalQuadratic {
            base: vec![1.0, 1.0],
            quad: vec![vec![0.25, 0.0], vec![0.0, 0.0]],
        }),
    )?
    .with_penalty(cfg.clone());
    let prof = Arc::new(solve_radial_ground_state(2, 3.0, 1e-13)?);
    let (z0, _) = gamma_minimum(&spec, &cfg, 41)?;
    let opts = SolverOptions::default();
    for eps in [0.3, 0.15] {
        let dom = concentration_grid(eps, &cfg, &opts)?;
        let rep = solve_concentrating(eps, &spec, &prof, &z0, &dom, &opts)?;
        let c = concentration_gradient_test(&rep.solution, eps, &z0, &spec)?;
        println!("eps={eps}: integrals at argmin Gamma {c:?}");
    }
    let pin = [1.0, 0.5];
    let eps = 0.15;
    let dom = concentration_grid(eps, &cfg, &opts)?;
    let f = DiscreteFunctional::new(&dom, &spec, eps, &Mode::Penalized)?;
    let seed = concentration_seed(eps, &spec, &prof, &pin, &f)?;
    let c = concentration_gradient_test(&seed, eps, &pin, &spec)?;
    let (_, dg) = gamma_value_gradient(&pin, spec.v(), spec.j(), 3.0)?;
    println!(
        "pin {pin:?}: integrals {c:?}, -grad Gamma ({:.4}, {:.4})",
        -dg[0], -dg[1]
    );
    Ok(())
}
