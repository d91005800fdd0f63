//! Multi-start on a double-well potential: one concentrating solution per well.

use std::sync::Arc;

use concentra::fields::{ConstantDiffusion, GaussianWell, GaussianWells};
use concentra::penalty::PenaltyConfig;
use concentra::problem::ProblemSpec;
use concentra::profile::solve_radial_ground_state;
use concentra::region::BoxRegion;
use concentra::solvers::{concentration_grid, multi_start, SolverOptions};

fn main() -> concentra::Result<()> {
    let well = |c: f64| GaussianWell {
        center: vec![c, 0.0],
        depth: 1.0,
        width: 0.5,
    };
    let v = Arc::new(GaussianWells {
        base: 2.0,
        wells: vec![well(1.0), well(-1.0)],
    });
    let cfg =
        PenaltyConfig::with_defaults(BoxRegion::new(vec![-2.5, -1.5], vec![2.5, 1.5])?, 3.0, 1.0)?;
    let spec = ProblemSpec::new(2, 3.0, v, Arc::new(ConstantDiffusion::identity(2)))?
        .with_penalty(cfg.clone());
    let prof = Arc::new(solve_radial_ground_state(2, 3.0, 1e-13)?);
    let eps = 0.2;
    let opts = SolverOptions {
        cells_per_eps: 5.0,
        ..SolverOptions::default()
    };
    let dom = concentration_grid(eps, &cfg, &opts)?;
    let seeds = vec![
        vec![1.0, 0.0],
        vec![0.9, 0.1],
        vec![-1.0, 0.0],
        vec![-1.1, -0.1],
    ];
    for s in multi_start(&seeds, eps, &spec, &prof, &dom, &opts)? {
        println!(
            "energy {:.8}, barycenter ({:+.4}, {:+.4}), from seeds {:?}",
            s.report.energy, s.barycenter[0], s.barycenter[1], s.seeds
        );
    }
    Ok(())
}
