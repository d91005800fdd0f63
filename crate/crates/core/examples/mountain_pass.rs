//! Mountain-pass level by path deformation versus the Nehari minimum (1D).

use std::sync::Arc;

use concentra::fields::{ConstantDiffusion, ConstantPotential};
use concentra::grid::{build_grid, DiscreteFunctional, GridFunction, Mode};
use concentra::problem::ProblemSpec;
use concentra::solvers::{
    mountain_pass_level, negative_endpoint, nehari_minimize, newton_refine, SolverOptions,
};

fn main() -> concentra::Result<()> {
    let spec = ProblemSpec::new(
        1,
        3.0,
        Arc::new(ConstantPotential { value: 1.0 }),
        Arc::new(ConstantDiffusion::identity(1)),
    )?;
    let grid = build_grid(1, 15.0, 601)?;
    let f = DiscreteFunctional::new(&grid, &spec, 1.0, &Mode::Raw)?;
    let bump = grid.sample(|x| (-x[0] * x[0]).exp());
    let opts = SolverOptions::default();
    let desc = nehari_minimize(&f, &bump, opts.descent_tol, &opts)?;
    let ground = newton_refine(&f, &desc.solution, opts.newton_tol, &opts)?;
    let end = GridFunction::new(grid.clone(), negative_endpoint(&f, &bump.values)?)?;
    let mp = mountain_pass_level(&f, &end, opts.mp_nodes, &opts)?;
    println!("Nehari minimum  {:.10}", ground.energy);
    println!(
        "mountain pass   {:.10} after {} sweeps",
        mp.level, mp.sweeps
    );
    println!("exact C1 = C0/4 = {:.10}", 4.0 / 3.0);
    Ok(())
}
