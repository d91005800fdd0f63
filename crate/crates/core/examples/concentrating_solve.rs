//! One penalised solve at fixed eps: the spike sits near the minimum of Gamma
//! and stays below ell outside the penalisation box.

use std::sync::Arc;

use concentra::diagnostics::{exterior_bound_check, gamma_minimum, global_max_point};
use concentra::fields::{ConstantDiffusion, QuadraticWell};
use concentra::penalty::PenaltyConfig;
use concentra::problem::ProblemSpec;
use concentra::profile::solve_radial_ground_state;
use concentra::region::BoxRegion;
use concentra::solvers::{concentration_grid, solve_concentrating, SolverOptions};

fn main() -> concentra::Result<()> {
    let region = BoxRegion::new(vec![-2.0, -2.0], vec![2.0, 2.0])?;
    let cfg = PenaltyConfig::with_defaults(region, 3.0, 1.0)?;
    let spec = ProblemSpec::new(
        2,
        3.0,
        Arc::new(QuadraticWell::new(1.0, vec![0.4, -0.3])),
        Arc::new(ConstantDiffusion::identity(2)),
    )?
    .with_penalty(cfg.clone());
    let prof = Arc::new(solve_radial_ground_state(2, 3.0, 1e-13)?);
    let (z0, _) = gamma_minimum(&spec, &cfg, 41)?;
    let eps = 0.2;
    let opts = SolverOptions::default();
    let dom = concentration_grid(eps, &cfg, &opts)?;
    let seed = [0.0, 0.0];
    let rep = solve_concentrating(eps, &spec, &prof, &seed, &dom, &opts)?;
    let mp = global_max_point(&rep.solution)?;
    let (ok, ext) = exterior_bound_check(&rep.solution, &cfg);
    println!("grid {}^2, h={:.4}", dom.n, dom.h);
    println!("seed {seed:?}, argmin Gamma {z0:?}");
    println!(
        "max point {:?} (peak {:.4}, unique {})",
        mp.x, mp.peak, mp.unique
    );
    println!(
        "eps^-2 E = {:.6}, gradient {:.2e}",
        rep.energy / (eps * eps),
        rep.grad_max
    );
    println!("exterior max {ext:.3e} vs ell {:.3e}: ok={ok}", cfg.ell);
    Ok(())
}
