//! Pucci-Serrin identity residual on the exact 1D solution sqrt(2) sech(x)
//! under grid refinement, and on a function that is not a solution.

use std::sync::Arc;

use concentra::diagnostics::{pucci_serrin_residual, VectorField};
use concentra::fields::{ConstantDiffusion, ConstantPotential};
use concentra::grid::build_grid;
use concentra::problem::ProblemSpec;

fn main() -> concentra::Result<()> {
    let spec = ProblemSpec::new(
        1,
        3.0,
        Arc::new(ConstantPotential { value: 1.0 }),
        Arc::new(ConstantDiffusion::identity(1)),
    )?;
    let field = VectorField::Dilation {
        center: vec![0.0],
        r_in: 15.0,
        r_out: 18.0,
    };
    for n in [201, 401, 801, 1601] {
        let g = build_grid(1, 20.0, n)?;
        let exact = g.sample(|x| 2f64.sqrt() / x[0].cosh());
        let other = g.sample(|x| (-x[0] * x[0]).exp());
        let r1 = pucci_serrin_residual(&exact, 1.0, &spec, &field)?;
        let r2 = pucci_serrin_residual(&other, 1.0, &spec, &field)?;
        println!(
            "h={:.4}: solution {:.3e}, gaussian {:.3e}",
            g.h, r1.residual, r2.residual
        );
    }
    Ok(())
}
