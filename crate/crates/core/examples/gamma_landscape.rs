//! Critical points of Gamma = V^a det(J)^(1/2) for a double-well potential.

use concentra::fields::{
    find_gamma_critical_points, ConstantDiffusion, GaussianWell, GaussianWells,
};
use concentra::region::BoxRegion;

fn main() -> concentra::Result<()> {
    let well = |c: f64| GaussianWell {
        center: vec![c, 0.0],
        depth: 1.0,
        width: 0.5,
    };
    let v = GaussianWells {
        base: 2.0,
        wells: vec![well(1.0), well(-1.0)],
    };
    let j = ConstantDiffusion::identity(2);
    let region = BoxRegion::new(vec![-2.0, -1.0], vec![2.0, 1.0])?;
    for c in find_gamma_critical_points(&region, 41, 1e-12, &v, &j, 3.0)? {
        println!(
            "{:?} at ({:+.6}, {:+.6}): Gamma={:.6}, Hessian eigenvalues {:?}",
            c.classification, c.point[0], c.point[1], c.value, c.hessian_eigenvalues
        );
    }
    Ok(())
}
