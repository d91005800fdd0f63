//! Penalty threshold ell and the spatially switched nonlinearity g.

use concentra::penalty::{penalized_nonlinearity, PenaltyConfig};
use concentra::region::BoxRegion;

fn main() -> concentra::Result<()> {
    let region = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    let cfg = PenaltyConfig::with_defaults(region, 3.0, 1.0)?;
    println!("theta={} k={} ell={:.9}", cfg.theta, cfg.k, cfg.ell);
    for u in [0.5 * cfg.ell, cfg.ell, 2.0 * cfg.ell] {
        let (gi, _, _) = penalized_nonlinearity(&[0.0, 0.0], u, &cfg);
        let (go, big_g, _) = penalized_nonlinearity(&[3.0, 0.0], u, &cfg);
        println!("u={u:.4}: g inside={gi:.6}, g outside={go:.6}, G outside={big_g:.6}");
    }
    Ok(())
}
