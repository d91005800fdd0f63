//! Radial ground state of -U'' - (N-1)/r U' + U = U^p by shooting, and the
//! ground-energy constants C0 and C1.

use concentra::profile::solve_radial_ground_state;

fn main() -> concentra::Result<()> {
    for dim in 1..=3 {
        let prof = solve_radial_ground_state(dim, 3.0, 1e-13)?;
        println!(
            "N={dim} p=3: U(0)={:.10} C0={:.10} C1={:.10} ODE residual={:.2e}",
            prof.u0,
            prof.c0,
            prof.c1(),
            prof.ode_residual()
        );
    }
    let one = solve_radial_ground_state(1, 3.0, 1e-13)?;
    println!(
        "1D check: sqrt(2)={:.10}, 16/3={:.10}",
        2f64.sqrt(),
        16.0 / 3.0
    );
    println!(
        "U(1)={:.10} vs sqrt(2) sech(1)={:.10}",
        one.value(1.0),
        2f64.sqrt() / 1f64.cosh()
    );
    Ok(())
}
