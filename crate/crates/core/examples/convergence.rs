//! Empirical order of the delay-aligned RK4 scheme from N, 2N and 4N steps
//! per delay.

use std::f64::consts::PI;

use retarded_transfer::model::{build_small_dimer, Emitter, SystemParams};
use retarded_transfer::solver::{convergence_order_from, integrate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = build_small_dimer(&SystemParams::reference(0.5, PI / 2.0, 0.56)?)?;
    for base in [16, 32, 64] {
        let order = convergence_order_from(&sys, Emitter::A, 15.0, base)?;
        println!("N = {base:3}: order {order:.3}");
    }

    let coarse = integrate(&sys, Emitter::A, 15.0, 100)?;
    let fine = integrate(&sys, Emitter::A, 15.0, 200)?;
    let worst = (0..coarse.len())
        .map(|m| (coarse.amplitudes(m)[1] - fine.amplitudes(2 * m)[1]).norm())
        .fold(0.0, f64::max);
    println!("max nodal change 100 -> 200 steps per delay: {worst:.2e}");
    Ok(())
}
