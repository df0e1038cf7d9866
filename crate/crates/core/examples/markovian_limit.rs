//! The τ → 0 collapse: bound state at φ = mπ, and agreement between the
//! retarded solver with a tiny delay and exp(M_eff t).

use std::f64::consts::PI;

use retarded_transfer::analysis::markovian_effective_matrix;
use retarded_transfer::model::{build_small_dimer, Emitter, InitialState, SystemParams};
use retarded_transfer::solver::integrate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for phi in [20.0 * PI, 20.5 * PI] {
        let sys = build_small_dimer(&SystemParams::with_phase(0.0, 0.0, 0.0, 0.56, phi)?)?;
        let eff = markovian_effective_matrix(&sys)?;
        println!(
            "phi={:.1}pi decay rates {:.3?} lossless mode: {}",
            phi / PI,
            eff.decay_rates(),
            eff.has_lossless_mode()
        );
    }

    let sys = build_small_dimer(&SystemParams::reference(0.5, PI / 2.0, 1e-4)?)?;
    let eff = markovian_effective_matrix(&sys)?;
    let c0 = InitialState::from(Emitter::A).amplitudes(2);
    let closed = eff.propagate(&c0, 5.0);
    let traj = integrate(&sys, Emitter::A, 5.0, 16)?;
    let solved = traj.sample(5.0)?;
    let err = closed
        .iter()
        .zip(&solved)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    println!("eta = 1e-4, t = 5: |c_solver - exp(M t) c0| = {err:.2e}");
    Ok(())
}
