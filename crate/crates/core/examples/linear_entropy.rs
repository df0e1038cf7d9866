//! Emitter-waveguide entanglement through the linear entropy of the
//! emitters' reduced state, for the two trimer initial states.

use std::f64::consts::PI;

use retarded_transfer::model::{build_giant_trimer, Emitter, SystemParams};
use retarded_transfer::observables::{
    entropy_from_total_population, linear_entropy, reduced_density_matrix, total_population,
};
use retarded_transfer::solver::integrate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for theta in [PI / 2.0, 0.0] {
        let sys = build_giant_trimer(&SystemParams::reference(1.0, theta, 0.56)?)?;
        let psi3 = integrate(&sys, Emitter::A, 40.0, 200)?;
        let psi4 = integrate(&sys, Emitter::B, 40.0, 200)?;
        let (s3, s4) = (linear_entropy(&psi3), linear_entropy(&psi4));
        let p3 = total_population(&psi3);

        let identity = s3
            .values
            .iter()
            .zip(&p3.values)
            .map(|(s, p)| (s - entropy_from_total_population(*p)).abs())
            .fold(0.0, f64::max);
        let gap = s3
            .values
            .iter()
            .zip(&s4.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        println!("theta = {:.2}pi", theta / PI);
        println!("  max |S - 2P(1-P)| = {identity:.1e}");
        println!("  max |S(psi3) - S(psi4)| = {gap:.4}");
        println!(
            "  S(40): {:.4} vs {:.4}, P_tot(40): {:.4} vs {:.4}",
            s3.last(),
            s4.last(),
            p3.last(),
            total_population(&psi4).last()
        );

        let rho = reduced_density_matrix(&psi3, 10.0)?;
        println!(
            "  rho(10) eigenvalues {:.4?}, trace {:.3}",
            rho.eigenvalues(),
            rho.trace().re
        );
    }
    Ok(())
}
