//! Braided giant atoms at φ = (m + 1/2)π: no emission into the waveguide in
//! the Markovian limit, a surviving exchange coupling, and reciprocal
//! transfer even with θ = π/2.

use std::f64::consts::PI;

use num_complex::Complex64;
use retarded_transfer::analysis::{
    braided_indirect_coupling, markovian_effective_matrix, sdomain_coupling_pair,
};
use retarded_transfer::model::{build_giant_dimer, Emitter, SystemParams};
use retarded_transfer::observables::{nonreciprocity_metric, total_population, ProbePair};
use retarded_transfer::solver::integrate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (eta, phi) in [(0.154, 5.5 * PI), (0.014, 0.5 * PI)] {
        let sys = build_giant_dimer(&SystemParams::with_phase(0.0, 0.5, PI / 2.0, eta, phi)?)?;

        let eff = markovian_effective_matrix(&sys)?;
        println!("eta = {eta}, phi = {:.2}pi", sys.phi / PI);
        println!(
            "  M_eff diagonal: {:.2e}, {:.2e}",
            eff.matrix[(0, 0)],
            eff.matrix[(1, 1)]
        );
        println!("  g_eff = {:.4}", braided_indirect_coupling(sys.phi));
        println!("  eigenvalues: {:.4?}", eff.eigenvalues);

        let pair = sdomain_coupling_pair(&sys, Complex64::new(0.5, 0.0))?;
        println!(
            "  s = 0.5: forward {:.4}, backward {:.4}",
            pair.forward, pair.backward
        );

        let a = integrate(&sys, Emitter::A, 50.0, 200)?;
        let b = integrate(&sys, Emitter::B, 50.0, 200)?;
        println!(
            "  metric {:.2e}, P_tot(50) = {:.4}",
            nonreciprocity_metric(&a, &b, ProbePair::TRANSFER_AB)?,
            total_population(&a).last()
        );
    }
    Ok(())
}
