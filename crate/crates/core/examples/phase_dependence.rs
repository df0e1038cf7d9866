//! Propagation phase decides whether the synthetic flux produces
//! nonreciprocity: compare simulation with the s-domain predicate.

use std::f64::consts::PI;

use num_complex::Complex64;
use retarded_transfer::analysis::{modulus_asymmetry, reciprocity_predicted};
use retarded_transfer::model::{build_small_dimer, Emitter, SystemParams};
use retarded_transfer::observables::{nonreciprocity_metric, ProbePair};
use retarded_transfer::solver::integrate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta = PI / 2.0;
    for eta in [0.56, 0.574, 0.588] {
        let params = SystemParams::reference(0.5, theta, eta)?;
        let sys = build_small_dimer(&params)?;
        let a = integrate(&sys, Emitter::A, 15.0, 200)?;
        let b = integrate(&sys, Emitter::B, 15.0, 200)?;
        let metric = nonreciprocity_metric(&a, &b, ProbePair::TRANSFER_AB)?;
        println!(
            "eta={eta:.3} phi={:.4}pi metric={metric:.3e} |fwd|^2-|bwd|^2 at s=1: {:+.3e} predicted reciprocal: {}",
            sys.phi / PI,
            modulus_asymmetry(&sys, Complex64::new(1.0, 0.0))?,
            reciprocity_predicted(&sys)?,
        );
    }

    // exact phases instead of the eta-derived ones
    for phi in [20.0 * PI, 20.25 * PI, 20.5 * PI] {
        let sys = build_small_dimer(&SystemParams::with_phase(8.7e-3, 0.5, theta, 0.56, phi)?)?;
        let a = integrate(&sys, Emitter::A, 15.0, 200)?;
        let b = integrate(&sys, Emitter::B, 15.0, 200)?;
        println!(
            "phi={:.2}pi metric={:.3e} predicted reciprocal: {}",
            phi / PI,
            nonreciprocity_metric(&a, &b, ProbePair::TRANSFER_AB)?,
            reciprocity_predicted(&sys)?
        );
    }
    Ok(())
}
