//! Two small emitters, one delay: P_b from a vs P_a from b over the
//! coupling phase θ, and the time at which the two curves split.

use std::f64::consts::PI;

use retarded_transfer::model::{build_small_dimer, Emitter, SystemParams};
use retarded_transfer::observables::{nonreciprocity_metric, transfer_difference, ProbePair};
use retarded_transfer::solver::{integrate, DEFAULT_STEPS_PER_DELAY};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eta = 0.56;
    println!("theta/pi   max|P_b1 - P_a2|   onset");
    for k in 0..=4 {
        let theta = k as f64 * PI / 4.0;
        let sys = build_small_dimer(&SystemParams::reference(0.5, theta, eta)?)?;
        let from_a = integrate(&sys, Emitter::A, 15.0, DEFAULT_STEPS_PER_DELAY)?;
        let from_b = integrate(&sys, Emitter::B, 15.0, DEFAULT_STEPS_PER_DELAY)?;

        let metric = nonreciprocity_metric(&from_a, &from_b, ProbePair::TRANSFER_AB)?;
        let diff = transfer_difference(&from_a, &from_b, ProbePair::TRANSFER_AB)?;
        let onset = diff
            .iter()
            .position(|d| *d > 1e-8)
            .map(|m| format!("{:.4}", from_a.times()[m]))
            .unwrap_or_else(|| "-".into());
        println!("{:8.2}   {metric:16.3e}   {onset}", theta / PI);
    }
    println!("(delay tau = {eta})");
    Ok(())
}
