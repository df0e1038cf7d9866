//! Writes a θ sweep and one trajectory to CSV with their manifests.
//!
//! Usage: cargo run --example sweep_to_csv [output dir]

use std::f64::consts::PI;
use std::path::PathBuf;

use retarded_transfer::cli::{
    run_scenario, run_sweep, ScenarioConfig, SweepConfig, SweepParameter,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("retarded-transfer-sweep"));

    let base = ScenarioConfig {
        t_max_gamma: 15.0,
        output_path: dir.join("fig2e.csv"),
        theta: PI / 2.0,
        ..ScenarioConfig::default()
    };
    let manifest = run_scenario(&base)?;
    println!("{} rows, sha256 {}", manifest.rows, manifest.sha256);
    println!(
        "phi = {}, h = {}",
        manifest.resolved.phi, manifest.resolved.h
    );

    let sweep = SweepConfig {
        base,
        parameter: SweepParameter::Theta,
        values: (0..=8).map(|k| k as f64 * PI / 8.0).collect(),
        paired: true,
        keep_trajectories: false,
        output_path: dir.join("theta_sweep.csv"),
    };
    let summary = run_sweep(&sweep)?;
    for row in &summary.rows {
        println!(
            "theta={:.3} metric={:.4}",
            row.value,
            row.metric.unwrap_or(f64::NAN)
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}
