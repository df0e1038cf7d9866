//! Runs named parameter presets and prints their panel summaries.
//!
//! Usage: cargo run --example figure_presets [preset ...]

use std::path::PathBuf;

use retarded_transfer::cli::{figure_preset, run_figure_preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        names = vec!["fig2b".into(), "fig4c".into(), "figB2a".into()];
    }
    let dir = std::env::temp_dir().join("retarded-transfer-figures");
    for name in names {
        let preset = figure_preset(&name)?;
        let manifest = run_figure_preset(&preset, &PathBuf::from(&dir))?;
        for panel in manifest.panels {
            println!(
                "{name}{} metric={:?} circulation={:?} entropy_gap={:?}",
                if panel.tag.is_empty() {
                    String::new()
                } else {
                    format!("/{}", panel.tag)
                },
                panel.nonreciprocity_metric,
                panel.circulation,
                panel.entropy_gap
            );
        }
    }
    println!("CSV files in {}", dir.display());
    Ok(())
}
