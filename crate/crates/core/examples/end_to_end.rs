//! Generates a small synthetic dataset, runs the full cross-validated
//! experiment and prints the report tables.
//!
//!     cargo run --release --example end_to_end [-- out_dir]

use std::path::PathBuf;

use camid::pipeline::{fixture_config, generate_fixture, run_experiment, SynthSpec};

fn main() -> camid::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("camid_end_to_end"));
    let spec = SynthSpec {
        classes: 4,
        videos_per_class: 15,
        ..SynthSpec::default()
    };
    let manifest = generate_fixture(&root.join("data"), &spec)?;
    let out = root.join("run");
    run_experiment(&manifest, &fixture_config(&spec), &out)?;
    let tables = out.join("reports").join("tables.md");
    print!("{}", std::fs::read_to_string(&tables).map_err(|e| camid::Error::io(&tables, e))?);
    println!("artifacts under {}", out.display());
    Ok(())
}
