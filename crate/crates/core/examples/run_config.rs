//! Runs the bundled JSON experiment config through the library and prints
//! the selected grid point. `cargo run --bin mssa-run -- --config ...` does
//! the same from the command line.

use std::path::Path;

use mssa::experiment::{load_config, run_to_dir};

fn main() -> mssa::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/impute.json");
    let cfg = load_config(&path)?;
    let out = std::env::temp_dir().join("mssa-example-impute");
    let report = run_to_dir(&cfg, &out)?;
    println!("{} report rows in {}", report.rows.len(), out.display());
    for row in report.rows.iter().filter(|r| r.split == "selected") {
        println!(
            "selected: {} L={} {} {} -> test {} {:.4}",
            row.method, row.window, row.policy, row.init, row.metric, row.value
        );
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
