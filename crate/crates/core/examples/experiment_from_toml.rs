//! Loads an experiment from TOML, overrides a few fields and runs it.

use dmimo::harness::{run_experiment, ExperimentSpec};

fn main() -> dmimo::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml").into());
    let mut spec = ExperimentSpec::load(std::path::Path::new(&path))?;
    spec.n_blocks = spec.n_blocks.min(20);
    spec.output_path = None;
    print!("{}", spec.to_toml()?);
    for row in run_experiment(&spec)? {
        println!(
            "{:>6} x{} @ {:>5.1} dB: BLER {:.3}",
            row.scheme, row.iterations, row.snr_db, row.bler
        );
    }
    Ok(())
}
