//! Monte Carlo BLER sweep over SNR for all schemes, printed as CSV.

use dmimo::harness::{run_experiment, write_csv, ExperimentSpec};
use dmimo::receiver::IterationPlan;
use dmimo::system_model::SystemConfig;

fn main() -> dmimo::Result<()> {
    let blocks = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50);
    let spec = ExperimentSpec::new(
        SystemConfig::desk(),
        vec![
            IterationPlan::lmmse(),
            IterationPlan::id(3),
            IterationPlan::idd(2),
            IterationPlan::idd(3),
        ],
        vec![8.0, 10.0, 12.0],
        blocks,
    );
    let rows = run_experiment(&spec)?;
    write_csv(&rows, std::io::stdout().lock()).map_err(|source| dmimo::Error::Io {
        path: "<stdout>".into(),
        source,
    })
}
