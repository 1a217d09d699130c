use dmimo::harness::{
    parse_csv, run_experiment, run_experiment_with, CsvWriter, ExperimentSpec, CSV_HEADER,
};
use dmimo::receiver::IterationPlan;
use dmimo::system_model::SystemConfig;
use dmimo::Error;

fn small_spec() -> ExperimentSpec {
    let base = SystemConfig {
        seed: 99,
        ..SystemConfig::desk()
    };
    ExperimentSpec::new(
        base,
        vec![
            IterationPlan::lmmse(),
            IterationPlan::idd(2),
            IterationPlan::id(2),
        ],
        vec![6.0, 10.0],
        12,
    )
}

#[test]
fn output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for workers in [1, 2, 3] {
        let mut spec = small_spec();
        spec.worker_count = workers;
        spec.output_path = Some(dir.path().join(format!("w{workers}.csv")));
        run_experiment(&spec).unwrap();
        texts.push(std::fs::read(spec.output_path.unwrap()).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[0], texts[2]);
}

#[test]
fn csv_round_trips_and_is_snr_major() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec();
    spec.output_path = Some(dir.path().join("out.csv"));
    let rows = run_experiment(&spec).unwrap();
    let text = std::fs::read_to_string(spec.output_path.unwrap()).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    let parsed = parse_csv(&text).unwrap();
    assert_eq!(parsed.len(), 6);
    let keys: Vec<(f64, String, usize)> = parsed
        .iter()
        .map(|r| (r.snr_db, r.scheme.clone(), r.iterations))
        .collect();
    assert_eq!(keys[0], (6.0, "lmmse".into(), 1));
    assert_eq!(keys[1], (6.0, "idd".into(), 2));
    assert_eq!(keys[3].0, 10.0);
    for (a, b) in rows.iter().zip(&parsed) {
        assert_eq!(a.blocks, 24);
        assert_eq!(a.error_blocks, b.error_blocks);
        assert!((a.bler - b.bler).abs() < 1e-6);
        assert_eq!(a.mean_runtime_per_block, 0.0);
    }
}

#[test]
fn rows_already_written_survive_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("partial.csv");
    let spec = small_spec();
    let mut writer = CsvWriter::create(&path).unwrap();
    let mut seen = 0;
    let result = run_experiment_with(&spec, |row, _| {
        seen += 1;
        if seen == 3 {
            return Err(Error::Config("interrupted".into()));
        }
        writer.write_row(row)
    });
    assert!(result.is_err());
    // Read while the writer is still alive: rows must already be flushed.
    let parsed = parse_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(parsed[1].scheme, "idd");
}

#[test]
fn bler_falls_with_snr() {
    let base = SystemConfig {
        seed: 7,
        ..SystemConfig::desk()
    };
    let spec = ExperimentSpec::new(base, vec![IterationPlan::idd(2)], vec![4.0, 8.0, 12.0], 60);
    let rows = run_experiment(&spec).unwrap();
    let bler: Vec<f64> = rows.iter().map(|r| r.bler).collect();
    assert!(bler[0] > bler[1] && bler[1] > bler[2], "{bler:?}");
}

#[test]
fn toml_round_trip_and_validation() {
    let mut spec = small_spec();
    spec.worker_count = 2;
    let text = spec.to_toml().unwrap();
    let back = ExperimentSpec::from_toml(&text).unwrap();
    assert_eq!(back.to_toml().unwrap(), text);
    assert!(ExperimentSpec::from_toml("n_blocks = 5\nbogus = 1\n").is_err());
    let mut bad = small_spec();
    bad.snr_grid_db = vec![10.0, 6.0];
    assert!(bad.validate().is_err());
}
