//! Monte Carlo driver: sweeps SNR and receiver schemes, counts block errors
//! and writes one CSV row per point.
//!
//! Trial `t` draws its channel, payload and noise from sub-streams keyed by
//! `(seed, t)`, so every scheme and every SNR point sees the same channels
//! and the same normalized noise. Results are reduced in trial order and
//! never depend on the worker count.

mod conformance;
mod csv;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receiver::{receive_block, IterationPlan};
use crate::rng::{self, purpose};
use crate::suppression::build_suppression;
use crate::system_model::{draw_channel, random_payload, transmit, LinkSetup, SystemConfig};

pub use conformance::{
    run_conformance, run_conformance_with, CheckResult, ConformanceReport, Faults,
};
pub use csv::{emit_csv, format_row, format_sig, parse_csv, write_csv, CsvWriter, CSV_HEADER};

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub base: SystemConfig,
    pub schemes: Vec<IterationPlan>,
    pub snr_grid_db: Vec<f64>,
    pub n_blocks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub worker_count: usize,
    /// Record wall-clock time per block. Off by default so that output
    /// files are reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentSpec {
    pub fn new(
        base: SystemConfig,
        schemes: Vec<IterationPlan>,
        snr_grid_db: Vec<f64>,
        n_blocks: usize,
    ) -> Self {
        Self {
            base,
            schemes,
            snr_grid_db,
            n_blocks,
            output_path: None,
            worker_count: 1,
            timing: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_blocks == 0 {
            return Err(Error::Config("n_blocks must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        for plan in &self.schemes {
            plan.validate()?;
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config(
                "snr_grid_db must be a non-empty list of finite values".into(),
            ));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "snr_grid_db must be strictly increasing".into(),
            ));
        }
        if self.worker_count == 0 {
            return Err(Error::Config("worker_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// One CSV row. Blocks count user blocks: `n_blocks * users`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scheme: String,
    #[serde(rename = "N_I")]
    pub iterations: usize,
    pub snr_db: f64,
    pub blocks: u64,
    pub error_blocks: u64,
    pub bler: f64,
    /// Seconds per user block; zero unless timing is enabled.
    pub mean_runtime_per_block: f64,
    pub mean_inversion_count: f64,
}

/// Per-point detail streamed as JSON lines in verbose mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointDiagnostics {
    pub scheme: String,
    pub iterations: usize,
    pub snr_db: f64,
    pub blocks: u64,
    pub error_blocks: u64,
    /// Error blocks of each user.
    pub user_errors: Vec<u64>,
    /// Mean prior variance entering each detector pass.
    pub mean_nu: Vec<f64>,
    /// Mean demapper `|L|` of each pass.
    pub mean_abs_llr: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
struct Tally {
    user_errors: Vec<u64>,
    inversions: u64,
    seconds: f64,
    nu: Vec<f64>,
    llr: Vec<f64>,
    samples: u64,
}

impl Tally {
    fn new(users: usize, iterations: usize) -> Self {
        Self {
            user_errors: vec![0; users],
            nu: vec![0.0; iterations],
            llr: vec![0.0; iterations],
            ..Self::default()
        }
    }

    fn add(&mut self, other: &Tally) {
        for (a, b) in self.user_errors.iter_mut().zip(&other.user_errors) {
            *a += b;
        }
        self.inversions += other.inversions;
        self.seconds += other.seconds;
        for (a, b) in self.nu.iter_mut().zip(&other.nu) {
            *a += b;
        }
        for (a, b) in self.llr.iter_mut().zip(&other.llr) {
            *a += b;
        }
        self.samples += other.samples;
    }
}

/// Runs one trial of every scheme at one SNR.
fn run_trial(
    spec: &ExperimentSpec,
    cfg: &SystemConfig,
    link: &LinkSetup,
    trial: u64,
) -> Result<Vec<Tally>> {
    let seed = spec.base.seed;
    let chan = draw_channel(cfg, &mut rng::stream(seed, &[trial, purpose::CHANNEL]))?;
    let payload = random_payload(link, &mut rng::stream(seed, &[trial, purpose::PAYLOAD]));
    let nv = cfg.noise_variance();
    let tx = transmit(
        cfg,
        link,
        &chan,
        &payload,
        nv,
        &mut rng::stream(seed, &[trial, purpose::NOISE]),
    )?;
    let supp = build_suppression(&chan, cfg.antennas_per_rau, cfg.row_selection, nv)?;
    spec.schemes
        .iter()
        .map(|plan| {
            let start = spec.timing.then(Instant::now);
            let res = receive_block(cfg, link, &supp, &tx.received, &payload, plan)?;
            let mut t = Tally::new(cfg.users, plan.iterations);
            t.seconds = start.map_or(0.0, |s| s.elapsed().as_secs_f64());
            for (k, u) in res.users.iter().enumerate() {
                t.user_errors[k] = u.block_error as u64;
                for (i, d) in u.diagnostics.iter().enumerate() {
                    t.nu[i] += d.mean_nu;
                    t.llr[i] += d.mean_abs_llr;
                    t.inversions += d.inversions;
                }
                t.samples += 1;
            }
            Ok(t)
        })
        .collect()
}

/// Runs the experiment and returns one row per `(snr, scheme)`, SNR-major.
/// Rows are also written to `output_path` when set, one flushed line at a
/// time, so an interrupted run leaves every finished point on disk.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<MetricsRow>> {
    let mut writer = match &spec.output_path {
        Some(path) => Some(CsvWriter::create(path)?),
        None => None,
    };
    run_experiment_with(spec, |row, _| match writer.as_mut() {
        Some(w) => w.write_row(row),
        None => Ok(()),
    })
}

/// Like [`run_experiment`] but hands every finished point to `on_point`
/// instead of writing `output_path`.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, mut on_point: F) -> Result<Vec<MetricsRow>>
where
    F: FnMut(&MetricsRow, &PointDiagnostics) -> Result<()>,
{
    spec.validate()?;
    let link = LinkSetup::new(&spec.base)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.worker_count)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let users = spec.base.users;
    let mut rows = Vec::with_capacity(spec.snr_grid_db.len() * spec.schemes.len());
    for &snr_db in &spec.snr_grid_db {
        let cfg = SystemConfig {
            snr_db,
            ..spec.base.clone()
        };
        let trials: Vec<Vec<Tally>> = pool.install(|| {
            (0..spec.n_blocks as u64)
                .into_par_iter()
                .map(|t| run_trial(spec, &cfg, &link, t))
                .collect::<Result<Vec<_>>>()
        })?;
        for (s, plan) in spec.schemes.iter().enumerate() {
            let mut total = Tally::new(users, plan.iterations);
            for trial in &trials {
                total.add(&trial[s]);
            }
            let blocks = (spec.n_blocks * users) as u64;
            let error_blocks: u64 = total.user_errors.iter().sum();
            let row = MetricsRow {
                scheme: plan.scheme.to_string(),
                iterations: plan.iterations,
                snr_db,
                blocks,
                error_blocks,
                bler: error_blocks as f64 / blocks as f64,
                mean_runtime_per_block: total.seconds / blocks as f64,
                mean_inversion_count: total.inversions as f64 / blocks as f64,
            };
            let per = total.samples.max(1) as f64;
            let diag = PointDiagnostics {
                scheme: row.scheme.clone(),
                iterations: plan.iterations,
                snr_db,
                blocks,
                error_blocks,
                user_errors: total.user_errors.clone(),
                mean_nu: total.nu.iter().map(|v| v / per).collect(),
                mean_abs_llr: total.llr.iter().map(|v| v / per).collect(),
            };
            on_point(&row, &diag)?;
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Writes diagnostics as one JSON object per line.
pub fn write_diagnostics_line<W: Write>(
    out: &mut W,
    diag: &PointDiagnostics,
) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, diag)?;
    out.write_all(b"\n")?;
    out.flush()
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(workers: usize) -> ExperimentSpec {
        ExperimentSpec {
            worker_count: workers,
            ..ExperimentSpec::new(
                SystemConfig::desk(),
                vec![IterationPlan::lmmse(), IterationPlan::idd(2)],
                vec![6.0, 12.0],
                4,
            )
        }
    }

    #[test]
    fn validation() {
        let mut s = tiny(1);
        s.snr_grid_db = vec![3.0, 3.0];
        assert!(s.validate().is_err());
        let mut s = tiny(1);
        s.n_blocks = 0;
        assert!(s.validate().is_err());
        let mut s = tiny(1);
        s.schemes.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn rows_are_consistent_and_worker_independent() {
        let a = run_experiment(&tiny(1)).unwrap();
        let b = run_experiment(&tiny(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        for r in &a {
            assert_eq!(r.blocks, 8);
            assert_eq!(r.bler, r.error_blocks as f64 / 8.0);
            assert_eq!(r.mean_runtime_per_block, 0.0);
        }
        assert_eq!(a[0].mean_inversion_count, 1.0);
        assert_eq!(a[1].mean_inversion_count, 2.0);
    }

    #[test]
    fn noiseless_blocks_decode() {
        let mut s = tiny(1);
        s.base.noise_variance = Some(1e-12);
        s.n_blocks = 1;
        assert!(run_experiment(&s).unwrap().iter().all(|r| r.bler == 0.0));
    }

    #[test]
    fn toml_round_trip() {
        let mut s = tiny(2);
        s.output_path = Some("out.csv".into());
        let text = s.to_toml().unwrap();
        assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), s);
        let minimal = r#"
            snr_grid_db = [8.0]
            n_blocks = 10
            [[schemes]]
            scheme = "idd"
            iterations = 3
        "#;
        let m = ExperimentSpec::from_toml(minimal).unwrap();
        assert_eq!(m.base, SystemConfig::desk());
        assert_eq!(m.schemes, vec![IterationPlan::idd(3)]);
        assert!(ExperimentSpec::from_toml("n_blocks = 1\nbogus = 2").is_err());
    }
}
