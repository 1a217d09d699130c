use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dmimo::coding::{builtin_codes, LdpcCode};
use dmimo::harness::{
    format_row, run_conformance, run_experiment_with, write_diagnostics_line, CsvWriter,
    ExperimentSpec, CSV_HEADER,
};
use dmimo::receiver::{IterationPlan, Scheme, DEFAULT_BP_ITERS};
use dmimo::softmaps::Constellation;
use dmimo::system_model::SystemConfig;

#[derive(Parser)]
#[command(
    name = "dmimo",
    version,
    about = "Distributed-MIMO uplink link-level simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write CSV metrics.
    Run(RunArgs),
    /// Run the oracle suite; exits nonzero on any failure.
    Conformance,
    /// Built-in LDPC codes.
    Codes {
        #[command(subcommand)]
        action: CodesAction,
    },
    /// Print the bit-label table of a square QAM constellation.
    Labels {
        #[arg(long, default_value_t = 4)]
        bits: usize,
    },
}

#[derive(Subcommand)]
enum CodesAction {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    #[value(name = "cqi6_32x32")]
    Cqi6,
    #[value(name = "cqi7_32x32")]
    Cqi7,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Lmmse,
    Id,
    Idd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// System preset; replaces the config's system block except its seed.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Run a single scheme instead of the configured list.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Detector iterations for --scheme.
    #[arg(long)]
    iters: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// Channel uses per SNR point; each yields one block per user.
    #[arg(long)]
    blocks: Option<usize>,
    /// Base seed of all random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall-clock time per block (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Stream per-point diagnostics as JSON lines on standard error.
    #[arg(long)]
    verbose: bool,
}

fn default_spec(base: SystemConfig) -> ExperimentSpec {
    ExperimentSpec::new(
        base,
        vec![
            IterationPlan::lmmse(),
            IterationPlan::idd(2),
            IterationPlan::idd(3),
            IterationPlan::id(2),
            IterationPlan::id(3),
        ],
        vec![8.0, 10.0, 12.0],
        200,
    )
}

fn build_spec(args: &RunArgs) -> dmimo::Result<ExperimentSpec> {
    let preset = args.preset.map(|p| match p {
        Preset::Desk => SystemConfig::desk(),
        Preset::Cqi6 => SystemConfig::cqi6_32x32(),
        Preset::Cqi7 => SystemConfig::cqi7_32x32(),
    });
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::load(path)?,
        None => default_spec(SystemConfig::desk()),
    };
    if let Some(base) = preset {
        spec.base = SystemConfig {
            seed: spec.base.seed,
            ..base
        };
    }
    match (args.scheme, args.iters) {
        (Some(s), iters) => {
            let scheme = match s {
                SchemeArg::Lmmse => Scheme::Lmmse,
                SchemeArg::Id => Scheme::Id,
                SchemeArg::Idd => Scheme::Idd,
            };
            let iterations = if scheme == Scheme::Lmmse {
                1
            } else {
                iters.unwrap_or(3)
            };
            spec.schemes = vec![IterationPlan {
                scheme,
                iterations,
                bp_iters: DEFAULT_BP_ITERS,
            }];
        }
        (None, Some(iters)) => {
            for plan in &mut spec.schemes {
                if plan.scheme != Scheme::Lmmse {
                    plan.iterations = iters;
                }
            }
        }
        (None, None) => {}
    }
    if let Some(grid) = &args.snr_db {
        spec.snr_grid_db = grid.clone();
    }
    if let Some(n) = args.blocks {
        spec.n_blocks = n;
    }
    if let Some(seed) = args.seed {
        spec.base.seed = seed;
    }
    if let Some(out) = &args.out {
        spec.output_path = Some(out.clone());
    }
    if let Some(w) = args.workers {
        spec.worker_count = w;
    }
    spec.timing |= args.timing;
    Ok(spec)
}

fn run(args: RunArgs) -> dmimo::Result<()> {
    let spec = build_spec(&args)?;
    spec.validate()?;
    let mut file = match &spec.output_path {
        Some(path) => Some(CsvWriter::create(path)?),
        None => None,
    };
    let stdout = io::stdout();
    if file.is_none() {
        println!("{CSV_HEADER}");
    }
    let verbose = args.verbose;
    run_experiment_with(&spec, |row, diag| {
        if verbose {
            let _ = write_diagnostics_line(&mut io::stderr().lock(), diag);
        }
        match file.as_mut() {
            Some(w) => w.write_row(row),
            None => {
                let mut out = stdout.lock();
                let _ = writeln!(out, "{}", format_row(row));
                let _ = out.flush();
                Ok(())
            }
        }
    })?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Conformance => {
            let report = run_conformance();
            println!("{report}");
            return if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
        Command::Codes {
            action: CodesAction::List,
        } => {
            println!("name\tn\tk\trate");
            for name in builtin_codes() {
                let code = LdpcCode::builtin(name).expect("built-in codes parse");
                println!("{name}\t{}\t{}\t{:.4}", code.n(), code.k(), code.rate());
            }
            Ok(())
        }
        Command::Labels { bits } => Constellation::new(bits)
            .map_err(dmimo::Error::from)
            .and_then(|c| {
                c.write_label_table(io::stdout().lock())
                    .map_err(|source| dmimo::Error::Io {
                        path: "<stdout>".into(),
                        source,
                    })
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
