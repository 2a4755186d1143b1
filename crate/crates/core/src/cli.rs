//! Command-line front end. `run` returns the process exit code:
//! 0 ok, 1 check failed, 2 usage or parse error, 3 capacity, 4 numerical.
//!
//! Primary output (reports, CSV, JSON) is buffered and only written once a
//! command has succeeded; diagnostics go to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::experiments::run_beam_splitter;
use crate::forward::{join_outcomes, sample_batch, write_trajectory_csv};
use crate::model::TwoTimeModel;
use crate::oracle::enumerate_records;
use crate::two_time::{write_probability_csv, Direction, TwoTimeEngine};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Records at or below this count are checked exhaustively by `symmetry`.
const SYMMETRY_EXHAUSTIVE_LIMIT: u128 = 10_000;
const SYMMETRY_DEFAULT_TRIALS: usize = 1_000;

#[derive(Debug, Parser)]
#[command(
    name = "twotime",
    version,
    about = "Collapse-model simulator with initial and final boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate completeness, symmetry conditions and boundary operators.
    Check(Common),
    /// Compare forward and backward record weights.
    Symmetry {
        #[command(flatten)]
        common: Common,
        /// Check this many random records instead of all of them.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample forward trajectories (the final condition is not applied).
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact probability table of every record.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Use the brute-force reference path instead of the engine.
        #[arg(long)]
        reference: bool,
    },
    /// Conditional distribution of one event against the Born rule.
    Born {
        #[command(flatten)]
        common: Common,
        /// Event index, 1-based in the analysis direction.
        #[arg(long)]
        event: usize,
        #[arg(long, default_value = "fwd", value_parser = parse_direction)]
        direction: Direction,
        /// Conditioning outcomes, comma-separated in the analysis direction.
        /// Defaults to the most probable prefix.
        #[arg(long, value_delimiter = ',')]
        prefix: Option<Vec<usize>>,
    },
    /// Beam-splitter experiment.
    ///
    /// A two-path universe: basis vector 0 joins the source S to the
    /// detector D across a Hadamard splitter, vector 1 joins the floor F to
    /// the ceiling C. A source-side collapse precedes the splitter and a
    /// detection collapse follows it. Forward, half of the particles reach
    /// D; backward from a detection at D the particle came from S with
    /// certainty, while the backward Born rule would say one half.
    BeamSplitter {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation { .. } | Error::Shape(_) | Error::InvalidInput(_) => EXIT_CHECK_FAILED,
        Error::Parse { .. } | Error::Io(_) => EXIT_USAGE,
        Error::Capacity { .. } => EXIT_CAPACITY,
        Error::ZeroWeight { .. }
        | Error::IncompatibleBoundary { .. }
        | Error::ModelValidity(_)
        | Error::Numerical(_) => EXIT_NUMERICAL,
    }
}

struct Outcome {
    code: i32,
    output: Vec<u8>,
    out: String,
}

impl Outcome {
    fn ok(out: &str, output: Vec<u8>) -> Self {
        Self {
            code: EXIT_OK,
            output,
            out: out.to_string(),
        }
    }
}

pub fn run<I, T>(args: I, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                print!("{e}");
            } else {
                let _ = write!(stderr, "{e}");
            }
            return code;
        }
    };
    match execute(cli.command, stderr) {
        Ok(o) => {
            if let Err(e) = emit(&o.out, &o.output) {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_USAGE;
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(out: &str, bytes: &[u8]) -> Result<()> {
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(bytes)?;
        stdout.flush()?;
    } else {
        std::fs::write(out, bytes).map_err(|e| Error::Io(format!("{out}: {e}")))?;
    }
    Ok(())
}

fn load(common: &Common) -> Result<ModelConfig> {
    ModelConfig::from_path(&common.config)
}

fn load_model(common: &Common) -> Result<TwoTimeModel> {
    load(common)?.build()
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

fn execute(command: Command, stderr: &mut dyn Write) -> Result<Outcome> {
    match command {
        Command::Check(common) => {
            let report = load(&common)?.check();
            for f in report.failures() {
                let _ = writeln!(stderr, "check failed: {} {}", f.name, f.note);
            }
            Ok(Outcome {
                code: if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED },
                output: report.to_string().into_bytes(),
                out: common.out,
            })
        }
        Command::Symmetry { common, trials, seed } => symmetry(&common, trials, seed, stderr),
        Command::Sample { common, samples, seed } => {
            let model = load_model(&common)?;
            let batch = sample_batch(&model, seed, samples)?;
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &batch)?;
            Ok(Outcome::ok(&common.out, buf))
        }
        Command::Enumerate { common, reference } => {
            let model = load_model(&common)?;
            let rows = if reference {
                enumerate_records(&model)?.rows()
            } else {
                TwoTimeEngine::new(&model).probability_table()?
            };
            let mut buf = Vec::new();
            write_probability_csv(&mut buf, &rows)?;
            Ok(Outcome::ok(&common.out, buf))
        }
        Command::Born {
            common,
            event,
            direction,
            prefix,
        } => {
            let model = load_model(&common)?;
            let engine = TwoTimeEngine::new(&model);
            let analysis = engine.born_analysis(event, direction, prefix.as_deref())?;
            Ok(Outcome::ok(&common.out, json_bytes(&analysis)))
        }
        Command::BeamSplitter { samples, seed, out } => {
            if samples == 0 {
                return Err(Error::InvalidInput("--samples must be at least 1".into()));
            }
            let report = run_beam_splitter(samples, seed)?;
            Ok(Outcome::ok(&out, json_bytes(&report)))
        }
    }
}

fn symmetry(common: &Common, trials: Option<usize>, seed: u64, stderr: &mut dyn Write) -> Result<Outcome> {
    let model = load_model(common)?;
    let sym = model.symmetry();
    if !sym.pass {
        let _ = writeln!(
            stderr,
            "warning: symmetry conditions fail (h_asym {:.3e}, l_asym {:.3e})",
            sym.h_asym, sym.l_asym
        );
    }
    let engine = TwoTimeEngine::new(&model);
    let m = model.outcome_count();
    let events = model.interior_count();
    let exhaustive = trials.is_none() && model.record_count() <= SYMMETRY_EXHAUSTIVE_LIMIT;
    let records: Vec<Vec<usize>> = if exhaustive {
        let mut all = Vec::new();
        let mut cur = vec![0usize; events];
        loop {
            all.push(cur.clone());
            if !crate::two_time::increment(&mut cur, m) {
                break;
            }
        }
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials.unwrap_or(SYMMETRY_DEFAULT_TRIALS))
            .map(|_| (0..events).map(|_| rng.random_range(0..m)).collect())
            .collect()
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["outcomes", "forward_weight", "backward_weight", "residual", "bound"])?;
    let mut worst: f64 = 0.0;
    let mut violations = 0usize;
    for rec in &records {
        let r = model.record(rec.clone())?;
        let c = engine.time_symmetry(&r)?;
        let bound = 1e-10 * c.forward_weight.abs().max(1.0);
        worst = worst.max(c.residual);
        if c.residual > bound {
            violations += 1;
        }
        w.write_record([
            join_outcomes(rec),
            c.forward_weight.to_string(),
            c.backward_weight.to_string(),
            c.residual.to_string(),
            bound.to_string(),
        ])?;
    }
    let buf = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    let _ = writeln!(
        stderr,
        "mode={} records={} max_residual={:.3e} violations={}",
        if exhaustive { "exhaustive" } else { "sampled" },
        records.len(),
        worst,
        violations
    );
    Ok(Outcome {
        code: if violations == 0 { EXIT_OK } else { EXIT_CHECK_FAILED },
        output: buf,
        out: common.out.clone(),
    })
}
