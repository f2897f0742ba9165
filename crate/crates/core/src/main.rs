use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cascadet::classifier::BackboneSpec;
use cascadet::eval::{all_baselines, compute_metrics, match_detections, render_csv, render_text, DEFAULT_IOU_THRESHOLD};
use cascadet::pipeline::{run, RunConfig};
use cascadet::record::{read_jsonl, read_truth};
use cascadet::train::{train_demo, write_curve_csv};
use cascadet::{fixture, selfcheck, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

/// Cascaded face detection and mask classification.
#[derive(Parser, Debug)]
#[command(name = "cascadet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the detection pipeline over a frame manifest.
    Detect {
        /// key = value config file; CASCADET_<KEY> variables override it.
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a detection log against ground truth.
    Eval {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Minimum IoU for a detection to match a truth box.
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f32,
        /// Also write the comparison table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train a classifier head on synthetic separable features.
    TrainDemo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Loss curve CSV (epoch, loss, accuracy).
        #[arg(long, default_value = "loss_curve.csv")]
        out: PathBuf,
    },
    /// Run the oracle suites.
    Selfcheck {
        /// Scratch directory for the end-to-end run; a temporary one if omitted.
        #[arg(long)]
        workdir: Option<PathBuf>,
    },
    /// Write synthetic frames, truth, fixture weights and a detect config.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            e if e.is_data_error() => Failure::Data(e.to_string()),
            e => Failure::Internal(e.to_string()),
        }
    }
}

fn detect(config: PathBuf) -> Result<(), Failure> {
    let config = RunConfig::load(&config)?;
    let summary = run(&config)?;
    println!("{summary}");
    if summary.failed() {
        return Err(Failure::Data(format!(
            "{} of {} frames failed",
            summary.failed_frames, summary.frames
        )));
    }
    Ok(())
}

fn eval(log: PathBuf, truth: PathBuf, iou: f32, csv: Option<PathBuf>) -> Result<(), Failure> {
    if !(iou > 0.0 && iou <= 1.0) {
        return Err(Failure::Usage(format!("--iou must lie in (0, 1], got {iou}")));
    }
    let detections = read_jsonl(&log)?;
    let truths = read_truth(&truth)?;
    let report = compute_metrics(&match_detections(&detections, &truths, iou));
    let baselines = all_baselines();
    print!("{}", render_text(&report, &baselines));
    if let Some(path) = csv {
        std::fs::write(&path, render_csv(&report, &baselines))
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn demo(seed: u64, out: PathBuf) -> Result<(), Failure> {
    let outcome = train_demo(seed)?;
    for s in &outcome.curve {
        println!("epoch {:>3}  loss {:.6}  accuracy {:.2}%", s.epoch, s.loss, 100.0 * s.accuracy);
    }
    write_curve_csv(&outcome.curve, &out)?;
    println!("curve written to {}", out.display());
    Ok(())
}

fn check(workdir: Option<PathBuf>) -> Result<(), Failure> {
    let scratch;
    let dir = match workdir {
        Some(d) => d,
        None => {
            scratch = tempfile::tempdir().map_err(|e| Failure::Internal(format!("scratch directory: {e}")))?;
            scratch.path().to_path_buf()
        }
    };
    let mut failed = 0;
    for (i, check) in selfcheck::CHECKS.iter().enumerate() {
        let result = check(&dir);
        println!("{result}");
        failed += usize::from(!result.passed);
        debug_assert_eq!(usize::from(result.id), i + 1);
    }
    if failed > 0 {
        return Err(Failure::Internal(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn write_fixture(out: PathBuf, frames: usize, seed: u64) -> Result<(), Failure> {
    let cascade = fixture::cascade_archive(seed)?;
    let classifier = fixture::classifier_archive(&BackboneSpec::default(), seed)?;
    let set = fixture::write_fixture_set(&out, frames, seed, &cascade, &classifier)?;
    println!("config:   {}", set.config.display());
    println!("truth:    {}", set.truth.display());
    println!("manifest: {}", set.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Detect { config } => detect(config),
        Command::Eval { log, truth, iou, csv } => eval(log, truth, iou, csv),
        Command::TrainDemo { seed, out } => demo(seed, out),
        Command::Selfcheck { workdir } => check(workdir),
        Command::Fixture { out, frames, seed } => write_fixture(out, frames, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
