//! Command-line surface of the bit-truncation toolkit: dummy-fill
//! verification, memory simulation, power reports, video policy runs, and
//! tensor truncation sweeps.
//!
//! Exit codes are a stable contract: 0 on full success, 2 for usage or
//! file-format problems, 3 when a verification or invariant check fails.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

mod power;
mod report;
mod sim;
mod tensor;
mod verify;
mod video;

pub use report::{Failure, ReportFormat};

#[derive(Parser)]
#[command(name = "bittrunc", version, about = "Flexible bit-truncation memory toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Machine-readable report format.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Json)]
    report: ReportFormat,

    /// Power savings model used by reports.
    #[arg(long, global = true, value_enum, default_value_t = ModelArg::Anchored)]
    model: ModelArg,

    /// Calibration anchor table (TOML) replacing the built-in defaults.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,

    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Worker-thread cap for frame/element parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Anchored,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Byte,
    Word,
}

impl From<ModeArg> for bittrunc::TruncationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Byte => bittrunc::TruncationMode::Byte,
            ModeArg::Word => bittrunc::TruncationMode::Word,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Exhaustively verify that the dummy fill minimizes expected MSE.
    VerifyProp1 {
        /// Largest sampled index-set cardinality.
        #[arg(long, default_value_t = 6)]
        max_cardinality: usize,
        /// Number of random index sets sampled on top of the contiguous runs.
        #[arg(long, default_value_t = 200)]
        sample_count: usize,
    },
    /// Run a .tmscript program on the simulated memory array.
    Sim {
        /// Script path; one command per clock cycle.
        script: PathBuf,
        /// Write the cycle trace as CSV.
        #[arg(long)]
        trace_csv: Option<PathBuf>,
        /// Write the aligned-text trace.
        #[arg(long)]
        trace_text: Option<PathBuf>,
        /// Words in the simulated array.
        #[arg(long, default_value_t = 1024)]
        words: usize,
        /// Fail (exit 3) if any read returns an undefined bit.
        #[arg(long)]
        strict: bool,
    },
    /// Report savings and read/write power for a truncation setting.
    Power {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        k: u32,
        /// Optional 32-bit hex data word; enables the data-dependent
        /// word-mode estimate.
        #[arg(long)]
        pattern: Option<String>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Apply a viewer-aware truncation policy to a raw I420 clip.
    Video {
        #[arg(long, value_enum)]
        policy: PolicyArg,
        /// Raw I420 input (headerless, frame-sequential).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// Write the truncated clip here.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the quality report here instead of stdout.
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Lighting condition for the luminance policy.
        #[arg(long, value_enum, default_value_t = ConditionArg::Normal)]
        condition: ConditionArg,
        /// ROI sidecar file (`frame x y w h` lines) for the roi policy.
        #[arg(long)]
        roi: Option<PathBuf>,
        /// Plain-macroblock variance threshold for the content policy.
        #[arg(long, default_value_t = 100.0)]
        variance_threshold: f64,
        /// Content breakpoints as `pct:k` pairs, e.g. `0:0,20:1,40:2,60:3,80:4`.
        #[arg(long)]
        content_map: Option<String>,
        /// Which planes the policy truncates.
        #[arg(long, value_enum, default_value_t = PlanesArg::All)]
        planes: PlanesArg,
    },
    /// Truncate float32 tensors or sweep truncation levels.
    Tensor {
        #[command(subcommand)]
        action: TensorCmd,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Luminance,
    Content,
    Roi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    Normal,
    Overcast,
    Sunlight,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanesArg {
    All,
    Luma,
}

#[derive(Subcommand)]
enum TensorCmd {
    /// Truncate every element and write the result in the input's format.
    Truncate {
        #[arg(long)]
        input: PathBuf,
        /// Fraction bits to truncate.
        #[arg(long, value_parser = clap::value_parser!(u32).range(0..=23))]
        n: u32,
        #[arg(long)]
        output: PathBuf,
        /// Treat the input as headerless float32 with this shape, e.g. `64x32`.
        #[arg(long)]
        raw_shape: Option<String>,
    },
    /// Report error statistics and savings across truncation levels.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        /// Levels as an inclusive range `0..23` or a comma list `1,8,17`.
        #[arg(long = "n", default_value = "0..23")]
        n_list: String,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        raw_shape: Option<String>,
    },
}

/// Builds the savings model from the global flags.
fn savings_model(cli: &Cli) -> Result<bittrunc::powermodel::SavingsModel, Failure> {
    use bittrunc::powermodel::{CalibrationTable, PowerModelKind, PowerParams, SavingsModel};
    let table = match &cli.calibration {
        Some(path) => CalibrationTable::load(path)
            .map_err(|e| Failure::format(format!("calibration: {e}")))?,
        None => CalibrationTable::default(),
    };
    let kind = match cli.model {
        ModelArg::Linear => PowerModelKind::Linear,
        ModelArg::Anchored => PowerModelKind::Anchored,
    };
    Ok(SavingsModel { kind, params: PowerParams::default(), table })
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        // Only the first initialization wins; later calls are a no-op.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let model = savings_model(&cli)?;
    match &cli.command {
        Cmd::VerifyProp1 { max_cardinality, sample_count } => verify::run(
            *max_cardinality,
            *sample_count,
            cli.seed,
            cli.report,
        ),
        Cmd::Sim { script, trace_csv, trace_text, words, strict } => {
            sim::run(script, trace_csv.as_deref(), trace_text.as_deref(), *words, *strict)
        }
        Cmd::Power { mode, k, pattern, output } => power::run(
            (*mode).into(),
            *k,
            pattern.as_deref(),
            output.as_deref(),
            &model,
            cli.report,
        ),
        Cmd::Video {
            policy,
            input,
            width,
            height,
            output,
            report_out,
            condition,
            roi,
            variance_threshold,
            content_map,
            planes,
        } => video::run(video::Args {
            policy: *policy,
            input,
            width: *width,
            height: *height,
            output: output.as_deref(),
            report_out: report_out.as_deref(),
            condition: *condition,
            roi: roi.as_deref(),
            variance_threshold: *variance_threshold,
            content_map: content_map.as_deref(),
            planes: *planes,
            model: &model,
            format: cli.report,
        }),
        Cmd::Tensor { action } => match action {
            TensorCmd::Truncate { input, n, output, raw_shape } => {
                tensor::truncate(input, *n, output, raw_shape.as_deref())
            }
            TensorCmd::Sweep { input, n_list, output, raw_shape } => tensor::sweep(
                input,
                n_list,
                output.as_deref(),
                raw_shape.as_deref(),
                &model,
                cli.report,
            ),
        },
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(cli) {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
