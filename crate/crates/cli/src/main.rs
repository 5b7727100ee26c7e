use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use flow2img::codec::DEFAULT_SIDE;
use flow2img::ingest::Split;
use flow2img::schema::LabelMode;
use flow2img::{Parallelism, StrayBytes};
use flow2img_cli::montage::{cmd_montage, MontageOptions};
use flow2img_cli::*;

/// Reversible flow-record to image codec.
///
/// FLOW2IMG_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "flow2img", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Binary,
    Multi,
}

impl From<Mode> for LabelMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Binary => LabelMode::Binary,
            Mode::Multi => LabelMode::MultiClass,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum Expect {
    Table1,
}

#[derive(Args)]
struct StrayArgs {
    /// Reject images with non-zero bytes outside the byte plan (default).
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Ignore bytes outside the byte plan.
    #[arg(long)]
    lenient: bool,
}

impl StrayArgs {
    fn policy(&self) -> StrayBytes {
        if self.lenient {
            StrayBytes::Ignore
        } else {
            StrayBytes::Reject
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit statistics and vocabularies on a training CSV and write a manifest.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// `nslkdd`, `unswnb15` or a schema document path.
        #[arg(long)]
        schema: String,
        /// Output manifest path.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SIDE)]
        side: usize,
        #[arg(long)]
        force: bool,
    },
    /// Encode every record of a CSV to PNG files plus a labels index.
    Encode {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Labels index path [default: <out-dir>/labels.csv].
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "binary")]
        label_mode: Mode,
        #[arg(long)]
        force: bool,
    },
    /// Decode the images of a labels index back to a CSV.
    Decode {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding the images.
        #[arg(long)]
        input: PathBuf,
        /// Labels index [default: <input>/labels.csv].
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        stray: StrayArgs,
    },
    /// Encode and decode every record in memory and check the round trip.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        label_mode: Mode,
        /// Also fail when a value misses the fixed 1e-5 relative / 1e-6
        /// absolute bound (not only the float32 quantization envelope).
        #[arg(long)]
        fixed_tolerance: bool,
    },
    /// Render a grid of sample images, one column per class.
    Montage {
        /// Directory holding the images.
        #[arg(long)]
        input: PathBuf,
        /// Labels index [default: <input>/labels.csv].
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        per_class: usize,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value_t = DEFAULT_SIDE)]
        side: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Comma-separated class names, in column order.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
    },
    /// Print per-class record counts of a split file.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: String,
        #[arg(long, value_enum, default_value = "multi")]
        label_mode: Mode,
        /// Split of the file [default: guessed from the file name].
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        /// Compare against the published counts; mismatches fail.
        #[arg(long, value_enum)]
        expect: Option<Expect>,
    },
    /// Write the min-max scaled flow CSV used by the flow-modality models.
    ExportFlow {
        #[arg(long)]
        manifest: PathBuf,
        /// Training CSV the manifest was fitted on (min/max source).
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        label_mode: Mode,
        #[arg(long)]
        force: bool,
    },
}

fn configure_threads() -> Result<Parallelism> {
    let cap = thread_cap(std::env::var("FLOW2IMG_THREADS").ok().as_deref())?;
    #[cfg(feature = "parallel")]
    if let Some(n) = cap {
        if n == 1 {
            return Ok(Parallelism::Sequential);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cap;
    Ok(Parallelism::default())
}

/// `Ok(false)` means the command ran but its check failed.
fn run(cli: Cli) -> Result<bool> {
    let par = configure_threads()?;
    let stdout = io::stdout();
    let log: &mut dyn Write = &mut stdout.lock();
    match cli.command {
        Command::Fit {
            input,
            schema,
            manifest,
            side,
            force,
        } => {
            cmd_fit(&input, &schema, &manifest, side, force, par, log)?;
        }
        Command::Encode {
            manifest,
            input,
            out_dir,
            labels,
            label_mode,
            force,
        } => {
            let labels = labels.unwrap_or_else(|| out_dir.join("labels.csv"));
            cmd_encode(
                &manifest,
                &input,
                &out_dir,
                &labels,
                label_mode.into(),
                force,
                par,
                log,
            )?;
        }
        Command::Decode {
            manifest,
            input,
            labels,
            out,
            stray,
        } => {
            let labels = labels.unwrap_or_else(|| input.join("labels.csv"));
            cmd_decode(&manifest, &input, &labels, &out, stray.policy(), par, log)?;
        }
        Command::Verify {
            manifest,
            input,
            label_mode,
            fixed_tolerance,
        } => {
            let report = cmd_verify(&manifest, &input, label_mode.into(), par, log)?;
            let ok = if fixed_tolerance {
                report.within_fixed_tolerance()
            } else {
                report.codec_ok()
            };
            writeln!(log, "verify: {}", if ok { "PASS" } else { "FAIL" })?;
            return Ok(ok);
        }
        Command::Montage {
            input,
            labels,
            out,
            per_class,
            scale,
            side,
            seed,
            classes,
        } => {
            let labels = labels.unwrap_or_else(|| input.join("labels.csv"));
            let opts = MontageOptions {
                per_class,
                scale,
                side,
                seed,
                classes,
            };
            cmd_montage(&input, &labels, &out, &opts, log)?;
        }
        Command::Stats {
            input,
            schema,
            label_mode,
            split,
            expect,
        } => {
            let split = split.map(|s| match s {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            });
            let outcome = cmd_stats(
                &input,
                &schema,
                label_mode.into(),
                split,
                expect.is_some(),
                par,
                log,
            )?;
            return Ok(outcome.matches());
        }
        Command::ExportFlow {
            manifest,
            train,
            input,
            out,
            label_mode,
            force,
        } => {
            cmd_export_flow(
                &manifest,
                &train,
                &input,
                &out,
                label_mode.into(),
                force,
                par,
                log,
            )?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
