use clap::{Args, Parser, Subcommand};
use covtree::data::ColumnSel;
use covtree_cli::commands::{self, CliError, DataSource, DemoName, FitFlags, QuerySource};
use std::path::PathBuf;
use std::process::ExitCode;

/// Gaussian process regression on time series with composable kernels.
#[derive(Parser)]
#[command(name = "covtree", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CsvArgs {
    /// Column holding the inputs (index or header name).
    #[arg(long, default_value = "0")]
    x_col: String,
    /// Column holding the observations (index or header name).
    #[arg(long, default_value = "1")]
    y_col: String,
    /// The CSV file has no header line.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct FitTuning {
    /// Seed for restart draws and synthetic data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of optimizer starts.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Noise handling: `fixed:<ratio>` or `opt`.
    #[arg(long)]
    noise: Option<String>,
    /// Chronological holdout fraction; fitting uses the head of the series.
    #[arg(long)]
    holdout: Option<f64>,
    /// Jitter added to the correlation diagonal.
    #[arg(long, default_value_t = covtree::DEFAULT_JITTER)]
    jitter: f64,
    /// Hyperparameter bound override `PATH=LO:HI` (repeatable).
    #[arg(long = "bounds")]
    bounds: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a kernel to a CSV series or a built-in demo dataset.
    Fit {
        /// Input CSV file with x and y columns.
        #[arg(long, conflicts_with = "demo", required_unless_present = "demo")]
        data: Option<PathBuf>,
        /// Built-in dataset: sinc, co2 or airline.
        #[arg(long)]
        demo: Option<String>,
        /// Kernel expression, e.g. "SE * PERIODIC + RQ".
        #[arg(long)]
        kernel: String,
        /// Output model file (default: <out-dir>/model.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output directory for the manifest (default: $COVTREE_OUT_DIR or ./covtree-out).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvArgs,
        #[command(flatten)]
        tuning: FitTuning,
    },
    /// Predict from a fitted model at query points.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV file of query inputs (first column, or first d columns).
        #[arg(long, conflicts_with = "range", required_unless_present = "range")]
        at: Option<PathBuf>,
        /// Inclusive grid `a:b:m` with m points.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        /// Output CSV (default: <out-dir>/predictions.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Query CSV has no header line.
        #[arg(long)]
        no_header: bool,
    },
    /// Evaluate a fitted model against a test CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Run a case study end to end: data, fit, predictions, plot, manifest.
    Demo {
        /// Which case study: sinc, co2 or airline.
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        holdout: Option<f64>,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn tuning_to_flags(tuning: &FitTuning) -> Result<FitFlags, CliError> {
    let noise = tuning
        .noise
        .as_deref()
        .map(commands::parse_noise)
        .transpose()?;
    let bounds = tuning
        .bounds
        .iter()
        .map(|b| commands::parse_bound(b))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FitFlags {
        seed: tuning.seed,
        restarts: tuning.restarts,
        noise,
        holdout: tuning.holdout,
        jitter: tuning.jitter,
        bounds,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout();
    match cli.command {
        Command::Fit {
            data,
            demo,
            kernel,
            out,
            out_dir,
            csv,
            tuning,
        } => {
            let source = match (data, demo) {
                (Some(path), None) => DataSource::Csv {
                    path,
                    x_col: ColumnSel::parse(&csv.x_col),
                    y_col: ColumnSel::parse(&csv.y_col),
                    header: !csv.no_header,
                },
                (None, Some(name)) => DataSource::Demo(DemoName::parse(&name)?),
                _ => {
                    return Err(CliError::Usage(
                        "exactly one of --data and --demo is required".to_string(),
                    ))
                }
            };
            let flags = tuning_to_flags(&tuning)?;
            commands::cmd_fit(
                &source,
                &kernel,
                out.as_deref(),
                out_dir.as_deref(),
                &flags,
                &mut stdout,
            )
        }
        Command::Predict {
            model,
            at,
            range,
            out,
            out_dir,
            no_header,
        } => {
            let query = match (at, range) {
                (Some(path), None) => QuerySource::Csv {
                    path,
                    header: !no_header,
                },
                (None, Some(range)) => QuerySource::Range(commands::parse_range(&range)?),
                _ => {
                    return Err(CliError::Usage(
                        "exactly one of --at and --range is required".to_string(),
                    ))
                }
            };
            commands::cmd_predict(&model, &query, out.as_deref(), out_dir.as_deref(), &mut stdout)
        }
        Command::Eval {
            model,
            test,
            out_dir,
            csv,
        } => commands::cmd_eval(
            &model,
            &test,
            &ColumnSel::parse(&csv.x_col),
            &ColumnSel::parse(&csv.y_col),
            !csv.no_header,
            out_dir.as_deref(),
            &mut stdout,
        ),
        Command::Demo {
            name,
            seed,
            holdout,
            restarts,
            out_dir,
        } => commands::cmd_demo(
            DemoName::parse(&name)?,
            seed,
            holdout,
            restarts,
            out_dir.as_deref(),
            &mut stdout,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
