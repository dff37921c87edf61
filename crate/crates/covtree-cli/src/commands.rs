//! Implementations of the CLI subcommands.

use crate::manifest::{ManifestOptions, RunManifest};
use crate::plot::{BandLayer, Plot, ScatterLayer};
use covtree::data::{self, ColumnSel};
use covtree::gp::DEFAULT_JITTER;
use covtree::{
    expr, fit, metrics, DataError, Dataset, FitOptions, FittedGP, GpError, ModelError, NoiseMode,
    ParseError, Prediction,
};
use nalgebra::DMatrix;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COVTREE_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{source}\n  {text}\n  {caret}", caret = source.caret_line())]
    KernelParse { source: ParseError, text: String },
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot write `{path}`: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// Exit code classes: 2 usage/data, 3 kernel parse, 4 fit/numerics,
    /// 5 model I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Data(_) | CliError::Write { .. } => 2,
            CliError::KernelParse { .. } => 3,
            CliError::Gp(e) => match e {
                GpError::Kernel(_) | GpError::InvalidOptions(_) => 2,
                GpError::Data(_) => 2,
                _ => 4,
            },
            CliError::Model(_) => 5,
        }
    }
}

fn parse_kernel(text: &str, dim: usize) -> Result<covtree::KernelExpr, CliError> {
    expr::parse(text, dim).map_err(|source| CliError::KernelParse {
        source,
        text: text.to_string(),
    })
}

/// Noise flag syntax: `fixed:<ratio>` or `opt`.
pub fn parse_noise(text: &str) -> Result<NoiseMode, CliError> {
    if text == "opt" {
        return Ok(NoiseMode::optimize_default());
    }
    if let Some(value) = text.strip_prefix("fixed:") {
        let ratio: f64 = value
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid noise value `{value}`")))?;
        if !(ratio >= 0.0) {
            return Err(CliError::Usage(format!(
                "noise ratio must be nonnegative, got {ratio}"
            )));
        }
        return Ok(NoiseMode::FixedRatio(ratio));
    }
    Err(CliError::Usage(format!(
        "invalid --noise `{text}`; expected `fixed:<ratio>` or `opt`"
    )))
}

fn describe_noise(mode: &NoiseMode) -> String {
    match mode {
        NoiseMode::FixedRatio(r) => format!("fixed:{r}"),
        NoiseMode::Optimize { lower, upper } => format!("opt[{lower},{upper}]"),
    }
}

/// Bound override syntax: `PATH=LO:HI`.
pub fn parse_bound(text: &str) -> Result<(String, f64, f64), CliError> {
    let bad = || CliError::Usage(format!("invalid --bounds `{text}`; expected `PATH=LO:HI`"));
    let (path, range) = text.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    Ok((path.to_string(), lo, hi))
}

/// Prediction grid syntax: `a:b:m`, inclusive of both endpoints.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid --range `{text}`; expected `a:b:m`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let m: usize = parts[2].parse().map_err(|_| bad())?;
    if m < 1 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if m == 1 {
        return Ok(vec![a]);
    }
    Ok((0..m)
        .map(|i| a + (b - a) * i as f64 / (m - 1) as f64)
        .collect())
}

pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("covtree-out"))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the frozen prediction CSV: `x,mean,variance,lower95,upper95`.
fn write_predictions(path: &Path, xs: &[f64], pred: &Prediction) -> Result<(), CliError> {
    let mut out = String::from("x,mean,variance,lower95,upper95\n");
    for i in 0..xs.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            xs[i], pred.mean[i], pred.variance[i], pred.lower95[i], pred.upper95[i]
        )
        .expect("string write");
    }
    write_text(path, &out)
}

/// Where a fit gets its data from.
pub enum DataSource {
    Csv {
        path: PathBuf,
        x_col: ColumnSel,
        y_col: ColumnSel,
        header: bool,
    },
    Demo(DemoName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoName {
    Sinc,
    Co2,
    Airline,
}

impl DemoName {
    pub fn parse(text: &str) -> Result<DemoName, CliError> {
        match text {
            "sinc" => Ok(DemoName::Sinc),
            "co2" => Ok(DemoName::Co2),
            "airline" => Ok(DemoName::Airline),
            other => Err(CliError::Usage(format!(
                "unknown demo `{other}`; expected sinc, co2 or airline"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DemoName::Sinc => "sinc",
            DemoName::Co2 => "co2",
            DemoName::Airline => "airline",
        }
    }
}

/// Fixed per-demo configuration: generator, composite kernel and noise mode.
pub struct DemoSpec {
    pub name: DemoName,
    pub kernel: &'static str,
    pub n: usize,
    pub noise_sd: f64,
    pub noise_mode: NoiseMode,
    pub holdout: Option<f64>,
}

/// The seasonal composite: a periodic kernel against cyclic structure,
/// one squared exponential for local variation around it, another for the
/// growth trend, and a rational quadratic for irregularities.
const SEASONAL_KERNEL: &str =
    "SE(theta=1) * PERIODIC(theta_l=9, theta_k=1) + SE(theta=0.1) + RQ(theta_l=1, theta_k=1)";

impl DemoSpec {
    pub fn for_name(name: DemoName) -> DemoSpec {
        match name {
            DemoName::Sinc => DemoSpec {
                name,
                // Periodic structure with amplitude modulated by the SE term.
                kernel: "SE(theta=1) * PERIODIC(theta_l=3, theta_k=1)",
                n: 30,
                noise_sd: 0.0,
                noise_mode: NoiseMode::FixedRatio(0.0),
                holdout: None,
            },
            DemoName::Co2 => DemoSpec {
                name,
                kernel: SEASONAL_KERNEL,
                n: 120,
                noise_sd: 0.5,
                noise_mode: NoiseMode::optimize_default(),
                holdout: Some(0.2),
            },
            DemoName::Airline => DemoSpec {
                name,
                kernel: SEASONAL_KERNEL,
                n: 144,
                noise_sd: 6.0,
                noise_mode: NoiseMode::optimize_default(),
                holdout: Some(0.2),
            },
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Dataset, DataError> {
        match self.name {
            DemoName::Sinc => data::gen_sinc(self.n, seed, self.noise_sd),
            DemoName::Co2 => data::gen_seasonal_trend(self.n, seed, self.noise_sd),
            DemoName::Airline => data::gen_airline_like(self.n, seed, self.noise_sd),
        }
    }

    /// Trend component used to detrend forecasts before scoring their
    /// seasonality.
    pub fn trend(&self, t: f64) -> f64 {
        match self.name {
            DemoName::Sinc => 0.0,
            DemoName::Co2 => data::seasonal_trend_curve(t),
            DemoName::Airline => data::airline_trend_curve(t),
        }
    }
}

/// Common fitting options shared by `fit` and `demo`.
pub struct FitFlags {
    pub seed: u64,
    pub restarts: usize,
    pub noise: Option<NoiseMode>,
    pub holdout: Option<f64>,
    pub jitter: f64,
    pub bounds: Vec<(String, f64, f64)>,
}

impl Default for FitFlags {
    fn default() -> FitFlags {
        FitFlags {
            seed: 0,
            restarts: 10,
            noise: None,
            holdout: None,
            jitter: DEFAULT_JITTER,
            bounds: Vec::new(),
        }
    }
}

fn manifest_options(flags: &FitFlags, noise: &NoiseMode) -> ManifestOptions {
    ManifestOptions {
        seed: flags.seed,
        restarts: flags.restarts,
        noise: describe_noise(noise),
        jitter: flags.jitter,
        holdout: flags.holdout,
        bounds: flags
            .bounds
            .iter()
            .map(|(p, lo, hi)| format!("{p}={lo}:{hi}"))
            .collect(),
    }
}

fn fit_options(flags: &FitFlags, noise: NoiseMode) -> FitOptions {
    FitOptions {
        noise,
        restarts: flags.restarts,
        seed: flags.seed,
        jitter: flags.jitter,
        bounds: flags.bounds.clone(),
        ..FitOptions::default()
    }
}

/// `fit`: fit a kernel to a CSV series or demo dataset and write the model.
pub fn cmd_fit(
    source: &DataSource,
    kernel_text: &str,
    out_model: Option<&Path>,
    out_dir_flag: Option<&Path>,
    flags: &FitFlags,
    stdout: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let out_dir = resolve_out_dir(out_dir_flag);
    ensure_dir(&out_dir)?;
    let (full_data, dataset_desc, default_noise) = match source {
        DataSource::Csv {
            path,
            x_col,
            y_col,
            header,
        } => (
            data::load_csv(path, x_col, y_col, *header)?,
            format!("csv:{}", path.display()),
            NoiseMode::default(),
        ),
        DataSource::Demo(name) => {
            let spec = DemoSpec::for_name(*name);
            (
                spec.generate(flags.seed)?,
                format!("demo:{}(seed={})", name.as_str(), flags.seed),
                spec.noise_mode,
            )
        }
    };
    let noise = flags.noise.clone().unwrap_or(default_noise);

    let data = match flags.holdout {
        Some(fraction) => data::split_tail(&full_data, fraction)?.0,
        None => full_data,
    };

    let tree = parse_kernel(kernel_text, data.dim())?;
    let gp = fit(&tree, &data, &fit_options(flags, noise.clone()))?;

    let model_path = out_model
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("model.json"));
    gp.save(&model_path)?;

    let mut manifest = RunManifest::new("fit", dataset_desc, manifest_options(flags, &noise));
    manifest.kernel = Some(kernel_text.to_string());
    manifest.fitted_kernel = Some(expr::format(gp.tree()));
    manifest.lml = Some(gp.lml());
    manifest
        .metrics
        .insert("sigma2".to_string(), gp.sigma2());
    manifest.metrics.insert("eta2".to_string(), gp.eta2());
    manifest.artifacts.insert(
        "model".to_string(),
        model_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| model_path.display().to_string()),
    );
    let manifest_path = out_dir.join("fit_manifest.json");
    manifest
        .write(&manifest_path)
        .map_err(|source| CliError::Write {
            path: manifest_path.display().to_string(),
            source,
        })?;

    writeln!(stdout, "fitted kernel: {}", expr::format(gp.tree())).ok();
    writeln!(stdout, "lml: {}", gp.lml()).ok();
    writeln!(stdout, "sigma2: {}", gp.sigma2()).ok();
    writeln!(stdout, "eta2: {}", gp.eta2()).ok();
    writeln!(stdout, "model: {}", model_path.display()).ok();
    Ok(())
}

/// Query points for `predict`.
pub enum QuerySource {
    Csv {
        path: PathBuf,
        header: bool,
    },
    Range(Vec<f64>),
}

/// `predict`: load a model and write predictions at query points.
pub fn cmd_predict(
    model_path: &Path,
    query: &QuerySource,
    out_csv: Option<&Path>,
    out_dir_flag: Option<&Path>,
    stdout: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let out_dir = resolve_out_dir(out_dir_flag);
    ensure_dir(&out_dir)?;
    let gp = FittedGP::load(model_path)?;
    let dim = gp.tree().dim();
    let (matrix, xs): (DMatrix<f64>, Vec<f64>) = match query {
        QuerySource::Range(grid) => {
            if dim != 1 {
                return Err(CliError::Usage(format!(
                    "--range needs a 1-d model; this model has {dim} input dimensions"
                )));
            }
            (
                DMatrix::from_column_slice(grid.len(), 1, grid),
                grid.clone(),
            )
        }
        QuerySource::Csv { path, header } => {
            let matrix = load_query_matrix(path, dim, *header)?;
            let xs = (0..matrix.nrows()).map(|i| matrix[(i, 0)]).collect();
            (matrix, xs)
        }
    };
    let pred = gp.predict(&matrix)?;
    let out_path = out_csv
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("predictions.csv"));
    write_predictions(&out_path, &xs, &pred)?;

    let mut manifest = RunManifest::new(
        "predict",
        format!("model:{}", model_path.display()),
        ManifestOptions {
            seed: gp.seed(),
            restarts: 0,
            noise: format!("fixed:{}", gp.noise_ratio()),
            jitter: gp.jitter(),
            holdout: None,
            bounds: Vec::new(),
        },
    );
    manifest.fitted_kernel = Some(expr::format(gp.tree()));
    manifest.lml = Some(gp.lml());
    manifest
        .metrics
        .insert("points".to_string(), xs.len() as f64);
    manifest.artifacts.insert(
        "predictions".to_string(),
        out_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| out_path.display().to_string()),
    );
    let manifest_path = out_dir.join("predict_manifest.json");
    manifest
        .write(&manifest_path)
        .map_err(|source| CliError::Write {
            path: manifest_path.display().to_string(),
            source,
        })?;

    writeln!(stdout, "{} predictions -> {}", xs.len(), out_path.display()).ok();
    Ok(())
}

/// Reads the first `dim` columns of a CSV file as query points.
fn load_query_matrix(path: &Path, dim: usize, header: bool) -> Result<DMatrix<f64>, CliError> {
    let file = std::fs::File::open(path).map_err(|source| {
        CliError::Data(DataError::Io {
            path: path.display().to_string(),
            source,
        })
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(DataError::Csv(e)))?;
        let line = record.position().map_or(0, |p| p.line());
        for j in 0..dim {
            let raw = record.get(j).ok_or(CliError::Data(DataError::Parse {
                line,
                value: format!("<missing column {j}>"),
            }))?;
            let value: f64 = raw.parse().map_err(|_| {
                CliError::Data(DataError::Parse {
                    line,
                    value: raw.to_string(),
                })
            })?;
            rows.push(value);
        }
        count += 1;
    }
    if count == 0 {
        return Err(CliError::Data(DataError::TooFewRows {
            needed: 1,
            found: 0,
        }));
    }
    Ok(DMatrix::from_row_slice(count, dim, &rows))
}

/// `eval`: score a model against a held-out CSV series.
pub fn cmd_eval(
    model_path: &Path,
    test_path: &Path,
    x_col: &ColumnSel,
    y_col: &ColumnSel,
    header: bool,
    out_dir_flag: Option<&Path>,
    stdout: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let out_dir = resolve_out_dir(out_dir_flag);
    ensure_dir(&out_dir)?;
    let gp = FittedGP::load(model_path)?;
    let test = data::load_csv(test_path, x_col, y_col, header)?;
    let pred = gp.predict(test.x())?;
    let y: Vec<f64> = test.y().iter().copied().collect();
    let m = metrics::score(&pred.mean, &pred.lower95, &pred.upper95, &y);

    let mut manifest = RunManifest::new(
        "eval",
        format!("csv:{}", test_path.display()),
        ManifestOptions {
            seed: gp.seed(),
            restarts: 0,
            noise: format!("fixed:{}", gp.noise_ratio()),
            jitter: gp.jitter(),
            holdout: None,
            bounds: Vec::new(),
        },
    );
    manifest.fitted_kernel = Some(expr::format(gp.tree()));
    manifest.lml = Some(gp.lml());
    manifest.metrics.insert("rmse".to_string(), m.rmse);
    manifest.metrics.insert("mae".to_string(), m.mae);
    manifest
        .metrics
        .insert("coverage95".to_string(), m.coverage95);
    let manifest_path = out_dir.join("eval_manifest.json");
    manifest
        .write(&manifest_path)
        .map_err(|source| CliError::Write {
            path: manifest_path.display().to_string(),
            source,
        })?;

    writeln!(stdout, "rmse: {}", m.rmse).ok();
    writeln!(stdout, "mae: {}", m.mae).ok();
    writeln!(stdout, "coverage95: {}", m.coverage95).ok();
    writeln!(stdout, "lml: {}", gp.lml()).ok();
    Ok(())
}

/// Everything a demo run produces, for callers that want the numbers
/// without re-reading the artifacts.
pub struct DemoOutcome {
    pub manifest: RunManifest,
    pub gp: FittedGP,
    pub train: Dataset,
    pub holdout: Option<Dataset>,
}

/// `demo`: generate the named case study, fit its composite kernel, score
/// it, and emit data/model/prediction/plot artifacts plus a manifest.
pub fn run_demo(
    name: DemoName,
    seed: u64,
    holdout_override: Option<f64>,
    restarts: usize,
    out_dir: &Path,
) -> Result<DemoOutcome, CliError> {
    ensure_dir(out_dir)?;
    let spec = DemoSpec::for_name(name);
    let full = spec.generate(seed)?;
    data::write_csv(&full, &out_dir.join("data.csv"))?;

    let holdout_fraction = holdout_override.or(spec.holdout);
    let (train, holdout) = match holdout_fraction {
        Some(f) => {
            let (a, b) = data::split_tail(&full, f)?;
            (a, Some(b))
        }
        None => (full.clone(), None),
    };

    let flags = FitFlags {
        seed,
        restarts,
        noise: Some(spec.noise_mode.clone()),
        holdout: holdout_fraction,
        jitter: DEFAULT_JITTER,
        bounds: Vec::new(),
    };
    let tree = parse_kernel(spec.kernel, 1)?;
    let gp = fit(&tree, &train, &fit_options(&flags, spec.noise_mode.clone()))?;
    gp.save(&out_dir.join("model.json"))?;

    // Prediction grid spans the full series plus a short extrapolation.
    let (x_lo, x_hi) = {
        let xs = full.x();
        let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
        let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
        (lo, hi + 0.1 * (hi - lo))
    };
    let grid_n = 240;
    let grid: Vec<f64> = (0..grid_n)
        .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (grid_n - 1) as f64)
        .collect();
    let grid_pred = gp.predict_1d(&grid)?;
    write_predictions(&out_dir.join("predictions.csv"), &grid, &grid_pred)?;

    // Scores.
    let mut manifest = RunManifest::new(
        "demo",
        format!("demo:{}(seed={seed})", name.as_str()),
        manifest_options(&flags, &spec.noise_mode),
    );
    manifest.kernel = Some(spec.kernel.to_string());
    manifest.fitted_kernel = Some(expr::format(gp.tree()));
    manifest.lml = Some(gp.lml());

    let train_x: Vec<f64> = (0..train.n()).map(|i| train.x()[(i, 0)]).collect();
    let train_y: Vec<f64> = train.y().iter().copied().collect();
    let train_pred = gp.predict(train.x())?;
    let train_scores = metrics::score(
        &train_pred.mean,
        &train_pred.lower95,
        &train_pred.upper95,
        &train_y,
    );
    manifest
        .metrics
        .insert("train_rmse".to_string(), train_scores.rmse);
    let mean_var = |p: &Prediction| p.variance.iter().sum::<f64>() / p.variance.len() as f64;
    manifest
        .metrics
        .insert("train_mean_variance".to_string(), mean_var(&train_pred));

    if let Some(holdout) = &holdout {
        let holdout_y: Vec<f64> = holdout.y().iter().copied().collect();
        let holdout_pred = gp.predict(holdout.x())?;
        let scores = metrics::score(
            &holdout_pred.mean,
            &holdout_pred.lower95,
            &holdout_pred.upper95,
            &holdout_y,
        );
        manifest.metrics.insert("rmse".to_string(), scores.rmse);
        manifest.metrics.insert("mae".to_string(), scores.mae);
        manifest
            .metrics
            .insert("coverage95".to_string(), scores.coverage95);
        manifest
            .metrics
            .insert("holdout_mean_variance".to_string(), mean_var(&holdout_pred));
        // Seasonality of the extrapolated mean after removing the
        // generator's trend.
        let detrended: Vec<f64> = (0..holdout.n())
            .map(|i| holdout_pred.mean[i] - spec.trend(holdout.x()[(i, 0)]))
            .collect();
        if let Some(r) = metrics::lag_autocorrelation(&detrended, 12) {
            manifest
                .metrics
                .insert("lag12_autocorr_detrended".to_string(), r);
        }
    } else if name == DemoName::Sinc {
        // Score against the true curve on a fresh dense grid.
        let eval_n = 200;
        let eval_x: Vec<f64> = (0..eval_n)
            .map(|i| -10.0 + 20.0 * i as f64 / (eval_n - 1) as f64)
            .collect();
        let truth: Vec<f64> = eval_x.iter().map(|x| data::sinc(*x)).collect();
        let pred = gp.predict_1d(&eval_x)?;
        let scores = metrics::score(&pred.mean, &pred.lower95, &pred.upper95, &truth);
        manifest.metrics.insert("grid_rmse".to_string(), scores.rmse);
        manifest
            .metrics
            .insert("grid_coverage95".to_string(), scores.coverage95);
    }

    // Plot: band + mean over the grid, observations on top.
    let mut scatters = vec![ScatterLayer {
        x: train_x,
        y: train_y,
        color: "#d62728",
        label: "train".to_string(),
    }];
    if let Some(holdout) = &holdout {
        scatters.push(ScatterLayer {
            x: (0..holdout.n()).map(|i| holdout.x()[(i, 0)]).collect(),
            y: holdout.y().iter().copied().collect(),
            color: "#2ca02c",
            label: "holdout".to_string(),
        });
    }
    let plot = Plot {
        title: format!("{} demo (seed {seed})", name.as_str()),
        band: BandLayer {
            x: grid,
            mean: grid_pred.mean,
            lower: grid_pred.lower95,
            upper: grid_pred.upper95,
        },
        scatters,
    };
    write_text(&out_dir.join("plot.svg"), &plot.to_svg())?;

    for artifact in ["data.csv", "model.json", "predictions.csv", "plot.svg"] {
        manifest
            .artifacts
            .insert(artifact.split('.').next().unwrap().to_string(), artifact.to_string());
    }
    let manifest_path = out_dir.join("demo_manifest.json");
    manifest
        .write(&manifest_path)
        .map_err(|source| CliError::Write {
            path: manifest_path.display().to_string(),
            source,
        })?;

    Ok(DemoOutcome {
        manifest,
        gp,
        train,
        holdout,
    })
}

/// CLI wrapper around [`run_demo`] printing a metric summary.
pub fn cmd_demo(
    name: DemoName,
    seed: u64,
    holdout: Option<f64>,
    restarts: usize,
    out_dir_flag: Option<&Path>,
    stdout: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let out_dir = resolve_out_dir(out_dir_flag);
    let outcome = run_demo(name, seed, holdout, restarts, &out_dir)?;
    writeln!(stdout, "demo: {}", name.as_str()).ok();
    writeln!(
        stdout,
        "kernel: {}",
        outcome.manifest.fitted_kernel.as_deref().unwrap_or("")
    )
    .ok();
    writeln!(stdout, "lml: {}", outcome.gp.lml()).ok();
    for (key, value) in &outcome.manifest.metrics {
        writeln!(stdout, "{key}: {value}").ok();
    }
    writeln!(stdout, "artifacts: {}", out_dir.display()).ok();
    Ok(())
}
