//! Dataset handling: CSV ingestion, standardization bookkeeping,
//! chronological splitting, and deterministic synthetic series.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: cannot parse `{value}` as a number")]
    Parse { line: u64, value: String },
    #[error("line {line}: non-finite value {value}")]
    NonFinite { line: u64, value: f64 },
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("holdout fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Shift/scale parameters mapping a dataset to zero mean and unit variance.
///
/// Standardizing the observations realizes the zero-mean prior without a
/// trend model; predictions are mapped back to original units afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_shift: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Standardization {
    fn fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Standardization {
        let n = x.nrows() as f64;
        let mut x_shift = Vec::with_capacity(x.ncols());
        let mut x_scale = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col = x.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            x_shift.push(mean);
            x_scale.push(if sd > 1e-300 { sd } else { 1.0 });
        }
        let y_mean = y.sum() / n;
        let var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        Standardization {
            x_shift,
            x_scale,
            y_mean,
            y_std: if sd > 1e-300 { sd } else { 1.0 },
        }
    }

    pub fn standardize_x(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] = (out[(i, j)] - self.x_shift[j]) / self.x_scale[j];
            }
        }
        out
    }

    pub fn standardize_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| (v - self.x_shift[j]) / self.x_scale[j])
            .collect()
    }

    pub fn destandardize_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| v * self.x_scale[j] + self.x_shift[j])
            .collect()
    }

    pub fn standardize_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| (v - self.y_mean) / self.y_std)
    }

    pub fn destandardize_mean(&self, value: f64) -> f64 {
        value * self.y_std + self.y_mean
    }

    pub fn destandardize_variance(&self, value: f64) -> f64 {
        value * self.y_std * self.y_std
    }
}

/// Paired training inputs and observations, in original units, with the
/// standardization computed (not applied) on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    standardization: Standardization,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Dataset, DataError> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(DataError::Invalid(
                "inputs need at least one row and one column".to_string(),
            ));
        }
        if x.nrows() != y.len() {
            return Err(DataError::Invalid(format!(
                "{} input rows but {} observations",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite entries".to_string()));
        }
        let standardization = Standardization::fit(&x, &y);
        Ok(Dataset {
            x,
            y,
            standardization,
        })
    }

    /// One-dimensional convenience constructor.
    pub fn from_xy(x: Vec<f64>, y: Vec<f64>) -> Result<Dataset, DataError> {
        let n = x.len();
        Dataset::new(DMatrix::from_vec(n, 1, x), DVector::from_vec(y))
    }

    /// Rebuilds a dataset with a caller-provided standardization (used when
    /// reloading serialized models, so reconstruction is bit-identical).
    pub fn with_standardization(
        x: DMatrix<f64>,
        y: DVector<f64>,
        standardization: Standardization,
    ) -> Result<Dataset, DataError> {
        let mut data = Dataset::new(x, y)?;
        data.standardization = standardization;
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn standardized_x(&self) -> DMatrix<f64> {
        self.standardization.standardize_x(&self.x)
    }

    pub fn standardized_y(&self) -> DVector<f64> {
        self.standardization.standardize_y(&self.y)
    }
}

/// Which column of a CSV file to read.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSel {
    Index(usize),
    Name(String),
}

impl ColumnSel {
    /// Parses `"2"` as an index and anything else as a header name.
    pub fn parse(text: &str) -> ColumnSel {
        match text.parse::<usize>() {
            Ok(idx) => ColumnSel::Index(idx),
            Err(_) => ColumnSel::Name(text.to_string()),
        }
    }

    fn resolve(&self, headers: Option<&csv::StringRecord>) -> Result<usize, DataError> {
        match self {
            ColumnSel::Index(i) => Ok(*i),
            ColumnSel::Name(name) => headers
                .and_then(|h| h.iter().position(|f| f.trim() == name))
                .ok_or_else(|| DataError::MissingColumn(name.clone())),
        }
    }
}

/// Loads a two-column series from a CSV file. Rows keep file order;
/// duplicate x values are accepted (the noise model resolves them).
pub fn load_csv(
    path: &Path,
    x_col: &ColumnSel,
    y_col: &ColumnSel,
    has_header: bool,
) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file);
    let headers = if has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };
    let xi = x_col.resolve(headers.as_ref())?;
    let yi = y_col.resolve(headers.as_ref())?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_field = |idx: usize| -> Result<f64, DataError> {
            let raw = record.get(idx).ok_or_else(|| DataError::Parse {
                line,
                value: format!("<missing column {idx}>"),
            })?;
            let value: f64 = raw.parse().map_err(|_| DataError::Parse {
                line,
                value: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite { line, value });
            }
            Ok(value)
        };
        xs.push(parse_field(xi)?);
        ys.push(parse_field(yi)?);
    }
    if xs.len() < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            found: xs.len(),
        });
    }
    Dataset::from_xy(xs, ys)
}

/// Writes a one-dimensional dataset as CSV with header `x,y`.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut file = std::fs::File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    writeln!(file, "x,y").map_err(io_err)?;
    for i in 0..data.n() {
        writeln!(file, "{},{}", data.x()[(i, 0)], data.y()[i]).map_err(io_err)?;
    }
    Ok(())
}

/// Converts a `"YYYY-MM"` label to a fractional year (January = year + 0).
pub fn year_month_to_fractional_year(text: &str) -> Option<f64> {
    let (year, month) = text.split_once('-')?;
    let year: i32 = year.parse().ok()?;
    let month: u32 = month.parse().ok()?;
    if !(1..=12).contains(&month) {
        return None;
    }
    Some(f64::from(year) + f64::from(month - 1) / 12.0)
}

fn noise(n: usize, seed: u64, sd: f64) -> Vec<f64> {
    if sd == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("sd validated by caller");
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

/// The cardinal sine `sin(x)/x`, with the removable singularity patched.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Cardinal sine samples on a uniform grid over `[-10, 10]`, optionally with
/// additive Gaussian noise.
pub fn gen_sinc(n: usize, seed: u64, noise_sd: f64) -> Result<Dataset, DataError> {
    if n < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            found: n,
        });
    }
    let eps = noise(n, seed, noise_sd);
    let xs: Vec<f64> = (0..n)
        .map(|i| -10.0 + 20.0 * i as f64 / (n - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().zip(&eps).map(|(x, e)| sinc(*x) + e).collect();
    Dataset::from_xy(xs, ys)
}

/// Linear coefficient of the seasonal-trend generator.
pub const SEASONAL_TREND_LINEAR: f64 = 0.08;
/// Quadratic coefficient of the seasonal-trend generator.
pub const SEASONAL_TREND_QUADRATIC: f64 = 0.0008;
/// Seasonal amplitude of the seasonal-trend generator.
pub const SEASONAL_AMPLITUDE: f64 = 1.0;
/// Seasonal period (months) shared by both monthly generators.
pub const SEASONAL_PERIOD: f64 = 12.0;

/// Trend component of the seasonal-trend series at month `t`.
pub fn seasonal_trend_curve(t: f64) -> f64 {
    SEASONAL_TREND_LINEAR * t + SEASONAL_TREND_QUADRATIC * t * t
}

/// Monthly series with a quadratic growth trend plus additive seasonality:
/// `y(t) = 0.08 t + 0.0008 t^2 + sin(2 pi t / 12) + noise`, `t = 0..n-1`.
pub fn gen_seasonal_trend(n: usize, seed: u64, noise_sd: f64) -> Result<Dataset, DataError> {
    if n < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            found: n,
        });
    }
    let eps = noise(n, seed, noise_sd);
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .zip(&eps)
        .map(|(t, e)| {
            seasonal_trend_curve(*t)
                + SEASONAL_AMPLITUDE * (2.0 * std::f64::consts::PI * t / SEASONAL_PERIOD).sin()
                + e
        })
        .collect();
    Dataset::from_xy(xs, ys)
}

/// Base level of the airline-like generator.
pub const AIRLINE_BASE: f64 = 120.0;
/// Linear coefficient of the airline-like trend.
pub const AIRLINE_TREND_LINEAR: f64 = 1.8;
/// Quadratic coefficient of the airline-like trend.
pub const AIRLINE_TREND_QUADRATIC: f64 = 0.012;
/// Relative amplitude of the multiplicative seasonality.
pub const AIRLINE_SEASONAL_FRACTION: f64 = 0.22;

/// Trend component of the airline-like series at month `t`.
pub fn airline_trend_curve(t: f64) -> f64 {
    AIRLINE_BASE + AIRLINE_TREND_LINEAR * t + AIRLINE_TREND_QUADRATIC * t * t
}

/// Monthly series with multiplicative seasonality, so the seasonal swing
/// grows with the trend:
/// `y(t) = base(t) * (1 + 0.22 sin(2 pi t / 12)) + noise` with
/// `base(t) = 120 + 1.8 t + 0.012 t^2`.
pub fn gen_airline_like(n: usize, seed: u64, noise_sd: f64) -> Result<Dataset, DataError> {
    if n < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            found: n,
        });
    }
    let eps = noise(n, seed, noise_sd);
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .zip(&eps)
        .map(|(t, e)| {
            airline_trend_curve(*t)
                * (1.0
                    + AIRLINE_SEASONAL_FRACTION
                        * (2.0 * std::f64::consts::PI * t / SEASONAL_PERIOD).sin())
                + e
        })
        .collect();
    Dataset::from_xy(xs, ys)
}

/// Chronological split: the first `ceil(n * (1 - fraction))` rows train,
/// the rest are held out, order preserved.
pub fn split_tail(data: &Dataset, fraction: f64) -> Result<(Dataset, Dataset), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let n = data.n();
    let train_n = ((n as f64) * (1.0 - fraction)).ceil() as usize;
    if train_n < 2 || train_n >= n {
        return Err(DataError::Invalid(format!(
            "split of {n} rows at fraction {fraction} leaves train {train_n}"
        )));
    }
    let train = Dataset::new(
        data.x.rows(0, train_n).into_owned(),
        DVector::from_iterator(train_n, data.y.iter().take(train_n).copied()),
    )?;
    let test_n = n - train_n;
    let test = Dataset::new(
        data.x.rows(train_n, test_n).into_owned(),
        DVector::from_iterator(test_n, data.y.iter().skip(train_n).copied()),
    )?;
    Ok((train, test))
}
