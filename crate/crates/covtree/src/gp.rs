//! The kriging engine: Gram assembly, concentrated log marginal likelihood
//! with analytic gradient, bounded multi-start optimization, and posterior
//! prediction.
//!
//! The kernel tree is treated as a correlation model and the process
//! variance is profiled out analytically: with standardized observations
//! `y`, correlation matrix `R = K + (rho + jitter) I` and `alpha = R^-1 y`,
//!
//! ```text
//! sigma2 = y' alpha / n
//! lml    = -n/2 ln(2 pi sigma2) - 1/2 ln det R - n/2
//! ```
//!
//! `rho` is the noise-to-signal ratio on the correlation diagonal, so the
//! noise variance in standardized units is `eta2 = rho * sigma2`. Gradients
//! of the concentrated objective use
//! `d lml / d t = (a' dR/dt a) * n / (2 y'R^-1 y) - 1/2 tr(R^-1 dR/dt)`.

use crate::algebra::{HyperparameterLayout, KernelExpr, Transform};
use crate::data::{DataError, Dataset, Standardization};
use crate::expr;
use crate::kernel::KernelError;
use crate::optimize::{minimize_bounded, LbfgsOptions};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Escalation steps appended after the configured jitter when a
/// factorization fails.
const JITTER_LADDER: [f64; 3] = [1e-8, 1e-6, 1e-4];
/// Default jitter added to the correlation diagonal.
pub const DEFAULT_JITTER: f64 = 1e-10;
/// Default bounds for the optimized noise-to-signal ratio.
pub const DEFAULT_NOISE_BOUNDS: (f64, f64) = (1e-12, 1.0);
/// Starting value for the optimized noise ratio (geometric midpoint of the
/// default bounds).
const NOISE_START: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GpError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("kernel produced a non-finite value at pair ({i}, {j})")]
    NonFiniteKernel { i: usize, j: usize },
    #[error("correlation matrix is not positive definite (tried jitters {attempted:?})")]
    Conditioning { attempted: Vec<f64> },
    #[error("no restart produced a finite log marginal likelihood:\n{}", diagnostics.join("\n"))]
    FitFailed { diagnostics: Vec<String> },
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
}

/// Gram matrix of a kernel tree over a point set, exactly symmetric by
/// construction (the upper triangle is computed once and mirrored).
pub fn gram(tree: &KernelExpr, x: &DMatrix<f64>) -> Result<DMatrix<f64>, GpError> {
    if x.ncols() != tree.dim() {
        return Err(GpError::Kernel(KernelError::DimensionMismatch {
            expected: tree.dim(),
            got: x.ncols(),
        }));
    }
    let points = matrix_rows(x);
    gram_from_rows(tree, &points)
}

fn gram_from_rows(tree: &KernelExpr, points: &[Vec<f64>]) -> Result<DMatrix<f64>, GpError> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = tree.eval_unchecked(&points[i], &points[j]);
            if !v.is_finite() {
                return Err(GpError::NonFiniteKernel { i, j });
            }
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

fn matrix_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

fn cholesky_with_ladder(
    base: &DMatrix<f64>,
    jitter: f64,
) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let mut attempted = Vec::new();
    let mut attempts = vec![jitter];
    attempts.extend(JITTER_LADDER.iter().copied().filter(|j| *j > jitter));
    for j in attempts {
        attempted.push(j);
        let mut r = base.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += j;
        }
        if let Some(chol) = Cholesky::new(r) {
            return Ok((chol, j));
        }
    }
    Err(GpError::Conditioning { attempted })
}

fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Everything derived from one factorization of the correlation matrix.
struct Factorized {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    sigma2: f64,
    lml: f64,
    jitter_used: f64,
}

fn factorize(
    tree: &KernelExpr,
    points: &[Vec<f64>],
    ys: &DVector<f64>,
    rho: f64,
    jitter: f64,
) -> Result<Factorized, GpError> {
    let n = points.len();
    let mut r = gram_from_rows(tree, points)?;
    for i in 0..n {
        r[(i, i)] += rho;
    }
    let (chol, jitter_used) = cholesky_with_ladder(&r, jitter)?;
    let alpha = chol.solve(ys);
    let y_r_y = ys.dot(&alpha);
    let sigma2 = (y_r_y / n as f64).max(1e-300);
    let lml = -0.5 * n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
        - 0.5 * log_det_from_cholesky(&chol)
        - 0.5 * n as f64;
    Ok(Factorized {
        chol,
        alpha,
        sigma2,
        lml,
        jitter_used,
    })
}

/// Concentrated log marginal likelihood on *already standardized* data.
///
/// Returns `(lml, sigma2)` with the process variance profiled analytically.
/// `rho` is the noise-to-signal ratio added to the correlation diagonal.
pub fn concentrated_lml(
    tree: &KernelExpr,
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
    rho: f64,
    jitter: f64,
) -> Result<(f64, f64), GpError> {
    if xs.nrows() != ys.len() {
        return Err(GpError::Kernel(KernelError::DimensionMismatch {
            expected: xs.nrows(),
            got: ys.len(),
        }));
    }
    let points = matrix_rows(xs);
    let fact = factorize(tree, &points, ys, rho, jitter)?;
    Ok((fact.lml, fact.sigma2))
}

/// Concentrated log marginal likelihood of a dataset (standardized
/// internally).
pub fn log_marginal_likelihood(
    tree: &KernelExpr,
    data: &Dataset,
    rho: f64,
    jitter: f64,
) -> Result<(f64, f64), GpError> {
    concentrated_lml(
        tree,
        &data.standardized_x(),
        &data.standardized_y(),
        rho,
        jitter,
    )
}

/// One optimizer coordinate: a transformed kernel parameter or the noise
/// ratio.
#[derive(Debug, Clone)]
struct Coordinate {
    lower: f64,
    upper: f64,
    transform: Transform,
}

fn to_internal(value: f64, transform: Transform) -> f64 {
    match transform {
        Transform::Log => value.ln(),
        Transform::Identity => value,
    }
}

fn from_internal(z: f64, transform: Transform) -> f64 {
    match transform {
        Transform::Log => z.exp(),
        Transform::Identity => z,
    }
}

/// Computes the concentrated lml and its gradient in the optimizer's
/// transformed coordinates.
struct ConcentratedObjective<'a> {
    template: &'a KernelExpr,
    points: &'a [Vec<f64>],
    ys: &'a DVector<f64>,
    coords: &'a [Coordinate],
    /// `Some(..)` when the last coordinate is the log noise ratio.
    fixed_rho: Option<f64>,
    jitter: f64,
    n_kernel_params: usize,
}

impl ConcentratedObjective<'_> {
    fn decode(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let values: Vec<f64> = (0..self.n_kernel_params)
            .map(|k| from_internal(z[k], self.coords[k].transform))
            .collect();
        let rho = match self.fixed_rho {
            Some(r) => r,
            None => z[self.n_kernel_params].exp(),
        };
        (values, rho)
    }

    /// Fills `grad` with the gradient of the lml and returns the lml.
    fn eval(&self, z: &[f64], grad: &mut [f64]) -> Option<f64> {
        let (values, rho) = self.decode(z);
        let tree = self.template.with_values(&values).ok()?;
        let fact = factorize(&tree, self.points, self.ys, rho, self.jitter).ok()?;
        if !fact.lml.is_finite() {
            return None;
        }
        let n = self.points.len();
        let rinv = fact.chol.inverse();
        let alpha = &fact.alpha;
        let y_r_y = (fact.sigma2 * n as f64).max(1e-300);

        // Accumulate a' dR a and tr(R^-1 dR) for every kernel parameter in
        // one sweep over the upper triangle.
        let mut quad = vec![0.0; self.n_kernel_params];
        let mut trace = vec![0.0; self.n_kernel_params];
        let mut pair_grad = vec![0.0; self.n_kernel_params];
        for i in 0..n {
            for j in i..n {
                tree.value_and_gradient_into(&self.points[i], &self.points[j], &mut pair_grad);
                let mult = if i == j { 1.0 } else { 2.0 };
                let w_quad = mult * alpha[i] * alpha[j];
                let w_trace = mult * rinv[(i, j)];
                for (k, g) in pair_grad.iter().enumerate() {
                    quad[k] += w_quad * g;
                    trace[k] += w_trace * g;
                }
            }
        }
        let quad_coef = n as f64 / (2.0 * y_r_y);
        for k in 0..self.n_kernel_params {
            let d_lml = quad_coef * quad[k] - 0.5 * trace[k];
            grad[k] = match self.coords[k].transform {
                Transform::Log => d_lml * values[k],
                Transform::Identity => d_lml,
            };
        }
        if self.fixed_rho.is_none() {
            // dR/d(rho) = I.
            let quad_noise: f64 = alpha.iter().map(|a| a * a).sum();
            let trace_noise: f64 = (0..n).map(|i| rinv[(i, i)]).sum();
            let d_lml = quad_coef * quad_noise - 0.5 * trace_noise;
            grad[self.n_kernel_params] = d_lml * rho;
        }
        Some(fact.lml)
    }
}

/// Gradient of the concentrated lml over the kernel's transformed
/// coordinates (log-space for log-transformed parameters), holding the
/// noise ratio `rho` fixed.
pub fn lml_gradient(
    tree: &KernelExpr,
    data: &Dataset,
    rho: f64,
    jitter: f64,
) -> Result<Vec<f64>, GpError> {
    let xs = data.standardized_x();
    let ys = data.standardized_y();
    let points = matrix_rows(&xs);
    let layout = tree.gather();
    let coords: Vec<Coordinate> = layout
        .entries
        .iter()
        .map(|e| Coordinate {
            lower: e.lower,
            upper: e.upper,
            transform: e.transform,
        })
        .collect();
    let objective = ConcentratedObjective {
        template: tree,
        points: &points,
        ys: &ys,
        coords: &coords,
        fixed_rho: Some(rho),
        jitter,
        n_kernel_params: layout.len(),
    };
    let z: Vec<f64> = layout
        .values
        .iter()
        .zip(&coords)
        .map(|(v, c)| to_internal(*v, c.transform))
        .collect();
    let mut grad = vec![0.0; layout.len()];
    objective
        .eval(&z, &mut grad)
        .ok_or_else(|| GpError::Conditioning {
            attempted: vec![jitter],
        })?;
    Ok(grad)
}

/// Noise handling during fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode {
    /// Fixed noise-to-signal ratio on the correlation diagonal; the default
    /// of 0 leaves only the jitter. The fitted noise variance is
    /// `eta2 = ratio * sigma2`.
    FixedRatio(f64),
    /// Optimize the log noise ratio inside `[lower, upper]`.
    Optimize { lower: f64, upper: f64 },
}

impl Default for NoiseMode {
    fn default() -> NoiseMode {
        NoiseMode::FixedRatio(0.0)
    }
}

impl NoiseMode {
    pub fn optimize_default() -> NoiseMode {
        NoiseMode::Optimize {
            lower: DEFAULT_NOISE_BOUNDS.0,
            upper: DEFAULT_NOISE_BOUNDS.1,
        }
    }
}

/// Options for [`fit`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub noise: NoiseMode,
    /// Number of optimizer starts; the first uses the tree's declared
    /// values, the rest draw uniformly in the transformed search box.
    pub restarts: usize,
    pub seed: u64,
    pub jitter: f64,
    /// Bound overrides by layout path, in natural (untransformed) units.
    pub bounds: Vec<(String, f64, f64)>,
    pub optimizer: LbfgsOptions,
}

impl Default for FitOptions {
    fn default() -> FitOptions {
        FitOptions {
            noise: NoiseMode::default(),
            restarts: 10,
            seed: 0,
            jitter: DEFAULT_JITTER,
            bounds: Vec::new(),
            optimizer: LbfgsOptions::default(),
        }
    }
}

/// A frozen posterior: optimal kernel, profiled variance, factorized
/// correlation matrix and precomputed weights.
#[derive(Debug, Clone)]
pub struct FittedGP {
    tree: KernelExpr,
    sigma2: f64,
    eta2: f64,
    noise_ratio: f64,
    jitter: f64,
    lml: f64,
    seed: u64,
    data: Dataset,
    points: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
}

/// Posterior summary per query point, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
}

/// Fits kernel hyperparameters by maximizing the concentrated log marginal
/// likelihood with bounded multi-start L-BFGS. Deterministic for a given
/// `(tree, data, options, seed)`.
pub fn fit(tree: &KernelExpr, data: &Dataset, options: &FitOptions) -> Result<FittedGP, GpError> {
    if options.restarts == 0 {
        return Err(GpError::InvalidOptions("restarts must be >= 1".to_string()));
    }
    if tree.dim() != data.dim() {
        return Err(GpError::Kernel(KernelError::DimensionMismatch {
            expected: tree.dim(),
            got: data.dim(),
        }));
    }
    let mut layout = tree.gather();
    apply_bound_overrides(&mut layout, &options.bounds)?;

    let mut coords: Vec<Coordinate> = layout
        .entries
        .iter()
        .map(|e| Coordinate {
            lower: e.lower,
            upper: e.upper,
            transform: e.transform,
        })
        .collect();
    let n_kernel_params = coords.len();
    let fixed_rho = match options.noise {
        NoiseMode::FixedRatio(r) => {
            if r.is_nan() || r < 0.0 {
                return Err(GpError::InvalidOptions(format!(
                    "noise ratio {r} must be nonnegative"
                )));
            }
            Some(r)
        }
        NoiseMode::Optimize { lower, upper } => {
            if !(lower > 0.0 && lower <= upper) {
                return Err(GpError::InvalidOptions(format!(
                    "noise bounds [{lower}, {upper}] must be positive and ordered"
                )));
            }
            coords.push(Coordinate {
                lower,
                upper,
                transform: Transform::Log,
            });
            None
        }
    };

    let lower_z: Vec<f64> = coords
        .iter()
        .map(|c| to_internal(c.lower, c.transform))
        .collect();
    let upper_z: Vec<f64> = coords
        .iter()
        .map(|c| to_internal(c.upper, c.transform))
        .collect();

    // First start: the declared values. Remaining starts: uniform draws in
    // the transformed box, all pre-drawn so restarts can run in parallel.
    let mut declared: Vec<f64> = layout
        .values
        .iter()
        .zip(&coords)
        .map(|(v, c)| to_internal(*v, c.transform))
        .collect();
    if fixed_rho.is_none() {
        let c = coords.last().unwrap();
        declared.push(to_internal(NOISE_START.clamp(c.lower, c.upper), c.transform));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut starts = vec![declared];
    for _ in 1..options.restarts {
        let z: Vec<f64> = (0..coords.len())
            .map(|k| {
                if lower_z[k] < upper_z[k] {
                    rng.random_range(lower_z[k]..upper_z[k])
                } else {
                    lower_z[k]
                }
            })
            .collect();
        starts.push(z);
    }

    let xs = data.standardized_x();
    let ys = data.standardized_y();
    let points = matrix_rows(&xs);

    let results: Vec<Result<(f64, Vec<f64>), String>> = starts
        .par_iter()
        .enumerate()
        .map(|(idx, start)| {
            let objective = ConcentratedObjective {
                template: tree,
                points: &points,
                ys: &ys,
                coords: &coords,
                fixed_rho,
                jitter: options.jitter,
                n_kernel_params,
            };
            let outcome = minimize_bounded(
                start,
                &lower_z,
                &upper_z,
                &options.optimizer,
                |z, grad| {
                    let lml = objective.eval(z, grad)?;
                    for g in grad.iter_mut() {
                        *g = -*g;
                    }
                    Some(-lml)
                },
            );
            match outcome {
                Ok(o) if o.f.is_finite() => Ok((-o.f, o.x)),
                Ok(o) => Err(format!("restart {idx}: non-finite objective {}", o.f)),
                Err(e) => Err(format!("restart {idx}: {e}")),
            }
        })
        .collect();

    let mut best: Option<(f64, &Vec<f64>)> = None;
    let mut diagnostics = Vec::new();
    for result in &results {
        match result {
            Ok((lml, z)) => {
                if best.as_ref().is_none_or(|(b, _)| lml > b) {
                    best = Some((*lml, z));
                }
            }
            Err(msg) => diagnostics.push(msg.clone()),
        }
    }
    let Some((_, best_z)) = best else {
        return Err(GpError::FitFailed { diagnostics });
    };

    let values: Vec<f64> = (0..n_kernel_params)
        .map(|k| from_internal(best_z[k], coords[k].transform))
        .collect();
    let rho = fixed_rho.unwrap_or_else(|| best_z[n_kernel_params].exp());
    let fitted_tree = tree.with_values(&values)?;
    assemble(fitted_tree, data.clone(), rho, options.jitter, options.seed)
}

fn apply_bound_overrides(
    layout: &mut HyperparameterLayout,
    overrides: &[(String, f64, f64)],
) -> Result<(), GpError> {
    for (path, lower, upper) in overrides {
        let idx = layout.position(path).ok_or_else(|| {
            GpError::InvalidOptions(format!("bound override for unknown parameter `{path}`"))
        })?;
        let entry = &mut layout.entries[idx];
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(GpError::InvalidOptions(format!(
                "bounds for `{path}` are not ordered: [{lower}, {upper}]"
            )));
        }
        if entry.transform == Transform::Log && *lower <= 0.0 {
            return Err(GpError::InvalidOptions(format!(
                "lower bound for `{path}` must be positive"
            )));
        }
        entry.lower = *lower;
        entry.upper = *upper;
        layout.values[idx] = layout.values[idx].clamp(*lower, *upper);
    }
    Ok(())
}

/// Builds the frozen posterior state for a tree with known parameters.
fn assemble(
    tree: KernelExpr,
    data: Dataset,
    rho: f64,
    jitter: f64,
    seed: u64,
) -> Result<FittedGP, GpError> {
    let xs = data.standardized_x();
    let ys = data.standardized_y();
    let points = matrix_rows(&xs);
    let fact = factorize(&tree, &points, &ys, rho, jitter)?;
    Ok(FittedGP {
        tree,
        sigma2: fact.sigma2,
        eta2: rho * fact.sigma2,
        noise_ratio: rho,
        jitter: fact.jitter_used,
        lml: fact.lml,
        seed,
        data,
        points,
        weights: fact.alpha,
        chol: fact.chol,
    })
}

impl FittedGP {
    /// Fits a tree to data; equivalent to the free function [`fit`].
    pub fn fit(tree: &KernelExpr, data: &Dataset, options: &FitOptions) -> Result<FittedGP, GpError> {
        fit(tree, data, options)
    }

    /// Freezes a posterior at the tree's declared hyperparameters without
    /// optimizing (useful for diagnostics and tests).
    pub fn from_parameters(
        tree: &KernelExpr,
        data: &Dataset,
        rho: f64,
        jitter: f64,
    ) -> Result<FittedGP, GpError> {
        assemble(tree.clone(), data.clone(), rho, jitter, 0)
    }

    pub fn tree(&self) -> &KernelExpr {
        &self.tree
    }

    /// Profiled process variance, in standardized units.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Fitted noise variance `rho * sigma2`, in standardized units.
    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    pub fn noise_ratio(&self) -> f64 {
        self.noise_ratio
    }

    /// Jitter that actually entered the factorized diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lml(&self) -> f64 {
        self.lml
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Lower-triangular Cholesky factor of the correlation matrix.
    pub fn cholesky_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// The weight vector `R^-1 y` (standardized units).
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Posterior mean and variance at query points, de-standardized to the
    /// original units.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Prediction, GpError> {
        if x.ncols() != self.tree.dim() {
            return Err(GpError::Kernel(KernelError::DimensionMismatch {
                expected: self.tree.dim(),
                got: x.ncols(),
            }));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GpError::Data(DataError::Invalid(
                "query points contain non-finite values".to_string(),
            )));
        }
        let st = self.data.standardization();
        let n = self.points.len();
        let m = x.nrows();
        let mut mean = Vec::with_capacity(m);
        let mut variance = Vec::with_capacity(m);
        let mut lower95 = Vec::with_capacity(m);
        let mut upper95 = Vec::with_capacity(m);
        let mut r = DVector::zeros(n);
        for q in 0..m {
            let row: Vec<f64> = x.row(q).iter().copied().collect();
            let xq = st.standardize_row(&row);
            for i in 0..n {
                r[i] = self.tree.eval_unchecked(&xq, &self.points[i]);
            }
            let mean_std = r.dot(&self.weights);
            let solved = self.chol.solve(&r);
            let prior = self.tree.eval_unchecked(&xq, &xq);
            let var_std = (self.sigma2 * (prior - r.dot(&solved))).max(0.0);
            let mu = st.destandardize_mean(mean_std);
            let var = st.destandardize_variance(var_std);
            let half = 1.96 * var.sqrt();
            mean.push(mu);
            variance.push(var);
            lower95.push(mu - half);
            upper95.push(mu + half);
        }
        Ok(Prediction {
            mean,
            variance,
            lower95,
            upper95,
        })
    }

    /// Convenience wrapper for one-dimensional query grids.
    pub fn predict_1d(&self, xs: &[f64]) -> Result<Prediction, GpError> {
        self.predict(&DMatrix::from_column_slice(xs.len(), 1, xs))
    }
}

/// Errors specific to model (de)serialization.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot access `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("kernel text in model file does not parse: {0}")]
    Kernel(#[from] expr::ParseError),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Current model file schema version.
pub const MODEL_VERSION: u32 = 1;

/// On-disk JSON form of a fitted model. The kernel round-trips through its
/// text form; numbers round-trip exactly through JSON, so a reloaded model
/// reproduces predictions bit-for-bit on the same platform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub kernel: String,
    pub dim: usize,
    pub sigma2: f64,
    pub eta2: f64,
    pub noise_ratio: f64,
    pub jitter: f64,
    pub lml: f64,
    pub seed: u64,
    pub standardization: Standardization,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl FittedGP {
    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_VERSION,
            kernel: expr::format(&self.tree),
            dim: self.tree.dim(),
            sigma2: self.sigma2,
            eta2: self.eta2,
            noise_ratio: self.noise_ratio,
            jitter: self.jitter,
            lml: self.lml,
            seed: self.seed,
            standardization: self.data.standardization().clone(),
            x: (0..self.data.n())
                .map(|i| self.data.x().row(i).iter().copied().collect())
                .collect(),
            y: self.data.y().iter().copied().collect(),
        }
    }

    pub fn from_model_file(model: &ModelFile) -> Result<FittedGP, ModelError> {
        if model.version != MODEL_VERSION {
            return Err(ModelError::Version {
                found: model.version,
                expected: MODEL_VERSION,
            });
        }
        let tree = expr::parse(&model.kernel, model.dim)?;
        let n = model.y.len();
        let mut x = DMatrix::zeros(n, model.dim);
        for (i, row) in model.x.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                x[(i, j)] = *v;
            }
        }
        let y = DVector::from_vec(model.y.clone());
        let data = Dataset::with_standardization(x, y, model.standardization.clone())
            .map_err(GpError::Data)?;
        let mut gp = assemble(tree, data, model.noise_ratio, model.jitter, model.seed)?;
        // Keep the recorded lml; the factorization reproduces it anyway.
        gp.lml = model.lml;
        Ok(gp)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let json =
            serde_json::to_string_pretty(&self.to_model_file()).map_err(ModelError::Json)?;
        std::fs::write(path, json).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<FittedGP, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model: ModelFile = serde_json::from_str(&text)?;
        FittedGP::from_model_file(&model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::kernel::{KernelFamily, LeafKernel};
    use approx::assert_relative_eq;

    fn se_tree(theta: f64) -> KernelExpr {
        KernelExpr::leaf(
            LeafKernel::new(KernelFamily::SquaredExponential, 1, 1.0, vec![theta]).unwrap(),
        )
    }

    #[test]
    fn gram_examples() {
        let tree = se_tree(1.0);
        let x = DMatrix::from_column_slice(1, 1, &[0.3]);
        let k = gram(&tree, &x).unwrap();
        assert_eq!(k.shape(), (1, 1));
        assert_eq!(k[(0, 0)], 1.0);

        let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let k = gram(&tree, &x).unwrap();
        let e = (-1f64).exp();
        assert_relative_eq!(k[(0, 1)], e, max_relative = 1e-12);
        assert_eq!(k[(0, 1)], k[(1, 0)]);
        assert_eq!(k[(0, 0)], 1.0);
    }

    #[test]
    fn scalar_lml_closed_forms() {
        let tree = se_tree(1.0);
        let xs = DMatrix::from_column_slice(1, 1, &[0.0]);
        let ys = DVector::from_vec(vec![1.0]);
        let (lml, sigma2) = concentrated_lml(&tree, &xs, &ys, 0.0, 0.0).unwrap();
        assert_relative_eq!(sigma2, 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            lml,
            -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5,
            max_relative = 1e-9
        );
        assert_relative_eq!(lml, -1.4189385, epsilon = 1e-7);

        let ys = DVector::from_vec(vec![2.0]);
        let (lml, sigma2) = concentrated_lml(&tree, &xs, &ys, 0.0, 0.0).unwrap();
        assert_relative_eq!(sigma2, 4.0, max_relative = 1e-12);
        assert_relative_eq!(
            lml,
            -0.5 * (8.0 * std::f64::consts::PI).ln() - 0.5,
            max_relative = 1e-9
        );
        assert_relative_eq!(lml, -2.1120857, epsilon = 1e-7);
    }

    #[test]
    fn amplitude_is_profiled_out() {
        // For a single-leaf tree the overall scale cancels in the
        // concentrated objective, so the log-amplitude gradient vanishes.
        let tree = se_tree(1.0);
        let data = Dataset::from_xy(vec![-0.7, 0.7], vec![0.3, -0.9]).unwrap();
        let grad = lml_gradient(&tree, &data, 0.0, 0.0).unwrap();
        let layout = tree.gather();
        let idx = layout.position("0.amplitude").unwrap();
        assert!(grad[idx].abs() <= 1e-10, "amplitude gradient {}", grad[idx]);
    }

    #[test]
    fn fit_interpolates_noise_free() {
        let xs: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (0.8 * x).sin() + 0.1 * x).collect();
        let data = Dataset::from_xy(xs.clone(), ys.clone()).unwrap();
        let tree = se_tree(1.0);
        let options = FitOptions {
            restarts: 4,
            ..FitOptions::default()
        };
        let gp = fit(&tree, &data, &options).unwrap();
        let pred = gp.predict_1d(&xs).unwrap();
        for (i, &y) in ys.iter().enumerate() {
            assert_relative_eq!(pred.mean[i], y, max_relative = 1e-6, epsilon = 1e-7);
            assert!(pred.variance[i] >= 0.0);
        }
    }

    #[test]
    fn refit_is_deterministic() {
        let data = gen_wiggle(12);
        let tree = parse("SE * PERIODIC + RQ", 1).unwrap();
        let options = FitOptions {
            restarts: 3,
            seed: 9,
            ..FitOptions::default()
        };
        let a = fit(&tree, &data, &options).unwrap();
        let b = fit(&tree, &data, &options).unwrap();
        assert_eq!(a.lml().to_bits(), b.lml().to_bits());
        let la = a.tree().gather();
        let lb = b.tree().gather();
        for (va, vb) in la.values.iter().zip(&lb.values) {
            assert_eq!(va.to_bits(), vb.to_bits());
        }
    }

    #[test]
    fn fit_never_worse_than_start() {
        let data = gen_wiggle(14);
        let tree = parse("SE(theta=0.5)", 1).unwrap();
        let (initial_lml, _) = log_marginal_likelihood(&tree, &data, 0.0, DEFAULT_JITTER).unwrap();
        let gp = fit(&tree, &data, &FitOptions::default()).unwrap();
        assert!(
            gp.lml() >= initial_lml - 1e-9,
            "fitted {} vs initial {}",
            gp.lml(),
            initial_lml
        );
    }

    #[test]
    fn stationary_point_gradient_is_small() {
        let data = gen_wiggle(10);
        let tree = se_tree(1.0);
        let gp = fit(&tree, &data, &FitOptions::default()).unwrap();
        let grad = lml_gradient(gp.tree(), &data, gp.noise_ratio(), gp.jitter()).unwrap();
        let layout = gp.tree().gather();
        // Interior coordinates must be near-stationary; bound-clamped ones
        // only need the right sign (pushing outward).
        for (k, entry) in layout.entries.iter().enumerate() {
            let v = layout.values[k];
            let at_lower = (v - entry.lower).abs() <= 1e-12 * entry.lower.abs().max(1.0);
            let at_upper = (v - entry.upper).abs() <= 1e-12 * entry.upper.abs().max(1.0);
            if at_lower {
                assert!(grad[k] <= 1e-3, "{}: {}", entry.path, grad[k]);
            } else if at_upper {
                assert!(grad[k] >= -1e-3, "{}: {}", entry.path, grad[k]);
            } else {
                assert!(
                    grad[k].abs() <= 1e-3 * (1.0 + gp.lml().abs()),
                    "{}: {}",
                    entry.path,
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn far_field_reverts_to_prior() {
        let data = gen_wiggle(8);
        let tree = se_tree(1.0);
        let gp = FittedGP::from_parameters(&tree, &data, 0.0, DEFAULT_JITTER).unwrap();
        let st = data.standardization();
        let pred = gp.predict_1d(&[1e5]).unwrap();
        assert_relative_eq!(pred.mean[0], st.y_mean, max_relative = 1e-9);
        let var_std = pred.variance[0] / (st.y_std * st.y_std);
        assert_relative_eq!(var_std, gp.sigma2(), max_relative = 1e-9);

        // Variance grows monotonically along a ray leaving the data.
        let last_x = 7.0;
        let mut prev = -1.0;
        for step in 1..=5 {
            let x = last_x + step as f64 * 3.0;
            let v = gp.predict_1d(&[x]).unwrap().variance[0];
            assert!(v >= prev, "variance dipped at {x}: {v} < {prev}");
            assert!(v / (st.y_std * st.y_std) <= gp.sigma2() * (1.0 + 1e-9));
            prev = v;
        }
    }

    #[test]
    fn noise_increases_training_variance() {
        // With sigma2 held fixed ("all else fixed"), a larger noise ratio
        // cannot shrink the posterior variance at a training point.
        let data = gen_wiggle(10);
        let tree = se_tree(1.0);
        let mut prev = -1.0;
        for rho in [1e-8, 1e-4, 1e-2, 1e-1, 1.0] {
            let gp = FittedGP::from_parameters(&tree, &data, rho, DEFAULT_JITTER).unwrap();
            let pred = gp.predict_1d(&[3.0]).unwrap();
            let st = data.standardization();
            let corr_scale_var = pred.variance[0] / (st.y_std * st.y_std) / gp.sigma2();
            assert!(
                corr_scale_var >= prev - 1e-12,
                "rho {rho}: {corr_scale_var} < {prev}"
            );
            prev = corr_scale_var;
        }
    }

    #[test]
    fn optimized_noise_recovers_noisy_signal() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.4).collect();
        // Deterministic pseudo-noise, small relative to the signal.
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| x.sin() + 0.05 * ((i * 2654435761) % 1000) as f64 / 1000.0)
            .collect();
        let data = Dataset::from_xy(xs, ys).unwrap();
        let tree = se_tree(1.0);
        let options = FitOptions {
            noise: NoiseMode::optimize_default(),
            restarts: 4,
            ..FitOptions::default()
        };
        let gp = fit(&tree, &data, &options).unwrap();
        assert!(gp.eta2() > 0.0);
        assert!(gp.noise_ratio() >= DEFAULT_NOISE_BOUNDS.0);
        assert!(gp.noise_ratio() <= DEFAULT_NOISE_BOUNDS.1);
    }

    #[test]
    fn cholesky_reconstructs_correlation() {
        let data = gen_wiggle(9);
        let tree = parse("SE * PERIODIC + SE", 1).unwrap();
        let gp = FittedGP::from_parameters(&tree, &data, 1e-3, DEFAULT_JITTER).unwrap();
        let l = gp.cholesky_l();
        let reconstructed = &l * l.transpose();
        let xs = data.standardized_x();
        let mut r = gram(gp.tree(), &xs).unwrap();
        for i in 0..r.nrows() {
            r[(i, i)] += gp.noise_ratio() + gp.jitter();
        }
        let diff = (&reconstructed - &r).norm() / r.norm();
        assert!(diff <= 1e-8, "relative Frobenius error {diff}");
    }

    #[test]
    fn model_file_round_trip_is_bit_exact() {
        let data = gen_wiggle(12);
        let tree = parse("SE * PERIODIC + RQ", 1).unwrap();
        let options = FitOptions {
            restarts: 3,
            seed: 4,
            noise: NoiseMode::optimize_default(),
            ..FitOptions::default()
        };
        let gp = fit(&tree, &data, &options).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        gp.save(&path).unwrap();
        let reloaded = FittedGP::load(&path).unwrap();

        let grid: Vec<f64> = (0..40).map(|i| -2.0 + i as f64 * 0.4).collect();
        let a = gp.predict_1d(&grid).unwrap();
        let b = reloaded.predict_1d(&grid).unwrap();
        for i in 0..grid.len() {
            assert_eq!(a.mean[i].to_bits(), b.mean[i].to_bits(), "mean at {i}");
            assert_eq!(
                a.variance[i].to_bits(),
                b.variance[i].to_bits(),
                "variance at {i}"
            );
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let data = gen_wiggle(6);
        let gp = FittedGP::from_parameters(&se_tree(1.0), &data, 0.0, DEFAULT_JITTER).unwrap();
        let mut model = gp.to_model_file();
        model.version = 99;
        let err = FittedGP::from_model_file(&model).unwrap_err();
        assert!(matches!(err, ModelError::Version { found: 99, .. }));
    }

    #[test]
    fn ladder_rescues_singular_gram() {
        // Identical points make the correlation matrix exactly singular;
        // the escalating jitter has to step in.
        let tree = se_tree(1e-12);
        let xs = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 0.0]);
        let ys = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let points = matrix_rows(&xs);
        let fact = factorize(&tree, &points, &ys, 0.0, 0.0).unwrap();
        assert!(fact.jitter_used > 0.0);
    }

    #[test]
    fn predict_rejects_bad_queries() {
        let data = gen_wiggle(6);
        let gp = FittedGP::from_parameters(&se_tree(1.0), &data, 0.0, DEFAULT_JITTER).unwrap();
        assert!(gp.predict(&DMatrix::from_column_slice(1, 2, &[0.0, 1.0])).is_err());
        assert!(gp
            .predict(&DMatrix::from_column_slice(1, 1, &[f64::NAN]))
            .is_err());
    }

    /// Small smooth test series.
    fn gen_wiggle(n: usize) -> Dataset {
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (0.9 * x).sin() + 0.05 * x * x).collect();
        Dataset::from_xy(xs, ys).unwrap()
    }
}
