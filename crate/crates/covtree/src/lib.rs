//! Gaussian process regression built around a composable covariance kernel
//! algebra.
//!
//! Base kernels ([`kernel`]) combine by sum and product into expression
//! trees ([`algebra`]) with analytic hyperparameter gradients. Trees can be
//! written and parsed in a small textual grammar ([`expr`]), fitted to data
//! by maximizing the concentrated log marginal likelihood ([`gp`]), and
//! used for posterior prediction and time-series extrapolation.
//!
//! ```
//! use covtree::{expr, fit, Dataset, FitOptions};
//!
//! let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
//! let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
//! let data = Dataset::from_xy(xs, ys)?;
//!
//! let kernel = expr::parse("SE * PERIODIC", 1)?;
//! let gp = fit(&kernel, &data, &FitOptions::default())?;
//! let forecast = gp.predict_1d(&[10.25])?;
//! assert!(forecast.variance[0] >= 0.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod algebra;
pub mod data;
pub mod expr;
pub mod gp;
pub mod kernel;
pub mod metrics;
pub mod optimize;

pub use algebra::{HyperparameterLayout, KernelExpr, LayoutEntry, Transform};
pub use data::{ColumnSel, DataError, Dataset, Standardization};
pub use expr::ParseError;
pub use gp::{
    concentrated_lml, fit, gram, log_marginal_likelihood, lml_gradient, FitOptions, FittedGP,
    GpError, ModelError, ModelFile, NoiseMode, Prediction, DEFAULT_JITTER, MODEL_VERSION,
};
pub use kernel::{KernelError, KernelFamily, LeafKernel};
pub use metrics::{lag_autocorrelation, score, EvalMetrics};
