//! Base covariance kernel families and their analytic hyperparameter
//! gradients.
//!
//! Every family is expressed in *correlation form*: the closed form equals 1
//! at zero distance, and a per-leaf `amplitude` scales it. Multi-dimensional
//! inputs use an anisotropic per-dimension product, so every family carries
//! one inverse length-scale (or frequency) per input dimension plus an
//! optional shared shape parameter.

use thiserror::Error;

/// Argument errors raised by kernel evaluation and construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },
}

fn check_dims(expected: usize, x: &[f64], y: &[f64]) -> Result<(), KernelError> {
    for got in [x.len(), y.len()] {
        if got != expected {
            return Err(KernelError::DimensionMismatch { expected, got });
        }
    }
    Ok(())
}

fn check_positive(name: &str, values: &[f64]) -> Result<(), KernelError> {
    for &v in values {
        if v <= 0.0 || !v.is_finite() {
            return Err(KernelError::InvalidParameter {
                name: name.to_string(),
                value: v,
                reason: "must be positive and finite",
            });
        }
    }
    Ok(())
}

/// The supported base kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    SquaredExponential,
    AbsoluteExponential,
    Matern32,
    Matern52,
    PowerExponential,
    RationalQuadratic,
    Periodic,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 7] = [
        KernelFamily::SquaredExponential,
        KernelFamily::AbsoluteExponential,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
        KernelFamily::PowerExponential,
        KernelFamily::RationalQuadratic,
        KernelFamily::Periodic,
    ];

    /// Canonical (upper-case) name used by the expression grammar.
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "SE",
            KernelFamily::AbsoluteExponential => "ABSEXP",
            KernelFamily::Matern32 => "MATERN32",
            KernelFamily::Matern52 => "MATERN52",
            KernelFamily::PowerExponential => "POWEXP",
            KernelFamily::RationalQuadratic => "RQ",
            KernelFamily::Periodic => "PERIODIC",
        }
    }

    /// Case-insensitive lookup by grammar name.
    pub fn from_name(name: &str) -> Option<KernelFamily> {
        let upper = name.to_ascii_uppercase();
        KernelFamily::ALL.iter().copied().find(|f| f.name() == upper)
    }

    /// Name of the per-dimension parameter in the expression grammar.
    pub fn length_param_name(&self) -> &'static str {
        match self {
            KernelFamily::RationalQuadratic | KernelFamily::Periodic => "theta_l",
            _ => "theta",
        }
    }

    /// Name of the shared parameter, if the family has one.
    pub fn shared_param_name(&self) -> Option<&'static str> {
        match self {
            KernelFamily::PowerExponential => Some("p"),
            KernelFamily::RationalQuadratic | KernelFamily::Periodic => Some("theta_k"),
            _ => None,
        }
    }

    /// Default value of the shared parameter.
    pub fn shared_param_default(&self) -> Option<f64> {
        match self {
            KernelFamily::PowerExponential => Some(2.0),
            KernelFamily::RationalQuadratic | KernelFamily::Periodic => Some(1.0),
            _ => None,
        }
    }

    /// Number of family parameters (excluding the amplitude) for inputs of
    /// dimension `dim`.
    pub fn param_arity(&self, dim: usize) -> usize {
        dim + usize::from(self.shared_param_name().is_some())
    }
}

/// Default optimization bounds for amplitudes, inverse length-scales and
/// rational-quadratic shape parameters (log-uniform search space).
pub const DEFAULT_LOG_BOUNDS: (f64, f64) = (1e-3, 1e3);
/// Default bounds for the periodic frequency parameter.
pub const PERIODIC_FREQ_BOUNDS: (f64, f64) = (1e-2, 1e2);
/// Bounds for the power-exponential exponent; values above 2 lose positive
/// semi-definiteness.
pub const EXPONENT_BOUNDS: (f64, f64) = (1e-2, 2.0);

/// Squared exponential correlation, `prod_i exp(-theta_i (x_i - y_i)^2)`.
pub fn squared_exponential(theta: &[f64], x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    check_positive("theta", theta)?;
    check_dims(theta.len(), x, y)?;
    Ok(se_corr(theta, x, y))
}

/// Absolute exponential correlation, `prod_i exp(-theta_i |x_i - y_i|)`.
pub fn absolute_exponential(theta: &[f64], x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    check_positive("theta", theta)?;
    check_dims(theta.len(), x, y)?;
    Ok(absexp_corr(theta, x, y))
}

/// Power exponential correlation, `prod_i exp(-theta_i |x_i - y_i|^p)` with
/// `p` in `(0, 2]`.
pub fn power_exponential(theta: &[f64], p: f64, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    check_positive("theta", theta)?;
    if !(p > 0.0 && p <= 2.0) {
        return Err(KernelError::InvalidParameter {
            name: "p".to_string(),
            value: p,
            reason: "exponent must lie in (0, 2]",
        });
    }
    check_dims(theta.len(), x, y)?;
    Ok(powexp_corr(theta, p, x, y))
}

/// Matern correlation of smoothness 3/2 or 5/2 (per-dimension product form).
pub fn matern(nu2: u32, theta: &[f64], x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    check_positive("theta", theta)?;
    check_dims(theta.len(), x, y)?;
    match nu2 {
        3 => Ok(matern32_corr(theta, x, y)),
        5 => Ok(matern52_corr(theta, x, y)),
        _ => Err(KernelError::InvalidParameter {
            name: "nu".to_string(),
            value: f64::from(nu2) / 2.0,
            reason: "only smoothness 3/2 and 5/2 are supported",
        }),
    }
}

/// Rational quadratic correlation,
/// `prod_i (1 + (x_i - y_i)^2 / theta_l_i)^(-theta_k)`.
pub fn rational_quadratic(
    theta_l: &[f64],
    theta_k: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64, KernelError> {
    check_positive("theta_l", theta_l)?;
    check_positive("theta_k", &[theta_k])?;
    check_dims(theta_l.len(), x, y)?;
    Ok(rq_corr(theta_l, theta_k, x, y))
}

/// Periodic correlation, `prod_i exp(-sin^2((x_i - y_i) theta_l_i) / theta_k)`.
///
/// `theta_l` acts as a frequency: the correlation is periodic in each
/// coordinate difference with period `pi / theta_l_i`.
pub fn periodic(theta_l: &[f64], theta_k: f64, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    check_positive("theta_l", theta_l)?;
    check_positive("theta_k", &[theta_k])?;
    check_dims(theta_l.len(), x, y)?;
    Ok(periodic_corr(theta_l, theta_k, x, y))
}

fn se_corr(theta: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..theta.len() {
        let d = x[i] - y[i];
        acc += theta[i] * d * d;
    }
    (-acc).exp()
}

fn absexp_corr(theta: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..theta.len() {
        acc += theta[i] * (x[i] - y[i]).abs();
    }
    (-acc).exp()
}

fn powexp_corr(theta: &[f64], p: f64, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..theta.len() {
        acc += theta[i] * (x[i] - y[i]).abs().powf(p);
    }
    (-acc).exp()
}

fn matern32_corr(theta: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut prod = 1.0;
    for i in 0..theta.len() {
        let s = 3f64.sqrt() * theta[i] * (x[i] - y[i]).abs();
        prod *= (1.0 + s) * (-s).exp();
    }
    prod
}

fn matern52_corr(theta: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut prod = 1.0;
    for i in 0..theta.len() {
        let s = 5f64.sqrt() * theta[i] * (x[i] - y[i]).abs();
        prod *= (1.0 + s + s * s / 3.0) * (-s).exp();
    }
    prod
}

fn rq_corr(theta_l: &[f64], theta_k: f64, x: &[f64], y: &[f64]) -> f64 {
    let mut prod = 1.0;
    for i in 0..theta_l.len() {
        let d = x[i] - y[i];
        prod *= (1.0 + d * d / theta_l[i]).powf(-theta_k);
    }
    prod
}

fn periodic_corr(theta_l: &[f64], theta_k: f64, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..theta_l.len() {
        let s = ((x[i] - y[i]) * theta_l[i]).sin();
        acc += s * s;
    }
    (-acc / theta_k).exp()
}

/// Distances below this are treated as zero when differentiating, so that
/// non-smooth factors (Matern, absolute/power exponential) report a zero
/// gradient on the diagonal instead of 0/0 noise.
const ZERO_DISTANCE: f64 = 1e-12;

/// A leaf kernel: one family instance with its own amplitude and parameters.
///
/// `params` stores the per-dimension parameters first (length `dim`),
/// followed by the shared parameter when the family has one.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafKernel {
    family: KernelFamily,
    dim: usize,
    amplitude: f64,
    params: Vec<f64>,
}

impl LeafKernel {
    pub fn new(
        family: KernelFamily,
        dim: usize,
        amplitude: f64,
        params: Vec<f64>,
    ) -> Result<LeafKernel, KernelError> {
        if dim == 0 {
            return Err(KernelError::InvalidParameter {
                name: "dim".to_string(),
                value: 0.0,
                reason: "input dimension must be at least 1",
            });
        }
        if params.len() != family.param_arity(dim) {
            return Err(KernelError::DimensionMismatch {
                expected: family.param_arity(dim),
                got: params.len(),
            });
        }
        check_positive("amplitude", &[amplitude])?;
        check_positive(family.length_param_name(), &params[..dim])?;
        if family == KernelFamily::PowerExponential {
            let p = params[dim];
            if !(p > 0.0 && p <= 2.0) {
                return Err(KernelError::InvalidParameter {
                    name: "p".to_string(),
                    value: p,
                    reason: "exponent must lie in (0, 2]",
                });
            }
        } else if let Some(name) = family.shared_param_name() {
            check_positive(name, &params[dim..])?;
        }
        Ok(LeafKernel {
            family,
            dim,
            amplitude,
            params,
        })
    }

    /// A leaf with amplitude 1 and all parameters at their family defaults.
    pub fn with_defaults(family: KernelFamily, dim: usize) -> LeafKernel {
        let mut params = vec![1.0; dim];
        if let Some(v) = family.shared_param_default() {
            params.push(v);
        }
        LeafKernel::new(family, dim, 1.0, params).expect("defaults are valid")
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Per-dimension parameters (inverse length-scales or frequencies).
    pub fn lengths(&self) -> &[f64] {
        &self.params[..self.dim]
    }

    /// Shared parameter (`theta_k` or `p`), when the family has one.
    pub fn shared(&self) -> Option<f64> {
        self.params.get(self.dim).copied()
    }

    /// Total number of tunable parameters, amplitude included.
    pub fn param_count(&self) -> usize {
        1 + self.params.len()
    }

    /// The kernel value `amplitude * correlation(x, y)`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        check_dims(self.dim, x, y)?;
        Ok(self.value_unchecked(x, y))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.amplitude * self.correlation(x, y)
    }

    fn correlation(&self, x: &[f64], y: &[f64]) -> f64 {
        let lengths = &self.params[..self.dim];
        match self.family {
            KernelFamily::SquaredExponential => se_corr(lengths, x, y),
            KernelFamily::AbsoluteExponential => absexp_corr(lengths, x, y),
            KernelFamily::Matern32 => matern32_corr(lengths, x, y),
            KernelFamily::Matern52 => matern52_corr(lengths, x, y),
            KernelFamily::PowerExponential => powexp_corr(lengths, self.params[self.dim], x, y),
            KernelFamily::RationalQuadratic => rq_corr(lengths, self.params[self.dim], x, y),
            KernelFamily::Periodic => periodic_corr(lengths, self.params[self.dim], x, y),
        }
    }

    /// Gradient of the kernel value with respect to every parameter, ordered
    /// `[amplitude, lengths.., shared]`.
    pub fn param_gradient(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, KernelError> {
        check_dims(self.dim, x, y)?;
        let mut grad = vec![0.0; self.param_count()];
        self.value_and_gradient_unchecked(x, y, &mut grad);
        Ok(grad)
    }

    /// Fills `grad` (length `param_count`) and returns the kernel value.
    pub(crate) fn value_and_gradient_unchecked(
        &self,
        x: &[f64],
        y: &[f64],
        grad: &mut [f64],
    ) -> f64 {
        debug_assert_eq!(grad.len(), self.param_count());
        let corr = self.correlation(x, y);
        let value = self.amplitude * corr;
        grad[0] = corr; // d(a * corr)/da
        let lengths = &self.params[..self.dim];
        let d = self.dim;
        // Each per-dimension entry is value * d(log factor_i)/d(theta_i);
        // the log-derivative keeps the product structure out of the way.
        match self.family {
            KernelFamily::SquaredExponential => {
                for i in 0..d {
                    let r = x[i] - y[i];
                    grad[1 + i] = -r * r * value;
                }
            }
            KernelFamily::AbsoluteExponential => {
                for i in 0..d {
                    grad[1 + i] = -(x[i] - y[i]).abs() * value;
                }
            }
            KernelFamily::PowerExponential => {
                let p = self.params[d];
                let mut dp = 0.0;
                for i in 0..d {
                    let r = (x[i] - y[i]).abs();
                    if r < ZERO_DISTANCE {
                        grad[1 + i] = 0.0;
                        continue;
                    }
                    let rp = r.powf(p);
                    grad[1 + i] = -rp * value;
                    dp -= lengths[i] * rp * r.ln();
                }
                grad[1 + d] = dp * value;
            }
            KernelFamily::Matern32 => {
                for i in 0..d {
                    let r = (x[i] - y[i]).abs();
                    if r < ZERO_DISTANCE {
                        grad[1 + i] = 0.0;
                        continue;
                    }
                    let s = 3f64.sqrt() * lengths[i] * r;
                    grad[1 + i] = -(3.0 * lengths[i] * r * r) / (1.0 + s) * value;
                }
            }
            KernelFamily::Matern52 => {
                for i in 0..d {
                    let r = (x[i] - y[i]).abs();
                    if r < ZERO_DISTANCE {
                        grad[1 + i] = 0.0;
                        continue;
                    }
                    let s = 5f64.sqrt() * lengths[i] * r;
                    let poly = 1.0 + s + s * s / 3.0;
                    grad[1 + i] = -(5.0 * lengths[i] * r * r / 3.0) * (1.0 + s) / poly * value;
                }
            }
            KernelFamily::RationalQuadratic => {
                let theta_k = self.params[d];
                let mut dk = 0.0;
                for i in 0..d {
                    let r2 = (x[i] - y[i]) * (x[i] - y[i]);
                    let u = 1.0 + r2 / lengths[i];
                    grad[1 + i] = theta_k * r2 / (lengths[i] * lengths[i] * u) * value;
                    dk -= u.ln();
                }
                grad[1 + d] = dk * value;
            }
            KernelFamily::Periodic => {
                let theta_k = self.params[d];
                let mut dk = 0.0;
                for i in 0..d {
                    let r = x[i] - y[i];
                    let s = (r * lengths[i]).sin();
                    grad[1 + i] = -r * (2.0 * r * lengths[i]).sin() / theta_k * value;
                    dk += s * s;
                }
                grad[1 + d] = dk / (theta_k * theta_k) * value;
            }
        }
        value
    }

    /// Rebuilds the leaf with new parameter values in gradient order.
    pub(crate) fn with_values(&self, values: &[f64]) -> Result<LeafKernel, KernelError> {
        if values.len() != self.param_count() {
            return Err(KernelError::DimensionMismatch {
                expected: self.param_count(),
                got: values.len(),
            });
        }
        LeafKernel::new(self.family, self.dim, values[0], values[1..].to_vec())
    }
}
