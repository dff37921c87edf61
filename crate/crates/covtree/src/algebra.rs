//! Composite kernels as expression trees closed under sum and product.
//!
//! A [`KernelExpr`] is a strict binary tree whose leaves are
//! [`LeafKernel`]s. Sums and products of positive semi-definite kernels stay
//! positive semi-definite, so every tree is itself a valid kernel. Each leaf
//! owns its parameters; [`KernelExpr::gather`] flattens them into a single
//! bounded vector for the optimizer and [`KernelExpr::scatter`] writes a
//! vector back into a structurally identical tree.

use crate::kernel::{
    KernelError, KernelFamily, LeafKernel, DEFAULT_LOG_BOUNDS, EXPONENT_BOUNDS,
    PERIODIC_FREQ_BOUNDS,
};

/// A kernel expression: a leaf, or the pointwise sum/product of two
/// subtrees over the same input dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelExpr {
    Leaf(LeafKernel),
    Sum(Box<KernelExpr>, Box<KernelExpr>),
    Product(Box<KernelExpr>, Box<KernelExpr>),
}

/// How a parameter is presented to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Optimized as `ln(value)`; keeps the parameter positive.
    Log,
    /// Optimized as-is (the power-exponential exponent).
    Identity,
}

/// One flattened parameter: a stable path, box bounds and its transform.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutEntry {
    /// `"<leaf index>.<param name>"`, leaf indices in pre-order.
    pub path: String,
    pub lower: f64,
    pub upper: f64,
    pub transform: Transform,
}

/// The flattened, namespaced parameter vector of a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperparameterLayout {
    pub entries: Vec<LayoutEntry>,
    /// Untransformed values aligned with `entries`.
    pub values: Vec<f64>,
}

impl HyperparameterLayout {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, path: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.path == path)
    }
}

impl KernelExpr {
    pub fn leaf(leaf: LeafKernel) -> KernelExpr {
        KernelExpr::Leaf(leaf)
    }

    /// Pointwise sum of two kernels over the same input dimension.
    pub fn sum(a: KernelExpr, b: KernelExpr) -> Result<KernelExpr, KernelError> {
        if a.dim() != b.dim() {
            return Err(KernelError::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        Ok(KernelExpr::Sum(Box::new(a), Box::new(b)))
    }

    /// Pointwise product of two kernels over the same input dimension.
    pub fn product(a: KernelExpr, b: KernelExpr) -> Result<KernelExpr, KernelError> {
        if a.dim() != b.dim() {
            return Err(KernelError::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        Ok(KernelExpr::Product(Box::new(a), Box::new(b)))
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelExpr::Leaf(l) => l.dim(),
            KernelExpr::Sum(a, _) | KernelExpr::Product(a, _) => a.dim(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            KernelExpr::Leaf(_) => 1,
            KernelExpr::Sum(a, b) | KernelExpr::Product(a, b) => a.leaf_count() + b.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            KernelExpr::Leaf(_) => 1,
            KernelExpr::Sum(a, b) | KernelExpr::Product(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Leaves in pre-order (the order `gather` flattens them).
    pub fn leaves(&self) -> Vec<&LeafKernel> {
        let mut out = Vec::with_capacity(self.leaf_count());
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a LeafKernel>) {
        match self {
            KernelExpr::Leaf(l) => out.push(l),
            KernelExpr::Sum(a, b) | KernelExpr::Product(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    /// Total number of tunable parameters over all leaves.
    pub fn param_count(&self) -> usize {
        match self {
            KernelExpr::Leaf(l) => l.param_count(),
            KernelExpr::Sum(a, b) | KernelExpr::Product(a, b) => a.param_count() + b.param_count(),
        }
    }

    /// Evaluates the tree at a pair of points.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        let dim = self.dim();
        for got in [x.len(), y.len()] {
            if got != dim {
                return Err(KernelError::DimensionMismatch { expected: dim, got });
            }
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelExpr::Leaf(l) => l.value_unchecked(x, y),
            KernelExpr::Sum(a, b) => a.eval_unchecked(x, y) + b.eval_unchecked(x, y),
            KernelExpr::Product(a, b) => a.eval_unchecked(x, y) * b.eval_unchecked(x, y),
        }
    }

    /// Tree value and its gradient with respect to the flattened,
    /// untransformed parameter vector (same order as [`KernelExpr::gather`]).
    pub fn value_and_gradient(&self, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>), KernelError> {
        let dim = self.dim();
        for got in [x.len(), y.len()] {
            if got != dim {
                return Err(KernelError::DimensionMismatch { expected: dim, got });
            }
        }
        let mut grad = vec![0.0; self.param_count()];
        let value = self.value_and_gradient_into(x, y, &mut grad);
        Ok((value, grad))
    }

    /// Sum rule concatenates child gradients; product rule cross-scales them.
    pub(crate) fn value_and_gradient_into(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            KernelExpr::Leaf(l) => l.value_and_gradient_unchecked(x, y, grad),
            KernelExpr::Sum(a, b) => {
                let (ga, gb) = grad.split_at_mut(a.param_count());
                a.value_and_gradient_into(x, y, ga) + b.value_and_gradient_into(x, y, gb)
            }
            KernelExpr::Product(a, b) => {
                let (ga, gb) = grad.split_at_mut(a.param_count());
                let va = a.value_and_gradient_into(x, y, ga);
                let vb = b.value_and_gradient_into(x, y, gb);
                for g in ga.iter_mut() {
                    *g *= vb;
                }
                for g in gb.iter_mut() {
                    *g *= va;
                }
                va * vb
            }
        }
    }

    /// Flattens every leaf parameter into a deterministic pre-order layout.
    ///
    /// Default bounds are widened where a declared value already lies
    /// outside them, so the layout invariant (every value within bounds)
    /// holds by construction.
    pub fn gather(&self) -> HyperparameterLayout {
        let mut entries = Vec::with_capacity(self.param_count());
        let mut values = Vec::with_capacity(self.param_count());
        for (idx, leaf) in self.leaves().into_iter().enumerate() {
            let family = leaf.family();
            push_entry(
                &mut entries,
                &mut values,
                format!("{idx}.amplitude"),
                leaf.amplitude(),
                DEFAULT_LOG_BOUNDS,
                Transform::Log,
            );
            let length_bounds = if family == KernelFamily::Periodic {
                PERIODIC_FREQ_BOUNDS
            } else {
                DEFAULT_LOG_BOUNDS
            };
            let name = family.length_param_name();
            for (i, &v) in leaf.lengths().iter().enumerate() {
                push_entry(
                    &mut entries,
                    &mut values,
                    format!("{idx}.{name}[{i}]"),
                    v,
                    length_bounds,
                    Transform::Log,
                );
            }
            if let Some(shared) = leaf.shared() {
                let (bounds, transform) = if family == KernelFamily::PowerExponential {
                    (EXPONENT_BOUNDS, Transform::Identity)
                } else {
                    (DEFAULT_LOG_BOUNDS, Transform::Log)
                };
                let name = family.shared_param_name().expect("has shared param");
                push_entry(
                    &mut entries,
                    &mut values,
                    format!("{idx}.{name}"),
                    shared,
                    bounds,
                    transform,
                );
            }
        }
        HyperparameterLayout { entries, values }
    }

    /// Writes a layout's values back into a structurally identical tree.
    pub fn scatter(&self, layout: &HyperparameterLayout) -> Result<KernelExpr, KernelError> {
        let own = self.gather();
        if own.entries.len() != layout.entries.len()
            || own
                .entries
                .iter()
                .zip(&layout.entries)
                .any(|(a, b)| a.path != b.path)
        {
            return Err(KernelError::DimensionMismatch {
                expected: own.entries.len(),
                got: layout.entries.len(),
            });
        }
        self.with_values(&layout.values)
    }

    /// Rebuilds the tree with new untransformed parameter values in layout
    /// order.
    pub fn with_values(&self, values: &[f64]) -> Result<KernelExpr, KernelError> {
        if values.len() != self.param_count() {
            return Err(KernelError::DimensionMismatch {
                expected: self.param_count(),
                got: values.len(),
            });
        }
        self.with_values_inner(values)
    }

    fn with_values_inner(&self, values: &[f64]) -> Result<KernelExpr, KernelError> {
        match self {
            KernelExpr::Leaf(l) => Ok(KernelExpr::Leaf(l.with_values(values)?)),
            KernelExpr::Sum(a, b) => {
                let (va, vb) = values.split_at(a.param_count());
                Ok(KernelExpr::Sum(
                    Box::new(a.with_values_inner(va)?),
                    Box::new(b.with_values_inner(vb)?),
                ))
            }
            KernelExpr::Product(a, b) => {
                let (va, vb) = values.split_at(a.param_count());
                Ok(KernelExpr::Product(
                    Box::new(a.with_values_inner(va)?),
                    Box::new(b.with_values_inner(vb)?),
                ))
            }
        }
    }
}

fn push_entry(
    entries: &mut Vec<LayoutEntry>,
    values: &mut Vec<f64>,
    path: String,
    value: f64,
    default_bounds: (f64, f64),
    transform: Transform,
) {
    entries.push(LayoutEntry {
        path,
        lower: default_bounds.0.min(value),
        upper: default_bounds.1.max(value),
        transform,
    });
    values.push(value);
}
