//! Shared generators for the oracle test suites.
#![allow(dead_code)] // not every suite uses every helper

use covtree::{Dataset, KernelExpr, KernelFamily, LeafKernel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_leaf(rng: &mut ChaCha8Rng, dim: usize) -> KernelExpr {
    let family = KernelFamily::ALL[rng.random_range(0..KernelFamily::ALL.len())];
    let amplitude = rng.random_range(0.2..3.0);
    let mut params: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..2.5)).collect();
    match family {
        KernelFamily::PowerExponential => params.push(rng.random_range(0.3..2.0)),
        KernelFamily::RationalQuadratic | KernelFamily::Periodic => {
            params.push(rng.random_range(0.3..3.0))
        }
        _ => {}
    }
    KernelExpr::leaf(LeafKernel::new(family, dim, amplitude, params).unwrap())
}

pub fn random_tree(rng: &mut ChaCha8Rng, dim: usize, max_depth: usize) -> KernelExpr {
    if max_depth <= 1 || rng.random_bool(0.4) {
        return random_leaf(rng, dim);
    }
    let a = random_tree(rng, dim, max_depth - 1);
    let b = random_tree(rng, dim, max_depth - 1);
    if rng.random_bool(0.5) {
        KernelExpr::sum(a, b).unwrap()
    } else {
        KernelExpr::product(a, b).unwrap()
    }
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Dataset {
    let x: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    Dataset::new(
        nalgebra::DMatrix::from_row_slice(n, dim, &x),
        nalgebra::DVector::from_vec(y),
    )
    .unwrap()
}
