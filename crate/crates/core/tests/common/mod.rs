#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swift_core::harness::build_cost_random;
use swift_core::ot::{build_kernel, CostModel};
use swift_core::tensor::fold_dense;
use swift_core::{FactorSet, SparseTensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Each cell nonzero with probability `density`, values uniform on (0.1, 2).
pub fn random_tensor(shape: &[usize], density: f64, seed: u64) -> SparseTensor {
    let mut r = rng(seed);
    let n: usize = shape.iter().product();
    let dense: Vec<f64> = (0..n)
        .map(|_| if r.random_bool(density) { r.random_range(0.1..2.0) } else { 0.0 })
        .collect();
    SparseTensor::from_dense(shape.to_vec(), &dense).unwrap()
}

/// Nonnegative CP tensor whose factors are half zeros, values in (0.5, 2).
pub fn planted(shape: &[usize], rank: usize, seed: u64) -> (SparseTensor, FactorSet) {
    let mut r = rng(seed);
    let f: Vec<Array2<f64>> = shape
        .iter()
        .map(|&d| {
            Array2::from_shape_simple_fn((d, rank), || {
                if r.random_bool(0.5) {
                    r.random_range(0.5..2.0)
                } else {
                    0.0
                }
            })
        })
        .collect();
    let f = FactorSet::new(f).unwrap();
    let dense = fold_dense(f.reconstruct_mode(0).unwrap().view(), shape, 0).unwrap();
    (SparseTensor::from_dense(shape.to_vec(), &dense).unwrap(), f)
}

pub fn random_costs(shape: &[usize], rho: f64, seed: u64) -> Vec<CostModel> {
    shape
        .iter()
        .enumerate()
        .map(|(n, &d)| build_kernel(build_cost_random(d, seed + n as u64), rho).unwrap())
        .collect()
}

pub fn random_matrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(0.0..1.0))
}

pub fn max_rel_diff(a: &FactorSet, b: &FactorSet) -> f64 {
    let mut worst: f64 = 0.0;
    for (fa, fb) in a.factors().iter().zip(b.factors()) {
        for (x, y) in fa.iter().zip(fb.iter()) {
            let scale = x.abs().max(y.abs());
            if scale > 0.0 {
                worst = worst.max((x - y).abs() / scale);
            }
        }
    }
    worst
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
