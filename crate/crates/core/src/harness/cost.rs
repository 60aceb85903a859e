//! Ground-cost builders.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{matricize, SparseTensor};

/// Cosine distance between the mode-`mode` slices of `tensor`.
///
/// Slices with zero norm are at distance 1 from every other slice.
pub fn build_cost_cosine(tensor: &SparseTensor, mode: usize) -> Result<Array2<f64>> {
    let view = matricize(tensor, mode)?;
    let block = view.block();
    let gram = block.dot(&block.t());
    let n = view.rows();
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let norms = gram[[i, i]] * gram[[j, j]];
            let d = if norms > 0.0 {
                (1.0 - gram[[i, j]] / norms.sqrt()).max(0.0)
            } else {
                1.0
            };
            c[[i, j]] = d;
            c[[j, i]] = d;
        }
    }
    Ok(c)
}

/// Ones off the diagonal, zeros on it.
pub fn build_cost_one_identity(dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((dim, dim), |(i, j)| if i == j { 0.0 } else { 1.0 })
}

/// Symmetric costs drawn uniform on `(0, 1]`, then replaced by shortest-path
/// distances so the triangle inequality holds.
pub fn build_cost_random(dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in i + 1..dim {
            let v = 1.0 - rng.random::<f64>();
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    metric_closure(&c)
}

/// All-pairs shortest-path distances (Floyd-Warshall) over the complete
/// graph weighted by `c`. The result is symmetric when `c` is.
pub fn metric_closure(c: &Array2<f64>) -> Array2<f64> {
    let n = c.nrows();
    let mut d = c.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[[i, k]] + d[[k, j]];
                if via < d[[i, j]] {
                    d[[i, j]] = via;
                }
            }
        }
    }
    for i in 0..n {
        d[[i, i]] = 0.0;
        for j in i + 1..n {
            let v = d[[i, j]].min(d[[j, i]]);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{build_kernel, exact_ot, validate_cost};
    use ndarray::array;

    #[test]
    fn cosine_matches_pairwise_loop() {
        let t = SparseTensor::new(
            vec![4, 3, 2],
            vec![
                (vec![0, 0, 0], 1.0),
                (vec![0, 2, 1], 2.0),
                (vec![1, 0, 0], 3.0),
                (vec![1, 1, 1], 0.5),
                (vec![2, 2, 1], 4.0),
                (vec![3, 1, 0], 1.5),
                (vec![3, 0, 1], 2.5),
            ],
        )
        .unwrap();
        let dense = t.to_dense();
        for mode in 0..3 {
            let c = build_cost_cosine(&t, mode).unwrap();
            validate_cost(&c).unwrap();
            let n = t.shape()[mode];
            let slice = |i: usize| -> Vec<f64> {
                (0..dense.len())
                    .filter(|&l| crate::tensor::multi_index(t.shape(), l)[mode] == i)
                    .map(|l| dense[l])
                    .collect()
            };
            for i in 0..n {
                for j in 0..n {
                    let (a, b) = (slice(i), slice(j));
                    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let expected = if i == j {
                        0.0
                    } else if na == 0.0 || nb == 0.0 {
                        1.0
                    } else {
                        1.0 - dot / (na * nb)
                    };
                    assert!((c[[i, j]] - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cosine_identical_and_orthogonal_slices() {
        let t = SparseTensor::new(
            vec![3, 2],
            vec![(vec![0, 0], 1.0), (vec![1, 0], 1.0), (vec![2, 1], 1.0)],
        )
        .unwrap();
        let c = build_cost_cosine(&t, 0).unwrap();
        assert_eq!(c[[0, 1]], 0.0);
        assert_eq!(c[[0, 2]], 1.0);
    }

    #[test]
    fn one_identity_is_total_variation() {
        let c = build_cost_one_identity(2);
        assert_eq!(c, array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(exact_ot(&array![1.0, 0.0], &array![0.0, 1.0], &c).unwrap().cost, 1.0);
        assert_eq!(exact_ot(&array![0.5, 0.5], &array![0.5, 0.5], &c).unwrap().cost, 0.0);
    }

    #[test]
    fn random_cost_is_a_seeded_metric() {
        let c = build_cost_random(7, 42);
        assert_eq!(c, build_cost_random(7, 42));
        assert_ne!(c, build_cost_random(7, 43));
        build_kernel(c.clone(), 5.0).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    assert!(c[[i, j]] > 0.0 && c[[i, j]] <= 1.0);
                }
                for k in 0..7 {
                    assert!(c[[i, j]] <= c[[i, k]] + c[[k, j]]);
                }
            }
        }
    }
}
