//! Noise injection into the zero cells of a tensor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwiftError};
use crate::tensor::{multi_index, SparseTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// Selected zeros become one.
    Bernoulli,
    /// Selected zeros become an integer uniform on `[1, max]`.
    Poisson,
}

impl std::str::FromStr for NoiseModel {
    type Err = SwiftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(NoiseModel::Bernoulli),
            "poisson" => Ok(NoiseModel::Poisson),
            other => Err(SwiftError::Config(format!("unknown noise model {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseOutcome {
    pub tensor: SparseTensor,
    /// Linear indices of the selected zero cells, ascending.
    pub selected: Vec<usize>,
    /// Values written into the flipped cells, keyed by linear index.
    pub injected: Vec<(usize, f64)>,
    /// True when fewer zeros than nonzeros were available.
    pub capped: bool,
}

/// Uniform sample of `k` zero cells by reservoir sampling over the implicit
/// zero set.
fn sample_zeros(tensor: &SparseTensor, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let stored = tensor.linear_indices();
    let mut reservoir = Vec::with_capacity(k);
    let mut seen = 0usize;
    let mut next_stored = 0;
    for lin in 0..tensor.numel() {
        if next_stored < stored.len() && stored[next_stored] == lin {
            next_stored += 1;
            continue;
        }
        if reservoir.len() < k {
            reservoir.push(lin);
        } else {
            let r = rng.random_range(0..=seen);
            if r < k {
                reservoir[r] = lin;
            }
        }
        seen += 1;
    }
    reservoir.sort_unstable();
    reservoir
}

fn inject(
    tensor: &SparseTensor,
    p: f64,
    seed: u64,
    mut value: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Result<NoiseOutcome> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SwiftError::Config(format!("probability {p} outside [0, 1]")));
    }
    let zeros = tensor.numel() - tensor.nnz();
    let budget = tensor.nnz().min(zeros);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selected = sample_zeros(tensor, budget, &mut rng);
    let mut injected = Vec::new();
    for &lin in &selected {
        if rng.random_bool(p) {
            injected.push((lin, value(&mut rng)));
        }
    }
    let mut entries: Vec<(Vec<usize>, f64)> =
        tensor.iter().map(|(idx, v)| (idx.to_vec(), v)).collect();
    entries.extend(injected.iter().map(|&(lin, v)| (multi_index(tensor.shape(), lin), v)));
    Ok(NoiseOutcome {
        tensor: SparseTensor::new(tensor.shape().to_vec(), entries)?,
        selected,
        injected,
        capped: zeros < tensor.nnz(),
    })
}

/// Selects `min(nnz, #zeros)` zero cells uniformly and sets each to one with
/// probability `p`.
pub fn inject_noise_bernoulli(tensor: &SparseTensor, p: f64, seed: u64) -> Result<NoiseOutcome> {
    if !tensor.is_binary() {
        return Err(SwiftError::InvalidValue {
            index: Vec::new(),
            value: tensor.max_value(),
            reason: "Bernoulli noise needs a binary tensor",
        });
    }
    inject(tensor, p, seed, |_| 1.0)
}

/// Like [`inject_noise_bernoulli`], but each flipped cell gets an integer
/// uniform on `[1, max]` where `max` is the largest stored value.
pub fn inject_noise_poisson(tensor: &SparseTensor, p: f64, seed: u64) -> Result<NoiseOutcome> {
    if tensor.nnz() == 0 {
        return Err(SwiftError::EmptyTensor);
    }
    let upper = tensor.max_value().floor().max(1.0) as u64;
    inject(tensor, p, seed, |rng| rng.random_range(1..=upper) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(shape: Vec<usize>, cells: &[usize]) -> SparseTensor {
        let entries = cells.iter().map(|&l| (multi_index(&shape, l), 1.0)).collect();
        SparseTensor::new(shape, entries).unwrap()
    }

    #[test]
    fn zero_probability_is_identity() {
        let t = binary(vec![4, 4, 4], &[0, 5, 17, 40]);
        let out = inject_noise_bernoulli(&t, 0.0, 1).unwrap();
        assert_eq!(out.tensor, t);
        assert_eq!(out.selected.len(), 4);
    }

    #[test]
    fn full_probability_flips_the_budget() {
        let t = binary(vec![4, 4, 4], &[0, 5, 17, 40]);
        let out = inject_noise_bernoulli(&t, 1.0, 2).unwrap();
        assert_eq!(out.tensor.nnz(), 8);
        for &lin in &out.selected {
            assert!(!t.linear_indices().contains(&lin));
        }
        for (idx, v) in t.iter() {
            assert_eq!(out.tensor.get(idx), v);
        }
    }

    #[test]
    fn budget_is_capped_by_available_zeros() {
        let t = binary(vec![2, 2], &[0, 1, 2]);
        let out = inject_noise_bernoulli(&t, 1.0, 0).unwrap();
        assert!(out.capped);
        assert_eq!(out.selected, vec![3]);
        assert_eq!(out.tensor.nnz(), 4);
    }

    #[test]
    fn non_binary_and_bad_probability() {
        let t = SparseTensor::new(vec![2, 2], vec![(vec![0, 0], 2.0)]).unwrap();
        assert!(inject_noise_bernoulli(&t, 0.5, 0).is_err());
        assert!(inject_noise_poisson(&t, 1.5, 0).is_err());
        assert!(inject_noise_poisson(&SparseTensor::empty(vec![2, 2]).unwrap(), 0.5, 0).is_err());
    }

    #[test]
    fn poisson_values_in_range() {
        let t = SparseTensor::new(
            vec![5, 5, 5],
            (0..30).map(|k| (multi_index(&[5, 5, 5], k * 4), 1.0 + (k % 6) as f64)).collect(),
        )
        .unwrap();
        let out = inject_noise_poisson(&t, 1.0, 9).unwrap();
        assert_eq!(out.injected.len(), 30);
        assert!(out.injected.iter().all(|&(_, v)| (1.0..=6.0).contains(&v) && v.fract() == 0.0));
    }
}
