mod common;

use std::path::Path;

use swift_core::harness::experiment::{cost_matrices, run_with};
use swift_core::harness::io::{load_factors, parse_matrix, parse_tensor};
use swift_core::harness::{
    build_cost_cosine, file_digest, inject_noise_bernoulli, inject_noise_poisson, save_tensor,
    CostSpec, ExperimentConfig, RunManifest,
};
use swift_core::tensor::multi_index;
use swift_core::{ErrorCategory, SolverConfig, SparseTensor, SwiftError};

#[test]
fn cosine_costs_match_slice_loop() {
    for seed in 0..5 {
        let shape = [4, 3, 5];
        let t = common::random_tensor(&shape, 0.5, seed);
        let dense = t.to_dense();
        for n in 0..3 {
            let c = build_cost_cosine(&t, n).unwrap();
            let slice = |i: usize| -> Vec<f64> {
                (0..dense.len())
                    .filter(|&l| multi_index(&shape, l)[n] == i)
                    .map(|l| dense[l])
                    .collect()
            };
            for i in 0..shape[n] {
                assert_eq!(c[[i, i]], 0.0);
                for j in 0..shape[n] {
                    let (a, b) = (slice(i), slice(j));
                    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let want = if i == j {
                        0.0
                    } else if na * nb > 0.0 {
                        1.0 - dot / (na * nb)
                    } else {
                        1.0
                    };
                    assert!((c[[i, j]] - want).abs() < 1e-12, "mode {n} ({i},{j})");
                    assert_eq!(c[[i, j]], c[[j, i]]);
                }
            }
        }
    }
}

fn binary(shape: &[usize], density: f64, seed: u64) -> SparseTensor {
    let t = common::random_tensor(shape, density, seed);
    let entries = t.iter().map(|(i, _)| (i.to_vec(), 1.0)).collect();
    SparseTensor::new(shape.to_vec(), entries).unwrap()
}

#[test]
fn noise_only_touches_selected_zero_cells() {
    let t = binary(&[6, 5, 4], 0.2, 1);
    let out = inject_noise_bernoulli(&t, 0.5, 9).unwrap();
    assert_eq!(out.selected.len(), t.nnz());
    assert!(!out.capped);
    let stored = t.linear_indices();
    assert!(out.selected.iter().all(|l| stored.binary_search(l).is_err()));
    assert!(out.injected.iter().all(|(l, v)| out.selected.contains(l) && *v == 1.0));
    assert_eq!(out.tensor.nnz(), t.nnz() + out.injected.len());
    assert_eq!(inject_noise_bernoulli(&t, 0.5, 9).unwrap(), out);
}

#[test]
fn noise_selection_is_capped_by_zero_count() {
    let t = binary(&[4, 4, 4], 0.8, 2);
    let out = inject_noise_bernoulli(&t, 1.0, 3).unwrap();
    let zeros = t.numel() - t.nnz();
    assert!(out.capped);
    assert_eq!(out.selected.len(), zeros);
    assert_eq!(out.tensor.nnz(), t.numel());
}

#[test]
fn noise_rejects_bad_inputs() {
    let t = common::random_tensor(&[4, 4, 4], 0.3, 2);
    assert!(inject_noise_bernoulli(&t, 0.2, 0).is_err());
    assert!(inject_noise_poisson(&t, 1.5, 0).is_err());
    let empty = SparseTensor::empty(vec![3, 3]).unwrap();
    assert!(matches!(inject_noise_poisson(&empty, 0.2, 0), Err(SwiftError::EmptyTensor)));
}

#[test]
fn every_zero_cell_can_be_selected() {
    let t = binary(&[5, 4, 3], 0.5, 4);
    let mut hits = vec![0usize; t.numel()];
    for seed in 0..400 {
        for l in inject_noise_bernoulli(&t, 0.0, seed).unwrap().selected {
            hits[l] += 1;
        }
    }
    let stored = t.linear_indices();
    let zeros: Vec<usize> = (0..t.numel()).filter(|l| stored.binary_search(l).is_err()).collect();
    let expect = 400.0 * t.nnz().min(zeros.len()) as f64 / zeros.len() as f64;
    for &z in &zeros {
        let h = hits[z] as f64;
        assert!((h - expect).abs() < 6.0 * expect.sqrt(), "cell {z}: {h} vs {expect}");
    }
}

#[test]
fn parse_errors_name_the_line() {
    let err = parse_tensor("shape 2 2\n0 0 1\n\n0 3 1\n", Path::new("t.txt")).unwrap_err();
    assert!(matches!(err, SwiftError::Parse { line: 4, .. }), "{err:?}");
    let err = parse_tensor("shape 2 2\n0 0 1\n0 0 2\n", Path::new("t.txt")).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    assert!(parse_tensor("shape 2 2\n0 0 -1\n", Path::new("t")).is_err());
    assert!(parse_tensor("0 0 1\n", Path::new("t")).is_err());
    assert!(parse_matrix("1 2\n3\n", Path::new("m")).is_err());
    assert_eq!(err.category(), ErrorCategory::Input);
}

#[test]
fn missing_cost_files_fall_back_to_cosine() {
    let t = common::random_tensor(&[4, 3, 3], 0.5, 1);
    let spec = CostSpec::Files { paths: vec![Some("/nonexistent/c0.txt".into()), None, None] };
    let (m, notes) = cost_matrices(&t, &spec).unwrap();
    assert_eq!(notes.len(), 3);
    assert_eq!(m[0], build_cost_cosine(&t, 0).unwrap());
}

#[test]
fn experiment_writes_factors_projection_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let tensor = dir.path().join("t.txt");
    save_tensor(&tensor, &common::random_tensor(&[7, 4, 3], 0.5, 6)).unwrap();
    let text = "tensor = \"t.txt\"\nout = \"run\"\nholdout = 2\n\n[costs]\nkind = \"random\"\nseed = 3\n\n[solver]\nrank = 2\nouter_iters = 5\n";
    let config = ExperimentConfig::parse(text, dir.path()).unwrap();
    assert_eq!(config.out, dir.path().join("run"));
    let manifest = run_with(&config, vec!["run".into()]).unwrap();
    let out = dir.path().join("run");
    let trained = load_factors(&out).unwrap();
    assert_eq!(trained.shape(), vec![5, 4, 3]);
    assert!(out.join("projected_factor_0.txt").exists());
    assert_eq!(manifest.outputs.len(), 3 + 1 + 2);
    for d in &manifest.outputs {
        assert_eq!(file_digest(&out.join(&d.path)).unwrap(), d.sha256);
    }
    let saved = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(saved.config, Some(SolverConfig { rank: 2, outer_iters: 5, ..Default::default() }));
    assert!(ExperimentConfig::parse("tensor = \"t\"\nout = \"o\"\nbogus = 1\n", dir.path()).is_err());
}
