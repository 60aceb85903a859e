//! File formats, cost builders, noise injection, experiments, manifests,
//! benchmarks and the command-line front end.

pub mod bench;
pub mod cli;
pub mod cost;
pub mod experiment;
pub mod io;
pub mod manifest;
pub mod noise;

pub use bench::{benchmark_sparsity, BenchReport, BenchRow};
pub use cost::{build_cost_cosine, build_cost_one_identity, build_cost_random, metric_closure};
pub use experiment::{run_experiment, CostSpec, ExperimentConfig};
pub use io::{load_factors, load_matrix, load_tensor, save_factors, save_matrix, save_tensor};
pub use manifest::{file_digest, FileDigest, RunManifest};
pub use noise::{inject_noise_bernoulli, inject_noise_poisson, NoiseModel, NoiseOutcome};
