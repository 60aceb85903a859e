//! Config-driven runs: load, build costs, fit, optionally project a held-out
//! slab, and write everything with a manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::cost::{build_cost_cosine, build_cost_one_identity, build_cost_random};
use super::io::{load_matrix, load_tensor, read_text, save_factors, save_matrix, write_text};
use super::manifest::{RunManifest, MANIFEST_FILE};
use crate::error::{Result, SwiftError};
use crate::ot::{build_kernel_with_floor, CostModel};
use crate::solver::{fit, project, FitTrace, SolverConfig};
use crate::tensor::SparseTensor;

/// Where per-mode ground costs come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum CostSpec {
    /// Cosine distance between slices of the input tensor.
    #[default]
    Cosine,
    /// Ones off the diagonal.
    Identity,
    /// Seeded random metric; mode `n` uses `seed + n`.
    Random { seed: u64 },
    /// One dense matrix file per mode; missing entries fall back to cosine.
    Files { paths: Vec<Option<PathBuf>> },
}

/// Raw cost matrices for every mode, with notes on how each was obtained.
pub fn cost_matrices(tensor: &SparseTensor, spec: &CostSpec) -> Result<(Vec<Array2<f64>>, Vec<String>)> {
    let mut notes = Vec::new();
    let mut out = Vec::with_capacity(tensor.order());
    for (n, &d) in tensor.shape().iter().enumerate() {
        let c = match spec {
            CostSpec::Cosine => build_cost_cosine(tensor, n)?,
            CostSpec::Identity => build_cost_one_identity(d),
            CostSpec::Random { seed } => build_cost_random(d, seed.wrapping_add(n as u64)),
            CostSpec::Files { paths } => match paths.get(n).cloned().flatten() {
                Some(p) if p.exists() => {
                    let c = load_matrix(&p)?;
                    if c.dim() != (d, d) {
                        return Err(SwiftError::Cost(format!(
                            "{} is {:?}, mode {n} needs {d}x{d}",
                            p.display(),
                            c.dim()
                        )));
                    }
                    c
                }
                missing => {
                    let msg = match missing {
                        Some(p) => format!("cost file {} not found; mode {n} uses cosine costs", p.display()),
                        None => format!("no cost file for mode {n}; using cosine costs"),
                    };
                    log::info!("{msg}");
                    notes.push(msg);
                    build_cost_cosine(tensor, n)?
                }
            },
        };
        out.push(c);
    }
    Ok((out, notes))
}

pub fn cost_models(matrices: &[Array2<f64>], config: &SolverConfig) -> Result<Vec<CostModel>> {
    matrices
        .iter()
        .map(|c| build_kernel_with_floor(c.clone(), config.rho, config.floor_k))
        .collect()
}

/// Tab-separated objective trace without timings, so reruns are byte-identical.
pub fn format_trace(trace: &FitTrace) -> String {
    let mut out = String::from(
        "iteration\ttotal\ttransport_cost\tentropy\treconstruction_kl\tdata_kl\tguard_extra_iters\tguard_fallbacks\tfloored\n",
    );
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    for r in &trace.records {
        let p = r.parts;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.iteration,
            opt(r.total),
            opt(p.map(|p| p.transport_cost)),
            opt(p.map(|p| p.entropy)),
            opt(p.map(|p| p.reconstruction_kl)),
            opt(p.map(|p| p.data_kl)),
            r.guard_extra_iters,
            r.guard_fallbacks,
            r.floored
        )
        .unwrap();
    }
    out
}

/// Total seconds spent in the transport and factor phases.
pub fn trace_timings(trace: &FitTrace) -> (f64, f64) {
    trace.records.iter().fold((0.0, 0.0), |(a, b), r| {
        (a + r.ot_seconds, b + r.factor_seconds)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tensor: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub costs: CostSpec,
    /// Number of trailing mode-0 slices held out and projected after fitting.
    #[serde(default)]
    pub holdout: usize,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c: ExperimentConfig =
            toml::from_str(text).map_err(|e| SwiftError::Config(format!("experiment config: {e}")))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut c.tensor);
        fix(&mut c.out);
        if let CostSpec::Files { paths } = &mut c.costs {
            paths.iter_mut().flatten().for_each(fix);
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&read_text(path)?, base)
    }
}

/// Runs a fit (and optional projection) and writes factors, traces and a
/// manifest into `config.out`.
pub fn run_with(config: &ExperimentConfig, command: Vec<String>) -> Result<RunManifest> {
    let mut manifest = RunManifest::new(command);
    manifest.config = Some(config.solver.clone());
    let phase = |name: &'static str| move |e: SwiftError| e.in_phase(name);

    let t = Instant::now();
    let tensor = load_tensor(&config.tensor).map_err(phase("load"))?;
    manifest.add_input(&config.tensor)?;
    if let CostSpec::Files { paths } = &config.costs {
        for p in paths.iter().flatten().filter(|p| p.exists()) {
            manifest.add_input(p)?;
        }
    }
    manifest.timings.insert("load".into(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let (matrices, notes) = cost_matrices(&tensor, &config.costs).map_err(phase("costs"))?;
    manifest.notes.extend(notes);
    let i0 = tensor.shape()[0];
    if config.holdout >= i0 {
        return Err(SwiftError::Config(format!(
            "holdout {} leaves no training slices out of {i0}",
            config.holdout
        )));
    }
    let split = i0 - config.holdout;
    let train = if config.holdout > 0 {
        tensor.slab(0, 0..split)?
    } else {
        tensor.clone()
    };
    let mut train_costs = matrices.clone();
    train_costs[0] = matrices[0].slice(s![..split, ..split]).to_owned();
    let models = cost_models(&train_costs, &config.solver).map_err(phase("costs"))?;
    manifest.timings.insert("costs".into(), t.elapsed().as_secs_f64());

    let out = fit(&train, &models, &config.solver).map_err(phase("fit"))?;
    let (ot, fac) = trace_timings(&out.trace);
    manifest.timings.insert("fit_transport".into(), ot);
    manifest.timings.insert("fit_factors".into(), fac);

    let mut written = save_factors(&config.out, &out.factors)?;
    let trace_path = config.out.join("trace.tsv");
    write_text(&trace_path, &format_trace(&out.trace))?;
    written.push(trace_path);

    if config.holdout > 0 {
        let held = tensor.slab(0, split..i0)?;
        let mut held_costs = matrices;
        held_costs[0] = held_costs[0].slice(s![split.., split..]).to_owned();
        let held_models = cost_models(&held_costs, &config.solver)?;
        let p = project(&held, &out.factors, &held_models, &config.solver).map_err(phase("project"))?;
        let (ot, fac) = trace_timings(&p.trace);
        manifest.timings.insert("project_transport".into(), ot);
        manifest.timings.insert("project_factors".into(), fac);
        let fp = config.out.join("projected_factor_0.txt");
        save_matrix(&fp, &p.factor)?;
        written.push(fp);
        let tp = config.out.join("projection_trace.tsv");
        write_text(&tp, &format_trace(&p.trace))?;
        written.push(tp);
    }
    for w in &written {
        manifest.add_output(&config.out, w)?;
    }
    manifest.save(&config.out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Loads a TOML experiment description and runs it.
pub fn run_experiment(config_path: &Path) -> Result<RunManifest> {
    let config = ExperimentConfig::load(config_path)?;
    run_with(
        &config,
        vec!["run".into(), "--config".into(), config_path.display().to_string()],
    )
}
