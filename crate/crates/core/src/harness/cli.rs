//! Command-line front end. Every command that writes files also writes a
//! manifest that `replay` can re-run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::bench::benchmark_sparsity;
use super::cost::{build_cost_cosine, build_cost_one_identity, build_cost_random};
use super::experiment::{cost_matrices, cost_models, format_trace, run_with, trace_timings, CostSpec, ExperimentConfig};
use super::io::{load_factors, load_tensor, save_factors, save_matrix, save_tensor, write_text};
use super::manifest::{RunManifest, MANIFEST_FILE};
use super::noise::{inject_noise_bernoulli, inject_noise_poisson, NoiseModel};
use crate::error::{Result, SwiftError};
use crate::metrics::{reconstruction_error, wasserstein_tensor, WassersteinMode};
use crate::ot::CostModel;
use crate::solver::{fit, fit_direct, project, DenominatorScale, SolverConfig};
use crate::tensor::SparseTensor;

#[derive(Parser, Debug)]
#[command(name = "swift", version, about = "Wasserstein CP factorization of sparse nonnegative tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CostMode {
    Cosine,
    Identity,
    Random,
    Files,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Denominator {
    Stacked,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistanceMode {
    Exact,
    Entropic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CostKind {
    Cosine,
    Identity,
    Random,
}

#[derive(Args, Debug, Clone)]
pub struct CostArgs {
    #[arg(long, value_enum, default_value = "cosine")]
    pub cost_mode: CostMode,
    /// `MODE=PATH`, repeatable; used with `--cost-mode files`.
    #[arg(long = "cost-file")]
    pub cost_file: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub cost_seed: u64,
}

impl CostArgs {
    fn spec(&self, order: usize) -> Result<CostSpec> {
        Ok(match self.cost_mode {
            CostMode::Cosine => CostSpec::Cosine,
            CostMode::Identity => CostSpec::Identity,
            CostMode::Random => CostSpec::Random { seed: self.cost_seed },
            CostMode::Files => {
                let mut paths = vec![None; order];
                for item in &self.cost_file {
                    let (m, p) = item
                        .split_once('=')
                        .ok_or_else(|| SwiftError::Config(format!("expected MODE=PATH, got {item:?}")))?;
                    let m: usize = m
                        .parse()
                        .map_err(|_| SwiftError::Config(format!("bad mode in {item:?}")))?;
                    if m >= order {
                        return Err(SwiftError::ModeOutOfRange { mode: m, order });
                    }
                    paths[m] = Some(PathBuf::from(p));
                }
                CostSpec::Files { paths }
            }
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long, default_value_t = 50.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 50)]
    pub outer: usize,
    #[arg(long, default_value_t = 25)]
    pub sinkhorn: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "on")]
    pub parallel: Switch,
    #[arg(long, value_enum, default_value = "stacked")]
    pub denominator: Denominator,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rank: self.rank,
            rho: self.rho,
            lambda: self.lambda,
            outer_iters: self.outer,
            sinkhorn_iters: self.sinkhorn,
            seed: self.seed,
            parallel: self.parallel == Switch::On,
            denominator_scale: match self.denominator {
                Denominator::Stacked => DenominatorScale::Stacked,
                Denominator::Paper => DenominatorScale::Paper,
            },
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit factors to a tensor file.
    Factorize {
        #[arg(long)]
        tensor: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        costs: CostArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a new mode-0 factor against trained factors.
    Project {
        #[arg(long)]
        tensor: PathBuf,
        /// Directory with `factor_<n>.txt` files (and optionally a manifest).
        #[arg(long)]
        factors: PathBuf,
        #[command(flatten)]
        costs: CostArgs,
        #[arg(long, value_enum)]
        parallel: Option<Switch>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wasserstein distance between two tensors.
    Eval {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: DistanceMode,
        #[arg(long, value_enum, default_value = "identity")]
        cost: CostKind,
        #[arg(long, default_value_t = 0)]
        cost_seed: u64,
        #[arg(long, default_value_t = 50.0)]
        rho: f64,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        /// Rescale every column to unit mass first.
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flip randomly chosen zero cells.
    Noise {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        model: NoiseModel,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a cost matrix for one mode.
    Costmat {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        mode: usize,
        #[arg(long, value_enum, default_value = "cosine")]
        kind: CostKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit with both the unfolding solver and the Kronecker reference solver.
    CompareDirect {
        #[arg(long)]
        tensor: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        costs: CostArgs,
    },
    /// Time transport sweeps across column densities.
    Bench {
        /// Comma-separated extents, e.g. `30,30,30`.
        #[arg(long, default_value = "30,30,30")]
        shape: String,
        #[arg(long, default_value = "0.1,0.5,1.0")]
        density_grid: String,
        #[arg(long, default_value_t = 5)]
        rank: usize,
        #[arg(long, default_value_t = 25)]
        sinkhorn: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a TOML experiment description.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        parallel: Option<Switch>,
    },
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        parallel: Option<Switch>,
    },
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|w| {
            w.trim()
                .parse()
                .map_err(|_| SwiftError::Config(format!("bad {what} entry {w:?}")))
        })
        .collect()
}

fn costs_for(tensor: &SparseTensor, args: &CostArgs, config: &SolverConfig, manifest: &mut RunManifest) -> Result<Vec<CostModel>> {
    let spec = args.spec(tensor.order())?;
    if let CostSpec::Files { paths } = &spec {
        for p in paths.iter().flatten().filter(|p| p.exists()) {
            manifest.add_input(p)?;
        }
    }
    let (m, notes) = cost_matrices(tensor, &spec)?;
    manifest.notes.extend(notes);
    cost_models(&m, config)
}

fn single_cost(tensor: &SparseTensor, mode: usize, kind: CostKind, seed: u64) -> Result<ndarray::Array2<f64>> {
    let d = *tensor
        .shape()
        .get(mode)
        .ok_or(SwiftError::ModeOutOfRange { mode, order: tensor.order() })?;
    Ok(match kind {
        CostKind::Cosine => build_cost_cosine(tensor, mode)?,
        CostKind::Identity => build_cost_one_identity(d),
        CostKind::Random => build_cost_random(d, seed.wrapping_add(mode as u64)),
    })
}

fn file_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn finish_file(mut manifest: RunManifest, out: &Path) -> Result<RunManifest> {
    let base = out.parent().unwrap_or(Path::new(""));
    manifest.add_output(base, out)?;
    manifest.save(&file_manifest_path(out))?;
    Ok(manifest)
}

/// Runs one parsed command. `argv` is the argument list after the program
/// name, recorded in manifests. Returns the manifest of commands that write
/// files.
pub fn execute(cli: Cli, argv: Vec<String>) -> Result<Option<RunManifest>> {
    let mut manifest = RunManifest::new(argv);
    match cli.command {
        Command::Factorize { tensor, solver, costs, out } => {
            let config = solver.config();
            config.validate()?;
            let t = load_tensor(&tensor).map_err(|e| e.in_phase("load"))?;
            manifest.add_input(&tensor)?;
            let models = costs_for(&t, &costs, &config, &mut manifest).map_err(|e| e.in_phase("costs"))?;
            let start = Instant::now();
            let fitted = fit(&t, &models, &config).map_err(|e| e.in_phase("fit"))?;
            manifest.timings.insert("fit".into(), start.elapsed().as_secs_f64());
            let (ot, fac) = trace_timings(&fitted.trace);
            manifest.timings.insert("fit_transport".into(), ot);
            manifest.timings.insert("fit_factors".into(), fac);
            let mut written = save_factors(&out, &fitted.factors)?;
            let tp = out.join("trace.tsv");
            write_text(&tp, &format_trace(&fitted.trace))?;
            written.push(tp);
            for w in &written {
                manifest.add_output(&out, w)?;
            }
            manifest.config = Some(config);
            manifest.save(&out.join(MANIFEST_FILE))?;
            println!(
                "objective {}  relative error {:.6}  -> {}",
                fitted.trace.final_objective().unwrap_or(f64::NAN),
                reconstruction_error(&t, &fitted.factors)?,
                out.display()
            );
            Ok(Some(manifest))
        }
        Command::Project { tensor, factors, costs, parallel, out } => {
            let trained = load_factors(&factors).map_err(|e| e.in_phase("load"))?;
            for n in 0..trained.order() {
                manifest.add_input(&super::io::factor_path(&factors, n))?;
            }
            let saved = factors.join(MANIFEST_FILE);
            let mut config = if saved.exists() {
                RunManifest::load(&saved)?.config.unwrap_or_default()
            } else {
                SolverConfig::default()
            };
            config.rank = trained.rank();
            if let Some(p) = parallel {
                config.parallel = p == Switch::On;
            }
            let t = load_tensor(&tensor).map_err(|e| e.in_phase("load"))?;
            manifest.add_input(&tensor)?;
            let models = costs_for(&t, &costs, &config, &mut manifest).map_err(|e| e.in_phase("costs"))?;
            let p = project(&t, &trained, &models, &config).map_err(|e| e.in_phase("project"))?;
            let (ot, fac) = trace_timings(&p.trace);
            manifest.timings.insert("project_transport".into(), ot);
            manifest.timings.insert("project_factors".into(), fac);
            let fp = out.join("projected_factor_0.txt");
            save_matrix(&fp, &p.factor)?;
            let tp = out.join("trace.tsv");
            write_text(&tp, &format_trace(&p.trace))?;
            manifest.add_output(&out, &fp)?;
            manifest.add_output(&out, &tp)?;
            manifest.config = Some(config);
            manifest.save(&out.join(MANIFEST_FILE))?;
            println!("projected factor -> {}", fp.display());
            Ok(Some(manifest))
        }
        Command::Eval { a, b, mode, cost, cost_seed, rho, iters, normalize, out } => {
            let x = load_tensor(&a)?;
            let y = load_tensor(&b)?;
            manifest.add_input(&a)?;
            manifest.add_input(&b)?;
            let models = (0..x.order())
                .map(|n| crate::ot::build_kernel(single_cost(&x, n, cost, cost_seed)?, rho))
                .collect::<Result<Vec<_>>>()?;
            let wmode = match mode {
                DistanceMode::Exact => WassersteinMode::Exact,
                DistanceMode::Entropic => WassersteinMode::Entropic { iters },
            };
            let report = wasserstein_tensor(&x, &y, &models, wmode, normalize)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| SwiftError::Config(e.to_string()))?;
            println!("{text}");
            match out {
                Some(out) => {
                    write_text(&out, &(text + "\n"))?;
                    Ok(Some(finish_file(manifest, &out)?))
                }
                None => Ok(None),
            }
        }
        Command::Noise { tensor, model, p, seed, out } => {
            let t = load_tensor(&tensor)?;
            manifest.add_input(&tensor)?;
            let outcome = match model {
                NoiseModel::Bernoulli => inject_noise_bernoulli(&t, p, seed)?,
                NoiseModel::Poisson => inject_noise_poisson(&t, p, seed)?,
            };
            if outcome.capped {
                manifest.notes.push(format!(
                    "selection capped at {} zero cells (fewer zeros than the {} nonzeros)",
                    outcome.selected.len(),
                    t.nnz()
                ));
            }
            manifest.notes.push(format!(
                "selected {} zero cells, flipped {}",
                outcome.selected.len(),
                outcome.injected.len()
            ));
            save_tensor(&out, &outcome.tensor)?;
            println!("flipped {} of {} selected cells -> {}", outcome.injected.len(), outcome.selected.len(), out.display());
            Ok(Some(finish_file(manifest, &out)?))
        }
        Command::Costmat { tensor, mode, kind, seed, out } => {
            let t = load_tensor(&tensor)?;
            manifest.add_input(&tensor)?;
            save_matrix(&out, &single_cost(&t, mode, kind, seed)?)?;
            println!("cost matrix -> {}", out.display());
            Ok(Some(finish_file(manifest, &out)?))
        }
        Command::CompareDirect { tensor, solver, costs } => {
            let config = solver.config();
            let t = load_tensor(&tensor)?;
            let models = costs_for(&t, &costs, &config, &mut manifest)?;
            let a = fit(&t, &models, &config)?;
            let b = fit_direct(&t, &models, &config)?;
            let mut worst: f64 = 0.0;
            for (fa, fb) in a.factors.factors().iter().zip(b.factors.factors()) {
                for (x, y) in fa.iter().zip(fb.iter()) {
                    let scale = x.abs().max(y.abs());
                    if scale > 0.0 {
                        worst = worst.max((x - y).abs() / scale);
                    }
                }
            }
            println!("max relative factor discrepancy {worst:e}");
            Ok(None)
        }
        Command::Bench { shape, density_grid, rank, sinkhorn, repeats, seed, out } => {
            let shape: Vec<usize> = list(&shape, "shape")?;
            let grid: Vec<f64> = list(&density_grid, "density")?;
            let config = SolverConfig {
                rank,
                sinkhorn_iters: sinkhorn,
                seed,
                ..SolverConfig::default()
            };
            let report = benchmark_sparsity(&shape, &grid, &config, repeats)?;
            println!("density  nnz  dropped_s  full_s  speedup  sequential_s  parallel_speedup  identical");
            for r in &report.rows {
                println!(
                    "{:.3}  {}  {:.5}  {:.5}  {:.2}  {:.5}  {:.2}  {}",
                    r.column_density,
                    r.nnz,
                    r.dropped_seconds,
                    r.full_seconds,
                    r.speedup,
                    r.sequential_seconds,
                    r.parallel_speedup,
                    r.identical_factors
                );
            }
            if let Some(out) = out {
                let text = serde_json::to_string_pretty(&report)
                    .map_err(|e| SwiftError::Config(e.to_string()))?;
                write_text(&out, &(text + "\n"))?;
            }
            Ok(None)
        }
        Command::Run { config, out, parallel } => {
            let mut exp = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                exp.out = out;
            }
            if let Some(p) = parallel {
                exp.solver.parallel = p == Switch::On;
            }
            let m = run_with(&exp, manifest.command)?;
            println!("wrote {} files -> {}", m.outputs.len(), exp.out.display());
            Ok(Some(m))
        }
        Command::Replay { manifest: path, out, parallel } => {
            let old = RunManifest::load(&path)?;
            let args = replay_args(&old.command, &out, parallel)?;
            let cli = Cli::try_parse_from(std::iter::once("swift".to_string()).chain(args.clone()))
                .map_err(|e| SwiftError::Config(format!("stored command does not parse: {e}")))?;
            let new = execute(cli, args)?
                .ok_or_else(|| SwiftError::Config("stored command writes no files".into()))?;
            compare_outputs(&old, &new)?;
            println!("reproduced {} files -> {}", new.outputs.len(), out.display());
            Ok(Some(new))
        }
    }
}

/// The stored arguments with `--out` (and optionally `--parallel`) replaced.
pub fn replay_args(command: &[String], out: &Path, parallel: Option<Switch>) -> Result<Vec<String>> {
    let mut args = Vec::with_capacity(command.len() + 2);
    let mut it = command.iter();
    let mut saw_out = false;
    while let Some(a) = it.next() {
        match a.as_str() {
            "--out" => {
                it.next();
                saw_out = true;
            }
            "--parallel" if parallel.is_some() => {
                it.next();
            }
            s if s.starts_with("--out=") => saw_out = true,
            s if s.starts_with("--parallel=") && parallel.is_some() => {}
            _ => args.push(a.clone()),
        }
    }
    let sub = command.first().map(String::as_str).unwrap_or("");
    if !saw_out && sub != "run" {
        return Err(SwiftError::Config("stored command has no --out".into()));
    }
    args.push("--out".into());
    args.push(out.display().to_string());
    if let Some(p) = parallel {
        if matches!(sub, "factorize" | "project" | "run") {
            args.push("--parallel".into());
            args.push(match p {
                Switch::On => "on",
                Switch::Off => "off",
            }
            .into());
        }
    }
    Ok(args)
}

pub fn compare_outputs(old: &RunManifest, new: &RunManifest) -> Result<()> {
    if old.outputs.len() != new.outputs.len() {
        return Err(SwiftError::Config(format!(
            "replay wrote {} files, manifest lists {}",
            new.outputs.len(),
            old.outputs.len()
        )));
    }
    for (a, b) in old.outputs.iter().zip(&new.outputs) {
        if a.sha256 != b.sha256 {
            return Err(SwiftError::Config(format!(
                "{} differs from the recorded output {}",
                b.path.display(),
                a.path.display()
            )));
        }
    }
    Ok(())
}

/// Sets the global thread count from `SWIFT_THREADS`, if present.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SWIFT_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| SwiftError::Config(format!("SWIFT_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| SwiftError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = init_threads().and_then(|_| execute(cli, argv[1..].to_vec()));
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.category().exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn replay_args_replace_out_and_parallel() {
        let cmd = s(&["factorize", "--tensor", "t.txt", "--out", "a", "--parallel", "on"]);
        let args = replay_args(&cmd, Path::new("b"), Some(Switch::Off)).unwrap();
        assert_eq!(args, s(&["factorize", "--tensor", "t.txt", "--out", "b", "--parallel", "off"]));
        let cmd = s(&["noise", "--tensor", "t", "--model", "bernoulli", "--p", "0.3", "--out=x"]);
        let args = replay_args(&cmd, Path::new("y"), Some(Switch::Off)).unwrap();
        assert_eq!(&args[args.len() - 2..], &s(&["--out", "y"])[..]);
        assert!(replay_args(&s(&["eval", "--a", "x"]), Path::new("y"), None).is_err());
    }

    #[test]
    fn cli_parses_the_documented_forms() {
        let cli = Cli::try_parse_from(s(&[
            "swift", "factorize", "--tensor", "t.txt", "--rank", "3", "--cost-mode", "files",
            "--cost-file", "0=c0.txt", "--cost-file", "2=c2.txt", "--rho", "10", "--lambda", "2",
            "--outer", "5", "--sinkhorn", "7", "--seed", "9", "--parallel", "off",
            "--denominator", "paper", "--out", "o",
        ]))
        .unwrap();
        match cli.command {
            Command::Factorize { solver, costs, .. } => {
                let c = solver.config();
                assert_eq!((c.rank, c.outer_iters, c.sinkhorn_iters, c.seed), (3, 5, 7, 9));
                assert!(!c.parallel);
                assert_eq!(c.denominator_scale, DenominatorScale::Paper);
                match costs.spec(3).unwrap() {
                    CostSpec::Files { paths } => {
                        assert_eq!(paths[0], Some(PathBuf::from("c0.txt")));
                        assert_eq!(paths[1], None);
                    }
                    other => panic!("{other:?}"),
                }
            }
            other => panic!("{other:?}"),
        }
    }
}
