//! The `run` subcommand: execute the learner, write artifacts, report
//! summary numbers.

use std::path::{Path, PathBuf};

use clap::Args;
use dalpce::benchmarks::epsilon_error;
use dalpce::learner;
use dalpce::serialize::decomposition_to_json;

use crate::config::{FileConfig, Resolved};
use crate::models::{resolve, ResolvedModel};
use crate::{csvio, CliError};

#[derive(Args)]
pub struct RunArgs {
    /// Built-in model name (toy1d, singularity2d, discontinuity) or
    /// `extern:<path>` for an executable.
    #[arg(long)]
    pub model: Option<String>,

    /// Input dimension; required for external models, optional for the
    /// discontinuity family.
    #[arg(long)]
    pub dim: Option<usize>,

    /// Discontinuity threshold for the discontinuity family.
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Total model-evaluation budget.
    #[arg(long)]
    pub budget: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory for run artifacts.
    #[arg(long)]
    pub out: Option<String>,

    /// Maximum local polynomial degree.
    #[arg(long = "p-local")]
    pub p_local: Option<usize>,

    /// Restart check period in iterations.
    #[arg(long = "n-r")]
    pub n_r: Option<usize>,

    /// Stop when the aggregated error falls below this value.
    #[arg(long = "q2-stop")]
    pub q2_stop: Option<f64>,

    /// Iteration cap.
    #[arg(long = "n-iter")]
    pub n_iter: Option<usize>,

    /// Density convention for candidate scores: local or global.
    #[arg(long)]
    pub density: Option<String>,

    /// Validation sample size for the reported error of built-in models.
    #[arg(long = "n-val")]
    pub n_val: Option<usize>,

    /// Seed of the validation sample.
    #[arg(long = "val-seed")]
    pub val_seed: Option<u64>,

    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl RunArgs {
    fn as_file_config(&self) -> FileConfig {
        FileConfig {
            model: self.model.clone(),
            dim: self.dim,
            threshold: self.threshold,
            budget: self.budget,
            seed: self.seed,
            out: self.out.clone(),
            p_local: self.p_local,
            n_r: self.n_r,
            q2_stop: self.q2_stop,
            n_cg: None,
            n_cl: None,
            n_iter: self.n_iter,
            n_sim_factor: None,
            min_edge: None,
            density: self.density.clone(),
            n_val: self.n_val,
            val_seed: self.val_seed,
        }
    }
}

pub fn execute(args: RunArgs) -> Result<(), CliError> {
    let mut layered = FileConfig::default();
    if let Some(path) = &args.config {
        layered = layered.overlay(FileConfig::load(path)?);
    }
    layered = layered.overlay(args.as_file_config());
    let resolved = Resolved::from_layers(layered)?;

    let mut model = resolve(&resolved.model, resolved.dim, resolved.threshold)?;
    let config = resolved.learner_config();
    config
        .derive(ResolvedModel::dimension(&model))
        .map_err(|e| CliError::Config(e.to_string()))?;

    let out_dir = Path::new(&resolved.out);
    std::fs::create_dir_all(out_dir)?;
    resolved.write_snapshot(out_dir)?;

    let state = learner::run(&mut model, &config)?;

    csvio::write_convergence(&out_dir.join("convergence.csv"), &state.log)?;
    csvio::write_ed(
        &out_dir.join("ed.csv"),
        &state.ed,
        state.decomposition.dimension(),
    )?;
    std::fs::write(
        out_dir.join("surrogate.json"),
        decomposition_to_json(&state.decomposition),
    )?;

    let q2_local = state.decomposition.aggregate_q2();
    println!("evaluations: {}", state.evaluations());
    println!("iterations: {}", state.iteration);
    println!("n_domains: {}", state.n_domains());
    println!("restarts: {}", state.restarts);
    println!("q2_local: {q2_local}");

    if let Some(case) = model.builtin_case() {
        let decomp = &state.decomposition;
        let eps = epsilon_error(
            |x: &[f64]| {
                decomp
                    .global_predict(x)
                    .expect("validation points are in range")
            },
            |x: &[f64]| case.eval(x),
            case.dimension,
            resolved.n_val,
            resolved.val_seed,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        println!("epsilon: {eps}");
    }
    println!("outputs: {}", out_dir.display());
    Ok(())
}
