//! Run configuration: TOML file keys overridden by command-line flags, with
//! the resolved values snapshotted next to the outputs.

use std::path::Path;

use dalpce::learner::LearnerConfig;
use dalpce::sampling::DensityConvention;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run can configure. All fields optional; later layers win.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub dim: Option<usize>,
    pub threshold: Option<f64>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub p_local: Option<usize>,
    pub n_r: Option<usize>,
    pub q2_stop: Option<f64>,
    pub n_cg: Option<usize>,
    pub n_cl: Option<usize>,
    pub n_iter: Option<usize>,
    pub n_sim_factor: Option<f64>,
    pub min_edge: Option<f64>,
    pub density: Option<String>,
    pub n_val: Option<usize>,
    pub val_seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Overlay `other` on top of `self`; present fields in `other` win.
    pub fn overlay(mut self, other: FileConfig) -> FileConfig {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            model,
            dim,
            threshold,
            budget,
            seed,
            out,
            p_local,
            n_r,
            q2_stop,
            n_cg,
            n_cl,
            n_iter,
            n_sim_factor,
            min_edge,
            density,
            n_val,
            val_seed
        );
        self
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub model: String,
    pub dim: Option<usize>,
    pub threshold: f64,
    pub budget: usize,
    pub seed: u64,
    pub out: String,
    pub p_local: usize,
    pub n_r: usize,
    pub q2_stop: Option<f64>,
    pub n_cg: Option<usize>,
    pub n_cl: Option<usize>,
    /// `None` means unlimited; the budget is the binding stop.
    pub n_iter: Option<usize>,
    pub n_sim_factor: f64,
    pub min_edge: f64,
    pub density: String,
    pub n_val: usize,
    pub val_seed: u64,
}

impl Resolved {
    pub fn from_layers(merged: FileConfig) -> Result<Self, CliError> {
        let model = merged
            .model
            .ok_or_else(|| CliError::Config("missing required setting --model".into()))?;
        let density = merged.density.unwrap_or_else(|| "local".into());
        if density != "local" && density != "global" {
            return Err(CliError::Config(format!(
                "density must be \"local\" or \"global\", got {density:?}"
            )));
        }
        Ok(Resolved {
            model,
            dim: merged.dim,
            threshold: merged.threshold.unwrap_or(0.5),
            budget: merged.budget.unwrap_or(200),
            seed: merged.seed.unwrap_or(1),
            out: merged.out.unwrap_or_else(|| "dalpce_run".into()),
            p_local: merged.p_local.unwrap_or(2),
            n_r: merged.n_r.unwrap_or(20),
            q2_stop: merged.q2_stop,
            n_cg: merged.n_cg,
            n_cl: merged.n_cl,
            n_iter: merged.n_iter,
            n_sim_factor: merged.n_sim_factor.unwrap_or(1.5),
            min_edge: merged.min_edge.unwrap_or(1e-6),
            density,
            n_val: merged.n_val.unwrap_or(1_000_000),
            val_seed: merged.val_seed.unwrap_or(10_007),
        })
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            p_local: self.p_local,
            n_sim_factor: self.n_sim_factor,
            n_cg: self.n_cg,
            n_cl: self.n_cl,
            n_iter: self.n_iter.unwrap_or(usize::MAX),
            budget: self.budget,
            n_r: self.n_r,
            q2_stop: self.q2_stop,
            min_edge: self.min_edge,
            seed: self.seed,
            density_convention: if self.density == "global" {
                DensityConvention::Global
            } else {
                DensityConvention::Local
            },
            ..LearnerConfig::default()
        }
    }

    /// Snapshot written alongside outputs so every run directory is
    /// self-describing.
    pub fn write_snapshot(&self, dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("serializing resolved config: {e}")))?;
        std::fs::write(dir.join("config_resolved.toml"), text)?;
        Ok(())
    }
}
