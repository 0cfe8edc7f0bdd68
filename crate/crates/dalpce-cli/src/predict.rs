//! The `predict` subcommand: evaluate a saved surrogate on CSV points.

use std::path::PathBuf;

use clap::Args;
use dalpce::serialize::decomposition_from_json;

use crate::{csvio, CliError};

#[derive(Args)]
pub struct PredictArgs {
    /// Saved surrogate document.
    #[arg(long)]
    pub surrogate: PathBuf,

    /// Headerless CSV of query points, one `x1,...,xM` row per line.
    #[arg(long)]
    pub points: PathBuf,

    /// Output CSV; defaults to `predictions.csv` next to the points file.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Also print aggregate moments and first-order Sobol indices.
    #[arg(long)]
    pub stats: bool,
}

pub fn execute(args: PredictArgs) -> Result<(), CliError> {
    let json = std::fs::read_to_string(&args.surrogate)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.surrogate.display())))?;
    let decomp = decomposition_from_json(&json)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.surrogate.display())))?;
    let dimension = decomp.dimension();

    let text = std::fs::read_to_string(&args.points)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.points.display())))?;
    let mut out = String::from("prediction\n");
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let point = csvio::parse_point_row(line, dimension)
            .map_err(|e| CliError::Config(format!("row {}: {e}", idx + 1)))?;
        let value = decomp
            .global_predict(&point)
            .map_err(|e| CliError::Config(format!("row {}: {e}", idx + 1)))?;
        out.push_str(&format!("{value}\n"));
    }

    let out_path = args.out.unwrap_or_else(|| {
        args.points
            .parent()
            .unwrap_or_else(|| std::path::Path::new("."))
            .join("predictions.csv")
    });
    std::fs::write(&out_path, out)?;
    println!("predictions: {}", out_path.display());

    if args.stats {
        println!("mean: {}", decomp.aggregate_mean());
        println!("variance: {}", decomp.aggregate_variance());
        println!("variance_exact: {}", decomp.exact_variance());
        let sobol = decomp.aggregate_sobol();
        for (j, s) in sobol.iter().enumerate() {
            println!("sobol_x{}: {s}", j + 1);
        }
        println!("n_domains: {}", decomp.len());
    }
    Ok(())
}
