//! The `benchmark` subcommand: replicated comparison of the adaptive learner
//! against a degree-adaptive global expansion on a built-in case.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use dalpce::benchmarks::{epsilon_error, global_pce_baseline, BenchmarkCase};
use dalpce::learner::{self, LearnerConfig};
use dalpce::polybasis::Aabb;
use dalpce::sampling::{lhs, RngStream};

use crate::{models::ResolvedModel, CliError};

/// Stream id reserved for baseline designs, distinct from the learner's.
const STREAM_BASELINE: u64 = 11;

#[derive(Args)]
pub struct BenchArgs {
    /// Built-in case: toy1d, singularity2d or discontinuity.
    pub case: String,

    /// Dimension for the discontinuity family.
    #[arg(long)]
    pub dim: Option<usize>,

    /// Threshold for the discontinuity family.
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Number of replications; seeds count up from --seed.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,

    /// Comma-separated evaluation budgets; defaults to the case's schedule.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,

    /// Base seed of the first replication.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output directory for the results table.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,

    /// Validation sample size.
    #[arg(long = "n-val", default_value_t = 1_000_000)]
    pub n_val: usize,

    /// Validation sample seed.
    #[arg(long = "val-seed", default_value_t = 10_007)]
    pub val_seed: u64,

    /// Measure wall time per run; off by default so the table is
    /// byte-reproducible.
    #[arg(long)]
    pub timing: bool,
}

struct Row {
    seed: u64,
    budget: usize,
    method: &'static str,
    epsilon: f64,
    n_domains: usize,
    restarts: usize,
    wall_ms: u64,
}

pub fn execute(args: BenchArgs) -> Result<(), CliError> {
    let case = BenchmarkCase::by_name(&args.case, args.dim, args.threshold)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let budgets = args
        .budgets
        .clone()
        .unwrap_or_else(|| case.default_budgets.clone());
    if budgets.is_empty() || args.reps == 0 {
        return Err(CliError::Config(
            "need at least one budget and one rep".into(),
        ));
    }

    let mut rows: Vec<Row> = Vec::new();
    for rep in 0..args.reps {
        let seed = args.seed + rep as u64;
        for &budget in &budgets {
            rows.push(run_learner(
                &case,
                args.dim,
                args.threshold,
                seed,
                budget,
                &args,
            )?);
            rows.push(run_baseline(&case, seed, budget, &args)?);
        }
    }

    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("bench_{}.csv", case.name));
    let mut out = String::from("seed,budget,method,epsilon,n_domains,restarts,wall_ms\n");
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.seed, r.budget, r.method, r.epsilon, r.n_domains, r.restarts, r.wall_ms
        )
        .expect("string writes cannot fail");
    }
    std::fs::write(&path, out)?;
    println!("table: {}", path.display());

    for method in ["dal-pce", "global-pce"] {
        for &budget in &budgets {
            let eps: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.budget == budget)
                .map(|r| r.epsilon)
                .collect();
            let (median, log_mean, log_sigma) = summarize(&eps);
            println!(
                "summary case={} method={method} budget={budget} median_eps={median} \
                 log10_mean={log_mean} log10_sigma={log_sigma}",
                case.name
            );
        }
    }
    Ok(())
}

fn run_learner(
    case: &BenchmarkCase,
    dim: Option<usize>,
    threshold: Option<f64>,
    seed: u64,
    budget: usize,
    args: &BenchArgs,
) -> Result<Row, CliError> {
    let mut model = ResolvedModel::Builtin(
        BenchmarkCase::by_name(&args.case, dim, threshold)
            .map_err(|e| CliError::Config(e.to_string()))?,
    );
    let config = LearnerConfig {
        budget,
        seed,
        ..LearnerConfig::default()
    };
    let started = Instant::now();
    let state = learner::run(&mut model, &config)?;
    let wall_ms = if args.timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    let decomp = &state.decomposition;
    let epsilon = epsilon_error(
        |x: &[f64]| {
            decomp
                .global_predict(x)
                .expect("validation points are in range")
        },
        |x: &[f64]| case.eval(x),
        case.dimension,
        args.n_val,
        args.val_seed,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Row {
        seed,
        budget,
        method: "dal-pce",
        epsilon,
        n_domains: state.n_domains(),
        restarts: state.restarts,
        wall_ms,
    })
}

fn run_baseline(
    case: &BenchmarkCase,
    seed: u64,
    budget: usize,
    args: &BenchArgs,
) -> Result<Row, CliError> {
    let started = Instant::now();
    let mut rng = RngStream::new(seed, STREAM_BASELINE);
    let points = lhs(budget, &Aabb::unit(case.dimension), &mut rng);
    let outputs: Vec<f64> = points.iter().map(|p| case.eval(p)).collect();
    let baseline = global_pce_baseline(&points, &outputs, (5, 25), 1_000_000)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let wall_ms = if args.timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    let epsilon = epsilon_error(
        |x: &[f64]| baseline.predict(x).expect("validation points are in range"),
        |x: &[f64]| case.eval(x),
        case.dimension,
        args.n_val,
        args.val_seed,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Row {
        seed,
        budget,
        method: "global-pce",
        epsilon,
        n_domains: 1,
        restarts: 0,
        wall_ms,
    })
}

/// Median plus mean and standard deviation of log10(epsilon).
fn summarize(eps: &[f64]) -> (f64, f64, f64) {
    let mut sorted = eps.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("epsilon is never NaN"));
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let logs: Vec<f64> = sorted.iter().map(|e| e.max(1e-300).log10()).collect();
    let mean = logs.iter().sum::<f64>() / n as f64;
    let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n as f64;
    (median, mean, var.sqrt())
}
