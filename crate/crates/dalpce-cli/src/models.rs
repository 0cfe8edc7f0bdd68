//! Model resolution: built-in benchmark functions or an external executable
//! speaking the line protocol on stdin/stdout.

use std::io::Write;
use std::process::{Command, Stdio};

use dalpce::benchmarks::BenchmarkCase;
use dalpce::learner::{Model, ModelError};
use dalpce::Point;

use crate::CliError;

pub enum ResolvedModel {
    Builtin(BenchmarkCase),
    External(ExternalModel),
}

impl ResolvedModel {
    pub fn dimension(&self) -> usize {
        match self {
            ResolvedModel::Builtin(case) => case.dimension,
            ResolvedModel::External(ext) => ext.dimension,
        }
    }

    pub fn builtin_case(&self) -> Option<&BenchmarkCase> {
        match self {
            ResolvedModel::Builtin(case) => Some(case),
            ResolvedModel::External(_) => None,
        }
    }
}

/// Parse a `--model` value: a built-in name or `extern:<path>`.
pub fn resolve(spec: &str, dim: Option<usize>, threshold: f64) -> Result<ResolvedModel, CliError> {
    if let Some(path) = spec.strip_prefix("extern:") {
        let dimension =
            dim.ok_or_else(|| CliError::Config("--dim is required for an external model".into()))?;
        if dimension == 0 {
            return Err(CliError::Config("--dim must be at least 1".into()));
        }
        return Ok(ResolvedModel::External(ExternalModel {
            command: path.to_string(),
            dimension,
        }));
    }
    let case = BenchmarkCase::by_name(spec, dim, Some(threshold))
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(ResolvedModel::Builtin(case))
}

/// External model: one process launch per batch. Query points go to stdin as
/// headerless CSV lines, one decimal response per line comes back on stdout.
pub struct ExternalModel {
    pub command: String,
    pub dimension: usize,
}

impl Model for ExternalModel {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn eval_batch(&mut self, points: &[Point]) -> Result<Vec<f64>, ModelError> {
        let fail = |message: String| ModelError::Evaluation {
            point: points.first().cloned().unwrap_or_default(),
            message,
        };
        let mut child = Command::new(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail(format!("cannot launch {}: {e}", self.command)))?;

        {
            let mut stdin = child.stdin.take().expect("stdin was piped");
            let mut block = String::new();
            for p in points {
                let line: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
                block.push_str(&line.join(","));
                block.push('\n');
            }
            stdin
                .write_all(block.as_bytes())
                .map_err(|e| fail(format!("writing to model stdin: {e}")))?;
        }

        let output = child
            .wait_with_output()
            .map_err(|e| fail(format!("waiting for model: {e}")))?;
        if !output.status.success() {
            return Err(fail(format!("model exited with {}", output.status)));
        }
        let text = String::from_utf8(output.stdout)
            .map_err(|_| fail("model produced non-utf8 output".into()))?;
        let mut values = Vec::with_capacity(points.len());
        for (i, line) in text.lines().enumerate() {
            let value: f64 = line.trim().parse().map_err(|_| ModelError::Evaluation {
                point: points.get(i).cloned().unwrap_or_default(),
                message: format!("malformed response line {}: {line:?}", i + 1),
            })?;
            if !value.is_finite() {
                return Err(ModelError::NonFinite {
                    point: points.get(i).cloned().unwrap_or_default(),
                });
            }
            values.push(value);
        }
        if values.len() != points.len() {
            return Err(fail(format!(
                "expected {} response lines, got {}",
                points.len(),
                values.len()
            )));
        }
        Ok(values)
    }
}

impl Model for ResolvedModel {
    fn dimension(&self) -> usize {
        ResolvedModel::dimension(self)
    }

    fn eval_batch(&mut self, points: &[Point]) -> Result<Vec<f64>, ModelError> {
        match self {
            ResolvedModel::Builtin(case) => {
                let values: Vec<f64> = points.iter().map(|p| case.eval(p)).collect();
                for (p, v) in points.iter().zip(&values) {
                    if !v.is_finite() {
                        return Err(ModelError::NonFinite { point: p.clone() });
                    }
                }
                Ok(values)
            }
            ResolvedModel::External(ext) => ext.eval_batch(points),
        }
    }
}
