//! Headered, comma-separated, LF-terminated CSV output with shortest
//! round-trip decimal formatting.

use std::fmt::Write as _;
use std::path::Path;

use dalpce::learner::EventRecord;
use dalpce::sampling::ExperimentalDesign;

use crate::CliError;

pub fn write_convergence(path: &Path, log: &[EventRecord]) -> Result<(), CliError> {
    let mut out = String::from(
        "iteration,evaluations,n_domains,selected_domain_id,action,q2_local,q2_global,wall_ms\n",
    );
    for r in log {
        let q2_global = r.q2_global.map(|v| format!("{v}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            r.evaluations,
            r.n_domains,
            r.selected_domain_id,
            r.action,
            r.q2_local,
            q2_global,
            r.wall_ms
        )
        .expect("string writes cannot fail");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_ed(path: &Path, ed: &ExperimentalDesign, dimension: usize) -> Result<(), CliError> {
    let mut header: Vec<String> = (1..=dimension).map(|d| format!("x{d}")).collect();
    header.push("y".into());
    let mut out = header.join(",");
    out.push('\n');
    for (p, y) in ed.points().iter().zip(ed.outputs()) {
        let mut row: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
        row.push(format!("{y}"));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse one headerless CSV row of coordinates.
pub fn parse_point_row(line: &str, dimension: usize) -> Result<Vec<f64>, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != dimension {
        return Err(format!(
            "expected {dimension} comma-separated values, found {}",
            fields.len()
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number: {f:?}"))
        })
        .collect()
}
