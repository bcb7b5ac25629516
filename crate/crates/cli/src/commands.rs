use std::path::Path;

use haxc::density::axc_log_density;
use haxc::dnorm::mc_stdf_parallel;

use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, read_points, Output};
use crate::spec::ResolvedSpec;

pub fn sample(spec: &ResolvedSpec, n: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    let model = spec.model()?;
    let rows = model.sample_seeded(n, seed);
    let mut csv = Output::open(out)?.csv();
    csv.record((1..=spec.dimension).map(|j| format!("u{j}")))?;
    for row in &rows {
        csv.record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    csv.finish()
}

/// Writes `row,<value columns…>,error` records; returns an error when any
/// row failed, after the whole file is written.
fn evaluate_rows<F>(
    spec: &ResolvedSpec,
    points: &Path,
    out: Option<&Path>,
    header: &[&str],
    eval: F,
) -> CliResult<()>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, String>,
{
    let rows = read_points(points, spec.dimension)?;
    let mut csv = Output::open(out)?.csv();
    let mut head = vec!["row"];
    head.extend_from_slice(header);
    head.push("error");
    csv.record(&head)?;
    let mut failed = 0;
    for r in &rows {
        let result = r.values.clone().and_then(|x| eval(&x));
        let mut rec = vec![r.row.to_string()];
        match result {
            Ok(values) => {
                rec.extend(values.iter().map(|&v| fmt_f64(v)));
                rec.push(String::new());
            }
            Err(msg) => {
                failed += 1;
                rec.extend(header.iter().map(|_| String::new()));
                rec.push(format!("row {}: {msg}", r.row));
            }
        }
        csv.record(&rec)?;
    }
    csv.finish()?;
    if failed > 0 {
        return Err(CliError::RowErrors { failed, total: rows.len() });
    }
    Ok(())
}

pub fn density(spec: &ResolvedSpec, points: &Path, out: Option<&Path>) -> CliResult<()> {
    let (psi, stdf) = spec.density_parts()?;
    evaluate_rows(spec, points, out, &["log_density"], |u| {
        axc_log_density(&psi, &stdf, u).map(|l| vec![l]).map_err(|e| e.to_string())
    })
}

/// Closed-form stdf values, plus a Monte Carlo estimate and its standard
/// error from the EVC's d-norm generator when `mc` is given.
pub fn stdf(spec: &ResolvedSpec, points: &Path, out: Option<&Path>, mc: Option<(usize, u64)>) -> CliResult<()> {
    let l = spec.eval_stdf()?;
    match mc {
        None => evaluate_rows(spec, points, out, &["stdf"], |x| l.eval(x).map(|v| vec![v]).map_err(|e| e.to_string())),
        Some((n, seed)) => {
            let generator = spec.dnorm_generator()?;
            evaluate_rows(spec, points, out, &["stdf", "mc", "mc_se"], |x| {
                let exact = l.eval(x).map_err(|e| e.to_string())?;
                let est = mc_stdf_parallel(&generator, x, n, seed).map_err(|e| e.to_string())?;
                Ok(vec![exact, est.estimate, est.std_error])
            })
        }
    }
}
