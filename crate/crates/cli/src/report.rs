use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use certree::Error;

#[derive(clap::Args)]
pub struct ReportArgs {
    /// Directory of verification CSV files.
    #[arg(value_name = "DIR")]
    dir: PathBuf,
}

struct SummaryRow {
    method: String,
    norm: String,
    epsilon: f64,
    standard_err: f64,
    verified_err: f64,
    mean_time_ms: f64,
    file: String,
    /// Model and dataset paths, when the summary carries them; radius sweeps
    /// are only comparable within one (model, data) pair.
    source: (String, String),
}

pub fn run(args: ReportArgs) -> anyhow::Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.dir)
        .with_context(|| format!("cannot read directory {}", args.dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    paths.sort();

    let mut rows = Vec::new();
    for path in &paths {
        match parse_summary(path) {
            Ok(row) => rows.push(row),
            Err(err) => eprintln!("skipping {}: {err}", path.display()),
        }
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!(
            "no verification summaries found in {}",
            args.dir.display()
        ))
        .into());
    }
    rows.sort_by(|a, b| {
        (a.method.as_str(), a.norm.as_str())
            .cmp(&(b.method.as_str(), b.norm.as_str()))
            .then(a.epsilon.total_cmp(&b.epsilon))
    });
    warn_on_nonmonotone_sweeps(&rows);

    println!(
        "{:<16} {:<8} {:<10} {:>12} {:>12} {:>12}  file",
        "method", "norm", "epsilon", "standard_err", "verified_err", "mean_time_ms"
    );
    for row in &rows {
        println!(
            "{:<16} {:<8} {:<10} {:>12.6} {:>12.6} {:>12.3}  {}",
            row.method, row.norm, row.epsilon, row.standard_err, row.verified_err,
            row.mean_time_ms, row.file
        );
    }
    Ok(())
}

/// Growing the radius can only lose certificates, so within one sweep the
/// verified error must be non-decreasing; a drop means mismatched inputs or
/// an unsound run.
fn warn_on_nonmonotone_sweeps(rows: &[SummaryRow]) {
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let same_sweep = a.method == b.method
            && a.norm == b.norm
            && a.source == b.source
            && !a.source.0.is_empty();
        if same_sweep && a.epsilon < b.epsilon && b.verified_err < a.verified_err {
            eprintln!(
                "warning: verified_err drops from {} ({}) to {} ({}) as the radius grows \
                 under {}/{}",
                a.verified_err, a.file, b.verified_err, b.file, a.method, a.norm
            );
        }
    }
}

fn parse_summary(path: &Path) -> anyhow::Result<SummaryRow> {
    let text = fs::read_to_string(path)?;
    let pairs: HashMap<&str, &str> = text
        .lines()
        .filter_map(|line| line.strip_prefix("# "))
        .filter_map(|line| line.split_once(','))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect();
    let fetch = |key: &str| {
        pairs
            .get(key)
            .copied()
            .with_context(|| format!("missing summary key {key:?}"))
    };
    let number = |key: &str| -> anyhow::Result<f64> {
        fetch(key)?.parse().with_context(|| format!("summary key {key:?} is not a number"))
    };
    let optional = |key: &str| pairs.get(key).copied().unwrap_or_default().to_owned();
    Ok(SummaryRow {
        method: fetch("method")?.to_owned(),
        norm: fetch("norm")?.to_owned(),
        epsilon: number("epsilon")?,
        standard_err: number("standard_err")?,
        verified_err: number("verified_err")?,
        mean_time_ms: number("mean_time_ms")?,
        file: path
            .file_name()
            .and_then(|name| name.to_str())
            .unwrap_or("<non-utf8>")
            .to_owned(),
        source: (optional("model"), optional("data")),
    })
}
