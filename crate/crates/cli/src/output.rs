//! CSV emission.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use alloc_dichotomy::harness::{reference_curves, ReferenceCurves};
use alloc_dichotomy::ExperimentResult;

pub const HEADER: &str =
    "t,avg_regret,ref_lower,ref_upper,log10_t,log10_avg_regret,log10_ref_lower,log10_ref_upper";
pub const SUMMARY_HEADER: &str = "seed,final_avg_regret,loglog_slope";

/// Exponent used for the reference curves when the instance carries none.
pub const FALLBACK_BETA: f64 = 2.0;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Reference(#[from] alloc_dichotomy::Error),
}

/// A number rounded to 12 significant digits, printed in its shortest form.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// `out.csv` -> `out.summary.csv`; paths without a `.csv` extension get the suffix appended.
pub fn summary_path(path: &Path) -> PathBuf {
    let s = path.as_os_str().to_string_lossy();
    match s.strip_suffix(".csv") {
        Some(stem) => PathBuf::from(format!("{stem}.summary.csv")),
        None => PathBuf::from(format!("{s}.summary.csv")),
    }
}

/// Main CSV contents: one row per checkpoint, ascending in `t`.
pub fn regret_csv(result: &ExperimentResult, curves: &ReferenceCurves) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    let mut rows: Vec<(u64, f64)> = result
        .checkpoints
        .iter()
        .copied()
        .zip(result.mean_average.iter().copied())
        .collect();
    rows.sort_by_key(|&(t, _)| t);
    for (t, r) in rows {
        let tf = t as f64;
        let (lo, hi) = (curves.lower(tf), curves.upper(tf));
        let fields = [r, lo, hi, tf.log10(), r.log10(), lo.log10(), hi.log10()];
        out.push_str(&t.to_string());
        for x in fields {
            out.push(',');
            out.push_str(&format_number(x));
        }
        out.push('\n');
    }
    out
}

/// Per-seed summary; failed seeds and failed slope fits leave their cells empty.
pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for run in &result.runs {
        let regret = run
            .outcome
            .as_ref()
            .map(|t| format_number(t.final_average()))
            .unwrap_or_default();
        let slope = run.slope().map(format_number).unwrap_or_default();
        let _ = writeln!(out, "{},{regret},{slope}", run.seed);
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the regret CSV to `path` and the per-seed summary next to it.
pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<(), OutputError> {
    let curves = reference_curves(result.beta.unwrap_or(FALLBACK_BETA), result.k)?;
    write(path, &regret_csv(result, &curves))?;
    write(&summary_path(path), &summary_csv(result))
}
