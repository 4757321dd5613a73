//! CSV and plot-script emission. Every file is written to a temporary file
//! in the output directory and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::sweep::{aggregate, Aggregate, TrialRecord};
use crate::ExperimentError;

pub const TRIALS_FILE: &str = "trials.csv";
pub const PLOT_SCRIPT: &str = "plot_results.py";

/// `(file name, column stem, selector)` of the four summary tables.
pub const TABLES: [(&str, &str, fn(&Aggregate) -> [Option<f64>; 2]); 4] = [
    ("OSPA_tau.csv", "OSPA_tau", |a| a.ospa_tau_d),
    ("OSPA_phi.csv", "OSPA_phi", |a| a.ospa_phi),
    ("RMSE_w_gain.csv", "RMSE_w_gain", |a| a.gain_rmse),
    ("RMSE_w_phase.csv", "RMSE_w_phase", |a| a.phase_rmse),
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Creates `dir` if needed and checks a file can be created in it.
pub fn ensure_writable(dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    Ok(())
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

/// Ten significant digits in scientific notation.
fn number(v: f64) -> String {
    format!("{v:.9e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

pub fn summary_csv(stem: &str, rows: &[Aggregate], select: fn(&Aggregate) -> [Option<f64>; 2]) -> String {
    let mut out = format!("sigma_sim2,{stem}_cal,{stem}_nocal\n");
    for row in rows {
        let [cal, nocal] = select(row);
        let _ = writeln!(out, "{},{},{}", number(row.sigma), cell(cal), cell(nocal));
    }
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace(['\n', '\r'], " "))
}

/// Raw records; floats use the shortest representation that reads back exactly.
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(
        "sigma,trial_index,mode,ospa_tau_d,ospa_phi,gain_rmse,phase_rmse,k_hat,iterations,converged,y_hash,failure\n",
    );
    for r in records {
        let metric = |v: f64| if r.failure.is_some() { String::new() } else { v.to_string() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{:016x},{}",
            r.sigma,
            r.trial_index,
            r.mode.label(),
            metric(r.ospa_tau_d),
            metric(r.ospa_phi),
            metric(r.gain_rmse),
            metric(r.phase_rmse),
            r.k_hat,
            r.iterations,
            r.converged,
            r.y_hash,
            r.failure.as_deref().map(quote).unwrap_or_default(),
        );
    }
    out
}

pub fn plot_script() -> String {
    r#"#!/usr/bin/env python3
# Plots the sweep summaries written next to this script.
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def column(rows, key):
    return [float(r[key]) if r[key] else float("nan") for r in rows]


def load(name):
    with open(os.path.join(here, name), newline="") as f:
        return list(csv.DictReader(f))


panels = [
    ("OSPA_tau.csv", "OSPA_tau", "mean OSPA delay distance [m]", False),
    ("OSPA_phi.csv", "OSPA_phi", "mean OSPA angle [deg]", False),
    ("RMSE_w_gain.csv", "RMSE_w_gain", "RMSE gain", True),
    ("RMSE_w_phase.csv", "RMSE_w_phase", "RMSE phase [deg]", True),
]

fig, axes = plt.subplots(2, 2, figsize=(10, 7))
for ax, (name, stem, label, logy) in zip(axes.flat, panels):
    rows = load(name)
    x = column(rows, "sigma_sim2")
    ax.plot(x, column(rows, stem + "_cal"), "o-", label="calibration")
    ax.plot(x, column(rows, stem + "_nocal"), "s--", label="no calibration")
    ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlim(1e-3, 3.5e-1)
    ax.set_xlabel("sigma_w,sim")
    ax.set_ylabel(label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()

fig.tight_layout()
target = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "results.png")
fig.savefig(target, dpi=150)
print(target)
"#
    .to_string()
}

/// Writes the four summary tables, the raw records and the plot script.
/// Returns the written paths.
pub fn emit_outputs(records: &[TrialRecord], out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::Config("no trial records to write".into()));
    }
    ensure_writable(out_dir)?;
    let rows = aggregate(records);
    let mut written = Vec::new();
    for (name, stem, select) in TABLES {
        let path = out_dir.join(name);
        write_atomic(&path, &summary_csv(stem, &rows, select))?;
        written.push(path);
    }
    let path = out_dir.join(TRIALS_FILE);
    write_atomic(&path, &trials_csv(records))?;
    written.push(path);
    let path = out_dir.join(PLOT_SCRIPT);
    write_atomic(&path, &plot_script())?;
    written.push(path);
    Ok(written)
}
