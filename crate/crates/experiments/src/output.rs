//! CSV emission.

use crate::config::MethodName;
use crate::runner::{CellResult, ExperimentResult, RunRecord, TraceRow};
use lowrank_core::optim::Termination;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const TRACE_HEADER: [&str; 13] = [
    "run_id",
    "method",
    "seed",
    "iter",
    "loss",
    "resid_fro",
    "resid_rel",
    "theory_bound",
    "dist_x",
    "dist_y",
    "leakage",
    "contraction_measured",
    "decomposition_residual",
];

pub const MEAN_HEADER: [&str; 6] = ["iter", "loss", "min_loss", "max_loss", "theory_bound", "runs"];

pub const SUMMARY_HEADER: [&str; 26] = [
    "run_id",
    "cell",
    "sweep_value",
    "method",
    "seed",
    "d",
    "c",
    "cond_x0",
    "l",
    "mu",
    "eta",
    "beta",
    "termination",
    "iterations",
    "iters_to_eps",
    "final_loss",
    "final_resid_rel",
    "measured_slope",
    "predicted_slope",
    "loss_curve_violations",
    "bound_kind",
    "bound_threshold",
    "bound_applicable",
    "bound_violations",
    "max_leakage",
    "max_decomposition",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIters => "max-iters",
        Termination::Diverged => "diverged",
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_trace<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = &'a TraceRow>,
) -> io::Result<()> {
    let mut w = writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.run_id.clone(),
            r.method.to_string(),
            r.seed.to_string(),
            r.iter.to_string(),
            float(r.loss),
            float(r.resid_fro),
            float(r.resid_rel),
            opt_float(r.theory_bound),
            float(r.dist_x),
            float(r.dist_y),
            opt_float(r.leakage),
            opt_float(r.contraction_measured),
            opt_float(r.decomposition_residual),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

/// Seed-averaged loss and predicted curve, written every `stride` steps
/// plus the last common iteration.
pub fn write_mean<W: Write>(
    out: W,
    cell: &CellResult,
    method: MethodName,
    result: &ExperimentResult,
) -> io::Result<()> {
    let averaging = result.config.output.averaging;
    let stride = result.config.output.trace_stride;
    let runs = cell.runs_for(method);
    let mean = cell.mean_loss(method, averaging);
    let curves: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| (0..mean.len()).map(|t| r.loss_curve.at(t)).collect())
        .collect();
    let curve_refs: Vec<&[f64]> = curves.iter().map(|c| c.as_slice()).collect();
    let mean_curve = crate::analysis::mean_trace(&curve_refs, averaging);
    let mut w = writer(out);
    w.write_record(MEAN_HEADER).map_err(csv_err)?;
    for (t, &m) in mean.iter().enumerate() {
        if t % stride != 0 && t + 1 != mean.len() {
            continue;
        }
        let lo = runs.iter().map(|r| r.losses[t]).fold(f64::INFINITY, f64::min);
        let hi = runs.iter().map(|r| r.losses[t]).fold(f64::NEG_INFINITY, f64::max);
        w.write_record([
            t.to_string(),
            float(m),
            float(lo),
            float(hi),
            float(mean_curve[t]),
            runs.len().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

fn summary_record(cell: &CellResult, run: &RunRecord) -> Vec<String> {
    let bound = run.residual_bound.as_ref();
    vec![
        run.run_id.clone(),
        cell.cell.label.clone(),
        opt_float(cell.cell.sweep_value),
        run.method.to_string(),
        run.seed.to_string(),
        run.d.to_string(),
        float(run.c),
        float(run.cond_x0),
        float(run.hp.l),
        float(run.hp.mu),
        float(run.hp.eta),
        float(run.hp.beta),
        termination_name(run.termination).to_string(),
        run.iterations.to_string(),
        run.iters_to_eps.map(|t| t.to_string()).unwrap_or_default(),
        float(run.final_loss()),
        float(run.final_relative_residual()),
        opt_float(run.measured_slope()),
        float(run.predicted_slope()),
        run.loss_curve_violations.to_string(),
        bound.map(|b| b.bound.kind.name().to_string()).unwrap_or_default(),
        opt_float(bound.and_then(|b| b.threshold)),
        bound.map(|b| b.applicable.to_string()).unwrap_or_default(),
        bound.map(|b| b.violations.to_string()).unwrap_or_default(),
        if run.diagnostics.leakage_steps > 0 { float(run.diagnostics.max_leakage) } else { Default::default() },
        if run.diagnostics.decomposition_steps > 0 { float(run.diagnostics.max_decomposition) } else { Default::default() },
    ]
}

pub fn write_summary<W: Write>(out: W, result: &ExperimentResult) -> io::Result<()> {
    let mut w = writer(out);
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for cell in &result.cells {
        for run in &cell.runs {
            w.write_record(summary_record(cell, run)).map_err(csv_err)?;
        }
    }
    w.flush()
}

/// File-name fragment for a cell (`d=5` becomes `d_5`).
pub fn file_tag(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `trace_<cell>_<method>.csv`, `mean_<cell>_<method>.csv` and
/// `summary.csv` into `dir`; returns the paths written.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let seeds = result.config.seeds.list();
    for cell in &result.cells {
        let tag = file_tag(&cell.cell.label);
        for &method in &result.config.methods {
            let runs = cell.runs_for(method);
            let path = dir.join(format!("trace_{tag}_{method}.csv"));
            // rows in configuration seed order
            let ordered = seeds
                .iter()
                .filter_map(|s| runs.iter().find(|r| r.seed == *s))
                .flat_map(|r| r.rows.iter());
            write_trace(create(&path)?, ordered)?;
            written.push(path);
            let path = dir.join(format!("mean_{tag}_{method}.csv"));
            write_mean(create(&path)?, cell, method, result)?;
            written.push(path);
        }
    }
    let path = dir.join("summary.csv");
    write_summary(create(&path)?, result)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(f64::NAN), "NaN");
    }

    #[test]
    fn tags() {
        assert_eq!(file_tag("d=5"), "d_5");
        assert_eq!(file_tag("c2=0.1"), "c2_0.1");
    }

    #[test]
    fn empty_fields_for_missing_diagnostics() {
        let row = TraceRow {
            run_id: "base/gd/0".into(),
            method: MethodName::Gd,
            seed: 0,
            iter: 3,
            loss: 0.5,
            resid_fro: 1.0,
            resid_rel: 0.25,
            theory_bound: Some(1.0),
            dist_x: 0.0,
            dist_y: 2.0,
            leakage: None,
            contraction_measured: None,
            decomposition_residual: None,
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, [&row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!(&fields[10..], ["", "", ""]);
        assert!(!text.contains('\r'));
    }
}
