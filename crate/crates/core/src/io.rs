//! CSV and JSON file formats.
//!
//! Floats are written with `Display`, which is the shortest string that
//! parses back to the same value, so every file round-trips exactly.
//!
//! * dataset: `y,x1,...,xd` plus a `<stem>.meta.json` sidecar
//! * trace: `t,emp_risk,dist_to_ref,norm_w` plus a `<stem>.summary.json` sidecar
//! * soft-margin curve: `gamma,phi_hat,phi_bound`
//!
//! Missing values are empty cells.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::metrics::SoftMarginCurve;
use crate::optimizer::{StepDiagnostics, TrainTrace};
use crate::scalar::Scalar;
use crate::synthdata::{Dataset, DatasetMeta};

/// `data.csv` -> `data.meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// `trace.csv` -> `trace.summary.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

fn parse<T: Scalar>(cell: &str, row: usize, col: &str) -> Result<T> {
    T::from_str_radix(cell.trim(), 10)
        .map_err(|_| LabError::Validation(format!("row {row}, column {col}: cannot parse `{cell}`")))
}

fn parse_opt<T: Scalar>(cell: &str, row: usize, col: &str) -> Result<Option<T>> {
    if cell.trim().is_empty() {
        Ok(None)
    } else {
        parse(cell, row, col).map(Some)
    }
}

fn cell<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_dataset_csv<T: Scalar, W: Write>(ds: &Dataset<T>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["y".to_string()];
    header.extend((1..=ds.d()).map(|j| format!("x{j}")));
    out.write_record(&header)?;
    let mut rec = Vec::with_capacity(ds.d() + 1);
    for (x, y) in ds.rows() {
        rec.clear();
        rec.push(y.to_string());
        rec.extend(x.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `y,x1..xd` rows. The metadata is a placeholder; callers with a
/// sidecar should use [`read_dataset`].
pub fn read_dataset_csv<T: Scalar, R: Read>(r: R) -> Result<Dataset<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("y") || header.len() < 2 {
        return invalid("dataset header must be `y,x1,...,xd`");
    }
    for (j, h) in header.iter().enumerate().skip(1) {
        if h != format!("x{j}") {
            return invalid(format!("dataset column {j} is `{h}`, expected `x{j}`"));
        }
    }
    let d = header.len() - 1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let y = match rec.get(0).map(str::trim) {
            Some("1") | Some("+1") => 1,
            Some("-1") => -1,
            other => return invalid(format!("row {i}: label {other:?} is not +-1")),
        };
        ys.push(y);
        for (j, c) in rec.iter().enumerate().skip(1) {
            xs.push(parse(c, i, &header[j])?);
        }
    }
    let meta = DatasetMeta { seed: 0, spec_id: "external".into(), flip_fraction: f64::NAN, max_norm: 0.0 };
    Dataset::new(d, xs, ys, meta)
}

/// Writes the CSV and its metadata sidecar.
pub fn write_dataset<T: Scalar>(ds: &Dataset<T>, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_dataset_csv(ds, &mut w)?;
    w.flush()?;
    write_json(&meta_path(path), &ds.meta)
}

/// Reads the CSV and, when present, its sidecar.
pub fn read_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let mut ds: Dataset<T> = read_dataset_csv(BufReader::new(File::open(path)?))?;
    let mp = meta_path(path);
    if mp.exists() {
        let meta: DatasetMeta = serde_json::from_reader(BufReader::new(File::open(mp)?))?;
        let max_norm = ds.meta.max_norm;
        ds.meta = DatasetMeta { max_norm, ..meta };
    }
    Ok(ds)
}

/// One line of a trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub emp_risk: f64,
    pub dist_to_ref: Option<f64>,
    pub norm_w: f64,
}

/// Everything in a trace except the checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub final_w: Vec<f64>,
    pub best_w: Vec<f64>,
    pub best_t: u64,
    pub running_mean_risk: f64,
    pub max_risk_increase: f64,
    pub max_dist_to_ref: Option<f64>,
    pub initial_dist_to_ref: Option<f64>,
    pub steps: u64,
    pub stopped_at: Option<u64>,
    /// Free-form fields added by the caller (loss, step size, ...).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl TraceSummary {
    pub fn from_trace<T: Scalar>(trace: &TrainTrace<T>) -> Self {
        let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        let StepDiagnostics { max_risk_increase, max_dist_to_ref, initial_dist_to_ref, steps } = trace.diagnostics;
        Self {
            final_w: f(&trace.final_w),
            best_w: f(&trace.best_w),
            best_t: trace.best_t,
            running_mean_risk: trace.running_mean_risk.to_f64_lossy(),
            max_risk_increase: max_risk_increase.to_f64_lossy(),
            max_dist_to_ref: max_dist_to_ref.map(|x| x.to_f64_lossy()),
            initial_dist_to_ref: initial_dist_to_ref.map(|x| x.to_f64_lossy()),
            steps,
            stopped_at: trace.stopped_at,
            extra: serde_json::Map::new(),
        }
    }
}

pub fn write_trace_csv<T: Scalar, W: Write>(trace: &TrainTrace<T>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "emp_risk", "dist_to_ref", "norm_w"])?;
    for c in &trace.checkpoints {
        out.write_record([c.t.to_string(), c.emp_risk.to_string(), cell(c.dist_to_ref), c.norm_w.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["t", "emp_risk", "dist_to_ref", "norm_w"] {
        return invalid("trace header must be `t,emp_risk,dist_to_ref,norm_w`");
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let t =
            rec[0].trim().parse().map_err(|_| LabError::Validation(format!("row {i}: bad iteration `{}`", &rec[0])))?;
        rows.push(TraceRow {
            t,
            emp_risk: parse(&rec[1], i, "emp_risk")?,
            dist_to_ref: parse_opt(&rec[2], i, "dist_to_ref")?,
            norm_w: parse(&rec[3], i, "norm_w")?,
        });
    }
    Ok(rows)
}

/// Writes the checkpoint CSV and the summary sidecar.
pub fn write_trace(summary: &TraceSummary, trace_csv: &Path, trace: &TrainTrace<impl Scalar>) -> Result<()> {
    let mut w = create(trace_csv)?;
    write_trace_csv(trace, &mut w)?;
    w.flush()?;
    write_json(&summary_path(trace_csv), summary)
}

pub fn read_trace(path: &Path) -> Result<(Vec<TraceRow>, Option<TraceSummary>)> {
    let rows = read_trace_csv(BufReader::new(File::open(path)?))?;
    let sp = summary_path(path);
    let summary = if sp.exists() { Some(serde_json::from_reader(BufReader::new(File::open(sp)?))?) } else { None };
    Ok((rows, summary))
}

pub fn write_softmargin_csv<T: Scalar, W: Write>(curve: &SoftMarginCurve<T>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["gamma", "phi_hat", "phi_bound"])?;
    for (i, (g, p)) in curve.gammas.iter().zip(&curve.phi_hat).enumerate() {
        let bound = curve.phi_bound.as_ref().map(|b| b[i]);
        out.write_record([g.to_string(), p.to_string(), cell(bound)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_softmargin(curve: &SoftMarginCurve<impl Scalar>, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_softmargin_csv(curve, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads `(gamma, phi_hat, phi_bound)` rows.
pub fn read_softmargin_csv<R: Read>(r: R) -> Result<Vec<(f64, f64, Option<f64>)>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["gamma", "phi_hat", "phi_bound"] {
        return invalid("soft-margin header must be `gamma,phi_hat,phi_bound`");
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            Ok((parse(&rec[0], i, "gamma")?, parse(&rec[1], i, "phi_hat")?, parse_opt(&rec[2], i, "phi_bound")?))
        })
        .collect()
}

pub fn write_json_file<S: Serialize + ?Sized>(value: &S, path: &Path) -> Result<()> {
    write_json(path, value)
}
