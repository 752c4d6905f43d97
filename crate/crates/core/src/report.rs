//! Run-directory files.
//!
//! ```text
//! <stem>_<dim>.ckpt.json      trained model
//! <stem>_<dim>.log.csv        epoch,train_mse,dev_mse,dev_ccc
//! eval_<stem>_<dim>.csv       model,dimension,scaler,delay_s,ccc
//! delay_<stem>_<dim>.csv      delay_s,ccc
//! late_<dim>.csv              modality,coefficient,importance_pct (last row: intercept)
//! ```
//!
//! `<stem>` is `proposed`, `early`, `late` or `unimodal-<modality>`. The
//! aggregate written by [`build_report`]:
//!
//! ```text
//! table.csv         model,<dim>_none,<dim>_decimal,<dim>_stdratio for each dimension; NA when absent
//! table.txt         the same table, aligned, three decimals
//! delay_curves.csv  model,dimension,delay_s,ccc,best   (best = 1 on the argmax row)
//! importance.csv    dimension,modality,coefficient,importance_pct
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::align::DelayCurve;
use crate::data::io::fmt_f64;
use crate::domain::{Dimension, Modality};
use crate::error::{Error, Result};
use crate::experiment::{LateFusionOutcome, ModelKind};
use crate::nn::EpochRecord;
use crate::postproc::ScalerKind;

pub const LATE_STEM: &str = "late";
pub const TABLE_CSV: &str = "table.csv";
pub const TABLE_TXT: &str = "table.txt";
pub const DELAY_CURVES_CSV: &str = "delay_curves.csv";
pub const IMPORTANCE_CSV: &str = "importance.csv";

/// Scaler columns of the results table.
pub const TABLE_SCALERS: [ScalerKind; 3] = [ScalerKind::None, ScalerKind::Decimal, ScalerKind::StdRatio];

const LOG_HEADER: &str = "epoch,train_mse,dev_mse,dev_ccc";
const EVAL_HEADER: &str = "model,dimension,scaler,delay_s,ccc";
const DELAY_HEADER: &str = "delay_s,ccc";
const LATE_HEADER: &str = "modality,coefficient,importance_pct";
const INTERCEPT: &str = "intercept";

pub fn checkpoint_path(dir: &Path, kind: ModelKind, dim: Dimension) -> PathBuf {
    dir.join(format!("{}_{dim}.ckpt.json", kind.file_stem()))
}

pub fn log_path(dir: &Path, kind: ModelKind, dim: Dimension) -> PathBuf {
    dir.join(format!("{}_{dim}.log.csv", kind.file_stem()))
}

pub fn eval_path(dir: &Path, stem: &str, dim: Dimension) -> PathBuf {
    dir.join(format!("eval_{stem}_{dim}.csv"))
}

pub fn delay_path(dir: &Path, stem: &str, dim: Dimension) -> PathBuf {
    dir.join(format!("delay_{stem}_{dim}.csv"))
}

pub fn late_path(dir: &Path, dim: Dimension) -> PathBuf {
    dir.join(format!("late_{dim}.csv"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn num(out: &mut String, v: f64) {
    fmt_f64(out, v);
}

pub fn format_epoch_log(log: &[EpochRecord]) -> String {
    let mut s = format!("{LOG_HEADER}\n");
    for r in log {
        let _ = write!(s, "{},", r.epoch);
        num(&mut s, r.train_mse);
        s.push(',');
        num(&mut s, r.dev_mse);
        s.push(',');
        num(&mut s, r.dev_ccc);
        s.push('\n');
    }
    s
}

pub fn write_epoch_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    write_text(path, &format_epoch_log(log))
}

fn load_err(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        line,
        detail: detail.into(),
    }
}

/// Reads a CSV with the expected header; returns `(line, fields)` per row.
fn read_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| load_err(path, 0, e.to_string()))?;
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| load_err(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found.join(",") != header {
        return Err(load_err(path, 1, format!("header must be '{header}', found '{}'", found.join(","))));
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| load_err(path, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(load_err(path, line, format!("expected {width} columns, found {}", rec.len())));
        }
        rows.push((line, rec.iter().map(|f| f.trim().to_string()).collect()));
    }
    Ok(rows)
}

fn parse_num(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| load_err(path, line, format!("'{s}' is not a number")))
}

pub fn read_epoch_log(path: &Path) -> Result<Vec<EpochRecord>> {
    read_rows(path, LOG_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(EpochRecord {
                epoch: f[0]
                    .parse()
                    .map_err(|_| load_err(path, line, format!("'{}' is not an epoch number", f[0])))?,
                train_mse: parse_num(path, line, &f[1])?,
                dev_mse: parse_num(path, line, &f[2])?,
                dev_ccc: parse_num(path, line, &f[3])?,
            })
        })
        .collect()
}

/// One scored configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// `proposed`, `early`, `late` or `unimodal:<modality>`.
    pub model: String,
    pub dimension: Dimension,
    pub scaler: ScalerKind,
    pub delay_seconds: f64,
    pub ccc: f64,
}

pub fn format_eval(rows: &[EvalRow]) -> String {
    let mut s = format!("{EVAL_HEADER}\n");
    for r in rows {
        let _ = write!(s, "{},{},{},", r.model, r.dimension, r.scaler.name());
        num(&mut s, r.delay_seconds);
        s.push(',');
        num(&mut s, r.ccc);
        s.push('\n');
    }
    s
}

pub fn write_eval(path: &Path, rows: &[EvalRow]) -> Result<()> {
    write_text(path, &format_eval(rows))
}

pub fn read_eval(path: &Path) -> Result<Vec<EvalRow>> {
    read_rows(path, EVAL_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let bad = |e: Error| load_err(path, line, e.to_string());
            Ok(EvalRow {
                model: f[0].clone(),
                dimension: f[1].parse().map_err(bad)?,
                scaler: f[2].parse().map_err(bad)?,
                delay_seconds: parse_num(path, line, &f[3])?,
                ccc: parse_num(path, line, &f[4])?,
            })
        })
        .collect()
}

pub fn format_delay_curve(curve: &DelayCurve) -> String {
    let mut s = format!("{DELAY_HEADER}\n");
    for &(d, c) in &curve.points {
        num(&mut s, d);
        s.push(',');
        num(&mut s, c);
        s.push('\n');
    }
    s
}

pub fn write_delay_curve(path: &Path, curve: &DelayCurve) -> Result<()> {
    write_text(path, &format_delay_curve(curve))
}

pub fn read_delay_curve(path: &Path) -> Result<DelayCurve> {
    let points = read_rows(path, DELAY_HEADER)?
        .into_iter()
        .map(|(line, f)| Ok((parse_num(path, line, &f[0])?, parse_num(path, line, &f[1])?)))
        .collect::<Result<Vec<_>>>()?;
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(load_err(path, 0, "delays must be strictly increasing"));
    }
    DelayCurve::from_points(points).map_err(|e| load_err(path, 0, e.to_string()))
}

pub fn format_late(outcome: &LateFusionOutcome) -> String {
    let mut s = format!("{LATE_HEADER}\n");
    for (i, (m, w)) in outcome.model.modalities.iter().zip(&outcome.model.coefficients).enumerate() {
        let _ = write!(s, "{m},");
        num(&mut s, *w);
        s.push(',');
        if let Some(imp) = &outcome.importance {
            num(&mut s, imp[i]);
        }
        s.push('\n');
    }
    let _ = write!(s, "{INTERCEPT},");
    num(&mut s, outcome.model.intercept);
    s.push_str(",\n");
    s
}

pub fn write_late(path: &Path, outcome: &LateFusionOutcome) -> Result<()> {
    write_text(path, &format_late(outcome))
}

/// Per-modality `(modality, coefficient, importance_pct)` from a late-fusion file.
pub fn read_late(path: &Path) -> Result<Vec<(Modality, f64, Option<f64>)>> {
    let mut out = Vec::new();
    for (line, f) in read_rows(path, LATE_HEADER)? {
        if f[0] == INTERCEPT {
            continue;
        }
        let m: Modality = f[0].parse().map_err(|e: Error| load_err(path, line, e.to_string()))?;
        let imp = if f[2].is_empty() { None } else { Some(parse_num(path, line, &f[2])?) };
        out.push((m, parse_num(path, line, &f[1])?, imp));
    }
    Ok(out)
}

/// Splits `<prefix><stem>_<dim>.csv` into stem and dimension.
fn parse_name<'a>(name: &'a str, prefix: &str) -> Option<(&'a str, Dimension)> {
    let body = name.strip_prefix(prefix)?.strip_suffix(".csv")?;
    let (stem, dim) = body.rsplit_once('_')?;
    Some((stem, dim.parse().ok()?))
}

fn model_label(stem: &str) -> String {
    match stem.parse::<ModelKind>() {
        Ok(k) => k.to_string(),
        Err(_) => stem.to_string(),
    }
}

fn row_rank(model: &str) -> (usize, &str) {
    let order = ["early", "proposed", "late", "unimodal:audio", "unimodal:video", "unimodal:text"];
    (order.iter().position(|m| *m == model).unwrap_or(order.len()), model)
}

/// Paths written by [`build_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub table_csv: PathBuf,
    pub table_txt: PathBuf,
    pub delay_curves: PathBuf,
    pub importance: PathBuf,
}

/// Aggregates the eval, delay and late-fusion files of `run_dir`.
pub fn build_report(run_dir: &Path) -> Result<ReportFiles> {
    let mut names: Vec<String> = fs::read_dir(run_dir)
        .map_err(|e| Error::io(run_dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();

    let mut cells: BTreeMap<(String, Dimension, ScalerKind), f64> = BTreeMap::new();
    let mut n_eval = 0;
    for name in names.iter().filter(|n| parse_name(n, "eval_").is_some()) {
        n_eval += 1;
        for r in read_eval(&run_dir.join(name))? {
            cells.insert((r.model, r.dimension, r.scaler), r.ccc);
        }
    }
    if n_eval == 0 {
        return Err(Error::input(format!(
            "no eval_<model>_<dimension>.csv files in {}",
            run_dir.display()
        )));
    }

    let mut models: Vec<&String> = cells.keys().map(|k| &k.0).collect();
    models.dedup();
    models.sort_by(|a, b| row_rank(a).cmp(&row_rank(b)));

    let mut header = vec!["model".to_string()];
    for d in Dimension::ALL {
        for s in TABLE_SCALERS {
            header.push(format!("{d}_{}", s.name()));
        }
    }
    let mut csv_out = header.join(",");
    csv_out.push('\n');
    let mut txt_rows = vec![header.clone()];
    for m in &models {
        let mut csv_row = m.to_string();
        let mut txt_row = vec![m.to_string()];
        for d in Dimension::ALL {
            for s in TABLE_SCALERS {
                csv_row.push(',');
                match cells.get(&((*m).clone(), d, s)) {
                    Some(v) => {
                        num(&mut csv_row, *v);
                        txt_row.push(format!("{v:.3}"));
                    }
                    None => {
                        csv_row.push_str("NA");
                        txt_row.push("NA".into());
                    }
                }
            }
        }
        csv_out.push_str(&csv_row);
        csv_out.push('\n');
        txt_rows.push(txt_row);
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|c| txt_rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut txt_out = String::new();
    for r in &txt_rows {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        txt_out.push_str(line.join("  ").trim_end());
        txt_out.push('\n');
    }

    let mut delay_out = String::from("model,dimension,delay_s,ccc,best\n");
    for name in &names {
        let Some((stem, dim)) = parse_name(name, "delay_") else { continue };
        let curve = read_delay_curve(&run_dir.join(name))?;
        let best = curve.best_index();
        for (i, &(d, c)) in curve.points.iter().enumerate() {
            let _ = write!(delay_out, "{},{dim},", model_label(stem));
            num(&mut delay_out, d);
            delay_out.push(',');
            num(&mut delay_out, c);
            let _ = writeln!(delay_out, ",{}", u8::from(i == best));
        }
    }

    let mut imp_out = String::from("dimension,modality,coefficient,importance_pct\n");
    for d in Dimension::ALL {
        let path = late_path(run_dir, d);
        if !path.is_file() {
            continue;
        }
        for (m, w, imp) in read_late(&path)? {
            let _ = write!(imp_out, "{d},{m},");
            num(&mut imp_out, w);
            imp_out.push(',');
            match imp {
                Some(v) => num(&mut imp_out, v),
                None => imp_out.push_str("NA"),
            }
            imp_out.push('\n');
        }
    }

    let files = ReportFiles {
        table_csv: run_dir.join(TABLE_CSV),
        table_txt: run_dir.join(TABLE_TXT),
        delay_curves: run_dir.join(DELAY_CURVES_CSV),
        importance: run_dir.join(IMPORTANCE_CSV),
    };
    write_text(&files.table_csv, &csv_out)?;
    write_text(&files.table_txt, &txt_out)?;
    write_text(&files.delay_curves, &delay_out)?;
    write_text(&files.importance, &imp_out)?;
    Ok(files)
}
