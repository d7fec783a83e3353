//! Plain-text artifacts: PER curve CSVs, fitted model files and metric CSVs.
//!
//! Floats are written with Rust's shortest round-trip formatting so a file
//! parses back to the exact value that produced it.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abstraction::{normalize_curve, AbstractionModel, CurveMeta, NormalizeReport, PerCurve};
use crate::error::{Error, Result};
use crate::metrics::PrrSeries;

pub const CURVE_HEADER: [&str; 2] = ["sinr_db", "per"];
pub const PRR_HEADER: [&str; 3] = ["bin_center_m", "prr", "opportunities"];
pub const CCDF_HEADER: [&str; 2] = ["t_s", "ccdf"];
pub const MAE_HEADER: [&str; 2] = ["beta", "mae"];

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads a headed numeric CSV with `cols` columns. `path` only labels errors.
fn read_table<R: Read>(reader: R, path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(parse_err(path, 1, format!("expected header {}, found {}", header.join(","), got.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(path, line, format!("'{f}' is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, line, "non-finite value"));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn write_table<W: Write>(writer: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Raw `(sinr_db, per)` samples, unsorted and unrepaired.
pub fn read_curve_samples<R: Read>(reader: R, path: &Path) -> Result<Vec<(f64, f64)>> {
    Ok(read_table(reader, path, &CURVE_HEADER)?.into_iter().map(|r| (r[0], r[1])).collect())
}

/// Loads and normalises one curve file, taking metadata from its name.
pub fn load_curve(path: &Path) -> Result<(PerCurve<f64>, NormalizeReport<f64>)> {
    let raw = read_curve_samples(open(path)?, path)?;
    let meta = CurveMeta::from_filename(path).unwrap_or_default();
    normalize_curve(&raw, meta)
}

pub fn write_curve<W: Write>(writer: W, samples: &[(f64, f64)]) -> Result<()> {
    write_table(writer, &CURVE_HEADER, samples.iter().map(|(x, p)| vec![x.to_string(), p.to_string()]))
}

pub fn save_curve(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    write_curve(create(path)?, samples)
}

/// Every `*.csv` curve in `dir` whose name parses and whose scenario matches,
/// sorted by file name.
pub fn find_curves(dir: &Path, scenario_id: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "csv")
            && CurveMeta::from_filename(&p).is_some_and(|m| m.scenario_id == scenario_id)
        {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::data(format!(
            "no curves for scenario '{scenario_id}' in {} (expected {scenario_id}_<tech>_mcs<k>_<bytes>B.csv)",
            dir.display()
        )));
    }
    Ok(out)
}

/// One row of a model file's fit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub settings: String,
    pub psi_e_bps: f64,
    pub psi_s_bps: f64,
    pub gamma_th_db: f64,
}

/// On-disk form of a fitted abstraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub scenario_id: String,
    pub alpha_hat: f64,
    pub beta: f64,
    pub bandwidth_hz: f64,
    pub rmse_bps: f64,
    pub n_curves: usize,
    #[serde(default, rename = "fit_point")]
    pub fit_points: Vec<FitRow>,
}

impl ModelFile {
    pub fn model(&self) -> Result<AbstractionModel<f64>> {
        let mut m = AbstractionModel::new(self.scenario_id.clone(), self.alpha_hat, self.bandwidth_hz, self.beta)?;
        m.rmse = self.rmse_bps;
        Ok(m)
    }
}

pub fn parse_model(text: &str, path: &Path) -> Result<ModelFile> {
    let m: ModelFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
        parse_err(path, line, e.message().to_string())
    })?;
    m.model()?;
    Ok(m)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}

pub fn save_model(path: &Path, m: &ModelFile) -> Result<()> {
    let text = toml::to_string(m).map_err(|e| Error::data(e.to_string()))?;
    create(path)?.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes populated bins only.
pub fn write_prr<W: Write>(writer: W, prr: &PrrSeries<f64>) -> Result<()> {
    let rows = (0..prr.n_bins()).filter(|&i| prr.opportunities()[i] > 0).map(|i| {
        let o = prr.opportunities()[i];
        vec![
            prr.bin_center(i).to_string(),
            (prr.received()[i] as f64 / o as f64).to_string(),
            o.to_string(),
        ]
    });
    write_table(writer, &PRR_HEADER, rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrrRow {
    pub bin_center_m: f64,
    pub prr: f64,
    pub opportunities: u64,
}

pub fn read_prr<R: Read>(reader: R, path: &Path) -> Result<Vec<PrrRow>> {
    Ok(read_table(reader, path, &PRR_HEADER)?
        .into_iter()
        .map(|r| PrrRow {
            bin_center_m: r[0],
            prr: r[1],
            opportunities: r[2] as u64,
        })
        .collect())
}

pub fn write_ccdf<W: Write>(writer: W, points: &[(f64, f64)]) -> Result<()> {
    write_table(writer, &CCDF_HEADER, points.iter().map(|(t, c)| vec![t.to_string(), c.to_string()]))
}

pub fn read_ccdf<R: Read>(reader: R, path: &Path) -> Result<Vec<(f64, f64)>> {
    Ok(read_table(reader, path, &CCDF_HEADER)?.into_iter().map(|r| (r[0], r[1])).collect())
}

pub fn write_mae<W: Write>(writer: W, table: &[(f64, f64)]) -> Result<()> {
    write_table(writer, &MAE_HEADER, table.iter().map(|(b, m)| vec![b.to_string(), m.to_string()]))
}

pub fn read_mae<R: Read>(reader: R, path: &Path) -> Result<Vec<(f64, f64)>> {
    Ok(read_table(reader, path, &MAE_HEADER)?.into_iter().map(|r| (r[0], r[1])).collect())
}

/// Writes `bytes` produced by `fill` to `path`, creating parent directories.
pub fn save_with(path: &Path, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    create(path)?.write_all(&buf).map_err(|e| Error::io(path, e))
}
