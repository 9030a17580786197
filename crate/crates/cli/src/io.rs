//! CSV input/output and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use kmedyn::{Expansion, PointSet, TrajectoryEnsemble};

use crate::config::ScenarioConfig;

/// Reads a numeric matrix, one sample per row. Blank lines and `#` comments are
/// skipped; a first row with no numeric field is taken as a header.
pub fn read_matrix(path: &Path) -> Result<PointSet> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_matrix(file).with_context(|| format!("in {}", path.display()))
}

pub fn parse_matrix<R: std::io::Read>(input: R) -> Result<PointSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut dim = None;
    let mut data = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if std::mem::take(&mut first) && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, f)| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| anyhow!("line {line}, column {}: '{f}' is not a number", col + 1))?;
                if !v.is_finite() {
                    bail!("line {line}, column {}: value is not finite", col + 1);
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => bail!("line {line}: expected {d} columns, found {}", row.len()),
            _ => {}
        }
        data.extend(row);
    }
    let dim = dim.ok_or_else(|| anyhow!("no data rows"))?;
    Ok(PointSet::new(dim, data)?)
}

pub fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

pub fn write_manifest(cfg: &ScenarioConfig) -> Result<()> {
    let path = cfg.out().join("manifest.json");
    let mut text = serde_json::to_string_pretty(cfg)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_ensemble(path: &Path, ens: &TrajectoryEnsemble) -> Result<()> {
    write_with(path, |w| ens.write_csv(w))
}

/// `step,index,x0..,weight` rows for an ensemble (uniform weights unless it
/// carries its own).
pub fn write_ensemble_long(path: &Path, ens: &TrajectoryEnsemble) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(long_header(ens.dim()))?;
    let n = ens.realizations();
    let uniform = 1.0 / n as f64;
    for (step, slice) in ens.slices().iter().enumerate() {
        for (i, row) in slice.rows().enumerate() {
            let weight = ens.weights().map_or(uniform, |ws| ws[i]);
            w.write_record(long_record(step, i, row, weight))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `step,index,x0..,weight` rows for a sequence of expansions.
pub fn write_expansions_long(path: &Path, exps: &[Expansion]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(long_header(exps.first().map_or(0, |e| e.dim())))?;
    for (step, e) in exps.iter().enumerate() {
        for (i, (row, &wt)) in e.points().rows().zip(e.weights()).enumerate() {
            w.write_record(long_record(step, i, row, wt))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn long_header(dim: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "index".to_string()];
    h.extend((0..dim).map(|k| format!("x{k}")));
    h.push("weight".into());
    h
}

fn long_record(step: usize, index: usize, row: &[f64], weight: f64) -> Vec<String> {
    let mut r = vec![step.to_string(), index.to_string()];
    r.extend(row.iter().map(f64::to_string));
    r.push(weight.to_string());
    r
}
