//! JSONL run logs and their median/IQR summaries.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{DvdError, Result};
use crate::es::IterationRecord;

/// Writes one record per line.
pub fn write_jsonl(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| DvdError::Io(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<IterationRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| DvdError::Io(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// `*.jsonl` files directly inside `dir`, sorted by name.
pub fn jsonl_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (position `q * (n - 1)`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub iter: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    /// Run labels, usually the JSONL file stems.
    pub runs: Vec<String>,
    /// Per-iteration statistics of `best` across runs.
    pub series: Vec<SummaryRow>,
    /// Last `best` of each run.
    pub final_best: Vec<f64>,
    /// `lambda` trajectory of each run.
    pub lambda: Vec<Vec<f64>>,
}

impl SummaryReport {
    pub fn from_runs(runs: &[(String, Vec<IterationRecord>)]) -> Self {
        let longest = runs.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
        let series = (0..longest)
            .map(|t| {
                let mut v: Vec<f64> = runs
                    .iter()
                    .filter_map(|(_, r)| r.get(t))
                    .map(|r| r.best_reward)
                    .collect();
                v.sort_by(f64::total_cmp);
                SummaryRow {
                    iter: t,
                    median: quantile(&v, 0.5),
                    q25: quantile(&v, 0.25),
                    q75: quantile(&v, 0.75),
                    seeds: v.len(),
                }
            })
            .collect();
        SummaryReport {
            runs: runs.iter().map(|(n, _)| n.clone()).collect(),
            series,
            final_best: runs
                .iter()
                .map(|(_, r)| r.last().map_or(f64::NAN, |x| x.best_reward))
                .collect(),
            lambda: runs
                .iter()
                .map(|(_, r)| r.iter().map(|x| x.lambda_used).collect())
                .collect(),
        }
    }

    /// Summarizes every JSONL file in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let files = jsonl_files(dir)?;
        if files.is_empty() {
            return Err(DvdError::Config(format!(
                "no .jsonl files in {}",
                dir.display()
            )));
        }
        let runs = files
            .iter()
            .map(|p| {
                let name = p
                    .file_stem()
                    .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                Ok((name, read_jsonl(p)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_runs(&runs))
    }

    pub fn final_median(&self) -> f64 {
        median(&self.final_best)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,median,q25,q75,seeds\n");
        for r in &self.series {
            s.push_str(&format!(
                "{},{:?},{:?},{:?},{}\n",
                r.iter, r.median, r.q25, r.q75, r.seeds
            ));
        }
        s
    }

    /// Plot data: the median/IQR series plus per-run finals and lambda paths.
    pub fn to_plot_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        fs::write(dir.join(format!("{stem}.json")), self.to_plot_json())?;
        Ok(())
    }
}
