//! Experiment plumbing: configs, seed loops, sweeps, logs and reports.

pub mod config;
pub mod oracle;
pub mod report;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{DvdError, Result};
use crate::es::{run, IterationRecord};
use crate::kernels::KernelKind;

pub use config::{parse_seeds, RunConfig};
pub use report::{median, quantile, read_jsonl, write_jsonl, SummaryReport};

/// Worker count from `DVD_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("DVD_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Runs every seed of `cfg`, writing `seed_<s>.jsonl` per seed and
/// `summary.csv` into `out`.
pub fn run_seeds(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Result<SummaryReport> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.ini"), cfg.render())?;
    let env = cfg.build_env();
    let mut runs: Vec<(String, Vec<IterationRecord>)> = Vec::new();
    for &seed in &cfg.seeds {
        let mut es = cfg.es.clone();
        es.seed = seed;
        let records = run(&es, &env, threads)?;
        let name = format!("seed_{seed}");
        write_jsonl(&out.join(format!("{name}.jsonl")), &records)?;
        runs.push((name, records));
    }
    let summary = SummaryReport::from_runs(&runs);
    fs::write(out.join("summary.csv"), summary.to_csv())?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Kernel,
    NStates,
    Strategy,
    FixedLambda,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Kernel => "kernel",
            SweepAxis::NStates => "n_states",
            SweepAxis::Strategy => "strategy",
            SweepAxis::FixedLambda => "fixed_lambda",
        }
    }

    pub fn default_values(self) -> Vec<String> {
        let v: Vec<&str> = match self {
            SweepAxis::Kernel => KernelKind::ALL.iter().map(|k| k.name()).collect(),
            SweepAxis::NStates => vec!["5", "10", "20", "50"],
            SweepAxis::Strategy => vec!["random", "maxvar", "dpp"],
            SweepAxis::FixedLambda => vec!["none", "0.5"],
        };
        v.into_iter().map(String::from).collect()
    }

    /// Applies one axis value to a copy of `base`.
    pub fn apply(self, base: &RunConfig, value: &str) -> Result<RunConfig> {
        let mut cfg = base.clone();
        let key = match self {
            SweepAxis::Kernel => "kernel.kind",
            SweepAxis::NStates => "embedding.n_states",
            SweepAxis::Strategy => "embedding.strategy",
            SweepAxis::FixedLambda => "es.fixed_lambda",
        };
        cfg.set(key, value)?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = DvdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(SweepAxis::Kernel),
            "n_states" | "n-states" => Ok(SweepAxis::NStates),
            "strategy" => Ok(SweepAxis::Strategy),
            "fixed_lambda" | "fixed-lambda" => Ok(SweepAxis::FixedLambda),
            other => Err(DvdError::Config(format!(
                "unknown sweep axis '{other}', valid: kernel, n_states, strategy, fixed_lambda"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: String,
    pub summary: SummaryReport,
}

/// One cell per axis value under `out/<axis>_<value>/`, plus
/// `out/comparison.csv` with the median final best of each cell.
pub fn sweep(
    base: &RunConfig,
    axis: SweepAxis,
    values: &[String],
    out: &Path,
    threads: Option<usize>,
) -> Result<Vec<SweepCell>> {
    if values.is_empty() {
        return Err(DvdError::Config("sweep needs at least one value".into()));
    }
    let cfgs = values
        .iter()
        .map(|v| {
            axis.apply(base, v)
                .map_err(|e| DvdError::Config(format!("{axis} = {v}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    for c in &cfgs {
        c.validate()?;
    }
    fs::create_dir_all(out)?;
    let mut cells = Vec::new();
    for (value, cfg) in values.iter().zip(&cfgs) {
        let dir = out.join(format!("{axis}_{value}"));
        let summary = run_seeds(cfg, &dir, threads)?;
        cells.push(SweepCell {
            value: value.clone(),
            summary,
        });
    }
    fs::write(out.join("comparison.csv"), comparison_csv(axis, &cells))?;
    Ok(cells)
}

pub fn comparison_csv(axis: SweepAxis, cells: &[SweepCell]) -> String {
    let mut s = format!("{axis},median_final_best,q25,q75,seeds\n");
    for c in cells {
        let mut v = c.summary.final_best.clone();
        v.sort_by(f64::total_cmp);
        s.push_str(&format!(
            "{},{:?},{:?},{:?},{}\n",
            c.value,
            quantile(&v, 0.5),
            quantile(&v, 0.25),
            quantile(&v, 0.75),
            v.len()
        ));
    }
    s
}
