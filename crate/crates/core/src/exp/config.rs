//! Run configuration and its INI-style text format.
//!
//! ```text
//! env = point
//! seeds = 0,1,2
//!
//! [es]
//! algo = dvd
//! sigma = 0.1
//!
//! [kernel]
//! kind = se
//! ```
//!
//! Keys may also be written dotted at top level (`es.sigma = 0.1`). Lines
//! starting with `#` or `;` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::embeddings::EmbeddingSource;
use crate::envs::{Env, EnvName, MultiModalPointConfig, PointWallConfig, TabularMdp};
use crate::error::{DvdError, Result};
use crate::es::EsConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvName,
    pub es: EsConfig,
    pub point: PointWallConfig,
    pub multimodal: MultiModalPointConfig,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
}

impl RunConfig {
    /// Defaults for an environment. The tabular MDP embeds policies by their
    /// action pair and uses a smaller search distribution.
    pub fn for_env(env: EnvName) -> Self {
        let mut es = EsConfig::default();
        if env == EnvName::Tabular {
            es.embedding.source = EmbeddingSource::Trajectory;
        }
        RunConfig {
            env,
            es,
            point: PointWallConfig::default(),
            multimodal: MultiModalPointConfig::default(),
            out: PathBuf::from("runs"),
            seeds: (0..10).collect(),
        }
    }

    pub fn build_env(&self) -> Env {
        match self.env {
            EnvName::Tabular => Env::Tabular(TabularMdp),
            EnvName::Point => Env::Point(self.point.clone()),
            EnvName::MultiModal => Env::MultiModal(self.multimodal.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(DvdError::Config("seed list is empty".into()));
        }
        self.es.validate()?;
        self.build_env()
            .validate()
            .map_err(|e| DvdError::Config(e.to_string()))
    }

    /// Renders every field. Floats use the shortest representation that
    /// parses back to the same value.
    pub fn render(&self) -> String {
        let es = &self.es;
        let mut s = String::new();
        let _ = writeln!(s, "env = {}", self.env);
        let _ = writeln!(s, "seeds = {}", join(self.seeds.iter()));
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "\n[es]");
        let _ = writeln!(s, "algo = {}", es.algo);
        let _ = writeln!(s, "sigma = {:?}", es.sigma);
        let _ = writeln!(s, "eta = {:?}", es.eta);
        let _ = writeln!(s, "k = {}", es.k);
        let _ = writeln!(s, "m = {}", es.m);
        let _ = writeln!(s, "iterations = {}", es.iterations);
        let _ = writeln!(
            s,
            "fixed_lambda = {}",
            es.fixed_lambda.map_or("none".into(), |l| format!("{l:?}"))
        );
        let _ = writeln!(
            s,
            "lambda_arms = {}",
            join(es.lambda_arms.iter().map(|l| format!("{l:?}")))
        );
        let _ = writeln!(s, "seed = {}", es.seed);
        let _ = writeln!(s, "antithetic = {}", es.antithetic);
        let _ = writeln!(s, "init = {}", es.init);
        let _ = writeln!(s, "hidden = {}", es.hidden);
        let _ = writeln!(
            s,
            "buffer_capacity = {}",
            es.buffer_capacity.map_or("auto".into(), |c| c.to_string())
        );
        let _ = writeln!(s, "wall_time = {}", es.record_wall_time);
        let _ = writeln!(s, "\n[kernel]");
        let _ = writeln!(s, "kind = {}", es.kernel.kind);
        let _ = writeln!(s, "length_scale = {:?}", es.kernel.length_scale);
        let _ = writeln!(s, "rq_alpha = {:?}", es.kernel.rq_alpha);
        let _ = writeln!(s, "\n[embedding]");
        let _ = writeln!(s, "n_states = {}", es.embedding.n_states);
        let _ = writeln!(s, "strategy = {}", es.embedding.strategy);
        let _ = writeln!(s, "update_every = {}", es.embedding.update_every);
        let _ = writeln!(s, "source = {}", es.embedding.source);
        let p = &self.point;
        let _ = writeln!(s, "\n[point]");
        let _ = writeln!(s, "start = {}", floats(&p.start));
        let _ = writeln!(s, "goal = {}", floats(&p.goal));
        let _ = writeln!(
            s,
            "wall = {}",
            floats(&[p.wall[0][0], p.wall[0][1], p.wall[1][0], p.wall[1][1]])
        );
        let _ = writeln!(s, "horizon = {}", p.horizon);
        let _ = writeln!(s, "max_step = {:?}", p.max_step);
        let mm = &self.multimodal;
        let _ = writeln!(s, "\n[multimodal]");
        let _ = writeln!(s, "start = {}", floats(&mm.start));
        let _ = writeln!(s, "horizon = {}", mm.horizon);
        let _ = writeln!(s, "max_step = {:?}", mm.max_step);
        s
    }

    /// Parses config text. Unknown keys are errors. Missing keys keep the
    /// defaults of the configured environment.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = entries(text)?;
        let env = match entries.get("env") {
            Some((_, v)) => v.parse()?,
            None => EnvName::Point,
        };
        let mut cfg = RunConfig::for_env(env);
        for (key, (line, value)) in &entries {
            cfg.set(key, value)
                .map_err(|e| DvdError::Config(format!("line {line}: {key}: {}", strip(e))))?;
        }
        Ok(cfg)
    }

    /// Sets one dotted key, e.g. `kernel.length_scale`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let es = &mut self.es;
        match key {
            "env" => self.env = value.parse()?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "out" => self.out = PathBuf::from(value),
            "es.algo" => es.algo = value.parse()?,
            "es.sigma" => es.sigma = num(value)?,
            "es.eta" => es.eta = num(value)?,
            "es.k" => es.k = num(value)?,
            "es.m" => es.m = num(value)?,
            "es.iterations" => es.iterations = num(value)?,
            "es.fixed_lambda" => {
                es.fixed_lambda = match value {
                    "none" | "" => None,
                    v => Some(num(v)?),
                }
            }
            "es.lambda_arms" => es.lambda_arms = list(value)?,
            "es.seed" => es.seed = num(value)?,
            "es.antithetic" => es.antithetic = num(value)?,
            "es.init" => es.init = value.parse()?,
            "es.hidden" => es.hidden = num(value)?,
            "es.buffer_capacity" => {
                es.buffer_capacity = match value {
                    "auto" | "" => None,
                    v => Some(num(v)?),
                }
            }
            "es.wall_time" => es.record_wall_time = num(value)?,
            "kernel.kind" => es.kernel.kind = value.parse()?,
            "kernel.length_scale" => es.kernel.length_scale = num(value)?,
            "kernel.rq_alpha" => es.kernel.rq_alpha = num(value)?,
            "embedding.n_states" => es.embedding.n_states = num(value)?,
            "embedding.strategy" => es.embedding.strategy = value.parse()?,
            "embedding.update_every" => es.embedding.update_every = num(value)?,
            "embedding.source" => es.embedding.source = value.parse()?,
            "point.start" => self.point.start = pair(value)?,
            "point.goal" => self.point.goal = pair(value)?,
            "point.wall" => {
                let v: Vec<f64> = list(value)?;
                if v.len() != 4 {
                    return Err(DvdError::Config(
                        "wall needs four numbers: x1,y1,x2,y2".into(),
                    ));
                }
                self.point.wall = [[v[0], v[1]], [v[2], v[3]]];
            }
            "point.horizon" => self.point.horizon = num(value)?,
            "point.max_step" => self.point.max_step = num(value)?,
            "multimodal.start" => self.multimodal.start = pair(value)?,
            "multimodal.horizon" => self.multimodal.horizon = num(value)?,
            "multimodal.max_step" => self.multimodal.max_step = num(value)?,
            other => return Err(DvdError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

fn strip(e: DvdError) -> String {
    match e {
        DvdError::Config(m) => m,
        other => other.to_string(),
    }
}

/// `key -> (line number, value)`, keys fully qualified with their section.
fn entries(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut section = String::new();
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| DvdError::Config(format!("line {}: expected 'key = value'", n + 1)))?;
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        if out
            .insert(key.clone(), (n + 1, v.trim().to_string()))
            .is_some()
        {
            return Err(DvdError::Config(format!(
                "line {}: duplicate key '{key}'",
                n + 1
            )));
        }
    }
    Ok(out)
}

fn num<T: FromStr>(v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| DvdError::Config(format!("cannot parse '{v}'")))
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>> {
    v.split(',').map(|p| num(p.trim())).collect()
}

fn pair(v: &str) -> Result<[f64; 2]> {
    let p: Vec<f64> = list(v)?;
    <[f64; 2]>::try_from(p)
        .map_err(|_| DvdError::Config(format!("expected two numbers, got '{v}'")))
}

fn join<I: Iterator<Item = T>, T: ToString>(it: I) -> String {
    it.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn floats(v: &[f64]) -> String {
    join(v.iter().map(|x| format!("{x:?}")))
}

/// Parses `0..9` (inclusive), `3`, or `0,2,5`.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let v = v.trim();
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (num(a.trim())?, num(b.trim_start_matches('=').trim())?);
        if b < a {
            return Err(DvdError::Config(format!("empty seed range '{v}'")));
        }
        return Ok((a..=b).collect());
    }
    list(v)
}
