use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dvd_core::exp::{self, oracle, RunConfig, SummaryReport, SweepAxis};
use dvd_core::kernels::KernelSpec;
use dvd_core::DvdError;

#[derive(Parser)]
#[command(
    name = "dvd",
    version,
    about = "Population-based ES with determinant diversity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one population per seed and write JSONL logs plus summary.csv.
    Run(RunArgs),
    /// Repeat `run` across the values of one axis.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// kernel, n_states, strategy or fixed_lambda.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values; defaults depend on the axis.
        #[arg(long)]
        values: Option<String>,
    },
    /// Check the diversity measure against its known properties.
    Oracle {
        /// Kernel for the tabular enumeration.
        #[arg(long, default_value = "se")]
        kernel: String,
        /// Also write the verdicts to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a directory of JSONL logs (median and IQR of best reward).
    Report {
        dir: PathBuf,
        /// Output directory; defaults to DIR.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// tabular, point or multimodal.
    #[arg(long)]
    env: Option<String>,
    /// vanilla, nsr or dvd.
    #[arg(long)]
    algo: Option<String>,
    /// `0..9`, `3` or `0,4,7`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// A value in [0, 1), or `none` for the bandit.
    #[arg(long)]
    fixed_lambda: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    n_states: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    population: Option<String>,
    #[arg(long)]
    sensings: Option<String>,
    /// Any config key, e.g. `--set kernel.length_scale=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, DvdError> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| DvdError::Config(format!("{}: {e}", p.display())))?;
                RunConfig::parse(&text)?
            }
            None => match &self.env {
                Some(e) => RunConfig::for_env(e.parse()?),
                None => RunConfig::for_env(dvd_core::envs::EnvName::Point),
            },
        };
        let flags = [
            ("env", &self.env),
            ("es.algo", &self.algo),
            ("seeds", &self.seeds),
            ("es.fixed_lambda", &self.fixed_lambda),
            ("kernel.kind", &self.kernel),
            ("embedding.n_states", &self.n_states),
            ("embedding.strategy", &self.strategy),
            ("es.iterations", &self.iterations),
            ("es.m", &self.population),
            ("es.k", &self.sensings),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)
                    .map_err(|e| DvdError::Config(format!("--{key}: {e}")))?;
            }
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| DvdError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fail(e: DvdError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        DvdError::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = exp::threads_from_env();
    match cli.command {
        Command::Run(args) => {
            let cfg = match args.resolve() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match exp::run_seeds(&cfg, &cfg.out, threads) {
                Ok(s) => {
                    println!(
                        "{} seeds -> {} (median final best {:.4})",
                        s.runs.len(),
                        cfg.out.display(),
                        s.final_median()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { run, axis, values } => {
            let (cfg, axis) = match run
                .resolve()
                .and_then(|c| Ok((c, axis.parse::<SweepAxis>()?)))
            {
                Ok(x) => x,
                Err(e) => return fail(e),
            };
            let values: Vec<String> = match values {
                Some(v) => v.split(',').map(|s| s.trim().to_string()).collect(),
                None => axis.default_values(),
            };
            match exp::sweep(&cfg, axis, &values, &cfg.out, threads) {
                Ok(cells) => {
                    print!("{}", exp::comparison_csv(axis, &cells));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Oracle { kernel, out } => {
            let spec = match kernel.parse().and_then(|k| KernelSpec::new(k, 1.0)) {
                Ok(s) => s,
                Err(e) => return fail(DvdError::Config(e.to_string())),
            };
            let verdicts = match oracle::run_all(&spec) {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            let text = serde_json::to_string_pretty(&verdicts).expect("verdicts serialize");
            println!("{text}");
            if let Some(p) = out {
                if let Err(e) = fs::write(&p, &text) {
                    return fail(e.into());
                }
            }
            if verdicts.iter().all(|v| v.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Report { dir, out } => {
            if !dir.is_dir() {
                return fail(DvdError::Config(format!(
                    "{} is not a directory",
                    dir.display()
                )));
            }
            let report = match SummaryReport::from_dir(&dir) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let out = out.unwrap_or_else(|| dir.clone());
            if let Err(e) = fs::create_dir_all(&out)
                .map_err(DvdError::from)
                .and_then(|_| report.write(&out, "report"))
            {
                return fail(e);
            }
            println!(
                "{} runs -> {}",
                report.runs.len(),
                out.join("report.csv").display()
            );
            ExitCode::SUCCESS
        }
    }
}
