//! Experiment runner: resolve a configuration from defaults, an optional
//! flat key-value config file, and command-line flags (highest precedence),
//! then execute the selected estimators over one or more seeds and write CSV
//! artifacts.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime/numerical error,
//! 3 connectivity abort.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;

use distgp::consensus::WeightScheme;
use distgp::kernel::{KernelFamily, KernelSpec};
use distgp::nystrom::AxisBox;
use distgp::sim::{self, output, Cloud, ConnectivityPolicy, RunLog, SimConfig};
use distgp::{Error, Result};

/// Command-line flags. Every flag overrides the corresponding config-file
/// key; unset flags leave the file value (or default) in place.
#[derive(Debug, Parser)]
#[command(name = "distgp", version, about = "Distributed field-estimation experiment runner")]
pub struct Cli {
    /// Flat key-value config file (see `config file keys` in the README).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of agents.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Number of representative points.
    #[arg(long)]
    pub features: Option<usize>,
    /// Kernel family: rbf | laplace.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Kernel length scale.
    #[arg(long)]
    pub lengthscale: Option<f64>,
    /// Process-noise standard deviation (coefficient drift per step).
    #[arg(long = "sigma-omega")]
    pub sigma_omega: Option<f64>,
    /// Measurement-noise standard deviation.
    #[arg(long = "sigma-nu")]
    pub sigma_nu: Option<f64>,
    /// Steps between measurement updates (consensus runs every step).
    #[arg(long = "sensing-period")]
    pub sensing_period: Option<u64>,
    /// Simulation horizon T.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Seed for single-seed runs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated seed list for multi-seed aggregation (overrides
    /// --seed).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Comma-separated estimators to run: distkp, oracle, baseline.
    #[arg(long, value_delimiter = ',')]
    pub runs: Option<Vec<String>>,
    /// Forgetting factor of the baseline.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Connectivity policy: warn | abort.
    #[arg(long)]
    pub connectivity: Option<String>,
    /// Consensus weighting: uniform | metropolis.
    #[arg(long)]
    pub weights: Option<String>,
}

/// Which estimators an experiment executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunSelector {
    Distkp,
    Oracle,
    Baseline,
}

impl RunSelector {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "distkp" => Ok(Self::Distkp),
            "oracle" => Ok(Self::Oracle),
            "baseline" => Ok(Self::Baseline),
            other => Err(Error::InvalidInput(format!(
                "unknown run selector '{other}' (expected distkp, oracle, baseline)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Distkp => "distkp",
            Self::Oracle => "oracle",
            Self::Baseline => "baseline",
        }
    }
}

/// Fully resolved experiment: simulation config plus runner choices.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config: SimConfig,
    pub runs: Vec<RunSelector>,
    pub lambda: f64,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            config: SimConfig::default(),
            runs: vec![RunSelector::Distkp, RunSelector::Oracle, RunSelector::Baseline],
            lambda: 0.99,
            out_dir: PathBuf::from("out"),
            seeds: vec![SimConfig::default().seed],
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.runs.is_empty() {
            return Err(Error::InvalidInput("no runs selected".into()));
        }
        let unique: BTreeSet<_> = self.seeds.iter().collect();
        if unique.len() != self.seeds.len() {
            return Err(Error::InvalidInput("seeds must be distinct".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("seed list must be non-empty".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Resolve the experiment from parsed flags: defaults, then the config file
/// (if any), then the flags themselves.
pub fn parse_args_and_config(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    let mut seed_from_file = None;
    let mut seeds_from_file = None;

    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{}:{}: expected 'key = value', got '{raw}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            apply_config_key(
                &mut spec,
                key.trim(),
                value.trim(),
                &mut seed_from_file,
                &mut seeds_from_file,
            )?;
        }
    }

    // Flags override file values.
    let c = &mut spec.config;
    if let Some(v) = cli.agents {
        c.n_agents = v;
    }
    if let Some(v) = cli.features {
        c.feature_count = v;
    }
    let mut family = c.kernel.family();
    let mut lengthscale = c.kernel.lengthscale();
    if let Some(k) = &cli.kernel {
        family = parse_kernel_family(k)?;
    }
    if let Some(l) = cli.lengthscale {
        lengthscale = l;
    }
    c.kernel = KernelSpec::new(family, lengthscale)
        .map_err(|e| Error::InvalidInput(format!("lengthscale: {e}")))?;
    if let Some(v) = cli.sigma_omega {
        c.sigma_omega = v;
    }
    if let Some(v) = cli.sigma_nu {
        c.sigma_nu = v;
    }
    if let Some(v) = cli.sensing_period {
        c.sensing_period = v;
    }
    if let Some(v) = cli.steps {
        c.horizon = v;
    }
    if let Some(v) = &cli.connectivity {
        c.connectivity = ConnectivityPolicy::parse(v).ok_or_else(|| {
            Error::InvalidInput(format!("connectivity: expected warn|abort, got '{v}'"))
        })?;
    }
    if let Some(v) = &cli.weights {
        c.weights = WeightScheme::parse(v).ok_or_else(|| {
            Error::InvalidInput(format!("weights: expected uniform|metropolis, got '{v}'"))
        })?;
    }
    if let Some(v) = cli.lambda {
        spec.lambda = v;
    }
    if let Some(v) = &cli.out {
        spec.out_dir = v.clone();
    }
    if let Some(rs) = &cli.runs {
        spec.runs = parse_runs(rs.iter().map(String::as_str))?;
    }

    // Seed precedence: --seeds > --seed > file seeds > file seed > default.
    let seed_flag = cli.seed;
    spec.seeds = if let Some(list) = &cli.seeds {
        list.clone()
    } else if let Some(s) = seed_flag {
        vec![s]
    } else if let Some(list) = seeds_from_file {
        list
    } else if let Some(s) = seed_from_file {
        vec![s]
    } else {
        vec![spec.config.seed]
    };

    spec.validate()?;
    Ok(spec)
}

fn parse_kernel_family(s: &str) -> Result<KernelFamily> {
    match s {
        "rbf" => Ok(KernelFamily::Rbf),
        "laplace" => Ok(KernelFamily::Laplace),
        other => Err(Error::InvalidInput(format!(
            "kernel: expected rbf|laplace, got '{other}'"
        ))),
    }
}

fn parse_runs<'a>(items: impl Iterator<Item = &'a str>) -> Result<Vec<RunSelector>> {
    let mut out = Vec::new();
    for item in items {
        let sel = RunSelector::parse(item.trim())?;
        if !out.contains(&sel) {
            out.push(sel);
        }
    }
    Ok(out)
}

fn apply_config_key(
    spec: &mut ExperimentSpec,
    key: &str,
    value: &str,
    seed_from_file: &mut Option<u64>,
    seeds_from_file: &mut Option<Vec<u64>>,
) -> Result<()> {
    let bad = |what: &str| Error::InvalidInput(format!("config key '{key}': bad {what} '{value}'"));
    let parse_f64 = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("number"));
    let parse_u64 = |v: &str| v.trim().parse::<u64>().map_err(|_| bad("integer"));
    let parse_usize = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("integer"));
    let parse_bool = |v: &str| match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad("boolean")),
    };

    let c = &mut spec.config;
    match key {
        "agents" => c.n_agents = parse_usize(value)?,
        "features" => c.feature_count = parse_usize(value)?,
        "kernel" => {
            c.kernel = KernelSpec::new(parse_kernel_family(value)?, c.kernel.lengthscale())
                .map_err(|e| Error::InvalidInput(format!("config key 'kernel': {e}")))?
        }
        "lengthscale" => {
            c.kernel = KernelSpec::new(c.kernel.family(), parse_f64(value)?)
                .map_err(|e| Error::InvalidInput(format!("config key 'lengthscale': {e}")))?
        }
        "sigma_omega" => c.sigma_omega = parse_f64(value)?,
        "sigma_nu" => c.sigma_nu = parse_f64(value)?,
        "sigma_init" => c.sigma_init = parse_f64(value)?,
        "comm_range" => c.comm_range = Some(parse_f64(value)?),
        "u_max" => c.u_max = parse_f64(value)?,
        "step_std" => c.step_std = parse_f64(value)?,
        "sensing_period" => c.sensing_period = parse_u64(value)?,
        "steps" => c.horizon = parse_u64(value)?,
        "seed" => *seed_from_file = Some(parse_u64(value)?),
        "seeds" => {
            let mut list = Vec::new();
            for item in value.split(',') {
                list.push(parse_u64(item)?);
            }
            *seeds_from_file = Some(list);
        }
        "weights" => {
            c.weights = WeightScheme::parse(value).ok_or_else(|| bad("weight scheme"))?
        }
        "connectivity" => {
            c.connectivity = ConnectivityPolicy::parse(value).ok_or_else(|| bad("policy"))?
        }
        "domain" => {
            let parts: Vec<f64> = value
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad("box")))
                .collect::<Result<_>>()?;
            if parts.len() != 4 {
                return Err(bad("box (expected x0,y0,x1,y1)"));
            }
            c.domain = AxisBox::new(vec![parts[0], parts[1]], vec![parts[2], parts[3]])
                .map_err(|e| Error::InvalidInput(format!("config key 'domain': {e}")))?;
        }
        "checkpoints" => {
            let mut list = Vec::new();
            for item in value.split(',') {
                list.push(parse_u64(item)?);
            }
            c.checkpoints = list;
        }
        "eval_grid" => c.eval_grid = parse_usize(value)?,
        "rel_threshold" => c.rel_threshold = parse_f64(value)?,
        "alg1_literal" => c.alg1_literal = parse_bool(value)?,
        "clouds" => {
            let mut clouds = Vec::new();
            for group in value.split(';') {
                let parts: Vec<f64> = group
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| bad("cloud")))
                    .collect::<Result<_>>()?;
                if parts.len() != 6 {
                    return Err(bad("cloud (expected cx,cy,vx,vy,amplitude,radius)"));
                }
                clouds.push(
                    Cloud::new(
                        vec![parts[0], parts[1]],
                        vec![parts[2], parts[3]],
                        parts[4],
                        parts[5],
                    )
                    .map_err(|e| Error::InvalidInput(format!("config key 'clouds': {e}")))?,
                );
            }
            c.clouds = Some(clouds);
        }
        "runs" => spec.runs = parse_runs(value.split(','))?,
        "lambda" => spec.lambda = parse_f64(value)?,
        "out" => spec.out_dir = PathBuf::from(value),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown config key '{other}'"
            )))
        }
    }
    Ok(())
}

/// Final RMSE of each executed run, per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub rows: Vec<(RunSelector, u64, f64)>,
}

impl ExperimentSummary {
    pub fn mean_and_std(&self, run: RunSelector) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|(r, _, _)| *r == run)
            .map(|(_, _, v)| *v)
            .collect();
        if vals.is_empty() {
            return None;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some((mean, var.sqrt()))
    }
}

/// Execute every selected run for every seed, writing per-seed artifact
/// directories plus an aggregate `summary.csv` (per-seed rows followed by
/// mean and population-std rows per run).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;

    let mut summary = ExperimentSummary { rows: Vec::new() };
    for &seed in &spec.seeds {
        let mut config = spec.config.clone();
        config.seed = seed;

        let mut logs: Vec<RunLog> = Vec::new();
        for run in &spec.runs {
            let result = match run {
                RunSelector::Distkp => sim::run_distkp(&config),
                RunSelector::Oracle => sim::run_centralized_oracle(&config),
                RunSelector::Baseline => sim::run_forgetting_baseline(&config, spec.lambda),
            };
            match result {
                Ok(log) => {
                    summary.rows.push((*run, seed, log.final_rmse()));
                    logs.push(log);
                }
                Err(e) => {
                    eprintln!(
                        "seed {seed}, run '{}' failed: {e}; artifacts for this seed are incomplete",
                        run.name()
                    );
                    return Err(e);
                }
            }
        }

        let seed_dir = spec.out_dir.join(format!("seed_{seed}"));
        let refs: Vec<&RunLog> = logs.iter().collect();
        output::write_run_artifacts(&seed_dir, &refs)?;
        for log in &logs {
            if !log.disconnected_steps.is_empty() {
                eprintln!(
                    "seed {seed}, run '{}': communication graph disconnected at {} of {} steps",
                    log.kind.name(),
                    log.disconnected_steps.len(),
                    log.metrics.len()
                );
            }
        }
    }

    let mut csv = String::from("run,seed,final_rmse\n");
    for (run, seed, rmse) in &summary.rows {
        let _ = writeln!(csv, "{},{seed},{rmse:.9e}", run.name());
    }
    for run in &spec.runs {
        if let Some((mean, std)) = summary.mean_and_std(*run) {
            let _ = writeln!(csv, "{},mean,{mean:.9e}", run.name());
            let _ = writeln!(csv, "{},std,{std:.9e}", run.name());
        }
    }
    fs::write(spec.out_dir.join("summary.csv"), csv)?;
    Ok(summary)
}

/// Exit code for a failed experiment.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::DimensionMismatch(_, _) => 1,
        Error::Numerical(_) | Error::Io(_) => 2,
        Error::Disconnected { .. } => 3,
    }
}

/// Parse flags, resolve the spec, run it, and print the aggregate summary.
pub fn run_from_cli(cli: &Cli) -> Result<()> {
    let spec = parse_args_and_config(cli)?;
    let summary = run_experiment(&spec)?;
    for run in &spec.runs {
        if let Some((mean, std)) = summary.mean_and_std(*run) {
            println!(
                "{:<8} final RMSE over {} seed(s): {mean:.6} +/- {std:.6}",
                run.name(),
                spec.seeds.len()
            );
        }
    }
    println!("artifacts written to {}", spec.out_dir.display());
    Ok(())
}

/// Round-trip reader for `summary.csv`, used by tests.
pub fn read_summary_csv(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty summary".into()))?;
    if header != "run,seed,final_rmse" {
        return Err(Error::InvalidInput(format!("unexpected header: {header}")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::InvalidInput(format!("bad row: {line}")));
        }
        let v = f[2]
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad value: {}", f[2])))?;
        rows.push((f[0].to_string(), f[1].to_string(), v));
    }
    Ok(rows)
}
