//! Command-line front end: simulate, fit, predict, evaluate, rank-select, sweep.
//!
//! Exit status is 0 on success, 1 for usage or configuration errors and 2 for
//! runtime failures. Every error is reported as one line on stderr.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use tensorclass::config::{parse_number, parse_number_list, Settings};
use tensorclass::io::{read_json, DatasetMeta};
use tensorclass::pipeline::{self, replicate_dirs, SimulateOptions, SweepParam};
use tensorclass::{Error, FitConfig, InitStrategy, Loss, MdgdpHyper, ModelKind};

#[derive(Parser, Debug)]
#[command(name = "tensorclass", version, about = "Bayesian tensor classifiers")]
struct Cli {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate datasets with known coefficient tensors.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on the training rows of each dataset.
    Fit(FitArgs),
    /// Score the test rows of a dataset with a fitted chain.
    Predict(PredictArgs),
    /// Estimation, classification and selection metrics per replicate.
    Evaluate(EvaluateArgs),
    /// Compare ranks by DIC.
    RankSelect(RankSelectArgs),
    /// Prior hyperparameter sensitivity on simulated replicates.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    scenario: Option<u8>,
    #[arg(long)]
    loss: Option<Loss>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated tensor dimensions.
    #[arg(long)]
    dims: Option<String>,
    /// Rank of the generating tensor (scenario 1 only).
    #[arg(long)]
    true_rank: Option<usize>,
    #[arg(long)]
    extra_scalars: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Base RNG stream; replicate k uses stream + k.
    #[arg(long)]
    stream: Option<u64>,
    #[arg(long)]
    init: Option<InitStrategy>,
    #[arg(long)]
    gamma_precision: Option<f64>,
    #[arg(long)]
    random_scan: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    alpha: Option<Num>,
    #[arg(long)]
    a_lambda: Option<Num>,
    #[arg(long)]
    a_tau: Option<Num>,
    /// Also store the margin draws.
    #[arg(long)]
    keep_margins: bool,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    chain: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    chain: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory holding the truth tensors; defaults to --data.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankSelectArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Comma-separated candidate ranks.
    #[arg(long)]
    ranks: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    param: Option<SweepParam>,
    /// Comma-separated values; `a/b` and `a^b` are accepted.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A number written as a decimal, `a/b` or `a^b`.
#[derive(Debug, Clone, Copy)]
struct Num(f64);

impl FromStr for Num {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        parse_number(s).map(Num)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Display wrapper so paths can pass through [`Settings`].
#[derive(Debug, Clone)]
struct PathArg(PathBuf);

impl FromStr for PathArg {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(PathArg(PathBuf::from(s)))
    }
}

impl fmt::Display for PathArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.display().fmt(f)
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: usage: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: usage: {}", one_line(&msg));
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: runtime: {}", one_line(&msg));
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut s = Settings::from_path(cli.config.as_deref())?;
    let threads = s.resolve_opt("threads", cli.threads)?;
    if let Some(t) = threads {
        if t == 0 {
            return Err(Failure::Usage("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => {
            let seed = s.resolve("seed", a.seed, SimulateOptions::default().seed)?;
            let opts = sim_options(&mut s, &a.sim, seed, None)?;
            let out = required_path(&mut s, "out", a.out)?;
            let resolved = s.finish()?;
            pipeline::simulate(&out, &opts, &resolved)?;
        }
        Command::Fit(a) => {
            let data = required_path(&mut s, "data", a.data)?;
            let out = required_path(&mut s, "out", a.out)?;
            let (model, mut config) = fit_config(&mut s, &a.chain)?;
            config.keep_margins = s.resolve("keep-margins", a.keep_margins.then_some(true), false)?;
            let alpha = s.resolve_opt("alpha", a.alpha)?;
            let a_lambda = s.resolve_opt("a-lambda", a.a_lambda)?;
            let a_tau = s.resolve_opt("a-tau", a.a_tau)?;
            if alpha.is_some() || a_lambda.is_some() || a_tau.is_some() {
                let ndim = dataset_order(&data)?;
                let mut h = MdgdpHyper::defaults(config.rank, ndim);
                if let Some(Num(v)) = alpha {
                    h = h.with_alpha(v, config.rank, ndim);
                }
                if let Some(Num(v)) = a_lambda {
                    h = h.with_a_lambda(v, ndim);
                }
                if let Some(Num(v)) = a_tau {
                    h.a_tau = v;
                }
                h.validate()?;
                config.hyper = Some(h);
            }
            let resolved = s.finish()?;
            pipeline::fit(&data, &out, model, &config, &resolved)?;
        }
        Command::Predict(a) => {
            let chain = required_path(&mut s, "chain", a.chain)?;
            let data = required_path(&mut s, "data", a.data)?;
            let out = required_path(&mut s, "out", a.out)?;
            s.finish()?;
            pipeline::predict(&chain, &data, &out)?;
        }
        Command::Evaluate(a) => {
            let chain = required_path(&mut s, "chain", a.chain)?;
            let data = required_path(&mut s, "data", a.data)?;
            let truth = s
                .resolve_opt("truth", a.truth.map(PathArg))?
                .map_or_else(|| data.clone(), |p| p.0);
            let out = required_path(&mut s, "out", a.out)?;
            s.finish()?;
            let rows = pipeline::evaluate(&chain, &data, &truth, &out)?;
            println!("evaluated {} replicate(s) -> {}", rows.len(), out.display());
        }
        Command::RankSelect(a) => {
            let data = required_path(&mut s, "data", a.data)?;
            let out = required_path(&mut s, "out", a.out)?;
            let (model, config) = fit_config(&mut s, &a.chain)?;
            let ranks_text: String = s.resolve("ranks", a.ranks, "2,3,4,5".to_string())?;
            let ranks = parse_ranks(&ranks_text)?;
            let resolved = s.finish()?;
            let chosen = pipeline::rank_select(&data, &out, model, &ranks, &config, &resolved)?;
            for (k, r) in chosen.iter().enumerate() {
                println!("replicate {k}: rank {r}");
            }
        }
        Command::Sweep(a) => {
            let out = required_path(&mut s, "out", a.out)?;
            let (model, config) = fit_config(&mut s, &a.chain)?;
            let param: SweepParam = s.resolve("param", a.param, SweepParam::Alpha)?;
            let values = match s.resolve_opt("values", a.values)? {
                Some(text) => parse_number_list(&text)?,
                None => param.default_values(),
            };
            let opts = sim_options(&mut s, &a.sim, config.seed, Some(model))?;
            let resolved = s.finish()?;
            let rows = pipeline::sweep(&out, model, param, &values, &opts, &config, &resolved)?;
            for r in &rows {
                println!("{param}={} RMSE={:.4} sd={:.4}", r.value, r.mean(), r.sd());
            }
        }
    }
    Ok(())
}

fn required_path(s: &mut Settings, key: &str, cli: Option<PathBuf>) -> Result<PathBuf, Failure> {
    s.resolve_opt(key, cli.map(PathArg))?
        .map(|p| p.0)
        .ok_or_else(|| Failure::Usage(format!("missing required --{key}")))
}

fn sim_options(s: &mut Settings, a: &SimArgs, seed: u64, model: Option<ModelKind>) -> Result<SimulateOptions, Failure> {
    let d = SimulateOptions::default();
    let (scenario, loss) = match model {
        Some(m) => pipeline::sweep_scenario(m),
        None => (d.scenario, d.loss),
    };
    let dims_text: String = s.resolve("dims", a.dims.clone(), "48,48".to_string())?;
    let dims = dims_text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::Usage(format!("cannot parse dims '{dims_text}'")))?;
    Ok(SimulateOptions {
        scenario: s.resolve("scenario", a.scenario, scenario)?,
        loss: s.resolve("loss", a.loss, loss)?,
        n: s.resolve("n", a.n, d.n)?,
        seed,
        replicates: s.resolve(
            "replicates",
            a.replicates,
            if model.is_some() { 10 } else { d.replicates },
        )?,
        dims,
        true_rank: s.resolve("true-rank", a.true_rank, d.true_rank)?,
        extra_scalars: s.resolve("extra-scalars", a.extra_scalars, d.extra_scalars)?,
        train_fraction: s.resolve("train-fraction", a.train_fraction, d.train_fraction)?,
    })
}

fn fit_config(s: &mut Settings, a: &ChainArgs) -> Result<(ModelKind, FitConfig), Failure> {
    let d = FitConfig::default();
    let model = s.resolve("model", a.model, ModelKind::BtSvm)?;
    let config = FitConfig {
        rank: s.resolve("rank", a.rank, d.rank)?,
        iterations: s.resolve("iters", a.iters, d.iterations)?,
        burn_in: s.resolve("burnin", a.burnin, d.burn_in)?,
        thin: s.resolve("thin", a.thin, d.thin)?,
        seed: s.resolve("seed", a.seed, d.seed)?,
        stream: s.resolve("stream", a.stream, d.stream)?,
        sigma2: s.resolve("sigma2", a.sigma2, d.sigma2)?,
        gamma_precision: s.resolve("gamma-precision", a.gamma_precision, d.gamma_precision)?,
        init: s.resolve("init", a.init, d.init)?,
        random_scan: s.resolve("random-scan", a.random_scan.then_some(true), d.random_scan)?,
        ..d
    };
    config.validate()?;
    Ok((model, config))
}

fn parse_ranks(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::Usage(format!("cannot parse ranks '{text}'")))
}

fn dataset_order(data: &Path) -> Result<usize, Failure> {
    let first = replicate_dirs(data, "dataset.json")?;
    let meta: DatasetMeta = read_json(&first[0].join("dataset.json"))?;
    Ok(meta.dims.len())
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn numbers_accept_fractions_and_powers() {
        assert!((Num::from_str("1/3").unwrap().0 - 1.0 / 3.0).abs() < 1e-15);
        assert!(Num::from_str("3^").is_err());
    }
}
