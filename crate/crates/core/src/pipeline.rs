//! End-to-end commands over dataset and chain directories: simulate, fit,
//! predict, evaluate, rank selection and hyperparameter sweeps.
//!
//! A directory either holds one dataset (or chain) directly or holds
//! `rep_000`, `rep_001`, ... subdirectories, one per replicate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth, Loss, Split};
use crate::error::{Error, Result};
use crate::io::{
    dataset_hash, fmt_opt, read_chain_dir, read_dataset_dir, read_truth_dir, write_chain_dir, write_csv,
    write_dataset_dir, write_json, write_pgm, RunManifest,
};
use crate::metrics::{
    classification_metrics, dic, estimation_metrics, selection_metrics, support, DicResult, PosteriorSummary,
};
use crate::prior::MdgdpHyper;
use crate::sampler::{run_chain_lr, run_chain_svm, ChainOutput, FitConfig, ModelKind};
use crate::simgen::{simulate_dataset, ScenarioSpec, SimulationSpec};

pub const CREDIBLE_LEVEL: f64 = 0.95;

pub fn replicate_dir(root: &Path, rep: usize) -> PathBuf {
    root.join(format!("rep_{rep:03}"))
}

/// `[root]` when `root/marker` exists, else the sorted `rep_*` children
/// that contain `marker`.
pub fn replicate_dirs(root: &Path, marker: &str) -> Result<Vec<PathBuf>> {
    if root.join(marker).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("rep_"))
                && p.join(marker).is_file()
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Config(format!(
            "{} has no {marker} (directly or in rep_* subdirectories)",
            root.display()
        )));
    }
    Ok(dirs)
}

fn write_manifest(dir: &Path, mut manifest: RunManifest, files: &[PathBuf], started: Instant) -> Result<()> {
    manifest.add_outputs(dir, files)?;
    manifest.elapsed_seconds = started.elapsed().as_secs_f64();
    write_json(&dir.join("manifest.json"), &manifest)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOptions {
    pub scenario: u8,
    pub loss: Loss,
    pub n: usize,
    pub seed: u64,
    pub replicates: usize,
    pub dims: Vec<usize>,
    pub true_rank: usize,
    pub extra_scalars: usize,
    pub train_fraction: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            scenario: 2,
            loss: Loss::Svm,
            n: 400,
            seed: 1,
            replicates: 1,
            dims: vec![48, 48],
            true_rank: 3,
            extra_scalars: 0,
            train_fraction: 0.7,
        }
    }
}

impl SimulateOptions {
    pub fn spec(&self, replicate: usize) -> SimulationSpec {
        let scenario = ScenarioSpec {
            id: self.scenario,
            dims: self.dims.clone(),
            true_rank: self.true_rank,
            seed: self.seed,
        };
        SimulationSpec {
            n: self.n,
            extra_scalars: self.extra_scalars,
            train_fraction: self.train_fraction,
            replicate: replicate as u32,
            ..SimulationSpec::new(scenario, self.loss)
        }
    }
}

/// Writes one dataset directory per replicate; returns the directories.
pub fn simulate(out: &Path, opts: &SimulateOptions, config: &BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
    if opts.replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    let dirs: Vec<PathBuf> = if opts.replicates == 1 {
        vec![out.to_path_buf()]
    } else {
        (0..opts.replicates).map(|r| replicate_dir(out, r)).collect()
    };
    dirs.par_iter()
        .enumerate()
        .map(|(rep, dir)| {
            let started = Instant::now();
            let (data, split) = simulate_dataset(&opts.spec(rep))?;
            let mut info = BTreeMap::new();
            info.insert("scenario".into(), opts.scenario.to_string());
            info.insert("loss".into(), opts.loss.to_string());
            info.insert("seed".into(), opts.seed.to_string());
            info.insert("replicate".into(), rep.to_string());
            let files = write_dataset_dir(dir, &data, &split, info)?;
            let mut m = RunManifest::new("simulate", config.clone(), Some(opts.seed));
            m.dataset_sha256 = Some(dataset_hash(dir)?);
            write_manifest(dir, m, &files, started)
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(dirs)
}

// ---------------------------------------------------------------- fit

/// Run one chain on the training rows, relabelling to the model's convention.
pub fn fit_dataset(data: &Dataset, split: &Split, model: ModelKind, config: &FitConfig) -> Result<ChainOutput> {
    let train = data.subset(&split.train).with_convention(model.convention());
    match model {
        ModelKind::BtSvm => run_chain_svm(&train, config),
        ModelKind::BtLr => run_chain_lr(&train, config),
    }
}

/// Fits every replicate under `data_dir` into the mirrored layout under
/// `out`. Replicate `k` uses RNG stream `config.stream + k`.
pub fn fit(
    data_dir: &Path,
    out: &Path,
    model: ModelKind,
    config: &FitConfig,
    settings: &BTreeMap<String, String>,
) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let inputs = replicate_dirs(data_dir, "dataset.json")?;
    let single = inputs.len() == 1 && inputs[0] == data_dir;
    let outs: Vec<PathBuf> = if single {
        vec![out.to_path_buf()]
    } else {
        inputs
            .iter()
            .map(|d| out.join(d.file_name().expect("replicate dir has a name")))
            .collect()
    };
    inputs
        .par_iter()
        .zip(outs.par_iter())
        .enumerate()
        .map(|(k, (input, output))| {
            let started = Instant::now();
            let (data, split) = read_dataset_dir(input)?;
            let cfg = FitConfig {
                stream: config.stream + k as u64,
                ..config.clone()
            };
            let chain = fit_dataset(&data, &split, model, &cfg)?;
            let mut files = write_chain_dir(output, &chain)?;
            let summary = PosteriorSummary::from_chain(&chain, CREDIBLE_LEVEL)?;
            let mean = summary.mean_tensor();
            if mean.ndim() <= 2 {
                let p = output.join("posterior_mean.pgm");
                write_pgm(&p, &mean)?;
                files.push(p);
            }
            let mut m = RunManifest::new("fit", settings.clone(), Some(cfg.seed));
            m.config.insert("model".into(), model.to_string());
            m.config.insert("stream".into(), cfg.stream.to_string());
            m.dataset_sha256 = Some(dataset_hash(input)?);
            write_manifest(output, m, &files, started)
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(outs)
}

// ---------------------------------------------------------------- predict

/// Scores and labels for the test rows (all rows when the split has no test
/// side). CSV columns `index,score,label`.
pub fn predict(chain_dir: &Path, data_dir: &Path, out_file: &Path) -> Result<()> {
    let chain = read_chain_dir(chain_dir)?;
    let (data, split) = read_dataset_dir(data_dir)?;
    let rows = if split.test.is_empty() {
        split.train.clone()
    } else {
        split.test.clone()
    };
    let subset = data.subset(&rows).with_convention(chain.model.convention());
    let pred = chain.predict(&subset)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(k, i)| vec![i.to_string(), pred.score[k].to_string(), pred.labels[k].to_string()])
        .collect();
    write_csv(out_file, &["index", "score", "label"], &table)
}

// ---------------------------------------------------------------- evaluate

/// One row of the evaluation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub re: Option<f64>,
    pub rmse: f64,
    pub corr: Option<f64>,
    pub misclassification: f64,
    pub f1: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1_selection: Option<f64>,
    pub mcc: f64,
}

pub const EVAL_HEADER: [&str; 10] = [
    "replicate",
    "RE",
    "RMSE",
    "Corr",
    "MisClass",
    "F1",
    "Sens",
    "Spec",
    "F1_selection",
    "MCC",
];

impl EvalRow {
    fn cells(&self) -> Vec<String> {
        vec![
            fmt_opt(self.re),
            self.rmse.to_string(),
            fmt_opt(self.corr),
            self.misclassification.to_string(),
            fmt_opt(self.f1),
            fmt_opt(self.sensitivity),
            fmt_opt(self.specificity),
            fmt_opt(self.f1_selection),
            self.mcc.to_string(),
        ]
    }

    /// Field-wise mean; undefined entries are skipped.
    pub fn mean(rows: &[EvalRow]) -> EvalRow {
        let m = |f: &dyn Fn(&EvalRow) -> Option<f64>| {
            let v: Vec<f64> = rows.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        EvalRow {
            re: m(&|r| r.re),
            rmse: m(&|r| Some(r.rmse)).unwrap_or(f64::NAN),
            corr: m(&|r| r.corr),
            misclassification: m(&|r| Some(r.misclassification)).unwrap_or(f64::NAN),
            f1: m(&|r| r.f1),
            sensitivity: m(&|r| r.sensitivity),
            specificity: m(&|r| r.specificity),
            f1_selection: m(&|r| r.f1_selection),
            mcc: m(&|r| Some(r.mcc)).unwrap_or(f64::NAN),
        }
    }
}

/// Estimation and selection metrics against the truth; classification
/// metrics on the test rows (all rows when there is no test side).
pub fn evaluate_chain(chain: &ChainOutput, data: &Dataset, split: &Split, truth: &GroundTruth) -> Result<EvalRow> {
    let summary = PosteriorSummary::from_chain(chain, CREDIBLE_LEVEL)?;
    let est = estimation_metrics(&summary.mean_tensor(), &truth.b)?;
    let sel = selection_metrics(&summary.selected, &support(&truth.b))?;
    let rows = if split.test.is_empty() {
        &split.train
    } else {
        &split.test
    };
    let test = data.subset(rows).with_convention(chain.model.convention());
    let pred = chain.predict(&test)?;
    let cls = classification_metrics(&pred.labels, &test.labels, test.convention)?;
    Ok(EvalRow {
        re: est.re,
        rmse: est.rmse,
        corr: est.corr,
        misclassification: cls.misclassification,
        f1: cls.f1,
        sensitivity: sel.sensitivity,
        specificity: sel.specificity,
        f1_selection: sel.f1,
        mcc: sel.mcc,
    })
}

/// Evaluates every replicate chain against the matching dataset and truth
/// directories and writes one CSV row each plus a `mean` row.
pub fn evaluate(chain_dir: &Path, data_dir: &Path, truth_dir: &Path, out_file: &Path) -> Result<Vec<EvalRow>> {
    let chains = replicate_dirs(chain_dir, "chain.json")?;
    let datas = replicate_dirs(data_dir, "dataset.json")?;
    let truths = replicate_dirs(truth_dir, "truth_b.tsr")?;
    if chains.len() != datas.len() || truths.len() != datas.len() {
        return Err(Error::Config(format!(
            "replicate counts differ: {} chains, {} datasets, {} truths",
            chains.len(),
            datas.len(),
            truths.len()
        )));
    }
    let rows = (0..chains.len())
        .into_par_iter()
        .map(|k| {
            let chain = read_chain_dir(&chains[k])?;
            let (data, split) = read_dataset_dir(&datas[k])?;
            let truth = read_truth_dir(&truths[k])?;
            evaluate_chain(&chain, &data, &split, &truth)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut c = vec![k.to_string()];
            c.extend(r.cells());
            c
        })
        .collect();
    let mut mean = vec!["mean".to_string()];
    mean.extend(EvalRow::mean(&rows).cells());
    table.push(mean);
    write_csv(out_file, &EVAL_HEADER, &table)?;
    Ok(rows)
}

// ---------------------------------------------------------------- rank selection

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankScore {
    pub replicate: usize,
    pub rank: usize,
    pub dic: DicResult,
}

/// DIC of each rank on one dataset's training rows.
pub fn rank_scores(
    data: &Dataset,
    split: &Split,
    model: ModelKind,
    ranks: &[usize],
    config: &FitConfig,
) -> Result<Vec<(usize, DicResult)>> {
    let train = data.subset(&split.train).with_convention(model.convention());
    ranks
        .par_iter()
        .map(|&rank| {
            let cfg = FitConfig {
                rank,
                hyper: None,
                ..config.clone()
            };
            let chain = match model {
                ModelKind::BtSvm => run_chain_svm(&train, &cfg)?,
                ModelKind::BtLr => run_chain_lr(&train, &cfg)?,
            };
            Ok((rank, dic(&chain, &train)?))
        })
        .collect()
}

/// Rank with the smallest DIC (first on ties).
pub fn argmin_dic(scores: &[(usize, DicResult)]) -> Option<usize> {
    scores.iter().min_by(|a, b| a.1.dic.total_cmp(&b.1.dic)).map(|s| s.0)
}

/// Writes `rank_select.csv` (`replicate,rank,DIC,pD,selected`) under `out`
/// and returns the chosen rank per replicate.
pub fn rank_select(
    data_dir: &Path,
    out: &Path,
    model: ModelKind,
    ranks: &[usize],
    config: &FitConfig,
    settings: &BTreeMap<String, String>,
) -> Result<Vec<usize>> {
    if ranks.is_empty() || ranks.contains(&0) {
        return Err(Error::Config(
            "ranks must be a non-empty list of positive integers".into(),
        ));
    }
    let started = Instant::now();
    let inputs = replicate_dirs(data_dir, "dataset.json")?;
    let per_rep = inputs
        .par_iter()
        .enumerate()
        .map(|(k, input)| {
            let (data, split) = read_dataset_dir(input)?;
            let cfg = FitConfig {
                stream: config.stream + k as u64,
                ..config.clone()
            };
            rank_scores(&data, &split, model, ranks, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut chosen = Vec::new();
    for (k, scores) in per_rep.iter().enumerate() {
        let best = argmin_dic(scores).expect("non-empty ranks");
        chosen.push(best);
        for (rank, d) in scores {
            rows.push(vec![
                k.to_string(),
                rank.to_string(),
                d.dic.to_string(),
                d.p_d.to_string(),
                u8::from(*rank == best).to_string(),
            ]);
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let p = out.join("rank_select.csv");
    write_csv(&p, &["replicate", "rank", "DIC", "pD", "selected"], &rows)?;
    let mut m = RunManifest::new("rank-select", settings.clone(), Some(config.seed));
    m.config.insert("model".into(), model.to_string());
    write_manifest(out, m, &[p], started)?;
    Ok(chosen)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    Alpha,
    ALambda,
    ATau,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "a_lambda" | "a-lambda" => Ok(SweepParam::ALambda),
            "a_tau" | "a-tau" => Ok(SweepParam::ATau),
            other => Err(Error::Config(format!(
                "unknown sweep parameter '{other}' (expected alpha|a_lambda|a_tau)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::Alpha => "alpha",
            SweepParam::ALambda => "a_lambda",
            SweepParam::ATau => "a_tau",
        })
    }
}

impl SweepParam {
    /// Default grid for each parameter.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParam::Alpha => vec![1.0 / 9.0, 1.0 / 6.0, 1.0 / 3.0, 3f64.powf(-0.1)],
            SweepParam::ALambda => vec![3.0, 5.0, 7.0, 10.0],
            SweepParam::ATau => vec![1.0 / 3.0, 0.5, 1.0, 2.0],
        }
    }

    /// Defaults for `rank` and `ndim` with this parameter replaced; `α` and
    /// `a_λ` keep their tied rates.
    pub fn apply(self, value: f64, rank: usize, ndim: usize) -> MdgdpHyper {
        let base = MdgdpHyper::defaults(rank, ndim);
        match self {
            SweepParam::Alpha => base.with_alpha(value, rank, ndim),
            SweepParam::ALambda => base.with_a_lambda(value, ndim),
            SweepParam::ATau => MdgdpHyper { a_tau: value, ..base },
        }
    }
}

/// Scenario used by the sensitivity protocol: the disk for BT-SVM, the
/// rectangle for BT-LR, with outcomes from the model's own loss.
pub fn sweep_scenario(model: ModelKind) -> (u8, Loss) {
    match model {
        ModelKind::BtSvm => (4, Loss::Svm),
        ModelKind::BtLr => (3, Loss::Logistic),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub rmse: Vec<f64>,
}

impl SweepRow {
    pub fn mean(&self) -> f64 {
        self.rmse.iter().sum::<f64>() / self.rmse.len() as f64
    }

    pub fn sd(&self) -> f64 {
        let n = self.rmse.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.rmse.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

/// Posterior-mean RMSE over simulated replicates for each value of `param`.
/// Writes `sweep.csv` (`param,value,RMSE,RMSE_sd,replicates`) under `out`.
pub fn sweep(
    out: &Path,
    model: ModelKind,
    param: SweepParam,
    values: &[f64],
    sim: &SimulateOptions,
    config: &FitConfig,
    settings: &BTreeMap<String, String>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let started = Instant::now();
    let ndim = sim.dims.len();
    let datasets = (0..sim.replicates)
        .into_par_iter()
        .map(|rep| simulate_dataset(&sim.spec(rep)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|v| (0..sim.replicates).map(move |r| (v, r)))
        .collect();
    let rmse = jobs
        .par_iter()
        .map(|&(v, r)| {
            let hyper = param.apply(values[v], config.rank, ndim);
            hyper.validate().map_err(|e| Error::Config(e.to_string()))?;
            let cfg = FitConfig {
                hyper: Some(hyper),
                stream: config.stream + r as u64,
                ..config.clone()
            };
            let (data, split) = &datasets[r];
            let chain = fit_dataset(data, split, model, &cfg)?;
            let truth = data.truth.as_ref().expect("simulated data has truth");
            Ok(estimation_metrics(&chain.posterior_mean_b(), &truth.b)?.rmse)
        })
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<SweepRow> = values
        .iter()
        .enumerate()
        .map(|(v, &value)| SweepRow {
            value,
            rmse: rmse[v * sim.replicates..(v + 1) * sim.replicates].to_vec(),
        })
        .collect();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let p = out.join("sweep.csv");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                param.to_string(),
                r.value.to_string(),
                r.mean().to_string(),
                r.sd().to_string(),
                r.rmse.len().to_string(),
            ]
        })
        .collect();
    write_csv(&p, &["param", "value", "RMSE", "RMSE_sd", "replicates"], &table)?;
    let mut m = RunManifest::new("sweep", settings.clone(), Some(config.seed));
    m.config.insert("model".into(), model.to_string());
    write_manifest(out, m, &[p], started)?;
    Ok(rows)
}
