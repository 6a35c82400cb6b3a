use std::collections::BTreeMap;

use tensorclass::io::{read_json, read_simple_csv, RunManifest};
use tensorclass::pipeline::{self, replicate_dirs, SimulateOptions, SweepParam};
use tensorclass::{FitConfig, Loss, ModelKind};

fn options(replicates: usize) -> SimulateOptions {
    SimulateOptions {
        scenario: 4,
        loss: Loss::Svm,
        n: 50,
        replicates,
        dims: vec![8, 8],
        ..SimulateOptions::default()
    }
}

fn quick() -> FitConfig {
    FitConfig {
        rank: 2,
        iterations: 40,
        burn_in: 10,
        ..FitConfig::default()
    }
}

#[test]
fn single_replicate_writes_flat_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let dirs = pipeline::simulate(&data, &options(1), &BTreeMap::new()).unwrap();
    assert_eq!(dirs, vec![data.clone()]);
    assert_eq!(replicate_dirs(&data, "dataset.json").unwrap(), vec![data.clone()]);

    let m: RunManifest = read_json(&data.join("manifest.json")).unwrap();
    for a in &m.outputs {
        let bytes = std::fs::read(data.join(&a.path)).unwrap();
        assert_eq!(a.sha256, tensorclass::io::sha256_hex(&bytes), "{}", a.path);
    }

    let fit = tmp.path().join("fit");
    pipeline::fit(&data, &fit, ModelKind::BtSvm, &quick(), &BTreeMap::new()).unwrap();
    let rows = pipeline::evaluate(&fit, &data, &data, &tmp.path().join("eval.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    let (header, table) = read_simple_csv(&tmp.path().join("eval.csv")).unwrap();
    assert_eq!(header[0], "replicate");
    assert_eq!(table.len(), 2);
}

#[test]
fn replicates_use_distinct_data_and_streams() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    pipeline::simulate(&data, &options(3), &BTreeMap::new()).unwrap();
    let dirs = replicate_dirs(&data, "dataset.json").unwrap();
    assert_eq!(dirs.len(), 3);
    assert!(dirs[2].ends_with("rep_002"));
    let labels: Vec<String> = dirs
        .iter()
        .map(|d| std::fs::read_to_string(d.join("labels.csv")).unwrap())
        .collect();
    assert_ne!(labels[0], labels[1]);

    let fit = tmp.path().join("fit");
    pipeline::fit(&data, &fit, ModelKind::BtSvm, &quick(), &BTreeMap::new()).unwrap();
    let draws: Vec<Vec<u8>> = (0..3)
        .map(|k| std::fs::read(pipeline::replicate_dir(&fit, k).join("b_draws.tsr")).unwrap())
        .collect();
    assert_ne!(draws[0], draws[1]);
    assert!(replicate_dirs(&tmp.path().join("nothing"), "dataset.json").is_err());
}

#[test]
fn rank_selection_and_sweep_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    pipeline::simulate(&data, &options(1), &BTreeMap::new()).unwrap();
    let out = tmp.path().join("rs");
    let chosen = pipeline::rank_select(&data, &out, ModelKind::BtSvm, &[1, 2, 3], &quick(), &BTreeMap::new()).unwrap();
    assert_eq!(chosen.len(), 1);
    assert!([1, 2, 3].contains(&chosen[0]));
    let (_, rows) = read_simple_csv(&out.join("rank_select.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().filter(|r| r[4] == "1").count(), 1);

    assert_eq!("a_lambda".parse::<SweepParam>().unwrap(), SweepParam::ALambda);
    assert!("beta".parse::<SweepParam>().is_err());
    let sim = SimulateOptions {
        replicates: 2,
        n: 40,
        dims: vec![6, 6],
        ..SimulateOptions::default()
    };
    let rows = pipeline::sweep(
        &tmp.path().join("sw"),
        ModelKind::BtLr,
        SweepParam::ATau,
        &[0.5, 2.0],
        &sim,
        &quick(),
        &BTreeMap::new(),
    )
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.mean().is_finite() && r.sd() >= 0.0));
}
