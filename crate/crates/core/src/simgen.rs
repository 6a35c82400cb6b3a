//! Synthetic coefficient tensors and binary outcomes.

use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth, Loss};
use crate::dists::standard_normal;
use crate::error::{Error, Result};
use crate::io::{decode_tsrm, sha256_hex};
use crate::rng::RngState;
use crate::sampler::sigmoid;
use crate::tensor::{parafac_compose, tensor_inner, DenseTensor, ParafacFactors};

/// Rank-3 margins of the scenario 2 pattern (48 × 48): a horizontal bar, a
/// vertical bar crossing it, and a small block.
pub const SCENARIO2_ASSET: &str = include_str!("../assets/scenario2.tsrm");
pub const SCENARIO2_SHA256: &str = "ec637640c879ddbb03adf1d3e48451a7b3bc9c948e555baf8b2ee5d49b7d412d";

pub const RECTANGLE_FRACTION: f64 = 0.30;
pub const DISK_FRACTION: f64 = 0.10;

// Stream ids keep the coefficient, covariate, outcome and split draws of one
// seed independent of each other.
const STREAM_SCENARIO: u64 = 0x5c00;
const STREAM_COVARIATES: u64 = 0x5c01;
const STREAM_OUTCOMES: u64 = 0x5c02;
const STREAM_SPLIT: u64 = 0x5c03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u8,
    pub dims: Vec<usize>,
    pub true_rank: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// 48 × 48, true rank 3.
    pub fn new(id: u8, seed: u64) -> Self {
        Self {
            id,
            dims: vec![48, 48],
            true_rank: 3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.id) {
            return Err(Error::Config(format!("scenario must be 1..4, got {}", self.id)));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::Config(format!("invalid scenario dims {:?}", self.dims)));
        }
        if self.id >= 2 && self.dims.len() != 2 {
            return Err(Error::Config(format!(
                "scenario {} is defined for 2-D tensors only",
                self.id
            )));
        }
        if self.true_rank == 0 {
            return Err(Error::Config("true rank must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn gen_scenario(spec: &ScenarioSpec) -> Result<DenseTensor> {
    spec.validate()?;
    match spec.id {
        1 => binomial_scenario(spec),
        2 => Ok(parafac_compose(&scenario2_factors(&spec.dims)?)),
        3 => Ok(centered_rectangle(spec.dims[0], spec.dims[1], RECTANGLE_FRACTION)),
        _ => Ok(centered_disk(spec.dims[0], spec.dims[1], DISK_FRACTION)),
    }
}

/// Binomial(2, 0.2) margins composed and rescaled to a maximum of 1; redrawn
/// while the composition is identically zero.
fn binomial_scenario(spec: &ScenarioSpec) -> Result<DenseTensor> {
    let mut rng = RngState::new(spec.seed, STREAM_SCENARIO);
    let binom = Binomial::new(2, 0.2).expect("valid binomial");
    loop {
        let margins = (0..spec.true_rank)
            .map(|_| {
                spec.dims
                    .iter()
                    .map(|&p| (0..p).map(|_| binom.sample(&mut rng) as f64).collect())
                    .collect()
            })
            .collect();
        let mut b = parafac_compose(&ParafacFactors::new(spec.dims.clone(), margins)?);
        let max = b.values().iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            b.values_mut().iter_mut().for_each(|v| *v /= max);
            return Ok(b);
        }
    }
}

/// The shipped scenario 2 margins, checked against the pinned hash and
/// resampled by nearest neighbour when `dims` differ from the asset.
pub fn scenario2_factors(dims: &[usize]) -> Result<ParafacFactors> {
    let digest = sha256_hex(SCENARIO2_ASSET.as_bytes());
    if digest != SCENARIO2_SHA256 {
        return Err(Error::Config(format!("scenario 2 asset hash mismatch: {digest}")));
    }
    let base = decode_tsrm(SCENARIO2_ASSET, Path::new("assets/scenario2.tsrm"))?;
    if dims == base.dims() {
        return Ok(base);
    }
    if dims.len() != base.ndim() {
        return Err(Error::Config(format!(
            "scenario 2 needs {} modes, got {dims:?}",
            base.ndim()
        )));
    }
    let margins = (0..base.rank())
        .map(|r| {
            dims.iter()
                .enumerate()
                .map(|(j, &p)| {
                    let src = base.margin(j, r);
                    (0..p)
                        .map(|k| src[((k as f64 + 0.5) * src.len() as f64 / p as f64) as usize])
                        .collect()
                })
                .collect()
        })
        .collect();
    ParafacFactors::new(dims.to_vec(), margins)
}

/// Axis-aligned block of ones centered in a `p1 × p2` grid. Among blocks
/// whose area is within half a percent of `fraction`, the one whose side
/// ratios best match the grid is chosen; otherwise the closest area.
pub fn centered_rectangle(p1: usize, p2: usize, fraction: f64) -> DenseTensor {
    let total = (p1 * p2) as f64;
    let target = fraction * total;
    let mut best: Option<(bool, f64, f64, usize, usize)> = None;
    for h in 1..=p1 {
        for w in 1..=p2 {
            let area_err = ((h * w) as f64 - target).abs();
            let close = area_err <= 0.005 * total;
            let shape_err = (h as f64 / p1 as f64 - w as f64 / p2 as f64).abs();
            let key = if close {
                (shape_err, area_err)
            } else {
                (area_err, shape_err)
            };
            let better = match best {
                None => true,
                Some((bc, k0, k1, _, _)) => (close && !bc) || (close == bc && (key.0, key.1) < (k0, k1)),
            };
            if better {
                best = Some((close, key.0, key.1, h, w));
            }
        }
    }
    let (_, _, _, h, w) = best.expect("non-empty grid");
    let (r0, c0) = ((p1 - h) / 2, (p2 - w) / 2);
    DenseTensor::from_fn(&[p1, p2], |i| {
        f64::from(u8::from((r0..r0 + h).contains(&i[0]) && (c0..c0 + w).contains(&i[1])))
    })
    .expect("positive dims")
}

/// Ones on the cells closest to the grid centre (distances normalized by
/// each side length), cut at the distance level whose cell count is nearest
/// `fraction` of the grid.
pub fn centered_disk(p1: usize, p2: usize, fraction: f64) -> DenseTensor {
    let (c1, c2) = ((p1 as f64 - 1.0) / 2.0, (p2 as f64 - 1.0) / 2.0);
    let dist = |i: usize, k: usize| {
        let a = (i as f64 - c1) / p1 as f64;
        let b = (k as f64 - c2) / p2 as f64;
        a * a + b * b
    };
    let mut d: Vec<f64> = (0..p1).flat_map(|i| (0..p2).map(move |k| dist(i, k))).collect();
    d.sort_by(f64::total_cmp);
    let target = fraction * (p1 * p2) as f64;
    // Candidate cutoffs sit at the end of each tie group.
    let mut best = (f64::INFINITY, 0.0);
    let mut idx = 0;
    while idx < d.len() {
        let level = d[idx];
        while idx < d.len() && d[idx] == level {
            idx += 1;
        }
        let err = (idx as f64 - target).abs();
        if err < best.0 {
            best = (err, level);
        }
    }
    let cut = best.1;
    DenseTensor::from_fn(&[p1, p2], |i| f64::from(u8::from(dist(i[0], i[1]) <= cut))).expect("positive dims")
}

/// `n` tensors with i.i.d. `N(0, 1)` cells.
pub fn gen_covariates<R: Rng + ?Sized>(dims: &[usize], n: usize, rng: &mut R) -> Result<Vec<DenseTensor>> {
    (0..n)
        .map(|_| DenseTensor::from_fn(dims, |_| standard_normal(rng)))
        .collect()
}

/// Labels from `ψ_i = ⟨X_i, B⟩ + offset_i`: `sign(ψ)` with ties to `+1` under
/// the hinge mechanism, `Bernoulli(1 / (1 + e^{-ψ}))` on `{0, 1}` otherwise.
pub fn gen_outcomes<R: Rng + ?Sized>(
    b: &DenseTensor,
    covariates: &[DenseTensor],
    offsets: Option<&[f64]>,
    loss: Loss,
    rng: &mut R,
) -> Result<Vec<f64>> {
    covariates
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let psi = tensor_inner(x, b)? + offsets.map_or(0.0, |o| o[i]);
            Ok(match loss {
                Loss::Svm => {
                    if psi >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Loss::Logistic => f64::from(u8::from(rng.random::<f64>() < sigmoid(psi))),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub scenario: ScenarioSpec,
    pub loss: Loss,
    pub n: usize,
    /// Extra `N(0, 1)` scalar covariates after the intercept (true effect 0).
    pub extra_scalars: usize,
    pub train_fraction: f64,
    /// Replicate index; selects independent covariate/outcome streams.
    pub replicate: u32,
}

impl SimulationSpec {
    /// n = 400, intercept only, 70:30 split.
    pub fn new(scenario: ScenarioSpec, loss: Loss) -> Self {
        Self {
            scenario,
            loss,
            n: 400,
            extra_scalars: 0,
            train_fraction: 0.7,
            replicate: 0,
        }
    }

    fn stream(&self, base: u64) -> u64 {
        ((self.replicate as u64) << 32) | base
    }
}

/// Full dataset with ground truth `(B, γ = 0)` and a train/test split.
/// Covariates depend only on `(seed, replicate)`, so both losses share them.
pub fn simulate_dataset(spec: &SimulationSpec) -> Result<(Dataset, crate::data::Split)> {
    if spec.n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.train_fraction) {
        return Err(Error::Config(format!(
            "train fraction {} outside [0, 1]",
            spec.train_fraction
        )));
    }
    let b = gen_scenario(&spec.scenario)?;
    let seed = spec.scenario.seed;
    let mut rng = RngState::new(seed, spec.stream(STREAM_COVARIATES));
    let covariates = gen_covariates(&spec.scenario.dims, spec.n, &mut rng)?;
    let scalars: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| {
            let mut z = vec![1.0];
            z.extend((0..spec.extra_scalars).map(|_| standard_normal(&mut rng)));
            z
        })
        .collect();
    let mut rng = RngState::new(seed, spec.stream(STREAM_OUTCOMES));
    let labels = gen_outcomes(&b, &covariates, None, spec.loss, &mut rng)?;
    let truth = GroundTruth {
        b,
        gamma: vec![0.0; 1 + spec.extra_scalars],
    };
    let data = Dataset::new(covariates, scalars, labels, spec.loss.convention())?.with_truth(truth);
    let mut rng = RngState::new(seed, spec.stream(STREAM_SPLIT));
    let split = crate::data::Split::random(spec.n, spec.train_fraction, &mut rng);
    Ok((data, split))
}
