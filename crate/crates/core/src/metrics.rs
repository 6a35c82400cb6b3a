//! Estimation, classification and selection metrics, credible-interval
//! selection, DIC and the Geweke diagnostic.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelConvention};
use crate::error::{Error, Result};
use crate::sampler::{hinge_log_lik, logistic_log_lik, ChainOutput, ModelKind};
use crate::tensor::{compensated_dot, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationMetrics {
    /// `Σ|b̂ - b| / Σ|b|`; `None` when the truth is identically zero.
    pub re: Option<f64>,
    pub rmse: f64,
    /// Pearson correlation of the vectorized cells; `None` when either side
    /// has zero variance.
    pub corr: Option<f64>,
}

pub fn estimation_metrics(b_hat: &DenseTensor, b_true: &DenseTensor) -> Result<EstimationMetrics> {
    if b_hat.dims() != b_true.dims() {
        return Err(Error::Structure(format!(
            "estimate dims {:?} differ from truth dims {:?}",
            b_hat.dims(),
            b_true.dims()
        )));
    }
    let (e, t) = (b_hat.values(), b_true.values());
    let abs_err: f64 = e.iter().zip(t).map(|(a, b)| (a - b).abs()).sum();
    let abs_true: f64 = t.iter().map(|v| v.abs()).sum();
    let sq_err: f64 = e.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(EstimationMetrics {
        re: (abs_true > 0.0).then(|| abs_err / abs_true),
        rmse: (sq_err / e.len() as f64).sqrt(),
        corr: pearson(e, t),
    })
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let da: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let db: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let (saa, sbb) = (compensated_dot(&da, &da), compensated_dot(&db, &db));
    if saa > 0.0 && sbb > 0.0 {
        Some((compensated_dot(&da, &db) / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn from_flags(predicted: &[bool], actual: &[bool]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::Structure(format!(
                "{} predictions for {} outcomes",
                predicted.len(),
                actual.len()
            )));
        }
        let mut c = Self::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn misclassification(&self) -> Option<f64> {
        ratio(self.fp + self.fn_, self.total())
    }

    /// `TP / (TP + (FP + FN) / 2)`.
    pub fn f1(&self) -> Option<f64> {
        let denom = self.tp as f64 + 0.5 * (self.fp + self.fn_) as f64;
        (denom > 0.0).then(|| self.tp as f64 / denom)
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    /// Matthews correlation; 0 when any marginal total is zero.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fn_) = (self.tp as f64, self.fp as f64, self.tn as f64, self.fn_ as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom > 0.0 {
            (tp * tn - fp * fn_) / denom.sqrt()
        } else {
            0.0
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub misclassification: f64,
    pub f1: Option<f64>,
}

pub fn classification_metrics(y_hat: &[f64], y: &[f64], convention: LabelConvention) -> Result<ClassificationMetrics> {
    if y.is_empty() {
        return Err(Error::Config("no outcomes to evaluate".into()));
    }
    if let Some(bad) = y_hat.iter().chain(y).find(|&&v| !convention.is_valid(v)) {
        return Err(Error::Structure(format!("label {bad} invalid under {convention:?}")));
    }
    let pos = convention.positive();
    let p: Vec<bool> = y_hat.iter().map(|&v| v == pos).collect();
    let a: Vec<bool> = y.iter().map(|&v| v == pos).collect();
    let c = ConfusionCounts::from_flags(&p, &a)?;
    Ok(ClassificationMetrics {
        misclassification: c.misclassification().expect("non-empty"),
        f1: c.f1(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub mcc: f64,
}

pub fn selection_metrics(mask_hat: &[bool], mask_true: &[bool]) -> Result<SelectionMetrics> {
    let c = ConfusionCounts::from_flags(mask_hat, mask_true)?;
    Ok(SelectionMetrics {
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        f1: c.f1(),
        mcc: c.mcc(),
    })
}

/// Nonzero cells of a truth tensor.
pub fn support(b: &DenseTensor) -> Vec<bool> {
    b.values().iter().map(|&v| v != 0.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub dims: Vec<usize>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub gamma_mean: Vec<f64>,
    pub selected: Vec<bool>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl PosteriorSummary {
    /// Per-cell means and equal-tailed intervals at `level`.
    pub fn from_chain(chain: &ChainOutput, level: f64) -> Result<Self> {
        if chain.n_draws() == 0 {
            return Err(Error::Config("chain has no stored draws".into()));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!("credible level {level} outside (0, 1)")));
        }
        let j = chain.n_cells();
        let tail = 0.5 * (1.0 - level);
        let mean = chain.posterior_mean_b().into_values();
        let mut lower = vec![0.0; j];
        let mut upper = vec![0.0; j];
        for cell in 0..j {
            let mut t = chain.cell_trace(cell);
            t.sort_by(f64::total_cmp);
            lower[cell] = quantile_sorted(&t, tail);
            upper[cell] = quantile_sorted(&t, 1.0 - tail);
        }
        let mut s = Self {
            dims: chain.dims.clone(),
            mean,
            lower,
            upper,
            level,
            gamma_mean: chain.posterior_mean_gamma(),
            selected: Vec::new(),
        };
        s.selected = select_cells(&s);
        Ok(s)
    }

    pub fn mean_tensor(&self) -> DenseTensor {
        DenseTensor::new(self.dims.clone(), self.mean.clone()).expect("summary dims are valid")
    }
}

/// A cell is selected when its credible interval excludes zero.
pub fn select_cells(summary: &PosteriorSummary) -> Vec<bool> {
    summary
        .lower
        .iter()
        .zip(&summary.upper)
        .map(|(&lo, &hi)| lo > 0.0 || hi < 0.0)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DicResult {
    pub dic: f64,
    pub p_d: f64,
    pub loglik_at_mean: f64,
    pub mean_loglik: f64,
}

/// `DIC = -2 log L(θ̄) + 2 p_D`, `p_D = 2 (log L(θ̄) - mean log L)`, using the
/// model's likelihood on the data the chain was fitted to.
pub fn dic(chain: &ChainOutput, data: &Dataset) -> Result<DicResult> {
    if chain.n_draws() == 0 {
        return Err(Error::Config("DIC needs at least one stored draw".into()));
    }
    let b = chain.posterior_mean_b();
    let g = chain.posterior_mean_gamma();
    let f = linear_predictors(data, &b, &g)?;
    let at_mean = match chain.model {
        ModelKind::BtSvm => hinge_log_lik(&data.labels, &f, chain.config.sigma2),
        ModelKind::BtLr => logistic_log_lik(&data.labels, &f),
    };
    let mean = chain.loglik.iter().sum::<f64>() / chain.loglik.len() as f64;
    let p_d = 2.0 * (at_mean - mean);
    Ok(DicResult {
        dic: -2.0 * at_mean + 2.0 * p_d,
        p_d,
        loglik_at_mean: at_mean,
        mean_loglik: mean,
    })
}

/// `⟨X_i, B⟩ + z_i'γ` for every sample.
pub fn linear_predictors(data: &Dataset, b: &DenseTensor, gamma: &[f64]) -> Result<Vec<f64>> {
    data.covariates
        .iter()
        .zip(&data.scalars)
        .map(|(x, z)| {
            if x.dims() != b.dims() || z.len() != gamma.len() {
                return Err(Error::Structure(format!(
                    "sample dims {:?}/{} do not match coefficients {:?}/{}",
                    x.dims(),
                    z.len(),
                    b.dims(),
                    gamma.len()
                )));
            }
            Ok(compensated_dot(x.values(), b.values()) + compensated_dot(z, gamma))
        })
        .collect()
}

pub const GEWEKE_FIRST: f64 = 0.1;
pub const GEWEKE_LAST: f64 = 0.5;
pub const GEWEKE_MIN_LEN: usize = 100;

/// Variance of the mean of `x` by non-overlapping batch means with batch
/// size `floor(sqrt(len))`.
pub fn batch_means_variance(x: &[f64]) -> f64 {
    let b = (x.len() as f64).sqrt().floor().max(1.0) as usize;
    let a = x.len() / b;
    if a < 2 {
        return 0.0;
    }
    let means: Vec<f64> = x
        .chunks_exact(b)
        .take(a)
        .map(|c| c.iter().sum::<f64>() / b as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / a as f64;
    means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (a * (a - 1)) as f64
}

/// Geweke z comparing the first 10% and last 50% of a trace. `None` when
/// both windows have zero variance.
pub fn geweke_z(x: &[f64]) -> Result<Option<f64>> {
    if x.len() < GEWEKE_MIN_LEN {
        return Err(Error::Config(format!(
            "Geweke diagnostic needs at least {GEWEKE_MIN_LEN} draws, got {}",
            x.len()
        )));
    }
    let n1 = (GEWEKE_FIRST * x.len() as f64).floor() as usize;
    let n2 = (GEWEKE_LAST * x.len() as f64).floor() as usize;
    let (a, b) = (&x[..n1], &x[x.len() - n2..]);
    let var = batch_means_variance(a) + batch_means_variance(b);
    if !(var > 0.0) {
        return Ok(None);
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(Some((mean(a) - mean(b)) / var.sqrt()))
}

/// Fraction of defined cell-wise z-scores with `|z| < 1.96`, plus the scores.
pub fn geweke_cells(chain: &ChainOutput) -> Result<(f64, Vec<Option<f64>>)> {
    let z = (0..chain.n_cells())
        .map(|c| geweke_z(&chain.cell_trace(c)))
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = z.iter().flatten().copied().collect();
    let frac = if defined.is_empty() {
        0.0
    } else {
        defined.iter().filter(|v| v.abs() < 1.96).count() as f64 / defined.len() as f64
    };
    Ok((frac, z))
}
