//! Datasets of `(X_i, z_i, y_i)` triples.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// How binary labels are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelConvention {
    /// `y ∈ {-1, +1}` (hinge loss).
    PlusMinusOne,
    /// `y ∈ {0, 1}` (logistic loss).
    ZeroOne,
}

impl LabelConvention {
    pub fn positive(self) -> f64 {
        1.0
    }

    pub fn negative(self) -> f64 {
        match self {
            LabelConvention::PlusMinusOne => -1.0,
            LabelConvention::ZeroOne => 0.0,
        }
    }

    pub fn is_valid(self, y: f64) -> bool {
        y == self.positive() || y == self.negative()
    }
}

/// Outcome-generating mechanism for simulated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    Svm,
    Logistic,
}

impl Loss {
    pub fn convention(self) -> LabelConvention {
        match self {
            Loss::Svm => LabelConvention::PlusMinusOne,
            Loss::Logistic => LabelConvention::ZeroOne,
        }
    }
}

impl FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" | "hinge" => Ok(Loss::Svm),
            "logistic" | "lr" => Ok(Loss::Logistic),
            other => Err(Error::Config(format!("unknown loss '{other}' (expected svm|logistic)"))),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Svm => "svm",
            Loss::Logistic => "logistic",
        })
    }
}

/// Known coefficients behind a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub b: DenseTensor,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub covariates: Vec<DenseTensor>,
    /// `n × q` scalar covariates, intercept column first.
    pub scalars: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub convention: LabelConvention,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(
        covariates: Vec<DenseTensor>,
        scalars: Vec<Vec<f64>>,
        labels: Vec<f64>,
        convention: LabelConvention,
    ) -> Result<Self> {
        let n = labels.len();
        if covariates.len() != n || scalars.len() != n {
            return Err(Error::Structure(format!(
                "dataset sizes disagree: {} tensors, {} scalar rows, {} labels",
                covariates.len(),
                scalars.len(),
                n
            )));
        }
        if let Some(first) = covariates.first() {
            if covariates.iter().any(|x| x.dims() != first.dims()) {
                return Err(Error::Structure("covariate tensors have differing dims".into()));
            }
        }
        if let Some(first) = scalars.first() {
            if scalars.iter().any(|z| z.len() != first.len()) {
                return Err(Error::Structure("scalar covariate rows have differing lengths".into()));
            }
        }
        if let Some(bad) = labels.iter().find(|&&y| !convention.is_valid(y)) {
            return Err(Error::Structure(format!("label {bad} invalid under {convention:?}")));
        }
        Ok(Self {
            covariates,
            scalars,
            labels,
            convention,
            truth: None,
        })
    }

    pub fn with_truth(mut self, truth: GroundTruth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Covariate dims; `None` for an empty dataset.
    pub fn dims(&self) -> Option<&[usize]> {
        self.covariates.first().map(|x| x.dims())
    }

    pub fn n_scalars(&self) -> usize {
        self.scalars.first().map_or(0, |z| z.len())
    }

    /// Relabel into another convention (positive class is preserved).
    pub fn with_convention(&self, convention: LabelConvention) -> Dataset {
        let labels = self
            .labels
            .iter()
            .map(|&y| {
                if y == self.convention.positive() {
                    convention.positive()
                } else {
                    convention.negative()
                }
            })
            .collect();
        Dataset {
            labels,
            convention,
            ..self.clone()
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            covariates: idx.iter().map(|&i| self.covariates[i].clone()).collect(),
            scalars: idx.iter().map(|&i| self.scalars[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            convention: self.convention,
            truth: self.truth.clone(),
        }
    }
}

/// Row indices of a train/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Random partition with `round(train_fraction * n)` training rows, each
    /// side sorted ascending.
    pub fn random<R: Rng + ?Sized>(n: usize, train_fraction: f64, rng: &mut R) -> Split {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let n_train = ((n as f64) * train_fraction).round() as usize;
        let mut train = idx[..n_train].to_vec();
        let mut test = idx[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Split { train, test }
    }

    pub fn all_train(n: usize) -> Split {
        Split {
            train: (0..n).collect(),
            test: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn toy(labels: Vec<f64>, conv: LabelConvention) -> Result<Dataset> {
        let n = labels.len();
        Dataset::new(
            vec![DenseTensor::zeros(&[2, 2]).unwrap(); n],
            vec![vec![1.0]; n],
            labels,
            conv,
        )
    }

    #[test]
    fn label_validation() {
        assert!(toy(vec![1.0, -1.0], LabelConvention::PlusMinusOne).is_ok());
        assert!(toy(vec![1.0, 0.0], LabelConvention::PlusMinusOne).is_err());
        assert!(toy(vec![1.0, -1.0], LabelConvention::ZeroOne).is_err());
    }

    #[test]
    fn convention_conversion() {
        let d = toy(vec![1.0, -1.0, -1.0], LabelConvention::PlusMinusOne).unwrap();
        let z = d.with_convention(LabelConvention::ZeroOne);
        assert_eq!(z.labels, vec![1.0, 0.0, 0.0]);
        assert_eq!(z.with_convention(LabelConvention::PlusMinusOne).labels, d.labels);
    }

    #[test]
    fn split_is_partition() {
        let mut rng = RngState::new(1, 0);
        let s = Split::random(400, 0.7, &mut rng);
        assert_eq!(s.train.len(), 280);
        assert_eq!(s.test.len(), 120);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..400).collect::<Vec<_>>());
    }
}
