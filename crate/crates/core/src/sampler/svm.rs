//! BT-SVM kernel: hinge pseudo-likelihood with inverse-Gaussian latent scales.

use rand::Rng;

use super::{chain_setup, hinge_log_lik, DrawRecorder, FitConfig, GibbsCore, ModelKind, Working};
use crate::data::{Dataset, LabelConvention};
use crate::dists::sample_inverse_gaussian;
use crate::error::{Error, Result};
use crate::prior::MdgdpHyper;

/// `|1 - y f|` is clamped below at this value before inversion.
pub const HINGE_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SvmChainState {
    pub core: GibbsCore,
    pub rho: Vec<f64>,
    pub sigma2: f64,
}

/// `ρ_i = 1 / IN(μ_i, 1/σ²)` with `μ_i = 1 / max(|1 - y_i f_i|, 1e-8)`.
pub fn update_rho<R: Rng + ?Sized>(y: &[f64], f: &[f64], sigma2: f64, rng: &mut R) -> Result<Vec<f64>> {
    if y.len() != f.len() {
        return Err(Error::Structure(format!(
            "{} labels but {} predictors",
            y.len(),
            f.len()
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Parameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    let shape = 1.0 / sigma2;
    y.iter()
        .zip(f)
        .map(|(yi, fi)| {
            let mu = 1.0 / (1.0 - yi * fi).abs().max(HINGE_CLAMP);
            let inv = sample_inverse_gaussian(mu, shape, rng)?;
            Ok((1.0 / inv).max(f64::MIN_POSITIVE))
        })
        .collect()
}

fn working(y: &[f64], rho: &[f64], sigma2: f64) -> Working {
    Working {
        weight: rho.iter().map(|r| 1.0 / (r * sigma2)).collect(),
        target: y.iter().zip(rho).map(|(yi, r)| yi * (1.0 + r)).collect(),
    }
}

impl SvmChainState {
    pub fn new(core: GibbsCore, sigma2: f64) -> Self {
        let n = core.predictors().len();
        Self {
            core,
            rho: vec![1.0; n],
            sigma2,
        }
    }

    pub fn working(&self, data: &Dataset) -> Working {
        working(&data.labels, &self.rho, self.sigma2)
    }

    /// One full sweep: ρ, then `(Φ, τ)`, then every `(λ, w, β)` for each
    /// margin, then `γ`.
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        data: &Dataset,
        hyper: &MdgdpHyper,
        config: &FitConfig,
        rng: &mut R,
    ) -> Result<()> {
        self.rho = update_rho(&data.labels, &self.core.predictors(), self.sigma2, rng)?;
        let w = self.working(data);
        self.core.update_global(hyper, rng)?;
        self.core.sweep_margins(data, &w, hyper, config.random_scan, rng)?;
        self.core.update_gamma(data, &w, config.gamma_precision, rng)?;
        Ok(())
    }

    pub fn log_lik(&self, data: &Dataset) -> f64 {
        hinge_log_lik(&data.labels, &self.core.predictors(), self.sigma2)
    }
}

/// Margin `(j, r)` update for BT-SVM given the current ρ.
pub fn update_margin_svm<R: Rng + ?Sized>(
    j: usize,
    r: usize,
    data: &Dataset,
    state: &mut SvmChainState,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = state.working(data);
    state.core.update_margin(j, r, data, &w, rng)
}

/// `γ` update for BT-SVM given the current ρ.
pub fn update_gamma_svm<R: Rng + ?Sized>(
    data: &Dataset,
    state: &mut SvmChainState,
    precision: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = state.working(data);
    state.core.update_gamma(data, &w, precision, rng)
}

pub fn run_chain_svm(data: &Dataset, config: &FitConfig) -> Result<super::ChainOutput> {
    let (dims, q, hyper, mut rng) = chain_setup(data, config, LabelConvention::PlusMinusOne)?;
    let core = GibbsCore::initialize(data, &dims, q, config, &mut rng)?;
    let mut state = SvmChainState::new(core, config.sigma2);
    let mut rec = DrawRecorder::new(ModelKind::BtSvm, config, hyper, &dims, q);
    for it in 0..config.iterations {
        state.sweep(data, &hyper, config, &mut rng)?;
        if rec.wants(it) {
            rec.record(it, &state.core, state.log_lik(data));
        }
    }
    Ok(rec.finish())
}
