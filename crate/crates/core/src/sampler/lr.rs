//! BT-LR kernel: logistic likelihood with Pólya-Gamma latent precisions.

use rand::Rng;

use super::{chain_setup, logistic_log_lik, DrawRecorder, FitConfig, GibbsCore, ModelKind, Working};
use crate::data::{Dataset, LabelConvention};
use crate::dists::sample_polya_gamma_1;
use crate::error::Result;
use crate::prior::MdgdpHyper;

#[derive(Debug, Clone)]
pub struct LrChainState {
    pub core: GibbsCore,
    pub omega: Vec<f64>,
}

/// `ω_i ~ PG(1, f_i)`.
pub fn update_omega<R: Rng + ?Sized>(f: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    f.iter()
        .map(|&fi| Ok(sample_polya_gamma_1(fi, rng)?.max(f64::MIN_POSITIVE)))
        .collect()
}

fn working(y: &[f64], omega: &[f64]) -> Working {
    Working {
        weight: omega.to_vec(),
        target: y.iter().zip(omega).map(|(yi, w)| (yi - 0.5) / w).collect(),
    }
}

impl LrChainState {
    pub fn new(core: GibbsCore) -> Self {
        let n = core.predictors().len();
        Self {
            core,
            omega: vec![0.25; n],
        }
    }

    pub fn working(&self, data: &Dataset) -> Working {
        working(&data.labels, &self.omega)
    }

    /// One full sweep: ω, then `(Φ, τ)`, then every `(λ, w, β)`, then `γ`.
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        data: &Dataset,
        hyper: &MdgdpHyper,
        config: &FitConfig,
        rng: &mut R,
    ) -> Result<()> {
        self.omega = update_omega(&self.core.predictors(), rng)?;
        let w = self.working(data);
        self.core.update_global(hyper, rng)?;
        self.core.sweep_margins(data, &w, hyper, config.random_scan, rng)?;
        self.core.update_gamma(data, &w, config.gamma_precision, rng)?;
        Ok(())
    }

    pub fn log_lik(&self, data: &Dataset) -> f64 {
        logistic_log_lik(&data.labels, &self.core.predictors())
    }
}

/// Margin `(j, r)` update for BT-LR given the current ω.
pub fn update_margin_lr<R: Rng + ?Sized>(
    j: usize,
    r: usize,
    data: &Dataset,
    state: &mut LrChainState,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = state.working(data);
    state.core.update_margin(j, r, data, &w, rng)
}

/// `γ` update for BT-LR given the current ω.
pub fn update_gamma_lr<R: Rng + ?Sized>(
    data: &Dataset,
    state: &mut LrChainState,
    precision: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = state.working(data);
    state.core.update_gamma(data, &w, precision, rng)
}

pub fn run_chain_lr(data: &Dataset, config: &FitConfig) -> Result<super::ChainOutput> {
    let (dims, q, hyper, mut rng) = chain_setup(data, config, LabelConvention::ZeroOne)?;
    let core = GibbsCore::initialize(data, &dims, q, config, &mut rng)?;
    let mut state = LrChainState::new(core);
    let mut rec = DrawRecorder::new(ModelKind::BtLr, config, hyper, &dims, q);
    for it in 0..config.iterations {
        state.sweep(data, &hyper, config, &mut rng)?;
        if rec.wants(it) {
            rec.record(it, &state.core, state.log_lik(data));
        }
    }
    Ok(rec.finish())
}
