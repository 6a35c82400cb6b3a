//! Gibbs kernels for the two augmented classifiers.
//!
//! Both augmentations turn each observation into a Gaussian pseudo-observation
//! of the linear predictor, `f_i ~ N(target_i, 1 / weight_i)`:
//!
//! | model  | latent            | weight          | target            |
//! |--------|-------------------|-----------------|-------------------|
//! | BT-SVM | `ρ_i` (inv. Gau.) | `1 / (ρ_i σ²)`  | `y_i (1 + ρ_i)`   |
//! | BT-LR  | `ω_i` (PG)        | `ω_i`           | `κ_i / ω_i`       |
//!
//! so the margin and `γ` updates are shared; only the latent step differs.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelConvention};
use crate::dists::standard_normal;
use crate::error::{Error, Result};
use crate::linalg::sample_gaussian_canonical;
use crate::prior::{update_global_scales, update_local_scales, MdgdpHyper, MdgdpState};
use crate::rng::RngState;
use crate::tensor::{compensated_dot, mode_design_row_into, parafac_compose, DenseTensor, ParafacFactors};

pub mod lr;
pub mod svm;

pub use lr::{run_chain_lr, update_gamma_lr, update_margin_lr, update_omega, LrChainState};
pub use svm::{run_chain_svm, update_gamma_svm, update_margin_svm, update_rho, SvmChainState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    BtSvm,
    BtLr,
}

impl ModelKind {
    pub fn convention(self) -> LabelConvention {
        match self {
            ModelKind::BtSvm => LabelConvention::PlusMinusOne,
            ModelKind::BtLr => LabelConvention::ZeroOne,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bt-svm" | "svm" => Ok(ModelKind::BtSvm),
            "bt-lr" | "lr" => Ok(ModelKind::BtLr),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected bt-svm|bt-lr)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::BtSvm => "bt-svm",
            ModelKind::BtLr => "bt-lr",
        })
    }
}

/// How margins are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Jitter around zero only.
    Random,
    /// Greedy rank-R power-method fit of `Σ_i κ_i X_i / n` (`κ_i` the
    /// centered label), scaled so the mean `|⟨X_i, B⟩|` is 1.
    Moment,
}

impl FromStr for InitStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitStrategy::Random),
            "moment" => Ok(InitStrategy::Moment),
            other => Err(Error::Config(format!(
                "unknown init '{other}' (expected random|moment)"
            ))),
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitStrategy::Random => "random",
            InitStrategy::Moment => "moment",
        })
    }
}

const POWER_ITERATIONS: usize = 50;

/// Rank-R greedy CP approximation of the label-weighted covariate mean.
pub fn moment_factors<R: Rng + ?Sized>(
    data: &Dataset,
    dims: &[usize],
    rank: usize,
    rng: &mut R,
) -> Result<ParafacFactors> {
    let mid = 0.5 * (data.convention.positive() + data.convention.negative());
    let mut resid = DenseTensor::zeros(dims)?;
    for (x, y) in data.covariates.iter().zip(&data.labels) {
        let k = (y - mid) / data.n() as f64;
        for (m, v) in resid.values_mut().iter_mut().zip(x.values()) {
            *m += k * v;
        }
    }
    let d = dims.len();
    let mut out = ParafacFactors::zeros(dims, rank)?;
    let mut h = Vec::new();
    for r in 0..rank {
        let mut one = ParafacFactors::zeros(dims, 1)?;
        for j in 0..d {
            let v: Vec<f64> = (0..dims[j]).map(|_| standard_normal(rng)).collect();
            one.set_margin(j, 0, &unit(&v))?;
        }
        for _ in 0..POWER_ITERATIONS {
            for j in 0..d {
                h.resize(dims[j], 0.0);
                mode_design_row_into(&resid, &one, j, 0, &mut h);
                if h.iter().all(|v| *v == 0.0) {
                    break;
                }
                one.set_margin(j, 0, &unit(&h))?;
            }
        }
        h.resize(dims[d - 1], 0.0);
        mode_design_row_into(&resid, &one, d - 1, 0, &mut h);
        let weight = compensated_dot(&h, one.margin(d - 1, 0));
        let comp = one.component(0);
        for (m, c) in resid.values_mut().iter_mut().zip(comp.values()) {
            *m -= weight * c;
        }
        let share = weight.abs().powf(1.0 / d as f64);
        for j in 0..d {
            let sign = if j == 0 && weight < 0.0 { -1.0 } else { 1.0 };
            let v: Vec<f64> = one.margin(j, 0).iter().map(|b| sign * share * b).collect();
            out.set_margin(j, r, &v)?;
        }
    }
    let b = parafac_compose(&out);
    let mean_abs = data
        .covariates
        .iter()
        .map(|x| compensated_dot(x.values(), b.values()).abs())
        .sum::<f64>()
        / data.n() as f64;
    if mean_abs > 0.0 {
        let c = mean_abs.recip().powf(1.0 / d as f64);
        for r in 0..rank {
            for j in 0..d {
                out.margin_mut(j, r).iter_mut().for_each(|v| *v *= c);
            }
        }
    }
    Ok(out)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub rank: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub stream: u64,
    /// `None` selects [`MdgdpHyper::defaults`] for the rank and tensor order.
    pub hyper: Option<MdgdpHyper>,
    /// Hinge tuning constant (ignored by BT-LR).
    pub sigma2: f64,
    /// Prior precision of each `γ` component.
    pub gamma_precision: f64,
    pub init: InitStrategy,
    /// Standard deviation of the Gaussian jitter added to initial margins.
    pub init_scale: f64,
    pub keep_margins: bool,
    /// Visit margins `(j, r)` in a random order each sweep.
    pub random_scan: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rank: 3,
            iterations: 3000,
            burn_in: 1000,
            thin: 1,
            seed: 1,
            stream: 0,
            hyper: None,
            sigma2: 6.0,
            gamma_precision: 0.01,
            init: InitStrategy::Moment,
            init_scale: 0.01,
            keep_margins: false,
            random_scan: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.gamma_precision > 0.0 && self.gamma_precision.is_finite()) {
            return Err(Error::Config("gamma prior precision must be positive".into()));
        }
        if let Some(h) = &self.hyper {
            h.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn resolved_hyper(&self, ndim: usize) -> MdgdpHyper {
        self.hyper.unwrap_or_else(|| MdgdpHyper::defaults(self.rank, ndim))
    }

    pub fn n_kept(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Stored post-burn-in draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub model: ModelKind,
    pub config: FitConfig,
    pub hyper: MdgdpHyper,
    pub dims: Vec<usize>,
    pub n_scalars: usize,
    /// Sweep index (0-based) of each kept draw.
    pub iterations: Vec<usize>,
    /// Composed coefficient tensor per draw, `n_draws × J` row-major.
    #[serde(skip)]
    pub b_draws: Vec<f64>,
    /// `n_draws × q`.
    #[serde(skip)]
    pub gamma_draws: Vec<f64>,
    #[serde(skip)]
    pub tau: Vec<f64>,
    /// `n_draws × R`.
    #[serde(skip)]
    pub phi: Vec<f64>,
    /// Log-likelihood (pseudo-likelihood for BT-SVM) at each kept draw.
    #[serde(skip)]
    pub loglik: Vec<f64>,
    #[serde(skip)]
    pub margins: Vec<ParafacFactors>,
}

impl ChainOutput {
    pub fn n_draws(&self) -> usize {
        self.iterations.len()
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn b_draw(&self, k: usize) -> &[f64] {
        let j = self.n_cells();
        &self.b_draws[k * j..(k + 1) * j]
    }

    pub fn gamma_draw(&self, k: usize) -> &[f64] {
        let q = self.n_scalars;
        &self.gamma_draws[k * q..(k + 1) * q]
    }

    /// Trace of a single cell across draws.
    pub fn cell_trace(&self, cell: usize) -> Vec<f64> {
        let j = self.n_cells();
        (0..self.n_draws()).map(|k| self.b_draws[k * j + cell]).collect()
    }

    pub fn posterior_mean_b(&self) -> DenseTensor {
        let j = self.n_cells();
        let mut mean = vec![0.0; j];
        for k in 0..self.n_draws() {
            for (m, v) in mean.iter_mut().zip(self.b_draw(k)) {
                *m += v;
            }
        }
        let n = self.n_draws().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        DenseTensor::new(self.dims.clone(), mean).expect("chain dims are valid")
    }

    pub fn posterior_mean_gamma(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_scalars];
        for k in 0..self.n_draws() {
            for (m, v) in mean.iter_mut().zip(self.gamma_draw(k)) {
                *m += v;
            }
        }
        let n = self.n_draws().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Keep every `factor`-th stored draw.
    pub fn thinned(&self, factor: usize) -> ChainOutput {
        let factor = factor.max(1);
        let keep: Vec<usize> = (0..self.n_draws()).step_by(factor).collect();
        let r = self.hyper_rank();
        let mut out = self.clone();
        out.iterations = keep.iter().map(|&k| self.iterations[k]).collect();
        out.b_draws = keep.iter().flat_map(|&k| self.b_draw(k).to_vec()).collect();
        out.gamma_draws = keep.iter().flat_map(|&k| self.gamma_draw(k).to_vec()).collect();
        out.tau = keep.iter().map(|&k| self.tau[k]).collect();
        out.phi = keep
            .iter()
            .flat_map(|&k| self.phi[k * r..(k + 1) * r].to_vec())
            .collect();
        out.loglik = keep.iter().map(|&k| self.loglik[k]).collect();
        out.margins = if self.margins.is_empty() {
            Vec::new()
        } else {
            keep.iter().map(|&k| self.margins[k].clone()).collect()
        };
        out.config.thin *= factor;
        out
    }

    fn hyper_rank(&self) -> usize {
        self.config.rank
    }
}

/// Posterior predictive summary for each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Posterior mean of `f_i` (BT-SVM) or of `P(y_i = 1)` (BT-LR).
    pub score: Vec<f64>,
    pub labels: Vec<f64>,
}

impl ChainOutput {
    /// BT-SVM: `sign(E[f_i])`, ties to `+1`. BT-LR: average the success
    /// probability over draws and classify positive when it is at least 1/2.
    pub fn predict(&self, data: &Dataset) -> Result<Prediction> {
        if self.n_draws() == 0 {
            return Err(Error::Config("chain has no stored draws".into()));
        }
        if data.n() > 0 && (data.dims() != Some(&self.dims[..]) || data.n_scalars() != self.n_scalars) {
            return Err(Error::Structure(format!(
                "dataset shape {:?}/{} does not match chain {:?}/{}",
                data.dims(),
                data.n_scalars(),
                self.dims,
                self.n_scalars
            )));
        }
        let conv = self.model.convention();
        match self.model {
            ModelKind::BtSvm => {
                let b = self.posterior_mean_b();
                let g = self.posterior_mean_gamma();
                let score: Vec<f64> = data
                    .covariates
                    .iter()
                    .zip(&data.scalars)
                    .map(|(x, z)| compensated_dot(x.values(), b.values()) + compensated_dot(z, &g))
                    .collect();
                let labels = score
                    .iter()
                    .map(|&f| if f >= 0.0 { conv.positive() } else { conv.negative() })
                    .collect();
                Ok(Prediction { score, labels })
            }
            ModelKind::BtLr => {
                let k = self.n_draws();
                let score: Vec<f64> = data
                    .covariates
                    .iter()
                    .zip(&data.scalars)
                    .map(|(x, z)| {
                        (0..k)
                            .map(|d| {
                                sigmoid(
                                    compensated_dot(x.values(), self.b_draw(d))
                                        + compensated_dot(z, self.gamma_draw(d)),
                                )
                            })
                            .sum::<f64>()
                            / k as f64
                    })
                    .collect();
                let labels = score
                    .iter()
                    .map(|&p| if p >= 0.5 { conv.positive() } else { conv.negative() })
                    .collect();
                Ok(Prediction { score, labels })
            }
        }
    }
}

/// Pseudo-log-likelihood `Σ_i [-ln σ² - (2/σ²) max(1 - y_i f_i, 0)]`.
pub fn hinge_log_lik(labels: &[f64], f: &[f64], sigma2: f64) -> f64 {
    labels
        .iter()
        .zip(f)
        .map(|(y, fi)| -sigma2.ln() - 2.0 / sigma2 * (1.0 - y * fi).max(0.0))
        .sum()
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Bernoulli log-likelihood `Σ_i [y_i f_i - ln(1 + e^{f_i})]`, `y ∈ {0, 1}`.
pub fn logistic_log_lik(labels: &[f64], f: &[f64]) -> f64 {
    labels.iter().zip(f).map(|(y, fi)| y * fi - softplus(*fi)).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gaussian pseudo-observations of the linear predictor.
#[derive(Debug, Clone, Default)]
pub struct Working {
    pub weight: Vec<f64>,
    pub target: Vec<f64>,
}

/// Regression parameters shared by both kernels, with cached per-sample
/// component contributions `⟨X_i, B_r⟩` and `z_i'γ`.
#[derive(Debug, Clone)]
pub struct GibbsCore {
    pub factors: ParafacFactors,
    pub gamma: Vec<f64>,
    pub prior: MdgdpState,
    comp: Vec<Vec<f64>>,
    zgamma: Vec<f64>,
}

impl GibbsCore {
    pub fn new(data: &Dataset, factors: ParafacFactors, gamma: Vec<f64>, prior: MdgdpState) -> Result<Self> {
        if let Some(d) = data.dims() {
            if d != factors.dims() {
                return Err(Error::Structure(format!(
                    "dataset dims {d:?} do not match factor dims {:?}",
                    factors.dims()
                )));
            }
        }
        if data.n() > 0 && data.n_scalars() != gamma.len() {
            return Err(Error::Structure(format!(
                "dataset has {} scalar covariates, gamma has {}",
                data.n_scalars(),
                gamma.len()
            )));
        }
        let mut core = Self {
            comp: vec![vec![0.0; data.n()]; factors.rank()],
            zgamma: vec![0.0; data.n()],
            factors,
            gamma,
            prior,
        };
        core.recompute(data);
        Ok(core)
    }

    /// Starting point per [`InitStrategy`], with `γ = 0` and neutral prior scales.
    pub fn initialize<R: Rng + ?Sized>(
        data: &Dataset,
        dims: &[usize],
        n_scalars: usize,
        config: &FitConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut factors = ParafacFactors::zeros(dims, config.rank)?;
        if config.init == InitStrategy::Moment && data.n() > 0 {
            factors = moment_factors(data, dims, config.rank, rng)?;
        }
        for r in 0..config.rank {
            for j in 0..dims.len() {
                for v in factors.margin_mut(j, r) {
                    *v += config.init_scale * standard_normal(rng);
                }
            }
        }
        let prior = MdgdpState::initial(dims, config.rank);
        Self::new(data, factors, vec![0.0; n_scalars], prior)
    }

    /// Rebuild the cached contributions from scratch.
    pub fn recompute(&mut self, data: &Dataset) {
        let last = self.factors.ndim() - 1;
        let mut h = vec![0.0; self.factors.dims()[last]];
        for r in 0..self.factors.rank() {
            for (i, x) in data.covariates.iter().enumerate() {
                mode_design_row_into(x, &self.factors, last, r, &mut h);
                self.comp[r][i] = compensated_dot(&h, self.factors.margin(last, r));
            }
        }
        for (i, z) in data.scalars.iter().enumerate() {
            self.zgamma[i] = compensated_dot(z, &self.gamma);
        }
    }

    /// `⟨X_i, B⟩` from the cache.
    pub fn tensor_part(&self, i: usize) -> f64 {
        self.comp.iter().map(|c| c[i]).sum()
    }

    pub fn predictor(&self, i: usize) -> f64 {
        self.tensor_part(i) + self.zgamma[i]
    }

    pub fn predictors(&self) -> Vec<f64> {
        (0..self.zgamma.len()).map(|i| self.predictor(i)).collect()
    }

    /// Cached `⟨X_i, B_r⟩`.
    pub fn component_part(&self, r: usize, i: usize) -> f64 {
        self.comp[r][i]
    }

    /// Joint `(Φ, τ)` update.
    pub fn update_global<R: Rng + ?Sized>(&mut self, hyper: &MdgdpHyper, rng: &mut R) -> Result<()> {
        let (phi, tau) = update_global_scales(&self.factors, &self.prior, hyper, rng)?;
        self.prior.phi = phi;
        self.prior.tau = tau;
        Ok(())
    }

    /// Local scales `(λ, w)` for margin `(j, r)`.
    pub fn update_local<R: Rng + ?Sized>(&mut self, j: usize, r: usize, hyper: &MdgdpHyper, rng: &mut R) -> Result<()> {
        let (lambda, w) =
            update_local_scales(self.factors.margin(j, r), self.prior.phi[r], self.prior.tau, hyper, rng)?;
        self.prior.set_local(j, r, lambda, w);
        Ok(())
    }

    /// Gaussian full conditional of margin `(j, r)` given the
    /// pseudo-observations, with every other component and `z'γ` as offset.
    pub fn update_margin<R: Rng + ?Sized>(
        &mut self,
        j: usize,
        r: usize,
        data: &Dataset,
        working: &Working,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let p = self.factors.dims()[j];
        let n = data.n();
        let mut q = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        let mut rows = vec![0.0; n * p];
        for i in 0..n {
            let h = &mut rows[i * p..(i + 1) * p];
            mode_design_row_into(&data.covariates[i], &self.factors, j, r, h);
            let offset = self.predictor(i) - self.comp[r][i];
            let wt = working.weight[i];
            let resid = working.target[i] - offset;
            for a in 0..p {
                let wa = wt * h[a];
                b[a] += wa * resid;
                let qa = &mut q[a * p..a * p + a + 1];
                for (qab, hb) in qa.iter_mut().zip(&h[..=a]) {
                    *qab += wa * hb;
                }
            }
        }
        let scale = self.prior.phi[r] * self.prior.tau;
        for (k, w) in self.prior.w_at(j, r).iter().enumerate() {
            q[k * p + k] += 1.0 / (scale * w);
        }
        let beta = sample_gaussian_canonical(q, &b, rng).map_err(|e| match e {
            Error::Numeric(m) => Error::Numeric(format!("margin ({j},{r}): {m}")),
            other => other,
        })?;
        self.factors.set_margin(j, r, &beta)?;
        for i in 0..n {
            self.comp[r][i] = compensated_dot(&rows[i * p..(i + 1) * p], &beta);
        }
        Ok(beta)
    }

    /// Conjugate Gaussian update of `γ` with prior precision `precision · I`.
    pub fn update_gamma<R: Rng + ?Sized>(
        &mut self,
        data: &Dataset,
        working: &Working,
        precision: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let qdim = self.gamma.len();
        if qdim == 0 {
            return Ok(Vec::new());
        }
        let mut q = vec![0.0; qdim * qdim];
        let mut b = vec![0.0; qdim];
        for (i, z) in data.scalars.iter().enumerate() {
            let wt = working.weight[i];
            let resid = working.target[i] - self.tensor_part(i);
            for a in 0..qdim {
                let wa = wt * z[a];
                b[a] += wa * resid;
                for c in 0..=a {
                    q[a * qdim + c] += wa * z[c];
                }
            }
        }
        for k in 0..qdim {
            q[k * qdim + k] += precision;
        }
        let gamma = sample_gaussian_canonical(q, &b, rng).map_err(|e| Error::Numeric(format!("gamma update: {e}")))?;
        self.gamma.clone_from(&gamma);
        for (i, z) in data.scalars.iter().enumerate() {
            self.zgamma[i] = compensated_dot(z, &gamma);
        }
        Ok(gamma)
    }

    /// Local scales and margins over all `(j, r)` in back-fitting order.
    pub fn sweep_margins<R: Rng + ?Sized>(
        &mut self,
        data: &Dataset,
        working: &Working,
        hyper: &MdgdpHyper,
        random_scan: bool,
        rng: &mut R,
    ) -> Result<()> {
        let d = self.factors.ndim();
        let mut order: Vec<(usize, usize)> = (0..self.factors.rank())
            .flat_map(|r| (0..d).map(move |j| (j, r)))
            .collect();
        if random_scan {
            use rand::seq::SliceRandom;
            order.shuffle(rng);
        }
        for (j, r) in order {
            self.update_local(j, r, hyper, rng)?;
            self.update_margin(j, r, data, working, rng)?;
        }
        Ok(())
    }
}

/// Accumulates kept draws during a run.
pub(crate) struct DrawRecorder {
    out: ChainOutput,
}

impl DrawRecorder {
    pub(crate) fn new(
        model: ModelKind,
        config: &FitConfig,
        hyper: MdgdpHyper,
        dims: &[usize],
        n_scalars: usize,
    ) -> Self {
        let kept = config.n_kept();
        let j: usize = dims.iter().product();
        Self {
            out: ChainOutput {
                model,
                config: config.clone(),
                hyper,
                dims: dims.to_vec(),
                n_scalars,
                iterations: Vec::with_capacity(kept),
                b_draws: Vec::with_capacity(kept * j),
                gamma_draws: Vec::with_capacity(kept * n_scalars),
                tau: Vec::with_capacity(kept),
                phi: Vec::with_capacity(kept * config.rank),
                loglik: Vec::with_capacity(kept),
                margins: Vec::new(),
            },
        }
    }

    pub(crate) fn wants(&self, iteration: usize) -> bool {
        let c = &self.out.config;
        iteration >= c.burn_in && (iteration - c.burn_in).is_multiple_of(c.thin)
    }

    pub(crate) fn record(&mut self, iteration: usize, core: &GibbsCore, loglik: f64) {
        self.out.iterations.push(iteration);
        self.out
            .b_draws
            .extend_from_slice(parafac_compose(&core.factors).values());
        self.out.gamma_draws.extend_from_slice(&core.gamma);
        self.out.tau.push(core.prior.tau);
        self.out.phi.extend_from_slice(&core.prior.phi);
        self.out.loglik.push(loglik);
        if self.out.config.keep_margins {
            self.out.margins.push(core.factors.clone());
        }
    }

    pub(crate) fn finish(self) -> ChainOutput {
        self.out
    }
}

/// Shape checks shared by both `run_chain_*` entry points.
pub(crate) fn chain_setup(
    data: &Dataset,
    config: &FitConfig,
    expected: LabelConvention,
) -> Result<(Vec<usize>, usize, MdgdpHyper, RngState)> {
    config.validate()?;
    if data.convention != expected {
        return Err(Error::Config(format!(
            "labels use {:?}, model expects {expected:?}",
            data.convention
        )));
    }
    let dims = data
        .dims()
        .map(|d| d.to_vec())
        .or_else(|| data.truth.as_ref().map(|t| t.b.dims().to_vec()))
        .ok_or_else(|| Error::Config("cannot infer tensor dims from an empty dataset".into()))?;
    let n_scalars = if data.n() > 0 {
        data.n_scalars()
    } else {
        data.truth.as_ref().map_or(1, |t| t.gamma.len())
    };
    let hyper = config.resolved_hyper(dims.len());
    Ok((dims, n_scalars, hyper, RngState::new(config.seed, config.stream)))
}
