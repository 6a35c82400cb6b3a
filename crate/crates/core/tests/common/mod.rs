//! Oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use tensorclass::dists::standard_normal;
use tensorclass::prior::{sample_margins_given_scales, MdgdpState};
use tensorclass::sampler::lr::LrChainState;
use tensorclass::sampler::svm::SvmChainState;
use tensorclass::sampler::{sigmoid, GibbsCore};
use tensorclass::tensor::{linear_predictor, ParafacFactors};
use tensorclass::{Dataset, DenseTensor, FitConfig, LabelConvention, MdgdpHyper, RngState};

/// `∫_0^∞ f` via `t = s / (1 - s)` and double-exponential quadrature.
pub fn integrate_half_line(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    quadrature::integrate(
        |s| {
            let one = 1.0 - s;
            f(s / one) / (one * one)
        },
        0.0,
        1.0,
        tol,
    )
    .integral
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Variance of the mean of a correlated series from `batches` batch means.
pub fn batch_variance_of_mean(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = x.chunks_exact(size).take(batches).map(mean).collect();
    variance(&means) / batches as f64
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// KS critical value at level 0.001.
pub fn ks_critical(n: usize) -> f64 {
    1.949 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Svm,
    Lr,
}

/// Toy problem for joint-distribution tests: fixed covariates, intercept-only
/// scalar block, labels to be overwritten.
pub struct ToyProblem {
    pub data: Dataset,
    pub dims: Vec<usize>,
    pub rank: usize,
    pub hyper: MdgdpHyper,
    /// Settings seen by the sampler.
    pub config: FitConfig,
    /// Prior precision of `γ` used by the prior-side simulator.
    pub gamma_precision: f64,
    /// Hinge constant used to generate labels.
    pub sigma2: f64,
    /// Hinge constant used by the sampler.
    pub chain_sigma2: f64,
}

impl ToyProblem {
    pub fn new(kernel: Kernel, dims: &[usize], rank: usize, n: usize, hyper: MdgdpHyper, seed: u64) -> Self {
        let mut rng = RngState::new(seed, 77);
        let covariates = (0..n)
            .map(|_| DenseTensor::from_fn(dims, |_| standard_normal(&mut rng)).unwrap())
            .collect();
        let scalars = vec![vec![1.0]; n];
        let convention = match kernel {
            Kernel::Svm => LabelConvention::PlusMinusOne,
            Kernel::Lr => LabelConvention::ZeroOne,
        };
        let labels = vec![1.0; n];
        let config = FitConfig {
            rank,
            gamma_precision: 1.0,
            hyper: Some(hyper),
            ..FitConfig::default()
        };
        Self {
            data: Dataset::new(covariates, scalars, labels, convention).unwrap(),
            dims: dims.to_vec(),
            rank,
            hyper,
            config,
            gamma_precision: 1.0,
            sigma2: 6.0,
            chain_sigma2: 6.0,
        }
    }

    /// `(factors, γ, prior scales)` from the prior.
    pub fn draw_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> (ParafacFactors, Vec<f64>, MdgdpState) {
        let state = MdgdpState::sample_prior(&self.dims, self.rank, &self.hyper, rng).unwrap();
        let mut factors = ParafacFactors::zeros(&self.dims, self.rank).unwrap();
        sample_margins_given_scales(&mut factors, &state, rng);
        let gamma = vec![standard_normal(rng) / self.gamma_precision.sqrt()];
        (factors, gamma, state)
    }

    pub fn predictors(&self, factors: &ParafacFactors, gamma: &[f64]) -> Vec<f64> {
        self.data
            .covariates
            .iter()
            .zip(&self.data.scalars)
            .map(|(x, z)| linear_predictor(x, z, factors, gamma).unwrap())
            .collect()
    }

    /// Hinge pseudo-likelihood of one label.
    pub fn hinge(&self, y: f64, f: f64) -> f64 {
        (-(2.0 / self.sigma2) * (1.0 - y * f).max(0.0)).exp()
    }

    /// Label draw from `p(y | f)` (normalized hinge for BT-SVM).
    pub fn draw_labels<R: Rng + ?Sized>(&self, kernel: Kernel, f: &[f64], rng: &mut R) -> Vec<f64> {
        f.iter()
            .map(|&fi| match kernel {
                Kernel::Svm => {
                    let (p, m) = (self.hinge(1.0, fi), self.hinge(-1.0, fi));
                    if rng.random::<f64>() < p / (p + m) {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Kernel::Lr => f64::from(u8::from(rng.random::<f64>() < sigmoid(fi))),
            })
            .collect()
    }
}

/// Bounded test functions of `(B, γ, τ, λ)` monitored by the joint tests.
pub fn monitored(factors: &ParafacFactors, gamma: &[f64], state: &MdgdpState) -> Vec<f64> {
    let b = tensorclass::tensor::parafac_compose(factors);
    let mut out: Vec<f64> = b.values().iter().map(|v| v.tanh()).collect();
    out.extend(b.values().iter().map(|v| v * v / (1.0 + v * v)));
    out.push(gamma[0]);
    out.push(gamma[0] * gamma[0]);
    out.push(state.tau.ln());
    out.push(state.lambda[0].ln());
    out
}

pub fn monitored_names(cells: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..cells).map(|k| format!("tanh(b{k})")).collect();
    names.extend((0..cells).map(|k| format!("b{k}^2/(1+b{k}^2)")));
    names.extend(["gamma", "gamma^2", "ln tau", "ln lambda"].map(String::from));
    names
}

/// Prior-side expectations of [`monitored`] and their Monte Carlo variances.
/// For BT-SVM the joint density is `p(θ) Π L(y_i | f_i)` with an
/// unnormalized hinge, so the θ-marginal is reweighted by `Π C(f_i)`.
pub fn marginal_side(problem: &ToyProblem, kernel: Kernel, draws: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = RngState::new(seed, 1);
    let mut g_all = Vec::with_capacity(draws);
    let mut w_all = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (factors, gamma, state) = problem.draw_prior(&mut rng);
        let w = match kernel {
            Kernel::Lr => 1.0,
            Kernel::Svm => problem
                .predictors(&factors, &gamma)
                .iter()
                .map(|&f| problem.hinge(1.0, f) + problem.hinge(-1.0, f))
                .product(),
        };
        g_all.push(monitored(&factors, &gamma, &state));
        w_all.push(w);
    }
    let sw: f64 = w_all.iter().sum();
    let k = g_all[0].len();
    let mut means = vec![0.0; k];
    let mut vars = vec![0.0; k];
    for m in 0..k {
        let mu = g_all.iter().zip(&w_all).map(|(g, w)| w * g[m]).sum::<f64>() / sw;
        let v = g_all
            .iter()
            .zip(&w_all)
            .map(|(g, w)| (w * (g[m] - mu)).powi(2))
            .sum::<f64>()
            / (sw * sw);
        means[m] = mu;
        vars[m] = v;
    }
    (means, vars)
}

/// Successive-conditional simulator: alternate one Gibbs sweep given `y` and
/// a fresh `y | θ`. Returns the monitored series.
pub fn successive_conditional(problem: &ToyProblem, kernel: Kernel, sweeps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = RngState::new(seed, 2);
    let mut data = problem.data.clone();
    let (factors, gamma, state) = problem.draw_prior(&mut rng);
    let f = problem.predictors(&factors, &gamma);
    data.labels = problem.draw_labels(kernel, &f, &mut rng);
    let core = GibbsCore::new(&data, factors, gamma, state).unwrap();
    let mut out = Vec::with_capacity(sweeps);
    match kernel {
        Kernel::Svm => {
            let mut s = SvmChainState::new(core, problem.chain_sigma2);
            for _ in 0..sweeps {
                s.sweep(&data, &problem.hyper, &problem.config, &mut rng).unwrap();
                data.labels = problem.draw_labels(kernel, &s.core.predictors(), &mut rng);
                out.push(monitored(&s.core.factors, &s.core.gamma, &s.core.prior));
            }
        }
        Kernel::Lr => {
            let mut s = LrChainState::new(core);
            for _ in 0..sweeps {
                s.sweep(&data, &problem.hyper, &problem.config, &mut rng).unwrap();
                data.labels = problem.draw_labels(kernel, &s.core.predictors(), &mut rng);
                out.push(monitored(&s.core.factors, &s.core.gamma, &s.core.prior));
            }
        }
    }
    out
}

/// z-scores comparing the two simulators for every monitored moment.
pub fn getting_it_right(
    problem: &ToyProblem,
    kernel: Kernel,
    sweeps: usize,
    prior_draws: usize,
    seed: u64,
) -> Vec<(String, f64)> {
    let (pm, pv) = marginal_side(problem, kernel, prior_draws, seed);
    let series = successive_conditional(problem, kernel, sweeps, seed + 1);
    let names = monitored_names(problem.dims.iter().product());
    (0..pm.len())
        .map(|m| {
            let x: Vec<f64> = series.iter().map(|g| g[m]).collect();
            let z = (mean(&x) - pm[m]) / (batch_variance_of_mean(&x, 50) + pv[m]).sqrt();
            (names[m].clone(), z)
        })
        .collect()
}

/// Multi-indices of a shape in row-major order (last index fastest).
pub fn multi_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &p in dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..p).map(move |k| {
                    let mut v = prefix.clone();
                    v.push(k);
                    v
                })
            })
            .collect();
    }
    out
}

/// `B_r[i_1, ..., i_D] = Π_j β_j^{(r)}[i_j]`, evaluated cell by cell.
pub fn naive_component(factors: &ParafacFactors, r: usize) -> Vec<f64> {
    multi_indices(factors.dims())
        .iter()
        .map(|idx| idx.iter().enumerate().map(|(j, &k)| factors.margin(j, r)[k]).product())
        .collect()
}

pub fn naive_compose(factors: &ParafacFactors) -> Vec<f64> {
    let mut out = vec![0.0; factors.dims().iter().product()];
    for r in 0..factors.rank() {
        for (o, v) in out.iter_mut().zip(naive_component(factors, r)) {
            *o += v;
        }
    }
    out
}

pub fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random factors and covariate of the given shape.
pub fn random_instance<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> (ParafacFactors, DenseTensor) {
    let mut f = ParafacFactors::zeros(dims, rank).unwrap();
    for r in 0..rank {
        for j in 0..dims.len() {
            for v in f.margin_mut(j, r) {
                *v = standard_normal(rng);
            }
        }
    }
    let x = DenseTensor::from_fn(dims, |_| standard_normal(rng)).unwrap();
    (f, x)
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
