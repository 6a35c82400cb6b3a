//! Multiway Dirichlet generalized double Pareto (M-DGDP) shrinkage prior on
//! PARAFAC margins, and the Gibbs updates of its latent scales.
//!
//! Hierarchy, for margin `(j, r)` of length `p_j`:
//!
//! ```text
//! β_j^(r) ~ N(0, φ_r τ W_jr),  W_jr = diag(w_jr,1 .. w_jr,p_j)
//! w_jr,k  ~ Exp(rate λ_jr² / 2)
//! λ_jr    ~ Ga(a_λ, b_λ)
//! Φ       ~ Dirichlet(α, …, α),  τ ~ Ga(a_τ, b_τ)
//! ```
//!
//! The global block `[Φ, τ | B, W]` is drawn through `ψ_r = φ_r τ`: when
//! `a_τ = Rα` the `ψ_r` are a posteriori independent GIG variables; other
//! values of `a_τ` add the factor `(Σψ)^(a_τ - Rα)`, handled by an
//! independence Metropolis step. A conditional draw of `τ | Φ` follows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::{exponential, gamma, sample_dirichlet, sample_gig, sample_gig_half, standard_normal};
use crate::error::{Error, Result};
use crate::tensor::ParafacFactors;

/// Lower bound applied to τ, φ_r and w so the prior precision stays finite.
pub const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdgdpHyper {
    pub a_tau: f64,
    pub b_tau: f64,
    /// Symmetric Dirichlet concentration (per component).
    pub alpha: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
}

impl MdgdpHyper {
    /// `α = 1/R`, `a_τ = 1`, `b_τ = α R^(1/D)`, `a_λ = 3`, `b_λ = a_λ^(1/(2D))`.
    pub fn defaults(rank: usize, ndim: usize) -> Self {
        let alpha = 1.0 / rank as f64;
        let a_lambda = 3.0;
        Self {
            a_tau: 1.0,
            b_tau: alpha * (rank as f64).powf(1.0 / ndim as f64),
            alpha,
            a_lambda,
            b_lambda: a_lambda.powf(1.0 / (2.0 * ndim as f64)),
        }
    }

    /// Replace `α`, keeping `b_τ = α R^(1/D)` tied to it.
    pub fn with_alpha(mut self, alpha: f64, rank: usize, ndim: usize) -> Self {
        self.alpha = alpha;
        self.b_tau = alpha * (rank as f64).powf(1.0 / ndim as f64);
        self
    }

    /// Replace `a_λ`, keeping `b_λ = a_λ^(1/(2D))` tied to it.
    pub fn with_a_lambda(mut self, a_lambda: f64, ndim: usize) -> Self {
        self.a_lambda = a_lambda;
        self.b_lambda = a_lambda.powf(1.0 / (2.0 * ndim as f64));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a_tau, self.b_tau, self.alpha, self.a_lambda, self.b_lambda];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "prior hyperparameters must be positive: {self:?}"
            )))
        }
    }
}

/// Latent scales of the prior. Per-margin vectors are indexed `r * D + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdgdpState {
    pub tau: f64,
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    ndim: usize,
}

impl MdgdpState {
    /// Neutral starting point: `τ = 1`, `φ_r = 1/R`, `λ = 1`, `w = 1`.
    pub fn initial(dims: &[usize], rank: usize) -> Self {
        Self {
            tau: 1.0,
            phi: vec![1.0 / rank as f64; rank],
            lambda: vec![1.0; rank * dims.len()],
            w: (0..rank).flat_map(|_| dims.iter().map(|&p| vec![1.0; p])).collect(),
            ndim: dims.len(),
        }
    }

    /// Draw every latent scale from the prior.
    pub fn sample_prior<R: Rng + ?Sized>(dims: &[usize], rank: usize, hyper: &MdgdpHyper, rng: &mut R) -> Result<Self> {
        hyper.validate()?;
        let mut s = Self::initial(dims, rank);
        s.tau = gamma(hyper.a_tau, hyper.b_tau, rng)?.max(SCALE_FLOOR);
        s.phi = sample_dirichlet(&vec![hyper.alpha; rank], rng)?;
        s.phi.iter_mut().for_each(|v| *v = v.max(SCALE_FLOOR));
        for r in 0..rank {
            for (j, &p) in dims.iter().enumerate() {
                let lam = gamma(hyper.a_lambda, hyper.b_lambda, rng)?;
                let idx = r * dims.len() + j;
                s.lambda[idx] = lam;
                for k in 0..p {
                    s.w[idx][k] = exponential(0.5 * lam * lam, rng)?.max(SCALE_FLOOR);
                }
            }
        }
        Ok(s)
    }

    pub fn rank(&self) -> usize {
        self.phi.len()
    }

    pub fn lambda_at(&self, j: usize, r: usize) -> f64 {
        self.lambda[r * self.ndim + j]
    }

    pub fn w_at(&self, j: usize, r: usize) -> &[f64] {
        &self.w[r * self.ndim + j]
    }

    pub fn set_local(&mut self, j: usize, r: usize, lambda: f64, w: Vec<f64>) {
        let idx = r * self.ndim + j;
        self.lambda[idx] = lambda;
        self.w[idx] = w;
    }

    /// Prior variance of margin element `k` of `(j, r)`.
    pub fn margin_variance(&self, j: usize, r: usize, k: usize) -> f64 {
        self.phi[r] * self.tau * self.w_at(j, r)[k]
    }

    pub fn check_invariants(&self) -> Result<()> {
        let simplex: f64 = self.phi.iter().sum();
        let ok = self.tau > 0.0
            && self.tau.is_finite()
            && (simplex - 1.0).abs() < 1e-9
            && self.phi.iter().all(|&p| p > 0.0 && p <= 1.0)
            && self.lambda.iter().all(|&l| l > 0.0 && l.is_finite())
            && self.w.iter().flatten().all(|&w| w > 0.0 && w.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Numeric(format!(
                "prior state left its domain: tau={} phi={:?}",
                self.tau, self.phi
            )))
        }
    }
}

/// `λ_jr | β, φ_r, τ ~ Ga(a_λ + p_j, b_λ + ‖β‖₁ / sqrt(φ_r τ))`, then
/// `w_jr,k | λ_jr, β ~ GIG(1/2, λ_jr², β_k² / (φ_r τ))`.
pub fn update_local_scales<R: Rng + ?Sized>(
    beta: &[f64],
    phi_r: f64,
    tau: f64,
    hyper: &MdgdpHyper,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let scale = phi_r * tau;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Parameter(format!(
            "local scale update needs phi_r * tau > 0, got {phi_r} * {tau}"
        )));
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let lambda = gamma(
        hyper.a_lambda + beta.len() as f64,
        hyper.b_lambda + l1 / scale.sqrt(),
        rng,
    )?;
    let lam2 = lambda * lambda;
    let w = beta
        .iter()
        .map(|b| Ok(sample_gig_half(lam2, b * b / scale, rng)?.max(SCALE_FLOOR)))
        .collect::<Result<Vec<_>>>()?;
    Ok((lambda, w))
}

/// `Σ_j β_jᵀ W_jr⁻¹ β_j` for each component.
fn weighted_norms(factors: &ParafacFactors, state: &MdgdpState) -> Vec<f64> {
    (0..factors.rank())
        .map(|r| {
            (0..factors.ndim())
                .map(|j| {
                    factors
                        .margin(j, r)
                        .iter()
                        .zip(state.w_at(j, r))
                        .map(|(b, w)| b * b / w)
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Joint draw of `(Φ, τ)` given margins and local scales. Returns `(phi, tau)`.
///
/// Components whose margins are all zero carry no information about their
/// scale; their `ψ_r` is drawn from the prior `Ga(α, b_τ)`.
pub fn update_global_scales<R: Rng + ?Sized>(
    factors: &ParafacFactors,
    state: &MdgdpState,
    hyper: &MdgdpHyper,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    hyper.validate()?;
    let rank = factors.rank();
    if state.rank() != rank || state.ndim != factors.ndim() {
        return Err(Error::Structure("prior state does not match factor shape".into()));
    }
    let p0: usize = factors.dims().iter().sum();
    let half_p0 = 0.5 * p0 as f64;
    let norms = weighted_norms(factors, state);

    // Independence proposal for ψ_r = φ_r τ.
    let mut psi = Vec::with_capacity(rank);
    for &s in &norms {
        let draw = if s > 0.0 {
            sample_gig(hyper.alpha - half_p0, 2.0 * hyper.b_tau, s, rng)?
        } else {
            gamma(hyper.alpha, hyper.b_tau, rng)?
        };
        psi.push(draw.max(SCALE_FLOOR));
    }
    let tau_prop: f64 = psi.iter().sum();
    let excess = hyper.a_tau - rank as f64 * hyper.alpha;
    let accept = if excess == 0.0 {
        true
    } else {
        let log_ratio = excess * (tau_prop.ln() - state.tau.ln());
        log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
    };
    let phi: Vec<f64> = if accept {
        psi.iter().map(|p| (p / tau_prop).max(SCALE_FLOOR)).collect()
    } else {
        state.phi.clone()
    };

    // τ | Φ, B, W.
    let chi: f64 = norms.iter().zip(&phi).map(|(s, p)| s / p).sum();
    let shape = hyper.a_tau - rank as f64 * half_p0;
    let tau = if chi > 0.0 {
        sample_gig(shape, 2.0 * hyper.b_tau, chi, rng)?
    } else {
        gamma(hyper.a_tau, hyper.b_tau, rng)?
    };
    Ok((phi, tau.max(SCALE_FLOOR)))
}

/// Draw every margin from its conditional prior `N(0, φ_r τ W_jr)`.
pub fn sample_margins_given_scales<R: Rng + ?Sized>(factors: &mut ParafacFactors, state: &MdgdpState, rng: &mut R) {
    for r in 0..factors.rank() {
        for j in 0..factors.ndim() {
            let p = factors.dims()[j];
            for k in 0..p {
                let sd = state.margin_variance(j, r, k).sqrt();
                factors.margin_mut(j, r)[k] = sd * standard_normal(rng);
            }
        }
    }
}
