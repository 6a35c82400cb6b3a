//! Samplers checked against independent oracles: closed-form CDFs from
//! `statrs`, numerical quadrature of unnormalized densities, and known
//! Laplace transforms.

mod common;

use common::{integrate_half_line, ks_critical, ks_distance, mean, variance};
use statrs::distribution::{ContinuousCDF, Normal};
use tensorclass::dists::{
    exponential, sample_gig, sample_gig_half, sample_inverse_gaussian, sample_polya_gamma_1, standard_normal,
};
use tensorclass::prior::{sample_margins_given_scales, MdgdpState};
use tensorclass::sampler::update_rho;
use tensorclass::tensor::ParafacFactors;
use tensorclass::{MdgdpHyper, RngState};

fn within(sample_mean: f64, target: f64, se: f64, k: f64) -> bool {
    (sample_mean - target).abs() < k * se
}

/// `E[X^m]` of `GIG(p, a, b)` by quadrature of the unnormalized density.
fn gig_moment(p: f64, a: f64, b: f64, m: i32) -> f64 {
    // Log-density peak, to keep the integrand in range.
    let mode = ((p - 1.0) + ((p - 1.0).powi(2) + a * b).sqrt()) / a;
    let log_dens = |x: f64| (p - 1.0) * x.ln() - 0.5 * (a * x + b / x);
    let peak = log_dens(mode);
    let dens = |x: f64| if x > 0.0 { (log_dens(x) - peak).exp() } else { 0.0 };
    let z = integrate_half_line(dens, 1e-12);
    integrate_half_line(|x| x.powi(m) * dens(x), 1e-12) / z
}

#[test]
fn inverse_gaussian_matches_closed_form_cdf() {
    let phi = Normal::standard();
    let mut rng = RngState::new(101, 0);
    for &(mu, lambda) in &[(1.0, 1.0), (0.3, 4.0), (5.0, 0.5), (1e3, 2.0)] {
        let n = 20_000;
        let x: Vec<f64> = (0..n)
            .map(|_| sample_inverse_gaussian(mu, lambda, &mut rng).unwrap())
            .collect();
        let cdf = |v: f64| {
            let s = (lambda / v).sqrt();
            let tail = (2.0 * lambda / mu + phi.cdf(-s * (v / mu + 1.0)).ln()).exp();
            phi.cdf(s * (v / mu - 1.0)) + tail
        };
        let d = ks_distance(x, cdf);
        assert!(d < ks_critical(n), "IG({mu}, {lambda}): D = {d}");
    }
}

#[test]
fn general_gig_moments_match_quadrature() {
    let mut rng = RngState::new(102, 0);
    let cases = [
        (-1.5, 2.0, 0.5),
        (0.3, 1.0, 3.0),
        (-5.0, 0.2, 8.0),
        (2.5, 4.0, 0.01),
        (-40.0, 2.0, 100.0),
        (0.5, 1.0, 1.0),
        (-0.5, 1e-3, 1e-3),
    ];
    for &(p, a, b) in &cases {
        let n = 40_000;
        let x: Vec<f64> = (0..n).map(|_| sample_gig(p, a, b, &mut rng).unwrap()).collect();
        let m1 = gig_moment(p, a, b, 1);
        let m2 = gig_moment(p, a, b, 2);
        let sd = (m2 - m1 * m1).sqrt();
        assert!(
            within(mean(&x), m1, sd / (n as f64).sqrt(), 4.5),
            "GIG({p},{a},{b}) mean {} vs {m1}",
            mean(&x)
        );
        // Compare log-moments too: robust to the heavy right tail.
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let log_dens = |v: f64| (p - 1.0) * v.ln() - 0.5 * (a * v + b / v);
        let mode = ((p - 1.0) + ((p - 1.0).powi(2) + a * b).sqrt()) / a;
        let peak = log_dens(mode);
        let dens = |v: f64| if v > 0.0 { (log_dens(v) - peak).exp() } else { 0.0 };
        let z = integrate_half_line(dens, 1e-12);
        let ml = integrate_half_line(|v| v.ln() * dens(v), 1e-12) / z;
        let se = (variance(&lx) / n as f64).sqrt();
        assert!(
            within(mean(&lx), ml, se, 4.5),
            "GIG({p},{a},{b}) E ln X {} vs {ml}",
            mean(&lx)
        );
    }
}

#[test]
fn gig_half_matches_general_sampler_and_closed_form() {
    let mut rng = RngState::new(103, 0);
    for &(a, b) in &[(1.0, 1.0), (9.0, 0.04), (0.01, 50.0)] {
        let n = 40_000;
        let x: Vec<f64> = (0..n).map(|_| sample_gig_half(a, b, &mut rng).unwrap()).collect();
        let target = (b / a).sqrt() + 1.0 / a;
        assert!((gig_moment(0.5, a, b, 1) - target).abs() < 1e-8 * target);
        let var = gig_moment(0.5, a, b, 2) - target * target;
        assert!(within(mean(&x), target, (var / n as f64).sqrt(), 4.5), "({a},{b})");
    }
}

#[test]
fn polya_gamma_moments_and_laplace_transform() {
    let mut rng = RngState::new(104, 0);
    for &c in &[0.0, 0.5, 2.0, 7.0, -3.0] {
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|_| sample_polya_gamma_1(c, &mut rng).unwrap()).collect();
        let (m, v) = if c == 0.0 {
            (0.25, 1.0 / 24.0)
        } else {
            let ca: f64 = c.abs();
            let sech = 1.0 / (0.5 * ca).cosh();
            (
                (0.5 * ca).tanh() / (2.0 * ca),
                (ca.sinh() - ca) * sech * sech / (4.0 * ca.powi(3)),
            )
        };
        assert!(within(mean(&x), m, (v / n as f64).sqrt(), 4.5), "PG(1,{c}) mean");
        assert!(
            (variance(&x) - v).abs() < 0.05 * v,
            "PG(1,{c}) var {} vs {v}",
            variance(&x)
        );
        for &t in &[0.5, 2.0, 8.0] {
            let lt: Vec<f64> = x.iter().map(|w| (-w * t).exp()).collect();
            let exact = (0.5 * c).cosh() / ((0.5 * (0.5 * c * c + t)).sqrt()).cosh();
            let se = (variance(&lt) / n as f64).sqrt();
            assert!(within(mean(&lt), exact, se, 4.5), "PG(1,{c}) transform at {t}");
        }
    }
}

#[test]
fn rho_conditional_moments() {
    // ρ | y f ~ GIG(1/2, 1/σ², (1 - y f)² / σ²).
    let mut rng = RngState::new(105, 0);
    let n = 100_000;
    for &sigma2 in &[1.0, 6.0] {
        for &yf in &[-2.0, 0.0, 0.5, 0.99, 3.0] {
            let rho = update_rho(&vec![1.0; n], &vec![yf; n], sigma2, &mut rng).unwrap();
            let (a, b) = (1.0 / sigma2, (1.0 - yf) * (1.0 - yf) / sigma2);
            let m1 = gig_moment(0.5, a, b, 1);
            assert!((m1 - ((1.0f64 - yf).abs() + sigma2)).abs() < 1e-8 * m1);
            let se = (variance(&rho) / n as f64).sqrt();
            assert!(
                within(mean(&rho), m1, se, 4.5),
                "σ²={sigma2} yf={yf}: {} vs {m1}",
                mean(&rho)
            );
            let inv: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
            let se = (variance(&inv) / n as f64).sqrt();
            let target = gig_moment(0.5, a, b, -1);
            assert!(within(mean(&inv), target, se, 4.5), "σ²={sigma2} yf={yf}: E 1/ρ");
        }
    }
}

#[test]
fn normal_exponential_mixture_is_laplace() {
    let mut rng = RngState::new(106, 0);
    let n = 50_000;
    let lambda: f64 = 1.7;
    let x: Vec<f64> = (0..n)
        .map(|_| exponential(0.5 * lambda * lambda, &mut rng).unwrap().sqrt() * standard_normal(&mut rng))
        .collect();
    let laplace = |v: f64| {
        if v < 0.0 {
            0.5 * (lambda * v).exp()
        } else {
            1.0 - 0.5 * (-lambda * v).exp()
        }
    };
    let d = ks_distance(x, laplace);
    assert!(d < ks_critical(n), "D = {d}");
}

#[test]
fn prior_margins_are_conditionally_laplace() {
    // β | λ, φ, τ ~ Laplace(0, sqrt(φ τ) / λ) elementwise.
    let dims = [3, 2];
    let hyper = MdgdpHyper::defaults(2, 2);
    let mut rng = RngState::new(107, 0);
    let mut u = Vec::new();
    for _ in 0..8_000 {
        let state = MdgdpState::sample_prior(&dims, 2, &hyper, &mut rng).unwrap();
        let mut f = ParafacFactors::zeros(&dims, 2).unwrap();
        sample_margins_given_scales(&mut f, &state, &mut rng);
        for r in 0..2 {
            for j in 0..2 {
                let scale = (state.phi[r] * state.tau).sqrt() / state.lambda_at(j, r);
                u.extend(f.margin(j, r).iter().map(|b| b / scale));
            }
        }
    }
    let n = u.len();
    let d = ks_distance(u, |v| if v < 0.0 { 0.5 * v.exp() } else { 1.0 - 0.5 * (-v).exp() });
    assert!(d < ks_critical(n), "D = {d}");
}

#[test]
fn hinge_mixture_identity_on_a_wide_grid() {
    for &sigma2 in &[0.5, 1.0, 6.0, 10.0] {
        for &u in &[-3.0, -1.0, 0.0, 0.5, 0.9, 0.999, 1.0, 1.5, 4.0] {
            let c = (2.0 * std::f64::consts::PI * sigma2).sqrt();
            // ρ = t² removes the ρ^{-1/2} endpoint singularity.
            let integrand = |t: f64| {
                if t == 0.0 {
                    return 0.0;
                }
                let rho = t * t;
                2.0 * (-(1.0 + rho - u).powi(2) / (2.0 * rho * sigma2)).exp() / c
            };
            let got = integrate_half_line(integrand, 1e-14);
            let want = (-(2.0 / sigma2) * (1.0 - u).max(0.0)).exp();
            assert!(((got - want) / want).abs() < 1e-6, "σ²={sigma2} u={u}: {got} vs {want}");
        }
    }
}
