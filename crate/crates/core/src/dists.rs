//! Exact samplers for the non-standard distributions the Gibbs kernels need.
//!
//! Parameterizations:
//! - inverse Gaussian `IN(mu, lambda)`: mean `mu`, shape `lambda`;
//! - generalized inverse Gaussian `GIG(p, a, b)`: density proportional to
//!   `x^(p-1) exp(-(a x + b / x) / 2)`;
//! - Pólya-Gamma `PG(1, c)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};

use crate::error::{Error, Result};

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gamma with the given shape and *rate*.
pub fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(Error::Parameter(format!(
            "gamma needs positive finite shape/rate, got ({shape}, {rate})"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok(g.sample(rng))
}

/// Exponential with the given rate.
pub fn exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Parameter(format!(
            "exponential rate must be positive, got {rate}"
        )));
    }
    let e: f64 = Exp1.sample(rng);
    Ok(e / rate)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)`, accurate in the far left tail.
fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        // Mills-ratio asymptotic for the left tail.
        let t = -x;
        -0.5 * t * t - t.ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / (t * t)).ln()
    }
}

/// Inverse Gaussian draw (transformation with root selection).
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mu: f64, lambda: f64, rng: &mut R) -> Result<f64> {
    if !(mu > 0.0 && lambda > 0.0 && mu.is_finite() && lambda.is_finite()) {
        return Err(Error::Parameter(format!(
            "inverse Gaussian needs positive finite (mu, lambda), got ({mu}, {lambda})"
        )));
    }
    Ok(inverse_gaussian_unchecked(mu, lambda, rng))
}

fn inverse_gaussian_unchecked<R: Rng + ?Sized>(mu: f64, lambda: f64, rng: &mut R) -> f64 {
    let nu = standard_normal(rng);
    let y = nu * nu;
    let my = mu * y;
    // Smaller root, written without the cancellation in mu + mu^2 y/(2λ) - ...
    let x = mu - 2.0 * mu * my / (my + (my * my + 4.0 * mu * lambda * y).sqrt());
    let x = if x > 0.0 { x } else { f64::MIN_POSITIVE };
    if uniform(rng) <= mu / (mu + x) {
        x
    } else {
        mu * mu / x
    }
}

/// `GIG(1/2, a, b)` through its reciprocal: `1/X ~ IN(sqrt(a/b), a)`.
/// With `b = 0` it is `Gamma(1/2, rate a/2)`.
pub fn sample_gig_half<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || !(b >= 0.0 && b.is_finite()) {
        return Err(Error::Parameter(format!(
            "GIG(1/2, a, b) needs a > 0, b >= 0, got ({a}, {b})"
        )));
    }
    if b == 0.0 {
        return gamma(0.5, 0.5 * a, rng);
    }
    let mu = (a / b).sqrt();
    if !mu.is_finite() {
        return gamma(0.5, 0.5 * a, rng);
    }
    Ok(1.0 / inverse_gaussian_unchecked(mu, a, rng))
}

/// General `GIG(p, a, b)` draw.
///
/// Uses the ratio-of-uniforms variants (with and without mode shift) and the
/// non-T-concave envelope of Hörmann and Leydold, selected by `(|p|, sqrt(ab))`.
pub fn sample_gig<R: Rng + ?Sized>(p: f64, a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !p.is_finite() || !(a >= 0.0 && a.is_finite()) || !(b >= 0.0 && b.is_finite()) {
        return Err(Error::Parameter(format!("GIG parameters ({p}, {a}, {b}) invalid")));
    }
    if b == 0.0 {
        if p > 0.0 && a > 0.0 {
            return gamma(p, 0.5 * a, rng);
        }
        return Err(Error::Parameter(format!("GIG({p}, {a}, 0) is improper")));
    }
    if a == 0.0 {
        if p < 0.0 {
            return Ok(1.0 / gamma(-p, 0.5 * b, rng)?);
        }
        return Err(Error::Parameter(format!("GIG({p}, 0, {b}) is improper")));
    }
    let omega = (a * b).sqrt();
    let scale = (b / a).sqrt();
    let lam = p.abs();
    if omega < 1e-10 {
        // Effectively a (inverse) gamma; the envelopes lose precision here.
        if p > 0.0 {
            return gamma(p, 0.5 * a, rng);
        } else if p < 0.0 {
            return Ok(1.0 / gamma(-p, 0.5 * b, rng)?);
        }
    }
    let y = if lam > 2.0 || omega > 3.0 {
        gig_rou_shift(lam, omega, rng)
    } else if lam >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        gig_rou_noshift(lam, omega, rng)
    } else {
        gig_concave(lam, omega, rng)
    };
    Ok(if p < 0.0 { scale / y } else { scale * y })
}

fn gig_mode(lam: f64, omega: f64) -> f64 {
    if lam >= 1.0 {
        (((lam - 1.0) * (lam - 1.0) + omega * omega).sqrt() + (lam - 1.0)) / omega
    } else {
        omega / (((1.0 - lam) * (1.0 - lam) + omega * omega).sqrt() + (1.0 - lam))
    }
}

fn gig_rou_noshift<R: Rng + ?Sized>(lam: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lam - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lam, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lam + 1.0) + ((lam + 1.0) * (lam + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lam + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * uniform(rng);
        let v = uniform(rng);
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_rou_shift<R: Rng + ?Sized>(lam: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lam - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lam, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    // Roots of the cubic bounding the shifted region.
    let a = -(2.0 * (lam + 1.0) / omega + xm);
    let b = 2.0 * (lam - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).clamp(-1.0, 1.0).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + uniform(rng) * (uplus - uminus);
        let v = uniform(rng);
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Envelope for `lam < 1` and small `omega`, where the density is not T-concave.
fn gig_concave<R: Rng + ?Sized>(lam: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lam, omega);
    let x0 = omega / (1.0 - lam);
    let k0 = ((lam - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lam - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lam == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lam * ((2.0 / omega).powf(lam) - x0.powf(lam))
        };
        k2 = (2.0 / omega).powf(lam - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * uniform(rng);
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lam == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lam) + lam / k1 * v).powf(1.0 / lam);
                    hx = k1 * x.powf(lam - 1.0);
                }
            } else {
                v -= a1;
                let lo = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * lo).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = uniform(rng) * hx;
        if u.ln() <= (lam - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// Truncation point splitting the two proposal pieces of the `J*(1, z)` sampler.
const PG_TRUNC: f64 = 0.64;

/// Exact `PG(1, c)` draw by the alternating-series method on the
/// tilted Jacobi density. Symmetric in `c`.
pub fn sample_polya_gamma_1<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<f64> {
    if !c.is_finite() {
        return Err(Error::Parameter(format!("Polya-Gamma tilt must be finite, got {c}")));
    }
    Ok(0.25 * sample_jstar(0.5 * c.abs(), rng))
}

/// Draw from `J*(1, z)`; `PG(1, 2z) = J*(1, z) / 4`.
fn sample_jstar<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = PG_TRUNC;
    let k = 0.5 * z * z + PI * PI / 8.0;
    let p = PI / (2.0 * k) * (-k * t).exp();
    // 2 e^{-z} P(IG(1/z, 1) < t), evaluated in log space for large z.
    let sq = t.sqrt();
    let b = (t * z - 1.0) / sq;
    let a = (t * z + 1.0) / sq;
    let q = 2.0 * ((-z + ln_norm_cdf(b)).exp() + (z + ln_norm_cdf(-a)).exp());
    let p_right = p / (p + q);
    loop {
        let x = if uniform(rng) < p_right {
            let e: f64 = Exp1.sample(rng);
            t + e / k
        } else {
            truncated_inverse_gaussian(z, t, rng)
        };
        let mut s = jacobi_coef(0, x, t);
        let y = uniform(rng) * s;
        let mut n = 0u32;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= jacobi_coef(n, x, t);
                if y <= s {
                    return x;
                }
            } else {
                s += jacobi_coef(n, x, t);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Piecewise coefficient `a_n(x)` of the Jacobi series.
fn jacobi_coef(n: u32, x: f64, t: f64) -> f64 {
    let m = n as f64 + 0.5;
    if x > t {
        PI * m * (-0.5 * m * m * PI * PI * x).exp()
    } else {
        PI * m * (2.0 / (PI * x)).powf(1.5) * (-2.0 * m * m / x).exp()
    }
}

/// `IG(1/z, 1)` truncated to `(0, t)`; `z = 0` is the Lévy limit.
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, t: f64, rng: &mut R) -> f64 {
    let mu = if z > 0.0 { 1.0 / z } else { f64::INFINITY };
    if mu > t {
        loop {
            let mut e1: f64;
            loop {
                e1 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / t {
                    break;
                }
            }
            let x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            if uniform(rng) <= (-0.5 * z * z * x).exp() {
                return x;
            }
        }
    } else {
        loop {
            let x = inverse_gaussian_unchecked(mu, 1.0, rng);
            if x < t {
                return x;
            }
        }
    }
}

/// Dirichlet draw via normalized gammas.
pub fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::Parameter(format!(
            "Dirichlet needs positive alphas, got {alphas:?}"
        )));
    }
    if alphas.len() == 1 {
        return Ok(vec![1.0]);
    }
    let mut g: Vec<f64> = alphas.iter().map(|&a| gamma(a, 1.0, rng)).collect::<Result<_>>()?;
    let total: f64 = g.iter().sum();
    if total > 0.0 {
        g.iter_mut().for_each(|v| *v /= total);
    } else {
        let r = g.len() as f64;
        g.iter_mut().for_each(|v| *v = 1.0 / r);
    }
    Ok(g)
}
