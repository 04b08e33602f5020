//! Standard normal and chi-square distribution functions.
//!
//! CDFs come from the complementary error function and the regularized
//! incomplete gamma function (power series below `a + 1`, Lentz continued
//! fraction above). Quantiles start from a closed-form approximation and are
//! polished with safeguarded Newton/Halley steps.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    StdNormal,
    ChiSquare(u32),
}

impl Distribution {
    fn validate(self) -> Result<()> {
        match self {
            Distribution::ChiSquare(0) => Err(Error::Domain("chi-square needs df >= 1".into())),
            _ => Ok(()),
        }
    }
}

pub fn dist_cdf(d: Distribution, x: f64) -> Result<f64> {
    d.validate()?;
    Ok(match d {
        Distribution::StdNormal => normal_cdf(x),
        Distribution::ChiSquare(k) => chi_square_cdf(k, x),
    })
}

/// Upper tail `1 - F(x)`, evaluated without cancellation.
pub fn dist_sf(d: Distribution, x: f64) -> Result<f64> {
    d.validate()?;
    Ok(match d {
        Distribution::StdNormal => normal_cdf(-x),
        Distribution::ChiSquare(k) => chi_square_sf(k, x),
    })
}

pub fn dist_quantile(d: Distribution, p: f64) -> Result<f64> {
    d.validate()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} is outside (0, 1)")));
    }
    Ok(match d {
        Distribution::StdNormal => normal_quantile(p),
        Distribution::ChiSquare(k) => chi_square_quantile(k, p),
    })
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if p > 0.5 {
        // 1 - p is exact for p >= 0.5
        return -normal_quantile(1.0 - p);
    }
    let mut x = acklam(p);
    for _ in 0..3 {
        let e = normal_cdf(x) - p;
        let u = e / normal_pdf(x);
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Acklam's rational approximation to the lower half of the normal quantile
/// (relative error about 1e-9 before refinement).
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Regularized incomplete gamma functions `(P(a, x), Q(a, x))`.
fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;
    const MAX_ITER: usize = 10_000;
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefactor = -x + a * x.ln() - libm::lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

fn chi_square_cdf(k: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_pq(0.5 * k as f64, 0.5 * x).0
}

fn chi_square_sf(k: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_pq(0.5 * k as f64, 0.5 * x).1
}

fn chi_square_pdf(k: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = 0.5 * k as f64;
    ((a - 1.0) * x.ln() - 0.5 * x - a * LN_2 - libm::lgamma(a)).exp()
}

fn chi_square_quantile(k: u32, p: f64) -> f64 {
    let kf = k as f64;
    // Wilson-Hilferty starting point
    let z = normal_quantile(p);
    let h = 2.0 / (9.0 * kf);
    let mut x = kf * (1.0 - h + z * h.sqrt()).powi(3);
    if !(x > 0.0) {
        x = kf * p.powf(2.0 / kf).max(1e-300);
    }
    // residual in whichever tail keeps precision
    let upper = p > 0.5;
    let target = if upper { 1.0 - p } else { p };
    let resid = |x: f64| {
        if upper {
            target - chi_square_sf(k, x)
        } else {
            chi_square_cdf(k, x) - target
        }
    };

    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..500 {
        let r = resid(x);
        if r == 0.0 {
            return x;
        }
        if r > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let pdf = chi_square_pdf(k, x);
        let mut next = if pdf > 0.0 { x - r / pdf } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * x.max(1.0)
            };
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x {
            return next;
        }
        x = next;
    }
    x
}
