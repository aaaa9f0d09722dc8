//! The Riemann-Liouville kernel `omega_beta(t) = t^(beta-1) / Gamma(beta)`
//! and the Mittag-Leffler function `E_alpha(z) = sum_k z^k / Gamma(1 + k alpha)`.
//!
//! `E_alpha` is evaluated by one of three routes:
//!
//! * the power series, summed with Neumaier compensation, whenever its terms
//!   stay of order one (no cancellation to speak of);
//! * for large positive arguments, the exponential asymptote
//!   `E_alpha(z) ~ exp(z^(1/alpha)) / alpha`, whose algebraic correction is
//!   below `exp(-32)` relative;
//! * for negative arguments whose series would cancel catastrophically, the
//!   Laplace-type representation
//!   `E_alpha(-x) = sin(alpha pi)/(alpha pi) * int_0^inf exp(-(x u)^(1/alpha)) / (u^2 + 2 u cos(alpha pi) + 1) du`,
//!   integrated by adaptive Gauss-Kronrod.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

/// `Gamma(x)`.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln |Gamma(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `omega_beta(t) = t^(beta-1) / Gamma(beta)` for `beta > 0`, `t > 0`.
pub fn omega(beta: f64, t: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("omega: beta must be positive, got {beta}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("omega: t must be positive, got {t}")));
    }
    Ok(omega_raw(beta, t))
}

/// Unchecked `omega_beta(t)`; `omega_beta(0) = 0` for `beta > 1`.
pub(crate) fn omega_raw(beta: f64, t: f64) -> f64 {
    if beta == 1.0 {
        return 1.0;
    }
    if t == 0.0 {
        return if beta > 1.0 { 0.0 } else { f64::INFINITY };
    }
    if beta < 170.0 {
        t.powf(beta - 1.0) / gamma(beta)
    } else {
        ((beta - 1.0) * t.ln() - ln_gamma(beta)).exp()
    }
}

/// Accuracy controls for [`mittag_leffler`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlConfig {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-14, max_terms: 2000 }
    }
}

impl MlConfig {
    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || self.max_terms == 0 {
            return Err(Error::Invalid(format!("bad Mittag-Leffler config {self:?}")));
        }
        Ok(())
    }
}

/// Above this value of `z^(1/alpha)` the exponential asymptote is used.
const ASYMPTOTIC_SWITCH: f64 = 32.0;
/// Negative arguments use the series only while every term is below this.
const SERIES_PEAK_LIMIT: f64 = 4.0;

/// `E_alpha(z)` for `alpha in (0, 1]` and real `z`.
///
/// Absolute error is within `cfg.abs_tol` for `z <= 0`; for `z > 0` the
/// result is accurate to a few units of `1e-15` relative and saturates to
/// `+inf` once `E_alpha(z)` exceeds the `f64` range.
pub fn mittag_leffler(alpha: f64, z: f64, cfg: &MlConfig) -> Result<f64> {
    check_alpha(alpha)?;
    cfg.validate()?;
    if z.is_nan() {
        return Err(Error::Domain("Mittag-Leffler argument is NaN".into()));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if alpha == 1.0 {
        return Ok(z.exp());
    }
    if z > 0.0 {
        return Ok(mittag_leffler_ln(alpha, z, cfg)?.exp());
    }
    if z == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if peak_log_term(alpha, -z) <= SERIES_PEAK_LIMIT.ln() {
        series(alpha, z, cfg)
    } else {
        laplace_representation(alpha, -z, cfg)
    }
}

/// `ln E_alpha(z)` for `z >= 0`; stays finite where `E_alpha(z)` overflows.
pub fn mittag_leffler_ln(alpha: f64, z: f64, cfg: &MlConfig) -> Result<f64> {
    check_alpha(alpha)?;
    cfg.validate()?;
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("ln E_alpha needs z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if alpha == 1.0 {
        return Ok(z);
    }
    let x = z.powf(1.0 / alpha);
    if x >= ASYMPTOTIC_SWITCH {
        return Ok(x - alpha.ln());
    }
    Ok(series(alpha, z, cfg)?.ln())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("Mittag-Leffler order must lie in (0, 1], got {alpha}")))
    }
}

/// `ln max_k x^k / Gamma(1 + k alpha)` for `x > 0`.
fn peak_log_term(alpha: f64, x: f64) -> f64 {
    let peak_k = x.powf(1.0 / alpha) / alpha;
    if peak_k > 1e5 {
        return f64::INFINITY;
    }
    let lx = x.ln();
    let mut best: f64 = 0.0;
    let mut k = 1usize;
    loop {
        let l = k as f64 * lx - ln_gamma(1.0 + k as f64 * alpha);
        best = best.max(l);
        // ln-terms are concave in k; stop once clearly past the peak.
        if l < best - 1.0 && k as f64 > peak_k {
            return best;
        }
        k += 1;
    }
}

fn series_term(alpha: f64, z: f64, k: usize) -> f64 {
    let arg = 1.0 + k as f64 * alpha;
    if arg < 170.0 {
        let p = z.abs().powf(k as f64);
        if p.is_finite() {
            let t = p / gamma(arg);
            return if z < 0.0 && k % 2 == 1 { -t } else { t };
        }
    }
    let t = (k as f64 * z.abs().ln() - ln_gamma(arg)).exp();
    if z < 0.0 && k % 2 == 1 {
        -t
    } else {
        t
    }
}

fn series(alpha: f64, z: f64, cfg: &MlConfig) -> Result<f64> {
    // Neumaier-compensated running sum.
    let mut sum = 1.0f64;
    let mut comp = 0.0f64;
    let mut quiet = 0;
    for k in 1..cfg.max_terms {
        let term = series_term(alpha, z, k);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        let total = (sum + comp).abs();
        if term.abs() < cfg.abs_tol * total.max(1.0) && term.abs() < 1e-16 * total {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum + comp);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConvergence { terms: cfg.max_terms })
}

fn laplace_representation(alpha: f64, x: f64, cfg: &MlConfig) -> Result<f64> {
    let (s, c) = (alpha * PI).sin_cos();
    let inv_alpha = 1.0 / alpha;
    let integrand = |u: f64| (-(x * u).powf(inv_alpha)).exp() / (u * u + 2.0 * u * c + 1.0);
    // exp(-745) underflows to zero.
    let upper = 745f64.powf(alpha) / x;
    let mut breaks = vec![0.0, upper];
    for p in [1.0 / x, 1.0, -c] {
        if p > 0.0 && p < upper {
            breaks.push(p);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let prefactor = s / (alpha * PI);
    let r = quad::integrate_pieces(integrand, &breaks, 0.5 * cfg.abs_tol / prefactor, 4e-15, 4000);
    if !r.converged {
        return Err(Error::NonConvergence { terms: r.evaluations });
    }
    Ok(prefactor * r.value)
}
