//! Sum-of-exponentials approximation of `omega_{1-alpha}(t)` on `[delta_t, T]`.
//!
//! Starting from `omega_{1-alpha}(t) = sin(pi alpha)/pi * int_0^inf exp(-s t) s^(alpha-1) ds`,
//! the integral is split into `[0, a]` (Gauss-Jacobi with weight `s^(alpha-1)`),
//! dyadic pieces `[2^j, 2^(j+1)]` (Gauss-Legendre) and a discarded tail beyond
//! the cutoff. The node count per piece grows until a dense logarithmic grid on
//! `[delta_t, T]` certifies the tolerance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specialfn::{gamma, omega_raw};

/// Certification points per dyadic sub-interval of `[delta_t, T]`.
pub const GRID_PER_OCTAVE: usize = 40;
/// Default cap on the number of exponentials.
pub const DEFAULT_NODE_BUDGET: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoeApprox {
    pub alpha: f64,
    /// Requested uniform tolerance on `[delta_t, t_final]`.
    pub eps: f64,
    /// Largest error seen on the certification grid.
    pub achieved: f64,
    pub delta_t: f64,
    pub t_final: f64,
    /// Exponents `theta_l > 0`.
    pub nodes: Vec<f64>,
    /// Weights `varpi_l > 0`.
    pub weights: Vec<f64>,
}

impl SoeApprox {
    /// Number of exponentials `N_q`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_l varpi_l exp(-theta_l t)` without the window check.
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(th, w)| w * (-th * t).exp()).sum()
    }

    /// Mean of the exponential sum over `[near, near + width]`.
    pub fn interval_mean(&self, near: f64, width: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(th, w)| w * (-th * near).exp() * phi1(th * width))
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("SOE serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SoeApprox =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("bad SOE JSON: {e}")))?;
        if s.nodes.len() != s.weights.len() {
            return Err(Error::LengthMismatch { expected: s.nodes.len(), got: s.weights.len() });
        }
        Ok(s)
    }

    /// Whether `eps <= min(omega_{1-alpha}(T)/3, alpha omega_{2-alpha}(1))`.
    pub fn meets_fast_l1_condition(&self) -> bool {
        self.eps <= crate::kernels::fast_l1_eps_bound(self.alpha, self.t_final)
    }
}

/// `(1 - exp(-x)) / x`, with the removable singularity at zero.
pub(crate) fn phi1(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Certified SOE with the default node budget.
pub fn build_soe(alpha: f64, eps: f64, delta_t: f64, t_final: f64) -> Result<SoeApprox> {
    build_soe_with_budget(alpha, eps, delta_t, t_final, DEFAULT_NODE_BUDGET)
}

pub fn build_soe_with_budget(
    alpha: f64,
    eps: f64,
    delta_t: f64,
    t_final: f64,
    budget: usize,
) -> Result<SoeApprox> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("SOE order must lie in (0, 1), got {alpha}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("SOE tolerance must be positive, got {eps}")));
    }
    if !(delta_t > 0.0 && t_final > delta_t && t_final.is_finite()) {
        return Err(Error::Domain(format!("SOE window needs 0 < delta_t < T, got [{delta_t}, {t_final}]")));
    }
    let grid = certification_grid(delta_t, t_final);
    if eps >= omega_raw(1.0 - alpha, delta_t) {
        let mut s = SoeApprox {
            alpha,
            eps,
            achieved: 0.0,
            delta_t,
            t_final,
            nodes: vec![1.0 / t_final],
            weights: vec![omega_raw(1.0 - alpha, t_final) * std::f64::consts::E],
        };
        s.achieved = residual(&s, &grid);
        if s.achieved <= eps {
            return Ok(s);
        }
    }

    let prefactor = (PI * alpha).sin() / PI;
    let a = 2f64.powf((1.0 / t_final).log2().floor());
    // Tail beyond S: prefactor * S^(alpha-1) exp(-S delta_t) / delta_t <= eps / 4.
    let mut s_max = a;
    while prefactor * s_max.powf(alpha - 1.0) * (-s_max * delta_t).exp() / delta_t > 0.25 * eps {
        s_max *= 2.0;
    }
    let octaves = (s_max / a).log2().round() as usize;

    let mut m = 2usize;
    loop {
        let total = m * (1 + octaves);
        if total > budget {
            return Err(Error::ToleranceUnreachable { eps, budget });
        }
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        // [0, a]: s = a x, weight x^(alpha-1) on [0, 1].
        let (x, w) = gauss_jacobi_unit(m, alpha - 1.0);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(a * xi);
            weights.push(prefactor * a.powf(alpha) * wi);
        }
        let (y, v) = gauss_legendre_unit(m);
        let mut lo = a;
        for _ in 0..octaves {
            for (yi, vi) in y.iter().zip(&v) {
                let s = lo * (1.0 + yi);
                nodes.push(s);
                weights.push(prefactor * lo * vi * s.powf(alpha - 1.0));
            }
            lo *= 2.0;
        }
        let mut approx = SoeApprox { alpha, eps, achieved: 0.0, delta_t, t_final, nodes, weights };
        approx.achieved = residual(&approx, &grid);
        if approx.achieved <= eps {
            return Ok(approx);
        }
        m += 1;
    }
}

/// Logarithmic grid with [`GRID_PER_OCTAVE`] points per factor of two,
/// including both ends.
pub fn certification_grid(delta_t: f64, t_final: f64) -> Vec<f64> {
    let octaves = (t_final / delta_t).log2().ceil().max(1.0);
    let count = (octaves as usize) * GRID_PER_OCTAVE;
    let ratio = (t_final / delta_t).ln() / count as f64;
    let mut g: Vec<f64> = (0..=count).map(|i| delta_t * (ratio * i as f64).exp()).collect();
    g[0] = delta_t;
    g[count] = t_final;
    g
}

/// Largest `|omega_{1-alpha}(t) - SOE(t)|` over the certification grid.
pub fn certification_residual(approx: &SoeApprox) -> f64 {
    residual(approx, &certification_grid(approx.delta_t, approx.t_final))
}

fn residual(approx: &SoeApprox, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&t| (omega_raw(1.0 - approx.alpha, t) - approx.eval_unchecked(t)).abs())
        .fold(0.0, f64::max)
}

/// `sum_l varpi_l exp(-theta_l t)` for `t` inside the certified window.
pub fn soe_eval(approx: &SoeApprox, t: f64) -> Result<f64> {
    let (lo, hi) = (approx.delta_t, approx.t_final);
    if !(t >= lo * (1.0 - 1e-14) && t <= hi * (1.0 + 1e-14)) {
        return Err(Error::OutOfWindow { t, lo, hi });
    }
    Ok(approx.eval_unchecked(t))
}

/// One step of the history recurrence
/// `H_l <- exp(-theta_l tau) H_l + (1 - exp(-theta_l tau)) / (theta_l tau) * u_incr`.
pub fn history_update(approx: &SoeApprox, h_prev: &[f64], u_incr: f64, tau: f64) -> Result<Vec<f64>> {
    let mut h = h_prev.to_vec();
    history_update_in_place(approx, &mut h, u_incr, tau)?;
    Ok(h)
}

pub fn history_update_in_place(approx: &SoeApprox, h: &mut [f64], u_incr: f64, tau: f64) -> Result<()> {
    if h.len() != approx.len() {
        return Err(Error::LengthMismatch { expected: approx.len(), got: h.len() });
    }
    for (hl, th) in h.iter_mut().zip(&approx.nodes) {
        *hl = (-th * tau).exp() * *hl + phi1(th * tau) * u_incr;
    }
    Ok(())
}

/// Golub-Welsch for the Jacobi weight `(1-y)^a (1+y)^b` on `[-1, 1]`.
fn gauss_jacobi(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let n = i as f64;
        let diag = if i == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * n + ab) * (2.0 * n + ab + 2.0))
        };
        jac[(i, i)] = diag;
        if i + 1 < m {
            let k = n + 1.0;
            let s = 2.0 * k + ab;
            let beta = 4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
            jac[(i, i + 1)] = beta.sqrt();
            jac[(i + 1, i)] = beta.sqrt();
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(ab + 2.0);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Nodes and weights on `[0, 1]` for the weight `x^b`.
fn gauss_jacobi_unit(m: usize, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (y, w) = gauss_jacobi(m, 0.0, b);
    let scale = 2f64.powf(-(b + 1.0));
    (y.iter().map(|y| 0.5 * (1.0 + y)).collect(), w.iter().map(|w| w * scale).collect())
}

/// Gauss-Legendre on `[0, 1]`.
fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi_unit(m, 0.0)
}
