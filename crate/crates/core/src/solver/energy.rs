use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{KernelTable, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub scheme: Scheme,
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    /// `d_n = (2A0 - A1) / (A0 (A0 - A1))`, row `n` at `n - 1`.
    pub d_n: Vec<f64>,
    /// `theta^(n) = (A0 - A1) / (2A0 - A1)`.
    pub theta_n: Vec<f64>,
    /// Smallest normalised margin `(lhs - rhs) / scale` of each inequality:
    /// the `v^n` pairing, the `v^{n-1}` pairing and the offset form.
    pub worst_first: f64,
    pub worst_second: f64,
    pub worst_offset: f64,
    pub violations: usize,
    /// `d_n < 1/A^(n)_0` on every row.
    pub d_n_below_inverse_a0: bool,
    /// `theta^(n) < 1/2` on every row.
    pub theta_n_below_half: bool,
    /// `theta^(n) < 1/2` on every row `n >= 2`.
    pub theta_n_below_half_from_2: bool,
    /// `max_n |d_n theta^(n) A0 - 1|`.
    pub product_residual: f64,
}

impl EnergyReport {
    pub const SLACK: f64 = 1e-12;

    pub fn inequalities_hold(&self) -> bool {
        self.violations == 0
    }
}

/// `(d_n, theta^(n))` for every row, with `A^(1)_1 = 0`.
pub fn energy_coefficients(table: &KernelTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut d = Vec::with_capacity(table.len());
    let mut th = Vec::with_capacity(table.len());
    for (i, row) in table.rows().enumerate() {
        let a0 = row[0];
        let a1 = row.get(1).copied().unwrap_or(0.0);
        if a0 == a1 {
            return Err(Error::DegenerateKernel { n: i + 1 });
        }
        d.push((2.0 * a0 - a1) / (a0 * (a0 - a1)));
        th.push((a0 - a1) / (2.0 * a0 - a1));
    }
    Ok((d, th))
}

fn check_a1(table: &KernelTable) -> Result<()> {
    for (i, row) in table.rows().enumerate() {
        let ok = row.iter().all(|&a| a > 0.0)
            && row.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-13));
        if !ok {
            return Err(Error::Invalid(format!("kernel violates A1 on row {}", i + 1)));
        }
    }
    Ok(())
}

fn draw_sequence(rng: &mut ChaCha8Rng, len: usize, dim: usize, family: usize) -> Vec<Vec<f64>> {
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(len);
    let unit = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    match family {
        0 => (0..len).for_each(|_| v.push(unit(rng))),
        1 => {
            let mut x = unit(rng);
            for _ in 0..len {
                v.push(x.clone());
                for (a, b) in x.iter_mut().zip(unit(rng)) {
                    *a += 0.2 * b;
                }
            }
        }
        2 => {
            let base = unit(rng);
            for _ in 0..len {
                let e = unit(rng);
                v.push(base.iter().zip(e).map(|(b, e)| b + 1e-3 * e).collect());
            }
        }
        _ => {
            let rate: f64 = rng.random_range(0.8..1.25);
            let x = unit(rng);
            for k in 0..len {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                let f = rate.powi(k as i32) * if family == 3 { 1.0 } else { s };
                v.push(x.iter().map(|a| a * f).collect());
            }
        }
    }
    v
}

struct Margins {
    first: f64,
    second: f64,
    offset: f64,
    violations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn trial_margins(table: &KernelTable, d_n: &[f64], th_n: &[f64], v: &[Vec<f64>]) -> Margins {
    let theta = table.theta();
    let n_rows = table.len();
    let incr: Vec<Vec<f64>> = v.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect()).collect();
    // ||v^k||^2 - ||v^{k-1}||^2 as <v^k - v^{k-1}, v^k + v^{k-1}>
    let dsq: Vec<f64> = v
        .windows(2)
        .zip(&incr)
        .map(|(w, d)| d.iter().zip(w[1].iter().zip(&w[0])).map(|(d, (a, b))| d * (a + b)).sum())
        .collect();
    let dim = v[0].len();
    let mut m = Margins { first: f64::INFINITY, second: f64::INFINITY, offset: f64::INFINITY, violations: 0 };
    let mut dv = vec![0.0; dim];
    for n in 1..=n_rows {
        let row = table.row(n);
        let a0 = row[0];
        let a1 = row.get(1).copied().unwrap_or(0.0);
        dv.iter_mut().for_each(|x| *x = 0.0);
        let mut s = 0.0;
        let mut s_mag = 0.0;
        for k in 1..=n {
            let a = row[n - k];
            for (x, d) in dv.iter_mut().zip(&incr[k - 1]) {
                *x += a * d;
            }
            let t = a * dsq[k - 1];
            s += t;
            s_mag += t.abs();
        }
        let dd = dot(&dv, &dv);
        let pn = 2.0 * dot(&dv, &v[n]);
        let pm = 2.0 * dot(&dv, &v[n - 1]);
        let po = (1.0 - theta) * pn + theta * pm;
        let checks = [
            (pn, s + dd / a0, pn.abs() + s_mag + dd / a0),
            (pm, s - dd / (a0 - a1), pm.abs() + s_mag + dd / (a0 - a1)),
            (
                po,
                s + d_n[n - 1] * (th_n[n - 1] - theta) * dd,
                po.abs() + s_mag + (d_n[n - 1] * (th_n[n - 1] - theta) * dd).abs(),
            ),
        ];
        let slots = [&mut m.first, &mut m.second, &mut m.offset];
        for ((lhs, rhs, scale), slot) in checks.into_iter().zip(slots) {
            let margin = (lhs - rhs) / scale.max(f64::MIN_POSITIVE);
            if margin < -EnergyReport::SLACK {
                m.violations += 1;
            }
            *slot = slot.min(margin);
        }
    }
    m
}

/// Randomised check of the two pairing inequalities and of the offset
/// inequality `2<Dv, v^{n-theta}> >= sum_k A_{n-k} d(||v^k||^2) + d_n (theta^(n) - theta) ||Dv||^2`
/// on sequences `v^0..=v^N` in `R^dim`. The kernel must satisfy A1.
pub fn check_energy_inequalities(table: &KernelTable, dim: usize, trials: usize, seed: u64) -> Result<EnergyReport> {
    if dim == 0 || trials == 0 {
        return Err(Error::Invalid("dim and trials must be positive".into()));
    }
    check_a1(table)?;
    let (d_n, theta_n) = energy_coefficients(table)?;
    let margins: Vec<Margins> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let v = draw_sequence(&mut rng, table.len() + 1, dim, trial % 5);
            trial_margins(table, &d_n, &theta_n, &v)
        })
        .collect();
    let fold = |f: fn(&Margins) -> f64| margins.iter().map(f).fold(f64::INFINITY, f64::min);
    let a0: Vec<f64> = table.rows().map(|r| r[0]).collect();
    Ok(EnergyReport {
        scheme: table.scheme(),
        dim,
        trials,
        seed,
        worst_first: fold(|m| m.first),
        worst_second: fold(|m| m.second),
        worst_offset: fold(|m| m.offset),
        violations: margins.iter().map(|m| m.violations).sum(),
        d_n_below_inverse_a0: d_n.iter().zip(&a0).all(|(d, a)| *d < 1.0 / a),
        theta_n_below_half: theta_n.iter().all(|&t| t < 0.5),
        theta_n_below_half_from_2: theta_n.iter().skip(1).all(|&t| t < 0.5),
        product_residual: d_n
            .iter()
            .zip(&theta_n)
            .zip(&a0)
            .map(|((d, t), a)| (d * t * a - 1.0).abs())
            .fold(0.0, f64::max),
        d_n,
        theta_n,
    })
}
