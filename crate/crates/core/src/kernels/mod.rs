//! Discrete convolution kernels `A^(n)_{n-k}` of the discrete Caputo
//! derivative `sum_k A^(n)_{n-k} (v^k - v^{k-1})` evaluated at `t_{n-theta}`.

mod audit;
pub(crate) mod moments;

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;
use crate::soe::SoeApprox;
use moments::{centered_moment, mean_omega, omega_diff};

pub use audit::{verify_assumptions, verify_assumptions_strict, AssumptionReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    L1,
    FastL1,
    Alikhanov,
    Bdf2,
    Bdf2Recombined,
}

impl Scheme {
    pub const ALL: [Scheme; 5] =
        [Scheme::L1, Scheme::FastL1, Scheme::Alikhanov, Scheme::Bdf2, Scheme::Bdf2Recombined];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::L1 => "l1",
            Scheme::FastL1 => "fast-l1",
            Scheme::Alikhanov => "alikhanov",
            Scheme::Bdf2 => "bdf2",
            Scheme::Bdf2Recombined => "bdf2-recombined",
        }
    }

    /// Offset `theta` of the evaluation point `t_{n-theta}`.
    pub fn theta(self, alpha: f64) -> f64 {
        match self {
            Scheme::Alikhanov => alpha / 2.0,
            _ => 0.0,
        }
    }

    /// Known constant in the lower bound A2, if any.
    pub fn pi_a(self) -> Option<f64> {
        match self {
            Scheme::L1 => Some(1.0),
            Scheme::FastL1 => Some(1.5),
            Scheme::Alikhanov => Some(11.0 / 4.0),
            Scheme::Bdf2 | Scheme::Bdf2Recombined => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "l1" => Ok(Scheme::L1),
            "fast-l1" | "fastl1" | "fast" => Ok(Scheme::FastL1),
            "alikhanov" | "l2-1sigma" => Ok(Scheme::Alikhanov),
            "bdf2" => Ok(Scheme::Bdf2),
            "bdf2-recombined" | "bdf2r" => Ok(Scheme::Bdf2Recombined),
            _ => Err(Error::Invalid(format!("unknown scheme {s:?}"))),
        }
    }
}

/// Lower-triangular kernel table; row `n` holds `A^(n)_j` for lags `j = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    scheme: Scheme,
    alpha: f64,
    theta: f64,
    pi_a: Option<f64>,
    n_rows: usize,
    data: Vec<f64>,
}

fn row_start(n: usize) -> usize {
    n * (n - 1) / 2
}

impl KernelTable {
    /// Assemble a table from explicit rows; row `n` (1-based) must have `n` entries.
    pub fn from_rows(
        scheme: Scheme,
        alpha: f64,
        theta: f64,
        pi_a: Option<f64>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if rows.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(row_start(n_rows + 1));
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::LengthMismatch { expected: i + 1, got: row.len() });
            }
            if let Some(&v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "kernel entry", value: v });
            }
            data.extend(row);
        }
        Ok(Self { scheme, alpha, theta, pi_a, n_rows, data })
    }

    /// Number of rows `N`.
    pub fn len(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn pi_a(&self) -> Option<f64> {
        self.pi_a
    }

    /// Row `n` (1-based), indexed by lag.
    pub fn row(&self, n: usize) -> &[f64] {
        assert!(n >= 1 && n <= self.n_rows, "row {n} out of range 1..={}", self.n_rows);
        &self.data[row_start(n)..row_start(n + 1)]
    }

    /// `A^(n)_lag`.
    pub fn get(&self, n: usize, lag: usize) -> f64 {
        self.row(n)[lag]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (1..=self.n_rows).map(move |n| self.row(n))
    }

    /// `sum_{k=1}^n A^(n)_{n-k} incr[k-1]` where `incr[k-1] = v^k - v^{k-1}`.
    pub fn apply(&self, n: usize, incr: &[f64]) -> f64 {
        let row = self.row(n);
        (1..=n).map(|k| row[n - k] * incr[k - 1]).sum()
    }

    /// Total number of stored entries, `N (N + 1) / 2`.
    pub fn entry_count(&self) -> usize {
        self.data.len()
    }

    /// CSV with header `n,lag,value`, one line per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lag,value\n");
        for n in 1..=self.n_rows {
            for (lag, v) in self.row(n).iter().enumerate() {
                writeln!(out, "{n},{lag},{v:e}").unwrap();
            }
        }
        out
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("fractional order must lie in (0, 1), got {alpha}")))
    }
}

fn build_rows<F>(n_rows: usize, row: F) -> Vec<Vec<f64>>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    (1..=n_rows).into_par_iter().map(row).collect()
}

/// `t_a - t_b` for `a >= b`, summed from steps when the gap is short.
fn gap(mesh: &TimeMesh, a: usize, b: usize) -> f64 {
    if a - b <= 8 {
        (b + 1..=a).map(|i| mesh.tau(i)).sum()
    } else {
        mesh.t(a) - mesh.t(b)
    }
}

fn l1_row(mesh: &TimeMesh, alpha: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|lag| {
            let k = n - lag;
            mean_omega(alpha, gap(mesh, n, k), mesh.tau(k))
        })
        .collect()
}

/// Nonuniform L1 kernel: `A^(n)_{n-k} = (1/tau_k) int_{t_{k-1}}^{t_k} omega_{1-alpha}(t_n - s) ds`.
pub fn l1_kernel(mesh: &TimeMesh, alpha: f64) -> Result<KernelTable> {
    check_alpha(alpha)?;
    let rows = build_rows(mesh.len(), |n| l1_row(mesh, alpha, n));
    KernelTable::from_rows(Scheme::L1, alpha, 0.0, Scheme::L1.pi_a(), rows)
}

/// `b`-coefficient of interval `k` with the kernel centred at distance
/// `dist_k = t* - t_k` from its right end:
/// `2 / (tau_k (tau_k + tau_{k+1})) int_{t_{k-1}}^{t_k} (s - t_{k-1/2}) omega_{1-alpha}(t* - s) ds`.
fn b_coef(mesh: &TimeMesh, alpha: f64, k: usize, dist_k: f64) -> f64 {
    let tk = mesh.tau(k);
    let h = 0.5 * tk;
    2.0 * centered_moment(alpha, dist_k + h, h) / (tk * (tk + mesh.tau(k + 1)))
}

fn alikhanov_row(mesh: &TimeMesh, alpha: f64, n: usize) -> Vec<f64> {
    let theta = alpha / 2.0;
    let tn = mesh.tau(n);
    let mut row = vec![0.0; n];
    row[0] = omega_diff(2.0 - alpha, 0.0, (1.0 - theta) * tn) / tn;
    let tail = (1.0 - theta) * tn;
    for k in 1..n {
        let dist = gap(mesh, n - 1, k) + tail;
        let a = mean_omega(alpha, dist, mesh.tau(k));
        let b = b_coef(mesh, alpha, k, dist);
        // interval k carries (a - b) dv^k + rho_k b dv^{k+1}
        row[n - k] += a - b;
        row[n - k - 1] += mesh.rho(k) * b;
    }
    row
}

/// Nonuniform Alikhanov (L2-1 sigma) kernel with `theta = alpha / 2`.
pub fn alikhanov_kernel(mesh: &TimeMesh, alpha: f64) -> Result<KernelTable> {
    check_alpha(alpha)?;
    let scheme = Scheme::Alikhanov;
    let rows = build_rows(mesh.len(), |n| alikhanov_row(mesh, alpha, n));
    KernelTable::from_rows(scheme, alpha, scheme.theta(alpha), scheme.pi_a(), rows)
}

fn bdf2_row(mesh: &TimeMesh, alpha: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return l1_row(mesh, alpha, 1);
    }
    let mut row = vec![0.0; n];
    for k in 1..n {
        let dist = gap(mesh, n, k);
        let a = mean_omega(alpha, dist, mesh.tau(k));
        let b = b_coef(mesh, alpha, k, dist);
        row[n - k] += a - b;
        row[n - k - 1] += mesh.rho(k) * b;
    }
    // Last interval uses the quadratic through t_{n-2}, t_{n-1}, t_n.
    let (tp, tn) = (mesh.tau(n - 1), mesh.tau(n));
    let a0 = mean_omega(alpha, 0.0, tn);
    let b0 = 2.0 * centered_moment(alpha, 0.5 * tn, 0.5 * tn) / (tp * (tp + tn));
    row[0] += a0 + mesh.rho(n - 1) * b0;
    row[1] -= b0;
    row
}

/// Caputo BDF2-like kernel; the first row is the L1 row.
pub fn bdf2_kernel(mesh: &TimeMesh, alpha: f64) -> Result<KernelTable> {
    check_alpha(alpha)?;
    let rows = build_rows(mesh.len(), |n| bdf2_row(mesh, alpha, n));
    KernelTable::from_rows(Scheme::Bdf2, alpha, 0.0, None, rows)
}

/// Variable-weight recombination of a uniform-mesh BDF2 table.
///
/// Returns `Abar^(n)_{n-k} = sum_{j=k}^n A^(n)_{n-j} eta^{j-k}` together with
/// `eta = (1 - A_1 / A_0) / 2`, taken from the last row.
pub fn bdf2_recombine(table: &KernelTable, mesh: &TimeMesh) -> Result<(KernelTable, f64)> {
    if table.scheme() != Scheme::Bdf2 {
        return Err(Error::Invalid(format!("recombination needs a BDF2 table, got {}", table.scheme())));
    }
    if table.len() != mesh.len() {
        return Err(Error::LengthMismatch { expected: mesh.len(), got: table.len() });
    }
    if let Some(k) = mesh.first_nonuniform() {
        return Err(Error::NonUniformMesh { k, ratio: mesh.rho(k) });
    }
    let n_rows = table.len();
    if n_rows < 2 {
        return Err(Error::Invalid("recombination needs at least two steps".into()));
    }
    let last = table.row(n_rows);
    let eta = 0.5 * (1.0 - last[1] / last[0]);
    let rows = build_rows(n_rows, |n| {
        let row = table.row(n);
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        for lag in 0..n {
            acc = row[lag] + eta * acc;
            out[lag] = acc;
        }
        out
    });
    let t = KernelTable::from_rows(Scheme::Bdf2Recombined, table.alpha(), 0.0, None, rows)?;
    Ok((t, eta))
}

/// The fast L1 condition on the SOE tolerance for the horizon `t_final`.
pub fn fast_l1_eps_bound(alpha: f64, t_final: f64) -> f64 {
    let w1 = crate::specialfn::omega_raw(1.0 - alpha, t_final);
    let w2 = crate::specialfn::omega_raw(2.0 - alpha, 1.0);
    (w1 / 3.0).min(alpha * w2)
}

/// Fast L1 kernel: exact L1 diagonal, history lags from the SOE kernel.
pub fn fast_l1_kernel(mesh: &TimeMesh, alpha: f64, soe: &SoeApprox) -> Result<KernelTable> {
    check_alpha(alpha)?;
    check_fast_l1_soe(mesh, alpha, soe)?;
    let rows = build_rows(mesh.len(), |n| {
        let mut row = vec![0.0; n];
        row[0] = mean_omega(alpha, 0.0, mesh.tau(n));
        for k in 1..n {
            row[n - k] = soe.interval_mean(gap(mesh, n, k), mesh.tau(k));
        }
        row
    });
    KernelTable::from_rows(Scheme::FastL1, alpha, 0.0, Scheme::FastL1.pi_a(), rows)
}

pub(crate) fn check_fast_l1_soe(mesh: &TimeMesh, alpha: f64, soe: &SoeApprox) -> Result<()> {
    if (soe.alpha - alpha).abs() > 1e-15 {
        return Err(Error::SoeNotCertified(format!(
            "SOE built for alpha = {}, kernel needs {alpha}",
            soe.alpha
        )));
    }
    let rtol = 1e-12;
    if soe.delta_t > mesh.min_step() * (1.0 + rtol) || soe.t_final < mesh.final_time() * (1.0 - rtol) {
        return Err(Error::SoeNotCertified(format!(
            "SOE window [{}, {}] does not cover steps >= {} up to T = {}",
            soe.delta_t,
            soe.t_final,
            mesh.min_step(),
            mesh.final_time()
        )));
    }
    let bound = fast_l1_eps_bound(alpha, mesh.final_time());
    if soe.eps > bound {
        return Err(Error::SoeNotCertified(format!(
            "SOE tolerance {} exceeds the admissible {bound}",
            soe.eps
        )));
    }
    Ok(())
}

/// Build the kernel of any scheme with default choices: fast L1 uses an SOE
/// with tolerance `soe_eps`, the recombined BDF2 returns only the table.
pub fn build_kernel(scheme: Scheme, mesh: &TimeMesh, alpha: f64, soe_eps: f64) -> Result<KernelTable> {
    match scheme {
        Scheme::L1 => l1_kernel(mesh, alpha),
        Scheme::Alikhanov => alikhanov_kernel(mesh, alpha),
        Scheme::Bdf2 => bdf2_kernel(mesh, alpha),
        Scheme::Bdf2Recombined => Ok(bdf2_recombine(&bdf2_kernel(mesh, alpha)?, mesh)?.0),
        Scheme::FastL1 => {
            check_alpha(alpha)?;
            let soe = crate::soe::build_soe(alpha, soe_eps, mesh.min_step(), mesh.final_time())?;
            fast_l1_kernel(mesh, alpha, &soe)
        }
    }
}
