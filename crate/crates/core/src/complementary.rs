//! Complementary discrete convolution kernels `P^(n)_j`, defined by
//! `sum_{j=m}^n P^(n)_{n-j} A^(j)_{j-m} = 1` for `1 <= m <= n <= N`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{KernelTable, Scheme};
use crate::mesh::TimeMesh;
use crate::specialfn::{gamma, mittag_leffler_ln, omega_raw, MlConfig};

/// Pair count up to which the identity is checked exhaustively.
pub const FULL_IDENTITY_LIMIT: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplementaryTable {
    scheme: Scheme,
    alpha: f64,
    n_rows: usize,
    data: Vec<f64>,
}

fn row_start(n: usize) -> usize {
    n * (n - 1) / 2
}

impl ComplementaryTable {
    pub fn len(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    /// Scheme of the kernel table this was built from.
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Row `n`, indexed by `j = 0..n` (entry `j` multiplies level `n - j`).
    pub fn row(&self, n: usize) -> &[f64] {
        assert!(n >= 1 && n <= self.n_rows, "row {n} out of range 1..={}", self.n_rows);
        &self.data[row_start(n)..row_start(n + 1)]
    }

    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.row(n)[j]
    }

    /// `sum_{j=1}^n P^(n)_{n-j} g[j-1]`.
    pub fn apply(&self, n: usize, g: &[f64]) -> f64 {
        let row = self.row(n);
        (1..=n).map(|j| row[n - j] * g[j - 1]).sum()
    }

    /// CSV with header `n,lag,value`.
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

/// Run the recursion
/// `P^(n)_0 = 1/A^(n)_0`,
/// `P^(n)_j = (1/A^(n-j)_0) sum_{k<j} (A^(n-k)_{j-k-1} - A^(n-k)_{j-k}) P^(n)_k`.
pub fn build_complementary(table: &KernelTable) -> Result<ComplementaryTable> {
    let n_rows = table.len();
    for n in 1..=n_rows {
        let d = table.get(n, 0);
        if !(d > 0.0) {
            return Err(Error::ZeroDiagonal { n, value: d });
        }
    }
    let rows: Vec<Vec<f64>> = (1..=n_rows)
        .into_par_iter()
        .map(|n| {
            let mut p = vec![0.0; n];
            p[0] = 1.0 / table.get(n, 0);
            for j in 1..n {
                let mut s = 0.0;
                for (k, pk) in p.iter().enumerate().take(j) {
                    let a = table.row(n - k);
                    s += (a[j - k - 1] - a[j - k]) * pk;
                }
                p[j] = s / table.get(n - j, 0);
            }
            p
        })
        .collect();
    let data = rows.into_iter().flatten().collect();
    Ok(ComplementaryTable { scheme: table.scheme(), alpha: table.alpha(), n_rows, data })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub max_residual: f64,
    /// `(m, n)` of the largest residual.
    pub worst: (usize, usize),
    pub pairs_checked: usize,
    pub exhaustive: bool,
}

fn identity_at(ct: &ComplementaryTable, table: &KernelTable, m: usize, n: usize) -> f64 {
    let p = ct.row(n);
    let s: f64 = (m..=n).map(|j| p[n - j] * table.get(j, j - m)).sum();
    (s - 1.0).abs()
}

/// `max |sum_{j=m}^n P^(n)_{n-j} A^(j)_{j-m} - 1|`, over all pairs when
/// `N <= FULL_IDENTITY_LIMIT`, otherwise over `10 N` seeded random pairs.
pub fn identity_residual(ct: &ComplementaryTable, table: &KernelTable, seed: u64) -> Result<IdentityReport> {
    identity_residual_with_limit(ct, table, FULL_IDENTITY_LIMIT, seed)
}

pub fn identity_residual_with_limit(
    ct: &ComplementaryTable,
    table: &KernelTable,
    full_limit: usize,
    seed: u64,
) -> Result<IdentityReport> {
    let n_rows = table.len();
    if ct.len() != n_rows {
        return Err(Error::LengthMismatch { expected: n_rows, got: ct.len() });
    }
    let pairs: Vec<(usize, usize)> = if n_rows <= full_limit {
        (1..=n_rows).flat_map(|n| (1..=n).map(move |m| (m, n))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..10 * n_rows)
            .map(|_| {
                let n = rng.random_range(1..=n_rows);
                (rng.random_range(1..=n), n)
            })
            .collect()
    };
    let (max_residual, worst) = pairs
        .par_iter()
        .map(|&(m, n)| (identity_at(ct, table, m, n), (m, n)))
        .reduce(|| (0.0, (1, 1)), |a, b| if b.0 > a.0 { b } else { a });
    Ok(IdentityReport { max_residual, worst, pairs_checked: pairs.len(), exhaustive: n_rows <= full_limit })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryBoundReport {
    /// `(n, j, P^(n)_j)` with a negative entry below `-1e-10`.
    pub negative: Vec<(usize, usize, f64)>,
    /// `(n, k, P^(n)_{n-k}, bound)` exceeding `pi_A Gamma(2-alpha) tau_k^alpha`.
    pub upper: Vec<(usize, usize, f64, f64)>,
    /// Largest `P^(n)_{n-k} / (pi_A Gamma(2-alpha) tau_k^alpha)`.
    pub max_upper_ratio: f64,
    /// Entries exceeding the coarser `pi_A Gamma(2-alpha) tau_n^alpha`; informational.
    pub tau_n_form_exceedances: usize,
    /// `(n, sum)` where `sum_j P^(n)_{n-j} omega_{1-alpha}(t_j) > pi_A + 1e-10`.
    pub weighted_sum: Vec<(usize, f64)>,
    pub max_weighted_sum: f64,
    pub pi_a: f64,
}

impl EntryBoundReport {
    pub fn holds(&self) -> bool {
        self.negative.is_empty() && self.upper.is_empty() && self.weighted_sum.is_empty()
    }
}

/// Nonnegativity, the per-entry upper bound and the weighted-sum bound of `P`.
pub fn check_entry_bounds(ct: &ComplementaryTable, mesh: &TimeMesh, alpha: f64, pi_a: f64) -> Result<EntryBoundReport> {
    if ct.len() != mesh.len() {
        return Err(Error::LengthMismatch { expected: mesh.len(), got: ct.len() });
    }
    let c = pi_a * gamma(2.0 - alpha);
    let mut r = EntryBoundReport {
        negative: vec![],
        upper: vec![],
        max_upper_ratio: 0.0,
        tau_n_form_exceedances: 0,
        weighted_sum: vec![],
        max_weighted_sum: 0.0,
        pi_a,
    };
    let w: Vec<f64> = (1..=mesh.len()).map(|j| omega_raw(1.0 - alpha, mesh.t(j))).collect();
    for n in 1..=ct.len() {
        let p = ct.row(n);
        let coarse = c * mesh.tau(n).powf(alpha);
        let mut sum = 0.0;
        for k in 1..=n {
            let v = p[n - k];
            if v < -1e-10 {
                r.negative.push((n, n - k, v));
            }
            let bound = c * mesh.tau(k).powf(alpha);
            r.max_upper_ratio = r.max_upper_ratio.max(v / bound);
            if v > bound * (1.0 + 1e-12) {
                r.upper.push((n, k, v, bound));
            }
            if v > coarse * (1.0 + 1e-12) {
                r.tau_n_form_exceedances += 1;
            }
            sum += v * w[k - 1];
        }
        r.max_weighted_sum = r.max_weighted_sum.max(sum);
        if sum > pi_a + 1e-10 {
            r.weighted_sum.push((n, sum));
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    /// Test-function index `k` (power `omega_{1+k alpha}`) or the rate `mu`.
    pub parameter: f64,
    /// `max_n lhs / rhs`; the inequality holds when this is at most one.
    pub max_ratio: f64,
    pub worst_n: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumBoundReport {
    /// `sum_{j<n} P^(n)_{n-j} omega_{1+(k-1)alpha}(t_j) <= max(1,rho) pi_A omega_{1+k alpha}(t_n)`.
    pub partial_sums: Vec<BoundCheck>,
    /// Full sums `j <= n` against `pi_A omega_{1+k alpha}(t_n)`, for `k alpha <= 1`.
    pub full_sums: Vec<BoundCheck>,
    /// `sum_{j<n} P^(n)_{n-j} E_alpha(mu t_j^alpha) <= pi_A max(1,rho) (E_alpha(mu t_n^alpha) - 1)/mu`.
    pub mittag_leffler: Vec<BoundCheck>,
}

impl SumBoundReport {
    pub fn holds(&self) -> bool {
        self.partial_sums.iter().chain(&self.full_sums).chain(&self.mittag_leffler).all(|c| c.holds)
    }
}

pub const SUM_CHECK_POWERS: usize = 5;
pub const SUM_CHECK_RATES: [f64; 3] = [0.5, 2.0, 10.0];

/// Check the sums of `P` against Caputo derivatives of `omega_{1+k alpha}`
/// (`k = 1..=5`) and against `E_alpha(mu t^alpha)` for `mu` in `{0.5, 2, 10}`.
pub fn check_sum_bounds(
    ct: &ComplementaryTable,
    mesh: &TimeMesh,
    alpha: f64,
    pi_a: f64,
    rho: f64,
) -> Result<SumBoundReport> {
    if ct.len() != mesh.len() {
        return Err(Error::LengthMismatch { expected: mesh.len(), got: ct.len() });
    }
    let big = rho.max(1.0);
    let n_rows = ct.len();
    let tol = |lhs: f64, rhs: f64| lhs <= rhs * (1.0 + 1e-12) + 1e-14;
    let mut partial_sums = vec![];
    let mut full_sums = vec![];
    for k in 1..=SUM_CHECK_POWERS {
        let kf = k as f64;
        let deriv: Vec<f64> = (1..=n_rows).map(|j| omega_raw(1.0 + (kf - 1.0) * alpha, mesh.t(j))).collect();
        let mut part = BoundCheck { parameter: kf, max_ratio: 0.0, worst_n: 1, holds: true };
        let mut full = part.clone();
        for n in 1..=n_rows {
            let p = ct.row(n);
            let vn = omega_raw(1.0 + kf * alpha, mesh.t(n));
            let partial: f64 = (1..n).map(|j| p[n - j] * deriv[j - 1]).sum();
            let rhs = big * pi_a * vn;
            if partial / rhs > part.max_ratio {
                part.max_ratio = partial / rhs;
                part.worst_n = n;
            }
            part.holds &= tol(partial, rhs);
            let total = partial + p[0] * deriv[n - 1];
            if total / (pi_a * vn) > full.max_ratio {
                full.max_ratio = total / (pi_a * vn);
                full.worst_n = n;
            }
            full.holds &= tol(total, pi_a * vn);
        }
        partial_sums.push(part);
        if kf * alpha <= 1.0 {
            full_sums.push(full);
        }
    }
    let cfg = MlConfig::default();
    let mut mittag_leffler = vec![];
    for &mu in &SUM_CHECK_RATES {
        // Both sides are divided by E_alpha(mu t_n^alpha) to stay finite.
        let ln_e: Vec<f64> = (1..=n_rows)
            .map(|j| mittag_leffler_ln(alpha, mu * mesh.t(j).powf(alpha), &cfg))
            .collect::<Result<_>>()?;
        let mut check = BoundCheck { parameter: mu, max_ratio: 0.0, worst_n: 1, holds: true };
        for n in 1..=n_rows {
            let p = ct.row(n);
            let lhs: f64 = (1..n).map(|j| p[n - j] * (ln_e[j - 1] - ln_e[n - 1]).exp()).sum();
            let rhs = pi_a * big * (-(-ln_e[n - 1]).exp_m1()) / mu;
            if lhs / rhs > check.max_ratio {
                check.max_ratio = lhs / rhs;
                check.worst_n = n;
            }
            check.holds &= tol(lhs, rhs);
        }
        mittag_leffler.push(check);
    }
    Ok(SumBoundReport { partial_sums, full_sums, mittag_leffler })
}
