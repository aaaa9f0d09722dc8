//! Numerical checks of positivity/monotonicity (A1) and of the lower bound
//! against the L1 kernel (A2).

use serde::Serialize;

use super::{l1_row, KernelTable};
use crate::error::{Error, Result};
use crate::mesh::TimeMesh;

/// Relative slack on monotonicity in the tolerant mode.
pub const A1_SLACK: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub a1_holds: bool,
    /// Largest of `-A^(n)_j` and `A^(n)_{j+1} - A^(n)_j` over the table;
    /// zero or negative when every row is positive and monotone.
    pub a1_worst_violation: f64,
    /// `(n, lag)` of the worst A1 entry.
    pub a1_worst_at: (usize, usize),
    /// Smallest `pi_A` for which A2 holds on this table.
    pub a2_pi_estimate: f64,
    /// `(n, k)` attaining `a2_pi_estimate`.
    pub a2_worst_at: (usize, usize),
    pub pi_a_claim: f64,
    pub a2_holds_for: bool,
    pub strict: bool,
}

/// Check A1 with a slack of `A1_SLACK * A^(n)_0` per row, and A2 for `pi_a_claim`.
pub fn verify_assumptions(table: &KernelTable, mesh: &TimeMesh, pi_a_claim: f64) -> Result<AssumptionReport> {
    audit(table, mesh, pi_a_claim, false)
}

/// As [`verify_assumptions`] but A1 must hold exactly: `A_j >= A_{j+1} > 0`.
pub fn verify_assumptions_strict(
    table: &KernelTable,
    mesh: &TimeMesh,
    pi_a_claim: f64,
) -> Result<AssumptionReport> {
    audit(table, mesh, pi_a_claim, true)
}

fn audit(table: &KernelTable, mesh: &TimeMesh, pi_a_claim: f64, strict: bool) -> Result<AssumptionReport> {
    if table.len() != mesh.len() {
        return Err(Error::LengthMismatch { expected: mesh.len(), got: table.len() });
    }
    let alpha = table.alpha();
    let mut a1_holds = true;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = (1, 0);
    let mut pi_est = 0.0f64;
    let mut pi_at = (1, 1);
    for n in 1..=table.len() {
        let row = table.row(n);
        let slack = if strict { 0.0 } else { A1_SLACK * row[0].abs() };
        for j in 0..n {
            let mut v = -row[j];
            let positive = if strict { row[j] > 0.0 } else { row[j] > -slack };
            let mut ok = positive;
            if j + 1 < n {
                let d = row[j + 1] - row[j];
                v = v.max(d);
                ok &= d <= slack;
            }
            a1_holds &= ok;
            if v > worst {
                worst = v;
                worst_at = (n, j);
            }
        }
        for (j, l1) in l1_row(mesh, alpha, n).into_iter().enumerate() {
            let ratio = if row[j] > 0.0 { l1 / row[j] } else { f64::INFINITY };
            if ratio > pi_est {
                pi_est = ratio;
                pi_at = (n, n - j);
            }
        }
    }
    Ok(AssumptionReport {
        a1_holds,
        a1_worst_violation: worst,
        a1_worst_at: worst_at,
        a2_pi_estimate: pi_est,
        a2_worst_at: pi_at,
        pi_a_claim,
        a2_holds_for: pi_est <= pi_a_claim * (1.0 + 1e-12),
        strict,
    })
}
