//! Time stepping for the linear reaction-subdiffusion problem
//! `D^alpha u + L u = kappa u + psi` with the offset scheme
//!
//! `[A0 + (1-theta)(L - kappa)] u^n = A0 u^{n-1} - sum_{k<n} A_{n-k} du^k - theta (L - kappa) u^{n-1} + psi(t_{n-theta})`.
//!
//! Two spatial operators are provided: the scalar single-mode reduction and
//! the 3-point Dirichlet Laplacian in 1D.

mod energy;
mod fd;
mod history;
mod single;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelTable;
use crate::mesh::TimeMesh;
use crate::specialfn::{gamma, ln_gamma};

pub use energy::{check_energy_inequalities, energy_coefficients, EnergyReport};
pub use fd::{check_stability, solve_fd1d, FdProblem, FdSolution, FdSource, StabilityReport};
pub use history::Memory;
pub use single::{convergence_study, solve_single_mode, ConvergenceRow, SingleModeForcing, SingleModeProblem, SingleModeSolution};

/// Caputo derivative of `t^sigma`: `Gamma(sigma+1) / Gamma(sigma+1-alpha) t^(sigma-alpha)`.
pub fn caputo_of_power(alpha: f64, sigma: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let coef = if sigma + 1.0 < 170.0 {
        gamma(sigma + 1.0) / gamma(sigma + 1.0 - alpha)
    } else {
        (ln_gamma(sigma + 1.0) - ln_gamma(sigma + 1.0 - alpha)).exp()
    };
    Ok(coef * t.powf(sigma - alpha))
}

/// Observed orders `log2(e_i / e_{i+1})` of a halving study.
pub fn estimate_order(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::Invalid(format!("need at least two errors, got {}", errors.len())));
    }
    if let Some(&e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::NonPositiveError(e));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// `theta^(n) = (A0 - A1) / (2 A0 - A1)`, with `A^(1)_1 = 0` so that `theta^(1) = 1/2`.
pub fn theta_n(table: &KernelTable, n: usize) -> f64 {
    let row = table.row(n);
    let a0 = row[0];
    let a1 = row.get(1).copied().unwrap_or(0.0);
    (a0 - a1) / (2.0 * a0 - a1)
}

/// Rows `n` with `theta > theta^(n)`.
pub fn offset_violations(table: &KernelTable) -> Vec<usize> {
    let theta = table.theta();
    (1..=table.len()).filter(|&n| theta > theta_n(table, n)).collect()
}

/// Spatial operator `L` with the solve of the shifted system.
pub(crate) trait Operator {
    fn dim(&self) -> usize;
    /// `out = (L - kappa) u`.
    fn apply_shifted(&self, kappa: f64, u: &[f64], out: &mut [f64]);
    /// Solve `(a + c (L - kappa)) x = rhs` in place.
    fn solve_shifted(&self, a: f64, c: f64, kappa: f64, rhs: &mut [f64], n: usize) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub(crate) struct ScalarOperator {
    pub lambda: f64,
}

impl Operator for ScalarOperator {
    fn dim(&self) -> usize {
        1
    }

    fn apply_shifted(&self, kappa: f64, u: &[f64], out: &mut [f64]) {
        out[0] = (self.lambda - kappa) * u[0];
    }

    fn solve_shifted(&self, a: f64, c: f64, kappa: f64, rhs: &mut [f64], n: usize) -> Result<()> {
        let shift = c * (self.lambda - kappa);
        let denom = a + shift;
        if !(denom.abs() > 1e-14 * (a.abs() + shift.abs())) || !denom.is_finite() {
            return Err(Error::SingularSystem { n });
        }
        rhs[0] /= denom;
        Ok(())
    }
}

/// Advance `u^0` through every row of the mesh. `psi(n, t, out)` writes the
/// source at `t = t_{n-theta}`. Returns `u^0..=u^N` and the number of
/// history values held at the end.
pub(crate) fn march<O: Operator>(
    op: &O,
    memory: Memory<'_>,
    mesh: &TimeMesh,
    kappa: f64,
    u0: &[f64],
    mut psi: impl FnMut(usize, f64, &mut [f64]) -> Result<()>,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let d = op.dim();
    if u0.len() != d {
        return Err(Error::LengthMismatch { expected: d, got: u0.len() });
    }
    let mut hist = memory.start(mesh, d)?;
    let theta = memory.theta();
    let mut states = Vec::with_capacity(mesh.len() + 1);
    states.push(u0.to_vec());
    let mut rhs = vec![0.0; d];
    let mut work = vec![0.0; d];
    let mut src = vec![0.0; d];
    for n in 1..=mesh.len() {
        let prev = &states[n - 1];
        let a0 = hist.diag(mesh, n);
        hist.accumulate(mesh, n, &mut rhs);
        op.apply_shifted(kappa, prev, &mut work);
        psi(n, mesh.t_offset(n, theta), &mut src)?;
        for i in 0..d {
            rhs[i] = a0 * prev[i] - rhs[i] - theta * work[i] + src[i];
        }
        op.solve_shifted(a0, 1.0 - theta, kappa, &mut rhs, n)?;
        if let Some(x) = rhs.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "solution", value: *x });
        }
        let incr: Vec<f64> = rhs.iter().zip(prev).map(|(a, b)| a - b).collect();
        hist.push(mesh, n, &incr);
        states.push(rhs.clone());
    }
    Ok((states, hist.stored()))
}
