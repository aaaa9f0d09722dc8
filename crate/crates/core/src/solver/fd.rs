use std::f64::consts::PI;

use serde::Serialize;

use super::{caputo_of_power, march, offset_violations, Memory, Operator};
use crate::complementary::build_complementary;
use crate::error::{Error, Result};
use crate::gronwall::{gronwall_bound, GronwallForm, GronwallProblem};
use crate::kernels::{verify_assumptions, KernelTable};
use crate::mesh::TimeMesh;
use crate::specialfn::{mittag_leffler, MlConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FdSource {
    /// `psi = 0`, `u0 = a sin(pi x / L)`.
    Zero,
    /// Manufactured `u = (a + t^sigma) sin(pi x / L)`.
    Manufactured { sigma: f64 },
    /// Bounded source `amplitude cos(2 pi t) 4 x (L - x) / L^2`, `u0 = a sin(pi x / L)`.
    Oscillating { amplitude: f64 },
}

/// `D^alpha u - u_xx = kappa u + psi` on `(0, L)` with `u = 0` at both ends,
/// discretised by the 3-point stencil on `m` interior points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdProblem {
    pub alpha: f64,
    pub length: f64,
    pub m: usize,
    pub kappa: f64,
    /// Amplitude `a` of the initial profile `a sin(pi x / L)`.
    pub u0_amplitude: f64,
    pub source: FdSource,
}

impl FdProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.m < 1 {
            return Err(Error::Invalid("need at least one interior grid point".into()));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::Invalid(format!("domain length must be positive, got {}", self.length)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::Invalid(format!("kappa must be nonnegative, got {}", self.kappa)));
        }
        if !self.u0_amplitude.is_finite() {
            return Err(Error::NonFinite { what: "u0 amplitude", value: self.u0_amplitude });
        }
        match self.source {
            FdSource::Manufactured { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::Domain(format!("sigma must be positive, got {sigma}")))
            }
            FdSource::Oscillating { amplitude } if !amplitude.is_finite() => {
                Err(Error::NonFinite { what: "source amplitude", value: amplitude })
            }
            _ => Ok(()),
        }
    }

    pub fn h(&self) -> f64 {
        self.length / (self.m + 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.m).map(|i| i as f64 * h).collect()
    }

    fn mode(&self, x: f64) -> f64 {
        (PI * x / self.length).sin()
    }

    fn eigenvalue(&self) -> f64 {
        (PI / self.length).powi(2)
    }

    /// Time factor of the exact solution, when one is known.
    fn exact_amplitude(&self, t: f64) -> Result<Option<f64>> {
        let a = self.u0_amplitude;
        match self.source {
            FdSource::Zero => {
                let z = -(self.eigenvalue() - self.kappa) * t.powf(self.alpha);
                Ok(Some(a * mittag_leffler(self.alpha, z, &MlConfig::default())?))
            }
            FdSource::Manufactured { sigma } => Ok(Some(a + t.powf(sigma))),
            FdSource::Oscillating { .. } => Ok(None),
        }
    }

    fn source_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self.source {
            FdSource::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            FdSource::Manufactured { sigma } => {
                let amp = caputo_of_power(self.alpha, sigma, t)?
                    + (self.eigenvalue() - self.kappa) * (self.u0_amplitude + t.powf(sigma));
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = amp * self.mode(xi);
                }
            }
            FdSource::Oscillating { amplitude } => {
                let l = self.length;
                let c = amplitude * (2.0 * PI * t).cos() * 4.0 / (l * l);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = c * xi * (l - xi);
                }
            }
        }
        Ok(())
    }
}

struct Laplacian1d {
    m: usize,
    h: f64,
}

impl Operator for Laplacian1d {
    fn dim(&self) -> usize {
        self.m
    }

    fn apply_shifted(&self, kappa: f64, u: &[f64], out: &mut [f64]) {
        let r = 1.0 / (self.h * self.h);
        for i in 0..self.m {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < self.m { u[i + 1] } else { 0.0 };
            out[i] = r * (2.0 * u[i] - left - right) - kappa * u[i];
        }
    }

    fn solve_shifted(&self, a: f64, c: f64, kappa: f64, rhs: &mut [f64], n: usize) -> Result<()> {
        let r = 1.0 / (self.h * self.h);
        let diag = a + c * (2.0 * r - kappa);
        let off = -c * r;
        thomas(diag, off, rhs).ok_or(Error::SingularSystem { n })
    }
}

/// Solve the symmetric Toeplitz tridiagonal system `(off, diag, off) x = rhs` in place.
fn thomas(diag: f64, off: f64, rhs: &mut [f64]) -> Option<()> {
    let m = rhs.len();
    let scale = diag.abs() + 2.0 * off.abs();
    let mut sup = vec![0.0; m];
    let mut pivot = diag;
    for i in 0..m {
        if i > 0 {
            pivot = diag - off * sup[i - 1];
            rhs[i] -= off * rhs[i - 1];
        }
        if !(pivot.abs() > 1e-14 * scale) || !pivot.is_finite() {
            return None;
        }
        sup[i] = off / pivot;
        rhs[i] /= pivot;
    }
    for i in (0..m.saturating_sub(1)).rev() {
        rhs[i] -= sup[i] * rhs[i + 1];
    }
    Some(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdSolution {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub h: f64,
    pub theta: f64,
    /// `u^0..=u^N` on the interior grid.
    pub states: Vec<Vec<f64>>,
    /// Discrete L2 norm with weight `h`.
    pub l2_norm: Vec<f64>,
    pub max_norm: Vec<f64>,
    /// `||psi(t_{n-theta})||` for `n = 1..=N`, stored at `n - 1`.
    pub psi_norm: Vec<f64>,
    pub l2_error: Option<Vec<f64>>,
    pub max_error: Option<Vec<f64>>,
    pub history_values: usize,
}

impl FdSolution {
    pub fn l2(&self, v: &[f64]) -> f64 {
        (self.h * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    /// CSV with columns `n,t_n,l2_norm,max_norm` and, when an exact solution
    /// is known, `l2_error,max_error`.
    pub fn to_csv(&self) -> String {
        let errors = self.l2_error.as_ref().zip(self.max_error.as_ref());
        let mut s = String::from("n,t_n,l2_norm,max_norm");
        if errors.is_some() {
            s.push_str(",l2_error,max_error");
        }
        s.push('\n');
        for n in 0..self.t.len() {
            s.push_str(&format!("{n},{:e},{:e},{:e}", self.t[n], self.l2_norm[n], self.max_norm[n]));
            if let Some((l2, mx)) = errors {
                s.push_str(&format!(",{:e},{:e}", l2[n], mx[n]));
            }
            s.push('\n');
        }
        s
    }
}

pub fn solve_fd1d(problem: &FdProblem, mesh: &TimeMesh, memory: Memory<'_>) -> Result<FdSolution> {
    problem.validate()?;
    if (memory.alpha() - problem.alpha).abs() > 1e-15 {
        return Err(Error::Invalid(format!(
            "kernel built for alpha = {}, problem has alpha = {}",
            memory.alpha(),
            problem.alpha
        )));
    }
    let h = problem.h();
    let x = problem.grid();
    let op = Laplacian1d { m: problem.m, h };
    let u0: Vec<f64> = x.iter().map(|&xi| problem.u0_amplitude * problem.mode(xi)).collect();
    let (states, history_values) =
        march(&op, memory, mesh, problem.kappa, &u0, |_, t, out| problem.source_into(t, &x, out))?;

    let theta = memory.theta();
    let l2 = |v: &[f64]| (h * v.iter().map(|a| a * a).sum::<f64>()).sqrt();
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut psi_norm = Vec::with_capacity(mesh.len());
    let mut buf = vec![0.0; problem.m];
    for n in 1..=mesh.len() {
        problem.source_into(mesh.t_offset(n, theta), &x, &mut buf)?;
        psi_norm.push(l2(&buf));
    }
    let t = mesh.nodes().to_vec();
    let (mut l2_error, mut max_error) = (Vec::new(), Vec::new());
    let mut known = true;
    for (tn, u) in t.iter().zip(&states) {
        match problem.exact_amplitude(*tn)? {
            Some(a) => {
                let e: Vec<f64> = x.iter().zip(u).map(|(&xi, ui)| ui - a * problem.mode(xi)).collect();
                l2_error.push(l2(&e));
                max_error.push(sup(&e));
            }
            None => known = false,
        }
    }
    Ok(FdSolution {
        l2_norm: states.iter().map(|u| l2(u)).collect(),
        max_norm: states.iter().map(|u| sup(u)).collect(),
        t,
        x,
        h,
        theta,
        states,
        psi_norm,
        l2_error: known.then_some(l2_error),
        max_error: known.then_some(max_error),
        history_values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Rows with `theta > theta^(n)`; the energy argument needs none.
    pub offset_violations: Vec<usize>,
    /// `max_n (lhs_n - rhs_n) / scale_n` for the energy inequality
    /// `sum_k A_{n-k} d(||u^k||^2) <= 2 kappa ||u^{n-theta}||^2 + 2 ||u^{n-theta}|| ||psi_n||`.
    pub energy_worst: f64,
    pub energy_holds: bool,
    pub pi_a: f64,
    pub rho: f64,
    pub kappa: f64,
    /// `2 E_alpha(4 max(1,rho) pi_A kappa t_n^alpha) (||u0|| + 2 max_k sum_j P^(k)_{k-j} ||psi_j||)`.
    pub bound: Vec<f64>,
    pub max_ratio: f64,
    pub worst_n: usize,
    pub envelope_holds: bool,
}

impl StabilityReport {
    pub const ENERGY_SLACK: f64 = 1e-9;

    pub fn offset_ok(&self) -> bool {
        self.offset_violations.is_empty()
    }

    /// A breach is only reported when the offset condition holds; otherwise
    /// the run is flagged through `offset_ok`.
    pub fn breached(&self) -> bool {
        self.offset_ok() && !(self.energy_holds && self.envelope_holds)
    }
}

/// Check a finished run against the energy inequality and the stability
/// envelope. `pi_a = None` uses the kernel's constant or, failing that, the
/// audited estimate.
pub fn check_stability(
    sol: &FdSolution,
    table: &KernelTable,
    mesh: &TimeMesh,
    kappa: f64,
    pi_a: Option<f64>,
) -> Result<StabilityReport> {
    let n_rows = mesh.len();
    if table.len() != n_rows || sol.states.len() != n_rows + 1 {
        return Err(Error::LengthMismatch { expected: n_rows, got: table.len() });
    }
    let pi_a = match pi_a.or(table.pi_a()) {
        Some(p) => p,
        None => verify_assumptions(table, mesh, 1.0)?.a2_pi_estimate,
    };
    let theta = table.theta();
    let sq: Vec<f64> = sol.l2_norm.iter().map(|v| v * v).collect();
    let mut energy_worst = f64::NEG_INFINITY;
    let mut mix = vec![0.0; sol.x.len()];
    for n in 1..=n_rows {
        let row = table.row(n);
        let mut lhs = 0.0;
        let mut mag = 0.0;
        for k in 1..=n {
            let term = row[n - k] * (sq[k] - sq[k - 1]);
            lhs += term;
            mag += term.abs();
        }
        for (m, (a, b)) in mix.iter_mut().zip(sol.states[n].iter().zip(&sol.states[n - 1])) {
            *m = (1.0 - theta) * a + theta * b;
        }
        let off = sol.l2(&mix);
        let rhs = 2.0 * kappa * off * off + 2.0 * off * sol.psi_norm[n - 1];
        let scale = mag.max(rhs.abs()).max(f64::MIN_POSITIVE);
        energy_worst = energy_worst.max((lhs - rhs) / scale);
    }

    let ct = build_complementary(table)?;
    let big_lambda = 2.0 * kappa;
    let mut lambdas = vec![0.0; n_rows];
    lambdas[0] = big_lambda;
    let g: Vec<f64> = sol.psi_norm.iter().map(|p| 2.0 * p).collect();
    let problem = GronwallProblem::new(lambdas, g, sol.l2_norm[0], big_lambda, theta, GronwallForm::Quadratic)?;
    let rho = mesh.max_ratio();
    let cert = gronwall_bound(&problem, &ct, mesh, table.alpha(), pi_a, rho)?;
    let mut max_ratio = 0.0f64;
    let mut worst_n = 0;
    for n in 1..=n_rows {
        let r = sol.l2_norm[n] / cert.bound_per_step[n - 1];
        if r > max_ratio {
            max_ratio = r;
            worst_n = n;
        }
    }
    Ok(StabilityReport {
        offset_violations: offset_violations(table),
        energy_worst,
        energy_holds: energy_worst <= StabilityReport::ENERGY_SLACK,
        pi_a,
        rho,
        kappa,
        bound: cert.bound_per_step,
        max_ratio,
        worst_n,
        envelope_holds: max_ratio <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{alikhanov_kernel, l1_kernel};
    use crate::solver::estimate_order;

    fn manufactured(m: usize, sigma: f64, alpha: f64) -> FdProblem {
        FdProblem { alpha, length: 1.0, m, kappa: 0.0, u0_amplitude: 1.0, source: FdSource::Manufactured { sigma } }
    }

    #[test]
    fn thomas_against_dense() {
        let (d, o) = (3.0, -1.2);
        let b = [1.0, -2.0, 0.5, 4.0, 0.0];
        let mut x = b;
        thomas(d, o, &mut x).unwrap();
        for i in 0..5 {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i < 4 { x[i + 1] } else { 0.0 };
            assert!((o * l + d * x[i] + o * r - b[i]).abs() < 1e-14);
        }
        let mut y = [1.0];
        assert!(thomas(0.0, 1.0, &mut y).is_none());
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let mesh = TimeMesh::graded(16, 2.0, 1.0).unwrap();
        let table = l1_kernel(&mesh, 0.5).unwrap();
        let p = FdProblem { alpha: 0.5, length: 1.0, m: 9, kappa: 1.0, u0_amplitude: 0.0, source: FdSource::Zero };
        let sol = solve_fd1d(&p, &mesh, Memory::Direct(&table)).unwrap();
        assert!(sol.states.iter().flatten().all(|&u| u == 0.0));
    }

    #[test]
    fn spatial_order_two() {
        // the L1 formula is exact for solutions linear in t
        let mesh = TimeMesh::uniform(32, 1.0).unwrap();
        let table = l1_kernel(&mesh, 0.5).unwrap();
        let errs: Vec<f64> = [8, 17, 35, 71]
            .iter()
            .map(|&m| {
                let sol = solve_fd1d(&manufactured(m, 1.0, 0.5), &mesh, Memory::Direct(&table)).unwrap();
                *sol.max_error.unwrap().last().unwrap()
            })
            .collect();
        let orders = estimate_order(&errs).unwrap();
        assert!((orders[2] - 2.0).abs() < 0.05, "{orders:?}");
    }

    #[test]
    fn envelope_holds_for_bounded_source() {
        for alpha in [0.5, 0.7] {
            let mesh = TimeMesh::uniform(128, 1.0).unwrap();
            for table in [l1_kernel(&mesh, alpha).unwrap(), alikhanov_kernel(&mesh, alpha).unwrap()] {
                let p = FdProblem {
                    alpha,
                    length: 1.0,
                    m: 31,
                    kappa: 1.0,
                    u0_amplitude: 1.0,
                    source: FdSource::Oscillating { amplitude: 3.0 },
                };
                let sol = solve_fd1d(&p, &mesh, Memory::Direct(&table)).unwrap();
                assert!(sol.l2_error.is_none());
                let rep = check_stability(&sol, &table, &mesh, 1.0, None).unwrap();
                assert!(rep.offset_ok());
                assert!(rep.energy_holds, "{}", rep.energy_worst);
                assert!(rep.envelope_holds, "{}", rep.max_ratio);
                assert!(!rep.breached());
            }
        }
    }

    #[test]
    fn csv_has_error_columns_only_with_exact_solution() {
        let mesh = TimeMesh::uniform(4, 1.0).unwrap();
        let table = l1_kernel(&mesh, 0.5).unwrap();
        let sol = solve_fd1d(&manufactured(5, 2.0, 0.5), &mesh, Memory::Direct(&table)).unwrap();
        assert!(sol.to_csv().starts_with("n,t_n,l2_norm,max_norm,l2_error,max_error\n"));
        let p = FdProblem { source: FdSource::Oscillating { amplitude: 1.0 }, ..manufactured(5, 2.0, 0.5) };
        let sol = solve_fd1d(&p, &mesh, Memory::Direct(&table)).unwrap();
        assert!(sol.to_csv().starts_with("n,t_n,l2_norm,max_norm\n0,"));
    }
}
