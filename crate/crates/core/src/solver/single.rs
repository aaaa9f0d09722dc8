use rayon::prelude::*;
use serde::Serialize;

use super::{caputo_of_power, estimate_order, march, Memory, ScalarOperator};
use crate::error::{Error, Result};
use crate::kernels::{build_kernel, Scheme};
use crate::mesh::{MeshSpec, TimeMesh};
use crate::soe::build_soe;
use crate::specialfn::{mittag_leffler, MlConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SingleModeForcing {
    /// `psi = 0`; exact solution `u0 E_alpha(-(lambda - kappa) t^alpha)`.
    Zero,
    /// Manufactured `u = u0 + t^sigma` with its exact source.
    Manufactured { sigma: f64 },
}

/// `D^alpha u + lambda u = kappa u + psi`, `u(0) = u0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleModeProblem {
    pub alpha: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub u0: f64,
    pub forcing: SingleModeForcing,
}

impl SingleModeProblem {
    pub fn relaxation(alpha: f64, lambda: f64, u0: f64) -> Self {
        Self { alpha, lambda, kappa: 0.0, u0, forcing: SingleModeForcing::Zero }
    }

    pub fn manufactured(alpha: f64, lambda: f64, sigma: f64) -> Self {
        Self { alpha, lambda, kappa: 0.0, u0: 1.0, forcing: SingleModeForcing::Manufactured { sigma } }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Invalid(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::Invalid(format!("kappa must be nonnegative, got {}", self.kappa)));
        }
        if !self.u0.is_finite() {
            return Err(Error::NonFinite { what: "u0", value: self.u0 });
        }
        if let SingleModeForcing::Manufactured { sigma } = self.forcing {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    pub fn exact(&self, t: f64) -> Result<f64> {
        match self.forcing {
            SingleModeForcing::Zero => {
                let z = -(self.lambda - self.kappa) * t.powf(self.alpha);
                Ok(self.u0 * mittag_leffler(self.alpha, z, &MlConfig::default())?)
            }
            SingleModeForcing::Manufactured { sigma } => Ok(self.u0 + t.powf(sigma)),
        }
    }

    pub fn source(&self, t: f64) -> Result<f64> {
        match self.forcing {
            SingleModeForcing::Zero => Ok(0.0),
            SingleModeForcing::Manufactured { sigma } => {
                let d = caputo_of_power(self.alpha, sigma, t)?;
                Ok(d + (self.lambda - self.kappa) * (self.u0 + t.powf(sigma)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleModeSolution {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub exact: Vec<f64>,
    pub error: Vec<f64>,
    pub max_error: f64,
    pub final_error: f64,
    /// History values held after the last step.
    pub history_values: usize,
}

impl SingleModeSolution {
    /// CSV with columns `n,t_n,u_n,exact,error`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,t_n,u_n,exact,error\n");
        for n in 0..self.t.len() {
            s.push_str(&format!(
                "{n},{:e},{:e},{:e},{:e}\n",
                self.t[n], self.u[n], self.exact[n], self.error[n]
            ));
        }
        s
    }
}

pub fn solve_single_mode(problem: &SingleModeProblem, mesh: &TimeMesh, memory: Memory<'_>) -> Result<SingleModeSolution> {
    problem.validate()?;
    if (memory.alpha() - problem.alpha).abs() > 1e-15 {
        return Err(Error::Invalid(format!(
            "kernel built for alpha = {}, problem has alpha = {}",
            memory.alpha(),
            problem.alpha
        )));
    }
    let op = ScalarOperator { lambda: problem.lambda };
    let (states, history_values) = march(&op, memory, mesh, problem.kappa, &[problem.u0], |_, t, out| {
        out[0] = problem.source(t)?;
        Ok(())
    })?;
    let t = mesh.nodes().to_vec();
    let u: Vec<f64> = states.into_iter().map(|s| s[0]).collect();
    let exact = t.iter().map(|&t| problem.exact(t)).collect::<Result<Vec<_>>>()?;
    let error: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).collect();
    let max_error = error.iter().copied().fold(0.0, f64::max);
    let final_error = *error.last().unwrap();
    Ok(SingleModeSolution { t, u, exact, error, max_error, final_error, history_values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub max_error: f64,
    pub final_error: f64,
    /// Observed order of `max_error` against the previous row.
    pub order: Option<f64>,
}

/// Halving study over the step counts `ns` of one mesh family. Fast L1 uses
/// the SOE history with tolerance `soe_eps`; other schemes use direct memory.
pub fn convergence_study(
    problem: &SingleModeProblem,
    mesh: &MeshSpec,
    scheme: Scheme,
    ns: &[usize],
    soe_eps: f64,
) -> Result<Vec<ConvergenceRow>> {
    problem.validate()?;
    let errors = ns
        .par_iter()
        .map(|&n| {
            let m = mesh.with_steps(n).build()?;
            let sol = if scheme == Scheme::FastL1 {
                let soe = build_soe(problem.alpha, soe_eps, m.min_step(), m.final_time())?;
                solve_single_mode(problem, &m, Memory::Soe(&soe))?
            } else {
                let table = build_kernel(scheme, &m, problem.alpha, soe_eps)?;
                solve_single_mode(problem, &m, Memory::Direct(&table))?
            };
            Ok((m.len(), sol.max_error, sol.final_error))
        })
        .collect::<Result<Vec<_>>>()?;
    let orders = if errors.len() >= 2 && errors.iter().all(|e| e.1 > 0.0) {
        let e: Vec<f64> = errors.iter().map(|e| e.1).collect();
        Some(estimate_order(&e)?)
    } else {
        None
    };
    Ok(errors
        .iter()
        .enumerate()
        .map(|(i, &(n, max_error, final_error))| ConvergenceRow {
            n,
            max_error,
            final_error,
            order: if i == 0 { None } else { orders.as_ref().map(|o| o[i - 1]) },
        })
        .collect())
}
