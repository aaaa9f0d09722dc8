//! Discrete fractional Grönwall bounds and randomized checks against
//! sequences that satisfy their hypotheses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complementary::ComplementaryTable;
use crate::error::{Error, Result};
use crate::kernels::KernelTable;
use crate::mesh::TimeMesh;
use crate::specialfn::{gamma, mittag_leffler_ln, MlConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GronwallForm {
    /// `sum_k A^(n)_{n-k} d(v^k)^2 <= sum_k lambda_{n-k} (v^{k-theta})^2 + v^{n-theta} g^n`
    Quadratic,
    /// `sum_k A^(n)_{n-k} dv^k <= sum_k lambda_{n-k} v^{k-theta} + g^n`
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallProblem {
    /// `lambda_l` for `l = 0..N`.
    pub lambdas: Vec<f64>,
    /// `g^n` for `n = 1..=N`, stored at `n - 1`.
    pub g: Vec<f64>,
    pub v0: f64,
    pub big_lambda: f64,
    pub theta: f64,
    pub form: GronwallForm,
}

impl GronwallProblem {
    pub fn new(
        lambdas: Vec<f64>,
        g: Vec<f64>,
        v0: f64,
        big_lambda: f64,
        theta: f64,
        form: GronwallForm,
    ) -> Result<Self> {
        let p = Self { lambdas, g, v0, big_lambda, theta, form };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.len() != self.g.len() {
            return Err(Error::LengthMismatch { expected: self.g.len(), got: self.lambdas.len() });
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::Invalid(format!("theta must lie in [0, 1), got {}", self.theta)));
        }
        if !(self.v0 >= 0.0) || self.g.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::Invalid("v0 and g must be nonnegative".into()));
        }
        let sum: f64 = self.lambdas.iter().sum();
        if self.big_lambda > 0.0 {
            if self.lambdas.iter().any(|&l| !(l >= 0.0)) {
                return Err(Error::Invalid("lambdas must be nonnegative when Lambda > 0".into()));
            }
            if sum > self.big_lambda * (1.0 + 1e-14) {
                return Err(Error::Invalid(format!("sum of lambdas {sum} exceeds Lambda {}", self.big_lambda)));
            }
        } else if self.lambdas.iter().any(|&l| !(l <= 0.0)) {
            return Err(Error::Invalid("lambdas must be nonpositive when Lambda <= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallCertificate {
    /// `B_n` for `n = 1..=N`.
    pub bound_per_step: Vec<f64>,
    pub step_restriction_ok: bool,
    /// `2 E_alpha(2 max(1,rho) pi_A Lambda t_n^alpha)`, or one when `Lambda <= 0`.
    pub envelope_factor: Vec<f64>,
    /// Envelope times `v0 + pi_A Gamma(1-alpha) max_{j<=n} t_j^alpha g^j`.
    pub weak_bound: Vec<f64>,
    /// `(2 pi_A Gamma(2-alpha) Lambda)^(-1/alpha)`; infinite for `Lambda <= 0`.
    pub step_limit: f64,
}

/// Largest admissible step for a positive `Lambda`.
pub fn step_limit(alpha: f64, pi_a: f64, big_lambda: f64) -> f64 {
    if big_lambda <= 0.0 {
        f64::INFINITY
    } else {
        (2.0 * pi_a * gamma(2.0 - alpha) * big_lambda).powf(-1.0 / alpha)
    }
}

pub fn check_step_restriction(mesh: &TimeMesh, alpha: f64, pi_a: f64, big_lambda: f64) -> bool {
    mesh.max_step() <= step_limit(alpha, pi_a, big_lambda)
}

/// `2 E_alpha(2 max(1,rho) pi_A Lambda t^alpha)`, saturating to `+inf`.
pub fn envelope(alpha: f64, pi_a: f64, rho: f64, big_lambda: f64, t: f64) -> Result<f64> {
    if big_lambda <= 0.0 {
        return Ok(1.0);
    }
    let z = 2.0 * rho.max(1.0) * pi_a * big_lambda * t.powf(alpha);
    Ok(2.0 * mittag_leffler_ln(alpha, z, &MlConfig::default())?.exp())
}

/// The bound `B_n` on every level.
///
/// For `Lambda > 0` this is the envelope times `v0 + max_{k<=n} sum_j P^(k)_{k-j} g^j`.
/// For `Lambda <= 0` the envelope is dropped; the linear form also drops the
/// running maximum and uses `v0 + sum_j P^(n)_{n-j} g^j`.
pub fn gronwall_bound(
    problem: &GronwallProblem,
    ct: &ComplementaryTable,
    mesh: &TimeMesh,
    alpha: f64,
    pi_a: f64,
    rho: f64,
) -> Result<GronwallCertificate> {
    problem.validate()?;
    let n_rows = mesh.len();
    if ct.len() != n_rows || problem.g.len() != n_rows {
        return Err(Error::LengthMismatch { expected: n_rows, got: problem.g.len().min(ct.len()) });
    }
    let limit = step_limit(alpha, pi_a, problem.big_lambda);
    let ok = mesh.max_step() <= limit;
    if !ok {
        return Err(Error::StepRestrictionViolated { max_step: mesh.max_step(), limit });
    }
    let positive = problem.big_lambda > 0.0;
    let c_weak = pi_a * gamma(1.0 - alpha);
    let mut bound = Vec::with_capacity(n_rows);
    let mut env = Vec::with_capacity(n_rows);
    let mut weak = Vec::with_capacity(n_rows);
    let mut running = f64::NEG_INFINITY;
    let mut weak_max = 0.0f64;
    for n in 1..=n_rows {
        let s = ct.apply(n, &problem.g);
        running = running.max(s);
        weak_max = weak_max.max(mesh.t(n).powf(alpha) * problem.g[n - 1]);
        let e = envelope(alpha, pi_a, rho, problem.big_lambda, mesh.t(n))?;
        let core = if !positive && problem.form == GronwallForm::Linear { s } else { running };
        bound.push(e * (problem.v0 + core));
        env.push(e);
        weak.push(e * (problem.v0 + c_weak * weak_max));
    }
    Ok(GronwallCertificate {
        bound_per_step: bound,
        step_restriction_ok: ok,
        envelope_factor: env,
        weak_bound: weak,
        step_limit: limit,
    })
}

/// `max_n |sum_j P^(n)_{n-j} sum_k A^(j)_{j-k} dv^k - (v^n - v^0)|` for `v = v[0..=N]`.
pub fn exchange_identity_residual(table: &KernelTable, ct: &ComplementaryTable, v: &[f64]) -> Result<f64> {
    let n_rows = table.len();
    if v.len() != n_rows + 1 || ct.len() != n_rows {
        return Err(Error::LengthMismatch { expected: n_rows + 1, got: v.len() });
    }
    let dv: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let inner: Vec<f64> = (1..=n_rows).map(|j| table.apply(j, &dv)).collect();
    Ok((1..=n_rows)
        .map(|n| (ct.apply(n, &inner) - (v[n] - v[0])).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallViolation {
    pub trial: usize,
    pub n: usize,
    pub v: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallReport {
    pub form: GronwallForm,
    pub trials: usize,
    pub seed: u64,
    pub big_lambda: f64,
    pub violations: Vec<GronwallViolation>,
    /// `max v^n / B_n` over all trials and levels.
    pub max_ratio: f64,
    /// `max v^n / W_n` against the weaker bound `W_n`.
    pub max_weak_ratio: f64,
    /// Largest exchange-identity residual seen.
    pub max_exchange_residual: f64,
}

impl GronwallReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Parameters shared by all randomized trials.
#[derive(Debug, Clone, Copy)]
pub struct TrialSetup<'a> {
    pub table: &'a KernelTable,
    pub ct: &'a ComplementaryTable,
    pub mesh: &'a TimeMesh,
    pub pi_a: f64,
    pub rho: f64,
    pub big_lambda: f64,
}

pub fn verify_gronwall_quadratic(setup: TrialSetup<'_>, trials: usize, seed: u64) -> Result<GronwallReport> {
    verify_gronwall(setup, GronwallForm::Quadratic, trials, seed)
}

pub fn verify_gronwall_linear(setup: TrialSetup<'_>, trials: usize, seed: u64) -> Result<GronwallReport> {
    verify_gronwall(setup, GronwallForm::Linear, trials, seed)
}

/// Draw `trials` nonnegative sequences `v` and coefficient sequences `lambda`,
/// set `g` to the smallest nonnegative value making the hypothesis hold, and
/// check `v^n <= B_n`.
pub fn verify_gronwall(
    setup: TrialSetup<'_>,
    form: GronwallForm,
    trials: usize,
    seed: u64,
) -> Result<GronwallReport> {
    let TrialSetup { table, mesh, big_lambda, .. } = setup;
    if table.len() != mesh.len() || setup.ct.len() != mesh.len() {
        return Err(Error::LengthMismatch { expected: mesh.len(), got: table.len() });
    }
    let limit = step_limit(table.alpha(), setup.pi_a, big_lambda);
    if mesh.max_step() > limit {
        return Err(Error::StepRestrictionViolated { max_step: mesh.max_step(), limit });
    }
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            run_trial(setup, form, trial, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut report = GronwallReport {
        form,
        trials,
        seed,
        big_lambda,
        violations: vec![],
        max_ratio: 0.0,
        max_weak_ratio: 0.0,
        max_exchange_residual: 0.0,
    };
    for o in outcomes {
        report.violations.extend(o.violations);
        report.max_ratio = report.max_ratio.max(o.max_ratio);
        report.max_weak_ratio = report.max_weak_ratio.max(o.max_weak_ratio);
        report.max_exchange_residual = report.max_exchange_residual.max(o.exchange);
    }
    Ok(report)
}

struct TrialOutcome {
    violations: Vec<GronwallViolation>,
    max_ratio: f64,
    max_weak_ratio: f64,
    exchange: f64,
}

/// Random nonnegative sequence `v^0..=v^N` from one of several families.
fn draw_sequence<R: Rng>(rng: &mut R, mesh: &TimeMesh, family: usize) -> Vec<f64> {
    let n = mesh.len();
    let v0 = rng.random_range(0.0..2.0);
    let mut v = Vec::with_capacity(n + 1);
    v.push(v0);
    match family {
        0 => v.extend((0..n).map(|_| rng.random_range(0.0..2.0))),
        1 => {
            let step: f64 = rng.random_range(0.01..0.5);
            for _ in 0..n {
                let prev: f64 = *v.last().unwrap();
                v.push((prev + rng.random_range(-step..step)).abs());
            }
        }
        2 => {
            let rate = rng.random_range(0.1..5.0);
            v.extend((1..=n).map(|k| v0 * (-rate * mesh.t(k)).exp() + rng.random_range(0.0..0.05)));
        }
        3 => {
            let rate = rng.random_range(0.1..3.0);
            let a = rng.random_range(0.2..1.0);
            v.extend((1..=n).map(|k| v0 + rate * mesh.t(k).powf(a)));
        }
        _ => {
            for _ in 0..n {
                let x = if rng.random_bool(0.1) { rng.random_range(2.0..5.0) } else { v0 };
                v.push(x);
            }
        }
    }
    v
}

fn draw_lambdas<R: Rng>(rng: &mut R, n: usize, big_lambda: f64) -> Vec<f64> {
    let mut l = vec![0.0; n];
    if big_lambda == 0.0 {
        return l;
    }
    // A few nonzero entries, concentrated at small lags.
    let active = rng.random_range(1..=n.min(4));
    for _ in 0..active {
        let i = rng.random_range(0..n.min(8));
        l[i] += rng.random_range(0.0..1.0);
    }
    let total: f64 = l.iter().sum();
    let target = big_lambda.abs() * rng.random_range(0.5..=1.0);
    let sign = big_lambda.signum();
    l.iter_mut().for_each(|x| *x = sign * *x / total * target);
    l
}

fn run_trial<R: Rng>(setup: TrialSetup<'_>, form: GronwallForm, trial: usize, rng: &mut R) -> Result<TrialOutcome> {
    let TrialSetup { table, ct, mesh, pi_a, rho, big_lambda } = setup;
    let alpha = table.alpha();
    let theta = table.theta();
    let n_rows = mesh.len();
    let family = trial % 5;
    for _attempt in 0..16 {
        let v = draw_sequence(rng, mesh, family);
        let lambdas = draw_lambdas(rng, n_rows, big_lambda);
        let vt: Vec<f64> = (1..=n_rows).map(|k| theta * v[k - 1] + (1.0 - theta) * v[k]).collect();
        let incr: Vec<f64> = match form {
            GronwallForm::Quadratic => v.windows(2).map(|w| w[1] * w[1] - w[0] * w[0]).collect(),
            GronwallForm::Linear => v.windows(2).map(|w| w[1] - w[0]).collect(),
        };
        let mut g = Vec::with_capacity(n_rows);
        let mut degenerate = false;
        for n in 1..=n_rows {
            let lhs = table.apply(n, &incr);
            let mem: f64 = match form {
                GronwallForm::Quadratic => (1..=n).map(|k| lambdas[n - k] * vt[k - 1] * vt[k - 1]).sum(),
                GronwallForm::Linear => (1..=n).map(|k| lambdas[n - k] * vt[k - 1]).sum(),
            };
            let num = lhs - mem;
            let gn = match form {
                GronwallForm::Linear => num.max(0.0),
                GronwallForm::Quadratic if vt[n - 1] > 0.0 => (num / vt[n - 1]).max(0.0),
                GronwallForm::Quadratic => {
                    if num > 0.0 {
                        degenerate = true;
                        break;
                    }
                    0.0
                }
            };
            g.push(gn);
        }
        if degenerate {
            continue;
        }
        let problem = GronwallProblem::new(lambdas, g, v[0], big_lambda, theta, form)?;
        let cert = gronwall_bound(&problem, ct, mesh, alpha, pi_a, rho)?;
        let mut out = TrialOutcome {
            violations: vec![],
            max_ratio: 0.0,
            max_weak_ratio: 0.0,
            exchange: exchange_identity_residual(table, ct, &v)?,
        };
        for n in 1..=n_rows {
            let b = cert.bound_per_step[n - 1];
            if b > 0.0 {
                out.max_ratio = out.max_ratio.max(v[n] / b);
            }
            if cert.weak_bound[n - 1] > 0.0 {
                out.max_weak_ratio = out.max_weak_ratio.max(v[n] / cert.weak_bound[n - 1]);
            }
            if v[n] > b * (1.0 + 1e-12) + 1e-14 {
                out.violations.push(GronwallViolation { trial, n, v: v[n], bound: b });
            }
        }
        return Ok(out);
    }
    Err(Error::Invalid(format!("trial {trial}: could not draw a sequence with a well-defined g")))
}
