//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero on any failure that is not the known-unattainable clause of
//! criterion 5 (see `criterion_5`).

use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use fracstep::complementary::{build_complementary, check_entry_bounds, check_sum_bounds, identity_residual};
use fracstep::gronwall::{verify_gronwall, GronwallForm, TrialSetup};
use fracstep::kernels::{bdf2_kernel, bdf2_recombine, build_kernel, fast_l1_kernel, verify_assumptions};
use fracstep::mesh::MeshSpec;
use fracstep::soe::build_soe;
use fracstep::solver::{
    check_energy_inequalities, check_stability, convergence_study, solve_fd1d, solve_single_mode, FdProblem, FdSource,
    Memory, SingleModeProblem,
};
use fracstep::specialfn::gamma;
use fracstep::{KernelTable, Scheme, TimeMesh};

const ALPHAS: [f64; 3] = [0.3, 0.5, 0.7];
const SIZES: [usize; 3] = [16, 64, 256];
const FAST_EPS: f64 = 1e-10;

enum Verdict {
    Pass,
    Fail,
    /// Fails, but only on a clause shown to be unattainable.
    KnownFail,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn pass_if(ok: bool, detail: String) -> Outcome {
    Outcome { verdict: if ok { Verdict::Pass } else { Verdict::Fail }, detail }
}

fn mesh_specs(n: usize) -> Vec<MeshSpec> {
    [
        format!("uniform:{n},1"),
        format!("graded:{n},2,1"),
        format!("graded:{n},3,1"),
        format!("random:{n},1.75,{}", 7000 + n),
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect()
}

struct Cell {
    scheme: Scheme,
    spec: MeshSpec,
    mesh: TimeMesh,
    alpha: f64,
    table: KernelTable,
}

impl Cell {
    fn label(&self) -> String {
        format!("{} {} alpha={}", self.scheme, self.spec, self.alpha)
    }

    fn pi_a(&self) -> f64 {
        self.table
            .pi_a()
            .unwrap_or_else(|| verify_assumptions(&self.table, &self.mesh, 1.0).unwrap().a2_pi_estimate)
    }
}

/// L1, fast L1 and Alikhanov on every mesh; recombined BDF2 on uniform meshes.
fn cells(sizes: &[usize]) -> Vec<Cell> {
    let mut jobs = vec![];
    for &n in sizes {
        for spec in mesh_specs(n) {
            let mesh = spec.build().unwrap();
            for alpha in ALPHAS {
                let mut schemes = vec![Scheme::L1, Scheme::FastL1, Scheme::Alikhanov];
                if mesh.is_uniform() {
                    schemes.push(Scheme::Bdf2Recombined);
                }
                for scheme in schemes {
                    jobs.push((scheme, spec.clone(), mesh.clone(), alpha));
                }
            }
        }
    }
    jobs.into_par_iter()
        .map(|(scheme, spec, mesh, alpha)| {
            let table = build_kernel(scheme, &mesh, alpha, FAST_EPS)
                .unwrap_or_else(|e| panic!("{scheme} {spec} alpha={alpha}: {e}"));
            Cell { scheme, spec, mesh, alpha, table }
        })
        .collect()
}

fn criterion_1(cells: &[Cell]) -> Outcome {
    let worst = cells
        .par_iter()
        .map(|c| {
            let ct = build_complementary(&c.table).unwrap();
            let r = identity_residual(&ct, &c.table, 1).unwrap();
            (r.max_residual, c.label())
        })
        .reduce(|| (0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    pass_if(worst.0 <= 1e-11, format!("max |sum P A - 1| = {:.2e} ({}) over {} cells", worst.0, worst.1, cells.len()))
}

fn criterion_2(cells: &[Cell]) -> Outcome {
    let mut failures = vec![];
    let mut worst = [0.0f64; 3];
    for c in cells {
        let (limit, slot) = match c.scheme {
            Scheme::L1 => (1.0 + 1e-10, 0),
            Scheme::Alikhanov => (11.0 / 4.0, 1),
            Scheme::FastL1 => (1.5, 2),
            _ => continue,
        };
        let r = verify_assumptions(&c.table, &c.mesh, limit).unwrap();
        worst[slot] = worst[slot].max(r.a2_pi_estimate);
        if !(r.a1_holds && r.a2_pi_estimate <= limit) {
            failures.push(format!("{} (a1 {}, pi {:.6})", c.label(), r.a1_holds, r.a2_pi_estimate));
        }
    }
    pass_if(
        failures.is_empty(),
        format!(
            "max pi_A estimate: L1 {:.12}, Alikhanov {:.4}, fast L1 {:.4}; failing cells: {:?}",
            worst[0], worst[1], worst[2], failures
        ),
    )
}

fn criterion_3(cells: &[Cell]) -> Outcome {
    let results: Vec<(String, bool, f64, f64)> = cells
        .par_iter()
        .map(|c| {
            let ct = build_complementary(&c.table).unwrap();
            let pi_a = c.pi_a();
            let entries = check_entry_bounds(&ct, &c.mesh, c.alpha, pi_a).unwrap();
            let sums = check_sum_bounds(&ct, &c.mesh, c.alpha, pi_a, c.mesh.max_ratio()).unwrap();
            let ratio = sums
                .partial_sums
                .iter()
                .chain(&sums.full_sums)
                .chain(&sums.mittag_leffler)
                .map(|b| b.max_ratio)
                .fold(0.0, f64::max);
            (c.label(), entries.holds() && sums.holds(), entries.max_upper_ratio.max(entries.max_weighted_sum / pi_a), ratio)
        })
        .collect();
    let failing: Vec<&String> = results.iter().filter(|r| !r.1).map(|r| &r.0).collect();
    let w21 = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let w23 = results.iter().map(|r| r.3).fold(0.0, f64::max);
    pass_if(
        failing.is_empty(),
        format!("worst ratio to bound: P-entry/weighted-sum {w21:.4}, sums {w23:.4}; failing cells: {failing:?}"),
    )
}

fn criterion_4(cells: &[Cell]) -> Outcome {
    let runs: Vec<(String, bool, f64)> = cells
        .par_iter()
        .flat_map_iter(|c| {
            let ct = build_complementary(&c.table).unwrap();
            let pi_a = c.pi_a();
            let lambda_max = 1.0 / (2.0 * pi_a * gamma(2.0 - c.alpha) * c.mesh.max_step().powf(c.alpha));
            let lambdas = [lambda_max.min(2.0) * 0.5, 0.0, -1.0];
            let mut out = vec![];
            for (i, big_lambda) in lambdas.into_iter().enumerate() {
                let setup =
                    TrialSetup { table: &c.table, ct: &ct, mesh: &c.mesh, pi_a, rho: c.mesh.max_ratio(), big_lambda };
                for form in [GronwallForm::Quadratic, GronwallForm::Linear] {
                    let r = verify_gronwall(setup, form, 100, 40 + i as u64).unwrap();
                    out.push((format!("{} {form:?} Lambda={big_lambda:.3}", c.label()), r.holds(), r.max_ratio));
                }
            }
            out
        })
        .collect();
    let failing: Vec<&String> = runs.iter().filter(|r| !r.1).map(|r| &r.0).collect();
    let worst = runs.iter().map(|r| r.2).fold(0.0, f64::max);
    pass_if(
        failing.is_empty(),
        format!("{} runs x 100 trials, max v/B = {worst:.4}; failing: {failing:?}", runs.len()),
    )
}

/// The randomised inequalities are the substance of this criterion. The row
/// clause `d_n < 1/A0` cannot hold: `d_n theta^(n) = 1/A0` with
/// `theta^(n) <= 1/2`, so `d_n >= 2/A0`. With `A^(1)_1 = 0`, `theta^(1) = 1/2`
/// exactly. The suite reports these clauses as failing and accepts the failure
/// only in exactly that form.
fn criterion_5(cells: &[Cell]) -> Outcome {
    let mut extra = vec![];
    for n in [64] {
        for spec in mesh_specs(n) {
            let mesh = spec.build().unwrap();
            if mesh.is_uniform() {
                for alpha in ALPHAS.into_iter().chain([0.9]) {
                    extra.push((spec.clone(), mesh.clone(), alpha));
                }
            }
        }
    }
    let bdf2: Vec<Cell> = extra
        .into_iter()
        .map(|(spec, mesh, alpha)| {
            let table = bdf2_kernel(&mesh, alpha).unwrap();
            Cell { scheme: Scheme::Bdf2, spec, mesh, alpha, table }
        })
        .collect();
    let pool: Vec<&Cell> = cells.iter().filter(|c| c.mesh.len() == 64).chain(&bdf2).collect();
    let results: Vec<_> = pool
        .par_iter()
        .filter(|c| verify_assumptions(&c.table, &c.mesh, 1.0).unwrap().a1_holds)
        .filter_map(|c| check_energy_inequalities(&c.table, 8, 1000, 5).ok().map(|r| (c.label(), r)))
        .collect();
    let violations: usize = results.iter().map(|r| r.1.violations).sum();
    let worst = results
        .iter()
        .map(|r| r.1.worst_first.min(r.1.worst_second).min(r.1.worst_offset))
        .fold(f64::INFINITY, f64::min);
    let d_ok = results.iter().all(|r| r.1.d_n_below_inverse_a0);
    let th_ok = results.iter().all(|r| r.1.theta_n_below_half);
    let structural = results.iter().all(|r| {
        r.1.product_residual < 1e-12 && r.1.theta_n_below_half_from_2 && r.1.theta_n[0] == 0.5
    });
    let detail = format!(
        "{} cells x 1000 trials (dim 8): {violations} inequality violations, worst margin {worst:.1e}; \
         d_n < 1/A0 on every row: {d_ok}; theta^(n) < 1/2 on every row: {th_ok} \
         (max |d_n theta^(n) A0 - 1| < 1e-12 and theta^(n) < 1/2 for n >= 2: {structural})",
        results.len()
    );
    let verdict = if violations > 0 || results.is_empty() {
        Verdict::Fail
    } else if d_ok && th_ok {
        Verdict::Pass
    } else if structural {
        Verdict::KnownFail
    } else {
        Verdict::Fail
    };
    Outcome { verdict, detail }
}

fn criterion_6() -> Outcome {
    let ns = [128, 256, 512, 1024];
    let uniform: MeshSpec = "uniform:128,1".parse().unwrap();
    let mut lines = vec![];
    let mut ok = true;
    for alpha in ALPHAS {
        let smooth = SingleModeProblem::manufactured(alpha, 1.0, 3.0);
        let singular = SingleModeProblem::relaxation(alpha, 1.0, 1.0);
        let gamma = (2.0 - alpha) / alpha;
        let graded = MeshSpec::Graded { n: 128, gamma, t_final: 1.0 };
        let studies = [
            ("L1 smooth uniform", smooth, &uniform, Scheme::L1, 2.0 - alpha, 0.15),
            ("Alikhanov smooth uniform", smooth, &uniform, Scheme::Alikhanov, 2.0, 0.15),
            ("L1 singular uniform", singular, &uniform, Scheme::L1, alpha, 0.1),
            ("L1 singular graded", singular, &graded, Scheme::L1, 2.0 - alpha, 0.2),
        ];
        for (name, problem, spec, scheme, target, tol) in studies {
            let rows = convergence_study(&problem, spec, scheme, &ns, FAST_EPS).unwrap();
            let order = rows.last().unwrap().order.unwrap();
            let good = (order - target).abs() <= tol;
            ok &= good;
            lines.push(format!("{name} a={alpha}: {order:.3} vs {target:.2}{}", if good { "" } else { " (off)" }));
        }
    }
    pass_if(ok, lines.join("; "))
}

fn criterion_7() -> Outcome {
    let soe = build_soe(0.5, 1e-8, 1e-3, 1.0).unwrap();
    let mut diffs = vec![];
    let mut memory = vec![];
    for spec in ["uniform:512,1", "graded:512,2,1"] {
        let mesh: TimeMesh = spec.parse::<MeshSpec>().unwrap().build().unwrap();
        let soe_here = if mesh.min_step() >= soe.delta_t {
            soe.clone()
        } else {
            build_soe(0.5, 1e-8, mesh.min_step(), 1.0).unwrap()
        };
        let table = build_kernel(Scheme::L1, &mesh, 0.5, FAST_EPS).unwrap();
        for problem in [SingleModeProblem::relaxation(0.5, 1.0, 1.0), SingleModeProblem::manufactured(0.5, 1.0, 3.0)] {
            let fast = solve_single_mode(&problem, &mesh, Memory::Soe(&soe_here)).unwrap();
            let direct = solve_single_mode(&problem, &mesh, Memory::Direct(&table)).unwrap();
            let d = fast.u.iter().zip(&direct.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            diffs.push(d);
            memory.push((mesh.len(), fast.history_values, soe_here.len()));
        }
    }
    // same SOE on two step counts: the stored history does not grow with N
    let mut held = vec![];
    for n in [512, 1000] {
        let mesh = TimeMesh::uniform(n, 1.0).unwrap();
        let sol = solve_single_mode(&SingleModeProblem::relaxation(0.5, 1.0, 1.0), &mesh, Memory::Soe(&soe)).unwrap();
        held.push(sol.history_values);
    }
    let max_diff = diffs.iter().copied().fold(0.0, f64::max);
    let ok = max_diff <= 1e-6
        && soe.len() <= 200
        && held.iter().all(|&h| h == soe.len())
        && memory.iter().all(|&(_, h, q)| h == q);
    pass_if(
        ok,
        format!(
            "max |fast - direct| = {max_diff:.2e}; Nq = {} for (0.5, 1e-8, 1e-3, 1); history values at N = 512, 1000: {held:?}",
            soe.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut details = vec![];
    for n in SIZES {
        let mesh = TimeMesh::uniform(n, 1.0).unwrap();
        let raw = bdf2_kernel(&mesh, 0.9).unwrap();
        let r = verify_assumptions(&raw, &mesh, 1.0).unwrap();
        ok &= !r.a1_holds;
        details.push(format!("N={n} raw a=0.9 A1 {} at {:?}", r.a1_holds, r.a1_worst_at));
        for alpha in ALPHAS {
            let (rec, eta) = bdf2_recombine(&bdf2_kernel(&mesh, alpha).unwrap(), &mesh).unwrap();
            let a1 = verify_assumptions(&rec, &mesh, 1.0).unwrap().a1_holds;
            let good = a1 && eta > 0.0 && eta < 2.0 / 3.0;
            ok &= good;
            if n == 64 {
                details.push(format!("a={alpha} eta={eta:.4}"));
            }
            if !good {
                details.push(format!("N={n} a={alpha} recombined A1 {a1} eta {eta}"));
            }
        }
    }
    pass_if(ok, details.join("; "))
}

fn criterion_9() -> Outcome {
    let kappa = 1.0;
    let mut jobs = vec![];
    for alpha in ALPHAS {
        for family in ["uniform", "graded2"] {
            for scheme in [Scheme::L1, Scheme::FastL1, Scheme::Alikhanov, Scheme::Bdf2Recombined] {
                if scheme == Scheme::Bdf2Recombined && family != "uniform" {
                    continue;
                }
                jobs.push((alpha, family, scheme));
            }
        }
    }
    let results: Vec<(String, Option<(bool, bool, f64)>)> = jobs
        .into_par_iter()
        .map(|(alpha, family, scheme)| {
            let pi_claim = scheme.pi_a();
            // refine until the step restriction of the envelope holds
            let mut n = 64;
            loop {
                let mesh = if family == "uniform" {
                    TimeMesh::uniform(n, 1.0).unwrap()
                } else {
                    TimeMesh::graded(n, 2.0, 1.0).unwrap()
                };
                let (table, soe) = if scheme == Scheme::FastL1 {
                    let soe = build_soe(alpha, FAST_EPS, mesh.min_step(), 1.0).unwrap();
                    (fast_l1_kernel(&mesh, alpha, &soe).unwrap(), Some(soe))
                } else {
                    (build_kernel(scheme, &mesh, alpha, FAST_EPS).unwrap(), None)
                };
                let pi_a = pi_claim.unwrap_or_else(|| verify_assumptions(&table, &mesh, 1.0).unwrap().a2_pi_estimate);
                let limit = (2.0 * pi_a * gamma(2.0 - alpha) * 2.0 * kappa).powf(-1.0 / alpha);
                let label = format!("{scheme} {family} N={n} a={alpha}");
                if mesh.max_step() > limit {
                    if n >= 1024 {
                        return (label, None);
                    }
                    n *= 2;
                    continue;
                }
                let problem = FdProblem {
                    alpha,
                    length: 1.0,
                    m: 31,
                    kappa,
                    u0_amplitude: 1.0,
                    source: FdSource::Oscillating { amplitude: 3.0 },
                };
                let memory = match &soe {
                    Some(s) => Memory::Soe(s),
                    None => Memory::Direct(&table),
                };
                let sol = solve_fd1d(&problem, &mesh, memory).unwrap();
                let rep = check_stability(&sol, &table, &mesh, kappa, Some(pi_a)).unwrap();
                return (label, Some((rep.offset_ok(), rep.breached(), rep.max_ratio)));
            }
        })
        .collect();
    let covered: Vec<_> = results.iter().filter_map(|(l, r)| r.map(|r| (l, r))).collect();
    let skipped: Vec<&String> = results.iter().filter(|r| r.1.is_none()).map(|r| &r.0).collect();
    let flagged: Vec<&&String> = covered.iter().filter(|c| !c.1 .0).map(|c| &c.0).collect();
    let breached: Vec<&&String> = covered.iter().filter(|c| c.1 .1).map(|c| &c.0).collect();
    let worst = covered.iter().map(|c| c.1 .2).fold(0.0, f64::max);
    pass_if(
        breached.is_empty() && flagged.is_empty() && !covered.is_empty(),
        format!(
            "{} runs, max ||u^n|| / envelope = {worst:.4}; breached: {breached:?}; theta > theta^(n): {flagged:?}; \
             step restriction unmet up to N = 1024: {skipped:?}",
            covered.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let grid = cells(&SIZES);
    println!("acceptance: {} kernel cells built in {:.1?}", grid.len(), start.elapsed());
    type Check<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        ("kernel identity", Box::new(|| criterion_1(&grid))),
        ("assumption audit", Box::new(|| criterion_2(&grid))),
        ("complementary kernel bounds", Box::new(|| criterion_3(&grid))),
        ("Gronwall bounds", Box::new(|| criterion_4(&grid))),
        ("energy inequalities", Box::new(|| criterion_5(&grid))),
        ("convergence rates", Box::new(criterion_6)),
        ("fast L1 vs direct L1", Box::new(criterion_7)),
        ("BDF2 probe", Box::new(criterion_8)),
        ("end-to-end stability", Box::new(criterion_9)),
    ];
    let mut unexpected = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let out = check();
        let tag = match out.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                unexpected += 1;
                "FAIL"
            }
            Verdict::KnownFail => "FAIL (unattainable clause, analysed)",
        };
        println!("criterion {} {name}: {tag} [{:.1?}] {}", i + 1, t.elapsed(), out.detail);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
