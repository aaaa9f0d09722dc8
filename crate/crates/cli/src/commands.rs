use serde_json::json;

use fracstep::complementary::build_complementary;
use fracstep::gronwall::{verify_gronwall, GronwallForm, GronwallReport, TrialSetup};
use fracstep::kernels::{bdf2_kernel, bdf2_recombine, build_kernel, fast_l1_kernel, verify_assumptions};
use fracstep::mesh::MeshSpec;
use fracstep::soe::{build_soe, build_soe_with_budget, certification_residual, DEFAULT_NODE_BUDGET};
use fracstep::solver::{
    check_stability, convergence_study, solve_fd1d, solve_single_mode, FdProblem, FdSource, Memory,
    SingleModeForcing, SingleModeProblem, StabilityReport,
};
use fracstep::specialfn::{mittag_leffler, MlConfig};
use fracstep::{Error, KernelTable, Scheme, TimeMesh};

use crate::config::{emit, header, merge, Failure};
use crate::{AuditArgs, ConvergeArgs, DumpArgs, GronwallArgs, MlfArgs, SoeArgs, SolveArgs};

const DEFAULT_SOE_EPS: f64 = 1e-10;

fn required<T: Clone>(v: &Option<T>, name: &str) -> Result<T, Failure> {
    v.clone().ok_or_else(|| Failure::validation(format!("--{name} is required")))
}

fn scheme_of(s: &Option<String>) -> Result<Scheme, Failure> {
    Ok(s.as_deref().unwrap_or("l1").parse::<Scheme>()?)
}

fn mesh_of(s: &Option<String>) -> Result<(MeshSpec, TimeMesh), Failure> {
    let spec: MeshSpec = required(s, "mesh")?.parse()?;
    let mesh = spec.build()?;
    Ok((spec, mesh))
}

fn alpha_of(a: &Option<f64>) -> Result<f64, Failure> {
    let alpha = required(a, "alpha")?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(alpha)
}

fn csv_list<T: std::str::FromStr>(s: &str, name: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| Failure::validation(format!("bad --{name} entry {p:?}"))))
        .collect()
}

fn resolve_pi_a(claim: Option<f64>, table: &KernelTable, mesh: &TimeMesh) -> Result<f64, Failure> {
    Ok(match claim.or(table.pi_a()) {
        Some(p) => p,
        None => verify_assumptions(table, mesh, 1.0)?.a2_pi_estimate,
    })
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

pub fn kernels_dump(args: DumpArgs) -> Result<(), Failure> {
    let mut a = merge(&args, args.config.as_deref())?;
    let scheme = scheme_of(&a.scheme)?;
    let (_, mesh) = mesh_of(&a.mesh)?;
    let alpha = alpha_of(&a.alpha)?;
    let eps = *a.soe_eps.get_or_insert(DEFAULT_SOE_EPS);
    a.scheme = Some(scheme.to_string());
    let table = build_kernel(scheme, &mesh, alpha, eps)?;
    let which = a.table.get_or_insert_with(|| "a".into()).to_ascii_lowercase();
    let (body, entries) = match which.as_str() {
        "a" => (table.to_csv(), table.entry_count()),
        "p" => {
            let ct = build_complementary(&table)?;
            (ct.to_csv(), table.entry_count())
        }
        other => return Err(Failure::validation(format!("--table must be a or p, got {other:?}"))),
    };
    let text = header("kernels dump", &a, &[("entries", entries.to_string())]) + &body;
    emit(a.out.as_deref(), &text)
}

pub fn audit(args: AuditArgs) -> Result<(), Failure> {
    let mut a = merge(&args, args.config.as_deref())?;
    let scheme = scheme_of(&a.scheme)?;
    let (_, mesh) = mesh_of(&a.mesh)?;
    let alpha = alpha_of(&a.alpha)?;
    let eps = *a.soe_eps.get_or_insert(DEFAULT_SOE_EPS);
    let rho = *a.rho.get_or_insert(1.75);
    a.scheme = Some(scheme.to_string());
    let table = build_kernel(scheme, &mesh, alpha, eps)?;
    let claim = *a.pi_a.get_or_insert(scheme.pi_a().unwrap_or(1.0));
    let report = verify_assumptions(&table, &mesh, claim)?;
    let mut out = json!({
        "command": "audit",
        "config": &a,
        "mesh": mesh.check_a3(rho),
        "a1": report.a1_holds,
        "a2": report.a2_holds_for,
        "pi_a_estimate": report.a2_pi_estimate,
        "assumptions": &report,
    });
    if scheme == Scheme::Bdf2Recombined && mesh.is_uniform() {
        let (_, eta) = bdf2_recombine(&bdf2_kernel(&mesh, alpha)?, &mesh)?;
        out["eta"] = json!(eta);
    }
    emit(a.out.as_deref(), &json_text(&out))
}

pub fn gronwall_verify(args: GronwallArgs) -> Result<(), Failure> {
    let mut a = merge(&args, args.config.as_deref())?;
    let scheme = scheme_of(&a.scheme)?;
    let (_, mesh) = mesh_of(&a.mesh)?;
    let alpha = alpha_of(&a.alpha)?;
    let eps = *a.soe_eps.get_or_insert(DEFAULT_SOE_EPS);
    let trials = *a.trials.get_or_insert(100);
    let seed = *a.seed.get_or_insert(0);
    let big_lambda = *a.lambda.get_or_insert(1.0);
    let forms = match a.form.get_or_insert_with(|| "both".into()).as_str() {
        "quadratic" => vec![GronwallForm::Quadratic],
        "linear" => vec![GronwallForm::Linear],
        "both" => vec![GronwallForm::Quadratic, GronwallForm::Linear],
        other => return Err(Failure::validation(format!("--form must be quadratic, linear or both, got {other:?}"))),
    };
    a.scheme = Some(scheme.to_string());
    let table = build_kernel(scheme, &mesh, alpha, eps)?;
    let pi_a = resolve_pi_a(a.pi_a, &table, &mesh)?;
    a.pi_a = Some(pi_a);
    let ct = build_complementary(&table)?;
    let setup = TrialSetup { table: &table, ct: &ct, mesh: &mesh, pi_a, rho: mesh.max_ratio(), big_lambda };
    let reports: Vec<GronwallReport> =
        forms.into_iter().map(|f| verify_gronwall(setup, f, trials, seed)).collect::<Result<_, Error>>()?;
    let violated = reports.iter().any(|r| !r.holds());
    let out = json!({
        "command": "gronwall verify",
        "config": &a,
        "rho": mesh.max_ratio(),
        "holds": !violated,
        "reports": &reports,
    });
    emit(a.out.as_deref(), &json_text(&out))?;
    if violated {
        let n: usize = reports.iter().map(|r| r.violations.len()).sum();
        return Err(Failure::violation(format!("Gronwall bound breached {n} times")));
    }
    Ok(())
}

/// Header lines describing a stability check and whether it must fail the run.
pub(crate) fn stability_lines(rep: &StabilityReport) -> (Vec<(&'static str, String)>, Option<Failure>) {
    let lines = vec![
        ("offset-ok", rep.offset_ok().to_string()),
        ("energy-worst-margin", format!("{:e}", rep.energy_worst)),
        ("envelope-max-ratio", format!("{:e}", rep.max_ratio)),
        ("envelope-worst-n", rep.worst_n.to_string()),
        ("stability-breached", rep.breached().to_string()),
    ];
    let failure = rep.breached().then(|| {
        Failure::violation(format!(
            "stability check breached (energy margin {:e}, envelope ratio {:e} at n = {})",
            rep.energy_worst, rep.max_ratio, rep.worst_n
        ))
    });
    (lines, failure)
}

pub fn solve(args: SolveArgs) -> Result<(), Failure> {
    let mut a = merge(&args, args.config.as_deref())?;
    let scheme = scheme_of(&a.scheme)?;
    let (_, mesh) = mesh_of(&a.mesh)?;
    let alpha = alpha_of(&a.alpha)?;
    let eps = *a.soe_eps.get_or_insert(DEFAULT_SOE_EPS);
    let kappa = *a.kappa.get_or_insert(0.0);
    let u0 = *a.u0.get_or_insert(1.0);
    let problem_kind = a.problem.get_or_insert_with(|| "single-mode".into()).clone();
    let forcing = a.forcing.get_or_insert_with(|| "zero".into()).clone();
    let history = a
        .history
        .get_or_insert_with(|| if scheme == Scheme::FastL1 { "soe".into() } else { "direct".into() })
        .clone();
    a.scheme = Some(scheme.to_string());
    let soe = match history.as_str() {
        "soe" if scheme == Scheme::FastL1 => Some(build_soe(alpha, eps, mesh.min_step(), mesh.final_time())?),
        "soe" => return Err(Failure::validation("--history soe needs --scheme fast-l1")),
        "direct" => None,
        other => return Err(Failure::validation(format!("--history must be direct or soe, got {other:?}"))),
    };
    let table = match &soe {
        Some(s) => fast_l1_kernel(&mesh, alpha, s)?,
        None => build_kernel(scheme, &mesh, alpha, eps)?,
    };
    let memory = match &soe {
        Some(s) => Memory::Soe(s),
        None => Memory::Direct(&table),
    };
    match problem_kind.as_str() {
        "single-mode" => {
            let lambda = *a.lambda.get_or_insert(1.0);
            let forcing = match forcing.as_str() {
                "zero" => SingleModeForcing::Zero,
                "manufactured" => SingleModeForcing::Manufactured { sigma: *a.sigma.get_or_insert(3.0) },
                other => return Err(Failure::validation(format!("single-mode forcing must be zero or manufactured, got {other:?}"))),
            };
            let p = SingleModeProblem { alpha, lambda, kappa, u0, forcing };
            let sol = solve_single_mode(&p, &mesh, memory)?;
            let extra = [
                ("max-error", format!("{:e}", sol.max_error)),
                ("final-error", format!("{:e}", sol.final_error)),
                ("history-values", sol.history_values.to_string()),
            ];
            emit(a.out.as_deref(), &(header("solve", &a, &extra) + &sol.to_csv()))
        }
        "fd" => {
            let source = match forcing.as_str() {
                "zero" => FdSource::Zero,
                "manufactured" => FdSource::Manufactured { sigma: *a.sigma.get_or_insert(3.0) },
                "oscillating" => FdSource::Oscillating { amplitude: *a.amplitude.get_or_insert(1.0) },
                other => return Err(Failure::validation(format!("fd forcing must be zero, manufactured or oscillating, got {other:?}"))),
            };
            let m = *a.m.get_or_insert(63);
            let length = *a.length.get_or_insert(1.0);
            let p = FdProblem { alpha, length, m, kappa, u0_amplitude: u0, source };
            let sol = solve_fd1d(&p, &mesh, memory)?;
            let (mut extra, failure) = match check_stability(&sol, &table, &mesh, kappa, a.pi_a) {
                Ok(rep) => stability_lines(&rep),
                Err(Error::StepRestrictionViolated { max_step, limit }) => (
                    vec![("stability", format!("not checked: max step {max_step:e} exceeds the envelope's limit {limit:e}"))],
                    None,
                ),
                Err(e) => return Err(e.into()),
            };
            extra.push(("history-values", sol.history_values.to_string()));
            emit(a.out.as_deref(), &(header("solve", &a, &extra) + &sol.to_csv()))?;
            failure.map_or(Ok(()), Err)
        }
        other => Err(Failure::validation(format!("--problem must be single-mode or fd, got {other:?}"))),
    }
}

pub fn converge(args: ConvergeArgs) -> Result<(), Failure> {
    let mut a = merge(&args, args.config.as_deref())?;
    let scheme = scheme_of(&a.scheme)?;
    let alpha = alpha_of(&a.alpha)?;
    let eps = *a.soe_eps.get_or_insert(DEFAULT_SOE_EPS);
    let lambda = *a.lambda.get_or_insert(1.0);
    let singular = *a.singular.get_or_insert(false);
    let t_final = *a.t_final.get_or_insert(1.0);
    let ns: Vec<usize> = csv_list(a.ns.get_or_insert_with(|| "32,64,128,256".into()), "Ns")?;
    if ns.is_empty() || ns.contains(&0) {
        return Err(Failure::validation("--Ns entries must be positive"));
    }
    a.scheme = Some(scheme.to_string());
    let spec = match (&a.gamma, &a.mesh) {
        (Some(_), Some(_)) => return Err(Failure::validation("give either --gamma or --mesh, not both")),
        (Some(g), None) => {
            let gamma = if g == "auto" {
                (2.0 - alpha) / alpha
            } else {
                g.parse::<f64>().map_err(|_| Failure::validation(format!("bad --gamma {g:?}")))?
            };
            a.gamma = Some(gamma.to_string());
            MeshSpec::Graded { n: ns[0], gamma, t_final }
        }
        (None, Some(m)) => m.parse::<MeshSpec>()?,
        (None, None) => MeshSpec::Graded { n: ns[0], gamma: 1.0, t_final },
    };
    a.mesh = Some(spec.to_string());
    let problem = if singular {
        SingleModeProblem::relaxation(alpha, lambda, 1.0)
    } else {
        a.sigma.get_or_insert(3.0);
        SingleModeProblem::manufactured(alpha, lambda, a.sigma.unwrap())
    };
    let rows = convergence_study(&problem, &spec, scheme, &ns, eps)?;
    let mut csv = header("converge", &a, &[]);
    let mut table = format!("{:>8}  {:>14}  {:>14}  {:>8}\n", "N", "max error", "final error", "order");
    csv.push_str("N,max_error,final_error,order\n");
    for r in &rows {
        let order = r.order.map(|o| format!("{o:.4}")).unwrap_or_default();
        csv.push_str(&format!("{},{:e},{:e},{}\n", r.n, r.max_error, r.final_error, order));
        table.push_str(&format!("{:>8}  {:>14.6e}  {:>14.6e}  {:>8}\n", r.n, r.max_error, r.final_error, order));
    }
    match &a.out {
        Some(p) => {
            emit(Some(p), &csv)?;
            print!("{table}");
        }
        None => {
            print!("{csv}");
            eprint!("{table}");
        }
    }
    Ok(())
}

pub fn mlf(args: MlfArgs) -> Result<(), Failure> {
    let a = merge(&args, args.config.as_deref())?;
    let alpha = required(&a.alpha, "alpha")?;
    let zs: Vec<f64> = csv_list(&required(&a.z, "z")?, "z")?;
    let cfg = MlConfig::default();
    let mut text = header("mlf", &a, &[]) + "z,value\n";
    for z in zs {
        let v = mittag_leffler(alpha, z, &cfg)?;
        text.push_str(&format!("{z:e},{v:e}\n"));
    }
    emit(a.out.as_deref(), &text)
}

pub fn soe_build(args: SoeArgs) -> Result<(), Failure> {
    let mut a = merge(&args, args.config.as_deref())?;
    let alpha = alpha_of(&a.alpha)?;
    let eps = *a.eps.get_or_insert(1e-8);
    let dt = *a.dt.get_or_insert(1e-3);
    let t_final = *a.t_final.get_or_insert(1.0);
    let budget = *a.budget.get_or_insert(DEFAULT_NODE_BUDGET);
    let soe = build_soe_with_budget(alpha, eps, dt, t_final, budget)?;
    let out = json!({
        "command": "soe build",
        "config": &a,
        "nodes": soe.len(),
        "certified_residual": certification_residual(&soe),
        "meets_fast_l1_condition": soe.meets_fast_l1_condition(),
        "soe": &soe,
    });
    emit(a.out.as_deref(), &json_text(&out))
}
