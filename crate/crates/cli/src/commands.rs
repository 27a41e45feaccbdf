use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qrp_core::oracle::{compare_to_closed_form, discretize, solve_lp, LpOptions, Tolerances};
use qrp_core::random::instance_from_seed;
use qrp_core::{
    compare_policies, construct_due, qrp_report, residual_eval, solve_dso, solve_state, Corridor,
    DsoSolution, DueOptions, DueSolution, PolicySolution, PolicySpec, QrpReport, SampleGrid,
    ScheduleDelayFn, StateKind,
};

use crate::config::{ConfigError, InstanceConfig};
use crate::output::{self, sig9, QrpSummary, ResidualSummary, RunSummary};

const DEFAULT_OUT: &str = "qrp-out";

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Parse(String),
    Usage(String),
    Domain(qrp_core::Error),
    Check { code: &'static str, message: String },
}

impl Failure {
    pub fn code(&self) -> &'static str {
        match self {
            Failure::Io(_) => "Io",
            Failure::Parse(_) => "Parse",
            Failure::Usage(_) => "Usage",
            Failure::Domain(e) => e.code(),
            Failure::Check { code, .. } => code,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) | Failure::Parse(m) | Failure::Usage(m) => f.write_str(m),
            Failure::Domain(e) => write!(f, "{e}"),
            Failure::Check { message, .. } => f.write_str(message),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(m) => Failure::Io(m),
            ConfigError::Parse(m) => Failure::Parse(m),
            ConfigError::Domain(e) => Failure::Domain(e),
        }
    }
}

impl From<qrp_core::Error> for Failure {
    fn from(e: qrp_core::Error) -> Self {
        Failure::Domain(e)
    }
}

type CmdResult = Result<(), Failure>;

struct Instance {
    config: InstanceConfig,
    corridor: Corridor,
    schedule: ScheduleDelayFn,
}

fn load(path: &Path) -> Result<Instance, Failure> {
    let config = InstanceConfig::load(path)?;
    let corridor = config.corridor();
    let schedule = config.schedule()?;
    Ok(Instance {
        config,
        corridor,
        schedule,
    })
}

fn out_dir(flag: Option<&Path>, config: &InstanceConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// "2,3" → [2, 3]; "" → [].
pub fn parse_subset(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Failure::Parse(format!("bad subset index `{s}`")))
        })
        .collect()
}

fn policy_spec(kind: StateKind, subset: Option<&str>) -> Result<PolicySpec, Failure> {
    match (kind.takes_subset(), subset) {
        (true, None) => Err(Failure::Usage(format!(
            "state {kind} needs --subset (use --subset \"\" for the empty set)"
        ))),
        (true, Some(s)) => Ok(PolicySpec::new(kind, parse_subset(s)?)),
        (false, Some(_)) => Err(Failure::Usage(format!("state {kind} takes no subset"))),
        (false, None) => Ok(PolicySpec::full(kind)),
    }
}

fn margin_text(qrp: &QrpReport) -> String {
    if qrp.worst_margin.is_finite() {
        sig9(qrp.worst_margin)
    } else {
        "inf (single bottleneck)".into()
    }
}

fn violation_line(qrp: &QrpReport) -> String {
    match qrp.violating.first() {
        Some(v) => format!("QRP condition violated at pair ({},{})", v.pair, v.pair + 1),
        None => "QRP condition violated".into(),
    }
}

pub fn validate(path: &Path) -> CmdResult {
    let inst = load(path)?;
    let c = &inst.corridor;
    let diag = qrp_core::validate(c);
    if !diag.ok {
        println!("corridor invalid:");
        for v in &diag.violations {
            println!("  {:?}: {}", v.kind, v.message);
        }
        return Err(Failure::Domain(qrp_core::Error::InvalidCorridor(
            diag.violations.iter().map(|v| v.message.clone()).collect(),
        )));
    }
    println!(
        "corridor valid: {} bottlenecks, {} groups",
        c.n_bottlenecks(),
        c.n_groups()
    );
    let dso = solve_dso(c, &inst.schedule)?;
    let qrp = qrp_report(&dso);
    if qrp.holds {
        println!("QRP margin {}", margin_text(&qrp));
        Ok(())
    } else {
        println!("{}", violation_line(&qrp));
        println!(
            "  {} violating samples{}",
            qrp.violation_count,
            qrp.first_violation_text()
        );
        Err(Failure::Domain(qrp_core::Error::QrpConditionViolated(
            Box::new(qrp),
        )))
    }
}

struct Solved {
    dso: DsoSolution,
    due: Option<DueSolution>,
    policy: PolicySolution,
}

fn solve_spec(inst: &Instance, spec: &PolicySpec, force: bool) -> Result<Solved, Failure> {
    let dso = solve_dso(&inst.corridor, &inst.schedule)?;
    let due = construct_due(&dso, &DueOptions { force });
    let due = match (spec.kind, due) {
        (StateKind::Dso, due) => due.ok(),
        (_, due) => Some(due?),
    };
    if let Some(d) = due.as_ref().filter(|d| !d.qrp.holds) {
        eprintln!(
            "warning: {}; output is diagnostic only",
            violation_line(&d.qrp)
        );
    }
    let policy = match &due {
        Some(d) => solve_state(&dso, d, spec)?,
        None => PolicySolution {
            kind: StateKind::Dso,
            subset: Vec::new(),
            total_cost: dso.total_cost,
            revenue: dso.revenue,
            state: dso.state(),
        },
    };
    Ok(Solved { dso, due, policy })
}

pub struct SolveArgs {
    pub config: PathBuf,
    pub state: StateKind,
    pub subset: Option<String>,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub dt: Option<f64>,
}

pub fn solve(args: &SolveArgs) -> CmdResult {
    let inst = load(&args.config)?;
    let spec = policy_spec(args.state, args.subset.as_deref())?;
    let dt = args.dt.unwrap_or(inst.config.oracle.dt);
    if !(dt > 0.0) {
        return Err(Failure::Usage(format!("--dt must be positive, got {dt}")));
    }
    let started = Instant::now();
    let solved = solve_spec(&inst, &spec, args.force)?;
    let solve_time = started.elapsed();
    let state = &solved.policy.state;
    let residual = residual_eval(state, &SampleGrid::default());
    let qrp = solved
        .due
        .as_ref()
        .map(|d| d.qrp.clone())
        .unwrap_or_else(|| qrp_report(&solved.dso));
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION"),
        state: spec.label(),
        n_bottlenecks: state.n_bottlenecks(),
        n_groups: state.n_groups(),
        total_cost: solved.policy.total_cost,
        revenue: solved.policy.revenue,
        sum_q_rho: state.sum_q_rho(),
        queueing_cost: state.queueing_cost(),
        schedule_cost: state.schedule_cost(),
        z_so: solved.dso.total_cost,
        z_ue: solved.due.as_ref().map(|d| d.total_cost),
        rho: state.rho.clone(),
        qrp: QrpSummary::from(&qrp),
        residual: ResidualSummary::from(&residual),
    };
    let ramps = matches!(
        args.state,
        StateKind::Rm | StateKind::Rp | StateKind::Prm | StateKind::Prp
    );
    let dir = out_dir(args.out.as_deref(), &inst.config);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    for (name, text) in [
        ("curves.csv", output::curves_csv(state, dt, ramps)),
        ("rho.csv", output::rho_csv(&state.rho)),
        ("summary.json", json),
    ] {
        let path = write_file(&dir, name, &text)?;
        println!("wrote {}", path.display());
    }
    println!(
        "{}: Z = {}, revenue = {}, Z^SO = {}",
        spec.label(),
        sig9(summary.total_cost),
        sig9(summary.revenue),
        sig9(summary.z_so)
    );
    eprintln!(
        "time: solve {:.3} ms, total {:.3} ms",
        solve_time.as_secs_f64() * 1e3,
        started.elapsed().as_secs_f64() * 1e3
    );
    Ok(())
}

struct Check {
    name: String,
    value: String,
    limit: String,
    pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.into(),
            value: format!("{value:.3e}"),
            limit: format!("<= {limit:.3e}"),
            pass: value <= limit,
        }
    }
}

pub struct VerifyArgs {
    pub config: PathBuf,
    pub state: StateKind,
    pub subset: Option<String>,
    pub dt: Option<f64>,
    pub padding: Option<f64>,
    pub tol: f64,
    pub perturb: Option<f64>,
    pub dump_lp: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub force: bool,
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let inst = load(&args.config)?;
    let spec = policy_spec(args.state, args.subset.as_deref())?;
    let started = Instant::now();
    let solved = solve_spec(&inst, &spec, args.force)?;
    let mut checks = Vec::new();
    let mut notes = Vec::new();

    if args.state == StateKind::Dso {
        let dt = args.dt.unwrap_or(inst.config.oracle.dt);
        let padding = args.padding.unwrap_or(inst.config.oracle.padding);
        let lp = discretize(&inst.corridor, &inst.schedule, dt, padding)?;
        if let Some(path) = &args.dump_lp {
            let mut file = fs::File::create(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            lp.write_triplets(&mut std::io::BufWriter::new(&mut file))
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        }
        let res = solve_lp(&lp, &LpOptions::default());
        let report = compare_to_closed_form(&lp, &res, &solved.dso, &Tolerances::default());
        notes.push(format!(
            "LP: dt {}, {} bins, {} variables, {:?}, {} iterations",
            sig9(dt),
            lp.n_bins,
            lp.n_vars(),
            res.method,
            res.iterations
        ));
        let tol = report.tolerances;
        checks.push(Check {
            name: "LP status".into(),
            value: format!("{:?}", report.status),
            limit: "Optimal".into(),
            pass: report.status == qrp_core::oracle::LpStatus::Optimal,
        });
        checks.push(Check::at_most(
            "LP objective rel gap",
            report.objective_rel_gap,
            tol.objective_rel,
        ));
        checks.push(Check::at_most("LP price gap", report.price_gap, tol.price));
        checks.push(Check::at_most("LP rho gap", report.rho_gap, tol.rho));
    }

    let mut state = solved.policy.state.clone();
    if let Some(factor) = args.perturb {
        notes.push(format!(
            "queues and bottleneck prices scaled by {}",
            sig9(factor)
        ));
        for q in state
            .mainline_queues
            .iter_mut()
            .chain(state.bottleneck_tolls.iter_mut())
        {
            *q = q.scale(factor);
        }
    }
    let residual = residual_eval(&state, &SampleGrid::default());
    checks.push(Check::at_most(
        "departure-choice residual",
        residual.departure_choice,
        args.tol,
    ));
    checks.push(Check::at_most(
        "capacity residual",
        residual.capacity,
        args.tol,
    ));
    checks.push(Check::at_most(
        "conservation residual",
        residual.conservation,
        args.tol,
    ));
    checks.push(Check {
        name: "consistency margin".into(),
        value: sig9(residual.consistency_margin),
        limit: "> 0".into(),
        pass: residual.consistency_margin > 0.0,
    });
    if let Some(d) = &solved.due {
        checks.push(Check {
            name: "QRP margin".into(),
            value: margin_text(&d.qrp),
            limit: "> 0".into(),
            pass: d.qrp.holds,
        });
    }

    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut text = format!("verify {}\n", spec.label());
    for n in &notes {
        let _ = writeln!(text, "# {n}");
    }
    for c in &checks {
        let _ = writeln!(
            text,
            "{:<width$}  {:>12}  {:>12}  {}",
            c.name,
            c.value,
            c.limit,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = checks.iter().find(|c| !c.pass);
    match failed {
        None => text.push_str("result: PASS\n"),
        Some(c) => {
            let _ = writeln!(text, "result: FAIL ({})", c.name);
        }
    }
    print!("{text}");
    let dir = out_dir(args.out.as_deref(), &inst.config);
    let path = write_file(&dir, "verify.txt", &text)?;
    println!("wrote {}", path.display());
    eprintln!(
        "time: verify {:.3} ms",
        started.elapsed().as_secs_f64() * 1e3
    );
    match failed {
        None => Ok(()),
        Some(c) => Err(Failure::Check {
            code: "VerificationFailed",
            message: format!("{} = {} (limit {})", c.name, c.value, c.limit),
        }),
    }
}

/// `kind` or `kind:1,2`; `all` expands to every state with upstream-contiguous subsets.
pub fn parse_policies(items: &[String], n: usize) -> Result<Vec<PolicySpec>, Failure> {
    let mut specs = Vec::new();
    for item in items {
        if item.eq_ignore_ascii_case("all") {
            specs.extend(all_policies(n));
            continue;
        }
        let (name, subset) = match item.split_once(':') {
            Some((name, list)) => (name, Some(list)),
            None => (item.as_str(), None),
        };
        let kind = StateKind::parse(name)
            .ok_or_else(|| Failure::Parse(format!("unknown policy `{item}`")))?;
        specs.push(policy_spec(kind, subset)?);
    }
    Ok(specs)
}

fn all_policies(n: usize) -> Vec<PolicySpec> {
    let suffixes: Vec<Vec<usize>> = (1..=n).rev().map(|lo| (lo..=n).collect()).collect();
    let mut specs = vec![
        PolicySpec::full(StateKind::Dso),
        PolicySpec::full(StateKind::Due),
        PolicySpec::full(StateKind::Rm),
        PolicySpec::full(StateKind::Rp),
    ];
    for kind in [StateKind::Pbp, StateKind::Prm, StateKind::Prp] {
        if kind != StateKind::Pbp {
            specs.push(PolicySpec::new(kind, Vec::new()));
        }
        specs.extend(suffixes.iter().map(|s| PolicySpec::new(kind, s.clone())));
    }
    specs
}

pub fn compare(path: &Path, policies: &[String], out: Option<&Path>) -> CmdResult {
    if policies.is_empty() {
        return Err(Failure::Usage(
            "no policies given (e.g. `dso due rm rp pbp:2 prp:1,2` or `all`)".into(),
        ));
    }
    let inst = load(path)?;
    let specs = parse_policies(policies, inst.corridor.n_bottlenecks())?;
    let started = Instant::now();
    let cmp = compare_policies(&inst.corridor, &inst.schedule, &specs)?;

    let mut csv =
        String::from("policy,total_cost,revenue,pareto,max_rho_deviation,max_residual,error\n");
    let mut rows: Vec<[String; 5]> = Vec::new();
    for row in &cmp.rows {
        let label = row.spec.label();
        match &row.values {
            Ok(v) => {
                let _ = writeln!(
                    csv,
                    "\"{label}\",{},{},{},{},{},",
                    sig9(v.total_cost),
                    sig9(v.revenue),
                    v.pareto,
                    sig9(v.max_rho_deviation),
                    sig9(v.max_residual)
                );
                rows.push([
                    label,
                    format!("{:.6}", v.total_cost),
                    format!("{:.6}", v.revenue),
                    if v.pareto { "yes" } else { "no" }.into(),
                    format!("{:.1e}", v.max_residual),
                ]);
            }
            Err(e) => {
                let _ = writeln!(csv, "\"{label}\",,,,,,{}", e.code());
                rows.push([
                    label,
                    e.code().into(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }

    let header = ["policy", "Z", "revenue", "pareto", "residual"];
    let widths: Vec<usize> = (0..5)
        .map(|j| {
            rows.iter()
                .map(|r| r[j].len())
                .chain([header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: [&str; 5]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for j in 1..5 {
            let _ = write!(s, "  {:>w$}", cells[j], w = widths[j]);
        }
        s.trim_end().to_string() + "\n"
    };
    let mut text = line(header);
    for r in &rows {
        text.push_str(&line([&r[0], &r[1], &r[2], &r[3], &r[4]]));
    }
    text.push('\n');
    for o in &cmp.orderings {
        let _ = writeln!(text, "{}: {}", o.name, if o.pass { "PASS" } else { "FAIL" });
        let _ = writeln!(text, "  {}", o.detail);
    }
    print!("{text}");
    let dir = out_dir(out, &inst.config);
    for (name, contents) in [("compare.csv", &csv), ("compare.txt", &text)] {
        let path = write_file(&dir, name, contents)?;
        println!("wrote {}", path.display());
    }
    eprintln!(
        "time: compare {:.3} ms",
        started.elapsed().as_secs_f64() * 1e3
    );

    if let Some(row) = cmp.rows.iter().find(|r| r.values.is_err()) {
        let e = row.values.as_ref().unwrap_err();
        return Err(Failure::Check {
            code: e.code(),
            message: format!("{}: {e}", row.spec.label()),
        });
    }
    match cmp.orderings.iter().find(|o| !o.pass) {
        None => Ok(()),
        Some(o) => Err(Failure::Check {
            code: "OrderingViolated",
            message: format!("{} ({})", o.name, o.detail),
        }),
    }
}

pub fn fuzz(seed: u64, count: u64) -> CmdResult {
    let grid = SampleGrid {
        interior: 32,
        ..SampleGrid::default()
    };
    let tol = 1e-7;
    let started = Instant::now();
    let mut failures = 0;
    for s in seed..seed.saturating_add(count) {
        let inst = instance_from_seed(s);
        let n = inst.corridor.n_bottlenecks();
        let top = vec![n];
        let specs = [
            PolicySpec::full(StateKind::Dso),
            PolicySpec::full(StateKind::Due),
            PolicySpec::full(StateKind::Rm),
            PolicySpec::full(StateKind::Rp),
            PolicySpec::new(StateKind::Pbp, top.clone()),
            PolicySpec::new(StateKind::Prm, top.clone()),
            PolicySpec::new(StateKind::Prp, Vec::new()),
            PolicySpec::new(StateKind::Prp, top),
        ];
        let outcome = (|| -> Result<(), String> {
            let dso = solve_dso(&inst.corridor, &inst.schedule).map_err(|e| e.to_string())?;
            let r = residual_eval(&dso.state(), &grid);
            if let Some(f) = r.first_failure(tol) {
                return Err(format!("dso: {f}"));
            }
            let due = construct_due(&dso, &DueOptions::default()).map_err(|e| e.to_string())?;
            let r = residual_eval(&due.state, &grid);
            if let Some(f) = r.first_failure(tol) {
                return Err(format!("due: {f}"));
            }
            let cmp = compare_policies(&inst.corridor, &inst.schedule, &specs)
                .map_err(|e| e.to_string())?;
            for row in &cmp.rows {
                match &row.values {
                    Err(e) => return Err(format!("{}: {e}", row.spec.label())),
                    Ok(v) if v.max_residual > tol => {
                        return Err(format!(
                            "{}: residual {:.3e}",
                            row.spec.label(),
                            v.max_residual
                        ))
                    }
                    Ok(_) => {}
                }
            }
            match cmp.orderings.iter().find(|o| !o.pass) {
                Some(o) => Err(format!("ordering {} ({})", o.name, o.detail)),
                None => Ok(()),
            }
        })();
        if let Err(msg) = outcome {
            failures += 1;
            println!("seed {s} (N = {n}): FAIL {msg}");
        }
    }
    println!("fuzz: {count} instances from seed {seed}, {failures} failures");
    eprintln!("time: fuzz {:.3} ms", started.elapsed().as_secs_f64() * 1e3);
    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::Check {
            code: "FuzzFailure",
            message: format!("{failures} of {count} instances failed"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_parse() {
        assert_eq!(parse_subset("2, 3").unwrap(), vec![2, 3]);
        assert!(parse_subset("").unwrap().is_empty());
        assert!(matches!(parse_subset("x"), Err(Failure::Parse(_))));
    }

    #[test]
    fn policy_lists() {
        let items: Vec<String> = ["dso", "pbp:2", "prp:", "prp:1,2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let specs = parse_policies(&items, 2).unwrap();
        let labels: Vec<String> = specs.iter().map(PolicySpec::label).collect();
        assert_eq!(labels, ["dso", "pbp{2}", "prp{}", "prp{1,2}"]);
        assert!(matches!(
            parse_policies(&["pbp".to_string()], 2),
            Err(Failure::Usage(_))
        ));
        assert!(matches!(
            parse_policies(&["toll".to_string()], 2),
            Err(Failure::Parse(_))
        ));
    }

    #[test]
    fn all_expands_to_contiguous_subsets() {
        let labels: Vec<String> = all_policies(2).iter().map(PolicySpec::label).collect();
        assert_eq!(
            labels,
            [
                "dso", "due", "rm", "rp", "pbp{2}", "pbp{1,2}", "prm{}", "prm{2}", "prm{1,2}",
                "prp{}", "prp{2}", "prp{1,2}"
            ]
        );
    }
}
