use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use genflow::batch::{par_map, with_jobs};
use genflow::concave::solve_symmetric_concave;
use genflow::format::{parse_rational, FormatError, Instance};
use genflow::generate::{concave_instance, linear_instance, market_instance, Limits, MarketLimits};
use genflow::linear::solve_symmetric_linear;
use genflow::market::{
    feasibility_margin, recover_exact_adnb, solve_market, support_denominator, MarketError, MarketInstance, MarketMode,
};
use genflow::reference::{
    check_conservative_certificate, lp_reference_linear, pwl_discretize, solve_symmetric_lp, CertificateMode,
    ReferenceError,
};
use genflow::report::{trace_csv, MarketReport, Num, Settings, SolverReport, Status, Timing, VerifyReport};
use genflow::scalar::ratio_to_f64;
use genflow::sink::{solve_sink, solve_sink_linear, SinkOutcome};
use genflow::{NetworkError, Scalar, SolveError, SolveOptions};

use crate::{Cli, Command, Family, Reference};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INFEASIBLE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug)]
enum Failure {
    Input(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<NetworkError> for Failure {
    fn from(e: NetworkError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Internal(_) => Failure::Internal(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<MarketError> for Failure {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::Solve(s) => s.into(),
            MarketError::LabelBound { .. } | MarketError::Recovery(_) => Failure::Internal(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<ReferenceError> for Failure {
    fn from(e: ReferenceError) -> Self {
        match e {
            ReferenceError::SizeCap { .. } => Failure::Input(e.to_string()),
            ReferenceError::Lp(_) => Failure::Internal(e.to_string()),
        }
    }
}

type FileResult = Result<(SolverReport, u8), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn instance(path: &Path) -> Result<Instance, Failure> {
    Ok(Instance::parse(&read(path)?)?)
}

fn market(path: &Path) -> Result<MarketInstance, Failure> {
    Ok(MarketInstance::parse_json(&read(path)?)?)
}

fn settings(eps: Option<f64>, opts: SolveOptions) -> Option<Settings> {
    Some(Settings {
        eps,
        tolerances: opts.tolerances,
        check_invariants: opts.check_invariants,
    })
}

fn status_code(report: &SolverReport) -> u8 {
    if report.status == Status::Infeasible {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    }
}

fn solve_linear_file(path: &Path, certificate: bool, opts: SolveOptions) -> FileResult {
    let net = instance(path)?.to_linear()?;
    let sol = solve_symmetric_linear(&net, opts)?;
    let mut report = SolverReport::linear("solve-linear", &sol);
    report.settings = settings(None, opts);
    let mut code = EXIT_OK;
    if certificate {
        let verdict = check_conservative_certificate(&sol.flow, &sol.labels, &net, CertificateMode::Exact);
        if !verdict.passed() {
            code = EXIT_INTERNAL;
        }
        report.certificate = Some(verdict);
    }
    Ok((report, code))
}

fn solve_concave_file(path: &Path, eps: f64, opts: SolveOptions) -> FileResult {
    let net = instance(path)?.to_concave()?;
    let sol = solve_symmetric_concave(&net, eps, opts)?;
    let mut report = SolverReport::concave("solve-concave", &sol);
    report.settings = settings(Some(eps), opts);
    Ok((report, EXIT_OK))
}

fn solve_sink_file(path: &Path, sink: usize, eps: f64, ustar: Option<&str>, exact: bool, opts: SolveOptions) -> FileResult {
    let inst = instance(path)?;
    if sink == 0 || sink > inst.node_count() {
        return Err(Failure::Input(format!("sink {sink} out of range 1..={}", inst.node_count())));
    }
    let t = sink - 1;
    let ustar = ustar
        .map(|s| parse_rational(s).map_err(Failure::Input))
        .transpose()?;
    let (mut report, infeasible) = if exact {
        let net = inst.to_linear()?;
        match solve_sink_linear(&net, t, ustar, opts)? {
            SinkOutcome::Feasible(sol) => (SolverReport::linear("solve-sink", &sol.inner).with_sink(&sol), None),
            SinkOutcome::Infeasible { reason, partial } => {
                let base = match &partial {
                    Some(sol) => SolverReport::linear("solve-sink", &sol.inner).with_sink(sol),
                    None => SolverReport::new("solve-sink", Status::Infeasible, net.node_count(), net.arc_count()),
                };
                (base, Some(reason))
            }
        }
    } else {
        let net = inst.to_concave()?;
        let ustar = ustar.map(|u| u.to_f64());
        match solve_sink(&net, t, eps, ustar, opts)? {
            SinkOutcome::Feasible(sol) => (SolverReport::concave("solve-sink", &sol.inner).with_sink(&sol), None),
            SinkOutcome::Infeasible { reason, partial } => {
                let base = match &partial {
                    Some(sol) => SolverReport::concave("solve-sink", &sol.inner).with_sink(sol),
                    None => SolverReport::new("solve-sink", Status::Infeasible, net.node_count(), net.arc_count()),
                };
                (base, Some(reason))
            }
        }
    };
    if let Some(reason) = infeasible {
        report.status = Status::Infeasible;
        report.infeasible = Some(reason);
    }
    report.settings = settings((!exact).then_some(eps), opts);
    let code = status_code(&report);
    Ok((report, code))
}

fn market_file(path: &Path, mode: MarketMode, eps: f64, exact: bool, opts: SolveOptions) -> FileResult {
    let m = market(path)?;
    let command = match mode {
        MarketMode::Fisher => "fisher",
        MarketMode::Adnb => "adnb",
    };
    if exact && !m.is_linear() {
        return Err(Failure::Input("exact recovery needs linear utilities".into()));
    }
    let margin = if exact { Some(feasibility_margin(&m)?) } else { None };
    let sol = solve_market(&m, mode, eps, opts)?;
    let net = &sol.network.network;
    let mut report = match (&sol.sink, &sol.equilibrium) {
        (SinkOutcome::Feasible(s), Some(eq)) => {
            let mut r = SolverReport::concave(command, &s.inner).with_sink(s);
            if exact {
                let rec = recover_exact_adnb(&m, &eq.allocation)?;
                let mut mr = MarketReport::new(&m, mode, &rec, true);
                mr.common_denominator = Some(support_denominator(&rec).to_string());
                r.market = Some(mr);
                r.status = Status::Optimal;
            } else {
                r.market = Some(MarketReport::new(&m, mode, eq, false));
            }
            r
        }
        (SinkOutcome::Infeasible { reason, partial }, _) => {
            let mut r = match partial {
                Some(s) => SolverReport::concave(command, &s.inner).with_sink(s),
                None => SolverReport::new(command, Status::Infeasible, net.node_count(), net.arc_count()),
            };
            r.status = Status::Infeasible;
            r.infeasible = Some(reason.clone());
            r
        }
        (SinkOutcome::Feasible(_), None) => return Err(Failure::Internal("feasible solve without equilibrium".into())),
    };
    if let Some(margin) = margin {
        let positive = Scalar::is_positive(&margin);
        if positive == (report.status == Status::Infeasible) {
            return Err(Failure::Internal(format!(
                "solver verdict disagrees with the feasibility LP (margin {margin})"
            )));
        }
        if let Some(mr) = report.market.as_mut() {
            mr.feasibility_margin = Some(Num::exact(&margin));
        }
    }
    report.settings = settings(Some(eps), opts);
    let code = status_code(&report);
    Ok((report, code))
}

fn verify_file(path: &Path, against: Reference, segments: usize, eps: f64, clip: f64, opts: SolveOptions) -> FileResult {
    let inst = instance(path)?;
    match against {
        Reference::Lp => {
            let net = inst.to_linear()?;
            let sol = solve_symmetric_linear(&net, opts)?;
            let lp = lp_reference_linear(&net)?;
            let matched = sol.kappa == lp.kappa;
            let mut report = SolverReport::linear("verify", &sol);
            report.verify = Some(VerifyReport {
                against: "lp".into(),
                outcome: if matched { "match" } else { "mismatch" }.into(),
                solver_kappa: Num::exact(&sol.kappa),
                reference_kappa: Num::exact(&lp.kappa),
                gap: None,
                segments: None,
            });
            Ok((report, if matched { EXIT_OK } else { EXIT_INTERNAL }))
        }
        Reference::Pwl => {
            if segments == 0 {
                return Err(Failure::Input("--segments must be at least 1".into()));
            }
            let net = inst.to_concave()?;
            let sol = solve_symmetric_concave(&net, eps, opts)?;
            let d = pwl_discretize(&net, segments, clip)?;
            let lp = ratio_to_f64(&solve_symmetric_lp(&d.network)?.kappa);
            let matched = sol.kappa <= lp + eps && sol.kappa >= lp - d.gap - eps;
            let mut report = SolverReport::concave("verify", &sol);
            report.verify = Some(VerifyReport {
                against: "pwl".into(),
                outcome: if matched { "match" } else { "mismatch" }.into(),
                solver_kappa: Num::Float(sol.kappa),
                reference_kappa: Num::Float(lp),
                gap: Some(d.gap),
                segments: Some(segments),
            });
            report.settings = settings(Some(eps), opts);
            Ok((report, if matched { EXIT_OK } else { EXIT_INTERNAL }))
        }
    }
}

fn generate(family: Family, seed: u64) -> (String, &'static str) {
    match family {
        Family::Linear => (linear_instance(seed, Limits::LINEAR).write(), "cgf"),
        Family::Concave => (concave_instance(seed, Limits::CONCAVE).write(), "cgf"),
        Family::Fisher => (market_instance(seed, MarketLimits::FISHER).to_json() + "\n", "json"),
        Family::Adnb => (market_instance(seed, MarketLimits::ADNB).to_json() + "\n", "json"),
    }
}

fn run_gen(family: Family, seed: u64, count: Option<u64>, out: Option<PathBuf>) -> u8 {
    let Some(count) = count else {
        print!("{}", generate(family, seed).0);
        return EXIT_OK;
    };
    let Some(dir) = out else {
        eprintln!("error: --count needs --out <dir>");
        return EXIT_INPUT;
    };
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_INPUT;
    }
    let name = format!("{family:?}").to_lowercase();
    for s in seed..seed + count {
        let (text, ext) = generate(family, s);
        let path = dir.join(format!("{name}-{s:04}.{ext}"));
        if let Err(e) = fs::write(&path, text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_INPUT;
        }
    }
    EXIT_OK
}

fn write_trace(target: &Option<PathBuf>, files: &[PathBuf], results: &[FileResult]) -> Result<(), String> {
    let mut text = String::new();
    for (path, res) in files.iter().zip(results) {
        if let Ok((report, _)) = res {
            if files.len() > 1 {
                text.push_str(&format!("# {}\n", path.display()));
            }
            text.push_str(&trace_csv(&report.phases));
        }
    }
    match target {
        Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> u8 {
    let opts = SolveOptions {
        check_invariants: cli.check_invariants,
        ..SolveOptions::default()
    };
    let trace = match &cli.command {
        Command::SolveConcave { trace, .. } => trace.clone(),
        _ => None,
    };
    let (files, job): (Vec<PathBuf>, Box<dyn Fn(&Path) -> FileResult + Sync + Send>) = match cli.command {
        Command::Gen { family, seed, count, out } => return run_gen(family, seed, count, out),
        Command::SolveLinear { files, certificate } => (files, Box::new(move |p| solve_linear_file(p, certificate, opts))),
        Command::SolveConcave { files, eps, .. } => (files, Box::new(move |p| solve_concave_file(p, eps, opts))),
        Command::SolveSink {
            files,
            sink,
            eps,
            ustar,
            exact,
        } => (
            files,
            Box::new(move |p| solve_sink_file(p, sink, eps, ustar.as_deref(), exact, opts)),
        ),
        Command::Fisher { files, eps, exact } => (files, Box::new(move |p| market_file(p, MarketMode::Fisher, eps, exact, opts))),
        Command::Adnb { files, eps, exact } => (files, Box::new(move |p| market_file(p, MarketMode::Adnb, eps, exact, opts))),
        Command::Verify {
            files,
            against,
            segments,
            eps,
            clip,
        } => (
            files,
            Box::new(move |p| verify_file(p, against, segments, eps, clip, opts)),
        ),
    };
    let timing = cli.timing;
    let timed = |p: &PathBuf| {
        let start = Instant::now();
        job(p).map(|(mut report, code)| {
            if timing {
                report.timing = Some(Timing {
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
            (report, code)
        })
    };
    let results = if files.len() == 1 {
        vec![timed(&files[0])]
    } else {
        with_jobs(cli.jobs, || par_map(&files, timed))
    };
    let mut code = EXIT_OK;
    let mut reports = Vec::new();
    for (path, res) in files.iter().zip(&results) {
        match res {
            Ok((report, c)) => {
                code = code.max(*c);
                reports.push(report);
            }
            Err(f) => {
                eprintln!("error: {}: {}", path.display(), f.message());
                code = code.max(f.code());
            }
        }
    }
    if let Some(target) = &trace {
        if let Err(e) = write_trace(target, &files, &results) {
            eprintln!("error: {e}");
            code = code.max(EXIT_INPUT);
        }
    }
    let text = match reports.as_slice() {
        [] => String::new(),
        [one] if files.len() == 1 => one.to_json(),
        many => serde_json::to_string_pretty(many).expect("reports serialize") + "\n",
    };
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    code
}
