//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::time::Instant;

use genflow::batch::par_map;
use genflow::concave::{solve_symmetric_concave, ConcaveSolution};
use genflow::generate::{concave_instance, linear_instance, market_instance, Limits, MarketLimits};
use genflow::linear::{solve_symmetric_linear, LinearSolution};
use genflow::market::{
    feasibility_margin, kkt_check, recover_exact_adnb, solve_market, support_denominator, MarketInstance, MarketMode,
};
use genflow::reference::{check_conservative_certificate, lp_reference_linear, pwl_discretize, solve_symmetric_lp, CertificateMode};
use genflow::scalar::{integer, ratio_to_f64, rational};
use genflow::sink::SinkOutcome;
use genflow::{Label, LinearNetwork, PhaseStats, SolveOptions};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

const LINEAR_COUNT: u64 = 200;
const CONCAVE_COUNT: u64 = 50;
const ADNB_COUNT: u64 = 30;
const CONCAVE_EPS: f64 = 1e-4;
/// Float tolerance on per-arc adjust changes: absolute below 1, relative above.
const TAU: f64 = 1e-12;
const MARKET_EPS: f64 = 1e-7;

struct Line {
    id: usize,
    name: &'static str,
    ok: bool,
    detail: String,
    secs: f64,
}

struct Corpus {
    linear: Vec<(LinearNetwork, LinearSolution)>,
    linear_time: f64,
    concave: Vec<ConcaveSolution>,
    /// `(n, m)` per concave run, for recomputing bounds.
    concave_phases: Vec<(&'static str, Vec<PhaseStats>)>,
}

fn linear_corpus() -> (Vec<(LinearNetwork, LinearSolution)>, f64) {
    let t = Instant::now();
    let seeds: Vec<u64> = (0..LINEAR_COUNT).collect();
    let out = par_map(&seeds, |&s| {
        let net = linear_instance(s, Limits::LINEAR).to_linear().expect("valid");
        let sol = solve_symmetric_linear(&net, SolveOptions::default()).expect("linear solve");
        (net, sol)
    });
    (out, t.elapsed().as_secs_f64())
}

fn c1_exact_lp(c: &Corpus) -> Line {
    let t = Instant::now();
    let checks = par_map(&c.linear, |(net, sol)| lp_reference_linear(net).map(|lp| lp.kappa == sol.kappa));
    let mut bad = Vec::new();
    for (s, r) in checks.iter().enumerate() {
        match r {
            Ok(true) => {}
            Ok(false) => bad.push(format!("seed {s}: κ differs")),
            Err(e) => bad.push(format!("seed {s}: {e}")),
        }
    }
    let secs = t.elapsed().as_secs_f64() + c.linear_time;
    Line {
        id: 1,
        name: "exact linear equivalence",
        ok: bad.is_empty() && secs < 60.0,
        detail: format!("{}/{} exact matches, {:.1}s (< 60s)", c.linear.len() - bad.len(), c.linear.len(), secs)
            + &bad.first().map(|b| format!("; {b}")).unwrap_or_default(),
        secs,
    }
}

fn all_phases(c: &Corpus) -> impl Iterator<Item = (&str, &PhaseStats)> {
    c.linear
        .iter()
        .flat_map(|(_, s)| s.phases.iter().map(|p| ("linear", p)))
        .chain(c.concave_phases.iter().flat_map(|(k, ps)| ps.iter().map(move |p| (*k, p))))
}

fn c2_iterations(c: &Corpus) -> Line {
    let t = Instant::now();
    let (mut total, mut bad, mut worst) = (0usize, 0usize, 0.0f64);
    for (_, p) in all_phases(c) {
        total += 1;
        if p.augmentations > p.augmentation_bound {
            bad += 1;
        }
        worst = worst.max(p.augmentations as f64 / p.augmentation_bound as f64);
    }
    Line {
        id: 2,
        name: "phase augmentations <= 2n+3m",
        ok: bad == 0,
        detail: format!("{bad} violations over {total} phases, max ratio {worst:.3}"),
        secs: t.elapsed().as_secs_f64(),
    }
}

fn c3_start_excess(c: &Corpus) -> Line {
    let t = Instant::now();
    let (mut total, mut bad, mut worst) = (0usize, 0usize, 0.0f64);
    for (_, p) in all_phases(c) {
        total += 1;
        if !p.start_bound_ok {
            bad += 1;
        }
        worst = worst.max(p.ex_start / (p.augmentation_bound as f64 * p.delta));
    }
    Line {
        id: 3,
        name: "phase-start Ex_Δ <= (2n+3m)Δ",
        ok: bad == 0,
        detail: format!("{bad} violations over {total} phase starts, max ratio {worst:.3}"),
        secs: t.elapsed().as_secs_f64(),
    }
}

fn c4_adjust(c: &Corpus) -> Line {
    let t = Instant::now();
    let (mut total, mut bad) = (0usize, 0usize);
    let mut notes = Vec::new();
    for (kind, p) in all_phases(c) {
        total += 1;
        if !p.adjust_bound_ok {
            bad += 1;
            notes.push(format!("{kind} phase {}: excess growth", p.phase));
        }
        let cap = p.delta / 2.0 + TAU * (p.delta / 2.0).max(1.0);
        if !p.per_arc_ok || p.max_flow_change > cap || p.max_gain_change > cap {
            bad += 1;
            notes.push(format!("{kind} phase {}: per-arc change over Δ/2 by {:.2e}/{:.2e} (Δ = {:.2e})", p.phase, p.max_flow_change - p.delta / 2.0, p.max_gain_change - p.delta / 2.0, p.delta));
        }
    }
    // final adjust(Δ, 0) of the linear solver: 3m(Δ - 0)
    let mut finals = 0;
    for (net, sol) in &c.linear {
        let f = &sol.final_adjust;
        let cap = integer(3 * net.arc_count() as i64) * f.delta.clone();
        finals += 1;
        if f.ex_after.clone() - f.ex_before.clone() > cap {
            bad += 1;
            notes.push("final linear adjust".into());
        }
    }
    Line {
        id: 4,
        name: "adjust bounds",
        ok: bad == 0,
        detail: format!("{bad} violations over {total} halving adjusts and {finals} final adjusts")
            + &notes.iter().map(|b| format!("; {b}")).collect::<String>(),
        secs: t.elapsed().as_secs_f64(),
    }
}

fn c5_phase_count(c: &Corpus) -> Line {
    let t = Instant::now();
    let bad: Vec<_> = c.concave.iter().filter(|s| s.phase_count() > s.phase_limit).collect();
    let worst = c
        .concave
        .iter()
        .map(|s| s.phase_count() as f64 / s.phase_limit as f64)
        .fold(0.0, f64::max);
    Line {
        id: 5,
        name: "concave phase count <= ⌈log₂((MU+1)(2n+3m)/ε)⌉+1",
        ok: bad.is_empty(),
        detail: format!("{} violations over {} concave runs, max count/limit {worst:.3}", bad.len(), c.concave.len()),
        secs: t.elapsed().as_secs_f64(),
    }
}

fn c6_sandwich() -> (Line, Vec<ConcaveSolution>) {
    let t = Instant::now();
    let seeds: Vec<u64> = (0..CONCAVE_COUNT).collect();
    let rows = par_map(&seeds, |&s| {
        let net = concave_instance(s, Limits::CONCAVE).to_concave().expect("valid");
        let sol = solve_symmetric_concave(&net, CONCAVE_EPS, SolveOptions::default()).expect("concave solve");
        let d = pwl_discretize(&net, 64, 1e-4).expect("discretize");
        let lp = ratio_to_f64(&solve_symmetric_lp(&d.network).expect("lp").kappa);
        let ok = sol.kappa <= lp + CONCAVE_EPS && sol.kappa >= lp - d.gap - CONCAVE_EPS;
        (s, ok, sol, lp, d.gap)
    });
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.1)
        .map(|(s, _, sol, lp, gap)| format!("seed {s}: κ={} lp={lp} gap={gap}", sol.kappa))
        .collect();
    let nonzero = rows.iter().filter(|r| r.3 > 1e-9).count();
    let max_gap = rows.iter().map(|r| r.4).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    let line = Line {
        id: 6,
        name: "ε-approximation sandwich against pwl LP (k = 64)",
        ok: bad.is_empty() && secs < 300.0,
        detail: format!(
            "{}/{} within [lp - gap - ε, lp + ε], {nonzero} with nonzero optimum, max gap {max_gap:.2e}, {secs:.1}s (< 300s)",
            rows.len() - bad.len(),
            rows.len()
        ) + &bad.first().map(|b| format!("; {b}")).unwrap_or_default(),
        secs,
    };
    (line, rows.into_iter().map(|r| r.2).collect())
}

fn market(budgets: Vec<i64>, goods: usize, utilities: &[(usize, usize, i64)]) -> MarketInstance {
    let n = budgets.len();
    MarketInstance::linear(budgets, vec![0; n], goods, utilities).expect("valid market")
}

fn c7_fisher(extra: &mut Vec<(&'static str, Vec<PhaseStats>)>, runs: &mut Vec<ConcaveSolution>) -> Line {
    let t = Instant::now();
    let mut notes = Vec::new();
    let m = market(vec![1, 2], 1, &[(0, 0, 1), (1, 0, 1)]);
    let sol = solve_market(&m, MarketMode::Fisher, MARKET_EPS, SolveOptions::default()).expect("fisher");
    let eq = sol.equilibrium.clone().expect("feasible");
    let close = (eq.prices[0] - 3.0).abs() <= 1e-6
        && (eq.allocation[0] - 1.0 / 3.0).abs() <= 1e-6
        && (eq.allocation[1] - 2.0 / 3.0).abs() <= 1e-6;
    if !close {
        notes.push(format!("2x1: p={:?} x={:?}", eq.prices, eq.allocation));
    }
    if let SinkOutcome::Feasible(s) = &sol.sink {
        extra.push(("fisher", s.inner.phases.clone()));
        runs.push(s.inner.clone());
    }
    let mut exact_ok = 0;
    for budget in 1..=5 {
        for u in [1, 2, 5] {
            let m = market(vec![budget], 1, &[(0, 0, u)]);
            let sol = solve_market(&m, MarketMode::Fisher, MARKET_EPS, SolveOptions::default()).expect("fisher");
            let eq = sol.equilibrium.expect("feasible");
            match recover_exact_adnb(&m, &eq.allocation) {
                Ok(r) if r.prices == vec![integer(budget)] && r.allocation == vec![integer(1)] => exact_ok += 1,
                other => notes.push(format!("1x1 m={budget} U={u}: {other:?}")),
            }
        }
    }
    Line {
        id: 7,
        name: "Fisher closed forms",
        ok: notes.is_empty(),
        detail: format!(
            "2x1 budgets (1,2): p={:.9}, x=({:.9}, {:.9}); 1x1 exact p=m in {exact_ok}/15",
            eq.prices[0], eq.allocation[0], eq.allocation[1]
        ) + &notes.first().map(|b| format!("; {b}")).unwrap_or_default(),
        secs: t.elapsed().as_secs_f64(),
    }
}

fn k_pow_n(m: &MarketInstance) -> BigInt {
    let u_max = m.u_max() as i64;
    let k = BigInt::from(m.n() as i64 * m.r_max() * u_max);
    num_traits::pow(k, m.n())
}

fn c8_adnb(extra: &mut Vec<(&'static str, Vec<PhaseStats>)>, runs: &mut Vec<ConcaveSolution>) -> Line {
    let t = Instant::now();
    let (mut feasible, mut infeasible) = (0, 0);
    let mut notes = Vec::new();
    let mut worst_den = 0.0f64;
    for seed in 0..ADNB_COUNT {
        let m = market_instance(seed, MarketLimits::ADNB);
        let margin = feasibility_margin(&m).expect("feasibility LP");
        let sol = match solve_market(&m, MarketMode::Adnb, MARKET_EPS, SolveOptions::default()) {
            Ok(s) => s,
            Err(e) => {
                notes.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        if let Some(s) = sol.sink.feasible() {
            extra.push(("adnb", s.inner.phases.clone()));
            runs.push(s.inner.clone());
        }
        match (&sol.sink, sol.equilibrium) {
            (SinkOutcome::Infeasible { .. }, _) => {
                if margin.is_positive() {
                    notes.push(format!("seed {seed}: Infeasible verdict but LP margin {margin}"));
                } else {
                    infeasible += 1;
                }
            }
            (SinkOutcome::Feasible(_), Some(eq)) => {
                if !margin.is_positive() {
                    notes.push(format!("seed {seed}: feasible verdict but LP margin {margin}"));
                    continue;
                }
                match recover_exact_adnb(&m, &eq.allocation) {
                    Ok(r) => {
                        let recheck = kkt_check(&m, &r.prices, &r.allocation, 0.0);
                        let den = support_denominator(&r);
                        let bound = k_pow_n(&m);
                        worst_den = worst_den.max(ratio_to_f64(&BigRational::new(den.clone(), bound.clone())));
                        if !recheck.exact {
                            notes.push(format!("seed {seed}: nonzero KKT residual {recheck:?}"));
                        } else if den > bound {
                            notes.push(format!("seed {seed}: denominator {den} > K^n = {bound}"));
                        } else {
                            feasible += 1;
                        }
                    }
                    Err(e) => notes.push(format!("seed {seed}: {e}")),
                }
            }
            (SinkOutcome::Feasible(_), None) => notes.push(format!("seed {seed}: missing equilibrium")),
        }
    }
    Line {
        id: 8,
        name: "ADNB exact recovery",
        ok: notes.is_empty() && infeasible > 0,
        detail: format!(
            "{feasible} exact zero-residual equilibria, {infeasible} infeasible verdicts confirmed by LP, of {ADNB_COUNT}; max denominator/K^n {worst_den:.2e}"
        ) + &notes.first().map(|b| format!("; {b}")).unwrap_or_default(),
        secs: t.elapsed().as_secs_f64(),
    }
}

fn c9_linear_as_concave(c: &Corpus, extra: &mut Vec<(&'static str, Vec<PhaseStats>)>, runs: &mut Vec<ConcaveSolution>) -> Line {
    let t = Instant::now();
    let seeds: Vec<u64> = (0..LINEAR_COUNT).collect();
    let sols = par_map(&seeds, |&s| {
        let net = linear_instance(s, Limits::LINEAR).to_concave().expect("valid");
        solve_symmetric_concave(&net, 1e-9, SolveOptions::default()).expect("concave solve")
    });
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (s, (sol, (_, exact))) in sols.iter().zip(&c.linear).enumerate() {
        let diff = (sol.kappa - ratio_to_f64(&exact.kappa)).abs();
        worst = worst.max(diff);
        if diff > 1e-8 {
            bad.push(format!("seed {s}: |Δκ| = {diff:.2e}"));
        }
    }
    for sol in sols {
        extra.push(("linear-as-concave", sol.phases.clone()));
        runs.push(sol);
    }
    Line {
        id: 9,
        name: "linear-as-concave consistency (ε = 1e-9)",
        ok: bad.is_empty(),
        detail: format!("{}/{} within 1e-8, max |Δκ| {worst:.2e}", LINEAR_COUNT as usize - bad.len(), LINEAR_COUNT)
            + &bad.first().map(|b| format!("; {b}")).unwrap_or_default(),
        secs: t.elapsed().as_secs_f64(),
    }
}

/// Mutations that no valid certificate survives.
fn mutations(net: &LinearNetwork, sol: &LinearSolution) -> Vec<(&'static str, Vec<BigRational>, Vec<Label<BigRational>>)> {
    let mut out = Vec::new();
    let n = net.node_count();
    let floor = |i: usize| integer(1) / net.node(i).penalty.clone();
    // label below its floor
    if let Some(i) = (0..n).find(|&i| sol.labels[i].finite().is_some()) {
        let mut l = sol.labels.clone();
        l[i] = Label::Finite(floor(i) / integer(2));
        out.push(("label below 1/M", sol.flow.clone(), l));
    }
    // deficit node raised above its floor, or made infinite
    if let Some(i) = (0..n).find(|&i| sol.excess[i].is_negative()) {
        let mut l = sol.labels.clone();
        l[i] = Label::Finite(floor(i) * integer(2));
        out.push(("deficit label raised", sol.flow.clone(), l));
        let mut l = sol.labels.clone();
        l[i] = Label::Infinite;
        out.push(("deficit label infinite", sol.flow.clone(), l));
    }
    // flow outside its bounds
    if net.arc_count() > 0 {
        let mut f = sol.flow.clone();
        f[0] = net.arc(0).upper.clone() + integer(1);
        out.push(("flow above capacity", f, sol.labels.clone()));
    }
    // flow shifted at a node whose finite interior label forces zero excess
    for i in 0..n {
        let Some(mu) = sol.labels[i].finite() else { continue };
        if *mu <= floor(i) {
            continue;
        }
        let arc = (0..net.arc_count()).find(|&a| {
            let e = net.arc(a);
            (e.tail == i || e.head == i) && e.upper > e.lower
        });
        if let Some(a) = arc {
            let e = net.arc(a);
            let step = (e.upper.clone() - e.lower.clone()) / integer(7);
            let mut f = sol.flow.clone();
            f[a] = if f[a] < e.upper { f[a].clone() + step.min(e.upper.clone() - f[a].clone()) } else { f[a].clone() - step };
            out.push(("flow shifted at interior node", f, sol.labels.clone()));
            break;
        }
    }
    out
}

fn c10_certificates(c: &Corpus) -> Line {
    let t = Instant::now();
    let mut failed_clean = Vec::new();
    let (mut applied, mut rejected) = (0, 0);
    let mut survivors = Vec::new();
    for (s, (net, sol)) in c.linear.iter().enumerate() {
        let v = check_conservative_certificate(&sol.flow, &sol.labels, net, CertificateMode::Exact);
        if !v.passed() {
            failed_clean.push(format!("seed {s}: {:?}", v.violations.first()));
        }
        for (kind, f, l) in mutations(net, sol) {
            applied += 1;
            if check_conservative_certificate(&f, &l, net, CertificateMode::Exact).passed() {
                survivors.push(format!("seed {s}: {kind}"));
            } else {
                rejected += 1;
            }
        }
    }
    // a hand-made perturbation on a known optimum: node 1 has a deficit
    let net = genflow::format::Instance::parse("p cgf 2 1\nn 1 1 1\nn 2 1 4\na 1 2 0 10 lin 3\n")
        .unwrap()
        .to_linear()
        .unwrap();
    let sol = solve_symmetric_linear(&net, SolveOptions::default()).unwrap();
    let mut l = sol.labels.clone();
    l[0] = Label::Finite(rational(3, 2));
    applied += 1;
    if check_conservative_certificate(&sol.flow, &l, &net, CertificateMode::Exact).passed() {
        survivors.push("hand instance: μ raised on deficit node".into());
    } else {
        rejected += 1;
    }
    let _ = Zero::is_zero(&sol.kappa);
    Line {
        id: 10,
        name: "certificate checks",
        ok: failed_clean.is_empty() && survivors.is_empty(),
        detail: format!(
            "{}/{} optimal solutions certified, {rejected}/{applied} mutations rejected",
            c.linear.len() - failed_clean.len(),
            c.linear.len()
        ) + &failed_clean.first().or(survivors.first()).map(|b| format!("; {b}")).unwrap_or_default(),
        secs: t.elapsed().as_secs_f64(),
    }
}

fn main() {
    let (linear, linear_time) = linear_corpus();
    let mut corpus = Corpus {
        linear,
        linear_time,
        concave: Vec::new(),
        concave_phases: Vec::new(),
    };
    let mut lines = Vec::new();
    lines.push(c1_exact_lp(&corpus));
    let (l6, concave_runs) = c6_sandwich();
    for s in &concave_runs {
        corpus.concave_phases.push(("concave", s.phases.clone()));
    }
    corpus.concave.extend(concave_runs);
    let (mut extra, mut runs) = (Vec::new(), Vec::new());
    let l7 = c7_fisher(&mut extra, &mut runs);
    let l8 = c8_adnb(&mut extra, &mut runs);
    let l9 = c9_linear_as_concave(&corpus, &mut extra, &mut runs);
    corpus.concave_phases.extend(extra);
    corpus.concave.extend(runs);
    lines.push(c2_iterations(&corpus));
    lines.push(c3_start_excess(&corpus));
    lines.push(c4_adjust(&corpus));
    lines.push(c5_phase_count(&corpus));
    lines.extend([l6, l7, l8, l9]);
    lines.push(c10_certificates(&corpus));
    lines.sort_by_key(|l| l.id);

    println!("acceptance: {} criteria", lines.len());
    for l in &lines {
        println!(
            "criterion {:>2} {} {} ({:.2}s): {}",
            l.id,
            if l.ok { "PASS" } else { "FAIL" },
            l.name,
            l.secs,
            l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.ok).count();
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
