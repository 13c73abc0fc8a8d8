//! Versioned JSON reports and per-phase CSV traces.
//!
//! Exact values are written as `"p/q"` strings, floats as JSON numbers and
//! infinite labels as `"inf"`, so a report parses back to the same values.

use std::fmt::Write as _;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::concave::ConcaveSolution;
use crate::format::parse_rational;
use crate::linear::LinearSolution;
use crate::market::{Equilibrium, MarketInstance};
use crate::reference::Verdict;
use crate::scalar::{Label, Scalar};
use crate::scaling::{InvariantLog, PhaseStats, Tolerances};
use crate::sink::{InfeasibleReason, SinkSolution};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Float(f64),
    Text(String),
}

impl Num {
    pub fn exact(r: &BigRational) -> Self {
        Num::Text(if r.is_integer() { r.numer().to_string() } else { r.to_string() })
    }

    pub fn label<S: Scalar + IntoNum>(l: &Label<S>) -> Self {
        match l {
            Label::Finite(v) => v.to_num(),
            Label::Infinite => Num::Text("inf".into()),
        }
    }

    /// Exact value, when the entry is a rational string or a float.
    pub fn to_ratio(&self) -> Option<BigRational> {
        match self {
            Num::Float(v) => BigRational::from_float(*v),
            Num::Text(s) => parse_rational(s).ok(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Num::Float(v) => *v,
            Num::Text(s) if s == "inf" => f64::INFINITY,
            Num::Text(s) => parse_rational(s).map(|r| r.to_f64()).unwrap_or(f64::NAN),
        }
    }
}

pub trait IntoNum {
    fn to_num(&self) -> Num;
}

impl IntoNum for f64 {
    fn to_num(&self) -> Num {
        Num::Float(*self)
    }
}

impl IntoNum for BigRational {
    fn to_num(&self) -> Num {
        Num::exact(self)
    }
}

fn nums<S: IntoNum>(v: &[S]) -> Vec<Num> {
    v.iter().map(IntoNum::to_num).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Exact optimum (linear solver).
    Optimal,
    /// ε-approximate solution.
    Approximate,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub tolerances: Tolerances,
    pub check_invariants: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkReport {
    /// 1-based node id.
    pub sink: usize,
    pub ustar: Num,
    pub penalty: Num,
    pub sink_shift: Num,
    pub sink_excess: Num,
    pub sink_excess_from_kappa: Num,
    pub other_deficit: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub buyer: String,
    pub good: String,
    pub amount: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketReport {
    pub mode: crate::market::MarketMode,
    pub exact: bool,
    pub prices: Vec<(String, Num)>,
    pub allocation: Vec<AllocationEntry>,
    pub utility: Vec<(String, Num)>,
    pub kkt: crate::market::KktReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub common_denominator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility_margin: Option<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_ms: f64,
}

/// Everything a subcommand prints, in one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub schema: u32,
    pub command: String,
    pub status: Status,
    pub nodes: usize,
    pub arcs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Num>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flow: Vec<Num>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<Num>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excess: Vec<Num>,
    pub phase_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<PhaseStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariants: Option<InvariantLog>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<InfeasibleReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sink: Option<SinkReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settings: Option<Settings>,
    /// Wall time, the only nondeterministic field. Omitted unless requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub against: String,
    /// `"match"` or `"mismatch"`.
    pub outcome: String,
    pub solver_kappa: Num,
    pub reference_kappa: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
}

impl SolverReport {
    pub fn new(command: &str, status: Status, nodes: usize, arcs: usize) -> Self {
        Self {
            schema: SCHEMA,
            command: command.into(),
            status,
            nodes,
            arcs,
            kappa: None,
            flow: Vec::new(),
            labels: Vec::new(),
            excess: Vec::new(),
            phase_count: 0,
            phase_limit: None,
            phases: Vec::new(),
            invariants: None,
            certificate: None,
            infeasible: None,
            sink: None,
            market: None,
            verify: None,
            settings: None,
            timing: None,
        }
    }

    pub fn linear(command: &str, sol: &LinearSolution) -> Self {
        let mut r = Self::new(command, Status::Optimal, sol.excess.len(), sol.flow.len());
        r.kappa = Some(Num::exact(&sol.kappa));
        r.flow = nums(&sol.flow);
        r.labels = sol.labels.iter().map(Num::label).collect();
        r.excess = nums(&sol.excess);
        r.phase_count = sol.phases.len();
        r.phases = sol.phases.clone();
        r.invariants = Some(sol.log.clone());
        r
    }

    pub fn concave(command: &str, sol: &ConcaveSolution) -> Self {
        let mut r = Self::new(command, Status::Approximate, sol.excess.len(), sol.flow.len());
        r.kappa = Some(Num::Float(sol.kappa));
        r.flow = nums(&sol.flow);
        r.labels = nums(&sol.labels);
        r.excess = nums(&sol.excess);
        r.phase_count = sol.phases.len();
        r.phase_limit = Some(sol.phase_limit);
        r.phases = sol.phases.clone();
        r.invariants = Some(sol.log.clone());
        r
    }

    /// Wraps an inner report with the sink interpretation. Flow and excess
    /// are taken from the sink solution (original scale).
    pub fn with_sink<S: Scalar + IntoNum, R>(mut self, sol: &SinkSolution<S, R>) -> Self {
        self.flow = nums(&sol.flow);
        self.excess = nums(&sol.excess);
        self.kappa = Some(sol.kappa.to_num());
        self.sink = Some(SinkReport {
            sink: sol.sink + 1,
            ustar: sol.ustar.to_num(),
            penalty: sol.penalty.to_num(),
            sink_shift: sol.sink_shift.to_num(),
            sink_excess: sol.sink_excess.to_num(),
            sink_excess_from_kappa: sol.sink_excess_from_kappa.to_num(),
            other_deficit: sol.other_deficit.to_num(),
        });
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl MarketReport {
    pub fn new<S: Scalar + IntoNum>(market: &MarketInstance, mode: crate::market::MarketMode, eq: &Equilibrium<S>, exact: bool) -> Self {
        Self {
            mode,
            exact,
            prices: market.good_ids.iter().cloned().zip(nums(&eq.prices)).collect(),
            allocation: market
                .pairs
                .iter()
                .zip(&eq.allocation)
                .map(|(p, x)| AllocationEntry {
                    buyer: market.buyer_ids[p.buyer].clone(),
                    good: market.good_ids[p.good].clone(),
                    amount: x.to_num(),
                })
                .collect(),
            utility: market.buyer_ids.iter().cloned().zip(nums(&eq.utility)).collect(),
            kkt: eq.kkt.clone(),
            common_denominator: None,
            feasibility_margin: None,
        }
    }
}

/// Per-phase CSV: Δ, Ex_Δ at phase start and end, augmentations and κ.
pub fn trace_csv(phases: &[PhaseStats]) -> String {
    let mut out = String::from("phase,delta,ex_start,augmentations,ex_end,ex_after_adjust,adjusted_arcs,kappa\n");
    for p in phases {
        writeln!(
            out,
            "{},{:e},{:e},{},{:e},{:e},{},{:e}",
            p.phase, p.delta, p.ex_start, p.augmentations, p.ex_end, p.ex_after_adjust, p.adjusted_arcs, p.kappa
        )
        .expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::Instance;
    use crate::linear::solve_symmetric_linear;
    use crate::reference::{check_conservative_certificate, CertificateMode};
    use crate::scalar::rational;
    use crate::SolveOptions;

    const TEXT: &str = "p cgf 3 2\nn 1 -2 3\nn 2 0 1\nn 3 1 2\na 1 2 0 4 lin 1/2\na 2 3 0 5 lin 3\n";

    #[test]
    fn linear_report_round_trips() {
        let inst = Instance::parse(TEXT).unwrap();
        let net = inst.to_linear().unwrap();
        let sol = solve_symmetric_linear(&net, SolveOptions::default()).unwrap();
        let mut rep = SolverReport::linear("solve-linear", &sol);
        rep.certificate = Some(check_conservative_certificate(&sol.flow, &sol.labels, &net, CertificateMode::Exact));
        let text = rep.to_json();
        let back = SolverReport::from_json(&text).unwrap();
        assert_eq!(back, rep);
        assert_eq!(back.kappa.unwrap().to_ratio().unwrap(), sol.kappa);
        for (a, b) in back.flow.iter().zip(&sol.flow) {
            assert_eq!(&a.to_ratio().unwrap(), b);
        }
    }

    #[test]
    fn numbers_keep_their_form() {
        assert_eq!(Num::exact(&rational(6, 3)), Num::Text("2".into()));
        assert_eq!(Num::exact(&rational(-1, 3)), Num::Text("-1/3".into()));
        assert_eq!(Num::label::<f64>(&Label::Infinite).to_f64(), f64::INFINITY);
        let x = 0.1 + 0.2;
        let back: Num = serde_json::from_str(&serde_json::to_string(&Num::Float(x)).unwrap()).unwrap();
        assert_eq!(back, Num::Float(x));
    }

    #[test]
    fn trace_has_one_row_per_phase() {
        let inst = Instance::parse(TEXT).unwrap();
        let sol = solve_symmetric_linear(&inst.to_linear().unwrap(), SolveOptions::default()).unwrap();
        let csv = trace_csv(&sol.phases);
        assert_eq!(csv.lines().count(), sol.phases.len() + 1);
    }
}
