//! Conservative-labeling optimality certificates.
//!
//! A pseudoflow `f` is optimal iff some labeling `μ` (entries may be infinite)
//! makes every residual arc non-gaining at the margin, keeps `μ_i >= 1/M_i`
//! with equality on deficit nodes, and leaves zero excess wherever
//! `1/M_i < μ_i < ∞`. The arc test uses one-sided derivatives, so linear and
//! concave instances share one checker.

use serde::{Deserialize, Serialize};

use crate::gain::ArcGain;
use crate::network::Network;
use crate::scalar::{Extended, Label, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertificateMode {
    /// Exact comparisons (rational arithmetic).
    Exact,
    /// Relative tolerance for floating-point solutions.
    Tolerance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    FlowBounds { arc: usize },
    LabelCount,
    LabelBelowFloor { node: usize },
    DeficitLabel { node: usize },
    InteriorExcess { node: usize, excess: f64 },
    UnboundedDeficit { node: usize },
    ArcGain { arc: usize, forward: bool, ratio: f64 },
    MissingDerivative { arc: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
    /// Largest relabeled marginal gain on a residual arc, minus one.
    pub arc_slack: f64,
    /// Largest relative gap `μ_i M_i - 1` on a deficit node.
    pub label_slack: f64,
    /// Largest `|e_i|` on a node with an interior label.
    pub excess_slack: f64,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn le<S: Scalar>(a: &S, b: &S, mode: CertificateMode) -> bool {
    match mode {
        CertificateMode::Exact => a <= b,
        CertificateMode::Tolerance(t) => a.to_f64() <= b.to_f64() + t * b.to_f64().abs().max(1.0),
    }
}

fn near_zero<S: Scalar>(a: &S, scale: f64, mode: CertificateMode) -> bool {
    match mode {
        CertificateMode::Exact => a.is_zero(),
        CertificateMode::Tolerance(t) => a.to_f64().abs() <= t * scale.max(1.0),
    }
}

/// Marginal relabeled gain along a residual arc, as `(numerator, denominator)`
/// of `Γ'·μ_tail / μ_head` with infinite labels resolved by the caller.
fn arc_ratio(deriv: f64, mu_from: f64, mu_to: f64) -> f64 {
    deriv * mu_from / mu_to
}

pub fn check_conservative_certificate<S: Scalar, G: ArcGain<S>>(
    flow: &[S],
    labels: &[Label<S>],
    net: &Network<S, G>,
    mode: CertificateMode,
) -> Verdict {
    let mut v = Verdict::default();
    if labels.len() != net.node_count() || flow.len() != net.arc_count() {
        v.violations.push(Violation::LabelCount);
        return v;
    }
    for (a, e) in net.arcs().iter().enumerate() {
        if !(le(&e.lower, &flow[a], mode) && le(&flow[a], &e.upper, mode)) {
            v.violations.push(Violation::FlowBounds { arc: a });
        }
    }
    let excess = net.excess(flow);
    for i in 0..net.node_count() {
        let nd = net.node(i);
        let floor = S::one() / nd.penalty.clone();
        let e = match &excess[i] {
            Extended::NegInfinity => {
                v.violations.push(Violation::UnboundedDeficit { node: i });
                continue;
            }
            Extended::Finite(x) => x.clone(),
        };
        let scale = nd.demand.to_f64().abs();
        let deficit = match mode {
            CertificateMode::Exact => e.is_negative(),
            CertificateMode::Tolerance(t) => e.to_f64() < -t * scale.max(1.0),
        };
        match &labels[i] {
            Label::Infinite => {
                if deficit {
                    v.violations.push(Violation::DeficitLabel { node: i });
                }
            }
            Label::Finite(mu) => {
                if !le(&floor, mu, mode) {
                    v.violations.push(Violation::LabelBelowFloor { node: i });
                }
                let gap = mu.to_f64() * nd.penalty.to_f64() - 1.0;
                if deficit {
                    v.label_slack = v.label_slack.max(gap);
                    if !le(mu, &floor, mode) {
                        v.violations.push(Violation::DeficitLabel { node: i });
                    }
                } else if !le(mu, &floor, mode) {
                    v.excess_slack = v.excess_slack.max(e.to_f64().abs());
                    if !near_zero(&e, scale, mode) {
                        v.violations.push(Violation::InteriorExcess { node: i, excess: e.to_f64() });
                    }
                }
            }
        }
    }
    for (a, e) in net.arcs().iter().enumerate() {
        let f = &flow[a];
        let (mi, mj) = (&labels[e.tail], &labels[e.head]);
        // forward: Γ⁺(f) μ_i / μ_j <= 1; backward: Γ⁻(f) μ_i / μ_j >= 1
        for forward in [true, false] {
            let residual = if forward { *f < e.upper } else { *f > e.lower };
            if !residual {
                continue;
            }
            let (from, to) = if forward { (mi, mj) } else { (mj, mi) };
            let ok = match (from, to) {
                (_, Label::Infinite) => true,
                (Label::Infinite, Label::Finite(_)) => false,
                (Label::Finite(mu_from), Label::Finite(mu_to)) => {
                    let d = if forward { e.gain.right_derivative(f) } else { e.gain.left_derivative(f) };
                    let Some(d) = d else {
                        v.violations.push(Violation::MissingDerivative { arc: a });
                        continue;
                    };
                    // backward marginal gain is 1 / Γ⁻(f)
                    let (lhs, rhs) = if forward {
                        (d.clone() * mu_from.clone(), mu_to.clone())
                    } else {
                        (mu_from.clone(), d.clone() * mu_to.clone())
                    };
                    let ratio = if forward {
                        arc_ratio(d.to_f64(), mu_from.to_f64(), mu_to.to_f64())
                    } else {
                        mu_from.to_f64() / (d.to_f64() * mu_to.to_f64())
                    };
                    if ratio.is_finite() {
                        v.arc_slack = v.arc_slack.max(ratio - 1.0);
                    }
                    if le(&lhs, &rhs, mode) {
                        true
                    } else {
                        v.violations.push(Violation::ArcGain { arc: a, forward, ratio });
                        continue;
                    }
                }
            };
            if !ok {
                v.violations.push(Violation::ArcGain {
                    arc: a,
                    forward,
                    ratio: f64::INFINITY,
                });
            }
        }
    }
    v
}
