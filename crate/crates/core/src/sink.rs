//! Sink formulation (maximize `e_t` subject to `e_i >= 0` elsewhere) by
//! reduction to the symmetric problem.
//!
//! The sink demand is raised by `U* + 1`, so `t` always ends in deficit and
//! its penalty `M_t = 1` turns the symmetric objective into `U* + 1 - e_t`
//! plus heavily penalized deficits elsewhere.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::concave::{complexity_u, solve_symmetric_concave, ConcaveSolution};
use crate::gain::ArcGain;
use crate::linear::{largest_integer, solve_symmetric_linear, LinearSolution};
use crate::network::{ConcaveNetwork, LinearNetwork, Network, NetworkError, NodeData};
use crate::scalar::Scalar;
use crate::scaling::{SolveError, SolveOptions};

/// Result of a sink solve, in the arithmetic of the underlying solver.
#[derive(Debug, Clone)]
pub struct SinkSolution<S, R> {
    pub sink: usize,
    pub flow: Vec<S>,
    pub excess: Vec<S>,
    pub ustar: S,
    /// Penalty `M_i` used on every node other than the sink.
    pub penalty: S,
    /// Amount added to `b_t`, that is `U* + 1`.
    pub sink_shift: S,
    /// Symmetric objective of the reduced instance.
    pub kappa: S,
    /// `e_t` read directly from the flow.
    pub sink_excess: S,
    /// `e_t` recovered from `κ`: `U* + 1 - (κ - sum_{i≠t} M_i max(0, -e_i))`.
    pub sink_excess_from_kappa: S,
    /// `sum_{i≠t} max(0, -e_i)`.
    pub other_deficit: S,
    pub inner: R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// An immense arc is pinned at its lower bound, forcing an excess of minus infinity.
    PinnedImmenseArc { arc: usize },
    /// `κ` exceeded the bound any feasible instance must meet.
    Discrepancy { kappa: f64, threshold: f64 },
    /// Exact solve left a deficit on a node other than the sink.
    Deficit { node: usize },
}

#[derive(Debug, Clone)]
pub enum SinkOutcome<T> {
    Feasible(T),
    Infeasible { reason: InfeasibleReason, partial: Option<T> },
}

impl<T> SinkOutcome<T> {
    pub fn feasible(&self) -> Option<&T> {
        match self {
            SinkOutcome::Feasible(t) => Some(t),
            SinkOutcome::Infeasible { .. } => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, SinkOutcome::Infeasible { .. })
    }
}

/// `d_t U`, valid when every arc into `t` has a finite gain at its lower bound.
pub fn default_ustar<S: Scalar, G: ArcGain<S>>(net: &Network<S, G>, t: usize) -> Result<S, SolveError> {
    for &a in net.in_arcs(t) {
        let e = net.arc(a);
        if e.gain.eval(&e.lower).finite().is_none() {
            return Err(SolveError::Input(format!(
                "arc {} into the sink has gain minus infinity at its lower bound; supply U* explicitly",
                a + 1
            )));
        }
    }
    let norm = net.normalize()?;
    Ok(S::from_i64(net.degree(t) as i64) * complexity_u(&norm.network))
}

fn check_sink<S: Scalar, G: ArcGain<S>>(net: &Network<S, G>, t: usize) -> Result<(), SolveError> {
    if t >= net.node_count() {
        return Err(SolveError::Input(format!("sink {} is not a node", t + 1)));
    }
    Ok(())
}

fn pinned_immense<S: Scalar, G: ArcGain<S>>(net: &Network<S, G>) -> Option<usize> {
    match net.normalize() {
        Err(NetworkError::DeadImmenseArc { arc }) => Some(arc),
        _ => None,
    }
}

fn reduced<S: Scalar, G: ArcGain<S>>(net: &Network<S, G>, t: usize, shift: &S, penalty: &S) -> Result<Network<S, G>, SolveError> {
    let nodes = net
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, nd)| NodeData {
            demand: if i == t { nd.demand.clone() + shift.clone() } else { nd.demand.clone() },
            penalty: if i == t { S::one() } else { penalty.clone() },
        })
        .collect();
    Ok(net.with_nodes(nodes)?)
}

fn interpret<S: Scalar, R>(
    t: usize,
    flow: Vec<S>,
    excess: Vec<S>,
    kappa: S,
    ustar: S,
    penalty: S,
    inner: R,
) -> SinkSolution<S, R> {
    let shift = ustar.clone() + S::one();
    let mut other = S::zero();
    for (i, e) in excess.iter().enumerate() {
        if i != t && e.is_negative() {
            other = other - e.clone();
        }
    }
    let sink_excess = excess[t].clone() + shift.clone();
    let sink_excess_from_kappa = shift.clone() - (kappa.clone() - penalty.clone() * other.clone());
    let excess = excess
        .into_iter()
        .enumerate()
        .map(|(i, e)| if i == t { e + shift.clone() } else { e })
        .collect();
    SinkSolution {
        sink: t,
        flow,
        excess,
        ustar,
        penalty,
        sink_shift: shift,
        kappa,
        sink_excess,
        sink_excess_from_kappa,
        other_deficit: other,
        inner,
    }
}

/// ε-approximate sink solve with penalties `⌈2U*/ε⌉ + 1`.
pub fn solve_sink(
    net: &ConcaveNetwork,
    t: usize,
    eps: f64,
    ustar: Option<f64>,
    opts: SolveOptions,
) -> Result<SinkOutcome<SinkSolution<f64, ConcaveSolution>>, SolveError> {
    check_sink(net, t)?;
    if let Some(arc) = pinned_immense(net) {
        return Ok(SinkOutcome::Infeasible {
            reason: InfeasibleReason::PinnedImmenseArc { arc },
            partial: None,
        });
    }
    let ustar = match ustar {
        Some(u) => u,
        None => default_ustar(net, t)?,
    };
    let penalty = (2.0 * ustar / eps).ceil() + 1.0;
    let red = reduced(net, t, &(ustar + 1.0), &penalty)?;
    let sol = solve_symmetric_concave(&red, eps, opts)?;
    let kappa = sol.kappa;
    let out = interpret(t, sol.flow.clone(), sol.excess.clone(), kappa, ustar, penalty, sol);
    // a feasible instance has a solution with e_t >= -U*, whose κ is at most 2U* + 1
    let threshold = 2.0 * ustar + 1.0 + eps;
    if kappa > threshold {
        return Ok(SinkOutcome::Infeasible {
            reason: InfeasibleReason::Discrepancy { kappa, threshold },
            partial: Some(out),
        });
    }
    Ok(SinkOutcome::Feasible(out))
}

/// Exact sink solve for linear gains with penalties `B^n + 1`.
pub fn solve_sink_linear(
    net: &LinearNetwork,
    t: usize,
    ustar: Option<BigRational>,
    opts: SolveOptions,
) -> Result<SinkOutcome<SinkSolution<BigRational, LinearSolution>>, SolveError> {
    check_sink(net, t)?;
    let ustar = match ustar {
        Some(u) => u,
        None => default_ustar(net, t)?,
    };
    let b = largest_integer(net);
    let penalty = BigRational::from_integer(num_traits::pow(b, net.node_count()) + BigInt::one());
    let shift = ustar.clone() + <BigRational as One>::one();
    let red = reduced(net, t, &shift, &penalty)?;
    let sol = solve_symmetric_linear(&red, opts)?;
    let deficit = sol
        .excess
        .iter()
        .enumerate()
        .position(|(i, e)| i != t && Signed::is_negative(e));
    let kappa = sol.kappa.clone();
    let out = interpret(t, sol.flow.clone(), sol.excess.clone(), kappa, ustar, penalty, sol);
    if let Some(node) = deficit {
        return Ok(SinkOutcome::Infeasible {
            reason: InfeasibleReason::Deficit { node },
            partial: Some(out),
        });
    }
    debug_assert!(Scalar::is_zero(&out.other_deficit));
    Ok(SinkOutcome::Feasible(out))
}
