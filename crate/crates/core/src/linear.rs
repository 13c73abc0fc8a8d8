//! Exact symmetric fat-path solver for linear gains.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::gain::LinearGain;
use crate::maxflow::FlowGraph;
use crate::network::LinearNetwork;
use crate::scalar::Label;
use crate::scaling::{AdjustStats, Engine, InvariantLog, PhaseStats, SolveError, SolveOptions};

/// Output of [`solve_symmetric_linear`], expressed on the original instance.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub flow: Vec<BigRational>,
    pub labels: Vec<Label<BigRational>>,
    pub excess: Vec<BigRational>,
    pub kappa: BigRational,
    pub phases: Vec<PhaseStats>,
    pub final_adjust: FinalAdjust,
    pub routed: BigRational,
    pub b: BigInt,
    pub threshold: BigRational,
    pub log: InvariantLog,
}

#[derive(Debug, Clone)]
pub struct FinalAdjust {
    pub delta: BigRational,
    pub arcs: usize,
    pub ex_before: BigRational,
    pub ex_after: BigRational,
}

/// Largest integer appearing in capacities, demands and gain fractions.
pub fn largest_integer(net: &LinearNetwork) -> BigInt {
    let mut b = BigInt::one();
    let mut see = |r: &BigRational| {
        for v in [r.numer().abs(), r.denom().abs()] {
            if v > b {
                b = v;
            }
        }
    };
    for e in net.arcs() {
        see(&e.lower);
        see(&e.upper);
        see(&e.gain.0);
    }
    for nd in net.nodes() {
        see(&nd.demand);
    }
    b
}

/// Scale below which the final max-flow step is exact:
/// `1 / max(B^m, lcm(data denominators) * prod(p_a q_a))` for gains `p_a / q_a`.
pub fn termination_threshold(net: &LinearNetwork, b: &BigInt) -> BigRational {
    let mut granularity = BigInt::one();
    for e in net.arcs() {
        granularity = granularity.lcm(e.upper.denom());
    }
    for nd in net.nodes() {
        granularity = granularity.lcm(nd.demand.denom());
    }
    for e in net.arcs() {
        granularity *= e.gain.0.numer() * e.gain.0.denom();
    }
    let bm = num_traits::pow(b.clone(), net.arc_count());
    BigRational::new(BigInt::one(), granularity.max(bm))
}

/// Max-flow on tight arcs from positive finite-label nodes to deficit nodes,
/// in relabeled units. Returns the routed amount.
pub fn terminal_max_flow(eng: &mut Engine<'_, BigRational, LinearGain>, reached: &[bool]) -> Result<BigRational, SolveError> {
    let net = eng.net;
    let n = net.node_count();
    let (src, snk) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2);
    let mut arc_edges = Vec::new();
    for (a, e) in net.arcs().iter().enumerate() {
        let (i, j) = (e.tail, e.head);
        if !reached[i] || !reached[j] {
            continue;
        }
        if e.gain.0.clone() * eng.mu[i].clone() != eng.mu[j] {
            continue;
        }
        let fwd = (e.upper.clone() - eng.f[a].clone()) / eng.mu[i].clone();
        if fwd.is_positive() {
            arc_edges.push((a, true, g.add_edge(i, j, fwd)));
        }
        let bwd = (eng.f[a].clone() - e.lower.clone()) / eng.mu[i].clone();
        if bwd.is_positive() {
            arc_edges.push((a, false, g.add_edge(j, i, bwd)));
        }
    }
    for i in 0..n {
        if !reached[i] {
            continue;
        }
        let x = eng.rel_excess(i);
        if x.is_positive() {
            g.add_edge(src, i, x);
        } else if x.is_negative() {
            g.add_edge(i, snk, -x);
        }
    }
    let routed = g.max_flow(src, snk);
    for (a, forward, id) in arc_edges {
        let x = g.flow(id).clone();
        if x.is_zero() {
            continue;
        }
        let dx = x * eng.mu[net.arc(a).tail].clone();
        let new = if forward { eng.f[a].clone() + dx } else { eng.f[a].clone() - dx };
        eng.set_flow(a, new);
    }
    Ok(routed)
}

pub fn solve_symmetric_linear(net: &LinearNetwork, opts: SolveOptions) -> Result<LinearSolution, SolveError> {
    solve_symmetric_linear_observed(net, opts, &mut |_| {})
}

pub fn solve_symmetric_linear_observed(
    net: &LinearNetwork,
    opts: SolveOptions,
    observer: &mut dyn FnMut(&PhaseStats),
) -> Result<LinearSolution, SolveError> {
    let norm = net.normalize()?;
    let nn = &norm.network;
    let n = nn.node_count();
    let m = nn.arc_count();
    let b = largest_integer(nn);
    let threshold = termination_threshold(nn, &b);
    let big_m = nn.max_penalty();
    let b_sq = BigRational::from_integer(b.clone() * b.clone());
    let delta0 = big_m * b_sq + BigRational::one();
    let mu0: Vec<BigRational> = nn.nodes().iter().map(|nd| nd.penalty.recip()).collect();
    let mut eng = Engine::new(nn, nn.zero_flow(), mu0, delta0, opts)?;

    let width = BigRational::from_integer(BigInt::from(2 * n + 6 * m));
    let phases = eng.run_phases(|d| width.clone() * d.clone() >= threshold, observer)?;

    let delta = eng.delta.clone();
    let ex_before = eng.ex(&delta);
    let AdjustStats { arcs, .. } = eng.adjust_to_zero()?;
    let ex_after = eng.ex(&BigRational::zero());
    let reached = eng.tighten(None);
    let routed = terminal_max_flow(&mut eng, &reached)?;

    for i in 0..n {
        let floor = nn.node(i).penalty.recip();
        if reached[i] && eng.mu[i] > floor && !eng.e[i].is_zero() {
            return Err(SolveError::Internal(format!(
                "node {} keeps excess {} after the final max-flow",
                i + 1,
                eng.e[i]
            )));
        }
    }
    let labels = eng
        .mu
        .iter()
        .zip(&reached)
        .map(|(m, &r)| if r { Label::Finite(m.clone()) } else { Label::Infinite })
        .collect();
    Ok(LinearSolution {
        flow: norm.denormalize_flow(&eng.f),
        labels,
        excess: eng.e.clone(),
        kappa: eng.kappa(),
        phases,
        final_adjust: FinalAdjust {
            delta,
            arcs,
            ex_before,
            ex_after,
        },
        routed,
        b,
        threshold,
        log: eng.log.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Edge, Network, NodeData};
    use crate::scalar::{integer, rational};

    fn node(b: i64, m: i64) -> NodeData<BigRational> {
        NodeData {
            demand: integer(b),
            penalty: integer(m),
        }
    }

    fn lin(t: usize, h: usize, l: i64, u: i64, g: BigRational) -> Edge<BigRational, LinearGain> {
        Edge {
            tail: t,
            head: h,
            lower: integer(l),
            upper: integer(u),
            gain: LinearGain(g),
        }
    }

    #[test]
    fn zero_demand_network_is_optimal_at_zero() {
        let net = Network::new(
            vec![node(0, 1), node(0, 2), node(0, 1)],
            vec![lin(0, 1, 0, 3, rational(1, 2)), lin(1, 2, 0, 4, integer(3))],
        )
        .unwrap();
        let sol = solve_symmetric_linear(&net, SolveOptions::checked()).unwrap();
        assert_eq!(sol.kappa, integer(0));
        assert!(sol.log.clean(), "{:?}", sol.log);
    }

    #[test]
    fn two_node_transfer() {
        let net = Network::new(vec![node(-1, 1), node(1, 1)], vec![lin(0, 1, 0, 2, integer(1))]).unwrap();
        let sol = solve_symmetric_linear(&net, SolveOptions::checked()).unwrap();
        assert_eq!(sol.kappa, integer(0));
        assert_eq!(sol.flow, vec![integer(1)]);
        assert!(sol.log.clean(), "{:?}", sol.log);
    }

    #[test]
    fn gain_amplifies_supply() {
        // node 1 needs 3 and penalizes 5x, so node 0 overdraws by 1/2
        let net = Network::new(vec![node(-1, 1), node(3, 5)], vec![lin(0, 1, 0, 10, integer(2))]).unwrap();
        let sol = solve_symmetric_linear(&net, SolveOptions::checked()).unwrap();
        assert_eq!(sol.kappa, rational(1, 2));
        assert_eq!(sol.flow, vec![rational(3, 2)]);
    }

    #[test]
    fn penalties_decide_direction() {
        // both nodes short; sending from the cheap node helps the expensive one
        let net = Network::new(vec![node(1, 1), node(1, 4)], vec![lin(0, 1, 0, 10, integer(3))]).unwrap();
        let sol = solve_symmetric_linear(&net, SolveOptions::checked()).unwrap();
        // f = 1/3 fills node 1 at cost 1/3 extra deficit at node 0
        assert_eq!(sol.flow, vec![rational(1, 3)]);
        assert_eq!(sol.kappa, rational(4, 3));
    }

    #[test]
    fn lower_bounds_are_respected() {
        let net = Network::new(vec![node(0, 3), node(0, 1)], vec![lin(0, 1, 1, 4, integer(2))]).unwrap();
        let sol = solve_symmetric_linear(&net, SolveOptions::checked()).unwrap();
        assert_eq!(sol.flow, vec![integer(1)]);
        assert_eq!(sol.kappa, integer(3));
    }

    #[test]
    fn threshold_is_below_b_pow_m() {
        let net = Network::new(vec![node(1, 1), node(1, 4)], vec![lin(0, 1, 0, 10, rational(3, 7))]).unwrap();
        let b = largest_integer(&net);
        assert_eq!(b, BigInt::from(10));
        let t = termination_threshold(&net, &b);
        assert_eq!(t, rational(1, 21));
    }
}
