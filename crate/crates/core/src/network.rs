//! Problem instances, pseudoflows and the residual-graph quantities shared by
//! every solver.

use crate::gain::{ArcGain, GainFunction, LinearGain};
use crate::scalar::{Extended, Scalar};
use num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("arc {arc}: upper capacity below lower capacity")]
    CapacityOrder { arc: usize },
    #[error("arc {arc}: self-loop on node {node}")]
    SelfLoop { arc: usize, node: usize },
    #[error("arc {arc}: endpoint {node} out of range")]
    Endpoint { arc: usize, node: usize },
    #[error("node {node}: penalty must be an integer >= 1")]
    Penalty { node: usize },
    #[error("arc {arc}: gain is minus infinity on the whole capacity range")]
    DeadImmenseArc { arc: usize },
    #[error("arc {arc}: {msg}")]
    Gain { arc: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeData<S> {
    pub demand: S,
    pub penalty: S,
}

#[derive(Debug, Clone)]
pub struct Edge<S, G> {
    pub tail: usize,
    pub head: usize,
    pub lower: S,
    pub upper: S,
    pub gain: G,
}

/// Directed multigraph with gains, capacities, demands and penalties.
/// Adjacency and degrees are computed once at construction.
#[derive(Debug, Clone)]
pub struct Network<S, G> {
    nodes: Vec<NodeData<S>>,
    arcs: Vec<Edge<S, G>>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
    degree: Vec<usize>,
}

pub type LinearNetwork = Network<BigRational, LinearGain>;
pub type ConcaveNetwork = Network<f64, GainFunction>;

impl<S: Scalar, G: ArcGain<S>> Network<S, G> {
    pub fn new(nodes: Vec<NodeData<S>>, arcs: Vec<Edge<S, G>>) -> Result<Self, NetworkError> {
        let n = nodes.len();
        for (i, nd) in nodes.iter().enumerate() {
            if nd.penalty < S::one() || !nd.penalty.is_integral() {
                return Err(NetworkError::Penalty { node: i });
            }
        }
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        let mut degree = vec![0; n];
        for (a, e) in arcs.iter().enumerate() {
            for node in [e.tail, e.head] {
                if node >= n {
                    return Err(NetworkError::Endpoint { arc: a, node });
                }
            }
            if e.tail == e.head {
                return Err(NetworkError::SelfLoop { arc: a, node: e.tail });
            }
            if e.upper < e.lower {
                return Err(NetworkError::CapacityOrder { arc: a });
            }
            out_arcs[e.tail].push(a);
            in_arcs[e.head].push(a);
            degree[e.tail] += 1;
            degree[e.head] += 1;
        }
        Ok(Self {
            nodes,
            arcs,
            out_arcs,
            in_arcs,
            degree,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn nodes(&self) -> &[NodeData<S>] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Edge<S, G>] {
        &self.arcs
    }

    pub fn node(&self, i: usize) -> &NodeData<S> {
        &self.nodes[i]
    }

    pub fn arc(&self, a: usize) -> &Edge<S, G> {
        &self.arcs[a]
    }

    pub fn out_arcs(&self, i: usize) -> &[usize] {
        &self.out_arcs[i]
    }

    pub fn in_arcs(&self, i: usize) -> &[usize] {
        &self.in_arcs[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn max_penalty(&self) -> S {
        self.nodes.iter().fold(S::one(), |m, nd| S::max_of(m, nd.penalty.clone()))
    }

    /// Returns a copy with replaced node data (same arcs).
    pub fn with_nodes(&self, nodes: Vec<NodeData<S>>) -> Result<Self, NetworkError> {
        Self::new(nodes, self.arcs.clone())
    }

    pub fn zero_flow(&self) -> Vec<S> {
        vec![S::zero(); self.arcs.len()]
    }

    pub fn lower_flow(&self) -> Vec<S> {
        self.arcs.iter().map(|e| e.lower.clone()).collect()
    }

    pub fn flow_within_bounds(&self, f: &[S]) -> bool {
        f.len() == self.arcs.len() && self.arcs.iter().zip(f).all(|(e, x)| *x >= e.lower && *x <= e.upper)
    }

    /// `e_i = sum_in Γ(f) - sum_out f - b_i`; minus infinity propagates.
    pub fn excess_at(&self, f: &[S], i: usize) -> Extended<S> {
        let mut acc = Extended::Finite(-self.nodes[i].demand.clone());
        for &a in &self.in_arcs[i] {
            acc = acc.add(&self.arcs[a].gain.eval(&f[a]));
        }
        for &a in &self.out_arcs[i] {
            acc = acc.add_finite(&-f[a].clone());
        }
        acc
    }

    pub fn excess(&self, f: &[S]) -> Vec<Extended<S>> {
        (0..self.nodes.len()).map(|i| self.excess_at(f, i)).collect()
    }

    /// `κ_f = sum M_i max(-e_i, 0)`; `None` when some excess is minus infinity.
    pub fn excess_discrepancy(&self, excess: &[Extended<S>]) -> Option<S> {
        let mut k = S::zero();
        for (nd, e) in self.nodes.iter().zip(excess) {
            match e {
                Extended::NegInfinity => return None,
                Extended::Finite(v) => {
                    if v.is_negative() {
                        k = k + nd.penalty.clone() * (-v.clone());
                    }
                }
            }
        }
        Some(k)
    }

    pub fn discrepancy_of_flow(&self, f: &[S]) -> Option<S> {
        self.excess_discrepancy(&self.excess(f))
    }

    /// `Ex_Δ = sum max(e_i/μ_i - d_i Δ, 0)` over non-isolated nodes.
    pub fn modified_excess(&self, excess: &[S], mu: &[S], delta: &S) -> S {
        let mut total = S::zero();
        for i in 0..self.nodes.len() {
            if self.degree[i] == 0 {
                continue;
            }
            let over = excess[i].clone() / mu[i].clone() - S::from_i64(self.degree[i] as i64) * delta.clone();
            if over.is_positive() {
                total = total + over;
            }
        }
        total
    }

    pub fn residual_arcs(&self, f: &[S]) -> Vec<ResidualArc> {
        let mut out = Vec::new();
        for (a, e) in self.arcs.iter().enumerate() {
            if f[a] < e.upper {
                out.push(ResidualArc { arc: a, forward: true });
            }
            if f[a] > e.lower {
                out.push(ResidualArc { arc: a, forward: false });
            }
        }
        out
    }

    pub fn is_residual(&self, f: &[S], r: ResidualArc) -> bool {
        let e = &self.arcs[r.arc];
        if r.forward {
            f[r.arc] < e.upper
        } else {
            f[r.arc] > e.lower
        }
    }

    pub fn tail_of(&self, r: ResidualArc) -> usize {
        let e = &self.arcs[r.arc];
        if r.forward {
            e.tail
        } else {
            e.head
        }
    }

    pub fn head_of(&self, r: ResidualArc) -> usize {
        let e = &self.arcs[r.arc];
        if r.forward {
            e.head
        } else {
            e.tail
        }
    }

    /// Maximum increase deliverable at the head: `Γ(u) - Γ(f)` forward, `f - ℓ`
    /// backward.
    pub fn fatness(&self, f: &[S], r: ResidualArc) -> S {
        let e = &self.arcs[r.arc];
        if r.forward {
            e.gain.delta(&f[r.arc], &e.upper)
        } else {
            f[r.arc].clone() - e.lower.clone()
        }
    }

    pub fn relabeled_fatness(&self, f: &[S], r: ResidualArc, mu: &[S]) -> S {
        self.fatness(f, r) / mu[self.head_of(r)].clone()
    }

    /// Flow on the residual arc as seen from its tail: `f` forward,
    /// `-Γ(f)` backward.
    pub fn effective_flow(&self, f: &[S], r: ResidualArc) -> Extended<S> {
        if r.forward {
            Extended::Finite(f[r.arc].clone())
        } else {
            match self.arcs[r.arc].gain.eval(&f[r.arc]) {
                Extended::Finite(v) => Extended::Finite(-v),
                Extended::NegInfinity => Extended::NegInfinity,
            }
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.arcs.iter().all(|e| e.lower.is_zero())
    }

    /// Moves every lower bound to zero, recenters regular gains so that
    /// `Γ(0) = 0`, and truncates flat tails.
    pub fn normalize(&self) -> Result<Normalized<S, G>, NetworkError> {
        let mut nodes = self.nodes.clone();
        let mut arcs = Vec::with_capacity(self.arcs.len());
        let mut lower = Vec::with_capacity(self.arcs.len());
        for (a, e) in self.arcs.iter().enumerate() {
            if e.upper < e.lower {
                return Err(NetworkError::CapacityOrder { arc: a });
            }
            let (gain, base) = e.gain.shift(&e.lower);
            nodes[e.tail].demand = nodes[e.tail].demand.clone() + e.lower.clone();
            if let Extended::Finite(g) = &base {
                if !gain.is_immense() {
                    nodes[e.head].demand = nodes[e.head].demand.clone() - g.clone();
                }
            }
            let width = e.upper.clone() - e.lower.clone();
            let upper = gain.flat_from(&width);
            if gain.is_immense() && upper.is_zero() {
                return Err(NetworkError::DeadImmenseArc { arc: a });
            }
            arcs.push(Edge {
                tail: e.tail,
                head: e.head,
                lower: S::zero(),
                upper,
                gain,
            });
            lower.push(e.lower.clone());
        }
        Ok(Normalized {
            network: Network::new(nodes, arcs)?,
            lower,
        })
    }
}

/// A normalized instance together with the shifts needed to map solutions back.
#[derive(Debug, Clone)]
pub struct Normalized<S, G> {
    pub network: Network<S, G>,
    pub lower: Vec<S>,
}

impl<S: Scalar, G> Normalized<S, G> {
    pub fn denormalize_flow(&self, f: &[S]) -> Vec<S> {
        f.iter().zip(&self.lower).map(|(x, l)| x.clone() + l.clone()).collect()
    }

    pub fn normalize_flow(&self, f: &[S]) -> Vec<S> {
        f.iter().zip(&self.lower).map(|(x, l)| x.clone() - l.clone()).collect()
    }
}

/// An arc of the residual graph: the original arc traversed forward, or its
/// reversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResidualArc {
    pub arc: usize,
    pub forward: bool,
}

impl ConcaveNetwork {
    /// Effective gain of a residual arc (`Γ` forward, `-Γ⁻¹(-α)` backward).
    pub fn effective_gain(&self, r: ResidualArc) -> GainFunction {
        let e = &self.arcs[r.arc];
        let g = e.gain.restricted(e.lower, e.upper);
        if r.forward {
            g
        } else {
            g.backward()
        }
    }
}

impl LinearNetwork {
    /// Converts to the floating-point representation used by the concave solver.
    pub fn to_concave(&self) -> ConcaveNetwork {
        let nodes = self
            .nodes
            .iter()
            .map(|nd| NodeData {
                demand: nd.demand.to_f64(),
                penalty: nd.penalty.to_f64(),
            })
            .collect();
        let arcs = self
            .arcs
            .iter()
            .map(|e| Edge {
                tail: e.tail,
                head: e.head,
                lower: e.lower.to_f64(),
                upper: e.upper.to_f64(),
                gain: GainFunction::linear(e.gain.0.to_f64()).expect("positive gain factor"),
            })
            .collect();
        Network::new(nodes, arcs).expect("same structure")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{integer, rational};

    fn lin(tail: usize, head: usize, l: i64, u: i64, g: BigRational) -> Edge<BigRational, LinearGain> {
        Edge {
            tail,
            head,
            lower: integer(l),
            upper: integer(u),
            gain: LinearGain(g),
        }
    }

    fn node(b: i64, m: i64) -> NodeData<BigRational> {
        NodeData {
            demand: integer(b),
            penalty: integer(m),
        }
    }

    #[test]
    fn normalize_shifts_lower_bound() {
        let net = Network::new(vec![node(0, 1), node(0, 1)], vec![lin(0, 1, 1, 3, integer(2))]).unwrap();
        let nn = net.normalize().unwrap();
        let e = nn.network.arc(0);
        assert_eq!((e.lower.clone(), e.upper.clone()), (integer(0), integer(2)));
        assert_eq!(nn.network.node(0).demand, integer(1));
        assert_eq!(nn.network.node(1).demand, integer(-2));
        // excess is invariant under the shift
        let f = vec![integer(1)];
        let orig = nn.denormalize_flow(&f);
        assert_eq!(net.excess(&orig), nn.network.excess(&f));
        assert_eq!(nn.normalize_flow(&orig), f);
    }

    #[test]
    fn normalize_truncates_flat_tail() {
        let g = GainFunction::piecewise(&[(0.0, 0.0), (2.0, 2.0), (3.0, 2.0)]).unwrap();
        let net = Network::new(
            vec![NodeData { demand: 0.0, penalty: 1.0 }; 2],
            vec![Edge { tail: 0, head: 1, lower: 0.0, upper: 3.0, gain: g }],
        )
        .unwrap();
        assert_eq!(net.normalize().unwrap().network.arc(0).upper, 2.0);
    }

    #[test]
    fn normalize_identity_case() {
        let net = Network::new(vec![node(-1, 2), node(1, 1)], vec![lin(0, 1, 0, 4, rational(3, 2))]).unwrap();
        let nn = net.normalize().unwrap();
        assert_eq!(nn.network.nodes(), net.nodes());
        assert_eq!(nn.network.arc(0).upper, integer(4));
        assert!(nn.network.is_normalized());
    }

    #[test]
    fn normalize_recenters_log_with_positive_lower() {
        let g = GainFunction::log(1.0).unwrap();
        let net = Network::new(
            vec![NodeData { demand: 0.0, penalty: 1.0 }; 2],
            vec![Edge { tail: 0, head: 1, lower: 1.0, upper: 4.0, gain: g }],
        )
        .unwrap();
        let nn = net.normalize().unwrap();
        let a = nn.network.arc(0);
        assert!(!a.gain.is_immense());
        assert_eq!(a.gain.eval(&0.0), Extended::Finite(0.0));
        assert!((nn.network.excess_at(&[1.0], 1).to_f64() - net.excess_at(&[2.0], 1).to_f64()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Network::new(vec![node(0, 1)], vec![lin(0, 0, 0, 1, integer(1))]),
            Err(NetworkError::SelfLoop { .. })
        ));
        assert!(matches!(
            Network::new(vec![node(0, 1), node(0, 1)], vec![lin(0, 1, 2, 1, integer(1))]),
            Err(NetworkError::CapacityOrder { .. })
        ));
        assert!(matches!(Network::<BigRational, LinearGain>::new(vec![node(0, 0)], vec![]), Err(NetworkError::Penalty { .. })));
        assert!(matches!(
            Network::<BigRational, LinearGain>::new(vec![NodeData { demand: integer(0), penalty: rational(3, 2) }], vec![]),
            Err(NetworkError::Penalty { .. })
        ));
    }

    #[test]
    fn excess_examples() {
        let net = Network::new(vec![node(0, 1), node(0, 1)], vec![lin(0, 1, 0, 5, integer(2))]).unwrap();
        let zero = net.excess(&[integer(0)]);
        assert!(zero.iter().all(|e| e == &Extended::Finite(integer(0))));
        let e = net.excess(&[integer(3)]);
        assert_eq!(e, vec![Extended::Finite(integer(-3)), Extended::Finite(integer(6))]);

        let lg = Network::new(
            vec![NodeData { demand: 0.0, penalty: 1.0 }; 2],
            vec![Edge { tail: 0, head: 1, lower: 0.0, upper: 1.0, gain: GainFunction::log(1.0).unwrap() }],
        )
        .unwrap();
        assert_eq!(lg.excess_at(&[0.0], 1), Extended::NegInfinity);
        assert_eq!(lg.discrepancy_of_flow(&[0.0]), None);
    }

    #[test]
    fn fatness_examples() {
        let net = Network::new(vec![node(0, 1), node(0, 1)], vec![lin(0, 1, 0, 3, integer(2))]).unwrap();
        let mu = vec![integer(2), integer(1)];
        let fwd = ResidualArc { arc: 0, forward: true };
        let bwd = ResidualArc { arc: 0, forward: false };
        let f = vec![integer(1)];
        assert_eq!(net.relabeled_fatness(&f, fwd, &mu), integer(4));
        assert_eq!(net.relabeled_fatness(&f, bwd, &mu), rational(1, 2));
        assert_eq!(net.effective_flow(&f, bwd), Extended::Finite(integer(-2)));
        let full = vec![integer(3)];
        assert_eq!(net.fatness(&full, fwd), integer(0));
        assert!(!net.is_residual(&full, fwd));
        assert_eq!(net.residual_arcs(&full), vec![bwd]);
    }

    #[test]
    fn discrepancy_examples() {
        let net = Network::<BigRational, LinearGain>::new(vec![node(0, 5), node(0, 1)], vec![]).unwrap();
        let e = |a: i64, b: i64| vec![Extended::Finite(integer(a)), Extended::Finite(integer(b))];
        assert_eq!(net.excess_discrepancy(&e(1, 0)), Some(integer(0)));
        assert_eq!(net.excess_discrepancy(&e(-2, 3)), Some(integer(10)));
        let unit = Network::<BigRational, LinearGain>::new(vec![node(0, 1), node(0, 1)], vec![]).unwrap();
        assert_eq!(unit.excess_discrepancy(&e(-1, -1)), Some(integer(2)));
    }

    #[test]
    fn modified_excess_examples() {
        let net = Network::new(vec![node(0, 1), node(0, 1)], vec![lin(0, 1, 0, 3, integer(1))]).unwrap();
        let mu = vec![integer(1), integer(1)];
        let d = integer(2);
        assert_eq!(net.modified_excess(&[integer(2), integer(2)], &mu, &d), integer(0));
        assert_eq!(net.modified_excess(&[integer(8), integer(2)], &mu, &d), integer(6));
        assert_eq!(net.modified_excess(&[integer(-50), integer(2)], &mu, &d), integer(0));
    }
}
