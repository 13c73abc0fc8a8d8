//! The symmetric problem as an LP:
//! `min sum M_i κ_i  s.t.  e_i(f) + κ_i >= 0,  ℓ <= f <= u,  κ >= 0`.

use num_rational::BigRational;
use num_traits::Zero;

use super::simplex::{Lp, LpOutcome};
use crate::network::LinearNetwork;

pub const MAX_NODES: usize = 10;
pub const MAX_ARCS: usize = 25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReferenceError {
    #[error("instance has {n} nodes and {m} arcs; the LP oracle accepts at most {MAX_NODES} and {MAX_ARCS}")]
    SizeCap { n: usize, m: usize },
    #[error("LP oracle: {0}")]
    Lp(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpReference {
    pub kappa: BigRational,
    pub flow: Vec<BigRational>,
}

/// Exact optimum of the symmetric LP on desk-scale instances.
pub fn lp_reference_linear(net: &LinearNetwork) -> Result<LpReference, ReferenceError> {
    if net.node_count() > MAX_NODES || net.arc_count() > MAX_ARCS {
        return Err(ReferenceError::SizeCap {
            n: net.node_count(),
            m: net.arc_count(),
        });
    }
    solve_symmetric_lp(net)
}

/// Same as [`lp_reference_linear`] without the size cap.
pub fn solve_symmetric_lp(net: &LinearNetwork) -> Result<LpReference, ReferenceError> {
    let n = net.node_count();
    let mut lp = Lp::new(n);
    for (i, nd) in net.nodes().iter().enumerate() {
        lp.rhs[i] = nd.demand.clone();
    }
    // substitute f = ℓ + g, 0 <= g <= u - ℓ
    for e in net.arcs() {
        let gamma = e.gain.0.clone();
        lp.rhs[e.tail] += e.lower.clone();
        lp.rhs[e.head] -= gamma.clone() * e.lower.clone();
        lp.add_column(
            vec![(e.tail, -BigRational::from_integer(1.into())), (e.head, gamma)],
            BigRational::zero(),
            Some(e.upper.clone() - e.lower.clone()),
        );
    }
    let first_kappa = net.arc_count();
    for (i, nd) in net.nodes().iter().enumerate() {
        lp.add_column(vec![(i, BigRational::from_integer(1.into()))], nd.penalty.clone(), None);
    }
    for i in 0..n {
        lp.add_column(vec![(i, BigRational::from_integer((-1).into()))], BigRational::zero(), None);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, objective } => Ok(LpReference {
            kappa: objective,
            flow: net
                .arcs()
                .iter()
                .zip(&x[..first_kappa])
                .map(|(e, g)| e.lower.clone() + g.clone())
                .collect(),
        }),
        other => Err(ReferenceError::Lp(format!("symmetric LP reported {other:?}"))),
    }
}
