//! ε-approximate symmetric solver for concave gains.

use crate::gain::ArcGain;
use crate::network::{ConcaveNetwork, Network};
use crate::scalar::{Extended, Scalar};
use crate::scaling::{Engine, InvariantLog, PhaseStats, SolveError, SolveOptions};

#[derive(Debug, Clone)]
pub struct ConcaveSolution {
    /// Flow on the original (unnormalized) arcs.
    pub flow: Vec<f64>,
    pub labels: Vec<f64>,
    pub excess: Vec<f64>,
    pub kappa: f64,
    pub eps: f64,
    /// `U`: largest of `|b_i|`, capacities and finite `|Γ|` values after normalization.
    pub u_param: f64,
    pub m_param: f64,
    pub final_delta: f64,
    pub phases: Vec<PhaseStats>,
    /// `⌈log₂((MU+1)(2n+3m)/ε)⌉ + 1`.
    pub phase_limit: usize,
    pub log: InvariantLog,
}

impl ConcaveSolution {
    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }
}

/// `U` of a normalized instance.
pub fn complexity_u<S: Scalar, G: ArcGain<S>>(net: &Network<S, G>) -> S {
    let mut u = S::zero();
    let mut see = |v: S| {
        let v = v.abs();
        if v > u {
            u = v;
        }
    };
    for nd in net.nodes() {
        see(nd.demand.clone());
    }
    for e in net.arcs() {
        see(e.upper.clone());
        for x in [&e.lower, &e.upper] {
            if let Extended::Finite(v) = e.gain.eval(x) {
                see(v);
            }
        }
    }
    u
}

pub fn phase_limit(m_param: f64, u_param: f64, n: usize, m: usize, eps: f64) -> usize {
    let width = (2 * n + 3 * m) as f64;
    (((m_param * u_param + 1.0) * width / eps).log2().ceil().max(0.0) as usize) + 1
}

pub fn solve_symmetric_concave(net: &ConcaveNetwork, eps: f64, opts: SolveOptions) -> Result<ConcaveSolution, SolveError> {
    solve_symmetric_concave_observed(net, eps, opts, &mut |_| {})
}

pub fn solve_symmetric_concave_observed(
    net: &ConcaveNetwork,
    eps: f64,
    opts: SolveOptions,
    observer: &mut dyn FnMut(&PhaseStats),
) -> Result<ConcaveSolution, SolveError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SolveError::Input(format!("ε must be positive and finite, got {eps}")));
    }
    let norm = net.normalize()?;
    let nn = &norm.network;
    let (n, m) = (nn.node_count(), nn.arc_count());
    let u_param = complexity_u(nn);
    let m_param = nn.max_penalty();
    let start: Vec<f64> = nn.arcs().iter().map(|e| e.upper).collect();
    let mu0: Vec<f64> = nn.nodes().iter().map(|nd| 1.0 / nd.penalty).collect();
    let mut eng = Engine::new(nn, start, mu0, m_param * u_param + 1.0, opts)?;
    let width = (2 * n + 3 * m) as f64;
    let phases = eng.run_phases(|d| width * d >= eps, observer)?;
    let flow = norm.denormalize_flow(&eng.f);
    Ok(ConcaveSolution {
        kappa: eng.kappa(),
        excess: eng.e.clone(),
        labels: eng.mu.clone(),
        flow,
        eps,
        u_param,
        m_param,
        final_delta: eng.delta,
        phase_limit: phase_limit(m_param, u_param, n, m, eps),
        phases,
        log: eng.log.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainFunction;
    use crate::linear::solve_symmetric_linear;
    use crate::network::{Edge, NodeData};
    use crate::scalar::{integer, rational};
    use crate::{LinearGain, LinearNetwork};

    fn node(b: f64, m: f64) -> NodeData<f64> {
        NodeData { demand: b, penalty: m }
    }

    #[test]
    fn feasible_zero_demand_reaches_zero_kappa() {
        let pwl = GainFunction::piecewise(&[(0.0, 0.0), (1.0, 2.0), (2.0, 2.5)]).unwrap();
        let net = Network::new(
            vec![node(0.0, 1.0), node(0.0, 2.0), node(0.0, 1.0)],
            vec![
                Edge { tail: 0, head: 1, lower: 0.0, upper: 3.0, gain: GainFunction::pow(1.0, 0.5).unwrap().restricted(0.0, 3.0) },
                Edge { tail: 1, head: 2, lower: 0.0, upper: 2.0, gain: pwl },
            ],
        )
        .unwrap();
        let sol = solve_symmetric_concave(&net, 1e-6, SolveOptions::checked()).unwrap();
        assert!(sol.kappa <= 1e-6, "{}", sol.kappa);
        assert!(sol.phase_count() <= sol.phase_limit);
        assert!(sol.log.clean(), "{:?}", sol.log);
    }

    #[test]
    fn linear_instance_agrees_with_exact_solver() {
        let nodes = vec![
            NodeData { demand: integer(-3), penalty: integer(2) },
            NodeData { demand: integer(2), penalty: integer(5) },
            NodeData { demand: integer(1), penalty: integer(1) },
        ];
        let arcs = vec![
            Edge { tail: 0, head: 1, lower: integer(0), upper: integer(2), gain: LinearGain(rational(3, 2)) },
            Edge { tail: 0, head: 2, lower: integer(0), upper: integer(4), gain: LinearGain(rational(1, 3)) },
            Edge { tail: 2, head: 1, lower: integer(0), upper: integer(1), gain: LinearGain(integer(2)) },
        ];
        let lin: LinearNetwork = Network::new(nodes, arcs).unwrap();
        let exact = solve_symmetric_linear(&lin, SolveOptions::default()).unwrap();
        let sol = solve_symmetric_concave(&lin.to_concave(), 1e-9, SolveOptions::checked()).unwrap();
        let k = crate::scalar::ratio_to_f64(&exact.kappa);
        assert!((sol.kappa - k).abs() <= 1e-8, "{} vs {}", sol.kappa, k);
        assert!(sol.log.clean(), "{:?}", sol.log);
    }

    #[test]
    fn phase_limit_formula() {
        // (MU+1)(2n+3m)/ε = 8 * 4 / 1 = 32 -> 5 + 1
        assert_eq!(phase_limit(1.0, 7.0, 2, 0, 1.0), 6);
    }
}
