//! Exact rational recovery of ADNB / Fisher equilibria from an approximate
//! allocation, and an LP feasibility test.
//!
//! Given a guessed support `F`, equality edges fix relative prices inside
//! each component; the component's budget identity then fixes the scale, and
//! a rational max-flow finds the allocation. A guess is accepted only when
//! the exact KKT check returns zero residuals.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{kkt_check, Equilibrium, MarketError, MarketInstance, Utility};
use crate::maxflow::FlowGraph;
use crate::reference::simplex::{Lp, LpOutcome};

fn linear_utilities(market: &MarketInstance) -> Result<Vec<BigRational>, MarketError> {
    market
        .pairs
        .iter()
        .map(|p| match p.utility {
            Utility::Linear(u) => Ok(BigRational::from_integer(u.into())),
            Utility::Gain(_) => Err(MarketError::Recovery("exact recovery needs linear utilities".into())),
        })
        .collect()
}

/// Relative prices `π_j` (component roots at 1) and bang-per-buck `β_i`
/// for `α = 1`, or `None` when the support has an inconsistent cycle.
fn propagate(market: &MarketInstance, u: &[BigRational], support: &[bool]) -> Option<(Vec<BigRational>, Vec<BigRational>, Vec<usize>, Vec<usize>)> {
    let (nb, ng) = (market.buyer_count(), market.good_count());
    let mut good_adj = vec![Vec::new(); ng];
    let mut buyer_adj = vec![Vec::new(); nb];
    for (k, p) in market.pairs.iter().enumerate() {
        if support[k] {
            good_adj[p.good].push(k);
            buyer_adj[p.buyer].push(k);
        }
    }
    let mut pi: Vec<Option<BigRational>> = vec![None; ng];
    let mut beta: Vec<Option<BigRational>> = vec![None; nb];
    let mut good_comp = vec![usize::MAX; ng];
    let mut buyer_comp = vec![usize::MAX; nb];
    let mut comps = 0;
    for root in 0..ng {
        if pi[root].is_some() {
            continue;
        }
        pi[root] = Some(BigRational::one());
        good_comp[root] = comps;
        // queue entries: (is_good, index)
        let mut queue = VecDeque::from([(true, root)]);
        while let Some((is_good, v)) = queue.pop_front() {
            let edges = if is_good { &good_adj[v] } else { &buyer_adj[v] };
            for &k in edges {
                let p = &market.pairs[k];
                if is_good {
                    let b = u[k].clone() / pi[v].clone().unwrap();
                    match &beta[p.buyer] {
                        Some(old) if *old != b => return None,
                        Some(_) => {}
                        None => {
                            beta[p.buyer] = Some(b);
                            buyer_comp[p.buyer] = comps;
                            queue.push_back((false, p.buyer));
                        }
                    }
                } else {
                    let q = u[k].clone() / beta[v].clone().unwrap();
                    match &pi[p.good] {
                        Some(old) if *old != q => return None,
                        Some(_) => {}
                        None => {
                            pi[p.good] = Some(q);
                            good_comp[p.good] = comps;
                            queue.push_back((true, p.good));
                        }
                    }
                }
            }
        }
        comps += 1;
    }
    let beta: Option<Vec<BigRational>> = beta.into_iter().collect();
    Some((pi.into_iter().map(Option::unwrap).collect(), beta?, good_comp, buyer_comp))
}

/// Removes cycles from the support by shifting money around them, so the
/// allocation becomes a basic (forest-supported) solution.
fn cancel_cycles(market: &MarketInstance, money: &mut [BigRational]) {
    let (nb, ng) = (market.buyer_count(), market.good_count());
    loop {
        // union-find over goods (0..ng) and buyers (ng..)
        let mut parent: Vec<usize> = (0..nb + ng).collect();
        fn find(p: &mut Vec<usize>, v: usize) -> usize {
            let mut r = v;
            while p[r] != r {
                r = p[r];
            }
            p[v] = r;
            r
        }
        let mut closing = None;
        for (k, p) in market.pairs.iter().enumerate() {
            if !money[k].is_positive() {
                continue;
            }
            let (a, b) = (find(&mut parent, p.good), find(&mut parent, ng + p.buyer));
            if a == b {
                closing = Some(k);
                break;
            }
            parent[a] = b;
        }
        let Some(close) = closing else { return };
        // path between the endpoints of `close` through other positive pairs
        let start = market.pairs[close].good;
        let goal = ng + market.pairs[close].buyer;
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; nb + ng];
        let mut seen = vec![false; nb + ng];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for (k, p) in market.pairs.iter().enumerate() {
                if k == close || !money[k].is_positive() {
                    continue;
                }
                let (g, b) = (p.good, ng + p.buyer);
                let w = if g == v {
                    b
                } else if b == v {
                    g
                } else {
                    continue;
                };
                if !seen[w] {
                    seen[w] = true;
                    prev[w] = Some((v, k));
                    queue.push_back(w);
                }
            }
        }
        // cycle: close (good→buyer), then the path buyer→…→good, alternating signs
        let mut cycle = vec![close];
        let mut v = goal;
        while v != start {
            let (u, k) = prev[v].expect("cycle exists");
            cycle.push(k);
            v = u;
        }
        let minus: Vec<usize> = cycle.iter().skip(1).step_by(2).copied().collect();
        let plus: Vec<usize> = cycle.iter().step_by(2).copied().collect();
        let step = minus.iter().map(|&k| money[k].clone()).min().expect("even cycle");
        for k in minus {
            money[k] -= step.clone();
        }
        for k in plus {
            money[k] += step.clone();
        }
    }
}

fn try_support(market: &MarketInstance, u: &[BigRational], support: &[bool]) -> Option<Equilibrium<BigRational>> {
    let (nb, ng) = (market.buyer_count(), market.good_count());
    let (pi, beta, good_comp, buyer_comp) = propagate(market, u, support)?;
    let comps = good_comp.iter().copied().max()? + 1;
    let mut goods_sum = vec![BigRational::zero(); comps];
    let mut budget_sum = vec![BigRational::zero(); comps];
    let mut endowment = vec![BigRational::zero(); comps];
    for j in 0..ng {
        goods_sum[good_comp[j]] += pi[j].clone();
    }
    for i in 0..nb {
        let c = buyer_comp[i];
        budget_sum[c] += BigRational::from_integer(market.budgets[i].into());
        endowment[c] += BigRational::from_integer(market.disagreement[i].into()) / beta[i].clone();
    }
    // α (sum π - sum c/β) = sum m
    let mut alpha = Vec::with_capacity(comps);
    for c in 0..comps {
        let denom = goods_sum[c].clone() - endowment[c].clone();
        if !denom.is_positive() {
            return None;
        }
        alpha.push(budget_sum[c].clone() / denom);
    }
    let prices: Vec<BigRational> = (0..ng).map(|j| alpha[good_comp[j]].clone() * pi[j].clone()).collect();
    let spend: Vec<BigRational> = (0..nb)
        .map(|i| {
            let b = beta[i].clone() / alpha[buyer_comp[i]].clone();
            BigRational::from_integer(market.budgets[i].into()) + BigRational::from_integer(market.disagreement[i].into()) / b
        })
        .collect();
    // money flow: source → good (p_j) → buyer → sink (r_i)
    let (src, snk) = (nb + ng, nb + ng + 1);
    let mut g = FlowGraph::new(nb + ng + 2);
    for (j, p) in prices.iter().enumerate() {
        g.add_edge(src, j, p.clone());
    }
    let mut ids = vec![None; market.pairs.len()];
    for (k, p) in market.pairs.iter().enumerate() {
        if support[k] {
            ids[k] = Some(g.add_edge(p.good, ng + p.buyer, prices[p.good].clone()));
        }
    }
    for (i, r) in spend.iter().enumerate() {
        g.add_edge(ng + i, snk, r.clone());
    }
    let total: BigRational = prices.iter().cloned().sum();
    if g.max_flow(src, snk) != total {
        return None;
    }
    let mut money: Vec<BigRational> = ids
        .iter()
        .map(|id| id.map_or_else(BigRational::zero, |id| g.flow(id).clone()))
        .collect();
    cancel_cycles(market, &mut money);
    let allocation: Vec<BigRational> = market
        .pairs
        .iter()
        .zip(&money)
        .map(|(p, y)| y.clone() / prices[p.good].clone())
        .collect();
    let kkt = kkt_check(market, &prices, &allocation, 0.0);
    if !kkt.exact {
        return None;
    }
    let mut utility = vec![BigRational::zero(); nb];
    for (k, p) in market.pairs.iter().enumerate() {
        utility[p.buyer] += u[k].clone() * allocation[k].clone();
    }
    Some(Equilibrium {
        prices,
        allocation,
        utility,
        kkt,
    })
}

/// Exact equilibrium from an approximate allocation (one entry per pair).
///
/// Supports `{x_ij > θ}` are tried for decreasing thresholds `θ`; the first
/// one whose exact solution passes the KKT check with zero residual wins.
pub fn recover_exact_adnb(market: &MarketInstance, approx_allocation: &[f64]) -> Result<Equilibrium<BigRational>, MarketError> {
    let u = linear_utilities(market)?;
    let mut tried: Vec<Vec<bool>> = Vec::new();
    for k in 1..=14 {
        let theta = 10f64.powi(-k);
        let support: Vec<bool> = approx_allocation.iter().map(|&x| x > theta).collect();
        if tried.contains(&support) {
            continue;
        }
        if let Some(eq) = try_support(market, &u, &support) {
            return Ok(eq);
        }
        tried.push(support);
    }
    Err(MarketError::Recovery(format!(
        "none of {} candidate supports yields an exact equilibrium",
        tried.len()
    )))
}

/// Least common denominator of the allocation entries.
pub fn support_denominator(eq: &Equilibrium<BigRational>) -> BigInt {
    eq.allocation.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

/// `max s  s.t.  sum_j U_ij x_ij - c_i >= s,  sum_i x_ij <= 1,  x >= 0`.
/// The ADNB instance is feasible iff the optimum is positive.
pub fn feasibility_margin(market: &MarketInstance) -> Result<BigRational, MarketError> {
    let u = linear_utilities(market)?;
    let (nb, ng) = (market.buyer_count(), market.good_count());
    let mut lp = Lp::new(nb + ng);
    for i in 0..nb {
        lp.rhs[i] = BigRational::from_integer(market.disagreement[i].into());
    }
    for j in 0..ng {
        lp.rhs[nb + j] = BigRational::one();
    }
    let one = BigRational::one;
    for (k, p) in market.pairs.iter().enumerate() {
        lp.add_column(vec![(p.buyer, u[k].clone()), (nb + p.good, one())], BigRational::zero(), None);
    }
    // s = s⁺ - s⁻, maximized
    let s_plus = lp.add_column((0..nb).map(|i| (i, -one())).collect(), -one(), None);
    lp.add_column((0..nb).map(|i| (i, one())).collect(), one(), None);
    for i in 0..nb {
        lp.add_column(vec![(i, -one())], BigRational::zero(), None);
    }
    for j in 0..ng {
        lp.add_column(vec![(nb + j, one())], BigRational::zero(), None);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Ok(x[s_plus].clone() - x[s_plus + 1].clone()),
        other => Err(MarketError::Recovery(format!("feasibility LP reported {other:?}"))),
    }
}
