//! Market equilibrium front-ends: linear Fisher markets, price
//! discrimination with concave utilities, and nonsymmetric Arrow-Debreu Nash
//! bargaining (ADNB), all posed as sink problems on the graph
//! goods → buyers → t.

mod recover;

pub use recover::{feasibility_margin, recover_exact_adnb, support_denominator};

use std::collections::HashMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::concave::ConcaveSolution;
use crate::gain::{GainFunction, GainSpec};
use crate::network::{ConcaveNetwork, Edge, Network, NodeData};
use crate::scalar::Scalar;
use crate::scaling::{SolveError, SolveOptions};
use crate::sink::{solve_sink, SinkOutcome, SinkSolution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarketError {
    #[error("market file: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
    #[error("buyer '{0}' has no good with positive utility")]
    IsolatedBuyer(String),
    #[error("good '{0}' has no buyer with positive utility")]
    IsolatedGood(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("label of node {node} reached {label}, above the bound {bound}")]
    LabelBound { node: usize, label: f64, bound: f64 },
    #[error("exact recovery failed: {0}")]
    Recovery(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Utility {
    /// `U_ij α` with a nonnegative integer `U_ij`.
    Linear(i64),
    /// Arbitrary concave increasing utility (price discrimination).
    Gain(GainSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub buyer: usize,
    pub good: usize,
    pub utility: Utility,
}

/// Buyers with budgets `m_i` and disagreement utilities `c_i`, unit-supply
/// goods, and utilities on buyer/good pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    pub buyer_ids: Vec<String>,
    pub good_ids: Vec<String>,
    pub budgets: Vec<i64>,
    pub disagreement: Vec<i64>,
    /// Pairs with positive utility only.
    pub pairs: Vec<Pair>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Id {
    Num(i64),
    Name(String),
}

impl Id {
    fn key(&self) -> String {
        match self {
            Id::Num(v) => v.to_string(),
            Id::Name(s) => s.clone(),
        }
    }
}

#[derive(Deserialize)]
struct BuyerRecord {
    id: Id,
    budget: i64,
    #[serde(default)]
    disagreement: i64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GoodRecord {
    Object { id: Id },
    Bare(Id),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum UtilityValue {
    Int(i64),
    Spec(String),
}

#[derive(Deserialize)]
struct MarketFile {
    buyers: Vec<BuyerRecord>,
    goods: Vec<GoodRecord>,
    utilities: Vec<(Id, Id, UtilityValue)>,
}

#[derive(Serialize)]
struct BuyerOut<'a> {
    id: &'a str,
    budget: i64,
    disagreement: i64,
}

#[derive(Serialize)]
struct GoodOut<'a> {
    id: &'a str,
}

impl MarketInstance {
    /// Linear market with buyers and goods numbered from 1.
    pub fn linear(budgets: Vec<i64>, disagreement: Vec<i64>, goods: usize, utilities: &[(usize, usize, i64)]) -> Result<Self, MarketError> {
        let pairs = utilities
            .iter()
            .filter(|u| u.2 != 0)
            .map(|&(buyer, good, u)| Pair {
                buyer,
                good,
                utility: Utility::Linear(u),
            })
            .collect();
        Self::new(
            (1..=budgets.len()).map(|i| i.to_string()).collect(),
            (1..=goods).map(|j| j.to_string()).collect(),
            budgets,
            disagreement,
            pairs,
        )
    }

    pub fn new(
        buyer_ids: Vec<String>,
        good_ids: Vec<String>,
        budgets: Vec<i64>,
        disagreement: Vec<i64>,
        pairs: Vec<Pair>,
    ) -> Result<Self, MarketError> {
        if budgets.len() != buyer_ids.len() || disagreement.len() != buyer_ids.len() {
            return Err(MarketError::Invalid("buyer data lengths differ".into()));
        }
        if buyer_ids.is_empty() || good_ids.is_empty() {
            return Err(MarketError::Invalid("a market needs at least one buyer and one good".into()));
        }
        for (i, (&m, &c)) in budgets.iter().zip(&disagreement).enumerate() {
            if m < 1 {
                return Err(MarketError::Invalid(format!("buyer '{}': budget must be a positive integer", buyer_ids[i])));
            }
            if c < 0 {
                return Err(MarketError::Invalid(format!("buyer '{}': disagreement utility must be nonnegative", buyer_ids[i])));
            }
        }
        let mut buyer_seen = vec![false; buyer_ids.len()];
        let mut good_seen = vec![false; good_ids.len()];
        for p in &pairs {
            if p.buyer >= buyer_ids.len() || p.good >= good_ids.len() {
                return Err(MarketError::Invalid("utility refers to an unknown buyer or good".into()));
            }
            match &p.utility {
                Utility::Linear(u) if *u <= 0 => {
                    return Err(MarketError::Invalid("linear utilities must be positive integers".into()))
                }
                Utility::Gain(spec) => {
                    let g = spec.to_function().map_err(|e| MarketError::Invalid(e.to_string()))?;
                    let at_zero = g.value(0.0).ok().and_then(|v| v.finite().copied());
                    if !matches!(at_zero, Some(v) if v >= 0.0) {
                        return Err(MarketError::Invalid(format!("utility '{spec}' must be finite and nonnegative at zero")));
                    }
                    if !matches!(g.value(1.0).ok().and_then(|v| v.finite().copied()), Some(v) if v > 0.0) {
                        return Err(MarketError::Invalid(format!("utility '{spec}' must be positive at one")));
                    }
                }
                _ => {}
            }
            buyer_seen[p.buyer] = true;
            good_seen[p.good] = true;
        }
        if let Some(i) = buyer_seen.iter().position(|s| !s) {
            return Err(MarketError::IsolatedBuyer(buyer_ids[i].clone()));
        }
        if let Some(j) = good_seen.iter().position(|s| !s) {
            return Err(MarketError::IsolatedGood(good_ids[j].clone()));
        }
        Ok(Self {
            buyer_ids,
            good_ids,
            budgets,
            disagreement,
            pairs,
        })
    }

    pub fn parse_json(text: &str) -> Result<Self, MarketError> {
        let file: MarketFile = serde_json::from_str(text).map_err(|e| MarketError::Parse(e.to_string()))?;
        let mut buyer_index = HashMap::new();
        let (mut buyer_ids, mut budgets, mut disagreement) = (Vec::new(), Vec::new(), Vec::new());
        for b in &file.buyers {
            let key = b.id.key();
            if buyer_index.insert(key.clone(), buyer_ids.len()).is_some() {
                return Err(MarketError::Parse(format!("duplicate buyer '{key}'")));
            }
            buyer_ids.push(key);
            budgets.push(b.budget);
            disagreement.push(b.disagreement);
        }
        let mut good_index = HashMap::new();
        let mut good_ids = Vec::new();
        for g in &file.goods {
            let key = match g {
                GoodRecord::Object { id } | GoodRecord::Bare(id) => id.key(),
            };
            if good_index.insert(key.clone(), good_ids.len()).is_some() {
                return Err(MarketError::Parse(format!("duplicate good '{key}'")));
            }
            good_ids.push(key);
        }
        let mut pairs = Vec::new();
        for (b, g, u) in &file.utilities {
            let buyer = *buyer_index
                .get(&b.key())
                .ok_or_else(|| MarketError::Parse(format!("unknown buyer '{}'", b.key())))?;
            let good = *good_index
                .get(&g.key())
                .ok_or_else(|| MarketError::Parse(format!("unknown good '{}'", g.key())))?;
            let utility = match u {
                UtilityValue::Int(0) => continue,
                UtilityValue::Int(v) => Utility::Linear(*v),
                UtilityValue::Spec(s) => Utility::Gain(GainSpec::parse(s).map_err(MarketError::Parse)?),
            };
            pairs.push(Pair { buyer, good, utility });
        }
        Self::new(buyer_ids, good_ids, budgets, disagreement, pairs)
    }

    pub fn to_json(&self) -> String {
        let buyers: Vec<BuyerOut> = (0..self.buyer_count())
            .map(|i| BuyerOut {
                id: &self.buyer_ids[i],
                budget: self.budgets[i],
                disagreement: self.disagreement[i],
            })
            .collect();
        let goods: Vec<GoodOut> = self.good_ids.iter().map(|id| GoodOut { id }).collect();
        let utilities: Vec<serde_json::Value> = self
            .pairs
            .iter()
            .map(|p| {
                let u = match &p.utility {
                    Utility::Linear(v) => serde_json::json!(v),
                    Utility::Gain(s) => serde_json::json!(s.to_string()),
                };
                serde_json::json!([self.buyer_ids[p.buyer], self.good_ids[p.good], u])
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "buyers": buyers,
            "goods": goods,
            "utilities": utilities,
        }))
        .expect("market serializes")
    }

    pub fn buyer_count(&self) -> usize {
        self.buyer_ids.len()
    }

    pub fn good_count(&self) -> usize {
        self.good_ids.len()
    }

    pub fn is_linear(&self) -> bool {
        self.pairs.iter().all(|p| matches!(p.utility, Utility::Linear(_)))
    }

    pub fn is_fisher(&self) -> bool {
        self.disagreement.iter().all(|&c| c == 0)
    }

    /// Utility of one unit, `U_ij` or `Γ_ij(1)`.
    fn unit_utility(&self, p: &Pair) -> f64 {
        match &p.utility {
            Utility::Linear(u) => *u as f64,
            Utility::Gain(s) => s.to_function().map(|g| g.value_unchecked(1.0).to_f64()).unwrap_or(0.0),
        }
    }

    pub fn u_max(&self) -> f64 {
        self.pairs.iter().map(|p| self.unit_utility(p)).fold(0.0, f64::max).ceil()
    }

    pub fn r_max(&self) -> i64 {
        *self.budgets.iter().max().expect("nonempty")
    }

    pub fn c_max(&self) -> i64 {
        *self.disagreement.iter().max().expect("nonempty")
    }

    /// `|B| + |G|`.
    pub fn n(&self) -> usize {
        self.buyer_count() + self.good_count()
    }

    /// `K = n R U_max`.
    pub fn k_param(&self) -> f64 {
        self.n() as f64 * self.r_max() as f64 * self.u_max()
    }

    /// `max{C, n K ln K}`.
    pub fn default_ustar(&self) -> f64 {
        let k = self.k_param().max(2.0);
        (self.c_max() as f64).max(self.n() as f64 * k * k.ln())
    }

    pub fn utility_of(&self, pair: usize, x: f64) -> f64 {
        match &self.pairs[pair].utility {
            Utility::Linear(u) => *u as f64 * x,
            Utility::Gain(s) => s.to_function().map(|g| g.value_unchecked(x).to_f64()).unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketMode {
    Fisher,
    Adnb,
}

/// A market posed as a sink problem. Goods are nodes `0..|G|`, buyers follow,
/// and the sink is last.
#[derive(Debug, Clone)]
pub struct MarketNetwork {
    pub network: ConcaveNetwork,
    pub sink: usize,
    pub ustar: f64,
    pub mode: MarketMode,
    /// Arc carrying `x_ij` for every pair.
    pub pair_arcs: Vec<usize>,
    /// Arc `i → t` for every buyer.
    pub buyer_arcs: Vec<usize>,
}

impl MarketNetwork {
    pub fn good_node(&self, j: usize) -> usize {
        j
    }

    pub fn buyer_node(&self, market: &MarketInstance, i: usize) -> usize {
        market.good_count() + i
    }
}

fn pair_gain(p: &Pair, cap: f64) -> Result<GainFunction, MarketError> {
    let g = match &p.utility {
        Utility::Linear(u) => GainSpec::Linear(BigRational::from_integer((*u).into())).to_function(),
        Utility::Gain(s) => s.to_function(),
    }
    .map_err(|e| MarketError::Invalid(e.to_string()))?;
    let (lo, hi) = g.domain();
    if lo > 0.0 || hi < cap {
        return Err(MarketError::Invalid(format!("utility '{}' is not defined on [0, {cap}]", g.spec().map(|s| s.to_string()).unwrap_or_default())));
    }
    Ok(g.restricted(0.0, cap))
}

fn build(market: &MarketInstance, mode: MarketMode) -> Result<MarketNetwork, MarketError> {
    let (nb, ng) = (market.buyer_count(), market.good_count());
    let sink = nb + ng;
    let scale = match mode {
        MarketMode::Fisher => 1.0,
        MarketMode::Adnb => 2.0,
    };
    let mut nodes = Vec::with_capacity(sink + 1);
    for _ in 0..ng {
        nodes.push(NodeData { demand: -1.0, penalty: 1.0 });
    }
    for i in 0..nb {
        let c = match mode {
            MarketMode::Fisher => 0.0,
            MarketMode::Adnb => market.disagreement[i] as f64,
        };
        nodes.push(NodeData { demand: c, penalty: 1.0 });
    }
    nodes.push(NodeData { demand: 0.0, penalty: 1.0 });
    let mut arcs = Vec::new();
    let mut pair_arcs = Vec::new();
    let mut reach = vec![0.0; nb];
    for (k, p) in market.pairs.iter().enumerate() {
        pair_arcs.push(arcs.len());
        arcs.push(Edge {
            tail: p.good,
            head: ng + p.buyer,
            lower: 0.0,
            upper: scale,
            gain: pair_gain(p, scale)?,
        });
        reach[p.buyer] += market.utility_of(k, 1.0);
    }
    let mut buyer_arcs = Vec::new();
    for i in 0..nb {
        let cap = scale * reach[i];
        buyer_arcs.push(arcs.len());
        arcs.push(Edge {
            tail: ng + i,
            head: sink,
            lower: 0.0,
            upper: cap,
            gain: GainFunction::log(market.budgets[i] as f64)
                .map_err(|e| MarketError::Invalid(e.to_string()))?
                .restricted(0.0, cap),
        });
    }
    Ok(MarketNetwork {
        network: Network::new(nodes, arcs).map_err(SolveError::from)?,
        sink,
        ustar: market.default_ustar(),
        mode,
        pair_arcs,
        buyer_arcs,
    })
}

/// Eisenberg–Gale program as a sink problem: `x_ij` on good → buyer arcs with
/// gain `U_ij α` (capacity 1), `z_i` on buyer → t arcs with gain `m_i ln α`.
pub fn build_fisher(market: &MarketInstance) -> Result<MarketNetwork, MarketError> {
    if !market.is_fisher() {
        return Err(MarketError::Invalid("Fisher markets have zero disagreement utilities; use the ADNB builder".into()));
    }
    build(market, MarketMode::Fisher)
}

/// ADNB: buyer demands `b_i = c_i`, and capacities doubled so they never bind.
pub fn build_adnb(market: &MarketInstance) -> Result<MarketNetwork, MarketError> {
    build(market, MarketMode::Adnb)
}

/// Prices, allocation (per pair) and utilities, with optimality residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium<S> {
    pub prices: Vec<S>,
    pub allocation: Vec<S>,
    /// `sum_j U_ij x_ij`.
    pub utility: Vec<S>,
    pub kkt: KktReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `max_j |sum_i x_ij - 1|`.
    pub clearing: f64,
    /// Largest `U_ij/p_j - (u_i - c_i)/m_i` over all pairs (0 when none is positive).
    pub bang_per_buck: f64,
    /// Largest `|U_ij/p_j - (u_i - c_i)/m_i|` over pairs with `x_ij` above tolerance.
    pub complementary: f64,
    /// Largest `|sum_j p_j x_ij - (m_i + c_i/b_i)|`.
    pub budget: f64,
    /// Buyers whose surplus `u_i - c_i` is not positive (or below tolerance).
    pub near_infeasible: Vec<usize>,
    pub negative_entries: bool,
    /// Every residual is exactly zero (meaningful for rational solutions).
    pub exact: bool,
}

impl KktReport {
    pub fn within(&self, tol: f64) -> bool {
        self.clearing <= tol
            && self.bang_per_buck <= tol
            && self.complementary <= tol
            && self.budget <= tol
            && self.near_infeasible.is_empty()
            && !self.negative_entries
    }
}

/// KKT conditions of the (nonsymmetric) ADNB / Eisenberg–Gale program.
/// Concave utilities use one-sided derivatives in floating point.
///
/// `tol` decides which allocations count as positive and which surpluses
/// count as degenerate; pass zero for exact checks.
pub fn kkt_check<S: Scalar>(market: &MarketInstance, prices: &[S], allocation: &[S], tol: f64) -> KktReport {
    let (nb, ng) = (market.buyer_count(), market.good_count());
    let mut rep = KktReport {
        exact: true,
        ..KktReport::default()
    };
    let note = |rep: &mut KktReport, r: S, field: fn(&mut KktReport) -> &mut f64, signed: bool| {
        let v = if signed { r.to_f64() } else { r.abs().to_f64() };
        let slot = field(rep);
        if v > *slot {
            *slot = v;
        }
        if (!signed && !r.is_zero()) || (signed && r.is_positive()) {
            rep.exact = false;
        }
    };
    let mut sold = vec![S::zero(); ng];
    let mut utility = vec![S::zero(); nb];
    for (k, p) in market.pairs.iter().enumerate() {
        let x = allocation[k].clone();
        if x.is_negative() {
            rep.negative_entries = true;
        }
        sold[p.good] = sold[p.good].clone() + x.clone();
        let u = match &p.utility {
            Utility::Linear(v) => S::from_i64(*v) * x,
            Utility::Gain(_) => S::from_ratio(&BigRational::from_float(market.utility_of(k, x.to_f64())).unwrap_or_default()),
        };
        utility[p.buyer] = utility[p.buyer].clone() + u;
    }
    for s in sold {
        note(&mut rep, s - S::one(), |r| &mut r.clearing, false);
    }
    if prices.iter().any(|p| !p.is_positive()) {
        rep.negative_entries = true;
        rep.exact = false;
        return rep;
    }
    let mut bpb = Vec::with_capacity(nb);
    for i in 0..nb {
        let surplus = utility[i].clone() - S::from_i64(market.disagreement[i]);
        let scale = (market.disagreement[i] as f64).max(1.0);
        if !surplus.is_positive() || surplus.to_f64() <= tol * scale {
            rep.near_infeasible.push(i);
            rep.exact = false;
        }
        bpb.push(surplus / S::from_i64(market.budgets[i]));
    }
    let mut spent = vec![S::zero(); nb];
    for (k, p) in market.pairs.iter().enumerate() {
        let x = &allocation[k];
        let price = prices[p.good].clone();
        spent[p.buyer] = spent[p.buyer].clone() + price.clone() * x.clone();
        let (marginal_hi, marginal_lo) = match &p.utility {
            Utility::Linear(v) => (S::from_i64(*v), S::from_i64(*v)),
            Utility::Gain(spec) => {
                let g = spec.to_function().expect("validated");
                let xf = x.to_f64();
                let conv = |d: Option<f64>| S::from_ratio(&BigRational::from_float(d.unwrap_or(0.0)).unwrap_or_default());
                (conv(g.right_derivative(xf)), conv(g.left_derivative(xf).or(g.right_derivative(xf))))
            }
        };
        let gap = marginal_hi / price.clone() - bpb[p.buyer].clone();
        note(&mut rep, gap, |r| &mut r.bang_per_buck, true);
        if x.is_positive() && x.to_f64() > tol {
            let gap = marginal_lo / price - bpb[p.buyer].clone();
            note(&mut rep, gap, |r| &mut r.complementary, false);
        }
    }
    for i in 0..nb {
        if bpb[i].is_positive() {
            let target = S::from_i64(market.budgets[i]) + S::from_i64(market.disagreement[i]) / bpb[i].clone();
            note(&mut rep, spent[i].clone() - target, |r| &mut r.budget, false);
        }
    }
    rep.bang_per_buck = rep.bang_per_buck.max(0.0);
    rep
}

/// Reads prices `p_j = μ_t / μ_j`, allocations `x_ij = f_ji` and utilities
/// from a sink solution on a market network.
pub fn extract_equilibrium(
    solution: &SinkSolution<f64, ConcaveSolution>,
    mn: &MarketNetwork,
    market: &MarketInstance,
    tol: f64,
) -> Equilibrium<f64> {
    let labels = &solution.inner.labels;
    let mu_t = labels[mn.sink];
    let prices: Vec<f64> = (0..market.good_count()).map(|j| mu_t / labels[mn.good_node(j)]).collect();
    let allocation: Vec<f64> = mn.pair_arcs.iter().map(|&a| solution.flow[a]).collect();
    let mut utility = vec![0.0; market.buyer_count()];
    for (k, p) in market.pairs.iter().enumerate() {
        utility[p.buyer] += market.utility_of(k, allocation[k]);
    }
    let kkt = kkt_check(market, &prices, &allocation, tol);
    Equilibrium {
        prices,
        allocation,
        utility,
        kkt,
    }
}

/// Outcome of solving a market approximately.
#[derive(Debug, Clone)]
pub struct MarketSolution {
    pub network: MarketNetwork,
    pub sink: SinkOutcome<SinkSolution<f64, ConcaveSolution>>,
    pub equilibrium: Option<Equilibrium<f64>>,
}

/// Builds the sink instance for `mode`, solves it to accuracy `eps` and
/// extracts the equilibrium. In ADNB mode labels are checked against `U*`.
pub fn solve_market(market: &MarketInstance, mode: MarketMode, eps: f64, opts: SolveOptions) -> Result<MarketSolution, MarketError> {
    let mn = match mode {
        MarketMode::Fisher => build_fisher(market)?,
        MarketMode::Adnb => build_adnb(market)?,
    };
    let outcome = solve_sink(&mn.network, mn.sink, eps, Some(mn.ustar), opts)?;
    let equilibrium = match &outcome {
        SinkOutcome::Feasible(sol) => {
            if mode == MarketMode::Adnb {
                for (node, &label) in sol.inner.labels.iter().enumerate() {
                    if label > mn.ustar {
                        return Err(MarketError::LabelBound {
                            node,
                            label,
                            bound: mn.ustar,
                        });
                    }
                }
            }
            Some(extract_equilibrium(sol, &mn, market, eps.sqrt()))
        }
        SinkOutcome::Infeasible { .. } => None,
    };
    Ok(MarketSolution {
        network: mn,
        sink: outcome,
        equilibrium,
    })
}
