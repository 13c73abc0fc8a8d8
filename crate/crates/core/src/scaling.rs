//! Fat-path scaling engine shared by the exact linear solver and the concave
//! solver.
//!
//! The engine owns the mutable state of one solve: flow, cached excesses and
//! node labels. Arc "linearization" goes through [`ArcGain`], so for linear
//! gains every ratio computed here equals the relabeled gain factor exactly.

use serde::{Deserialize, Serialize};

use crate::gain::ArcGain;
use crate::heap::IndexedHeap;
use crate::network::{Network, NetworkError, ResidualArc};
use crate::scalar::{Extended, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|θ - 1| <= theta` counts as tight.
    pub theta: f64,
    /// Relative slack used when classifying nodes against `d_i Δ`.
    pub classify: f64,
    /// Relative slack for invariant and bound checks.
    pub invariant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            theta: 1e-10,
            classify: 1e-9,
            invariant: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tolerances: Tolerances,
    /// Sweep θ, label monotonicity and node classes after every operation.
    pub check_invariants: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            check_invariants: false,
        }
    }
}

impl SolveOptions {
    pub fn checked() -> Self {
        Self {
            check_invariants: true,
            ..Self::default()
        }
    }
}

/// Measurements taken at the boundaries of one Δ-phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub phase: usize,
    pub delta: f64,
    pub ex_start: f64,
    pub start_bound_ok: bool,
    pub augmentations: usize,
    pub augmentation_bound: usize,
    pub ex_end: f64,
    pub ex_after_adjust: f64,
    pub adjust_bound_ok: bool,
    pub adjusted_arcs: usize,
    pub max_flow_change: f64,
    pub max_gain_change: f64,
    pub per_arc_ok: bool,
    pub kappa: f64,
}

/// Counters filled by the optional invariant sweeps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantLog {
    pub enabled: bool,
    pub sweeps: usize,
    pub theta_violations: usize,
    pub max_theta: f64,
    pub label_decreases: usize,
    pub new_negative_nodes: usize,
    pub negative_label_violations: usize,
    pub potential_violations: usize,
    /// Augmentations that left Ψ unchanged (source surplus below one Δ).
    pub potential_stalls: usize,
    pub dijkstra_order_violations: usize,
    pub max_excess_drift: f64,
    /// Δ at which floating-point augmentations stopped changing the flow
    /// (relabeled steps below one ulp). Scaling ends there.
    pub precision_floor: Option<f64>,
}

impl InvariantLog {
    pub fn clean(&self) -> bool {
        self.theta_violations == 0
            && self.label_decreases == 0
            && self.new_negative_nodes == 0
            && self.negative_label_violations == 0
            && self.potential_violations == 0
            && self.dijkstra_order_violations == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Negative,
    Neutral,
    Positive,
}

#[derive(Debug, Clone, Default)]
pub struct AdjustStats {
    pub arcs: usize,
    pub max_flow_change: f64,
    pub max_gain_change: f64,
}

pub struct Engine<'a, S: Scalar, G: ArcGain<S>> {
    pub net: &'a Network<S, G>,
    pub f: Vec<S>,
    pub e: Vec<S>,
    pub mu: Vec<S>,
    pub delta: S,
    pub opts: SolveOptions,
    pub log: InvariantLog,
    pub parent: Vec<Option<ResidualArc>>,
    negative: Vec<bool>,
}

impl<'a, S: Scalar, G: ArcGain<S>> Engine<'a, S, G> {
    pub fn new(net: &'a Network<S, G>, f: Vec<S>, mu: Vec<S>, delta: S, opts: SolveOptions) -> Result<Self, SolveError> {
        let mut e = Vec::with_capacity(net.node_count());
        for i in 0..net.node_count() {
            match net.excess_at(&f, i) {
                Extended::Finite(v) => e.push(v),
                Extended::NegInfinity => {
                    return Err(SolveError::Input(format!(
                        "node {} has excess minus infinity at the initial flow",
                        i + 1
                    )))
                }
            }
        }
        let mut eng = Self {
            net,
            f,
            e,
            mu,
            delta,
            opts,
            log: InvariantLog {
                enabled: opts.check_invariants,
                ..InvariantLog::default()
            },
            parent: vec![None; net.node_count()],
            negative: vec![false; net.node_count()],
        };
        eng.negative = eng.negative_set(&eng.delta.clone());
        Ok(eng)
    }

    pub fn node_count(&self) -> usize {
        self.net.node_count()
    }

    /// `2n + 3m`.
    pub fn phase_bound(&self) -> usize {
        2 * self.net.node_count() + 3 * self.net.arc_count()
    }

    pub fn rel_excess(&self, i: usize) -> S {
        self.e[i].clone() / self.mu[i].clone()
    }

    fn reserve(&self, i: usize, delta: &S) -> S {
        S::from_i64(self.net.degree(i) as i64) * delta.clone()
    }

    fn class_slack(&self, x: &S, t: &S) -> S {
        S::slack(&S::max_of(x.abs(), t.abs()), self.opts.tolerances.classify)
    }

    pub fn class(&self, i: usize, delta: &S) -> NodeClass {
        let x = self.rel_excess(i);
        let t = self.reserve(i, delta);
        let slack = self.class_slack(&x, &t);
        if x < t.clone() - slack.clone() {
            NodeClass::Negative
        } else if x <= t + slack {
            NodeClass::Neutral
        } else {
            NodeClass::Positive
        }
    }

    /// Member of `D = {e^μ > (d + 1)Δ}`. Isolated nodes never qualify.
    pub fn in_d(&self, i: usize) -> bool {
        if self.net.degree(i) == 0 {
            return false;
        }
        let x = self.rel_excess(i);
        let t = S::from_i64(self.net.degree(i) as i64 + 1) * self.delta.clone();
        let slack = self.class_slack(&x, &t);
        x > t + slack
    }

    pub fn ex(&self, delta: &S) -> S {
        self.net.modified_excess(&self.e, &self.mu, delta)
    }

    /// `Ψ = sum floor(max(e^μ - (d + 1)Δ, 0) / Δ)`.
    pub fn potential(&self) -> S {
        let mut psi = S::zero();
        for i in 0..self.node_count() {
            if self.net.degree(i) == 0 {
                continue;
            }
            let over = self.rel_excess(i) - S::from_i64(self.net.degree(i) as i64 + 1) * self.delta.clone();
            if over.is_positive() {
                psi = psi + (over / self.delta.clone()).floor();
            }
        }
        psi
    }

    pub fn kappa(&self) -> S {
        let mut k = S::zero();
        for (i, nd) in self.net.nodes().iter().enumerate() {
            if self.e[i].is_negative() {
                k = k + nd.penalty.clone() * (-self.e[i].clone());
            }
        }
        k
    }

    fn excess_scale(&self) -> S {
        (0..self.node_count()).fold(S::zero(), |acc, i| acc + self.rel_excess(i).abs())
    }

    /// Slack for comparing a measured quantity against an analytic bound.
    fn bound_slack(&self, bound: &S) -> S {
        S::slack(bound, 1e-9) + S::slack(&self.excess_scale(), 1e-12)
    }

    fn negative_set(&self, delta: &S) -> Vec<bool> {
        (0..self.node_count())
            .map(|i| self.net.degree(i) > 0 && self.class(i, delta) == NodeClass::Negative)
            .collect()
    }

    fn residual(&self, r: ResidualArc) -> bool {
        self.net.is_residual(&self.f, r)
    }

    /// Head increase, in head units, that `chunk` relabeled units require.
    fn head_need(&self, r: ResidualArc, chunk: &S) -> S {
        chunk.clone() * self.mu[self.net.head_of(r)].clone()
    }

    /// Tail-unit cost of delivering `chunk` relabeled units at the head, or
    /// `None` when the arc is not `chunk`-fat.
    fn chunk_cost(&self, r: ResidualArc, chunk: &S) -> Option<S> {
        let a = r.arc;
        let edge = self.net.arc(a);
        let need = self.head_need(r, chunk);
        if self.net.fatness(&self.f, r) < need {
            return None;
        }
        let cost = if r.forward {
            let dx = edge.gain.inverse_delta(&self.f[a], &need);
            if self.f[a].clone() + dx.clone() > edge.upper {
                return None;
            }
            dx
        } else if let Some(g) = edge.gain.linear_factor() {
            // f - (f - need) cancels badly when need is tiny next to f
            g * need
        } else {
            edge.gain.delta(&(self.f[a].clone() - need), &self.f[a])
        };
        if !cost.is_positive() {
            return None;
        }
        Some(cost)
    }

    /// `θ_chunk^μ` of a residual arc; `None` when it is not `chunk`-fat.
    pub fn theta(&self, r: ResidualArc, chunk: &S) -> Option<S> {
        if !self.residual(r) {
            return None;
        }
        let cost = self.chunk_cost(r, chunk)?;
        let tail = self.net.tail_of(r);
        Some(chunk.clone() * self.mu[tail].clone() / cost)
    }

    pub fn is_tight(&self, theta: &S) -> bool {
        if S::EXACT {
            *theta == S::one()
        } else {
            (theta.to_f64() - 1.0).abs() <= self.opts.tolerances.theta
        }
    }

    fn theta_exceeds(&self, r: ResidualArc, chunk: &S, theta: &S) -> bool {
        if S::EXACT {
            *theta > S::one()
        } else {
            theta.to_f64() > 1.0 + self.opts.tolerances.theta + self.theta_noise(r, chunk)
        }
    }

    /// Relative rounding error of a float `θ_chunk` on a nonlinear arc. The
    /// chunk cost is a difference of oracle values near `f`, so it carries an
    /// absolute error of a few ulps of `f` and `Γ(f)` that a tiny chunk turns
    /// into a large relative one.
    fn theta_noise(&self, r: ResidualArc, chunk: &S) -> f64 {
        let edge = self.net.arc(r.arc);
        if edge.gain.linear_factor().is_some() {
            return 0.0;
        }
        let Some(cost) = self.chunk_cost(r, chunk) else { return 0.0 };
        let (x, y) = edge.gain.magnitudes(&self.f[r.arc]);
        let scale = if r.forward {
            let d = edge.gain.right_derivative(&self.f[r.arc]).map_or(0.0, |d| d.to_f64());
            x + if d > 0.0 && d.is_finite() { y / d } else { 0.0 }
        } else {
            let d = edge.gain.left_derivative(&self.f[r.arc]).map_or(0.0, |d| d.to_f64());
            y + if d.is_finite() { x * d } else { 0.0 }
        };
        4.0 * f64::EPSILON * scale / cost.to_f64()
    }

    /// Tail label at which the arc becomes tight. With `chunk = None` the
    /// arc must be linear and every residual arc qualifies.
    fn tight_target(&self, r: ResidualArc, chunk: Option<&S>) -> Option<S> {
        match chunk {
            Some(c) => {
                let cost = self.chunk_cost(r, c)?;
                if !cost.to_f64().is_finite() {
                    return None;
                }
                Some(cost / c.clone())
            }
            None => {
                let g = self.net.arc(r.arc).gain.linear_factor()?;
                let head = self.mu[self.net.head_of(r)].clone();
                Some(if r.forward { head / g } else { head * g })
            }
        }
    }

    /// Residual arcs entering `j`.
    fn residual_into(&self, j: usize) -> Vec<ResidualArc> {
        let mut out = Vec::new();
        for &a in self.net.in_arcs(j) {
            let r = ResidualArc { arc: a, forward: true };
            if self.residual(r) {
                out.push(r);
            }
        }
        for &a in self.net.out_arcs(j) {
            let r = ResidualArc { arc: a, forward: false };
            if self.residual(r) {
                out.push(r);
            }
        }
        out
    }

    /// Multiplicative Dijkstra. With `Some(Δ)` it produces a Δ-canonical
    /// labeling and returns all-true; with `None` (linear gains only) it
    /// starts from the deficit nodes without a cap and reports which nodes
    /// reached them (the rest have infinite labels).
    pub fn tighten(&mut self, chunk: Option<&S>) -> Vec<bool> {
        let n = self.node_count();
        let orig = self.mu.clone();
        let mut in_s = vec![false; n];
        let mut parent: Vec<Option<ResidualArc>> = vec![None; n];
        let mut cand: Vec<Option<ResidualArc>> = vec![None; n];
        let mut heap: IndexedHeap<S> = IndexedHeap::new(n);
        let mut alpha = S::one();
        let mut seeds = Vec::new();
        for i in 0..n {
            let seed = match chunk {
                None => self.e[i].is_negative(),
                Some(d) => self.net.degree(i) == 0 || self.class(i, d) != NodeClass::Positive,
            };
            if seed {
                seeds.push(i);
            } else if let Some(d) = chunk {
                let cap = self.e[i].clone() / (orig[i].clone() * self.reserve(i, d));
                heap.push_or_decrease(i, S::max_of(cap, S::one()));
            }
        }
        for &i in &seeds {
            in_s[i] = true;
        }
        let mut frontier = seeds;
        loop {
            for j in frontier.drain(..) {
                for r in self.residual_into(j) {
                    let t = self.net.tail_of(r);
                    if in_s[t] {
                        continue;
                    }
                    let Some(target) = self.tight_target(r, chunk) else { continue };
                    let key = target / orig[t].clone();
                    if key < alpha.clone() - S::slack(&alpha, self.opts.tolerances.classify) {
                        self.log.dijkstra_order_violations += 1;
                    }
                    let key = S::max_of(key, alpha.clone());
                    if heap.push_or_decrease(t, key) {
                        cand[t] = Some(r);
                    }
                }
            }
            let Some((i, k)) = heap.pop() else { break };
            alpha = S::max_of(alpha, k);
            in_s[i] = true;
            self.mu[i] = orig[i].clone() * alpha.clone();
            parent[i] = cand[i];
            frontier.push(i);
        }
        self.parent = parent;
        if self.opts.check_invariants {
            for i in 0..n {
                if self.mu[i] < orig[i] {
                    self.log.label_decreases += 1;
                }
            }
            if let Some(d) = chunk {
                let d = d.clone();
                self.sweep(&d);
            }
        }
        in_s
    }

    /// Moves `amount` relabeled units across a residual arc.
    pub fn push_along(&mut self, r: ResidualArc, amount: &S) {
        let a = r.arc;
        let edge = self.net.arc(a);
        let origin = edge.tail;
        let dx = amount.clone() * self.mu[origin].clone();
        let new = if r.forward {
            S::min_of(self.f[a].clone() + dx, edge.upper.clone())
        } else {
            S::max_of(self.f[a].clone() - dx, edge.lower.clone())
        };
        self.set_flow(a, new);
    }

    pub fn set_flow(&mut self, a: usize, new: S) {
        let edge = self.net.arc(a);
        let old = std::mem::replace(&mut self.f[a], new.clone());
        let gained = edge.gain.delta(&old, &new);
        self.e[edge.tail] = self.e[edge.tail].clone() - (new - old);
        self.e[edge.head] = self.e[edge.head].clone() + gained;
    }

    /// The tight path recorded by the last [`tighten`](Self::tighten) from `s`.
    pub fn path_from(&self, s: usize) -> Result<Vec<ResidualArc>, SolveError> {
        let mut path = Vec::new();
        let mut v = s;
        while let Some(r) = self.parent[v] {
            path.push(r);
            v = self.net.head_of(r);
            if path.len() > self.node_count() {
                return Err(SolveError::Internal("cycle in tight-path forest".into()));
            }
        }
        if path.is_empty() {
            return Err(SolveError::Internal(format!("node {} has no tight path", s + 1)));
        }
        Ok(path)
    }

    pub fn augment(&mut self, s: usize) -> Result<(), SolveError> {
        let path = self.path_from(s)?;
        let delta = self.delta.clone();
        for r in path {
            self.push_along(r, &delta);
        }
        if self.opts.check_invariants {
            self.sweep(&delta);
        }
        Ok(())
    }

    /// Repairs conservativity for the halved scale: every `Δ/2`-fat arc with
    /// `θ_{Δ/2} > 1` receives `Δ/2` relabeled units at its head.
    pub fn adjust_half(&mut self) -> AdjustStats {
        let delta = self.delta.clone();
        let half = delta.clone() / S::from_i64(2);
        let mut st = AdjustStats::default();
        for a in 0..self.net.arc_count() {
            for forward in [true, false] {
                let r = ResidualArc { arc: a, forward };
                let Some(th) = self.theta(r, &half) else { continue };
                if !self.theta_exceeds(r, &half, &th) {
                    continue;
                }
                let edge = self.net.arc(a);
                let head = self.net.head_of(r);
                let was_fat = self.net.fatness(&self.f, r) >= delta.clone() * self.mu[head].clone();
                let need = half.clone() * self.mu[head].clone();
                let old = self.f[a].clone();
                let mut new = if forward {
                    let dx = edge.gain.inverse_delta(&old, &need);
                    S::min_of(old.clone() + dx, edge.upper.clone())
                } else {
                    S::max_of(old.clone() - need.clone(), edge.lower.clone())
                };
                if !S::EXACT && !was_fat {
                    // rounding left an arc that cannot be half-fat any more
                    if forward && edge.gain.delta(&new, &edge.upper) >= need {
                        new = edge.upper.clone();
                    } else if !forward && !edge.gain.is_immense() && new >= need {
                        new = edge.lower.clone();
                    }
                }
                let gained = edge.gain.delta(&old, &new);
                let df = (new.clone() - old.clone()).abs() / self.mu[edge.tail].clone();
                let dg = gained.abs() / self.mu[edge.head].clone();
                st.max_flow_change = st.max_flow_change.max(df.to_f64());
                st.max_gain_change = st.max_gain_change.max(dg.to_f64());
                st.arcs += 1;
                self.set_flow(a, new);
            }
        }
        st
    }

    /// Final linear adjustment to `Δ' = 0`: every residual arc with relabeled
    /// gain above one receives up to `Δ` relabeled units at its head.
    pub fn adjust_to_zero(&mut self) -> Result<AdjustStats, SolveError> {
        let delta = self.delta.clone();
        let mut st = AdjustStats::default();
        for a in 0..self.net.arc_count() {
            let edge = self.net.arc(a);
            let g = edge
                .gain
                .linear_factor()
                .ok_or_else(|| SolveError::Input("final adjustment needs linear gains".into()))?;
            let (i, j) = (edge.tail, edge.head);
            let ratio = g.clone() * self.mu[i].clone() / self.mu[j].clone();
            let old = self.f[a].clone();
            let new = if old < edge.upper && ratio > S::one() {
                S::min_of(edge.upper.clone(), old.clone() + delta.clone() * self.mu[j].clone() / g)
            } else if old > edge.lower && ratio < S::one() {
                old.clone() - S::min_of(old.clone() - edge.lower.clone(), delta.clone() * self.mu[i].clone())
            } else {
                continue;
            };
            let gained = edge.gain.delta(&old, &new);
            st.max_flow_change = st.max_flow_change.max(((new.clone() - old.clone()).abs() / self.mu[i].clone()).to_f64());
            st.max_gain_change = st.max_gain_change.max((gained.abs() / self.mu[j].clone()).to_f64());
            st.arcs += 1;
            self.set_flow(a, new);
        }
        Ok(st)
    }

    /// θ and node-class sweep at scale `delta`.
    pub fn sweep(&mut self, delta: &S) {
        self.log.sweeps += 1;
        for a in 0..self.net.arc_count() {
            for forward in [true, false] {
                let r = ResidualArc { arc: a, forward };
                if let Some(th) = self.theta(r, delta) {
                    let v = th.to_f64();
                    if v > self.log.max_theta {
                        self.log.max_theta = v;
                    }
                    if self.theta_exceeds(r, delta, &th) {
                        self.log.theta_violations += 1;
                    }
                }
            }
        }
        let neg = self.negative_set(delta);
        for i in 0..self.node_count() {
            if neg[i] && !self.negative[i] {
                self.log.new_negative_nodes += 1;
            }
            if neg[i] {
                let floor = S::one() / self.net.node(i).penalty.clone();
                let gap = (self.mu[i].clone() - floor.clone()).abs();
                if gap > S::slack(&floor, 1e-9) {
                    self.log.negative_label_violations += 1;
                }
            }
        }
        self.negative = neg;
    }

    fn recompute_drift(&mut self) {
        let mut drift: f64 = 0.0;
        for i in 0..self.node_count() {
            let fresh = self.net.excess_at(&self.f, i).to_f64();
            drift = drift.max((fresh - self.e[i].to_f64()).abs());
        }
        self.log.max_excess_drift = self.log.max_excess_drift.max(drift);
    }

    /// Runs Δ-phases while `keep_going(Δ)` holds.
    pub fn run_phases(
        &mut self,
        mut keep_going: impl FnMut(&S) -> bool,
        observer: &mut dyn FnMut(&PhaseStats),
    ) -> Result<Vec<PhaseStats>, SolveError> {
        let bound = self.phase_bound();
        let runaway = 50 * bound + 100;
        let m = self.net.arc_count() as i64;
        let mut phases = Vec::new();
        while keep_going(&self.delta) {
            let delta = self.delta.clone();
            let ex_start = self.ex(&delta);
            let start_cap = S::from_i64(bound as i64) * delta.clone();
            let start_bound_ok = ex_start <= start_cap.clone() + self.bound_slack(&start_cap);
            let mut augmentations = 0;
            let mut idle = 0;
            loop {
                self.tighten(Some(&delta));
                let Some(s) = (0..self.node_count()).find(|&i| self.in_d(i)) else { break };
                let psi = self.opts.check_invariants.then(|| self.potential());
                let before = (!S::EXACT).then(|| self.f.clone());
                self.augment(s)?;
                if let Some(before) = before {
                    idle = if before == self.f { idle + 1 } else { 0 };
                    if idle > self.node_count() {
                        self.log.precision_floor = Some(delta.to_f64());
                        return Ok(phases);
                    }
                }
                if let Some(before) = psi {
                    let after = self.potential();
                    if after == before {
                        self.log.potential_stalls += 1;
                    } else if after != before - S::one() {
                        self.log.potential_violations += 1;
                    }
                }
                augmentations += 1;
                if augmentations > runaway {
                    return Err(SolveError::Internal(format!(
                        "phase with Δ = {delta} exceeded {runaway} augmentations"
                    )));
                }
            }
            let ex_end = self.ex(&delta);
            let adj = self.adjust_half();
            let half = delta.clone() / S::from_i64(2);
            self.delta = half.clone();
            let ex_after = self.ex(&half);
            let adjust_cap = S::from_i64(3 * m) * half.clone();
            let adjust_bound_ok = ex_after.clone() - ex_end.clone() <= adjust_cap.clone() + self.bound_slack(&adjust_cap);
            let arc_cap = half.to_f64() + self.opts.tolerances.invariant * half.to_f64().max(1.0);
            let per_arc_ok = if S::EXACT {
                adj.max_flow_change <= half.to_f64() && adj.max_gain_change <= half.to_f64()
            } else {
                adj.max_flow_change <= arc_cap && adj.max_gain_change <= arc_cap
            };
            if self.opts.check_invariants {
                self.sweep(&half);
                self.recompute_drift();
            }
            let stats = PhaseStats {
                phase: phases.len() + 1,
                delta: delta.to_f64(),
                ex_start: ex_start.to_f64(),
                start_bound_ok,
                augmentations,
                augmentation_bound: bound,
                ex_end: ex_end.to_f64(),
                ex_after_adjust: ex_after.to_f64(),
                adjust_bound_ok,
                adjusted_arcs: adj.arcs,
                max_flow_change: adj.max_flow_change,
                max_gain_change: adj.max_gain_change,
                per_arc_ok,
                kappa: self.kappa().to_f64(),
            };
            observer(&stats);
            phases.push(stats);
        }
        Ok(phases)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::{GainFunction, LinearGain};
    use crate::network::{Edge, NodeData};
    use crate::scalar::{integer, rational};
    use approx::assert_relative_eq;
    use num_rational::BigRational;

    fn node(b: BigRational, m: i64) -> NodeData<BigRational> {
        NodeData { demand: b, penalty: integer(m) }
    }

    fn lin(tail: usize, head: usize, u: i64, g: BigRational) -> Edge<BigRational, LinearGain> {
        Edge {
            tail,
            head,
            lower: integer(0),
            upper: integer(u),
            gain: LinearGain(g),
        }
    }

    #[test]
    fn theta_of_linear_arc_is_relabeled_gain() {
        let net = Network::new(vec![node(integer(0), 1), node(integer(0), 1)], vec![lin(0, 1, 100, rational(3, 2))]).unwrap();
        let eng = Engine::new(&net, vec![integer(10)], vec![integer(2), integer(5)], integer(1), SolveOptions::default()).unwrap();
        let fwd = ResidualArc { arc: 0, forward: true };
        let bwd = ResidualArc { arc: 0, forward: false };
        assert_eq!(eng.theta(fwd, &integer(1)), Some(rational(3, 5)));
        assert_eq!(eng.theta(bwd, &integer(1)), Some(rational(5, 3)));
        // not 4-fat backwards: f / μ_tail = 5 < ... 10/2 = 5 >= 4 is fat, 6 is not
        assert!(eng.theta(bwd, &integer(6)).is_none());
    }

    #[test]
    fn theta_of_log_arc() {
        let g = GainFunction::log(1.0).unwrap().restricted(0.0, 10.0);
        let net = Network::new(
            vec![NodeData { demand: 0.0, penalty: 1.0 }; 2],
            vec![Edge { tail: 0, head: 1, lower: 0.0, upper: 10.0, gain: g }],
        )
        .unwrap();
        let eng = Engine::new(&net, vec![1.0], vec![1.0, 1.0], 1.0, SolveOptions::default()).unwrap();
        let th = eng.theta(ResidualArc { arc: 0, forward: true }, &1.0).unwrap();
        assert_relative_eq!(th, 1.0 / (std::f64::consts::E - 1.0), max_relative = 1e-14);
    }

    #[test]
    fn tighten_single_step_doubles_source_label() {
        // s has large excess, t is a deficit node; arc s -> t with γ = 1/2
        let net = Network::new(vec![node(integer(-40), 1), node(integer(1), 1)], vec![lin(0, 1, 100, rational(1, 2))]).unwrap();
        let mut eng = Engine::new(&net, vec![integer(0)], vec![integer(1), integer(1)], integer(1), SolveOptions::checked()).unwrap();
        eng.tighten(Some(&integer(1)));
        assert_eq!(eng.mu, vec![integer(2), integer(1)]);
        let r = ResidualArc { arc: 0, forward: true };
        assert_eq!(eng.theta(r, &integer(1)), Some(integer(1)));
        assert_eq!(eng.parent[0], Some(r));
        assert!(eng.log.clean());
    }

    #[test]
    fn tighten_is_identity_on_canonical_labels() {
        let net = Network::new(vec![node(integer(-40), 1), node(integer(1), 1)], vec![lin(0, 1, 100, integer(1))]).unwrap();
        let mut eng = Engine::new(&net, vec![integer(0)], vec![integer(1), integer(1)], integer(1), SolveOptions::default()).unwrap();
        eng.tighten(Some(&integer(1)));
        assert_eq!(eng.mu, vec![integer(1), integer(1)]);
    }

    #[test]
    fn tighten_cap_branch_makes_node_neutral() {
        // e_s = 3 with d_s = 1, Δ = 1: cap ratio 3 < 1/γ^μ = 10
        let net = Network::new(vec![node(integer(-3), 1), node(integer(1), 1)], vec![lin(0, 1, 100, rational(1, 10))]).unwrap();
        let mut eng = Engine::new(&net, vec![integer(0)], vec![integer(1), integer(1)], integer(1), SolveOptions::checked()).unwrap();
        eng.tighten(Some(&integer(1)));
        assert_eq!(eng.mu[0], integer(3));
        assert_eq!(eng.class(0, &integer(1)), NodeClass::Neutral);
        assert_eq!(eng.parent[0], None);
        assert_eq!(eng.theta(ResidualArc { arc: 0, forward: true }, &integer(1)), Some(rational(3, 10)));
    }

    #[test]
    fn augmentation_on_tight_path_moves_delta() {
        // 0 -> 1 -> 2, all γ = 1, node 0 rich, node 2 poor
        let net = Network::new(
            vec![node(integer(-20), 1), node(integer(0), 1), node(integer(5), 1)],
            vec![lin(0, 1, 50, integer(1)), lin(1, 2, 50, integer(1))],
        )
        .unwrap();
        let mut eng = Engine::new(&net, vec![integer(0); 2], vec![integer(1); 3], integer(2), SolveOptions::checked()).unwrap();
        eng.tighten(Some(&integer(2)));
        assert!(eng.in_d(0));
        let psi = eng.potential();
        eng.augment(0).unwrap();
        // node 1 is Δ-neutral (e = 0 <= d Δ), so the path stops there
        assert_eq!(eng.e, vec![integer(18), integer(2), integer(-5)]);
        assert_eq!(eng.potential(), psi - integer(1));
        // the reverse arc is tight as well
        assert_eq!(eng.theta(ResidualArc { arc: 0, forward: false }, &integer(2)), Some(integer(1)));
        assert!(eng.log.clean());
    }

    #[test]
    fn adjust_half_moves_only_violating_arcs() {
        let net = Network::new(vec![node(integer(0), 1), node(integer(0), 1)], vec![lin(0, 1, 10, rational(1, 2))]).unwrap();
        let mut eng = Engine::new(&net, vec![integer(4)], vec![integer(1), integer(1)], integer(2), SolveOptions::default()).unwrap();
        // backward relabeled gain is 2 on a 1-fat arc: one unit is pushed back
        let st = eng.adjust_half();
        assert_eq!(st.arcs, 1);
        assert_eq!(eng.f[0], integer(3));
        let mut eng2 = Engine::new(&net, vec![integer(0)], vec![integer(1), integer(1)], integer(2), SolveOptions::default()).unwrap();
        assert_eq!(eng2.adjust_half().arcs, 0);
        assert_eq!(eng2.f[0], integer(0));
    }

    #[test]
    fn adjust_to_zero_saturates_small_headroom() {
        let net = Network::new(vec![node(integer(0), 1), node(integer(0), 1)], vec![lin(0, 1, 10, integer(2))]).unwrap();
        let mut eng = Engine::new(&net, vec![rational(19, 2)], vec![integer(1), integer(1)], integer(4), SolveOptions::default()).unwrap();
        eng.adjust_to_zero().unwrap();
        assert_eq!(eng.f[0], integer(10));
    }

    #[test]
    fn adjust_concave_cases() {
        // case (b): Δ-fat log arc with θ_Δ <= 1 but θ_{Δ/2} > 1 after relabel
        let g = GainFunction::log(1.0).unwrap().restricted(0.0, 50.0);
        let net = Network::new(
            vec![NodeData { demand: 0.0, penalty: 1.0 }; 2],
            vec![Edge { tail: 0, head: 1, lower: 0.0, upper: 50.0, gain: g }],
        )
        .unwrap();
        let fwd = ResidualArc { arc: 0, forward: true };
        let delta = 1.0;
        let f0 = 1.0;
        let dx_full = (1.0f64).exp_m1(); // Γ⁻¹(Γ(1) + 1) - 1
        let mu_tail = dx_full / delta; // θ_Δ = 1 exactly
        let mut eng = Engine::new(&net, vec![f0], vec![mu_tail, 1.0], delta, SolveOptions::default()).unwrap();
        assert!((eng.theta(fwd, &delta).unwrap() - 1.0).abs() < 1e-14);
        assert!(eng.theta(fwd, &0.5).unwrap() > 1.0);
        let st = eng.adjust_half();
        assert_eq!(st.arcs, 1);
        assert!(eng.theta(fwd, &0.5).unwrap() <= 1.0 + 1e-12);
        assert!(st.max_gain_change <= 0.5 + 1e-12 && st.max_flow_change <= 0.5 + 1e-12);

        // case (a): not Δ-fat, so afterwards not Δ/2-fat either
        let mut eng = Engine::new(&net, vec![49.9], vec![1.0, 3e-3], delta, SolveOptions::default()).unwrap();
        let fat = net.fatness(&eng.f, fwd) / eng.mu[1];
        assert!(fat < delta && fat >= 0.5);
        eng.adjust_half();
        assert!(eng.theta(fwd, &0.5).is_none());
    }
}
