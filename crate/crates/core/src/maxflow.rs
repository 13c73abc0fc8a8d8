//! Edmonds–Karp maximum flow over any [`Scalar`].

use std::collections::VecDeque;

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
struct FlowEdge<S> {
    to: usize,
    cap: S,
    flow: S,
}

/// Residual network with paired edges (`id ^ 1` is the reverse of `id`).
#[derive(Debug, Clone)]
pub struct FlowGraph<S> {
    edges: Vec<FlowEdge<S>>,
    adj: Vec<Vec<usize>>,
}

impl<S: Scalar> FlowGraph<S> {
    pub fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: S) -> usize {
        let id = self.edges.len();
        self.edges.push(FlowEdge { to, cap, flow: S::zero() });
        self.edges.push(FlowEdge {
            to: from,
            cap: S::zero(),
            flow: S::zero(),
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    pub fn flow(&self, id: usize) -> &S {
        &self.edges[id].flow
    }

    fn residual(&self, id: usize) -> S {
        self.edges[id].cap.clone() - self.edges[id].flow.clone()
    }

    /// Shortest augmenting paths from `s` to `t`; returns the flow value.
    pub fn max_flow(&mut self, s: usize, t: usize) -> S {
        let n = self.adj.len();
        let mut total = S::zero();
        loop {
            let mut prev: Vec<Option<usize>> = vec![None; n];
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                if v == t {
                    break;
                }
                for &id in &self.adj[v] {
                    let w = self.edges[id].to;
                    if !seen[w] && self.residual(id).is_positive() {
                        seen[w] = true;
                        prev[w] = Some(id);
                        queue.push_back(w);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut push: Option<S> = None;
            let mut v = t;
            while let Some(id) = prev[v] {
                let r = self.residual(id);
                push = Some(match push {
                    Some(p) => S::min_of(p, r),
                    None => r,
                });
                v = self.edges[id ^ 1].to;
            }
            let push = push.expect("path has an edge");
            let mut v = t;
            while let Some(id) = prev[v] {
                self.edges[id].flow = self.edges[id].flow.clone() + push.clone();
                self.edges[id ^ 1].flow = self.edges[id ^ 1].flow.clone() - push.clone();
                v = self.edges[id ^ 1].to;
            }
            total = total + push;
        }
    }

    /// Nodes reachable from `s` in the residual network.
    pub fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &id in &self.adj[v] {
                let w = self.edges[id].to;
                if !seen[w] && self.residual(id).is_positive() {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}
