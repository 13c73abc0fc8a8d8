//! Secant discretization of concave instances into linear ones.
//!
//! Every concave arc becomes `k` parallel linear arcs whose gains are the
//! secant slopes of consecutive breakpoints, rounded down onto a dyadic grid.
//! The result is a restriction of the concave problem (its optimum is never
//! better), and `gap` bounds how much worse it can be.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::gain::{GainFunction, GainSpec, LinearGain};
use crate::network::{ConcaveNetwork, Edge, LinearNetwork, Network, NetworkError, NodeData};
use crate::scalar::{f64_to_ratio, ratio_to_f64};

const GRID_BITS: u32 = 24;

#[derive(Debug, Clone)]
pub struct Discretized {
    pub network: LinearNetwork,
    /// Bound on `κ_pwl - κ_concave` at optimality.
    pub gap: f64,
    /// Original arc of every linear arc.
    pub origin: Vec<usize>,
    /// Arcs whose domain was clipped away from a minus-infinity lower end.
    pub clipped: Vec<usize>,
}

fn exact(v: f64) -> BigRational {
    f64_to_ratio(v).expect("finite instance data")
}

fn floor_to_grid(v: f64) -> BigRational {
    let scale = f64::from(1u32 << GRID_BITS);
    let n = (v * scale).floor();
    BigRational::new(BigInt::from(n as i64), BigInt::from(1i64 << GRID_BITS))
}

fn exact_linear(g: &GainFunction) -> Option<BigRational> {
    match g.spec() {
        Some(GainSpec::Linear(r)) => Some(r.clone()),
        _ => g.linear_factor().map(exact),
    }
}

/// Largest gap between `Γ` and its chord on `[x0, x1]`, bounded by the
/// neighbouring lines `left` and `right` (slopes of lines through the
/// segment endpoints that lie above `Γ`).
fn chord_error(g: &GainFunction, x0: f64, x1: f64, s: f64, left: Option<f64>, right: Option<f64>) -> f64 {
    let len = x1 - x0;
    match (left, right) {
        (Some(sl), Some(sr)) => {
            let (a, b) = ((sl - s).max(0.0), (s - sr).max(0.0));
            if a + b == 0.0 {
                0.0
            } else {
                a * b * len / (a + b)
            }
        }
        (Some(sl), None) => (sl - s).max(0.0) * len,
        (None, Some(sr)) => (s - sr).max(0.0) * len,
        (None, None) => {
            let y0 = g.value_unchecked(x0).to_f64();
            (1..64)
                .map(|t| {
                    let x = x0 + len * f64::from(t) / 64.0;
                    g.value_unchecked(x).to_f64() - (y0 + s * (x - x0))
                })
                .fold(0.0, f64::max)
        }
    }
}

/// Breakpoints on `[lo, hi]`: geometric after clipping a minus-infinity end,
/// quadratic when the gain is infinitely steep at `lo`, uniform otherwise.
fn breakpoints(g: &GainFunction, lo: &BigRational, hi: &BigRational, k: usize, clipped: bool) -> Vec<BigRational> {
    let kk = BigRational::from_integer(BigInt::from(k));
    let span = hi.clone() - lo.clone();
    let (lo_f, hi_f) = (ratio_to_f64(lo), ratio_to_f64(hi));
    let steep = g.right_derivative(lo_f).map_or(true, |d| !d.is_finite());
    let mut xs: Vec<BigRational> = if clipped && lo_f > 0.0 {
        let ratio = (hi_f / lo_f).powf(1.0 / k as f64);
        (0..=k)
            .map(|r| match r {
                0 => lo.clone(),
                r if r == k => hi.clone(),
                r => floor_to_grid(lo_f * ratio.powi(r as i32)),
            })
            .collect()
    } else if steep {
        (0..=k)
            .map(|r| {
                let t = BigRational::from_integer(BigInt::from(r)) / kk.clone();
                lo.clone() + span.clone() * t.clone() * t
            })
            .collect()
    } else {
        (0..=k)
            .map(|r| lo.clone() + span.clone() * BigRational::from_integer(BigInt::from(r)) / kk.clone())
            .collect()
    };
    xs.dedup_by(|b, a| *b <= *a);
    xs
}

/// Replaces every nonlinear arc by `k` secant arcs. Immense arcs are clipped to
/// `[ℓ + clip, u]`; linear arcs are copied unchanged.
pub fn pwl_discretize(net: &ConcaveNetwork, k: usize, clip: f64) -> Result<Discretized, NetworkError> {
    assert!(k >= 1, "at least one segment");
    let mut nodes: Vec<NodeData<BigRational>> = net
        .nodes()
        .iter()
        .map(|nd| NodeData {
            demand: exact(nd.demand),
            penalty: exact(nd.penalty),
        })
        .collect();
    let mut arcs = Vec::new();
    let mut origin = Vec::new();
    let mut clipped = Vec::new();
    let mut gap = 0.0;
    for (a, e) in net.arcs().iter().enumerate() {
        let m_head = net.node(e.head).penalty;
        if let Some(gamma) = exact_linear(&e.gain) {
            arcs.push(Edge {
                tail: e.tail,
                head: e.head,
                lower: exact(e.lower),
                upper: exact(e.upper),
                gain: LinearGain(gamma),
            });
            origin.push(a);
            continue;
        }
        let mut lo = e.lower;
        if e.gain.value_unchecked(lo).finite().is_none() {
            lo = (e.lower + clip).min(e.upper);
            gap += net.node(e.tail).penalty * (lo - e.lower);
            clipped.push(a);
        }
        let base = e.gain.value_unchecked(lo).to_f64();
        let base_r = floor_to_grid(base);
        gap += m_head * (base - ratio_to_f64(&base_r));
        let lo_r = exact(lo);
        nodes[e.tail].demand += lo_r.clone();
        nodes[e.head].demand -= base_r;
        if lo >= e.upper {
            continue;
        }
        let xs = breakpoints(&e.gain, &lo_r, &exact(e.upper), k, clipped.last() == Some(&a));
        let xf: Vec<f64> = xs.iter().map(ratio_to_f64).collect();
        let ys: Vec<f64> = xf.iter().map(|&x| e.gain.value_unchecked(x).to_f64()).collect();
        let k = xs.len() - 1;
        let slopes: Vec<f64> = (1..=k).map(|r| (ys[r] - ys[r - 1]) / (xf[r] - xf[r - 1])).collect();
        let mut worst: f64 = 0.0;
        for r in 0..k {
            let left = if r > 0 { Some(slopes[r - 1]) } else { e.gain.right_derivative(xf[0]).filter(|d| d.is_finite()) };
            let right = if r + 1 < k { Some(slopes[r + 1]) } else { e.gain.left_derivative(xf[k]).filter(|d| d.is_finite()) };
            worst = worst.max(chord_error(&e.gain, xf[r], xf[r + 1], slopes[r], left, right));
            let s = floor_to_grid(slopes[r].max(0.0));
            let width = xs[r + 1].clone() - xs[r].clone();
            let len = ratio_to_f64(&width);
            gap += m_head * (slopes[r] - ratio_to_f64(&s)).max(0.0) * len;
            if s.is_zero() {
                continue;
            }
            arcs.push(Edge {
                tail: e.tail,
                head: e.head,
                lower: BigRational::zero(),
                upper: width,
                gain: LinearGain(s),
            });
            origin.push(a);
        }
        gap += m_head * worst;
    }
    Ok(Discretized {
        network: Network::new(nodes, arcs)?,
        gap,
        origin,
        clipped,
    })
}
