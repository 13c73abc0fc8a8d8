//! Text instance format.
//!
//! ```text
//! c comment
//! p cgf <n> <m>
//! n <id> <b> <M>
//! a <tail> <head> <l> <u> <gain-spec>
//! ```
//!
//! Node ids run from 1 to n; nodes without an `n` line get `b = 0, M = 1`.
//! Numbers are integers, `p/q` fractions or plain decimals, all read exactly.

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::gain::{GainSpec, LinearGain};
use crate::network::{ConcaveNetwork, Edge, LinearNetwork, Network, NetworkError, NodeData};
use crate::scalar::ratio_to_f64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Network(#[from] NetworkError),
    #[error("arc {arc} (line {line}): {msg}")]
    Gain { arc: usize, line: usize, msg: String },
}

pub fn parse_rational(tok: &str) -> Result<BigRational, String> {
    let bad = || format!("invalid number '{tok}'");
    if let Some((p, q)) = tok.split_once('/') {
        let p = BigInt::from_str(p).map_err(|_| bad())?;
        let q = BigInt::from_str(q).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(format!("zero denominator in '{tok}'"));
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((int, frac)) = tok.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int_part = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            BigInt::from_str(int).map_err(|_| bad())?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = BigInt::from_str(frac).map_err(|_| bad())?;
        let mag = BigRational::new(int_part.clone() * &scale + if neg { -frac_part } else { frac_part }, scale);
        return Ok(mag);
    }
    BigInt::from_str(tok).map(BigRational::from_integer).map_err(|_| bad())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcRecord {
    pub tail: usize,
    pub head: usize,
    pub lower: BigRational,
    pub upper: BigRational,
    pub gain: GainSpec,
    pub line: usize,
}

/// Parsed instance with exact data, before choosing an arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub demand: Vec<BigRational>,
    pub penalty: Vec<BigRational>,
    pub arcs: Vec<ArcRecord>,
}

impl Instance {
    pub fn new(n: usize) -> Self {
        Self {
            demand: vec![BigRational::zero(); n],
            penalty: vec![BigRational::one(); n],
            arcs: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.demand.len()
    }

    pub fn is_linear(&self) -> bool {
        self.arcs.iter().all(|a| a.gain.linear_factor().is_some())
    }

    pub fn to_linear(&self) -> Result<LinearNetwork, FormatError> {
        let mut arcs = Vec::with_capacity(self.arcs.len());
        for (k, a) in self.arcs.iter().enumerate() {
            let g = a.gain.linear_factor().ok_or_else(|| FormatError::Gain {
                arc: k,
                line: a.line,
                msg: format!("'{}' is not a linear gain", a.gain),
            })?;
            if *g <= BigRational::zero() {
                return Err(FormatError::Gain {
                    arc: k,
                    line: a.line,
                    msg: "gain factor must be positive".into(),
                });
            }
            arcs.push(Edge {
                tail: a.tail,
                head: a.head,
                lower: a.lower.clone(),
                upper: a.upper.clone(),
                gain: LinearGain(g.clone()),
            });
        }
        Ok(Network::new(self.node_data(|r| r.clone()), arcs)?)
    }

    pub fn to_concave(&self) -> Result<ConcaveNetwork, FormatError> {
        let mut arcs = Vec::with_capacity(self.arcs.len());
        for (k, a) in self.arcs.iter().enumerate() {
            let gain = a.gain.to_function().map_err(|e| FormatError::Gain {
                arc: k,
                line: a.line,
                msg: e.to_string(),
            })?;
            let (lower, upper) = (ratio_to_f64(&a.lower), ratio_to_f64(&a.upper));
            let (lo, hi) = gain.domain();
            if lower < lo || upper > hi {
                return Err(FormatError::Gain {
                    arc: k,
                    line: a.line,
                    msg: format!("capacity range [{lower}, {upper}] outside gain domain [{lo}, {hi}]"),
                });
            }
            arcs.push(Edge {
                tail: a.tail,
                head: a.head,
                lower,
                upper,
                gain: gain.restricted(lo, upper.max(lo)),
            });
        }
        Ok(Network::new(self.node_data(ratio_to_f64), arcs)?)
    }

    fn node_data<S>(&self, conv: impl Fn(&BigRational) -> S) -> Vec<NodeData<S>> {
        self.demand
            .iter()
            .zip(&self.penalty)
            .map(|(b, m)| NodeData {
                demand: conv(b),
                penalty: conv(m),
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Instance, FormatError> {
        let err = |line: usize, msg: String| FormatError::Syntax { line, msg };
        let mut inst: Option<Instance> = None;
        let mut declared_arcs = 0usize;
        let mut seen_node = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let toks: Vec<&str> = raw.split_whitespace().collect();
            let Some(&kind) = toks.first() else { continue };
            let num = |i: usize| -> Result<BigRational, FormatError> {
                let t = toks.get(i).ok_or_else(|| err(line, format!("missing field {i}")))?;
                parse_rational(t).map_err(|m| err(line, m))
            };
            let idx = |i: usize, n: usize| -> Result<usize, FormatError> {
                let t = toks.get(i).ok_or_else(|| err(line, format!("missing field {i}")))?;
                let v: usize = t.parse().map_err(|_| err(line, format!("invalid node id '{t}'")))?;
                if v == 0 || v > n {
                    return Err(err(line, format!("node id {v} out of range 1..={n}")));
                }
                Ok(v - 1)
            };
            match kind {
                "c" => {}
                "p" => {
                    if inst.is_some() {
                        return Err(err(line, "duplicate problem line".into()));
                    }
                    if toks.len() != 4 || toks[1] != "cgf" {
                        return Err(err(line, "expected 'p cgf <n> <m>'".into()));
                    }
                    let n: usize = toks[2].parse().map_err(|_| err(line, "invalid node count".into()))?;
                    declared_arcs = toks[3].parse().map_err(|_| err(line, "invalid arc count".into()))?;
                    inst = Some(Instance::new(n));
                    seen_node = vec![false; n];
                }
                "n" => {
                    let inst = inst.as_mut().ok_or_else(|| err(line, "node line before problem line".into()))?;
                    if toks.len() != 4 {
                        return Err(err(line, "expected 'n <id> <b> <M>'".into()));
                    }
                    let i = idx(1, inst.node_count())?;
                    if seen_node[i] {
                        return Err(err(line, format!("node {} declared twice", i + 1)));
                    }
                    seen_node[i] = true;
                    inst.demand[i] = num(2)?;
                    let m = num(3)?;
                    if !m.is_integer() || m < BigRational::one() {
                        return Err(err(line, "penalty must be an integer >= 1".into()));
                    }
                    inst.penalty[i] = m;
                }
                "a" => {
                    let inst = inst.as_mut().ok_or_else(|| err(line, "arc line before problem line".into()))?;
                    let n = inst.node_count();
                    let tail = idx(1, n)?;
                    let head = idx(2, n)?;
                    if tail == head {
                        return Err(err(line, "self-loop".into()));
                    }
                    let lower = num(3)?;
                    let upper = num(4)?;
                    if upper < lower {
                        return Err(err(line, "upper capacity below lower capacity".into()));
                    }
                    let (gain, used) = GainSpec::parse_tokens(&toks[5..]).map_err(|m| err(line, m))?;
                    if 5 + used != toks.len() {
                        return Err(err(line, "trailing tokens after gain spec".into()));
                    }
                    inst.arcs.push(ArcRecord {
                        tail,
                        head,
                        lower,
                        upper,
                        gain,
                        line,
                    });
                }
                other => return Err(err(line, format!("unknown line type '{other}'"))),
            }
        }
        let inst = inst.ok_or_else(|| err(text.lines().count().max(1), "missing problem line".into()))?;
        if inst.arcs.len() != declared_arcs {
            return Err(err(
                text.lines().count().max(1),
                format!("declared {declared_arcs} arcs, found {}", inst.arcs.len()),
            ));
        }
        Ok(inst)
    }

    pub fn write(&self) -> String {
        let mut s = String::new();
        writeln!(s, "p cgf {} {}", self.node_count(), self.arcs.len()).unwrap();
        for (i, (b, m)) in self.demand.iter().zip(&self.penalty).enumerate() {
            writeln!(s, "n {} {} {}", i + 1, b, m).unwrap();
        }
        for a in &self.arcs {
            writeln!(s, "a {} {} {} {} {}", a.tail + 1, a.head + 1, a.lower, a.upper, a.gain).unwrap();
        }
        s
    }
}

impl From<&LinearNetwork> for Instance {
    fn from(net: &LinearNetwork) -> Self {
        Instance {
            demand: net.nodes().iter().map(|nd| nd.demand.clone()).collect(),
            penalty: net.nodes().iter().map(|nd| nd.penalty.clone()).collect(),
            arcs: net
                .arcs()
                .iter()
                .map(|e| ArcRecord {
                    tail: e.tail,
                    head: e.head,
                    lower: e.lower.clone(),
                    upper: e.upper.clone(),
                    gain: GainSpec::Linear(e.gain.0.clone()),
                    line: 0,
                })
                .collect(),
        }
    }
}
