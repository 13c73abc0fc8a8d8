//! Concave increasing gain functions behind value and inverse-value oracles.
//!
//! Besides the two oracles every implementation exposes stable increment
//! helpers (`value_delta`, `inverse_delta`). Their defaults are built from the
//! oracles; the built-in families override them with cancellation-free
//! closed forms so that chunk sizes far below the flow magnitude stay
//! resolvable in f64.

use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{ratio_to_f64, Extended, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GainError {
    #[error("argument {arg} outside gain domain [{lo}, {hi}]")]
    Domain { arg: f64, lo: f64, hi: f64 },
    #[error("value {value} outside gain range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("invalid gain parameters: {0}")]
    Parameters(String),
    #[error("gain oracle failed validation: {0}")]
    Validation(String),
}

/// Value/inverse oracle pair on the real line. Arguments outside the
/// natural domain are the caller's responsibility.
pub trait GainOracle: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn inverse(&self, y: f64) -> f64;

    /// `value(b) - value(a)`.
    fn value_delta(&self, a: f64, b: f64) -> f64 {
        self.value(b) - self.value(a)
    }

    /// `inverse(value(a) + dy) - a`.
    fn inverse_delta(&self, a: f64, dy: f64) -> f64 {
        self.inverse(self.value(a) + dy) - a
    }

    /// Sizes of the argument and value the oracle actually computes with at
    /// `x`; differences of nearby evaluations are only accurate to a few ulps
    /// of these.
    fn magnitudes(&self, x: f64) -> (f64, f64) {
        let v = self.value(x);
        (x.abs(), if v.is_finite() { v.abs() } else { 0.0 })
    }

    fn right_derivative(&self, _x: f64) -> Option<f64> {
        None
    }

    fn left_derivative(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Smallest `p <= hi` with `value(p) == value(hi)`, searched down to `lo`.
    fn flat_from(&self, lo: f64, hi: f64) -> f64 {
        let target = self.value(hi);
        if self.value(lo) >= target {
            return lo;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.value(mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    }
}

#[derive(Debug, Clone)]
pub struct LinearOracle {
    pub gamma: f64,
}

impl GainOracle for LinearOracle {
    fn value(&self, x: f64) -> f64 {
        self.gamma * x
    }
    fn inverse(&self, y: f64) -> f64 {
        y / self.gamma
    }
    fn value_delta(&self, a: f64, b: f64) -> f64 {
        self.gamma * (b - a)
    }
    fn inverse_delta(&self, _a: f64, dy: f64) -> f64 {
        dy / self.gamma
    }
    fn right_derivative(&self, _x: f64) -> Option<f64> {
        Some(self.gamma)
    }
    fn left_derivative(&self, _x: f64) -> Option<f64> {
        Some(self.gamma)
    }
    fn flat_from(&self, _lo: f64, hi: f64) -> f64 {
        hi
    }
}

/// `c * ln(x)`; minus infinity at zero.
#[derive(Debug, Clone)]
pub struct LogOracle {
    pub coef: f64,
}

impl GainOracle for LogOracle {
    fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.coef * x.ln()
        }
    }
    fn inverse(&self, y: f64) -> f64 {
        (y / self.coef).exp()
    }
    fn value_delta(&self, a: f64, b: f64) -> f64 {
        if a <= 0.0 {
            return f64::INFINITY;
        }
        self.coef * ((b - a) / a).ln_1p()
    }
    fn inverse_delta(&self, a: f64, dy: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        a * (dy / self.coef).exp_m1()
    }
    fn right_derivative(&self, x: f64) -> Option<f64> {
        Some(if x <= 0.0 { f64::INFINITY } else { self.coef / x })
    }
    fn left_derivative(&self, x: f64) -> Option<f64> {
        self.right_derivative(x)
    }
    fn flat_from(&self, _lo: f64, hi: f64) -> f64 {
        hi
    }
}

/// `c * x^p` with `0 < p < 1`.
#[derive(Debug, Clone)]
pub struct PowOracle {
    pub coef: f64,
    pub exp: f64,
}

impl GainOracle for PowOracle {
    fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.coef * x.powf(self.exp)
        }
    }
    fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            (y / self.coef).powf(1.0 / self.exp)
        }
    }
    fn value_delta(&self, a: f64, b: f64) -> f64 {
        if a <= 0.0 {
            return self.value(b);
        }
        self.coef * a.powf(self.exp) * (self.exp * ((b - a) / a).ln_1p()).exp_m1()
    }
    fn inverse_delta(&self, a: f64, dy: f64) -> f64 {
        if a <= 0.0 {
            return self.inverse(dy);
        }
        let base = self.coef * a.powf(self.exp);
        let ratio = dy / base;
        if ratio <= -1.0 {
            return -a;
        }
        a * (ratio.ln_1p() / self.exp).exp_m1()
    }
    fn right_derivative(&self, x: f64) -> Option<f64> {
        Some(if x <= 0.0 {
            f64::INFINITY
        } else {
            self.coef * self.exp * x.powf(self.exp - 1.0)
        })
    }
    fn left_derivative(&self, x: f64) -> Option<f64> {
        self.right_derivative(x)
    }
    fn flat_from(&self, _lo: f64, hi: f64) -> f64 {
        hi
    }
}

/// Concave piecewise-linear function through sorted breakpoints.
#[derive(Debug, Clone)]
pub struct PiecewiseOracle {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseOracle {
    pub fn new(points: &[(f64, f64)]) -> Result<Self, GainError> {
        if points.len() < 2 {
            return Err(GainError::Parameters("pwl needs at least two breakpoints".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let mut slopes = Vec::with_capacity(points.len() - 1);
        for k in 0..points.len() - 1 {
            let dx = xs[k + 1] - xs[k];
            if !(dx > 0.0) {
                return Err(GainError::Parameters("pwl breakpoints must be strictly increasing".into()));
            }
            slopes.push((ys[k + 1] - ys[k]) / dx);
        }
        for (k, w) in slopes.windows(2).enumerate() {
            if w[1] > w[0] * (1.0 + 1e-12) + 1e-15 {
                return Err(GainError::Parameters(format!("pwl not concave at breakpoint {}", k + 1)));
            }
        }
        if slopes.iter().any(|&s| s < 0.0) {
            return Err(GainError::Parameters("pwl must be nondecreasing".into()));
        }
        // flats are only allowed as a trailing run (they get truncated)
        if let Some(first_flat) = slopes.iter().position(|&s| s == 0.0) {
            if slopes[first_flat..].iter().any(|&s| s != 0.0) {
                return Err(GainError::Parameters("pwl has an interior flat segment".into()));
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    fn segment_of(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(self.slopes.len() - 1)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}

impl GainOracle for PiecewiseOracle {
    fn value(&self, x: f64) -> f64 {
        let k = self.segment_of(x);
        self.ys[k] + self.slopes[k] * (x - self.xs[k])
    }

    fn inverse(&self, y: f64) -> f64 {
        let k = self.ys.partition_point(|&b| b < y).saturating_sub(1).min(self.slopes.len() - 1);
        let s = self.slopes[k];
        if s == 0.0 {
            self.xs[k]
        } else {
            self.xs[k] + (y - self.ys[k]) / s
        }
    }

    fn value_delta(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.value_delta(b, a);
        }
        let mut k = self.segment_of(a);
        let mut x = a;
        let mut acc = 0.0;
        loop {
            let end = if k + 1 < self.xs.len() - 1 { self.xs[k + 1].min(b) } else { b };
            acc += self.slopes[k] * (end - x);
            if end >= b || k + 1 >= self.slopes.len() {
                break;
            }
            x = end;
            k += 1;
        }
        acc
    }

    fn inverse_delta(&self, a: f64, dy: f64) -> f64 {
        let mut k = self.segment_of(a);
        let mut x = a;
        if dy >= 0.0 {
            let mut rest = dy;
            loop {
                let s = self.slopes[k];
                let last = k + 1 >= self.slopes.len();
                let room = if last { f64::INFINITY } else { (self.xs[k + 1] - x) * s };
                if rest <= room {
                    if s > 0.0 {
                        x += rest / s;
                    }
                    return x - a;
                }
                rest -= room;
                x = self.xs[k + 1];
                k += 1;
            }
        } else {
            let mut rest = -dy;
            if x == self.xs[k] && k > 0 {
                k -= 1;
            }
            loop {
                let s = self.slopes[k];
                let room = (x - self.xs[k]) * s;
                if rest <= room || k == 0 {
                    if s > 0.0 {
                        x -= rest / s;
                    }
                    return x - a;
                }
                rest -= room;
                x = self.xs[k];
                k -= 1;
            }
        }
    }

    fn right_derivative(&self, x: f64) -> Option<f64> {
        Some(self.slopes[self.segment_of(x)])
    }

    fn left_derivative(&self, x: f64) -> Option<f64> {
        let k = self.xs.partition_point(|&b| b < x).saturating_sub(1).min(self.slopes.len() - 1);
        Some(self.slopes[k])
    }

    fn flat_from(&self, lo: f64, hi: f64) -> f64 {
        let mut k = self.segment_of(hi);
        if self.slopes[k] > 0.0 {
            return hi;
        }
        while k > 0 && self.slopes[k - 1] == 0.0 {
            k -= 1;
        }
        self.xs[k].max(lo)
    }
}

/// `inner(x + shift) - offset`.
#[derive(Debug, Clone)]
pub struct ShiftedOracle {
    pub inner: Arc<dyn GainOracle>,
    pub shift: f64,
    pub offset: f64,
}

impl GainOracle for ShiftedOracle {
    fn value(&self, x: f64) -> f64 {
        self.inner.value(x + self.shift) - self.offset
    }
    fn inverse(&self, y: f64) -> f64 {
        self.inner.inverse(y + self.offset) - self.shift
    }
    fn value_delta(&self, a: f64, b: f64) -> f64 {
        self.inner.value_delta(a + self.shift, b + self.shift)
    }
    fn inverse_delta(&self, a: f64, dy: f64) -> f64 {
        self.inner.inverse_delta(a + self.shift, dy)
    }
    fn magnitudes(&self, x: f64) -> (f64, f64) {
        self.inner.magnitudes(x + self.shift)
    }
    fn right_derivative(&self, x: f64) -> Option<f64> {
        self.inner.right_derivative(x + self.shift)
    }
    fn left_derivative(&self, x: f64) -> Option<f64> {
        self.inner.left_derivative(x + self.shift)
    }
    fn flat_from(&self, lo: f64, hi: f64) -> f64 {
        self.inner.flat_from(lo + self.shift, hi + self.shift) - self.shift
    }
}

/// Residual reversal `a -> -inner^{-1}(-a)`.
#[derive(Debug, Clone)]
pub struct ReversedOracle {
    pub inner: Arc<dyn GainOracle>,
}

impl GainOracle for ReversedOracle {
    fn value(&self, a: f64) -> f64 {
        -self.inner.inverse(-a)
    }
    fn inverse(&self, b: f64) -> f64 {
        -self.inner.value(-b)
    }
    fn value_delta(&self, a: f64, b: f64) -> f64 {
        let x0 = self.inner.inverse(-b);
        self.inner.inverse_delta(x0, b - a)
    }
    fn inverse_delta(&self, a: f64, dy: f64) -> f64 {
        // value(a) = -x0 with x0 = inner^{-1}(-a); the target argument is
        // -inner(x0 - dy)
        let x0 = self.inner.inverse(-a);
        -self.inner.value_delta(x0 - dy, x0)
    }
    fn right_derivative(&self, a: f64) -> Option<f64> {
        let x = self.inner.inverse(-a);
        self.inner.left_derivative(x).map(|d| 1.0 / d)
    }
    fn left_derivative(&self, a: f64) -> Option<f64> {
        let x = self.inner.inverse(-a);
        self.inner.right_derivative(x).map(|d| 1.0 / d)
    }
    fn magnitudes(&self, a: f64) -> (f64, f64) {
        // arguments and values trade places
        let (x, v) = self.inner.magnitudes(self.inner.inverse(-a));
        (v.max(a.abs()), x)
    }
}

type Callback = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied oracle pair.
#[derive(Clone)]
pub struct CustomOracle {
    value: Callback,
    inverse: Callback,
}

impl fmt::Debug for CustomOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomOracle")
    }
}

impl GainOracle for CustomOracle {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }
    fn inverse(&self, y: f64) -> f64 {
        (self.inverse)(y)
    }
}

/// Textual gain description used by the instance and market file formats.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSpec {
    Linear(BigRational),
    Piecewise(Vec<(BigRational, BigRational)>),
    Log(BigRational),
    Pow(BigRational, BigRational),
}

impl GainSpec {
    pub fn parse_tokens(tokens: &[&str]) -> Result<(GainSpec, usize), String> {
        let kind = *tokens.first().ok_or("missing gain spec")?;
        let num = |i: usize| -> Result<BigRational, String> {
            let t = tokens.get(i).ok_or_else(|| format!("gain spec '{kind}' is truncated"))?;
            crate::format::parse_rational(t)
        };
        match kind {
            "lin" => Ok((GainSpec::Linear(num(1)?), 2)),
            "log" => Ok((GainSpec::Log(num(1)?), 2)),
            "pow" => Ok((GainSpec::Pow(num(1)?, num(2)?), 3)),
            "pwl" => {
                let k: usize = tokens
                    .get(1)
                    .ok_or("pwl without breakpoint count")?
                    .parse()
                    .map_err(|_| "bad pwl breakpoint count".to_string())?;
                let mut pts = Vec::with_capacity(k);
                for i in 0..k {
                    pts.push((num(2 + 2 * i)?, num(3 + 2 * i)?));
                }
                Ok((GainSpec::Piecewise(pts), 2 + 2 * k))
            }
            other => Err(format!("unknown gain kind '{other}'")),
        }
    }

    pub fn parse(text: &str) -> Result<GainSpec, String> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let (spec, used) = Self::parse_tokens(&tokens)?;
        if used != tokens.len() {
            return Err(format!("trailing tokens in gain spec '{text}'"));
        }
        Ok(spec)
    }

    pub fn linear_factor(&self) -> Option<&BigRational> {
        match self {
            GainSpec::Linear(g) => Some(g),
            _ => None,
        }
    }

    pub fn to_function(&self) -> Result<GainFunction, GainError> {
        let f = |r: &BigRational| ratio_to_f64(r);
        let mut g = match self {
            GainSpec::Linear(g) => GainFunction::linear(f(g))?,
            GainSpec::Log(c) => GainFunction::log(f(c))?,
            GainSpec::Pow(c, p) => GainFunction::pow(f(c), f(p))?,
            GainSpec::Piecewise(pts) => {
                let pts: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (f(x), f(y))).collect();
                GainFunction::piecewise(&pts)?
            }
        };
        g.spec = Some(self.clone());
        Ok(g)
    }
}

impl fmt::Display for GainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainSpec::Linear(g) => write!(f, "lin {g}"),
            GainSpec::Log(c) => write!(f, "log {c}"),
            GainSpec::Pow(c, p) => write!(f, "pow {c} {p}"),
            GainSpec::Piecewise(pts) => {
                write!(f, "pwl {}", pts.len())?;
                for (x, y) in pts {
                    write!(f, " {x} {y}")?;
                }
                Ok(())
            }
        }
    }
}

/// A concave increasing gain function with its natural domain.
#[derive(Clone)]
pub struct GainFunction {
    oracle: Arc<dyn GainOracle>,
    lo: f64,
    hi: f64,
    immense: bool,
    linear: Option<f64>,
    spec: Option<GainSpec>,
}

impl fmt::Debug for GainFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.spec {
            Some(s) => write!(f, "GainFunction({s} on [{}, {}])", self.lo, self.hi),
            None => write!(f, "GainFunction({:?} on [{}, {}])", self.oracle, self.lo, self.hi),
        }
    }
}

impl GainFunction {
    pub fn linear(gamma: f64) -> Result<Self, GainError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(GainError::Parameters(format!("linear gain factor must be positive, got {gamma}")));
        }
        Ok(Self {
            oracle: Arc::new(LinearOracle { gamma }),
            lo: 0.0,
            hi: f64::INFINITY,
            immense: false,
            linear: Some(gamma),
            spec: None,
        })
    }

    pub fn log(coef: f64) -> Result<Self, GainError> {
        if !(coef > 0.0 && coef.is_finite()) {
            return Err(GainError::Parameters(format!("log coefficient must be positive, got {coef}")));
        }
        Ok(Self {
            oracle: Arc::new(LogOracle { coef }),
            lo: 0.0,
            hi: f64::INFINITY,
            immense: true,
            linear: None,
            spec: None,
        })
    }

    pub fn pow(coef: f64, exp: f64) -> Result<Self, GainError> {
        if !(coef > 0.0 && coef.is_finite()) || !(exp > 0.0 && exp < 1.0) {
            return Err(GainError::Parameters(format!("pow needs c > 0 and 0 < p < 1, got c={coef}, p={exp}")));
        }
        Ok(Self {
            oracle: Arc::new(PowOracle { coef, exp }),
            lo: 0.0,
            hi: f64::INFINITY,
            immense: false,
            linear: None,
            spec: None,
        })
    }

    pub fn piecewise(points: &[(f64, f64)]) -> Result<Self, GainError> {
        let oracle = PiecewiseOracle::new(points)?;
        let (lo, hi) = oracle.domain();
        Ok(Self {
            oracle: Arc::new(oracle),
            lo,
            hi,
            immense: false,
            linear: None,
            spec: None,
        })
    }

    /// Registers a callback pair on `[lo, hi]` after a randomized
    /// monotonicity / concavity / round-trip check.
    pub fn custom<V, I>(value: V, inverse: I, lo: f64, hi: f64, seed: u64) -> Result<Self, GainError>
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        I: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo < hi) || !hi.is_finite() {
            return Err(GainError::Parameters("custom gain needs a bounded domain lo < hi".into()));
        }
        let oracle = CustomOracle {
            value: Arc::new(value),
            inverse: Arc::new(inverse),
        };
        let immense = oracle.value(lo) == f64::NEG_INFINITY;
        let g = Self {
            oracle: Arc::new(oracle),
            lo,
            hi,
            immense,
            linear: None,
            spec: None,
        };
        g.validate(1000, 1e-9, seed)?;
        Ok(g)
    }

    pub fn spec(&self) -> Option<&GainSpec> {
        self.spec.as_ref()
    }

    pub fn oracle(&self) -> &Arc<dyn GainOracle> {
        &self.oracle
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_immense(&self) -> bool {
        self.immense
    }

    pub fn linear_factor(&self) -> Option<f64> {
        self.linear
    }

    pub fn value(&self, x: f64) -> Result<Extended<f64>, GainError> {
        if !(x >= self.lo && x <= self.hi) {
            return Err(GainError::Domain { arg: x, lo: self.lo, hi: self.hi });
        }
        Ok(self.value_unchecked(x))
    }

    pub fn value_unchecked(&self, x: f64) -> Extended<f64> {
        let v = self.oracle.value(x);
        if v == f64::NEG_INFINITY {
            Extended::NegInfinity
        } else {
            Extended::Finite(v)
        }
    }

    pub fn inverse(&self, y: f64) -> Result<f64, GainError> {
        let lo_val = self.oracle.value(self.lo);
        let hi_val = if self.hi.is_finite() { self.oracle.value(self.hi) } else { f64::INFINITY };
        if !(y >= lo_val && y <= hi_val) {
            return Err(GainError::Range { value: y, lo: lo_val, hi: hi_val });
        }
        Ok(self.oracle.inverse(y))
    }

    pub fn right_derivative(&self, x: f64) -> Option<f64> {
        self.oracle.right_derivative(x)
    }

    pub fn left_derivative(&self, x: f64) -> Option<f64> {
        self.oracle.left_derivative(x)
    }

    /// Restricts the domain (used after capacity truncation).
    pub fn restricted(&self, lo: f64, hi: f64) -> Self {
        let mut g = self.clone();
        g.lo = lo;
        g.hi = hi;
        g.immense = g.oracle.value(lo) == f64::NEG_INFINITY;
        g
    }

    /// The gain seen after moving the lower bound to zero: `Γ(x + shift) - Γ(shift)`
    /// on regular arcs and `Γ(x + shift)` on immense ones.
    pub fn shifted(&self, shift: f64) -> Self {
        if shift == 0.0 {
            return self.clone();
        }
        let base = self.oracle.value(shift);
        let offset = if base == f64::NEG_INFINITY { 0.0 } else { base };
        Self {
            oracle: Arc::new(ShiftedOracle {
                inner: self.oracle.clone(),
                shift,
                offset,
            }),
            lo: self.lo - shift,
            hi: self.hi - shift,
            immense: base == f64::NEG_INFINITY,
            linear: self.linear,
            spec: None,
        }
    }

    /// The residual reversal on `[-Γ(hi), -Γ(lo)]`.
    pub fn backward(&self) -> Self {
        let hi_val = self.oracle.value(self.hi);
        let lo_val = self.oracle.value(self.lo);
        Self {
            oracle: Arc::new(ReversedOracle { inner: self.oracle.clone() }),
            lo: -hi_val,
            hi: -lo_val,
            immense: false,
            linear: self.linear.map(|g| 1.0 / g),
            spec: None,
        }
    }

    /// Randomized check of monotonicity, midpoint concavity and oracle
    /// round-trip on `samples` points.
    pub fn validate(&self, samples: usize, tol: f64, seed: u64) -> Result<(), GainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hi = if self.hi.is_finite() { self.hi } else { self.lo + 100.0 };
        let lo = self.lo;
        let width = hi - lo;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            // stay off an infinite lower endpoint
            let t: f64 = rng.gen_range(1e-6..=1.0);
            lo + t * width
        };
        let scale = |v: f64| tol * v.abs().max(1.0);
        for _ in 0..samples {
            let (mut a, mut b) = (draw(&mut rng), draw(&mut rng));
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let (va, vb) = (self.oracle.value(a), self.oracle.value(b));
            if !(va.is_finite() && vb.is_finite()) {
                return Err(GainError::Validation(format!("non-finite value inside the domain near {a}")));
            }
            if vb < va - scale(va) {
                return Err(GainError::Validation(format!("not monotone: Γ({a}) = {va} > Γ({b}) = {vb}")));
            }
            let mid = self.oracle.value(0.5 * (a + b));
            if mid < 0.5 * (va + vb) - scale(mid) {
                return Err(GainError::Validation(format!("not concave on [{a}, {b}]")));
            }
            let beta = va + rng.gen::<f64>() * (vb - va);
            let back = self.oracle.value(self.oracle.inverse(beta));
            if (back - beta).abs() > scale(beta) {
                return Err(GainError::Validation(format!("round trip Γ(Γ⁻¹({beta})) = {back}")));
            }
        }
        Ok(())
    }
}

/// Exact linear gain used by the rational solver path.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGain(pub BigRational);

/// Gain operations the scaling engine needs, generic over the arithmetic.
pub trait ArcGain<S: Scalar>: Clone + Send + Sync + fmt::Debug {
    fn eval(&self, x: &S) -> Extended<S>;
    fn eval_inverse(&self, y: &S) -> S;
    /// `Γ(to) - Γ(from)`.
    fn delta(&self, from: &S, to: &S) -> S;
    /// `Γ⁻¹(Γ(from) + dy) - from`.
    fn inverse_delta(&self, from: &S, dy: &S) -> S;
    fn is_immense(&self) -> bool;
    fn linear_factor(&self) -> Option<S>;
    /// Gain after moving the lower bound `by` to zero, and `Γ(by)`.
    fn shift(&self, by: &S) -> (Self, Extended<S>);
    /// `inf{p in [0, hi] : Γ(p) = Γ(hi)}`.
    fn flat_from(&self, hi: &S) -> S;
    fn right_derivative(&self, x: &S) -> Option<S>;
    fn left_derivative(&self, x: &S) -> Option<S>;
    /// Argument and value sizes behind float evaluations near `x`.
    fn magnitudes(&self, x: &S) -> (f64, f64);
}

impl ArcGain<BigRational> for LinearGain {
    fn eval(&self, x: &BigRational) -> Extended<BigRational> {
        Extended::Finite(&self.0 * x)
    }
    fn eval_inverse(&self, y: &BigRational) -> BigRational {
        y / &self.0
    }
    fn delta(&self, from: &BigRational, to: &BigRational) -> BigRational {
        &self.0 * (to - from)
    }
    fn inverse_delta(&self, _from: &BigRational, dy: &BigRational) -> BigRational {
        dy / &self.0
    }
    fn is_immense(&self) -> bool {
        false
    }
    fn linear_factor(&self) -> Option<BigRational> {
        Some(self.0.clone())
    }
    fn shift(&self, by: &BigRational) -> (Self, Extended<BigRational>) {
        (self.clone(), Extended::Finite(&self.0 * by))
    }
    fn flat_from(&self, hi: &BigRational) -> BigRational {
        hi.clone()
    }
    fn right_derivative(&self, _x: &BigRational) -> Option<BigRational> {
        Some(self.0.clone())
    }
    fn left_derivative(&self, _x: &BigRational) -> Option<BigRational> {
        Some(self.0.clone())
    }
    fn magnitudes(&self, _x: &BigRational) -> (f64, f64) {
        (0.0, 0.0)
    }
}

impl ArcGain<f64> for GainFunction {
    fn eval(&self, x: &f64) -> Extended<f64> {
        self.value_unchecked(*x)
    }
    fn eval_inverse(&self, y: &f64) -> f64 {
        self.oracle.inverse(*y)
    }
    fn delta(&self, from: &f64, to: &f64) -> f64 {
        self.oracle.value_delta(*from, *to)
    }
    fn inverse_delta(&self, from: &f64, dy: &f64) -> f64 {
        self.oracle.inverse_delta(*from, *dy)
    }
    fn is_immense(&self) -> bool {
        self.immense
    }
    fn linear_factor(&self) -> Option<f64> {
        self.linear
    }
    fn shift(&self, by: &f64) -> (Self, Extended<f64>) {
        (self.shifted(*by), self.value_unchecked(*by))
    }
    fn flat_from(&self, hi: &f64) -> f64 {
        self.oracle.flat_from(self.lo, *hi)
    }
    fn right_derivative(&self, x: &f64) -> Option<f64> {
        self.oracle.right_derivative(*x)
    }
    fn left_derivative(&self, x: &f64) -> Option<f64> {
        self.oracle.left_derivative(*x)
    }
    fn magnitudes(&self, x: &f64) -> (f64, f64) {
        self.oracle.magnitudes(*x)
    }
}
