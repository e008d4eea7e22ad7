//! Per-agent input signals with closed-form derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derivative order requested from a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Order::Value),
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::InvalidParameter(format!("derivative order {v} not in {{0,1,2}}"))),
        }
    }
}

/// Anything that can produce the stacked agent signals and their first two derivatives.
pub trait SignalSource: Send + Sync {
    fn n_agents(&self) -> usize;

    /// Writes `s(t)`, `ṡ(t)` or `s̈(t)` for every agent into `out`.
    fn evaluate_into(&self, t: f64, order: Order, out: &mut [f64]);

    fn evaluate(&self, t: f64, order: Order) -> Vec<f64> {
        let mut out = vec![0.0; self.n_agents()];
        self.evaluate_into(t, order, &mut out);
        out
    }

    /// `s̄(t)` or its derivatives.
    fn average(&self, t: f64, order: Order) -> f64 {
        let v = self.evaluate(t, order);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// `amp · sin(omega·t + phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amp: f64,
    pub omega: f64,
    pub phi: f64,
}

impl Sinusoid {
    fn eval(&self, t: f64, order: Order) -> f64 {
        let arg = self.omega * t + self.phi;
        match order {
            Order::Value => self.amp * arg.sin(),
            Order::First => self.amp * self.omega * arg.cos(),
            Order::Second => -self.amp * self.omega * self.omega * arg.sin(),
        }
    }
}

/// One agent's signal: a sum of sinusoids plus a constant offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "AgentSignalRepr", into = "AgentSignalRepr")]
pub struct AgentSignal {
    pub terms: Vec<Sinusoid>,
    pub offset: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AgentSignalRepr {
    Terms(Vec<Sinusoid>),
    Full {
        terms: Vec<Sinusoid>,
        #[serde(default)]
        offset: f64,
    },
}

impl From<AgentSignalRepr> for AgentSignal {
    fn from(r: AgentSignalRepr) -> Self {
        match r {
            AgentSignalRepr::Terms(terms) => Self { terms, offset: 0.0 },
            AgentSignalRepr::Full { terms, offset } => Self { terms, offset },
        }
    }
}

impl From<AgentSignal> for AgentSignalRepr {
    fn from(s: AgentSignal) -> Self {
        AgentSignalRepr::Full { terms: s.terms, offset: s.offset }
    }
}

impl AgentSignal {
    pub fn sinusoid(amp: f64, omega: f64, phi: f64) -> Self {
        Self { terms: vec![Sinusoid { amp, omega, phi }], offset: 0.0 }
    }

    pub fn constant(offset: f64) -> Self {
        Self { terms: Vec::new(), offset }
    }

    pub fn eval(&self, t: f64, order: Order) -> f64 {
        let base = if order == Order::Value { self.offset } else { 0.0 };
        base + self.terms.iter().map(|s| s.eval(t, order)).sum::<f64>()
    }
}

/// Sinusoid-plus-offset signals, one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignalBank {
    pub agents: Vec<AgentSignal>,
}

impl SignalBank {
    pub fn new(agents: Vec<AgentSignal>) -> Self {
        Self { agents }
    }

    /// Unit-amplitude sinusoids `sin(ω_i t + φ_i)`.
    pub fn sinusoids(omegas: &[f64], phases: &[f64]) -> Result<Self> {
        if omegas.len() != phases.len() {
            return Err(Error::Dimension { expected: omegas.len(), got: phases.len() });
        }
        Ok(Self::new(
            omegas
                .iter()
                .zip(phases)
                .map(|(&w, &p)| AgentSignal::sinusoid(1.0, w, p))
                .collect(),
        ))
    }

    /// All-zero signals for `n` agents.
    pub fn zeros(n: usize) -> Self {
        Self::new(vec![AgentSignal::constant(0.0); n])
    }

    /// Adds the same signal to every agent.
    pub fn with_common_mode(&self, common: &AgentSignal) -> Self {
        Self::new(
            self.agents
                .iter()
                .map(|a| {
                    let mut terms = a.terms.clone();
                    terms.extend_from_slice(&common.terms);
                    AgentSignal { terms, offset: a.offset + common.offset }
                })
                .collect(),
        )
    }
}

impl SignalSource for SignalBank {
    fn n_agents(&self) -> usize {
        self.agents.len()
    }

    fn evaluate_into(&self, t: f64, order: Order, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.agents) {
            *o = a.eval(t, order);
        }
    }
}

type SignalFn = dyn Fn(f64, Order, &mut [f64]) + Send + Sync;

/// Arbitrary twice-differentiable signals supplied as a closure.
///
/// The closure must fill all `n` entries for the requested order.
pub struct ClosureSignals {
    n: usize,
    f: Box<SignalFn>,
}

impl ClosureSignals {
    pub fn new(n: usize, f: impl Fn(f64, Order, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { n, f: Box::new(f) }
    }
}

impl SignalSource for ClosureSignals {
    fn n_agents(&self) -> usize {
        self.n
    }

    fn evaluate_into(&self, t: f64, order: Order, out: &mut [f64]) {
        (self.f)(t, order, out)
    }
}

/// Result of checking the bounded-mismatch condition on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub gamma: f64,
    /// Grid supremum over agents of `|s̈̄ − s̈_i + 2γ(ṡ̄ − ṡ_i) + γ²(s̄ − s_i)|`.
    pub sup_lhs: f64,
    /// Time at which `sup_lhs` is attained.
    pub t_at_sup: f64,
    /// Smallest `L` the grid supports: `√N · sup_lhs`.
    pub l_required: f64,
    /// Grid supremum of the Euclidean norm of the projected disturbance `d(t)`.
    pub sup_disturbance_norm: f64,
    pub l: f64,
    pub satisfied: bool,
}

/// Uniform grid on `[0, horizon]` with at most `spacing` between points.
pub fn uniform_grid(horizon: f64, spacing: f64) -> Vec<f64> {
    let steps = (horizon / spacing).ceil().max(1.0) as usize;
    (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect()
}

/// Projected disturbance `d(t) = P(s̈ + 2γṡ + γ²s)` of the consensus-error dynamics.
pub fn disturbance(src: &dyn SignalSource, t: f64, gamma: f64) -> Vec<f64> {
    let s = src.evaluate(t, Order::Value);
    let ds = src.evaluate(t, Order::First);
    let dds = src.evaluate(t, Order::Second);
    let raw: Vec<f64> = (0..s.len())
        .map(|i| dds[i] + 2.0 * gamma * ds[i] + gamma * gamma * s[i])
        .collect();
    crate::graph::project_to_zero_mean(&raw)
}

/// Grid check of the per-agent mismatch bound `|…| ≤ L/√N`.
///
/// This is a sampled supremum, not a certificate: the default spacing is 1 ms.
pub fn check_assumption(
    src: &dyn SignalSource,
    gamma: f64,
    l: f64,
    grid: &[f64],
) -> Result<AssumptionReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
    }
    let n = src.n_agents();
    let mut sup_lhs = 0.0_f64;
    let mut t_at_sup = grid[0];
    let mut sup_norm = 0.0_f64;
    for &t in grid {
        // The mismatch is the negated projected disturbance.
        let d = disturbance(src, t, gamma);
        let worst = d.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if worst > sup_lhs {
            sup_lhs = worst;
            t_at_sup = t;
        }
        sup_norm = sup_norm.max(d.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    let l_required = (n as f64).sqrt() * sup_lhs;
    Ok(AssumptionReport {
        gamma,
        sup_lhs,
        t_at_sup,
        l_required,
        sup_disturbance_norm: sup_norm,
        l,
        satisfied: sup_lhs <= l / (n as f64).sqrt(),
    })
}
