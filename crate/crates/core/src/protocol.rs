//! Right-hand sides and output maps of the distributed differentiator.
//!
//! The edge nonlinearities take their arguments from an explicit list of
//! per-edge value pairs. With ideal communication the pairs are the current
//! shared estimates; with event triggering they are the values stored at the
//! last broadcast on that edge. Edges follow [`Graph::edges`] order and
//! orientation (`+1` at the lower index).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::graph::{project_to_zero_mean, Graph};
use crate::kernel::{spow, Coupling};
use crate::signals::{Order, SignalSource};

/// Internal states `η0`, `η1`, one entry per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolState {
    pub eta0: Vec<f64>,
    pub eta1: Vec<f64>,
}

impl ProtocolState {
    pub fn zeros(n: usize) -> Self {
        Self { eta0: vec![0.0; n], eta1: vec![0.0; n] }
    }

    pub fn n_agents(&self) -> usize {
        self.eta0.len()
    }

    /// `self += h · rate`.
    pub fn axpy(&mut self, h: f64, rate: &ProtocolState) {
        for (x, r) in self.eta0.iter_mut().zip(&rate.eta0) {
            *x += h * r;
        }
        for (x, r) in self.eta1.iter_mut().zip(&rate.eta1) {
            *x += h * r;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.eta0.iter().chain(&self.eta1).all(|v| v.is_finite())
    }
}

/// Shared estimates and errors at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSnapshot {
    pub s_hat0: Vec<f64>,
    /// Differentiator output `ṡ − η1 + γη0`.
    pub s_hat1: Vec<f64>,
    /// `P ŝ0`.
    pub e0: Vec<f64>,
    /// `P(ṡ + γs − η1)`, the variable driven by the error system; equals `P ŝ1 + γ e0`.
    pub e1: Vec<f64>,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

/// Shared estimates `ŝ0 = s − η0`.
pub fn shared_estimates(state: &ProtocolState, s: &[f64]) -> Vec<f64> {
    s.iter().zip(&state.eta0).map(|(a, b)| a - b).collect()
}

/// Per-edge pairs of current values, i.e. ideal communication.
pub fn ideal_comm(g: &Graph, values: &[f64]) -> Vec<(f64, f64)> {
    g.edges().iter().map(|&(i, j)| (values[i], values[j])).collect()
}

fn check_lengths(g: &Graph, state: &ProtocolState, comm: &[(f64, f64)]) -> Result<()> {
    let n = g.n_agents();
    for len in [state.eta0.len(), state.eta1.len()] {
        if len != n {
            return Err(Error::Dimension { expected: n, got: len });
        }
    }
    if comm.len() != g.n_edges() {
        return Err(Error::Dimension { expected: g.n_edges(), got: comm.len() });
    }
    Ok(())
}

/// Adds `k0√L ⌈Δ⌋^{1/2}` and `k1 L sign(Δ)` for one edge into the rates of its endpoints.
#[inline]
fn couple(rate: &mut ProtocolState, i: usize, j: usize, diff: f64, a0: f64, a1: f64) {
    let p = a0 * spow(diff, 0.5);
    let q = a1 * spow(diff, 0.0);
    rate.eta0[i] += p;
    rate.eta0[j] -= p;
    rate.eta1[i] += q;
    rate.eta1[j] -= q;
}

/// `η̇0 = k0√L D⌈Dᵀv⌋^{1/2} + η1 − γη0`, `η̇1 = k1 L D sign(Dᵀv) − γη1`, with `Dᵀv` taken from `comm`.
pub fn redcho_rhs(
    g: &Graph,
    state: &ProtocolState,
    comm: &[(f64, f64)],
    gains: &GainSet,
) -> Result<ProtocolState> {
    check_lengths(g, state, comm)?;
    let mut rate = ProtocolState {
        eta0: state.eta0.iter().zip(&state.eta1).map(|(e0, e1)| e1 - gains.gamma * e0).collect(),
        eta1: state.eta1.iter().map(|e1| -gains.gamma * e1).collect(),
    };
    let a0 = gains.k0 * gains.l.sqrt();
    let a1 = gains.k1 * gains.l;
    for (&(i, j), &(vi, vj)) in g.edges().iter().zip(comm) {
        couple(&mut rate, i, j, vi - vj, a0, a1);
    }
    Ok(rate)
}

/// Output map at time `t`.
pub fn redcho_outputs(
    state: &ProtocolState,
    src: &dyn SignalSource,
    t: f64,
    gains: &GainSet,
) -> Result<OutputSnapshot> {
    let n = src.n_agents();
    if state.n_agents() != n {
        return Err(Error::Dimension { expected: n, got: state.n_agents() });
    }
    let s = src.evaluate(t, Order::Value);
    let sd = src.evaluate(t, Order::First);
    let s_hat0 = shared_estimates(state, &s);
    let s_hat1: Vec<f64> = (0..n)
        .map(|i| sd[i] - state.eta1[i] + gains.gamma * state.eta0[i])
        .collect();
    let compact: Vec<f64> = (0..n).map(|i| sd[i] + gains.gamma * s[i] - state.eta1[i]).collect();
    let e0 = project_to_zero_mean(&s_hat0);
    let e1 = project_to_zero_mean(&compact);
    let x0 = e0.iter().map(|v| v / gains.l).collect();
    let x1 = e1.iter().map(|v| v / (gains.k0 * gains.l)).collect();
    Ok(OutputSnapshot { s_hat0, s_hat1, e0, e1, x0, x1 })
}

/// States of the derivative-free variant.
///
/// Each agent runs a primed pair `(η′0, η′1)` on its own signal and a second
/// pair `(η0, η1)` on a virtual copy carrying the zero signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeFreeState {
    pub eta0p: Vec<f64>,
    pub eta1p: Vec<f64>,
    pub eta0: Vec<f64>,
    pub eta1: Vec<f64>,
}

impl DerivativeFreeState {
    pub fn zeros(n: usize) -> Self {
        Self { eta0p: vec![0.0; n], eta1p: vec![0.0; n], eta0: vec![0.0; n], eta1: vec![0.0; n] }
    }

    pub fn n_agents(&self) -> usize {
        self.eta0.len()
    }

    pub fn axpy(&mut self, h: f64, rate: &DerivativeFreeState) {
        let pairs = [
            (&mut self.eta0p, &rate.eta0p),
            (&mut self.eta1p, &rate.eta1p),
            (&mut self.eta0, &rate.eta0),
            (&mut self.eta1, &rate.eta1),
        ];
        for (x, r) in pairs {
            for (a, b) in x.iter_mut().zip(r) {
                *a += h * b;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.eta0p, &self.eta1p, &self.eta0, &self.eta1]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Shared estimates `ŝ′0 = s − η′0`.
    pub fn shared(&self, s: &[f64]) -> Vec<f64> {
        s.iter().zip(&self.eta0p).map(|(a, b)| a - b).collect()
    }

    /// Differentiator output `2(γη0 − η1)`.
    pub fn output(&self, gamma: f64) -> Vec<f64> {
        self.eta0.iter().zip(&self.eta1).map(|(e0, e1)| 2.0 * (gamma * e0 - e1)).collect()
    }
}

/// Derivative-free right-hand side.
///
/// `comm` carries the network-edge values of `ŝ′0`; the coupling between an
/// agent and its virtual copy is local and always uses current values. Both
/// self-coupling terms of `η̇′1` use the gain `k1 L`, which is what makes the
/// scheme the plain protocol on the network augmented by the virtual copies.
pub fn derivative_free_rhs(
    g: &Graph,
    state: &DerivativeFreeState,
    s: &[f64],
    comm: &[(f64, f64)],
    gains: &GainSet,
) -> Result<DerivativeFreeState> {
    let n = g.n_agents();
    for len in [state.eta0p.len(), state.eta1p.len(), state.eta0.len(), state.eta1.len(), s.len()] {
        if len != n {
            return Err(Error::Dimension { expected: n, got: len });
        }
    }
    if comm.len() != g.n_edges() {
        return Err(Error::Dimension { expected: g.n_edges(), got: comm.len() });
    }
    let primed = ProtocolState { eta0: state.eta0p.clone(), eta1: state.eta1p.clone() };
    let mut p = redcho_rhs(g, &primed, comm, gains)?;
    let a0 = gains.k0 * gains.l.sqrt();
    let a1 = gains.k1 * gains.l;
    let g0 = gains.gamma;
    let mut eta0 = Vec::with_capacity(n);
    let mut eta1 = Vec::with_capacity(n);
    for i in 0..n {
        let diff = (s[i] - state.eta0p[i]) + state.eta0[i];
        p.eta0[i] += a0 * spow(diff, 0.5);
        p.eta1[i] += a1 * spow(diff, 0.0);
        eta0.push(-a0 * spow(diff, 0.5) + state.eta1[i] - g0 * state.eta0[i]);
        eta1.push(-a1 * spow(diff, 0.0) - g0 * state.eta1[i]);
    }
    Ok(DerivativeFreeState { eta0p: p.eta0, eta1p: p.eta1, eta0, eta1 })
}

fn check_zero_mean(v: &[f64], what: &str) -> Result<()> {
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    let scale = v.iter().map(|x| x.abs()).fold(1.0, f64::max);
    if mean.abs() > 1e-9 * scale {
        return Err(Error::InvalidParameter(format!("{what} is not zero-mean (mean {mean:e})")));
    }
    Ok(())
}

/// Consensus-error dynamics
/// `ė0 = −k0√L ∇U(e0) + e1 − γe0`, `ė1 = −k1 L S(e0) − γe1 + d`.
pub fn error_rhs(
    cp: &Coupling,
    e0: &[f64],
    e1: &[f64],
    d: &[f64],
    gains: &GainSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    for (v, name) in [(e0, "e0"), (e1, "e1"), (d, "d")] {
        cp.check_dim(v)?;
        cp.check_member(v).map_err(|_| {
            Error::InvalidParameter(format!("{name} is outside the consensus subspace"))
        })?;
    }
    if cp.dim() > 1 {
        for (v, name) in [(e0, "e0"), (e1, "e1"), (d, "d")] {
            check_zero_mean(v, name)?;
        }
    }
    let z = cp.edge_values(e0);
    let grad = cp.assemble(&z.iter().map(|&v| spow(v, 0.5)).collect::<Vec<_>>());
    let sel = cp.assemble(&z.iter().map(|&v| spow(v, 0.0)).collect::<Vec<_>>());
    let a0 = gains.k0 * gains.l.sqrt();
    let a1 = gains.k1 * gains.l;
    let de0 = (0..e0.len()).map(|i| -a0 * grad[i] + e1[i] - gains.gamma * e0[i]).collect();
    let de1 = (0..e0.len()).map(|i| -a1 * sel[i] - gains.gamma * e1[i] + d[i]).collect();
    Ok((de0, de1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SignalBank;

    fn unit_gains() -> GainSet {
        GainSet::new(1.0, 1.0, 0.0, 1.0, 7.0).unwrap()
    }

    #[test]
    fn consensus_reached_leaves_only_linear_terms() {
        let g = Graph::ring(4).unwrap();
        let st = ProtocolState { eta0: vec![0.1, -0.2, 0.3, 0.0], eta1: vec![1.0, 2.0, -1.0, 0.5] };
        let r = redcho_rhs(&g, &st, &ideal_comm(&g, &[0.7; 4]), &unit_gains()).unwrap();
        assert_eq!(r.eta0, st.eta1);
        assert_eq!(r.eta1, vec![0.0; 4]);
    }

    #[test]
    fn two_agents_hand_evaluation() {
        let g = Graph::path(2).unwrap();
        let st = ProtocolState { eta0: vec![0.0; 2], eta1: vec![0.25, -0.5] };
        let r = redcho_rhs(&g, &st, &ideal_comm(&g, &[1.0, 0.0]), &unit_gains()).unwrap();
        assert_eq!(r.eta0, vec![1.25, -1.5]);
        assert_eq!(r.eta1, vec![1.0, -1.0]);
    }

    #[test]
    fn dimension_errors() {
        let g = Graph::path(2).unwrap();
        let st = ProtocolState::zeros(3);
        assert!(redcho_rhs(&g, &st, &[(0.0, 0.0)], &unit_gains()).is_err());
        assert!(redcho_rhs(&g, &ProtocolState::zeros(2), &[], &unit_gains()).is_err());
    }

    #[test]
    fn outputs_without_internal_state() {
        let bank = SignalBank::sinusoids(&[1.0, 2.0], &[0.3, 0.1]).unwrap();
        let st = ProtocolState::zeros(2);
        let o = redcho_outputs(&st, &bank, 0.7, &unit_gains()).unwrap();
        assert_eq!(o.s_hat0, bank.evaluate(0.7, Order::Value));
        assert_eq!(o.s_hat1, bank.evaluate(0.7, Order::First));
        assert!(o.e0.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn error_equilibrium_and_subspace_check() {
        let cp = Coupling::from_graph(&Graph::ring(3).unwrap()).unwrap();
        let z = vec![0.0; 3];
        let (a, b) = error_rhs(&cp, &z, &z, &z, &unit_gains()).unwrap();
        assert_eq!((a, b), (z.clone(), z.clone()));
        assert!(error_rhs(&cp, &[1.0, 1.0, 1.0], &z, &z, &unit_gains()).is_err());
    }

    #[test]
    fn derivative_free_self_terms_vanish_at_fixed_pattern() {
        let g = Graph::path(2).unwrap();
        let s = [1.0, 1.0];
        // ŝ′0 = s − η′0 = 0.5 everywhere and ŝ0 = −η0 = 0.5.
        let st = DerivativeFreeState {
            eta0p: vec![0.5, 0.5],
            eta1p: vec![0.0; 2],
            eta0: vec![-0.5, -0.5],
            eta1: vec![0.0; 2],
        };
        let shared = st.shared(&s);
        let r = derivative_free_rhs(&g, &st, &s, &ideal_comm(&g, &shared), &unit_gains()).unwrap();
        assert_eq!(r.eta1p, vec![0.0; 2]);
        assert_eq!(r.eta1, vec![0.0; 2]);
    }
}
