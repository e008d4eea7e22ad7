//! Helpers shared by integration test targets.

use netdiff_core::protocol::*;
use netdiff_core::{GainSet, Graph};

/// The agents plus one virtual copy each, the copy of `i` being node `n + i`.
pub fn augmented(g: &Graph) -> Graph {
    let n = g.n_agents();
    let mut edges = g.edges().to_vec();
    edges.extend((0..n).map(|i| (i, n + i)));
    Graph::new(2 * n, edges).unwrap()
}

/// Largest deviation between the derivative-free rates and the plain rates on the augmented network.
pub fn augmented_mismatch(g: &Graph, gains: &GainSet, st: &DerivativeFreeState, s: &[f64]) -> f64 {
    let n = g.n_agents();
    let shared = st.shared(s);
    let rate = derivative_free_rhs(g, st, s, &ideal_comm(g, &shared), gains).unwrap();

    let ga = augmented(g);
    let big = ProtocolState {
        eta0: st.eta0p.iter().chain(&st.eta0).copied().collect(),
        eta1: st.eta1p.iter().chain(&st.eta1).copied().collect(),
    };
    // Virtual copies carry the zero signal.
    let s_aug: Vec<f64> = s.iter().copied().chain(std::iter::repeat_n(0.0, n)).collect();
    let s_hat = shared_estimates(&big, &s_aug);
    let oracle = redcho_rhs(&ga, &big, &ideal_comm(&ga, &s_hat), gains).unwrap();
    let got: Vec<f64> = rate.eta0p.iter().chain(&rate.eta0).chain(&rate.eta1p).chain(&rate.eta1).copied().collect();
    let want: Vec<f64> = oracle.eta0.iter().chain(&oracle.eta1).copied().collect();
    got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
