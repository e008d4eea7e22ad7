//! The reference experiment: five agents on a ring tracking phase-shifted sinusoids.

use crate::gains::GainSet;
use crate::graph::Graph;
use crate::signals::SignalBank;
use crate::sim::SimConfig;
use crate::trigger::ThresholdRule;

pub const OMEGAS: [f64; 5] = [1.73, 0.58, 1.12, 0.37, 1.95];
pub const PHASES: [f64; 5] = [0.27, 1.66, 0.09, 1.92, 0.45];
/// Accuracy constant quoted for the reference gains.
pub const REFERENCE_C1: f64 = 7.9;
pub const FIG1_DELTA: f64 = 0.02;
pub const FIG2_SIGMA: f64 = 0.15;

/// `sin(ω_i t + φ_i)` for each agent.
pub fn reference_bank() -> SignalBank {
    SignalBank::sinusoids(&OMEGAS, &PHASES).expect("preset arrays have equal length")
}

pub fn reference_graph() -> Graph {
    Graph::ring(5).expect("ring of five is valid")
}

/// `k0 = 4`, `k1 = 13`, `γ = 1`, `L = 4`, `β = 7`.
pub fn reference_gains() -> GainSet {
    GainSet::new(4.0, 13.0, 1.0, 4.0, 7.0).expect("reference gains are valid")
}

/// `dt = 1e-4`, `T = 10`.
pub fn reference_sim() -> SimConfig {
    SimConfig { dt: 1e-4, horizon: 10.0, ..SimConfig::default() }
}

pub fn fig1_rule() -> ThresholdRule {
    ThresholdRule::Constant { delta: FIG1_DELTA }
}

/// Constant, vanishing `δ e^{−t/2}` and state-dependent rules, in that order.
pub fn fig2_rules() -> [ThresholdRule; 3] {
    [
        ThresholdRule::Constant { delta: FIG1_DELTA },
        ThresholdRule::Vanishing { delta: FIG1_DELTA, q: 0.5, p: 0.0 },
        ThresholdRule::StateDependent { delta: FIG1_DELTA, sigma: FIG2_SIGMA },
    ]
}
