//! Fixed-step forward Euler integration of the protocol, with metrics.
//!
//! At every step the trigger is consulted first and the right-hand side is
//! evaluated with the refreshed stored values. Every edge broadcasts at
//! `t = 0`.

mod export;
mod monitor;
mod sweep;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::graph::{project_to_zero_mean, Graph};
use crate::kernel::norm;
use crate::protocol::{
    derivative_free_rhs, ideal_comm, redcho_rhs, DerivativeFreeState, ProtocolState,
};
use crate::signals::{Order, SignalSource};
use crate::trigger::{epsilon_bound, should_fire, threshold_value, EdgeChannel, ThresholdRule};

pub use export::{
    write_events_csv, write_figure1_csv, write_figure2_csv, write_sweep_csv, write_sweep_summary_csv,
    write_trace_csv,
};
pub use monitor::{lyapunov_monitor, steady_state_error, LyapunovSample, LyapunovSeries};
pub use sweep::{summarize_sweep, sweep_delta, SweepRow, SweepSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Redcho,
    DerivativeFree,
}

/// Initial internal states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialEta {
    Zeros,
    /// Every entry drawn uniformly from `[low, high]` with the run seed.
    Uniform { low: f64, high: f64 },
    /// Explicit vectors; the derivative-free variant starts its virtual pair at zero.
    Explicit { eta0: Vec<f64>, eta1: Vec<f64> },
}

impl Default for InitialEta {
    fn default() -> Self {
        Self::Uniform { low: -1.0, high: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub initial: InitialEta,
    pub variant: Variant,
    /// Start of the steady-state window as a fraction of the horizon.
    pub steady_state_fraction: f64,
    /// Keep every n-th step in the trace; 0 keeps only the metrics.
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 10.0,
            seed: 1,
            initial: InitialEta::default(),
            variant: Variant::Redcho,
            steady_state_fraction: 0.8,
            record_every: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "horizon {} is shorter than dt {}",
                self.horizon, self.dt
            )));
        }
        if !(self.steady_state_fraction > 0.0 && self.steady_state_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "steady-state fraction must be in (0, 1), got {}",
                self.steady_state_fraction
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// One broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub edge: usize,
    pub i: usize,
    pub j: usize,
    pub t: f64,
}

/// Metrics accumulated over every step, independent of trace decimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: usize,
    pub dt: f64,
    pub horizon: f64,
    pub total_events: usize,
    pub event_fraction: f64,
    /// `max_i |ŝ_{i,1} − ṡ̄|` over the steady-state window.
    pub steady_state_error: f64,
    /// Largest edge disagreement `|ŝ_{i,0} − ŝ_{j,0}|` over the steady-state window.
    pub steady_state_consensus: f64,
    pub epsilon_checks: usize,
    pub epsilon_violations: usize,
    /// Largest ratio of `‖ε‖` to its bound.
    pub epsilon_worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub t: Vec<f64>,
    pub s_hat0: Vec<Vec<f64>>,
    pub s_hat1: Vec<Vec<f64>>,
    /// `|ŝ_{i,1} − ṡ̄|` per agent.
    pub err1: Vec<Vec<f64>>,
    pub s_bar_dot: Vec<f64>,
    /// Consensus errors driven by the error system; empty for the derivative-free variant.
    pub e0: Vec<Vec<f64>>,
    pub e1: Vec<Vec<f64>>,
    pub events: Vec<EventRecord>,
    pub channels: Vec<EdgeChannel>,
    pub metrics: RunMetrics,
}

impl Trace {
    pub fn max_err(&self) -> Vec<f64> {
        self.err1.iter().map(|e| e.iter().copied().fold(0.0, f64::max)).collect()
    }
}

enum State {
    Plain(ProtocolState),
    Free(DerivativeFreeState),
}

fn initial_state(n: usize, cfg: &SimConfig) -> Result<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (eta0, eta1) = match &cfg.initial {
        InitialEta::Zeros => (vec![0.0; n], vec![0.0; n]),
        InitialEta::Uniform { low, high } => {
            if !(low <= high) {
                return Err(Error::InvalidParameter(format!("empty range [{low}, {high}]")));
            }
            let mut draw = || -> Vec<f64> {
                (0..n).map(|_| if low == high { *low } else { rng.random_range(*low..=*high) }).collect()
            };
            (draw(), draw())
        }
        InitialEta::Explicit { eta0, eta1 } => {
            for v in [eta0, eta1] {
                if v.len() != n {
                    return Err(Error::Dimension { expected: n, got: v.len() });
                }
            }
            (eta0.clone(), eta1.clone())
        }
    };
    Ok(match cfg.variant {
        Variant::Redcho => State::Plain(ProtocolState { eta0, eta1 }),
        Variant::DerivativeFree => State::Free(DerivativeFreeState {
            eta0p: eta0,
            eta1p: eta1,
            eta0: vec![0.0; n],
            eta1: vec![0.0; n],
        }),
    })
}

/// Runs one experiment; `rule = None` is ideal communication.
pub fn integrate(
    g: &Graph,
    src: &dyn SignalSource,
    gains: &GainSet,
    rule: Option<&ThresholdRule>,
    cfg: &SimConfig,
) -> Result<Trace> {
    cfg.validate()?;
    gains.validate()?;
    if let Some(r) = rule {
        r.validate()?;
    }
    let n = g.n_agents();
    if src.n_agents() != n {
        return Err(Error::Dimension { expected: n, got: src.n_agents() });
    }
    let steps = cfg.steps();
    let dt = cfg.dt;
    let window_start = cfg.steady_state_fraction * cfg.horizon;
    let mut state = initial_state(n, cfg)?;
    let mut channels: Vec<EdgeChannel> =
        g.edges().iter().enumerate().map(|(k, &(i, j))| EdgeChannel::new(k, i, j)).collect();

    let mut tr = Trace {
        t: Vec::new(),
        s_hat0: Vec::new(),
        s_hat1: Vec::new(),
        err1: Vec::new(),
        s_bar_dot: Vec::new(),
        e0: Vec::new(),
        e1: Vec::new(),
        events: Vec::new(),
        channels: Vec::new(),
        metrics: RunMetrics {
            steps,
            dt,
            horizon: cfg.horizon,
            total_events: 0,
            event_fraction: 0.0,
            steady_state_error: 0.0,
            steady_state_consensus: 0.0,
            epsilon_checks: 0,
            epsilon_violations: 0,
            epsilon_worst_ratio: 0.0,
        },
    };

    let mut s = vec![0.0; n];
    let mut sd = vec![0.0; n];
    for k in 0..=steps {
        let t = k as f64 * dt;
        src.evaluate_into(t, Order::Value, &mut s);
        src.evaluate_into(t, Order::First, &mut sd);
        let sbd = sd.iter().sum::<f64>() / n as f64;
        let (s_hat0, s_hat1) = match &state {
            State::Plain(st) => (
                (0..n).map(|i| s[i] - st.eta0[i]).collect::<Vec<_>>(),
                (0..n).map(|i| sd[i] - st.eta1[i] + gains.gamma * st.eta0[i]).collect::<Vec<_>>(),
            ),
            State::Free(st) => (st.shared(&s), st.output(gains.gamma)),
        };
        let err: Vec<f64> = s_hat1.iter().map(|v| (v - sbd).abs()).collect();

        if t >= window_start - 1e-12 {
            let m = &mut tr.metrics;
            m.steady_state_error = err.iter().copied().fold(m.steady_state_error, f64::max);
            for &(i, j) in g.edges() {
                m.steady_state_consensus = m.steady_state_consensus.max((s_hat0[i] - s_hat0[j]).abs());
            }
        }

        let record = cfg.record_every > 0 && (k % cfg.record_every == 0 || k == steps);
        if record {
            tr.t.push(t);
            if let State::Plain(st) = &state {
                tr.e0.push(project_to_zero_mean(&s_hat0));
                let compact: Vec<f64> = (0..n).map(|i| sd[i] + gains.gamma * s[i] - st.eta1[i]).collect();
                tr.e1.push(project_to_zero_mean(&compact));
            }
            tr.s_hat0.push(s_hat0.clone());
            tr.s_hat1.push(s_hat1);
            tr.err1.push(err);
            tr.s_bar_dot.push(sbd);
        }
        if k == steps {
            break;
        }

        let comm = match rule {
            None => ideal_comm(g, &s_hat0),
            Some(rule) => {
                for ch in channels.iter_mut() {
                    let (ci, cj) = (s_hat0[ch.i], s_hat0[ch.j]);
                    let fire = ch.last_event.is_none() || should_fire(ch, ci, cj, threshold_value(rule, t, ch));
                    if fire {
                        ch.fire(t, ci, cj)?;
                        tr.events.push(EventRecord { edge: ch.edge, i: ch.i, j: ch.j, t });
                    }
                }
                check_epsilon(rule, t, &channels, &s_hat0, gains.l, &mut tr.metrics);
                channels.iter().map(|c| (c.stored_i, c.stored_j)).collect()
            }
        };

        match &mut state {
            State::Plain(st) => {
                let rate = redcho_rhs(g, st, &comm, gains)?;
                st.axpy(dt, &rate);
                if !st.is_finite() {
                    return Err(Error::NonFinite { step: k });
                }
            }
            State::Free(st) => {
                let rate = derivative_free_rhs(g, st, &s, &comm, gains)?;
                st.axpy(dt, &rate);
                if !st.is_finite() {
                    return Err(Error::NonFinite { step: k });
                }
            }
        }
    }

    let m = &mut tr.metrics;
    m.total_events = channels.iter().map(|c| c.event_count).sum();
    m.event_fraction = if rule.is_some() {
        m.total_events as f64 / (g.n_edges().max(1) * steps.max(1)) as f64
    } else {
        1.0
    };
    tr.channels = channels;
    Ok(tr)
}

/// Compares the stacked stored-value error against its bound at one step.
fn check_epsilon(
    rule: &ThresholdRule,
    t: f64,
    channels: &[EdgeChannel],
    s_hat0: &[f64],
    l: f64,
    m: &mut RunMetrics,
) {
    if l <= 0.0 {
        return;
    }
    let eps: Vec<f64> = channels
        .iter()
        .map(|c| (c.stored_difference() - (s_hat0[c.i] - s_hat0[c.j])) / l)
        .collect();
    let dtx0: Vec<f64> = channels.iter().map(|c| (s_hat0[c.i] - s_hat0[c.j]) / l).collect();
    let delta_now = match *rule {
        ThresholdRule::Vanishing { delta, q, p } => delta * (-q * (t - p)).exp(),
        r => r.delta(),
    };
    let bound = epsilon_bound(delta_now, rule.sigma(), channels.len(), l, norm(&dtx0));
    let e = norm(&eps);
    m.epsilon_checks += 1;
    if e > bound * (1.0 + 1e-12) + 1e-15 {
        m.epsilon_violations += 1;
    }
    if bound > 0.0 {
        m.epsilon_worst_ratio = m.epsilon_worst_ratio.max(e / bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SignalBank;

    fn gains() -> GainSet {
        GainSet::new(4.0, 13.0, 1.0, 4.0, 7.0).unwrap()
    }

    fn short(record_every: usize) -> SimConfig {
        SimConfig { horizon: 0.05, dt: 1e-3, record_every, ..Default::default() }
    }

    #[test]
    fn zero_signals_zero_state_stay_zero() {
        let g = Graph::ring(4).unwrap();
        let bank = SignalBank::zeros(4);
        let cfg = SimConfig { initial: InitialEta::Zeros, ..short(1) };
        let tr = integrate(&g, &bank, &gains(), None, &cfg).unwrap();
        assert!(tr.s_hat1.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(tr.t.len(), cfg.steps() + 1);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let g = Graph::ring(5).unwrap();
        let bank = crate::presets::reference_bank();
        let rule = ThresholdRule::Constant { delta: 0.02 };
        let a = integrate(&g, &bank, &gains(), Some(&rule), &short(1)).unwrap();
        let b = integrate(&g, &bank, &gains(), Some(&rule), &short(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_threshold_fires_every_step() {
        let g = Graph::ring(5).unwrap();
        let bank = crate::presets::reference_bank();
        let rule = ThresholdRule::Constant { delta: 0.0 };
        let tr = integrate(&g, &bank, &gains(), Some(&rule), &short(0)).unwrap();
        assert_eq!(tr.metrics.event_fraction, 1.0);
        assert!(tr.t.is_empty());
    }

    #[test]
    fn events_on_grid() {
        let g = Graph::ring(5).unwrap();
        let bank = crate::presets::reference_bank();
        let rule = ThresholdRule::Constant { delta: 0.01 };
        let cfg = short(1);
        let tr = integrate(&g, &bank, &gains(), Some(&rule), &cfg).unwrap();
        for e in &tr.events {
            let k = e.t / cfg.dt;
            assert!((k - k.round()).abs() < 1e-9);
        }
        assert_eq!(tr.metrics.epsilon_violations, 0);
    }

    #[test]
    fn invalid_configs() {
        let g = Graph::ring(3).unwrap();
        let bank = SignalBank::zeros(3);
        let bad = SimConfig { dt: 0.0, ..Default::default() };
        assert!(integrate(&g, &bank, &gains(), None, &bad).is_err());
        let bad = SimConfig { steady_state_fraction: 1.0, ..Default::default() };
        assert!(integrate(&g, &bank, &gains(), None, &bad).is_err());
        assert!(integrate(&g, &SignalBank::zeros(2), &gains(), None, &short(1)).is_err());
    }
}
