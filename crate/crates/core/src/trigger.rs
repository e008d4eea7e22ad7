//! Per-edge event triggering.
//!
//! Both endpoints of an edge broadcast together, so a channel stores one
//! value per endpoint and refreshes the pair atomically. Events are only
//! detected at integrator steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Broadcast threshold `δ_ij(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdRule {
    Constant { delta: f64 },
    /// `δ·exp(−q(t − p))`.
    Vanishing { delta: f64, q: f64, p: f64 },
    /// `δ + σ|stored_i − stored_j|`.
    StateDependent { delta: f64, sigma: f64 },
}

impl ThresholdRule {
    /// `δ = 0` is allowed and makes every step an event.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            Self::Constant { delta } if !(delta >= 0.0) => bad(format!("delta must be >= 0, got {delta}")),
            Self::Vanishing { delta, q, p } => {
                if !(delta >= 0.0) || !(q > 0.0) || !(p >= 0.0) {
                    return bad(format!("vanishing rule needs delta >= 0, q > 0, p >= 0; got {delta}, {q}, {p}"));
                }
                Ok(())
            }
            Self::StateDependent { delta, sigma } => {
                if !(delta >= 0.0) || !(sigma >= 0.0) || !(sigma < 0.5) {
                    return bad(format!("state-dependent rule needs delta >= 0 and 0 <= sigma < 1/2; got {delta}, {sigma}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            Self::Constant { delta } | Self::Vanishing { delta, .. } | Self::StateDependent { delta, .. } => delta,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            Self::StateDependent { sigma, .. } => sigma,
            _ => 0.0,
        }
    }

    /// Short name used in file names and reports.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Vanishing { .. } => "vanishing",
            Self::StateDependent { .. } => "state_dependent",
        }
    }
}

/// Broadcast bookkeeping of one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeChannel {
    pub edge: usize,
    pub i: usize,
    pub j: usize,
    pub stored_i: f64,
    pub stored_j: f64,
    pub last_event: Option<f64>,
    pub event_count: usize,
    pub event_times: Vec<f64>,
    pub inter_event_log: Vec<f64>,
}

impl EdgeChannel {
    pub fn new(edge: usize, i: usize, j: usize) -> Self {
        Self {
            edge,
            i,
            j,
            stored_i: 0.0,
            stored_j: 0.0,
            last_event: None,
            event_count: 0,
            event_times: Vec::new(),
            inter_event_log: Vec::new(),
        }
    }

    /// Stores both current values and logs the event.
    pub fn fire(&mut self, t: f64, current_i: f64, current_j: f64) -> Result<()> {
        if let Some(last) = self.last_event {
            if !(t > last) {
                return Err(Error::NonIncreasingTime { t, last });
            }
            self.inter_event_log.push(t - last);
        }
        self.stored_i = current_i;
        self.stored_j = current_j;
        self.last_event = Some(t);
        self.event_count += 1;
        self.event_times.push(t);
        Ok(())
    }

    /// Stored difference `ŝ_i(τ) − ŝ_j(τ)`.
    pub fn stored_difference(&self) -> f64 {
        self.stored_i - self.stored_j
    }
}

pub fn threshold_value(rule: &ThresholdRule, t: f64, channel: &EdgeChannel) -> f64 {
    match *rule {
        ThresholdRule::Constant { delta } => delta,
        ThresholdRule::Vanishing { delta, q, p } => delta * (-q * (t - p)).exp(),
        ThresholdRule::StateDependent { delta, sigma } => delta + sigma * channel.stored_difference().abs(),
    }
}

/// True iff either endpoint moved at least `thr` away from its stored value.
pub fn should_fire(channel: &EdgeChannel, current_i: f64, current_j: f64, thr: f64) -> bool {
    let dev = (current_i - channel.stored_i).abs().max((current_j - channel.stored_j).abs());
    dev >= thr
}

/// Right-hand side of the bound on the stacked edge perturbation `ε = (stored − current)/L`:
/// `(2/(1 − 2σ))(δ√|E|/L + σ‖Dᵀx0‖)`, with `δ` the threshold level at the current time.
pub fn epsilon_bound(delta_now: f64, sigma: f64, n_edges: usize, l: f64, dtx0_norm: f64) -> f64 {
    2.0 / (1.0 - 2.0 * sigma) * (delta_now * (n_edges as f64).sqrt() / l + sigma * dtx0_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStats {
    pub edge: usize,
    pub events: usize,
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub t_start: f64,
    pub t_end: f64,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterEventStats {
    pub per_edge: Vec<EdgeStats>,
    pub total_events: usize,
    /// Events over `|E| · horizon/dt`, the count under full transmission.
    pub fraction: f64,
    pub windows: Vec<WindowStats>,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Inter-event times whose closing event falls in `[t0, t1)`, over all edges.
pub fn inter_events_in(channels: &[EdgeChannel], t0: f64, t1: f64) -> Vec<f64> {
    channels
        .iter()
        .flat_map(|c| c.event_times.iter().skip(1).zip(&c.inter_event_log))
        .filter(|(t, _)| **t >= t0 && **t < t1)
        .map(|(_, d)| *d)
        .collect()
}

pub fn window_stats(channels: &[EdgeChannel], t0: f64, t1: f64) -> WindowStats {
    let mut v = inter_events_in(channels, t0, t1);
    WindowStats {
        t_start: t0,
        t_end: t1,
        min: v.iter().copied().reduce(f64::min),
        max: v.iter().copied().reduce(f64::max),
        median: median(&mut v),
    }
}

/// Per-edge summaries, the event fraction and windowed envelopes of width `window`.
pub fn inter_event_stats(channels: &[EdgeChannel], horizon: f64, dt: f64, window: f64) -> InterEventStats {
    let per_edge = channels
        .iter()
        .map(|c| {
            let log = &c.inter_event_log;
            EdgeStats {
                edge: c.edge,
                events: c.event_count,
                min: log.iter().copied().reduce(f64::min),
                mean: (!log.is_empty()).then(|| log.iter().sum::<f64>() / log.len() as f64),
                max: log.iter().copied().reduce(f64::max),
            }
        })
        .collect();
    let total_events: usize = channels.iter().map(|c| c.event_count).sum();
    let steps = (horizon / dt).round().max(1.0);
    let fraction = total_events as f64 / (channels.len().max(1) as f64 * steps);
    let mut windows = Vec::new();
    if window > 0.0 {
        let mut t0 = 0.0;
        while t0 < horizon - 1e-12 {
            let t1 = (t0 + window).min(horizon + dt);
            windows.push(window_stats(channels, t0, t1));
            t0 += window;
        }
    }
    InterEventStats { per_edge, total_events, fraction, windows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        let mut ch = EdgeChannel::new(0, 0, 1);
        assert_eq!(threshold_value(&ThresholdRule::Constant { delta: 0.02 }, 7.3, &ch), 0.02);
        let v = threshold_value(&ThresholdRule::Vanishing { delta: 0.3, q: 0.5, p: 0.0 }, 2.0, &ch);
        assert!((v - 0.3 * (-1f64).exp()).abs() < 1e-15);
        ch.fire(0.0, 1.0, 0.0).unwrap();
        let v = threshold_value(&ThresholdRule::StateDependent { delta: 0.02, sigma: 0.15 }, 0.0, &ch);
        assert!((v - 0.17).abs() < 1e-15);
    }

    #[test]
    fn firing_condition_uses_greater_or_equal() {
        let ch = EdgeChannel::new(0, 0, 1);
        assert!(!should_fire(&ch, 0.0, 0.0, 0.02));
        assert!(should_fire(&ch, 0.021, 0.0, 0.02));
        assert!(should_fire(&ch, 0.02, 0.0, 0.02));
        assert!(should_fire(&ch, 0.0, -0.02, 0.02));
    }

    #[test]
    fn fire_bookkeeping() {
        let mut ch = EdgeChannel::new(3, 1, 2);
        ch.fire(0.0, 0.5, -0.5).unwrap();
        assert_eq!((ch.stored_i, ch.stored_j), (0.5, -0.5));
        ch.fire(0.1, 1.0, 2.0).unwrap();
        ch.fire(0.25, 3.0, 4.0).unwrap();
        assert_eq!((ch.stored_i, ch.stored_j), (3.0, 4.0));
        assert_eq!(ch.event_count, 3);
        assert!((ch.inter_event_log[1] - 0.15).abs() < 1e-15);
        assert!(matches!(ch.fire(0.25, 0.0, 0.0), Err(Error::NonIncreasingTime { .. })));
    }

    #[test]
    fn rule_validation() {
        assert!(ThresholdRule::Constant { delta: 0.0 }.validate().is_ok());
        assert!(ThresholdRule::Constant { delta: -1.0 }.validate().is_err());
        assert!(ThresholdRule::StateDependent { delta: 0.02, sigma: 0.5 }.validate().is_err());
        assert!(ThresholdRule::Vanishing { delta: 0.02, q: 0.0, p: 0.0 }.validate().is_err());
    }

    #[test]
    fn json_form() {
        let r: ThresholdRule =
            serde_json::from_str(r#"{"kind": "state_dependent", "delta": 0.02, "sigma": 0.15}"#).unwrap();
        assert_eq!(r, ThresholdRule::StateDependent { delta: 0.02, sigma: 0.15 });
        let back = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ThresholdRule>(&back).unwrap(), r);
    }

    #[test]
    fn fractions() {
        let dt = 0.1;
        let mut only_start = vec![EdgeChannel::new(0, 0, 1), EdgeChannel::new(1, 1, 2)];
        for c in &mut only_start {
            c.fire(0.0, 0.0, 0.0).unwrap();
        }
        let s = inter_event_stats(&only_start, 1.0, dt, 0.5);
        assert!((s.fraction - 0.1).abs() < 1e-12);

        let mut every = vec![EdgeChannel::new(0, 0, 1)];
        for k in 0..10 {
            every[0].fire(k as f64 * dt, 0.0, 0.0).unwrap();
        }
        let s = inter_event_stats(&every, 1.0, dt, 0.5);
        assert!((s.fraction - 1.0).abs() < 1e-12);
        assert_eq!(s.windows.len(), 2);
        assert!((s.per_edge[0].min.unwrap() - dt).abs() < 1e-12);
    }
}
