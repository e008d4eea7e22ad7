use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::kernel::{lyapunov, AbstractState, ConjugateOptions, Coupling};

use super::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub t: f64,
    /// `None` where the conjugate solve failed.
    pub v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSeries {
    pub samples: Vec<LyapunovSample>,
    /// Times where `V` grew by more than `slack · V` between consecutive valid samples.
    pub increases: Vec<f64>,
}

impl LyapunovSeries {
    /// First sampled time with `V ≤ level`.
    pub fn first_below(&self, level: f64) -> Option<f64> {
        self.samples.iter().find(|s| s.v.is_some_and(|v| v <= level)).map(|s| s.t)
    }
}

/// `V(x0, x1)` with `x0 = e0/L`, `x1 = e1/(k0 L)` at every `decimation`-th recorded sample.
///
/// Increases are only flagged while `V` is above `floor`.
pub fn lyapunov_monitor(
    cp: &Coupling,
    trace: &Trace,
    gains: &GainSet,
    decimation: usize,
    slack: f64,
    floor: f64,
) -> Result<LyapunovSeries> {
    if trace.e0.is_empty() {
        return Err(Error::EmptyWindow("trace has no consensus-error series".into()));
    }
    if !(gains.l > 0.0) {
        return Err(Error::InvalidParameter("L must be positive to scale the state".into()));
    }
    let opts = ConjugateOptions::default();
    let step = decimation.max(1);
    let mut samples = Vec::new();
    for k in (0..trace.t.len()).step_by(step) {
        let x0 = trace.e0[k].iter().map(|v| v / gains.l).collect();
        let x1 = trace.e1[k].iter().map(|v| v / (gains.k0 * gains.l)).collect();
        let v = lyapunov(cp, &AbstractState::new(x0, x1), gains.beta, &opts).ok();
        samples.push(LyapunovSample { t: trace.t[k], v });
    }
    let mut increases = Vec::new();
    let mut last: Option<f64> = None;
    for s in &samples {
        if let Some(v) = s.v {
            if let Some(prev) = last {
                if prev > floor && v > prev * (1.0 + slack) {
                    increases.push(s.t);
                }
            }
            last = Some(v);
        }
    }
    Ok(LyapunovSeries { samples, increases })
}

/// `max_i |ŝ_{i,1} − ṡ̄|` over recorded samples with `t ≥ fraction · t_end`.
pub fn steady_state_error(trace: &Trace, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("fraction must be in (0, 1), got {fraction}")));
    }
    let end = *trace
        .t
        .last()
        .ok_or_else(|| Error::EmptyWindow("trace has no samples".into()))?;
    let start = fraction * end;
    let mut found = false;
    let mut worst = 0.0f64;
    for (t, e) in trace.t.iter().zip(&trace.err1) {
        if *t >= start - 1e-12 {
            found = true;
            worst = e.iter().copied().fold(worst, f64::max);
        }
    }
    if !found {
        return Err(Error::EmptyWindow(format!("no samples after t = {start}")));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RunMetrics;

    fn synthetic(errs: &[(f64, f64)]) -> Trace {
        Trace {
            t: errs.iter().map(|p| p.0).collect(),
            s_hat0: vec![],
            s_hat1: vec![],
            err1: errs.iter().map(|p| vec![p.1, 0.0]).collect(),
            s_bar_dot: vec![],
            e0: vec![],
            e1: vec![],
            events: vec![],
            channels: vec![],
            metrics: RunMetrics {
                steps: 0,
                dt: 1.0,
                horizon: 10.0,
                total_events: 0,
                event_fraction: 0.0,
                steady_state_error: 0.0,
                steady_state_consensus: 0.0,
                epsilon_checks: 0,
                epsilon_violations: 0,
                epsilon_worst_ratio: 0.0,
            },
        }
    }

    #[test]
    fn steady_state_examples() {
        let zero = synthetic(&[(0.0, 0.0), (5.0, 0.0), (10.0, 0.0)]);
        assert_eq!(steady_state_error(&zero, 0.8).unwrap(), 0.0);
        let injected = synthetic(&[(0.0, 5.0), (8.5, 0.1), (9.0, 0.3), (10.0, 0.0)]);
        assert_eq!(steady_state_error(&injected, 0.8).unwrap(), 0.3);
        assert!(steady_state_error(&synthetic(&[]), 0.8).is_err());
        assert!(steady_state_error(&zero, 1.0).is_err());
    }

    #[test]
    fn origin_trace_has_zero_lyapunov() {
        let mut tr = synthetic(&[(0.0, 0.0), (1.0, 0.0)]);
        tr.e0 = vec![vec![0.0; 3]; 2];
        tr.e1 = vec![vec![0.0; 3]; 2];
        let cp = Coupling::from_graph(&crate::graph::Graph::ring(3).unwrap()).unwrap();
        let g = GainSet::new(4.0, 13.0, 1.0, 4.0, 7.0).unwrap();
        let s = lyapunov_monitor(&cp, &tr, &g, 1, 1e-3, 1e-6).unwrap();
        assert!(s.samples.iter().all(|x| x.v == Some(0.0)));
        assert!(s.increases.is_empty());
    }
}
