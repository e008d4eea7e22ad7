use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gains::GainSet;
use crate::graph::Graph;
use crate::signals::SignalSource;
use crate::trigger::ThresholdRule;

use super::{integrate, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub rep: usize,
    pub sse: f64,
    pub event_fraction: f64,
    pub epsilon_violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub delta: f64,
    pub max_sse: f64,
    pub mean_sse: f64,
    pub mean_event_fraction: f64,
    /// `c1 √δ`, if a `c1` was given.
    pub bound: Option<f64>,
}

/// Seed of one repetition; repetitions of different `δ` share initial states.
fn rep_seed(base: u64, rep: usize) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(rep as u64)
}

/// Constant-threshold runs for every `(δ, repetition)`, in parallel.
///
/// Rows are returned in `(δ, repetition)` order regardless of scheduling.
pub fn sweep_delta(
    g: &Graph,
    src: &dyn SignalSource,
    gains: &GainSet,
    base: &SimConfig,
    deltas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(f64, usize)> = deltas
        .iter()
        .flat_map(|&d| (0..reps).map(move |r| (d, r)))
        .collect();
    jobs.par_iter()
        .map(|&(delta, rep)| {
            let cfg = SimConfig { seed: rep_seed(seed, rep), record_every: 0, ..base.clone() };
            let rule = ThresholdRule::Constant { delta };
            let tr = integrate(g, src, gains, Some(&rule), &cfg)?;
            Ok(SweepRow {
                delta,
                rep,
                sse: tr.metrics.steady_state_error,
                event_fraction: tr.metrics.event_fraction,
                epsilon_violations: tr.metrics.epsilon_violations,
            })
        })
        .collect()
}

/// One summary per distinct `δ`, in first-appearance order.
pub fn summarize_sweep(rows: &[SweepRow], c1: Option<f64>) -> Vec<SweepSummary> {
    let mut deltas: Vec<f64> = Vec::new();
    for r in rows {
        if !deltas.contains(&r.delta) {
            deltas.push(r.delta);
        }
    }
    deltas
        .into_iter()
        .map(|d| {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.delta == d).collect();
            let n = sel.len() as f64;
            SweepSummary {
                delta: d,
                max_sse: sel.iter().map(|r| r.sse).fold(0.0, f64::max),
                mean_sse: sel.iter().map(|r| r.sse).sum::<f64>() / n,
                mean_event_fraction: sel.iter().map(|r| r.event_fraction).sum::<f64>() / n,
                bound: c1.map(|c| c * d.sqrt()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_groups_by_delta() {
        let rows = [
            SweepRow { delta: 0.04, rep: 0, sse: 0.1, event_fraction: 0.5, epsilon_violations: 0 },
            SweepRow { delta: 0.04, rep: 1, sse: 0.3, event_fraction: 0.3, epsilon_violations: 0 },
            SweepRow { delta: 0.0, rep: 0, sse: 0.01, event_fraction: 1.0, epsilon_violations: 0 },
        ];
        let s = summarize_sweep(&rows, Some(2.0));
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].max_sse, 0.3);
        assert!((s[0].mean_event_fraction - 0.4).abs() < 1e-15);
        assert!((s[0].bound.unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(s[1].bound, Some(0.0));
    }

    #[test]
    fn zero_delta_row_fires_every_step() {
        let g = Graph::ring(5).unwrap();
        let bank = crate::presets::reference_bank();
        let gains = GainSet::new(4.0, 13.0, 1.0, 4.0, 7.0).unwrap();
        let cfg = SimConfig { horizon: 0.02, dt: 1e-3, ..Default::default() };
        let rows = sweep_delta(&g, &bank, &gains, &cfg, &[0.0, 0.05], 2, 1).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().filter(|r| r.delta == 0.0).all(|r| r.event_fraction == 1.0));
        assert_eq!((rows[1].delta, rows[1].rep), (0.0, 1));
    }
}
