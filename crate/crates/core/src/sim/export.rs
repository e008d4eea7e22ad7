use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trigger::window_stats;

use super::{LyapunovSeries, SweepRow, SweepSummary, Trace};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long format, one row per `(t, agent)`; the `V` column appears only when a series is given
/// and is blank at samples it skipped.
pub fn write_trace_csv(path: &Path, trace: &Trace, v: Option<&LyapunovSeries>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t", "agent", "s_hat0", "s_hat1", "err1"];
    if v.is_some() {
        header.push("V");
    }
    w.write_record(&header)?;
    let vmap: HashMap<u64, Option<f64>> = v
        .map(|s| s.samples.iter().map(|x| (x.t.to_bits(), x.v)).collect())
        .unwrap_or_default();
    for (k, &t) in trace.t.iter().enumerate() {
        let vk = vmap.get(&t.to_bits()).copied().flatten();
        for i in 0..trace.s_hat0[k].len() {
            let mut row = vec![
                t.to_string(),
                (i + 1).to_string(),
                trace.s_hat0[k][i].to_string(),
                trace.s_hat1[k][i].to_string(),
                trace.err1[k][i].to_string(),
            ];
            if v.is_some() {
                row.push(opt(vk));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Agents are numbered from 1.
pub fn write_events_csv(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["edge_i", "edge_j", "t_event"])?;
    for e in &trace.events {
        w.write_record([(e.i + 1).to_string(), (e.j + 1).to_string(), e.t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta", "rep", "sse", "event_fraction"])?;
    for r in rows {
        w.write_record([r.delta.to_string(), r.rep.to_string(), r.sse.to_string(), r.event_fraction.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_summary_csv(path: &Path, summary: &[SweepSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta", "max_sse", "mean_sse", "mean_event_fraction", "bound"])?;
    for s in summary {
        w.write_record([
            s.delta.to_string(),
            s.max_sse.to_string(),
            s.mean_sse.to_string(),
            s.mean_event_fraction.to_string(),
            opt(s.bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Estimated derivatives against the true average, worst error and the `c1√δ` level.
pub fn write_figure1_csv(path: &Path, trace: &Trace, bound: Option<f64>) -> Result<()> {
    let n = trace.s_hat1.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "s_bar_dot".to_string()];
    header.extend((1..=n).map(|i| format!("s_hat1_{i}")));
    header.extend(["max_err".to_string(), "bound".to_string()]);
    w.write_record(&header)?;
    let max_err = trace.max_err();
    for k in 0..trace.t.len() {
        let mut row = vec![trace.t[k].to_string(), trace.s_bar_dot[k].to_string()];
        row.extend(trace.s_hat1[k].iter().map(f64::to_string));
        row.push(max_err[k].to_string());
        row.push(opt(bound));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One block per regime: worst error at each sample plus the inter-event envelope of the
/// window of width `window` containing it.
pub fn write_figure2_csv(path: &Path, runs: &[(&str, &Trace)], window: f64) -> Result<()> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter(format!("window must be positive, got {window}")));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["regime", "t", "max_err", "inter_event_min", "inter_event_median", "inter_event_max"])?;
    for (name, tr) in runs {
        let n_windows = (tr.metrics.horizon / window).ceil().max(1.0) as usize;
        let stats: Vec<_> = (0..n_windows)
            .map(|m| window_stats(&tr.channels, m as f64 * window, (m + 1) as f64 * window))
            .collect();
        for (t, e) in tr.t.iter().zip(tr.max_err()) {
            let m = ((t / window).floor() as usize).min(n_windows - 1);
            let s = &stats[m];
            w.write_record([
                name.to_string(),
                t.to_string(),
                e.to_string(),
                opt(s.min),
                opt(s.median),
                opt(s.max),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
