use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use netdiff_core::gains::{synthesize_k0, SearchOptions};
use netdiff_core::presets;
use netdiff_core::{Coupling, GainSet, Graph, GraphSpec, SignalBank, SimConfig, ThresholdRule};
use serde::{Deserialize, Serialize};

/// `k0` given explicitly or chosen a fixed factor above its computed lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum K0 {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

fn default_factor() -> f64 {
    1.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsConfig {
    pub k0: K0,
    pub k1: f64,
    pub gamma: f64,
    pub l: f64,
    pub beta: f64,
    #[serde(default = "default_factor")]
    pub auto_factor: f64,
}

impl GainsConfig {
    pub fn resolve(&self, g: &Graph, seed: u64) -> Result<GainSet> {
        let k0 = match self.k0 {
            K0::Value(v) => v,
            K0::Auto(_) => {
                let cp = Coupling::from_graph(g)?;
                let opts = SearchOptions { seed, ..Default::default() };
                synthesize_k0(&cp, self.k1, self.beta, self.auto_factor, &opts)?
            }
        };
        Ok(GainSet::new(k0, self.k1, self.gamma, self.l, self.beta)?)
    }
}

impl From<GainSet> for GainsConfig {
    fn from(g: GainSet) -> Self {
        Self { k0: K0::Value(g.k0), k1: g.k1, gamma: g.gamma, l: g.l, beta: g.beta, auto_factor: default_factor() }
    }
}

/// Everything one `simulate` invocation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub signals: SignalBank,
    pub gains: GainsConfig,
    /// One run per rule; an empty list is a single ideal-communication run.
    #[serde(default)]
    pub triggers: Vec<ThresholdRule>,
    #[serde(default)]
    pub sim: SimConfig,
    /// Lyapunov samples every n-th recorded step; 0 disables monitoring.
    #[serde(default)]
    pub monitor_every: usize,
    /// Accuracy constant drawn as `c1 √δ` in the figure files.
    #[serde(default)]
    pub c1: Option<f64>,
    pub output: PathBuf,
}

pub const PRESETS: [&str; 2] = ["paper-fig1", "paper-fig2"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let triggers = match name {
            "paper-fig1" => vec![presets::fig1_rule()],
            "paper-fig2" => presets::fig2_rules().to_vec(),
            other => bail!("unknown preset `{other}`; expected one of {}", PRESETS.join(", ")),
        };
        Ok(Self {
            graph: GraphSpec::Generator("ring:5".into()),
            signals: presets::reference_bank(),
            gains: presets::reference_gains().into(),
            triggers,
            sim: SimConfig { record_every: 10, ..presets::reference_sim() },
            monitor_every: 10,
            c1: Some(presets::REFERENCE_C1),
            output: PathBuf::from("out").join(name),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// `none`, `constant:δ`, `vanishing:δ:q:p` or `state:δ:σ`.
pub fn parse_trigger(arg: &str) -> Result<Option<ThresholdRule>> {
    let parts: Vec<&str> = arg.split(':').collect();
    let nums = |k: usize| -> Result<Vec<f64>> {
        if parts.len() != k + 1 {
            bail!("`{arg}` needs {k} numeric field(s) after the kind");
        }
        parts[1..].iter().map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number in `{arg}`"))).collect()
    };
    let rule = match parts[0] {
        "none" if parts.len() == 1 => return Ok(None),
        "constant" => ThresholdRule::Constant { delta: nums(1)?[0] },
        "vanishing" => {
            let v = nums(3)?;
            ThresholdRule::Vanishing { delta: v[0], q: v[1], p: v[2] }
        }
        "state" => {
            let v = nums(2)?;
            ThresholdRule::StateDependent { delta: v[0], sigma: v[1] }
        }
        _ => bail!("unknown trigger `{arg}`; use none, constant:D, vanishing:D:Q:P or state:D:S"),
    };
    rule.validate()?;
    Ok(Some(rule))
}

/// `start:end:count` (inclusive, evenly spaced) or a comma-separated list.
pub fn parse_deltas(arg: &str) -> Result<Vec<f64>> {
    let arg = arg.trim();
    if arg.is_empty() {
        bail!("the delta list is empty");
    }
    let values: Vec<f64> = if arg.contains(':') {
        let p: Vec<&str> = arg.split(':').collect();
        if p.len() != 3 {
            bail!("range `{arg}` must be start:end:count");
        }
        let (a, b): (f64, f64) = (p[0].parse()?, p[1].parse()?);
        let n: usize = p[2].parse()?;
        match n {
            0 => bail!("the delta list is empty"),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        }
    } else {
        arg.split(',').map(|s| s.trim().parse::<f64>().with_context(|| format!("bad delta `{s}`"))).collect::<Result<_>>()?
    };
    if let Some(bad) = values.iter().find(|d| !(**d >= 0.0)) {
        bail!("deltas must be nonnegative, got {bad}");
    }
    Ok(values)
}
