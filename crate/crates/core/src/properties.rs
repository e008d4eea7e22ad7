//! Randomized checks of the kernel's dualities, homogeneities and inequalities.
//!
//! The potential, its gradient and the sign selection are taken from a
//! [`KernelFns`] table so that a deliberately broken implementation can be
//! run through the same suite.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::kernel::{
    conjugate, conjugate_gradient, dot, norm, potential, potential_gradient, sign_selection, AbstractState,
    ConjugateOptions, Coupling, StateTerms,
};

type ScalarFn = fn(&Coupling, &[f64]) -> Result<f64>;
type VectorFn = fn(&Coupling, &[f64]) -> Result<Vec<f64>>;

/// The functions under test.
#[derive(Clone, Copy)]
pub struct KernelFns {
    pub potential: ScalarFn,
    pub gradient: VectorFn,
    pub selection: VectorFn,
}

impl Default for KernelFns {
    fn default() -> Self {
        Self { potential, gradient: potential_gradient, selection: sign_selection }
    }
}

pub const PROPERTY_NAMES: [&str; 8] =
    ["fenchel", "gradient", "homogeneity", "euler", "beta", "cs", "coercivity", "orientation"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyConfig {
    pub seed: u64,
    /// Samples for every property except the `c_S` inequality.
    pub samples: usize,
    pub cs_samples: usize,
    pub beta: f64,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        Self { seed: 1, samples: 500, cs_samples: 1000, beta: 7.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    /// Largest violation measure seen; its meaning depends on the property.
    pub worst: f64,
    pub counterexample: Option<String>,
}

struct Probe {
    name: &'static str,
    checked: usize,
    worst: f64,
    counterexample: Option<String>,
}

impl Probe {
    fn new(name: &'static str) -> Self {
        Self { name, checked: 0, worst: 0.0, counterexample: None }
    }

    /// Records one check; `excess > 0` is a failure.
    fn record(&mut self, excess: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        if excess > self.worst || (self.checked == 1 && excess > 0.0) {
            self.worst = excess.max(self.worst);
        }
        if excess > 0.0 && self.counterexample.is_none() {
            self.counterexample = Some(what());
        }
    }

    fn finish(self) -> PropertyOutcome {
        PropertyOutcome {
            name: self.name.to_string(),
            passed: self.counterexample.is_none(),
            checked: self.checked,
            worst: self.worst,
            counterexample: self.counterexample,
        }
    }
}

/// Random point of `X` with a log-uniform scale in `[0.1, 10]`.
fn sample(cp: &Coupling, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let coords: Vec<f64> = (0..cp.rank()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = cp.embed(&coords);
    let scale = 10f64.powf(rng.random_range(-1.0..1.0)) / norm(&x).max(1e-300);
    x.iter().map(|v| v * scale).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn fmt(v: &[f64]) -> String {
    format!("{v:?}")
}

/// Runs the named properties (all of them if `only` is empty).
pub fn run_properties(
    cp: &Coupling,
    fns: &KernelFns,
    cfg: &PropertyConfig,
    only: &[String],
) -> Result<Vec<PropertyOutcome>> {
    for name in only {
        if !PROPERTY_NAMES.contains(&name.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "unknown property '{name}'; expected one of {}",
                PROPERTY_NAMES.join(", ")
            )));
        }
    }
    let selected = |n: &str| only.is_empty() || only.iter().any(|o| o == n);
    let opts = ConjugateOptions::default();
    let mut out = Vec::new();
    for (k, name) in PROPERTY_NAMES.iter().enumerate() {
        if !selected(name) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        let outcome = match *name {
            "fenchel" => fenchel(cp, fns, cfg, &opts, &mut rng)?,
            "gradient" => gradient(cp, fns, cfg, &mut rng)?,
            "homogeneity" => homogeneity(cp, fns, cfg, &opts, &mut rng)?,
            "euler" => euler(cp, fns, cfg, &opts, &mut rng)?,
            "beta" => beta_inequality(cp, fns, cfg, &opts, &mut rng)?,
            "cs" => cs_inequality(cp, fns, cfg, &mut rng)?,
            "coercivity" => coercivity(cp, fns, cfg, &mut rng)?,
            _ => orientation(cp, fns, cfg, &mut rng)?,
        };
        out.push(outcome);
    }
    Ok(out)
}

fn fenchel(
    cp: &Coupling,
    fns: &KernelFns,
    cfg: &PropertyConfig,
    opts: &ConjugateOptions,
    rng: &mut ChaCha8Rng,
) -> Result<PropertyOutcome> {
    let mut p = Probe::new("fenchel");
    for _ in 0..cfg.samples {
        let (x0, x1) = (sample(cp, rng), sample(cp, rng));
        let gap = (fns.potential)(cp, &x0)? + conjugate(cp, &x1, opts)? - dot(&x0, &x1);
        p.record(-gap - 1e-8, || format!("gap {gap:e} at x0 = {}, x1 = {}", fmt(&x0), fmt(&x1)));
        // Equality on the graph of the gradient.
        let u = (fns.potential)(cp, &x0)?;
        let y = (fns.gradient)(cp, &x0)?;
        let gap = u + conjugate(cp, &y, opts)? - dot(&x0, &y);
        p.record(gap.abs() - 1e-6 * u.max(1.0), || {
            format!("equality gap {gap:e} at x0 = {}, x1 = ∇U(x0)", fmt(&x0))
        });
    }
    Ok(p.finish())
}

fn gradient(cp: &Coupling, fns: &KernelFns, cfg: &PropertyConfig, rng: &mut ChaCha8Rng) -> Result<PropertyOutcome> {
    let mut p = Probe::new("gradient");
    let basis: &DMatrix<f64> = cp.basis();
    let mut tries = 0;
    while p.checked < cfg.samples && tries < 20 * cfg.samples {
        tries += 1;
        let x = sample(cp, rng);
        // The square root makes finite differences unreliable near kinks.
        if cp.edge_values(&x).iter().any(|v| v.abs() < 1e-3) {
            continue;
        }
        let g = (fns.gradient)(cp, &x)?;
        let h = 1e-6 * norm(&x).max(1.0);
        let mut err = 0.0;
        for c in 0..basis.ncols() {
            let v: Vec<f64> = basis.column(c).iter().copied().collect();
            let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let fd = ((fns.potential)(cp, &plus)? - (fns.potential)(cp, &minus)?) / (2.0 * h);
            err += (fd - dot(&g, &v)).powi(2);
        }
        let r = err.sqrt() / norm(&g).max(1e-12);
        p.record(r - 1e-5, || format!("relative error {r:e} at x0 = {}", fmt(&x)));
    }
    Ok(p.finish())
}

fn homogeneity(
    cp: &Coupling,
    fns: &KernelFns,
    cfg: &PropertyConfig,
    opts: &ConjugateOptions,
    rng: &mut ChaCha8Rng,
) -> Result<PropertyOutcome> {
    let mut p = Probe::new("homogeneity");
    let gains = GainSet::new(4.0, 13.0, 1.0, 4.0, cfg.beta)?;
    for _ in 0..cfg.samples {
        let s = AbstractState::new(sample(cp, rng), sample(cp, rng));
        let base = StateTerms::new(cp, &s, opts)?;
        let u = (fns.potential)(cp, &s.x0)?;
        let v = base.lyapunov(&s, cfg.beta);
        let gam = dot_diff(&(fns.gradient)(cp, &s.x0)?, &s.x1);
        let sel = (fns.selection)(cp, &s.x0)?;
        let pi = base.pi_with(&s, &gains, &sel);
        for lambda in [0.5, 2.0, 3.0] {
            let d = s.dilate(lambda);
            let terms = StateTerms::new(cp, &d, opts)?;
            let l3 = lambda.powi(3);
            let l2 = lambda * lambda;
            let checks = [
                ("U", rel((fns.potential)(cp, &d.x0)?, l3 * u), 1e-10),
                ("U*", rel(conjugate(cp, &d.x1, opts)?, l3 * conjugate(cp, &s.x1, opts)?), 1e-4),
                ("V", rel(terms.lyapunov(&d, cfg.beta), l3 * v), 1e-4),
                ("Γ", rel(dot_diff(&(fns.gradient)(cp, &d.x0)?, &d.x1), l2 * gam), 1e-8),
                ("Π", (terms.pi_with(&d, &gains, &(fns.selection)(cp, &d.x0)?) - l2 * pi).abs()
                    / (l2 * pi.abs()).max(1e-6), 1e-4),
            ];
            for (what, r, tol) in checks {
                p.record(r - tol, || {
                    format!("{what} off by relative {r:e} at λ = {lambda}, x0 = {}, x1 = {}", fmt(&s.x0), fmt(&s.x1))
                });
            }
        }
    }
    Ok(p.finish())
}

fn dot_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn euler(
    cp: &Coupling,
    fns: &KernelFns,
    cfg: &PropertyConfig,
    opts: &ConjugateOptions,
    rng: &mut ChaCha8Rng,
) -> Result<PropertyOutcome> {
    let mut p = Probe::new("euler");
    for _ in 0..cfg.samples {
        let (x0, x1) = (sample(cp, rng), sample(cp, rng));
        let u = (fns.potential)(cp, &x0)?;
        let lhs = dot(&(fns.gradient)(cp, &x0)?, &x0);
        p.record(u - lhs - 1e-10 * u.max(1.0), || format!("⟨∇U(x0), x0⟩ = {lhs} < U = {u} at {}", fmt(&x0)));
        let us = conjugate(cp, &x1, opts)?;
        let lhs = dot(&conjugate_gradient(cp, &x1, opts)?, &x1);
        p.record(us - lhs - 1e-8 * us.max(1.0), || format!("⟨∇U*(x1), x1⟩ = {lhs} < U* = {us} at {}", fmt(&x1)));
    }
    Ok(p.finish())
}

fn beta_inequality(
    cp: &Coupling,
    fns: &KernelFns,
    cfg: &PropertyConfig,
    opts: &ConjugateOptions,
    rng: &mut ChaCha8Rng,
) -> Result<PropertyOutcome> {
    let mut p = Probe::new("beta");
    for _ in 0..cfg.samples {
        let x0 = sample(cp, rng);
        // Half the samples sit on the gradient graph, where the inequality is tightest.
        let x1 = if rng.random_bool(0.5) { sample(cp, rng) } else { (fns.gradient)(cp, &x0)? };
        let val = (fns.potential)(cp, &x0)? + (1.0 + cfg.beta) * conjugate(cp, &x1, opts)? - 2.0 * dot(&x0, &x1);
        p.record(-val - 1e-8, || format!("value {val:e} at x0 = {}, x1 = {}", fmt(&x0), fmt(&x1)));
    }
    Ok(p.finish())
}

fn cs_inequality(cp: &Coupling, fns: &KernelFns, cfg: &PropertyConfig, rng: &mut ChaCha8Rng) -> Result<PropertyOutcome> {
    let mut p = Probe::new("cs");
    let cs = cp.c_s();
    for _ in 0..cfg.cs_samples {
        let e = sample(cp, rng);
        let lhs = dot(&e, &(fns.selection)(cp, &e)?);
        let rhs = cs * norm(&e);
        p.record(rhs - lhs - 1e-10 * rhs, || format!("⟨e, S(e)⟩ = {lhs} < c_S‖e‖ = {rhs} at {}", fmt(&e)));
    }
    Ok(p.finish())
}

fn coercivity(cp: &Coupling, fns: &KernelFns, cfg: &PropertyConfig, rng: &mut ChaCha8Rng) -> Result<PropertyOutcome> {
    let mut p = Probe::new("coercivity");
    let zero = vec![0.0; cp.dim()];
    let u0 = (fns.potential)(cp, &zero)?;
    p.record(u0.abs(), || format!("U(0) = {u0}"));
    for _ in 0..cfg.samples {
        let e: Vec<f64> = sample(cp, rng).iter().map(|v| v * 1e-6).collect();
        let u = (fns.potential)(cp, &e)?;
        // A zero potential is only allowed at the origin.
        let excess = if u <= 0.0 { norm(&e) - 1e-8 } else { 0.0 };
        p.record(excess, || format!("U = {u} at nonzero {}", fmt(&e)));
    }
    Ok(p.finish())
}

fn orientation(cp: &Coupling, fns: &KernelFns, cfg: &PropertyConfig, rng: &mut ChaCha8Rng) -> Result<PropertyOutcome> {
    let mut p = Probe::new("orientation");
    for _ in 0..cfg.samples.div_ceil(10) {
        let mut d = cp.matrix().clone();
        let flips: Vec<usize> = (0..d.ncols()).filter(|_| rng.random_bool(0.5)).collect();
        for &c in &flips {
            d.column_mut(c).neg_mut();
        }
        let flipped = Coupling::from_matrix(d)?;
        for _ in 0..10 {
            let e = sample(cp, rng);
            let du = rel((fns.potential)(cp, &e)?, (fns.potential)(&flipped, &e)?);
            let g = (fns.gradient)(cp, &e)?;
            let dg = dot_diff(&g, &(fns.gradient)(&flipped, &e)?).sqrt() / norm(&g).max(1e-12);
            let ds = dot_diff(&(fns.selection)(cp, &e)?, &(fns.selection)(&flipped, &e)?).sqrt();
            let worst = du.max(dg).max(ds);
            p.record(worst - 1e-12, || format!("flipping columns {flips:?} changes outputs by {worst:e} at {}", fmt(&e)));
        }
    }
    Ok(p.finish())
}
