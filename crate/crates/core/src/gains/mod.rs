//! Gain bounds and the constants of the Lyapunov analysis.
//!
//! Every supremum or infimum is taken over the homogeneous sphere through
//! [`search::optimize_sphere`] and reported together with the point that
//! achieves it, so any value can be re-evaluated independently.

mod accuracy;
pub mod search;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel::{
    dot, gradient_unchecked, norm, selection_unchecked, AbstractState, Coupling, StateTerms,
    BETA_MIN,
};

pub use accuracy::{accuracy_constants, level_set_extent, AccuracyConstants, LevelSetExtent};
pub use search::{nelder_mead, normalize, optimize_sphere, SearchOptions, Sense, Witness};

/// Protocol gains `(k0, k1, γ, L)` and the Lyapunov weight `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub k0: f64,
    pub k1: f64,
    pub gamma: f64,
    /// Bound on the disturbance norm.
    pub l: f64,
    pub beta: f64,
}

impl GainSet {
    pub fn new(k0: f64, k1: f64, gamma: f64, l: f64, beta: f64) -> Result<Self> {
        let g = Self { k0, k1, gamma, l, beta };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(self.k0 > 0.0) || !self.k0.is_finite() {
            return bad("k0 must be positive, got k0", self.k0);
        }
        if !(self.k1 > 0.0) || !self.k1.is_finite() {
            return bad("k1 must be positive, got k1", self.k1);
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad("gamma must be nonnegative, got gamma", self.gamma);
        }
        if !(self.l >= 0.0) || !self.l.is_finite() {
            return bad("L must be nonnegative, got L", self.l);
        }
        if !(self.beta >= BETA_MIN) || !self.beta.is_finite() {
            return bad("beta must be >= 7, got beta", self.beta);
        }
        Ok(())
    }

    pub fn k0_tilde(&self) -> f64 {
        self.k0
    }

    pub fn k1_tilde(&self) -> f64 {
        self.k1 / self.k0
    }

    /// Checks `k1 > 1/c_S` for the given coupling.
    pub fn check_feasible(&self, cp: &Coupling) -> Result<()> {
        let lower = 1.0 / cp.c_s();
        if !(self.k1 > lower) {
            return Err(Error::InvalidParameter(format!(
                "k1 = {} does not exceed 1/c_S = {lower}",
                self.k1
            )));
        }
        Ok(())
    }
}

/// `1/c_S`, which is `1/√λ_G` for a graph.
pub fn k1_lower_bound(g: &Graph) -> Result<f64> {
    Ok(1.0 / g.algebraic_connectivity()?.sqrt())
}

/// Result of the gain-ratio supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct K0Bound {
    /// Smallest admissible `k0` for the given `k1`.
    pub k0_lower: f64,
    /// `sup (−⟨w, S⟩ + ‖w‖/k1)/Γ`, independent of `k0`.
    pub ratio: f64,
    pub witness: Witness,
    /// Whether `Π < 0` held on every sample near `{Γ = 0}`.
    pub negative_near_manifold: bool,
}

/// The part of `Π` that does not depend on `k0`: `Π = (k1/k0)·pi_scaled`.
fn pi_scaled(cp: &Coupling, s: &AbstractState, terms: &StateTerms, k1: f64, beta: f64) -> f64 {
    let w = terms.w(s, beta);
    let sel = selection_unchecked(cp, &s.x0);
    -dot(&w, &sel) + norm(&w) / k1
}

/// Lower bound on `k0` given `k1`.
///
/// `Π` carries the factor `k̃1 = k1/k0`, so `k0 > sup Π/Γ` is equivalent to
/// `k0² > k1 · sup pi_scaled/Γ`, which is what is solved here.
pub fn k0_lower_bound(cp: &Coupling, k1: f64, beta: f64, opts: &SearchOptions) -> Result<K0Bound> {
    if !(beta >= BETA_MIN) {
        return Err(Error::InvalidParameter(format!("beta must be >= 7, got {beta}")));
    }
    if !(k1 > 1.0 / cp.c_s()) {
        return Err(Error::InvalidParameter(format!(
            "k1 = {k1} does not exceed 1/c_S = {}",
            1.0 / cp.c_s()
        )));
    }
    let objective = |s: &AbstractState| {
        let terms = StateTerms::new(cp, s, &opts.conjugate).ok()?;
        let gamma = terms.gamma(s);
        (gamma >= opts.gamma_floor).then(|| pi_scaled(cp, s, &terms, k1, beta) / gamma)
    };
    let witness = optimize_sphere(cp, objective, Sense::Maximize, opts)?;
    let ratio = witness.value;
    let negative_near_manifold = pi_negative_near_manifold(cp, k1, beta, opts)?;
    Ok(K0Bound {
        k0_lower: (k1 * ratio).max(0.0).sqrt(),
        ratio,
        witness,
        negative_near_manifold,
    })
}

/// Samples points close to `x1 = ∇U(x0)` and checks that `Π` is negative there.
fn pi_negative_near_manifold(cp: &Coupling, k1: f64, beta: f64, opts: &SearchOptions) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let r = cp.rank();
    for _ in 0..256 {
        let z0: Vec<f64> = (0..r).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x0 = cp.embed(&z0);
        let g = gradient_unchecked(cp, &x0);
        let z1: Vec<f64> = (0..r).map(|_| StandardNormal.sample(&mut rng)).collect();
        let noise = cp.embed(&z1);
        let x1: Vec<f64> = g.iter().zip(&noise).map(|(a, b)| a + 1e-4 * norm(&g) * b).collect();
        let Some(s) = normalize(&AbstractState::new(x0, x1)) else { continue };
        let terms = StateTerms::new(cp, &s, &opts.conjugate)?;
        if pi_scaled(cp, &s, &terms, k1, beta) >= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `c = inf_{‖x‖_r = 1} (k̃0 Γ − Π)`; errors unless positive.
pub fn margin_c(cp: &Coupling, gains: &GainSet, opts: &SearchOptions) -> Result<Witness> {
    gains.validate()?;
    let objective = |s: &AbstractState| {
        let terms = StateTerms::new(cp, s, &opts.conjugate).ok()?;
        let sel = selection_unchecked(cp, &s.x0);
        Some(gains.k0_tilde() * terms.gamma(s) - terms.pi_with(s, gains, &sel))
    };
    let w = optimize_sphere(cp, objective, Sense::Minimize, opts)?;
    if !(w.value > 0.0) {
        return Err(Error::NotCertified { margin: w.value, witness: [w.x0, w.x1].concat() });
    }
    Ok(w)
}

/// `v̲ = inf ‖x‖_r² / V(x)^{2/3}`.
pub fn v_lower(cp: &Coupling, beta: f64, opts: &SearchOptions) -> Result<Witness> {
    if !(beta >= BETA_MIN) {
        return Err(Error::InvalidParameter(format!("beta must be >= 7, got {beta}")));
    }
    let objective = |s: &AbstractState| {
        let v = StateTerms::new(cp, s, &opts.conjugate).ok()?.lyapunov(s, beta);
        (v > 0.0).then(|| s.homogeneous_norm().powi(2) / v.powf(2.0 / 3.0))
    };
    optimize_sphere(cp, objective, Sense::Minimize, opts)
}

/// The integrand of `c_ψ` at one state.
pub(crate) fn psi_integrand(cp: &Coupling, s: &AbstractState, grad_u: &[f64], k0: f64) -> f64 {
    let diff: Vec<f64> = grad_u.iter().zip(&s.x1).map(|(a, b)| a - b).collect();
    k0 * (cp.n_edges() as f64).powf(0.25)
        * cp.spectral_norm()
        * norm(&diff)
        * norm(&cp.edge_values(&s.x0)).sqrt()
}

/// `c_ψ = sup k̃0 |E|^{1/4} ‖D‖₂ ‖∇U(x0) − x1‖ √‖Dᵀx0‖ / V^{2/3}`.
pub fn c_psi(cp: &Coupling, gains: &GainSet, opts: &SearchOptions) -> Result<Witness> {
    gains.validate()?;
    let objective = |s: &AbstractState| {
        let terms = StateTerms::new(cp, s, &opts.conjugate).ok()?;
        let v = terms.lyapunov(s, gains.beta);
        (v > 0.0).then(|| psi_integrand(cp, s, &terms.grad_u, gains.k0_tilde()) / v.powf(2.0 / 3.0))
    };
    optimize_sphere(cp, objective, Sense::Maximize, opts)
}

/// Largest admissible relative threshold `σ` for the state-dependent trigger.
///
/// The second term is `(1/2)(1 + (c_ψ/(c v̲))²)⁻¹`, which tends to `1/2` as
/// `c_ψ → 0` and shrinks as the trigger perturbation grows.
pub fn sigma_max(c: f64, v_lower: f64, c_psi: f64) -> Result<f64> {
    if !(c > 0.0) || !(v_lower > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c and v_lower must be positive, got {c} and {v_lower}"
        )));
    }
    if !(c_psi >= 0.0) {
        return Err(Error::InvalidParameter(format!("c_psi must be nonnegative, got {c_psi}")));
    }
    let ratio = c_psi / (c * v_lower);
    Ok(0.25_f64.min(0.5 / (1.0 + ratio * ratio)))
}

/// Settling-time bound from `V̇ ≤ −c v̲ V^{2/3}`: `3 V(0)^{1/3} / (c v̲)`.
pub fn settling_bound(v0: f64, c: f64, v_lower: f64) -> f64 {
    3.0 * v0.max(0.0).cbrt() / (c * v_lower)
}

/// Everything `gains` reports for one coupling and gain set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedConstants {
    pub gains: GainSet,
    pub k1_lower: f64,
    pub k0_lower: f64,
    pub c: f64,
    pub v_lower: f64,
    pub c_psi: f64,
    pub sigma_max: f64,
    pub c0: f64,
    pub c1: f64,
    pub settling_scale: f64,
    pub k0_bound: K0Bound,
    pub c_witness: Witness,
    pub v_lower_witness: Witness,
    pub c_psi_witness: Witness,
    pub accuracy: AccuracyConstants,
}

/// Computes every constant, failing if the gains are infeasible or do not certify.
pub fn certify(cp: &Coupling, gains: &GainSet, opts: &SearchOptions) -> Result<CertifiedConstants> {
    gains.validate()?;
    gains.check_feasible(cp)?;
    let k0_bound = k0_lower_bound(cp, gains.k1, gains.beta, opts)?;
    let c_witness = margin_c(cp, gains, opts)?;
    let v_lower_witness = v_lower(cp, gains.beta, opts)?;
    let c_psi_witness = c_psi(cp, gains, opts)?;
    let (c, vl) = (c_witness.value, v_lower_witness.value);
    let accuracy = accuracy_constants(cp, gains, opts)?;
    Ok(CertifiedConstants {
        gains: *gains,
        k1_lower: 1.0 / cp.c_s(),
        k0_lower: k0_bound.k0_lower,
        c,
        v_lower: vl,
        c_psi: c_psi_witness.value,
        sigma_max: sigma_max(c, vl, c_psi_witness.value)?,
        c0: accuracy.c0,
        c1: accuracy.c1,
        settling_scale: 3.0 / (c * vl),
        k0_bound,
        c_witness,
        v_lower_witness,
        c_psi_witness,
        accuracy,
    })
}

/// Picks `k0` a fixed factor above its lower bound for the given `k1`.
pub fn synthesize_k0(cp: &Coupling, k1: f64, beta: f64, factor: f64, opts: &SearchOptions) -> Result<f64> {
    let b = k0_lower_bound(cp, k1, beta, opts)?;
    // A zero bound still needs a positive gain.
    Ok((factor * b.k0_lower).max(1e-3))
}
