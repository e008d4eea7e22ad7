//! Accuracy constants for the triggered protocol.
//!
//! Stored communication values perturb each edge difference by at most `2δ`.
//! The perturbed system is homogeneous when the perturbation carries weight 2,
//! so it suffices to find the smallest level `θ` of `V` for a unit-scale box
//! `ε ∈ [−2, 2]^{|E|}`; the extents for any other `δ` follow by dilation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{dot, gradient_unchecked, norm, AbstractState, Coupling, StateTerms};

use super::search::{optimize_sphere, SearchOptions, Sense, Witness};
use super::GainSet;

const BRACKET: (f64, f64) = (1e-4, 1e4);
const BISECTIONS: usize = 40;
const BOUNDARY_SAMPLES: usize = 256;
const MAX_CORNERS: usize = 64;

/// Extents of the unit level set `{V ≤ 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetExtent {
    /// `sup ‖x0‖ / V^{2/3}`.
    pub x0: Witness,
    /// `sup ‖x1‖ / V^{1/3}`.
    pub x1: Witness,
}

impl LevelSetExtent {
    /// `(sup ‖x0‖, sup ‖x1‖)` over `{V ≤ θ}`.
    pub fn at(&self, theta: f64) -> (f64, f64) {
        let t = theta.max(0.0);
        (t.powf(2.0 / 3.0) * self.x0.value, t.cbrt() * self.x1.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyConstants {
    /// Smallest level whose boundary is strictly decreasing under the unit perturbation.
    pub theta: f64,
    /// Half-width of the perturbation box per edge, in scaled units.
    pub perturbation: f64,
    pub extent: LevelSetExtent,
    /// `‖e0‖ ≤ c0·δ` in the steady state.
    pub c0: f64,
    /// `‖e1‖ ≤ c1·√δ` in the steady state.
    pub c1: f64,
}

pub fn level_set_extent(cp: &Coupling, beta: f64, opts: &SearchOptions) -> Result<LevelSetExtent> {
    let ratio = |s: &AbstractState, num: f64, power: f64| {
        let v = StateTerms::new(cp, s, &opts.conjugate).ok()?.lyapunov(s, beta);
        (v > 0.0).then(|| num / v.powf(power))
    };
    let x0 = optimize_sphere(cp, |s| ratio(s, norm(&s.x0), 2.0 / 3.0), Sense::Maximize, opts)?;
    let x1 = optimize_sphere(cp, |s| ratio(s, norm(&s.x1), 1.0 / 3.0), Sense::Maximize, opts)?;
    Ok(LevelSetExtent { x0, x1 })
}

/// A point on `{V = 1}` with the terms that scale cleanly under dilation.
struct Direction {
    state: AbstractState,
    grad_conj: Vec<f64>,
}

fn boundary_directions(cp: &Coupling, beta: f64, opts: &SearchOptions) -> Result<Vec<Direction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xacc);
    let r = cp.rank();
    let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        cp.embed(&(0..r).map(|_| StandardNormal.sample(rng)).collect::<Vec<_>>())
    };
    let mut out = Vec::with_capacity(BOUNDARY_SAMPLES);
    let mut attempts = 0;
    while out.len() < BOUNDARY_SAMPLES && attempts < 10 * BOUNDARY_SAMPLES {
        attempts += 1;
        // Uniform directions rarely land near the sliding manifold `x1 = ∇U(x0)`
        // or the axis `x0 = 0`, where the perturbation matters most.
        let x0 = gauss(&mut rng);
        let x1 = match out.len() % 3 {
            0 => gauss(&mut rng),
            1 => {
                let g = gradient_unchecked(cp, &x0);
                let n = gauss(&mut rng);
                let scale = rng.random_range(0.0..0.3) * norm(&g);
                g.iter().zip(&n).map(|(a, b)| a + scale * b).collect()
            }
            _ => {
                let x1 = gauss(&mut rng);
                let shrink = rng.random_range(0.0..0.1) * norm(&x1).powi(2);
                let x0: Vec<f64> = x0.iter().map(|v| v * shrink).collect();
                let s = AbstractState::new(x0, x1);
                if let Some(d) = to_unit_level(cp, &s, beta, opts)? {
                    out.push(d);
                }
                continue;
            }
        };
        if let Some(d) = to_unit_level(cp, &AbstractState::new(x0, x1), beta, opts)? {
            out.push(d);
        }
    }
    if out.is_empty() {
        return Err(Error::Bisection("no boundary directions could be sampled".into()));
    }
    Ok(out)
}

fn to_unit_level(cp: &Coupling, s: &AbstractState, beta: f64, opts: &SearchOptions) -> Result<Option<Direction>> {
    let v = StateTerms::new(cp, s, &opts.conjugate)?.lyapunov(s, beta);
    if !(v > 0.0) || !v.is_finite() {
        return Ok(None);
    }
    let state = s.dilate(v.powf(-1.0 / 3.0));
    let terms = StateTerms::new(cp, &state, &opts.conjugate)?;
    Ok(Some(Direction { state, grad_conj: terms.grad_conj }))
}

fn corners(m: usize, half_width: f64, seed: u64) -> Vec<Vec<f64>> {
    if m <= 6 {
        return (0..1usize << m)
            .map(|bits| {
                (0..m)
                    .map(|l| if bits >> l & 1 == 1 { half_width } else { -half_width })
                    .collect()
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..MAX_CORNERS)
        .map(|_| {
            (0..m)
                .map(|_| if rng.random::<bool>() { half_width } else { -half_width })
                .collect()
        })
        .collect()
}

/// Worst-case `V̇` over disturbances, with edge differences perturbed by `eps`.
///
/// The damping terms in `γ` are left out, which keeps the expression
/// homogeneous and only removes dissipation.
fn perturbed_vdot(
    cp: &Coupling,
    s: &AbstractState,
    grad_u: &[f64],
    w: &[f64],
    gains: &GainSet,
    eps: &[f64],
) -> f64 {
    let z: Vec<f64> = cp.edge_values(&s.x0).iter().zip(eps).map(|(a, b)| a + b).collect();
    let g_eps = cp.assemble(&z.iter().map(|&v| crate::kernel::spow(v, 0.5)).collect::<Vec<_>>());
    let s_eps = cp.assemble(&z.iter().map(|&v| crate::kernel::spow(v, 0.0)).collect::<Vec<_>>());
    let a: Vec<f64> = grad_u.iter().zip(&s.x1).map(|(g, x)| g - x).collect();
    let x0_dot: Vec<f64> = g_eps.iter().zip(&s.x1).map(|(g, x)| -gains.k0 * (g - x)).collect();
    let k1t = gains.k1_tilde();
    dot(&a, &x0_dot) - k1t * dot(w, &s_eps) + (k1t / gains.k1) * norm(w)
}

fn boundary_decreasing(
    cp: &Coupling,
    dirs: &[Direction],
    eps_set: &[Vec<f64>],
    gains: &GainSet,
    theta: f64,
) -> bool {
    let lambda = theta.cbrt();
    dirs.iter().all(|d| {
        let s = d.state.dilate(lambda);
        let grad_u = gradient_unchecked(cp, &s.x0);
        // ∇U* has degree 2 under the dilation.
        let w: Vec<f64> = d
            .grad_conj
            .iter()
            .zip(&s.x0)
            .map(|(g, x)| (1.0 + gains.beta) * lambda * lambda * g - x)
            .collect();
        eps_set.iter().all(|e| perturbed_vdot(cp, &s, &grad_u, &w, gains, e) < 0.0)
    })
}

/// Level `θ` and the steady-state constants `c0`, `c1`.
///
/// `c0` and `c1` are expressed for the consensus errors `e0 = L x0` and
/// `e1 = k0 L x1` under per-edge stored-value errors of at most `2δ`.
pub fn accuracy_constants(cp: &Coupling, gains: &GainSet, opts: &SearchOptions) -> Result<AccuracyConstants> {
    accuracy_with_perturbation(cp, gains, 2.0, opts)
}

pub(crate) fn accuracy_with_perturbation(
    cp: &Coupling,
    gains: &GainSet,
    half_width: f64,
    opts: &SearchOptions,
) -> Result<AccuracyConstants> {
    gains.validate()?;
    let extent = level_set_extent(cp, gains.beta, opts)?;
    let theta = if half_width == 0.0 {
        0.0
    } else {
        let dirs = boundary_directions(cp, gains.beta, opts)?;
        let eps_set = corners(cp.n_edges(), half_width, opts.seed);
        let ok = |t: f64| boundary_decreasing(cp, &dirs, &eps_set, gains, t);
        let (mut lo, mut hi) = BRACKET;
        if !ok(hi) {
            return Err(Error::Bisection(format!("boundary not decreasing at theta = {hi}")));
        }
        if ok(lo) {
            lo
        } else {
            for _ in 0..BISECTIONS {
                let mid = (lo * hi).sqrt();
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    };
    // The box half-width 2 corresponds to δ/L = 1, so x0 scales with δ/L and x1 with √(δ/L).
    let (a0, a1) = extent.at(theta);
    Ok(AccuracyConstants {
        theta,
        perturbation: half_width,
        c0: a0,
        c1: gains.k0 * gains.l.sqrt() * a1,
        extent,
    })
}
