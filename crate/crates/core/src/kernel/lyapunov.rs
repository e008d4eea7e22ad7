//! Lyapunov function of the abstract super-twisting system and the `Γ`/`Π`
//! functionals bounding its derivative.

use crate::error::{Error, Result};
use crate::gains::GainSet;

use super::conjugate::{solve_unchecked, ConjugateOptions};
use super::coupling::{dot, norm, Coupling};
use super::potential::{gradient_unchecked, potential_unchecked, selection_unchecked};

/// Smallest `β` for which the Lyapunov candidate is positive definite.
pub const BETA_MIN: f64 = 7.0;

/// Scaled state `(x0, x1) = (e0/L, e1/(k0 L))`, both components in `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractState {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

impl AbstractState {
    pub fn new(x0: Vec<f64>, x1: Vec<f64>) -> Self {
        Self { x0, x1 }
    }

    pub fn zeros(n: usize) -> Self {
        Self { x0: vec![0.0; n], x1: vec![0.0; n] }
    }

    /// Stacked `[x0; x1]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.x0.iter().chain(&self.x1).copied().collect()
    }

    pub fn from_stacked(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self { x0: v[..n].to_vec(), x1: v[n..].to_vec() }
    }

    /// `Δ_λ(x0, x1) = (λ²x0, λx1)`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            x0: self.x0.iter().map(|v| lambda * lambda * v).collect(),
            x1: self.x1.iter().map(|v| lambda * v).collect(),
        }
    }

    /// `‖x‖_r` with `r = [2𝟙ᵀ, 𝟙ᵀ]`.
    pub fn homogeneous_norm(&self) -> f64 {
        self.x0.iter().map(|v| v.abs().sqrt()).sum::<f64>()
            + self.x1.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn check(&self, cp: &Coupling) -> Result<()> {
        cp.check_member(&self.x0)?;
        cp.check_member(&self.x1)
    }
}

/// Everything the derivative bounds need at one state, computed with a single conjugate solve.
#[derive(Debug, Clone)]
pub(crate) struct StateTerms {
    pub grad_u: Vec<f64>,
    pub grad_conj: Vec<f64>,
    pub u: f64,
    pub u_conj: f64,
}

impl StateTerms {
    pub fn new(cp: &Coupling, s: &AbstractState, opts: &ConjugateOptions) -> Result<Self> {
        let sol = solve_unchecked(cp, &s.x1, opts)?;
        Ok(Self {
            grad_u: gradient_unchecked(cp, &s.x0),
            grad_conj: sol.argmax,
            u: potential_unchecked(cp, &s.x0),
            u_conj: sol.value,
        })
    }

    pub fn lyapunov(&self, s: &AbstractState, beta: f64) -> f64 {
        self.u + (1.0 + beta) * self.u_conj - dot(&s.x0, &s.x1)
    }

    pub fn gamma(&self, s: &AbstractState) -> f64 {
        self.grad_u
            .iter()
            .zip(&s.x1)
            .map(|(g, x)| (g - x) * (g - x))
            .sum()
    }

    /// `w = (1+β)∇U*(x1) − x0`.
    pub fn w(&self, s: &AbstractState, beta: f64) -> Vec<f64> {
        self.grad_conj
            .iter()
            .zip(&s.x0)
            .map(|(g, x)| (1.0 + beta) * g - x)
            .collect()
    }

    /// `Π` with the sign selection evaluated at `selection`.
    pub fn pi_with(&self, s: &AbstractState, gains: &GainSet, selection: &[f64]) -> f64 {
        let w = self.w(s, gains.beta);
        let k1t = gains.k1_tilde();
        -k1t * dot(&w, selection) + (k1t / gains.k1) * norm(&w)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= BETA_MIN) {
        return Err(Error::InvalidParameter(format!("beta must be >= {BETA_MIN}, got {beta}")));
    }
    Ok(())
}

/// `V(x0, x1) = U(x0) + (1+β)U*(x1) − ⟨x0, x1⟩`.
pub fn lyapunov(
    cp: &Coupling,
    state: &AbstractState,
    beta: f64,
    opts: &ConjugateOptions,
) -> Result<f64> {
    check_beta(beta)?;
    state.check(cp)?;
    Ok(StateTerms::new(cp, state, opts)?.lyapunov(state, beta))
}

/// `Γ(x) = ‖∇U(x0) − x1‖²`.
pub fn gamma_fn(cp: &Coupling, state: &AbstractState) -> Result<f64> {
    state.check(cp)?;
    let g = gradient_unchecked(cp, &state.x0);
    Ok(g.iter().zip(&state.x1).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// `Π(x) = sup_{d ∈ 𝒟} ⟨w, −k̃1(S(x0) + d/k1)⟩` with `w = (1+β)∇U*(x1) − x0`.
///
/// Since `w ∈ X` and `𝒟` is the unit ball of `X`, the supremum equals
/// `−k̃1⟨w, S(x0)⟩ + (k̃1/k1)‖w‖`.
pub fn pi_fn(
    cp: &Coupling,
    state: &AbstractState,
    gains: &GainSet,
    opts: &ConjugateOptions,
) -> Result<f64> {
    state.check(cp)?;
    let terms = StateTerms::new(cp, state, opts)?;
    let sel = selection_unchecked(cp, &state.x0);
    Ok(terms.pi_with(state, gains, &sel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring5() -> Coupling {
        Coupling::from_graph(&Graph::ring(5).unwrap()).unwrap()
    }

    fn random_state(cp: &Coupling, rng: &mut ChaCha8Rng) -> AbstractState {
        let mut v = || {
            let raw: Vec<f64> = (0..cp.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            cp.project(&raw)
        };
        AbstractState::new(v(), v())
    }

    fn gains() -> GainSet {
        GainSet::new(4.0, 13.0, 1.0, 4.0, 7.0).unwrap()
    }

    #[test]
    fn origin_is_zero() {
        let cp = ring5();
        let o = ConjugateOptions::default();
        let z = AbstractState::zeros(5);
        assert_eq!(lyapunov(&cp, &z, 7.0, &o).unwrap(), 0.0);
        assert_eq!(gamma_fn(&cp, &z).unwrap(), 0.0);
        assert_eq!(pi_fn(&cp, &z, &gains(), &o).unwrap(), 0.0);
    }

    #[test]
    fn beta_below_seven_rejected() {
        let cp = ring5();
        let z = AbstractState::zeros(5);
        assert!(lyapunov(&cp, &z, 6.9, &ConjugateOptions::default()).is_err());
    }

    #[test]
    fn on_gradient_manifold() {
        let cp = ring5();
        let o = ConjugateOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x0 = random_state(&cp, &mut rng).x0;
            let x1 = gradient_unchecked(&cp, &x0);
            let s = AbstractState::new(x0.clone(), x1.clone());
            assert!(gamma_fn(&cp, &s).unwrap() < 1e-24);
            let ustar = crate::kernel::conjugate(&cp, &x1, &o).unwrap();
            let v = lyapunov(&cp, &s, 7.0, &o).unwrap();
            assert_relative_eq!(v, 7.0 * ustar, max_relative = 1e-8);

            let g = gains();
            let pi = pi_fn(&cp, &s, &g, &o).unwrap();
            let bound = -g.beta * g.k1_tilde() * norm(&x0) * (cp.c_s() - 1.0 / g.k1);
            assert!(pi <= bound + 1e-9, "{pi} > {bound}");
            assert!(pi < 0.0);
        }
    }

    #[test]
    fn gamma_at_zero_x0() {
        let cp = ring5();
        let x1 = cp.project(&[0.3, -0.2, 0.5, 0.1, 0.0]);
        let s = AbstractState::new(vec![0.0; 5], x1.clone());
        assert_relative_eq!(gamma_fn(&cp, &s).unwrap(), dot(&x1, &x1), max_relative = 1e-14);
    }

    #[test]
    fn dilation_scaling() {
        let cp = ring5();
        let o = ConjugateOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let s = random_state(&cp, &mut rng);
            let d = s.dilate(3.0);
            let v = lyapunov(&cp, &s, 7.0, &o).unwrap();
            assert_relative_eq!(lyapunov(&cp, &d, 7.0, &o).unwrap(), 27.0 * v, max_relative = 1e-4);
            for lambda in [0.5, 2.0] {
                let d = s.dilate(lambda);
                let l2 = lambda * lambda;
                assert_relative_eq!(
                    gamma_fn(&cp, &d).unwrap(),
                    l2 * gamma_fn(&cp, &s).unwrap(),
                    max_relative = 1e-9
                );
                assert_relative_eq!(
                    pi_fn(&cp, &d, &gains(), &o).unwrap(),
                    l2 * pi_fn(&cp, &s, &gains(), &o).unwrap(),
                    max_relative = 1e-6,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn pi_dominates_sampled_disturbances() {
        use rand_distr::{Distribution, StandardNormal};
        let cp = ring5();
        let o = ConjugateOptions::default();
        let g = gains();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let s = random_state(&cp, &mut rng);
            let closed = pi_fn(&cp, &s, &g, &o).unwrap();
            let terms = StateTerms::new(&cp, &s, &o).unwrap();
            let w = terms.w(&s, g.beta);
            let sel = selection_unchecked(&cp, &s.x0);
            let mut best = f64::NEG_INFINITY;
            for _ in 0..10_000 {
                let raw: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut rng)).collect();
                let d = cp.project(&raw);
                let nd = norm(&d);
                let val: f64 = w
                    .iter()
                    .zip(sel.iter().zip(&d))
                    .map(|(wi, (si, di))| -g.k1_tilde() * wi * (si + di / nd / g.k1))
                    .sum();
                best = best.max(val);
            }
            assert!(best <= closed + 1e-12);
            let gap = (closed - best).abs() / closed.abs().max(1e-12);
            assert!(gap < 0.01, "sampled {best} vs closed {closed}");
        }
    }
}
