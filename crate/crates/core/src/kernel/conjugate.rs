//! Convex conjugate `U*(y) = sup_{x ∈ X} ⟨x, y⟩ − U(x)` and its gradient.
//!
//! The supremum is not computed by ascending the primal objective, whose
//! gradient `y − ∇U(x)` is only Hölder continuous at the edge kinks. Since
//! `U = f ∘ Dᵀ` with `f(z) = (2/3) Σ |z_ℓ|^{3/2}` and `f*(μ) = (1/3) Σ |μ_ℓ|³`,
//! for `y ∈ range(D)`
//!
//! ```text
//! U*(y) = min { (1/3) Σ |μ_ℓ|³ : Dμ = y },
//! ```
//!
//! a smooth convex problem over the affine set `D⁺y + ker D`, solved by damped
//! Newton in cycle-space coordinates. The maximizer is recovered from the
//! optimality condition `Dᵀx = ⌈μ⌋²`, i.e. `x = (D⁺)ᵀ⌈μ⌋²`, and checked
//! against `∇U(x) = y`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::coupling::{norm, Coupling};
use super::potential::{gradient_unchecked, spow};

/// Inputs smaller than this are mapped to the origin directly.
pub const ZERO_INPUT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateOptions {
    /// Stationarity tolerance on the cycle-space gradient, relative to `max(1, ‖y‖²)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 200 }
    }
}

/// Solution of the conjugate problem at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateSolution {
    /// `U*(y)`.
    pub value: f64,
    /// `∇U*(y)`, the maximizing `x ∈ X`.
    pub argmax: Vec<f64>,
    /// Optimal edge flow `μ` with `Dμ = y`.
    pub flow: Vec<f64>,
    pub stationarity: f64,
    pub iterations: usize,
}

fn dual_objective(mu: &[f64]) -> f64 {
    mu.iter().map(|m| m.abs().powi(3)).sum::<f64>() / 3.0
}

fn flow_at(base: &[f64], z: &DMatrix<f64>, c: &DVector<f64>) -> Vec<f64> {
    let shift = z * c;
    base.iter().zip(shift.iter()).map(|(b, s)| b + s).collect()
}

/// Solves the conjugate problem at `y`, which must lie in `X`.
pub fn solve(cp: &Coupling, y: &[f64], opts: &ConjugateOptions) -> Result<ConjugateSolution> {
    cp.check_member(y)?;
    solve_unchecked(cp, y, opts)
}

pub(crate) fn solve_unchecked(
    cp: &Coupling,
    y: &[f64],
    opts: &ConjugateOptions,
) -> Result<ConjugateSolution> {
    let m = cp.n_edges();
    let ny = norm(y);
    if ny < ZERO_INPUT {
        return Ok(ConjugateSolution {
            value: 0.0,
            argmax: vec![0.0; cp.dim()],
            flow: vec![0.0; m],
            stationarity: 0.0,
            iterations: 0,
        });
    }
    let base: Vec<f64> = (cp.pinv() * DVector::from_column_slice(y)).as_slice().to_vec();
    let z = cp.cycles();
    let k = z.ncols();
    let scale = ny.max(1.0).powi(2);

    let mut c = DVector::zeros(k);
    let mut mu = base.clone();
    let mut stationarity = 0.0;
    let mut iterations = 0;
    if k > 0 {
        let mut value = dual_objective(&mu);
        loop {
            let sq = DVector::from_iterator(m, mu.iter().map(|&v| spow(v, 2.0)));
            let grad = z.transpose() * &sq;
            stationarity = grad.norm();
            if stationarity <= opts.tol * scale {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::ConjugateNotConverged {
                    best_value: value,
                    gradient_norm: stationarity,
                });
            }
            iterations += 1;

            let weights = DVector::from_iterator(m, mu.iter().map(|v| 2.0 * v.abs()));
            let mut hess = z.transpose() * DMatrix::from_diagonal(&weights) * z;
            let ridge = 1e-14 * hess.trace().max(scale.sqrt());
            for i in 0..k {
                hess[(i, i)] += ridge;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => -&grad,
            };

            let slope = grad.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial_c = &c + &step * t;
                let trial = flow_at(&base, z, &trial_c);
                let trial_value = dual_objective(&trial);
                // Near the optimum the decrease drops below roundoff in the value,
                // so progress is judged by the gradient instead.
                let flat = (trial_value - value).abs() <= 1e-13 * value.max(1.0);
                let progress = if flat {
                    let tsq = DVector::from_iterator(m, trial.iter().map(|&v| spow(v, 2.0)));
                    (z.transpose() * tsq).norm() < 0.9 * stationarity
                } else {
                    trial_value <= value + 1e-4 * t * slope
                };
                if progress {
                    c = trial_c;
                    mu = trial;
                    value = trial_value;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // No representable decrease left; accept if essentially stationary.
                if stationarity <= opts.tol.sqrt() * scale {
                    break;
                }
                return Err(Error::ConjugateNotConverged {
                    best_value: value,
                    gradient_norm: stationarity,
                });
            }
        }
    }

    let sq = DVector::from_iterator(m, mu.iter().map(|&v| spow(v, 2.0)));
    let argmax = (cp.pinv().transpose() * sq).as_slice().to_vec();
    Ok(ConjugateSolution {
        value: dual_objective(&mu),
        argmax,
        flow: mu,
        stationarity,
        iterations,
    })
}

/// `U*(x1)` for `x1 ∈ X`.
pub fn conjugate(cp: &Coupling, x1: &[f64], opts: &ConjugateOptions) -> Result<f64> {
    Ok(solve(cp, x1, opts)?.value)
}

/// Residual tolerance implied by the stationarity tolerance.
///
/// A stationarity error `ε` moves `Dᵀx` by at most `ε`, which the square root in
/// `∇U` turns into at most `√ε` per edge.
pub fn residual_tolerance(cp: &Coupling, y: &[f64], opts: &ConjugateOptions) -> f64 {
    let scale = norm(y).max(1.0);
    4.0 * cp.spectral_norm() * (cp.n_edges() as f64).sqrt() * opts.tol.sqrt() * scale
}

/// `∇U*(x1)`: the `x0 ∈ X` with `∇U(x0) = x1`.
pub fn conjugate_gradient(cp: &Coupling, x1: &[f64], opts: &ConjugateOptions) -> Result<Vec<f64>> {
    let sol = solve(cp, x1, opts)?;
    let back = gradient_unchecked(cp, &sol.argmax);
    let residual = norm(
        &back
            .iter()
            .zip(x1)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let tol = residual_tolerance(cp, x1, opts);
    if residual > tol {
        return Err(Error::ConjugateResidual { residual, tol });
    }
    Ok(sol.argmax)
}
