//! The abstract super-twisting kernel: homogeneous potential, conjugate,
//! Lyapunov function and the functionals bounding its derivative.

mod conjugate;
mod coupling;
mod lyapunov;
mod potential;

pub use conjugate::{
    conjugate, conjugate_gradient, residual_tolerance, solve as solve_conjugate, ConjugateOptions,
    ConjugateSolution,
};
pub use coupling::{Coupling, SUBSPACE_TOL};
pub use lyapunov::{gamma_fn, lyapunov, pi_fn, AbstractState, BETA_MIN};
pub use potential::{
    homogeneous_norm, potential, potential_gradient, sign_selection, signed_power, spow,
    HomogeneousWeights,
};

pub(crate) use coupling::{dot, norm};
pub(crate) use lyapunov::StateTerms;
pub(crate) use potential::{gradient_unchecked, selection_unchecked};
