//! Multi-start Nelder–Mead over the homogeneous unit sphere `‖x‖_r = 1`.
//!
//! Every objective optimized here is a ratio of two functions with the same
//! weighted-homogeneity degree, so it is constant along dilation orbits. The
//! search runs in basis coordinates of `X × X`; each trial point is pulled
//! back onto the sphere before evaluation, and a quadratic penalty on its
//! homogeneous norm keeps the simplex from drifting along the orbit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{AbstractState, ConjugateOptions, Coupling};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Local searches started from the best screened candidates.
    pub starts: usize,
    /// Random candidates screened before picking starts.
    pub candidates: usize,
    /// Objective evaluations per local search.
    pub max_evals: usize,
    pub seed: u64,
    /// Lower limit on `Γ` in the gain-ratio supremum.
    pub gamma_floor: f64,
    #[serde(skip, default)]
    pub conjugate: ConjugateOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            candidates: 1024,
            max_evals: 3000,
            seed: 1,
            gamma_floor: 1e-6,
            conjugate: ConjugateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Best point found on the sphere, with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub value: f64,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

impl Witness {
    pub fn state(&self) -> AbstractState {
        AbstractState::new(self.x0.clone(), self.x1.clone())
    }
}

/// Dilates a nonzero state onto `‖x‖_r = 1`.
pub fn normalize(s: &AbstractState) -> Option<AbstractState> {
    let n = s.homogeneous_norm();
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    Some(s.dilate(1.0 / n))
}

pub(crate) fn state_from_coords(cp: &Coupling, z: &[f64]) -> AbstractState {
    let r = cp.rank();
    AbstractState::new(cp.embed(&z[..r]), cp.embed(&z[r..]))
}

/// Plain Nelder–Mead minimization. Returns the best point, value and evaluation count.
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64, usize) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += if p[i].abs() > 1e-8 { step * p[i].abs().max(0.1) } else { step };
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[n]);
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let towards = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = towards(1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = towards(2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = towards(0.5);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = towards(-0.5);
                let fc = f(&c);
                (c, fc)
            };
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let anchor = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = anchor
                        .iter()
                        .zip(&simplex[i])
                        .map(|(a, p)| a + 0.5 * (p - a))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
                evals += n;
            }
        }
    }
    let (i, &v) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("simplex is nonempty");
    (simplex[i].clone(), v, evals)
}

/// Optimizes a dilation-invariant objective over the homogeneous sphere of `X × X`.
///
/// `objective` receives points already normalized onto the sphere and returns
/// `None` where it is undefined (e.g. below the `Γ` floor).
pub fn optimize_sphere<F>(
    cp: &Coupling,
    objective: F,
    sense: Sense,
    opts: &SearchOptions,
) -> Result<Witness>
where
    F: Fn(&AbstractState) -> Option<f64> + Sync,
{
    let dim = 2 * cp.rank();
    let sign = match sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };
    let eval = |z: &[f64]| -> Option<(AbstractState, f64)> {
        let s = normalize(&state_from_coords(cp, z))?;
        let v = objective(&s)?;
        v.is_finite().then_some((s, v))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let candidates: Vec<Vec<f64>> = (0..opts.candidates.max(opts.starts))
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut screened: Vec<(f64, Vec<f64>)> = candidates
        .into_par_iter()
        .filter_map(|z| {
            let s = normalize(&state_from_coords(cp, &z))?;
            let v = objective(&s)?;
            // Restart from coordinates of the normalized point.
            let r = cp.rank();
            let b = cp.basis();
            let coords: Vec<f64> = (0..r)
                .map(|k| (0..cp.dim()).map(|i| b[(i, k)] * s.x0[i]).sum())
                .chain((0..r).map(|k| (0..cp.dim()).map(|i| b[(i, k)] * s.x1[i]).sum()))
                .collect();
            v.is_finite().then_some((sign * v, coords))
        })
        .collect();
    if screened.is_empty() {
        return Err(Error::Optimization("objective undefined at every screened candidate".into()));
    }
    screened.sort_by(|a, b| a.0.total_cmp(&b.0));
    screened.truncate(opts.starts.max(1));

    let penalized = |z: &[f64]| -> f64 {
        let raw = state_from_coords(cp, z);
        let hn = raw.homogeneous_norm();
        match eval(z) {
            Some((_, v)) => sign * v + 10.0 * (hn - 1.0).powi(2),
            None => f64::INFINITY,
        }
    };

    let results: Vec<(f64, Vec<f64>)> = screened
        .par_iter()
        .map(|(_, z0)| {
            let (z, _, _) = nelder_mead(&penalized, z0, 0.1, opts.max_evals / 2, 1e-13);
            // One restart from the local optimum refreshes a collapsed simplex.
            let (z, _, _) = nelder_mead(&penalized, &z, 0.02, opts.max_evals / 2, 1e-14);
            match eval(&z) {
                Some((_, v)) => (sign * v, z),
                None => (f64::INFINITY, z),
            }
        })
        .collect();

    let best = results
        .into_iter()
        .chain(screened)
        .filter(|(v, _)| v.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::Optimization("all local searches failed".into()))?;
    let (s, v) = eval(&best.1)
        .ok_or_else(|| Error::Optimization("best point could not be re-evaluated".into()))?;
    Ok(Witness { value: v, x0: s.x0, x1: s.x1 })
}
