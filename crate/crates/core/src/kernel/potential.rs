//! Homogeneous potential `U`, its gradient and the sign selection `S`.

use crate::error::{Error, Result};

use super::coupling::Coupling;

/// `⌈x⌋^α = |x|^α sign(x)` with `sign(0) = 0` for every `α ≥ 0`.
#[inline]
pub fn spow(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if alpha == 0.0 {
        x.signum()
    } else {
        x.abs().powf(alpha).copysign(x)
    }
}

/// Elementwise [`spow`].
pub fn signed_power(x: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().map(|&v| spow(v, alpha)).collect()
}

/// Weights `r` of the anisotropic dilation `Δ_λ = diag(λ^{r_i})`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousWeights(pub Vec<f64>);

impl HomogeneousWeights {
    /// `r = [2·𝟙ᵀ, 𝟙ᵀ]` over the stacked state `(x0, x1)` of dimension `2n`.
    pub fn stacked(n: usize) -> Self {
        Self(std::iter::repeat_n(2.0, n).chain(std::iter::repeat_n(1.0, n)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Δ_λ x`.
    pub fn dilate(&self, x: &[f64], lambda: f64) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(v, r)| lambda.powf(*r) * v).collect()
    }
}

/// `‖x‖_r = Σ |x_i|^{1/r_i}`.
pub fn homogeneous_norm(x: &[f64], r: &HomogeneousWeights) -> Result<f64> {
    if x.len() != r.len() {
        return Err(Error::Dimension { expected: r.len(), got: x.len() });
    }
    Ok(x.iter().zip(&r.0).map(|(v, w)| v.abs().powf(1.0 / w)).sum())
}

/// `U(x) = (2/3) Σ_ℓ |d_ℓᵀx|^{3/2}`, without the membership check.
pub(crate) fn potential_unchecked(c: &Coupling, x: &[f64]) -> f64 {
    c.edge_values(x)
        .iter()
        .map(|z| z.abs().powf(1.5))
        .sum::<f64>()
        * (2.0 / 3.0)
}

pub(crate) fn gradient_unchecked(c: &Coupling, x: &[f64]) -> Vec<f64> {
    let z = c.edge_values(x);
    c.assemble(&signed_power(&z, 0.5))
}

pub(crate) fn selection_unchecked(c: &Coupling, x: &[f64]) -> Vec<f64> {
    let z = c.edge_values(x);
    c.assemble(&signed_power(&z, 0.0))
}

/// Potential `U(e0)` for `e0 ∈ X`.
pub fn potential(c: &Coupling, e0: &[f64]) -> Result<f64> {
    c.check_member(e0)?;
    Ok(potential_unchecked(c, e0))
}

/// `∇U(e0) = D⌈Dᵀe0⌋^{1/2}`.
pub fn potential_gradient(c: &Coupling, e0: &[f64]) -> Result<Vec<f64>> {
    c.check_member(e0)?;
    Ok(gradient_unchecked(c, e0))
}

/// Single-valued selection `S(e0) = D sign(Dᵀe0)` of the set-valued map, with `sign(0) = 0`.
pub fn sign_selection(c: &Coupling, e0: &[f64]) -> Result<Vec<f64>> {
    c.check_dim(e0)?;
    Ok(selection_unchecked(c, e0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_relative_eq;

    fn ring5() -> Coupling {
        Coupling::from_graph(&Graph::ring(5).unwrap()).unwrap()
    }

    #[test]
    fn signed_power_examples() {
        assert_eq!(signed_power(&[4.0, -4.0], 0.5), vec![2.0, -2.0]);
        assert_eq!(signed_power(&[0.0], 0.0), vec![0.0]);
        let v = signed_power(&[-8.0, 1.0, 0.0], 1.0 / 3.0);
        assert_relative_eq!(v[0], -2.0, epsilon = 1e-14);
        assert_eq!(&v[1..], &[1.0, 0.0]);
        assert_eq!(signed_power(&[-3.0, 2.0], 0.0), vec![-1.0, 1.0]);
    }

    #[test]
    fn homogeneous_norm_examples() {
        let r = HomogeneousWeights::stacked(1);
        assert_eq!(homogeneous_norm(&[0.0, 0.0], &r).unwrap(), 0.0);
        assert_eq!(homogeneous_norm(&[4.0, 3.0], &r).unwrap(), 5.0);
        assert!(homogeneous_norm(&[1.0], &r).is_err());
        let r3 = HomogeneousWeights::stacked(3);
        let x = [0.3, -1.2, 2.0, 0.7, -0.1, 0.05];
        assert_relative_eq!(
            homogeneous_norm(&r3.dilate(&x, 2.0), &r3).unwrap(),
            2.0 * homogeneous_norm(&x, &r3).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn potential_examples() {
        let c = ring5();
        assert_eq!(potential(&c, &[0.0; 5]).unwrap(), 0.0);
        let v = potential(&c, &[1.0, -1.0, 0.0, 0.0, 0.0]).unwrap();
        let expected = (2.0 / 3.0) * (2f64.powf(1.5) + 2.0);
        assert_relative_eq!(v, expected, max_relative = 1e-14);
        assert_relative_eq!(v, 3.21895, epsilon = 1e-5);
        assert!(matches!(potential(&c, &[1.0; 5]), Err(Error::OffSubspace(_))));

        let s = Coupling::scalar();
        assert_relative_eq!(potential(&s, &[1.0]).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn gradient_examples() {
        let s = Coupling::scalar();
        assert_eq!(potential_gradient(&s, &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(potential_gradient(&s, &[-4.0]).unwrap(), vec![-2.0]);
        assert_eq!(potential_gradient(&ring5(), &[0.0; 5]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn selection_examples() {
        let c = ring5();
        assert_eq!(sign_selection(&c, &[0.0; 5]).unwrap(), vec![0.0; 5]);
        assert_eq!(
            sign_selection(&c, &[1.0, -1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![2.0, -2.0, 1.0, 0.0, -1.0]
        );
    }
}
