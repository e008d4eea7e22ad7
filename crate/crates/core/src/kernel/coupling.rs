use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{Graph, ZERO_EIGEN_RTOL};

/// Tolerance for membership in the state space `X = range(D)`.
pub const SUBSPACE_TOL: f64 = 1e-8;

/// The linear structure behind the abstract super-twisting instance.
///
/// Everything is expressed through a coupling matrix `D` (`n × m`): the
/// potential is `U(x) = (2/3) Σ_ℓ |d_ℓᵀ x|^{3/2}`, the discontinuous term is
/// `S(x) = D sign(Dᵀx)` and the state space is `X = range(D)`. For a graph
/// `D` is the oriented incidence matrix and `X` the zero-mean vectors; the
/// scalar super-twisting prototype is `D = [1]`, `X = ℝ`.
#[derive(Debug, Clone)]
pub struct Coupling {
    d: DMatrix<f64>,
    d_pinv: DMatrix<f64>,
    /// Orthonormal basis of `X`, `n × r`.
    basis: DMatrix<f64>,
    /// Orthonormal basis of `ker D`, `m × (m − r)`.
    cycles: DMatrix<f64>,
    c_s: f64,
    d_norm: f64,
}

impl Coupling {
    /// Builds the structure from an arbitrary coupling matrix.
    ///
    /// No incidence-specific checks are made, which lets tests inject
    /// deliberately wrong matrices.
    pub fn from_matrix(d: DMatrix<f64>) -> Result<Self> {
        let (n, m) = d.shape();
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter("coupling matrix must be non-empty".into()));
        }
        let ddt = &d * d.transpose();
        let eig = SymmetricEigen::new(ddt);
        let largest = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if largest <= 0.0 {
            return Err(Error::InvalidParameter("coupling matrix is zero".into()));
        }
        let cut = ZERO_EIGEN_RTOL * largest;
        let mut range_cols = Vec::new();
        let mut smallest = f64::INFINITY;
        let mut pinv_ddt = DMatrix::zeros(n, n);
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > cut {
                let v = eig.eigenvectors.column(k).into_owned();
                pinv_ddt += &v * v.transpose() / lambda;
                range_cols.push(v);
                smallest = smallest.min(lambda);
            }
        }
        let basis = DMatrix::from_columns(&range_cols);
        let d_pinv = d.transpose() * pinv_ddt;

        let dtd = d.transpose() * &d;
        let eig_e = SymmetricEigen::new(dtd);
        let null_cols: Vec<DVector<f64>> = eig_e
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l <= cut)
            .map(|(k, _)| eig_e.eigenvectors.column(k).into_owned())
            .collect();
        let cycles = if null_cols.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };

        Ok(Self {
            d,
            d_pinv,
            basis,
            cycles,
            c_s: smallest.sqrt(),
            d_norm: largest.sqrt(),
        })
    }

    /// Incidence coupling of a connected graph.
    pub fn from_graph(g: &Graph) -> Result<Self> {
        g.algebraic_connectivity()?;
        Self::from_matrix(g.incidence())
    }

    /// Classical scalar super-twisting: `D = [1]`, `X = ℝ`, `c_S = 1`.
    pub fn scalar() -> Self {
        Self::from_matrix(DMatrix::from_element(1, 1, 1.0)).expect("unit coupling is valid")
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn n_edges(&self) -> usize {
        self.d.ncols()
    }

    /// Dimension of `X`.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub(crate) fn cycles(&self) -> &DMatrix<f64> {
        &self.cycles
    }

    pub(crate) fn pinv(&self) -> &DMatrix<f64> {
        &self.d_pinv
    }

    /// Coercivity constant of `S`: `√λ_min⁺(DDᵀ)`, i.e. `√λ_G` for a graph.
    pub fn c_s(&self) -> f64 {
        self.c_s
    }

    /// Spectral norm `‖D‖₂`.
    pub fn spectral_norm(&self) -> f64 {
        self.d_norm
    }

    /// `Dᵀx`, one entry per edge.
    pub fn edge_values(&self, x: &[f64]) -> Vec<f64> {
        let (n, m) = self.d.shape();
        debug_assert_eq!(x.len(), n);
        (0..m)
            .map(|l| (0..n).map(|i| self.d[(i, l)] * x[i]).sum())
            .collect()
    }

    /// `D z` for an edge vector `z`.
    pub fn assemble(&self, z: &[f64]) -> Vec<f64> {
        let (n, m) = self.d.shape();
        debug_assert_eq!(z.len(), m);
        (0..n)
            .map(|i| (0..m).map(|l| self.d[(i, l)] * z[l]).sum())
            .collect()
    }

    /// Orthogonal projection onto `X`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        let coords = self.basis.transpose() * v;
        (&self.basis * coords).as_slice().to_vec()
    }

    /// Maps coordinates in the orthonormal basis of `X` to a vector in `X`.
    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        (&self.basis * DVector::from_column_slice(coords)).as_slice().to_vec()
    }

    pub fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    /// Rejects vectors with a component outside `X` larger than [`SUBSPACE_TOL`].
    pub fn check_member(&self, v: &[f64]) -> Result<()> {
        self.check_dim(v)?;
        let p = self.project(v);
        let off = v
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = norm(v).max(1.0);
        if off > SUBSPACE_TOL * scale {
            return Err(Error::OffSubspace(off));
        }
        Ok(())
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
