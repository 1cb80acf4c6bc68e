use super::{build_correlation, GridGeometry};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Symmetric eigendecomposition Σ(θ) = Q·diag(e)·Qᵀ of the correlation
/// matrix for one range parameter.
///
/// One factorization per θ serves every λ: with Σ + λI = Q·diag(e+λ)·Qᵀ,
/// each λ-sweep costs O(n²) instead of a fresh O(n³) factorization.
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct SpectralFactor {
    theta: f64,
    geometry: GridGeometry,
    /// Eigenvalues sorted non-increasing, all positive.
    eigenvalues: Vec<f64>,
    /// Orthogonal eigenvector basis, columns matching `eigenvalues`.
    q: DMatrix<f64>,
}

impl SpectralFactor {
    /// Factorize Σ(θ) for a geometry.
    pub fn new(geom: &GridGeometry, theta: f64) -> Result<Self> {
        let sigma = build_correlation(geom, theta)?;
        let n = geom.n();
        let se = sigma.symmetric_eigen();

        // sort eigenpairs by descending eigenvalue
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut q = DMatrix::<f64>::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            q.set_column(dst, &se.eigenvectors.column(src));
        }

        let min = eigenvalues[n - 1];
        if !(min > 0.0) {
            return Err(Error::numerical(format!(
                "correlation matrix for theta = {theta} is not positive definite \
                 (smallest eigenvalue {min:e})"
            )));
        }
        Ok(Self {
            theta,
            geometry: *geom,
            eigenvalues,
            q,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Coefficients Qᵀy of a field in the eigenbasis.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(y.len(), n);
        let v = nalgebra::DVectorView::from_slice(y, n);
        (self.q.transpose() * v).as_slice().to_vec()
    }

    /// QᵀY for an n×R column block of replicates (one gemm).
    pub fn project_columns(&self, cols: &DMatrix<f64>) -> DMatrix<f64> {
        self.q.tr_mul(cols)
    }

    /// Σ log(eᵢ + λ), the log-determinant of Σ(θ) + λI.
    pub fn logdet_shifted(&self, lambda: f64) -> f64 {
        self.eigenvalues.iter().map(|e| (e + lambda).ln()).sum()
    }

    /// Max-abs reconstruction error ‖QEQᵀ − Σ(θ)‖, for validation.
    pub fn reconstruction_error(&self) -> f64 {
        let sigma = build_correlation(&self.geometry, self.theta).expect("valid theta");
        let mut scaled = self.q.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(e);
        }
        let recon = &scaled * self.q.transpose();
        (recon - sigma).amax()
    }
}
