//! Exact Gaussian-process numerics on regular grids: Matérn (ν = 1)
//! correlation, covariance assembly, spectral factorization, simulation,
//! log-likelihoods with profiled variance, and effective degrees of
//! freedom.

mod factor;
mod likelihood;
mod simulate;

pub use factor::SpectralFactor;
pub use likelihood::{
    concentrated_loglik, concentrated_loglik_with, edf, edf_via_cholesky, edf_with,
    lambda_for_edf, lambda_for_edf_with, loglik, loglik_with, profile_sigma2,
    profile_sigma2_with, EDF_TOL_FACTOR,
};
pub use simulate::simulate;

use crate::bessel::k1;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Floor used wherever log λ is required; raw λ (including exact 0) is
/// preserved everywhere else.
pub const LAMBDA_LOG_FLOOR: f64 = 1e-12;

/// λ clamped for use in log-λ space.
pub fn floored_lambda(lambda: f64) -> f64 {
    lambda.max(LAMBDA_LOG_FLOOR)
}

/// A regular H×W grid of sites with fixed row-major ordering.
///
/// Site `i` sits at `(col·spacing, row·spacing)` with `row = i / width`,
/// `col = i % width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    height: usize,
    width: usize,
    spacing: f64,
}

impl GridGeometry {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        Self::with_spacing(height, width, 1.0)
    }

    pub fn with_spacing(height: usize, width: usize, spacing: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::domain("grid dimensions must be positive"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::domain(format!("invalid grid spacing {spacing}")));
        }
        Ok(Self {
            height,
            width,
            spacing,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of sites n = height·width.
    pub fn n(&self) -> usize {
        self.height * self.width
    }

    /// Integer squared lag dx² + dy² between two sites; collision-free
    /// grouping key for exact-distance binning.
    pub fn squared_lag(&self, i: usize, j: usize) -> u64 {
        let (ri, ci) = (i / self.width, i % self.width);
        let (rj, cj) = (j / self.width, j % self.width);
        let dy = ri.abs_diff(rj) as u64;
        let dx = ci.abs_diff(cj) as u64;
        dx * dx + dy * dy
    }

    /// Euclidean distance between sites i and j.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.spacing * (self.squared_lag(i, j) as f64).sqrt()
    }

    /// Largest squared lag realized on this grid.
    pub fn max_squared_lag(&self) -> u64 {
        let dy = (self.height - 1) as u64;
        let dx = (self.width - 1) as u64;
        dx * dx + dy * dy
    }
}

/// Covariance parameters (θ, λ, σ²); τ² = λ·σ² is always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovParams {
    theta: f64,
    lambda: f64,
    sigma2: f64,
}

impl CovParams {
    /// Parameters with σ² = 1, the scale used for grids and training.
    pub fn new(theta: f64, lambda: f64) -> Result<Self> {
        Self::with_sigma2(theta, lambda, 1.0)
    }

    pub fn with_sigma2(theta: f64, lambda: f64, sigma2: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::domain(format!("range theta must be positive, got {theta}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!(
                "noise-to-signal lambda must be non-negative, got {lambda}"
            )));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self {
            theta,
            lambda,
            sigma2,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Nugget variance τ² = λ·σ².
    pub fn tau2(&self) -> f64 {
        self.lambda * self.sigma2
    }
}

/// One or more real-valued fields sharing a grid geometry. Values are
/// stored replicate-major, row-major within a replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStack {
    geometry: GridGeometry,
    replicates: usize,
    values: Vec<f64>,
}

impl FieldStack {
    pub fn new(geometry: GridGeometry, replicates: usize, values: Vec<f64>) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::input("a field stack needs at least one replicate"));
        }
        if values.len() != replicates * geometry.n() {
            return Err(Error::input(format!(
                "value buffer has {} entries, expected {} ({} replicates x {} sites)",
                values.len(),
                replicates * geometry.n(),
                replicates,
                geometry.n()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("field stack contains non-finite values"));
        }
        Ok(Self {
            geometry,
            replicates,
            values,
        })
    }

    /// A single-replicate stack.
    pub fn single(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        Self::new(geometry, 1, values)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row-major values of replicate `r`.
    pub fn replicate(&self, r: usize) -> &[f64] {
        let n = self.geometry.n();
        &self.values[r * n..(r + 1) * n]
    }

    /// Stack holding only replicate `r`.
    pub fn replicate_stack(&self, r: usize) -> FieldStack {
        FieldStack {
            geometry: self.geometry,
            replicates: 1,
            values: self.replicate(r).to_vec(),
        }
    }

    /// True when every value of every replicate is identical, in which
    /// case likelihood fits are degenerate.
    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }
}

/// Matérn correlation with smoothness ν = 1 in the classical
/// geostatistics convention:
///
///   C(d) = (d/θ)·K₁(d/θ),   C(0) = 1.
///
/// Strictly decreasing in d and continuous at the origin.
pub fn matern_nu1(d: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::domain(format!("range theta must be positive, got {theta}")));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::domain(format!("distance must be non-negative, got {d}")));
    }
    Ok(matern_nu1_unchecked(d, theta))
}

pub(crate) fn matern_nu1_unchecked(d: f64, theta: f64) -> f64 {
    if d == 0.0 {
        return 1.0;
    }
    let x = d / theta;
    x * k1(x)
}

/// Correlation values for every distinct squared lag of a geometry,
/// indexable by `squared_lag`. Entry 0 is 1 (zero distance).
pub(crate) fn correlation_lookup(geom: &GridGeometry, theta: f64) -> Vec<f64> {
    let max_sq = geom.max_squared_lag() as usize;
    let mut lut = vec![0.0; max_sq + 1];
    lut[0] = 1.0;
    for (sq, v) in lut.iter_mut().enumerate().skip(1) {
        let d = geom.spacing * (sq as f64).sqrt();
        *v = matern_nu1_unchecked(d, theta);
    }
    lut
}

/// Keep dense covariance matrices below ~2 GiB.
const MAX_DENSE_SITES: usize = 16_384;

/// Dense covariance matrix σ²Σ(θ) + τ²I for a grid geometry.
///
/// Entry (i, j) is `sigma2·matern_nu1(‖s_i − s_j‖, theta)` plus `tau2`
/// on the diagonal; exactly symmetric by construction.
pub fn build_cov(geom: &GridGeometry, p: &CovParams) -> Result<DMatrix<f64>> {
    let n = geom.n();
    if n > MAX_DENSE_SITES {
        return Err(Error::Resource(format!(
            "dense covariance for {n} sites exceeds the {MAX_DENSE_SITES}-site guard"
        )));
    }
    let lut = correlation_lookup(geom, p.theta());
    let sigma2 = p.sigma2();
    let tau2 = p.tau2();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = sigma2 + tau2;
        for j in 0..i {
            let v = sigma2 * lut[geom.squared_lag(i, j) as usize];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Correlation-only matrix Σ(θ) (σ² = 1, no nugget), the object that is
/// spectrally factorized.
pub(crate) fn build_correlation(geom: &GridGeometry, theta: f64) -> Result<DMatrix<f64>> {
    let p = CovParams::new(theta, 0.0)?;
    build_cov(geom, &p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_at_zero_is_one() {
        assert_eq!(matern_nu1(0.0, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn matern_reference_value() {
        // (1, 1) -> 1·K₁(1), K₁(1) from the quadrature oracle.
        let v = matern_nu1(1.0, 1.0).unwrap();
        assert!((v - 0.601_907_230_197_234_57).abs() < 1e-13, "got {v}");
    }

    #[test]
    fn matern_tail_is_tiny() {
        assert!(matern_nu1(50.0, 1.0).unwrap() < 1e-18);
    }

    #[test]
    fn matern_continuous_at_origin() {
        let v = matern_nu1(1e-8, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matern_strictly_decreasing() {
        let theta = 7.0;
        let mut prev = matern_nu1(0.0, theta).unwrap();
        for k in 1..200 {
            let d = k as f64 * 0.25;
            let v = matern_nu1(d, theta).unwrap();
            assert!(v < prev, "not decreasing at d = {d}");
            prev = v;
        }
    }

    #[test]
    fn matern_rejects_bad_theta() {
        assert!(matern_nu1(1.0, 0.0).is_err());
        assert!(matern_nu1(1.0, -2.0).is_err());
        assert!(matern_nu1(1.0, f64::NAN).is_err());
    }

    #[test]
    fn cov_single_site() {
        let geom = GridGeometry::new(1, 1).unwrap();
        let p = CovParams::with_sigma2(3.0, 0.5, 2.0).unwrap();
        let m = build_cov(&geom, &p).unwrap();
        assert_eq!(m.nrows(), 1);
        assert_eq!(m[(0, 0)], 3.0); // sigma2 + tau2 = 2 + 1
    }

    #[test]
    fn cov_two_sites_off_diagonal() {
        let geom = GridGeometry::new(2, 1).unwrap();
        let p = CovParams::new(1.0, 0.0).unwrap();
        let m = build_cov(&geom, &p).unwrap();
        assert!((m[(0, 1)] - 0.601_907_230_197_234_57).abs() < 1e-13);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
    }

    #[test]
    fn cov_diagonal_without_nugget() {
        let geom = GridGeometry::new(3, 4).unwrap();
        let p = CovParams::with_sigma2(5.0, 0.0, 1.7).unwrap();
        let m = build_cov(&geom, &p).unwrap();
        for i in 0..geom.n() {
            assert_eq!(m[(i, i)], 1.7);
        }
    }

    #[test]
    fn cov_is_bitwise_symmetric() {
        let geom = GridGeometry::new(5, 7).unwrap();
        let p = CovParams::new(4.0, 0.3).unwrap();
        let m = build_cov(&geom, &p).unwrap();
        for i in 0..geom.n() {
            for j in 0..i {
                assert_eq!(m[(i, j)].to_bits(), m[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn field_stack_rejects_non_finite() {
        let geom = GridGeometry::new(2, 2).unwrap();
        let err = FieldStack::single(geom, vec![0.0, 1.0, f64::NAN, 2.0]);
        assert!(err.is_err());
    }

    #[test]
    fn field_stack_shape_check() {
        let geom = GridGeometry::new(2, 2).unwrap();
        assert!(FieldStack::new(geom, 2, vec![0.0; 7]).is_err());
        assert!(FieldStack::new(geom, 2, vec![0.0; 8]).is_ok());
    }
}
