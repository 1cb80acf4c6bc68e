use super::{build_cov, CovParams, FieldStack, GridGeometry, SpectralFactor};
use crate::error::{Error, Result};

/// EDF solves are accepted when |EDF(θ, λ) − target| ≤ EDF_TOL_FACTOR·n.
pub const EDF_TOL_FACTOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check_geometry(factor: &SpectralFactor, y: &FieldStack) -> Result<()> {
    if factor.geometry() != y.geometry() {
        return Err(Error::input("field geometry does not match the factor"));
    }
    Ok(())
}

/// Gaussian log-likelihood of a field stack under σ²Σ(θ) + τ²I,
/// summed over replicates. Factorizes Σ(θ) internally.
pub fn loglik(y: &FieldStack, p: &CovParams) -> Result<f64> {
    let factor = SpectralFactor::new(y.geometry(), p.theta())?;
    loglik_with(&factor, y, p)
}

/// Log-likelihood reusing an existing factor for `p.theta()`.
pub fn loglik_with(factor: &SpectralFactor, y: &FieldStack, p: &CovParams) -> Result<f64> {
    check_geometry(factor, y)?;
    if factor.theta() != p.theta() {
        return Err(Error::input("factor was computed for a different theta"));
    }
    let n = factor.n() as f64;
    let lambda = p.lambda();
    let sigma2 = p.sigma2();
    let logdet = factor.logdet_shifted(lambda); // log det(Σ + λI)
    let mut total = 0.0;
    for r in 0..y.replicates() {
        let coef = factor.project(y.replicate(r));
        let quad: f64 = coef
            .iter()
            .zip(factor.eigenvalues())
            .map(|(c, e)| c * c / (e + lambda))
            .sum();
        if !quad.is_finite() {
            return Err(Error::numerical(format!(
                "singular covariance at theta = {}, lambda = {lambda}",
                p.theta()
            )));
        }
        total += -0.5 * (quad / sigma2 + n * sigma2.ln() + logdet + n * LN_2PI);
    }
    Ok(total)
}

/// Closed-form maximizer of the likelihood in σ² given (θ, λ):
/// yᵀ(Σ+λI)⁻¹y / n for one replicate, the mean of per-replicate values
/// for a stack. Returns 0 for an identically-zero stack (degenerate).
pub fn profile_sigma2(y: &FieldStack, theta: f64, lambda: f64) -> Result<f64> {
    let factor = SpectralFactor::new(y.geometry(), theta)?;
    profile_sigma2_with(&factor, y, lambda)
}

pub fn profile_sigma2_with(factor: &SpectralFactor, y: &FieldStack, lambda: f64) -> Result<f64> {
    check_geometry(factor, y)?;
    let n = factor.n() as f64;
    let mut mean = 0.0;
    for r in 0..y.replicates() {
        let coef = factor.project(y.replicate(r));
        let quad: f64 = coef
            .iter()
            .zip(factor.eigenvalues())
            .map(|(c, e)| c * c / (e + lambda))
            .sum();
        mean += quad / n;
    }
    Ok(mean / y.replicates() as f64)
}

/// Profile (concentrated) log-likelihood: the log-likelihood with σ²
/// replaced by its closed-form maximizer, summed over replicates.
pub fn concentrated_loglik(y: &FieldStack, theta: f64, lambda: f64) -> Result<f64> {
    let factor = SpectralFactor::new(y.geometry(), theta)?;
    concentrated_loglik_with(&factor, y, lambda)
}

pub fn concentrated_loglik_with(factor: &SpectralFactor, y: &FieldStack, lambda: f64) -> Result<f64> {
    let (value, _sigma2) = concentrated_parts(factor, y, lambda)?;
    Ok(value)
}

/// Concentrated log-likelihood together with σ̂²; shared by the grid
/// search, which needs both at the argmax.
pub(crate) fn concentrated_parts(
    factor: &SpectralFactor,
    y: &FieldStack,
    lambda: f64,
) -> Result<(f64, f64)> {
    check_geometry(factor, y)?;
    let n = factor.n() as f64;
    let reps = y.replicates() as f64;
    let sigma2_hat = profile_sigma2_with(factor, y, lambda)?;
    if sigma2_hat <= 0.0 {
        return Err(Error::numerical("degenerate zero field: profiled variance is 0"));
    }
    let logdet = factor.logdet_shifted(lambda);
    let value = -0.5 * reps * (n + n * sigma2_hat.ln() + logdet + n * LN_2PI);
    Ok((value, sigma2_hat))
}

/// Effective degrees of freedom trace[Σ(θ)(Σ(θ)+λI)⁻¹] = Σᵢ eᵢ/(eᵢ+λ).
/// Lies in [0, n] and is strictly decreasing in λ.
pub fn edf(theta: f64, lambda: f64, geom: &GridGeometry) -> Result<f64> {
    let factor = SpectralFactor::new(geom, theta)?;
    Ok(edf_with(&factor, lambda))
}

pub fn edf_with(factor: &SpectralFactor, lambda: f64) -> f64 {
    factor
        .eigenvalues()
        .iter()
        .map(|e| e / (e + lambda))
        .sum()
}

/// EDF through an independent route: n − λ·trace[(Σ+λI)⁻¹] with the
/// trace from a Cholesky factorization. Cross-checks the spectral path.
pub fn edf_via_cholesky(geom: &GridGeometry, theta: f64, lambda: f64) -> Result<f64> {
    let p = CovParams::new(theta, lambda)?;
    let m = build_cov(geom, &p)?;
    let chol = nalgebra::Cholesky::new(m).ok_or_else(|| {
        Error::numerical(format!("Cholesky failed for theta = {theta}, lambda = {lambda}"))
    })?;
    let inv = chol.inverse();
    Ok(geom.n() as f64 - lambda * inv.trace())
}

/// Invert EDF(θ, ·) at a target in (0, n) by bisection on log λ. The
/// bracket is expanded geometrically until it provably straddles the
/// target. The result satisfies |EDF(θ, λ) − target| ≤ 1e-6·n.
pub fn lambda_for_edf(theta: f64, target: f64, geom: &GridGeometry) -> Result<f64> {
    let factor = SpectralFactor::new(geom, theta)?;
    lambda_for_edf_with(&factor, target)
}

pub fn lambda_for_edf_with(factor: &SpectralFactor, target: f64) -> Result<f64> {
    let n = factor.n() as f64;
    if !(target > 0.0 && target < n) {
        return Err(Error::domain(format!(
            "EDF target must lie in (0, {n}), got {target}"
        )));
    }
    let tol = EDF_TOL_FACTOR * n;

    let mut lo = 1e-18_f64;
    let mut hi = 1e6_f64;
    let mut grow = 0;
    while edf_with(factor, lo) < target {
        lo /= 1e4;
        grow += 1;
        if grow > 60 {
            return Err(Error::numerical("EDF bracket expansion failed (low side)"));
        }
    }
    while edf_with(factor, hi) > target {
        hi *= 1e4;
        grow += 1;
        if grow > 60 {
            return Err(Error::numerical("EDF bracket expansion failed (high side)"));
        }
    }

    let mut log_lo = lo.ln();
    let mut log_hi = hi.ln();
    let mut lambda = (0.5 * (log_lo + log_hi)).exp();
    for _ in 0..200 {
        lambda = (0.5 * (log_lo + log_hi)).exp();
        let e = edf_with(factor, lambda);
        if (e - target).abs() <= tol {
            return Ok(lambda);
        }
        if e > target {
            log_lo = lambda.ln();
        } else {
            log_hi = lambda.ln();
        }
    }
    // Bracket collapsed without meeting the tolerance; EDF is continuous
    // and monotone, so this indicates inconsistent inputs.
    Err(Error::numerical(format!(
        "EDF bisection did not converge to target {target} (last lambda {lambda:e})"
    )))
}
