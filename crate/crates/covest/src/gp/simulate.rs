use super::{CovParams, FieldStack, GridGeometry, SpectralFactor};
use crate::error::Result;
use crate::rng::{mix_seed, normal_vector};

/// Draw independent replicates of y ~ N(0, σ²Σ(θ) + τ²I).
///
/// Each replicate is A·z with A = Q·diag(σ·√(eᵢ+λ)) and z iid standard
/// normal, so AAᵀ equals the target covariance exactly. Replicate r uses
/// an RNG derived from (seed, r); the draw is bit-reproducible and
/// independent of any thread schedule.
pub fn simulate(
    geom: &GridGeometry,
    p: &CovParams,
    replicates: usize,
    seed: u64,
) -> Result<FieldStack> {
    let factor = SpectralFactor::new(geom, p.theta())?;
    simulate_with(&factor, p, replicates, seed)
}

/// Simulation reusing an existing factor for `p.theta()`.
pub fn simulate_with(
    factor: &SpectralFactor,
    p: &CovParams,
    replicates: usize,
    seed: u64,
) -> Result<FieldStack> {
    let n = factor.n();
    let sigma = p.sigma2().sqrt();
    // σ·√(eᵢ+λ) rather than √(σ²(eᵢ+λ)): scaling σ² by c² scales every
    // field by exactly c.
    let scales: Vec<f64> = factor
        .eigenvalues()
        .iter()
        .map(|e| sigma * (e + p.lambda()).sqrt())
        .collect();

    let mut values = vec![0.0; replicates * n];
    let q = factor.eigenvectors();
    for (r, out) in values.chunks_exact_mut(n).enumerate() {
        let mut z = normal_vector(n, mix_seed(&[seed, r as u64]));
        for (zi, s) in z.iter_mut().zip(&scales) {
            *zi *= s;
        }
        let zv = nalgebra::DVectorView::from_slice(&z, n);
        let y = q * zv;
        out.copy_from_slice(y.as_slice());
    }
    FieldStack::new(*factor.geometry(), replicates, values)
}
