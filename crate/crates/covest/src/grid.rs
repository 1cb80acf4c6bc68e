//! EDF-stratified parameter grids and the affine parameter scaling used
//! for neural-network targets.
//!
//! The training grid places θ values on an even linspace and, per θ,
//! solves for the λ whose effective degrees of freedom hit an even
//! linspace of EDF targets. This stratification keeps λ comparable
//! across ranges and is shared by the maximum-likelihood grid search
//! and the NN training samples.

use crate::error::{Error, Result};
use crate::gp::{
    edf_with, floored_lambda, lambda_for_edf_with, GridGeometry, SpectralFactor, EDF_TOL_FACTOR,
};
use crate::rng::{mix_seed, rng_from};
use rand::Rng;
use rayon::prelude::*;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Default training-grid design.
pub const TRAINING_N_THETA: usize = 201;
pub const TRAINING_N_EDF: usize = 200;
pub const TRAINING_THETA_RANGE: (f64, f64) = (2.0, 50.0);
pub const TRAINING_EDF_RANGE: (f64, f64) = (1.0, 255.0);

/// Default test-grid design.
pub const TEST_N_CONFIGS: usize = 2000;
pub const TEST_THETA_RANGE: (f64, f64) = (2.0, 25.0);
pub const TEST_EDF_RANGE: (f64, f64) = (40.0, 216.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Training,
    Test,
}

/// One (θ, λ) configuration with the EDF target it was solved for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEntry {
    pub theta: f64,
    pub lambda: f64,
    pub edf_target: f64,
}

/// Ordered set of (θ, λ) configurations. Training grids are θ-major
/// with EDF descending within each θ.
#[derive(Debug, Clone)]
pub struct ParamGrid {
    geometry: GridGeometry,
    kind: GridKind,
    entries: Vec<GridEntry>,
    /// Set when a test grid was requested outside the training box.
    extrapolation: bool,
}

impl ParamGrid {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn entries(&self) -> &[GridEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extrapolation(&self) -> bool {
        self.extrapolation
    }

    /// Consecutive index ranges sharing a bit-identical θ, in grid order.
    pub fn theta_groups(&self) -> Vec<std::ops::Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0usize;
        for i in 1..=self.entries.len() {
            if i == self.entries.len() || self.entries[i].theta != self.entries[start].theta {
                groups.push(start..i);
                start = i;
            }
        }
        groups
    }

    /// Write as CSV with full-precision, round-trip-exact formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "theta,lambda,edf_target")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.theta, e.lambda, e.edf_target)?;
        }
        Ok(())
    }

    pub fn to_csv_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Read a grid previously written by `write_csv`.
    pub fn from_csv_path(path: &Path, geometry: GridGeometry, kind: GridKind) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| {
            Error::format(format!("cannot open grid CSV {}: {e}", path.display()))
        })?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format(format!("{}: empty grid CSV", path.display())))?;
        if header.trim() != "theta,lambda,edf_target" {
            return Err(Error::format(format!(
                "{}: expected header 'theta,lambda,edf_target', got '{header}'",
                path.display()
            )));
        }
        let mut entries = Vec::new();
        for (no, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let mut field = |name: &str| -> Result<f64> {
                it.next()
                    .ok_or_else(|| {
                        Error::format(format!("{}:{}: missing {name}", path.display(), no + 2))
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| {
                        Error::format(format!("{}:{}: bad {name}: {e}", path.display(), no + 2))
                    })
            };
            entries.push(GridEntry {
                theta: field("theta")?,
                lambda: field("lambda")?,
                edf_target: field("edf_target")?,
            });
        }
        if entries.is_empty() {
            return Err(Error::format(format!("{}: grid CSV has no entries", path.display())));
        }
        Ok(ParamGrid {
            geometry,
            kind,
            entries,
            extrapolation: false,
        })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// The EDF-stratified training grid: `n_theta` ranges equally spaced over
/// `theta_range`; per θ, λ solved so EDF hits `n_edf` equally spaced
/// targets over `edf_range`, ordered EDF-descending.
pub fn training_grid(
    geom: &GridGeometry,
    n_theta: usize,
    n_edf: usize,
    theta_range: (f64, f64),
    edf_range: (f64, f64),
) -> Result<ParamGrid> {
    let n = geom.n() as f64;
    if n_theta < 2 || n_edf < 2 {
        return Err(Error::domain("training grid needs at least 2 values per axis"));
    }
    if !(edf_range.0 > 0.0 && edf_range.1 < n && edf_range.0 < edf_range.1) {
        return Err(Error::domain(format!(
            "EDF range ({}, {}) must lie inside (0, {n})",
            edf_range.0, edf_range.1
        )));
    }
    if !(theta_range.0 > 0.0 && theta_range.0 < theta_range.1) {
        return Err(Error::domain("invalid theta range"));
    }

    let thetas = linspace(theta_range.0, theta_range.1, n_theta);
    // descending EDF targets: lambda increases along each theta block
    let mut edfs = linspace(edf_range.0, edf_range.1, n_edf);
    edfs.reverse();

    let per_theta: Result<Vec<Vec<GridEntry>>> = thetas
        .par_iter()
        .map(|&theta| {
            let factor = SpectralFactor::new(geom, theta)?;
            edfs.iter()
                .map(|&target| {
                    let lambda = lambda_for_edf_with(&factor, target)?;
                    Ok(GridEntry {
                        theta,
                        lambda,
                        edf_target: target,
                    })
                })
                .collect()
        })
        .collect();

    Ok(ParamGrid {
        geometry: *geom,
        kind: GridKind::Training,
        entries: per_theta?.into_iter().flatten().collect(),
        extrapolation: false,
    })
}

/// Training grid with the published defaults (201 × 200 = 40200 entries
/// on a 16×16 geometry).
pub fn default_training_grid(geom: &GridGeometry) -> Result<ParamGrid> {
    training_grid(
        geom,
        TRAINING_N_THETA,
        TRAINING_N_EDF,
        TRAINING_THETA_RANGE,
        TRAINING_EDF_RANGE,
    )
}

/// Deterministic low-discrepancy test grid over a (θ, EDF) box.
///
/// Points come from a two-dimensional Kronecker lattice (plastic-number
/// increments) with a seeded rotation, so the box is covered evenly and
/// the same seed always reproduces the same grid. λ is then solved per
/// point from its EDF coordinate.
pub fn test_grid(
    geom: &GridGeometry,
    n_configs: usize,
    theta_range: (f64, f64),
    edf_range: (f64, f64),
    seed: u64,
) -> Result<ParamGrid> {
    let n = geom.n() as f64;
    if n_configs == 0 {
        return Err(Error::domain("test grid needs at least one configuration"));
    }
    if !(edf_range.0 > 0.0 && edf_range.1 < n && edf_range.0 < edf_range.1) {
        return Err(Error::domain(format!(
            "EDF range ({}, {}) must lie inside (0, {n})",
            edf_range.0, edf_range.1
        )));
    }
    let extrapolation = theta_range.0 < TRAINING_THETA_RANGE.0
        || theta_range.1 > TRAINING_THETA_RANGE.1
        || edf_range.0 < TRAINING_EDF_RANGE.0
        || edf_range.1 > TRAINING_EDF_RANGE.1;

    // R2 Kronecker sequence: increments 1/g and 1/g² for the plastic
    // number g (the 2-D analogue of the golden ratio).
    const ALPHA1: f64 = 0.754_877_666_246_692_8;
    const ALPHA2: f64 = 0.569_840_290_998_053_2;
    let mut rng = rng_from(mix_seed(&[seed, 0x7e57]));
    let shift1: f64 = rng.random();
    let shift2: f64 = rng.random();

    let coords: Vec<(f64, f64)> = (0..n_configs)
        .map(|k| {
            let u = (k as f64 * ALPHA1 + shift1).fract();
            let v = (k as f64 * ALPHA2 + shift2).fract();
            (
                theta_range.0 + u * (theta_range.1 - theta_range.0),
                edf_range.0 + v * (edf_range.1 - edf_range.0),
            )
        })
        .collect();

    let entries: Result<Vec<GridEntry>> = coords
        .par_iter()
        .map(|&(theta, target)| {
            let factor = SpectralFactor::new(geom, theta)?;
            let lambda = lambda_for_edf_with(&factor, target)?;
            Ok(GridEntry {
                theta,
                lambda,
                edf_target: target,
            })
        })
        .collect();

    Ok(ParamGrid {
        geometry: *geom,
        kind: GridKind::Test,
        entries: entries?,
        extrapolation,
    })
}

/// Test grid with the published defaults: 2000 configurations over
/// θ ∈ [2, 25], EDF ∈ [40, 216].
pub fn default_test_grid(geom: &GridGeometry, seed: u64) -> Result<ParamGrid> {
    test_grid(geom, TEST_N_CONFIGS, TEST_THETA_RANGE, TEST_EDF_RANGE, seed)
}

/// Standardization constants for (log λ, θ) over a training grid:
/// population means and standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingStats {
    pub mean_loglambda: f64,
    pub sd_loglambda: f64,
    pub mean_theta: f64,
    pub sd_theta: f64,
}

/// Means and population standard deviations of log λ and θ over all
/// grid entries. λ values pass through the log floor first.
pub fn scaling_stats(grid: &ParamGrid) -> Result<ScalingStats> {
    if grid.len() < 2 {
        return Err(Error::domain("scaling stats need at least two grid entries"));
    }
    let count = grid.len() as f64;
    let logl: Vec<f64> = grid
        .entries()
        .iter()
        .map(|e| floored_lambda(e.lambda).ln())
        .collect();
    let thetas: Vec<f64> = grid.entries().iter().map(|e| e.theta).collect();

    let stats = |v: &[f64]| -> (f64, f64) {
        let mean = v.iter().sum::<f64>() / count;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count;
        (mean, var.sqrt())
    };
    let (mean_loglambda, sd_loglambda) = stats(&logl);
    let (mean_theta, sd_theta) = stats(&thetas);
    if sd_loglambda == 0.0 || sd_theta == 0.0 {
        return Err(Error::domain("degenerate grid: zero variance in a parameter"));
    }
    Ok(ScalingStats {
        mean_loglambda,
        sd_loglambda,
        mean_theta,
        sd_theta,
    })
}

impl ScalingStats {
    /// Raw (log λ, θ) to scaled (log Λ, Θ).
    pub fn scale(&self, loglambda: f64, theta: f64) -> (f64, f64) {
        (
            (loglambda - self.mean_loglambda) / self.sd_loglambda,
            (theta - self.mean_theta) / self.sd_theta,
        )
    }

    /// Scaled (log Λ, Θ) back to raw (log λ, θ); exact inverse of `scale`.
    pub fn unscale(&self, loglambda_scaled: f64, theta_scaled: f64) -> (f64, f64) {
        (
            loglambda_scaled * self.sd_loglambda + self.mean_loglambda,
            theta_scaled * self.sd_theta + self.mean_theta,
        )
    }
}

/// Verify that every entry of a grid hits its EDF target within the
/// construction tolerance; returns the worst deviation in EDF units.
pub fn verify_edf_targets(grid: &ParamGrid) -> Result<f64> {
    let tol = EDF_TOL_FACTOR * grid.geometry().n() as f64;
    let worst = grid
        .theta_groups()
        .into_par_iter()
        .map(|range| -> Result<f64> {
            let theta = grid.entries()[range.start].theta;
            let factor = SpectralFactor::new(grid.geometry(), theta)?;
            let mut w: f64 = 0.0;
            for e in &grid.entries()[range] {
                w = w.max((edf_with(&factor, e.lambda) - e.edf_target).abs());
            }
            Ok(w)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    if worst > tol {
        return Err(Error::numerical(format!(
            "grid entry misses its EDF target by {worst:e} (tolerance {tol:e})"
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_geom() -> GridGeometry {
        GridGeometry::new(8, 8).unwrap()
    }

    #[test]
    fn training_grid_shape_and_order() {
        let geom = small_geom();
        let grid = training_grid(&geom, 5, 4, (2.0, 10.0), (4.0, 60.0)).unwrap();
        assert_eq!(grid.len(), 20);
        // theta-major, EDF descending
        assert_eq!(grid.entries()[0].theta, 2.0);
        assert_eq!(grid.entries()[0].edf_target, 60.0);
        assert_eq!(grid.entries()[3].edf_target, 4.0);
        assert_eq!(grid.entries()[4].theta, 4.0);
        // lambda strictly increasing as EDF target decreases, per theta
        for g in grid.theta_groups() {
            let es = &grid.entries()[g];
            for w in es.windows(2) {
                assert!(w[1].lambda > w[0].lambda);
            }
        }
    }

    #[test]
    fn training_grid_hits_edf_targets() {
        let geom = small_geom();
        let grid = training_grid(&geom, 4, 6, (2.0, 12.0), (2.0, 60.0)).unwrap();
        let worst = verify_edf_targets(&grid).unwrap();
        assert!(worst <= EDF_TOL_FACTOR * 64.0);
    }

    #[test]
    fn training_grid_spacings_match_defaults() {
        // spacing checks derived from the published endpoints
        let thetas = linspace(2.0, 50.0, 201);
        assert!((thetas[1] - thetas[0] - 0.24).abs() < 1e-12);
        let edfs = linspace(1.0, 255.0, 200);
        assert!((edfs[1] - edfs[0] - 254.0 / 199.0).abs() < 1e-12);
    }

    #[test]
    fn training_grid_rejects_bad_edf_range() {
        let geom = small_geom();
        assert!(training_grid(&geom, 3, 3, (2.0, 5.0), (1.0, 64.0)).is_err());
        assert!(training_grid(&geom, 3, 3, (2.0, 5.0), (0.0, 20.0)).is_err());
    }

    #[test]
    fn test_grid_deterministic_and_in_box() {
        let geom = small_geom();
        let a = test_grid(&geom, 64, (2.0, 10.0), (4.0, 50.0), 11).unwrap();
        let b = test_grid(&geom, 64, (2.0, 10.0), (4.0, 50.0), 11).unwrap();
        assert_eq!(a.entries(), b.entries());
        let c = test_grid(&geom, 64, (2.0, 10.0), (4.0, 50.0), 12).unwrap();
        assert_ne!(a.entries(), c.entries());
        for e in a.entries() {
            assert!(e.theta >= 2.0 && e.theta <= 10.0);
            assert!(e.edf_target >= 4.0 && e.edf_target <= 50.0);
        }
        assert!(!a.extrapolation());
    }

    #[test]
    fn test_grid_flags_extrapolation() {
        let geom = small_geom();
        // theta beyond the training maximum of 50
        let g = test_grid(&geom, 8, (2.0, 55.0), (4.0, 50.0), 3).unwrap();
        assert!(g.extrapolation());
    }

    #[test]
    fn scaling_three_point_example() {
        // log λ ∈ {−1,0,1}, θ ∈ {1,2,3}: population sd √(2/3), so the
        // scaled log λ values are ±1.2247 and 0.
        let geom = small_geom();
        let entries = vec![
            GridEntry { theta: 1.0, lambda: (-1.0f64).exp(), edf_target: 0.0 },
            GridEntry { theta: 2.0, lambda: 1.0, edf_target: 0.0 },
            GridEntry { theta: 3.0, lambda: 1.0f64.exp(), edf_target: 0.0 },
        ];
        let grid = ParamGrid {
            geometry: geom,
            kind: GridKind::Training,
            entries,
            extrapolation: false,
        };
        let s = scaling_stats(&grid).unwrap();
        let (l0, t0) = s.scale(-1.0, 1.0); // log λ = −1
        assert!((l0 + 1.224_744_871_391_589).abs() < 1e-12, "got {l0}");
        assert!((t0 + 1.224_744_871_391_589).abs() < 1e-12);
        let (l1, _) = s.scale(0.0, 2.0);
        assert!(l1.abs() < 1e-12);
    }

    #[test]
    fn scale_unscale_roundtrip() {
        let s = ScalingStats {
            mean_loglambda: -6.2,
            sd_loglambda: 3.0,
            mean_theta: 26.0,
            sd_theta: 13.9,
        };
        let mut rng = rng_from(5);
        for _ in 0..1000 {
            let l: f64 = rng.random_range(-15.0..6.0);
            let t: f64 = rng.random_range(2.0..50.0);
            let (ls, ts) = s.scale(l, t);
            let (l2, t2) = s.unscale(ls, ts);
            assert!((l - l2).abs() < 1e-12);
            assert!((t - t2).abs() < 1e-12);
        }
        assert_eq!(s.scale(s.mean_loglambda, s.mean_theta), (0.0, 0.0));
    }

    #[test]
    fn scaled_grid_is_standardized() {
        let geom = small_geom();
        let grid = training_grid(&geom, 6, 5, (2.0, 14.0), (3.0, 58.0)).unwrap();
        let s = scaling_stats(&grid).unwrap();
        let scaled: Vec<(f64, f64)> = grid
            .entries()
            .iter()
            .map(|e| s.scale(floored_lambda(e.lambda).ln(), e.theta))
            .collect();
        let n = scaled.len() as f64;
        let mean_l = scaled.iter().map(|p| p.0).sum::<f64>() / n;
        let var_l = scaled.iter().map(|p| p.0 * p.0).sum::<f64>() / n;
        let mean_t = scaled.iter().map(|p| p.1).sum::<f64>() / n;
        let var_t = scaled.iter().map(|p| p.1 * p.1).sum::<f64>() / n;
        assert!(mean_l.abs() < 1e-10);
        assert!((var_l - 1.0).abs() < 1e-10);
        assert!(mean_t.abs() < 1e-10);
        assert!((var_t - 1.0).abs() < 1e-10);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let geom = small_geom();
        let grid = training_grid(&geom, 3, 3, (2.0, 9.0), (4.0, 40.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        grid.to_csv_path(&path).unwrap();
        let back = ParamGrid::from_csv_path(&path, geom, GridKind::Training).unwrap();
        assert_eq!(grid.entries(), back.entries());
    }
}
