//! Grid-search maximum likelihood over an EDF-stratified parameter grid.
//!
//! A fit evaluates the concentrated log-likelihood at every grid entry
//! and reports the argmax. Entries are grouped by θ so one spectral
//! factorization serves the whole λ sweep of that θ; replicates are
//! projected through the eigenbasis with a single matrix product per
//! group. `GridSearcher` additionally caches factors and per-entry
//! log-determinants across samples for batch work (simulation studies,
//! window scans); a standalone `ml_fit` pays its own factorizations,
//! which is the honest per-sample cost of the method.

use crate::error::{Error, Result};
use crate::gp::{FieldStack, SpectralFactor};
use crate::grid::ParamGrid;
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::time::Instant;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Estimation methods of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ml,
    Ml30,
    Nf,
    Nf30,
    Nv,
    Nv30,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ml => "ML",
            Method::Ml30 => "ML30",
            Method::Nf => "NF",
            Method::Nf30 => "NF30",
            Method::Nv => "NV",
            Method::Nv30 => "NV30",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ML" => Ok(Method::Ml),
            "ML30" => Ok(Method::Ml30),
            "NF" => Ok(Method::Nf),
            "NF30" => Ok(Method::Nf30),
            "NV" => Ok(Method::Nv),
            "NV30" => Ok(Method::Nv30),
            other => Err(Error::input(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One estimate: (log λ̂, θ̂) plus σ̂² where the method provides it.
/// `loglambda_hat` is −∞ when λ̂ = 0. `clipped` marks estimates outside
/// the validated domain or degenerate inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub method: Method,
    pub loglambda_hat: f64,
    pub theta_hat: f64,
    pub sigma2_hat: Option<f64>,
    pub elapsed: f64,
    pub clipped: bool,
}

impl EstimateRecord {
    pub fn lambda_hat(&self) -> f64 {
        self.loglambda_hat.exp()
    }

    pub const CSV_HEADER: &'static str =
        "method,loglambda_hat,theta_hat,sigma2_hat,elapsed,clipped";

    pub fn csv_row(&self) -> String {
        let sigma2 = self.sigma2_hat.map(|s| s.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.method, self.loglambda_hat, self.theta_hat, sigma2, self.elapsed, self.clipped
        )
    }

    pub fn write_csv<W: Write>(records: &[EstimateRecord], mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in records {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<EstimateRecord>> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format("empty estimate CSV"))?;
        if header.trim() != Self::CSV_HEADER {
            return Err(Error::format(format!(
                "expected header '{}', got '{header}'",
                Self::CSV_HEADER
            )));
        }
        let mut out = Vec::new();
        for (no, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::format(format!(
                    "line {}: expected 6 fields, got {}",
                    no + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str, name: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::format(format!("line {}: bad {name}: {e}", no + 2)))
            };
            out.push(EstimateRecord {
                method: Method::parse(fields[0])?,
                loglambda_hat: parse(fields[1], "loglambda_hat")?,
                theta_hat: parse(fields[2], "theta_hat")?,
                sigma2_hat: if fields[3].trim().is_empty() {
                    None
                } else {
                    Some(parse(fields[3], "sigma2_hat")?)
                },
                elapsed: parse(fields[4], "elapsed")?,
                clipped: fields[5]
                    .trim()
                    .parse::<bool>()
                    .map_err(|e| Error::format(format!("line {}: bad clipped: {e}", no + 2)))?,
            });
        }
        Ok(out)
    }
}

/// Concentrated log-likelihood values over a grid, in grid order.
#[derive(Debug, Clone)]
pub struct LikelihoodSurface {
    pub values: Vec<f64>,
}

impl LikelihoodSurface {
    /// Index of the maximum; ties broken by the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Grid-search engine with factors and per-entry log-determinants
/// computed once and shared across fits. Read-only after construction,
/// safe to use from many threads.
pub struct GridSearcher {
    grid: ParamGrid,
    groups: Vec<std::ops::Range<usize>>,
    factors: Vec<SpectralFactor>,
    logdets: Vec<f64>,
}

impl GridSearcher {
    pub fn new(grid: ParamGrid) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::domain("cannot search an empty grid"));
        }
        let groups = grid.theta_groups();
        let factors: Result<Vec<SpectralFactor>> = groups
            .par_iter()
            .map(|g| SpectralFactor::new(grid.geometry(), grid.entries()[g.start].theta))
            .collect();
        let factors = factors?;
        let mut logdets = vec![0.0f64; grid.len()];
        for (g, factor) in groups.iter().zip(&factors) {
            for idx in g.clone() {
                logdets[idx] = factor.logdet_shifted(grid.entries()[idx].lambda);
            }
        }
        Ok(Self {
            grid,
            groups,
            factors,
            logdets,
        })
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    fn method_for(&self, replicates: usize) -> Method {
        if replicates == 1 {
            Method::Ml
        } else {
            Method::Ml30
        }
    }

    /// Record for a degenerate or failed sample: the lowest-index grid
    /// entry, flagged so batches and window scans never abort.
    fn degenerate_record(&self, replicates: usize, elapsed: f64) -> EstimateRecord {
        let e = &self.grid.entries()[0];
        EstimateRecord {
            method: self.method_for(replicates),
            loglambda_hat: if e.lambda > 0.0 {
                e.lambda.ln()
            } else {
                f64::NEG_INFINITY
            },
            theta_hat: e.theta,
            sigma2_hat: None,
            elapsed,
            clipped: true,
        }
    }

    /// Concentrated log-likelihood at every grid entry.
    pub fn surface(&self, y: &FieldStack) -> Result<LikelihoodSurface> {
        if y.geometry() != self.grid.geometry() {
            return Err(Error::input("sample geometry does not match the grid"));
        }
        let n = self.grid.geometry().n();
        let reps = y.replicates();
        let nf = n as f64;
        let rf = reps as f64;

        // replicates as columns, shared by every theta group
        let mut cols = nalgebra::DMatrix::<f64>::zeros(n, reps);
        for r in 0..reps {
            cols.column_mut(r).copy_from_slice(y.replicate(r));
        }

        let mut values = vec![0.0f64; self.grid.len()];
        for (g, factor) in self.groups.iter().zip(&self.factors) {
            let coef = factor.project_columns(&cols);
            // squared coefficients summed across replicates, per eigenvalue
            let mut ssq = vec![0.0f64; n];
            for r in 0..reps {
                let col = coef.column(r);
                for (s, c) in ssq.iter_mut().zip(col.iter()) {
                    *s += c * c;
                }
            }
            let evals = factor.eigenvalues();
            for idx in g.clone() {
                let entry = &self.grid.entries()[idx];
                let quad: f64 = ssq
                    .iter()
                    .zip(evals)
                    .map(|(s, e)| s / (e + entry.lambda))
                    .sum();
                let sigma2_hat = quad / (rf * nf);
                values[idx] = if sigma2_hat > 0.0 {
                    -0.5 * rf * (nf + nf * sigma2_hat.ln() + self.logdets[idx] + nf * LN_2PI)
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
        Ok(LikelihoodSurface { values })
    }

    /// Maximum-likelihood fit of one sample (all replicates jointly).
    pub fn fit(&self, y: &FieldStack) -> Result<EstimateRecord> {
        Ok(self.fit_impl(y, false)?.0)
    }

    pub fn fit_with_surface(&self, y: &FieldStack) -> Result<(EstimateRecord, LikelihoodSurface)> {
        let (rec, surf) = self.fit_impl(y, true)?;
        Ok((rec, surf.expect("surface requested")))
    }

    fn fit_impl(
        &self,
        y: &FieldStack,
        keep_surface: bool,
    ) -> Result<(EstimateRecord, Option<LikelihoodSurface>)> {
        let start = Instant::now();
        if y.is_constant() {
            let rec = self.degenerate_record(y.replicates(), start.elapsed().as_secs_f64());
            let surf = keep_surface.then(|| LikelihoodSurface {
                values: vec![f64::NEG_INFINITY; self.grid.len()],
            });
            return Ok((rec, surf));
        }
        let surface = self.surface(y)?;
        let best = surface.argmax();
        let entry = &self.grid.entries()[best];

        // recover sigma2_hat at the argmax
        let group = self
            .groups
            .iter()
            .position(|g| g.contains(&best))
            .expect("argmax belongs to a group");
        let sigma2_hat = crate::gp::profile_sigma2_with(&self.factors[group], y, entry.lambda)?;

        let rec = EstimateRecord {
            method: self.method_for(y.replicates()),
            loglambda_hat: if entry.lambda > 0.0 {
                entry.lambda.ln()
            } else {
                f64::NEG_INFINITY
            },
            theta_hat: entry.theta,
            sigma2_hat: Some(sigma2_hat),
            elapsed: start.elapsed().as_secs_f64(),
            clipped: false,
        };
        Ok((rec, keep_surface.then_some(surface)))
    }

    /// Fit many samples; element i equals `fit(samples[i])` bit-exactly
    /// regardless of thread count. Per-sample failures become flagged
    /// degenerate records instead of aborting the batch.
    pub fn fit_batch(&self, samples: &[FieldStack]) -> Vec<EstimateRecord> {
        samples
            .par_iter()
            .map(|y| {
                let start = Instant::now();
                self.fit(y).unwrap_or_else(|_| {
                    self.degenerate_record(y.replicates(), start.elapsed().as_secs_f64())
                })
            })
            .collect()
    }
}

/// One-shot maximum-likelihood fit: builds factors for this fit alone.
/// For repeated fits over the same grid, construct a `GridSearcher`.
pub fn ml_fit(
    y: &FieldStack,
    grid: &ParamGrid,
    keep_surface: bool,
) -> Result<(EstimateRecord, Option<LikelihoodSurface>)> {
    let start = Instant::now();
    let searcher = GridSearcher::new(grid.clone())?;
    let (mut rec, surf) = searcher.fit_impl(y, keep_surface)?;
    rec.elapsed = start.elapsed().as_secs_f64();
    Ok((rec, surf))
}

/// Batch fit over a shared searcher; returns the records and the
/// aggregate wall time in seconds.
pub fn ml_fit_batch(
    samples: &[FieldStack],
    grid: &ParamGrid,
) -> Result<(Vec<EstimateRecord>, f64)> {
    let searcher = GridSearcher::new(grid.clone())?;
    let start = Instant::now();
    let records = searcher.fit_batch(samples);
    Ok((records, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{simulate, CovParams, GridGeometry};
    use crate::grid::training_grid;
    use crate::testkit;

    fn mini_grid(geom: &GridGeometry) -> ParamGrid {
        training_grid(geom, 5, 5, (2.0, 8.0), (2.0, 12.0)).unwrap()
    }

    #[test]
    fn argmax_matches_dense_oracle_on_mini_grids() {
        let geom = GridGeometry::new(4, 4).unwrap();
        let grid = mini_grid(&geom);
        let searcher = GridSearcher::new(grid.clone()).unwrap();
        for seed in 0..5 {
            let p = CovParams::new(4.0, 0.5).unwrap();
            let y = simulate(&geom, &p, 1, 1000 + seed).unwrap();
            let (rec, surf) = searcher.fit_with_surface(&y).unwrap();
            let (oracle_idx, oracle_vals) = testkit::dense_grid_argmax(&geom, &y, &grid);
            assert_eq!(surf.argmax(), oracle_idx, "seed {seed}");
            assert_eq!(rec.theta_hat, grid.entries()[oracle_idx].theta);
            for (a, b) in surf.values.iter().zip(&oracle_vals) {
                let rel = (a - b).abs() / b.abs().max(1.0);
                assert!(rel < 1e-6, "surface {a} vs oracle {b}");
            }
        }
    }

    #[test]
    fn field_scaling_leaves_argmax_invariant() {
        let geom = GridGeometry::new(4, 4).unwrap();
        let searcher = GridSearcher::new(mini_grid(&geom)).unwrap();
        let p = CovParams::new(3.0, 0.3).unwrap();
        let y = simulate(&geom, &p, 2, 8).unwrap();
        let scaled =
            FieldStack::new(geom, 2, y.values().iter().map(|v| 3.0 * v).collect()).unwrap();
        let a = searcher.fit(&y).unwrap();
        let b = searcher.fit(&scaled).unwrap();
        assert_eq!(a.loglambda_hat, b.loglambda_hat);
        assert_eq!(a.theta_hat, b.theta_hat);
        let ratio = b.sigma2_hat.unwrap() / a.sigma2_hat.unwrap();
        assert!((ratio - 9.0).abs() < 1e-9, "sigma2 ratio {ratio}");
    }

    #[test]
    fn surface_shift_does_not_move_argmax() {
        let geom = GridGeometry::new(4, 4).unwrap();
        let searcher = GridSearcher::new(mini_grid(&geom)).unwrap();
        let p = CovParams::new(5.0, 0.2).unwrap();
        let y = simulate(&geom, &p, 1, 3).unwrap();
        let surf = searcher.surface(&y).unwrap();
        let shifted = LikelihoodSurface {
            values: surf.values.iter().map(|v| v + 137.0).collect(),
        };
        assert_eq!(surf.argmax(), shifted.argmax());
    }

    #[test]
    fn batch_of_one_equals_single_fit() {
        let geom = GridGeometry::new(4, 4).unwrap();
        let searcher = GridSearcher::new(mini_grid(&geom)).unwrap();
        let p = CovParams::new(4.0, 0.4).unwrap();
        let y = simulate(&geom, &p, 1, 12).unwrap();
        let single = searcher.fit(&y).unwrap();
        let batch = searcher.fit_batch(std::slice::from_ref(&y));
        assert_eq!(batch.len(), 1);
        assert_eq!(batch[0].theta_hat, single.theta_hat);
        assert_eq!(batch[0].loglambda_hat, single.loglambda_hat);
        assert_eq!(batch[0].sigma2_hat, single.sigma2_hat);
    }

    #[test]
    fn batch_never_drops_samples() {
        let geom = GridGeometry::new(4, 4).unwrap();
        let searcher = GridSearcher::new(mini_grid(&geom)).unwrap();
        let p = CovParams::new(4.0, 0.4).unwrap();
        let mut samples = Vec::new();
        for s in 0..50 {
            samples.push(simulate(&geom, &p, 1, s).unwrap());
        }
        // throw in a degenerate sample
        samples.push(FieldStack::single(geom, vec![1.0; 16]).unwrap());
        let records = searcher.fit_batch(&samples);
        assert_eq!(records.len(), 51);
        assert!(records[50].clipped);
        assert!(!records[49].clipped);
    }

    #[test]
    fn constant_field_yields_flagged_boundary_record() {
        let geom = GridGeometry::new(4, 4).unwrap();
        let grid = mini_grid(&geom);
        let searcher = GridSearcher::new(grid.clone()).unwrap();
        let y = FieldStack::single(geom, vec![0.0; 16]).unwrap();
        let rec = searcher.fit(&y).unwrap();
        assert!(rec.clipped);
        assert_eq!(rec.theta_hat, grid.entries()[0].theta);
        assert_eq!(rec.sigma2_hat, None);
    }

    #[test]
    fn argmax_ties_break_to_lowest_index() {
        let s = LikelihoodSurface {
            values: vec![1.0, 5.0, 5.0, 2.0],
        };
        assert_eq!(s.argmax(), 1);
    }

    #[test]
    fn standalone_ml_fit_agrees_with_searcher() {
        let geom = GridGeometry::new(4, 4).unwrap();
        let grid = mini_grid(&geom);
        let p = CovParams::new(4.0, 0.6).unwrap();
        let y = simulate(&geom, &p, 3, 77).unwrap();
        let (a, surf) = ml_fit(&y, &grid, true).unwrap();
        assert!(surf.is_some());
        let searcher = GridSearcher::new(grid).unwrap();
        let b = searcher.fit(&y).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.loglambda_hat, b.loglambda_hat);
        assert_eq!(a.method, Method::Ml30);
    }

    #[test]
    fn grid_atom_recovery_matches_fine_grid_oracle() {
        // A 30-replicate sample simulated at a coarse-grid atom: the
        // coarse argmax lands within one coarse θ step of a 4x-finer
        // grid's argmax over the same box.
        let geom = GridGeometry::new(8, 8).unwrap();
        let coarse = training_grid(&geom, 9, 9, (4.0, 12.0), (8.0, 56.0)).unwrap();
        let fine = training_grid(&geom, 33, 33, (4.0, 12.0), (8.0, 56.0)).unwrap();
        let coarse_step = 1.0; // (12 − 4) / 8
        let truth_theta = 8.0;
        let lambda = crate::gp::lambda_for_edf(truth_theta, 32.0, &geom).unwrap();
        let p = CovParams::new(truth_theta, lambda).unwrap();
        let y = simulate(&geom, &p, 30, 2024).unwrap();
        let rec_coarse = GridSearcher::new(coarse).unwrap().fit(&y).unwrap();
        let rec_fine = GridSearcher::new(fine).unwrap().fit(&y).unwrap();
        assert!(
            (rec_coarse.theta_hat - rec_fine.theta_hat).abs() <= coarse_step + 1e-12,
            "coarse {} vs fine {}",
            rec_coarse.theta_hat,
            rec_fine.theta_hat
        );
    }

    #[test]
    fn csv_roundtrip() {
        let records = vec![
            EstimateRecord {
                method: Method::Ml,
                loglambda_hat: -2.5,
                theta_hat: 10.16,
                sigma2_hat: Some(1.02),
                elapsed: 0.031,
                clipped: false,
            },
            EstimateRecord {
                method: Method::Nv30,
                loglambda_hat: f64::NEG_INFINITY,
                theta_hat: 4.0,
                sigma2_hat: None,
                elapsed: 0.001,
                clipped: true,
            },
        ];
        let mut buf = Vec::new();
        EstimateRecord::write_csv(&records, &mut buf).unwrap();
        let back = EstimateRecord::read_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], records[0]);
        assert_eq!(back[1].loglambda_hat, f64::NEG_INFINITY);
        assert!(back[1].clipped);
    }
}
