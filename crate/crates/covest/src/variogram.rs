//! Exact-lag empirical variograms of gridded fields.
//!
//! Lags are the distinct pairwise site distances of the geometry (no
//! binning); a 16×16 grid has exactly 119 of them. Accumulation order is
//! canonicalized by first reducing the field to a distinguished member
//! of its flip/rotation orbit, so the variogram of a dihedral transform
//! is bit-identical to the original's.

use crate::error::{Error, Result};
use crate::gp::{FieldStack, GridGeometry};

/// The distinct pairwise distances of a geometry, ascending, with the
/// number of unordered site pairs at each.
#[derive(Debug, Clone, PartialEq)]
pub struct LagTable {
    geometry: GridGeometry,
    /// Collision-free integer keys dx² + dy², ascending.
    squared_lags: Vec<u64>,
    distances: Vec<f64>,
    pair_counts: Vec<u64>,
    /// Grid offsets (dx, dy) with dy > 0 or (dy = 0, dx > 0), each
    /// tagged with its lag index. Every unordered site pair is realized
    /// by exactly one offset.
    offsets: Vec<(isize, usize, usize)>,
}

impl LagTable {
    /// Enumerate the lag structure of a geometry. Requires n ≥ 2.
    pub fn new(geom: &GridGeometry) -> Result<Self> {
        if geom.n() < 2 {
            return Err(Error::domain("lag table needs at least two sites"));
        }
        let h = geom.height();
        let w = geom.width();

        let mut sq_set: Vec<u64> = Vec::new();
        let mut raw_offsets: Vec<(isize, usize, u64)> = Vec::new();
        for dy in 0..h {
            for dx in -(w as isize - 1)..w as isize {
                if dy == 0 && dx <= 0 {
                    continue;
                }
                let sq = (dx * dx) as u64 + (dy * dy) as u64;
                raw_offsets.push((dx, dy, sq));
                sq_set.push(sq);
            }
        }
        sq_set.sort_unstable();
        sq_set.dedup();

        let index_of = |sq: u64| sq_set.binary_search(&sq).expect("lag key present");
        let mut pair_counts = vec![0u64; sq_set.len()];
        let mut offsets = Vec::with_capacity(raw_offsets.len());
        for (dx, dy, sq) in raw_offsets {
            let idx = index_of(sq);
            let pairs = (h - dy) as u64 * (w - dx.unsigned_abs()) as u64;
            pair_counts[idx] += pairs;
            offsets.push((dx, dy, idx));
        }

        let distances = sq_set
            .iter()
            .map(|&sq| geom.spacing() * (sq as f64).sqrt())
            .collect();
        Ok(Self {
            geometry: *geom,
            squared_lags: sq_set,
            distances,
            pair_counts,
            offsets,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// Number of distinct lags L.
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn squared_lags(&self) -> &[u64] {
        &self.squared_lags
    }

    pub fn pair_counts(&self) -> &[u64] {
        &self.pair_counts
    }

    /// Total number of unordered site pairs: n(n−1)/2.
    pub fn total_pairs(&self) -> u64 {
        self.pair_counts.iter().sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "distance,pair_count")?;
        for (d, c) in self.distances.iter().zip(&self.pair_counts) {
            writeln!(w, "{d},{c}")?;
        }
        Ok(())
    }
}

/// Semivariances of one field, ordered as its `LagTable`.
#[derive(Debug, Clone, PartialEq)]
pub struct Variogram {
    pub semivariances: Vec<f64>,
}

impl Variogram {
    pub fn len(&self) -> usize {
        self.semivariances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semivariances.is_empty()
    }
}

/// The eight dihedral images of a square grid, or the four flips of a
/// rectangular one; index 0 is the identity.
fn orbit_images(values: &[f64], h: usize, w: usize) -> Vec<Vec<f64>> {
    let at = |r: usize, c: usize| values[r * w + c];
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(8);
    images.push(values.to_vec());
    // horizontal flip (columns reversed)
    images.push((0..h * w).map(|i| at(i / w, w - 1 - i % w)).collect());
    // vertical flip
    images.push((0..h * w).map(|i| at(h - 1 - i / w, i % w)).collect());
    // 180° rotation
    images.push(
        (0..h * w)
            .map(|i| at(h - 1 - i / w, w - 1 - i % w))
            .collect(),
    );
    if h == w {
        // transpose, 90°, 270°, anti-transpose
        images.push((0..h * w).map(|i| at(i % w, i / w)).collect());
        images.push((0..h * w).map(|i| at(w - 1 - i % w, i / w)).collect());
        images.push((0..h * w).map(|i| at(i % w, h - 1 - i / w)).collect());
        images.push(
            (0..h * w)
                .map(|i| at(w - 1 - i % w, h - 1 - i / w))
                .collect(),
        );
    }
    images
}

/// Lexicographically smallest member of the dihedral orbit of a field.
/// Variograms are computed on this representative, which makes them
/// bit-identical across the whole orbit.
fn canonical_orientation(values: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut images = orbit_images(values, h, w);
    let mut best = 0usize;
    for i in 1..images.len() {
        let less = {
            let (a, b) = (&images[i], &images[best]);
            a.iter()
                .zip(b.iter())
                .find_map(|(x, y)| match x.total_cmp(y) {
                    std::cmp::Ordering::Equal => None,
                    ord => Some(ord),
                })
                .unwrap_or(std::cmp::Ordering::Equal)
                == std::cmp::Ordering::Less
        };
        if less {
            best = i;
        }
    }
    images.swap_remove(best)
}

/// Empirical semivariogram of a single-replicate field:
/// γ(h) = Σ (yᵢ − yⱼ)² / (2·N_h) over the unordered pairs at lag h.
pub fn empirical_variogram(y: &FieldStack, table: &LagTable) -> Result<Variogram> {
    if y.geometry() != table.geometry() {
        return Err(Error::input("field geometry does not match the lag table"));
    }
    if y.replicates() != 1 {
        return Err(Error::input(
            "empirical_variogram takes a single replicate; use variogram_stack",
        ));
    }
    Ok(variogram_of_slice(y.replicate(0), table))
}

pub(crate) fn variogram_of_slice(values: &[f64], table: &LagTable) -> Variogram {
    let h = table.geometry.height();
    let w = table.geometry.width();
    let canon = canonical_orientation(values, h, w);

    let mut sums = vec![0.0f64; table.len()];
    for &(dx, dy, lag) in &table.offsets {
        let (c0, c1) = if dx >= 0 {
            (0usize, w - dx as usize)
        } else {
            ((-dx) as usize, w)
        };
        let mut s = 0.0;
        for r in 0..h - dy {
            let row_a = &canon[r * w..(r + 1) * w];
            let row_b = &canon[(r + dy) * w..(r + dy + 1) * w];
            for c in c0..c1 {
                let d = row_a[c] - row_b[(c as isize + dx) as usize];
                s += d * d;
            }
        }
        sums[lag] += s;
    }
    let semivariances = sums
        .iter()
        .zip(&table.pair_counts)
        .map(|(s, &c)| s / (2.0 * c as f64))
        .collect();
    Variogram { semivariances }
}

/// Variograms of all replicates of a stack as R rows of L semivariances.
pub fn variogram_stack(ys: &FieldStack, table: &LagTable) -> Result<Vec<Vec<f64>>> {
    if ys.geometry() != table.geometry() {
        return Err(Error::input("field geometry does not match the lag table"));
    }
    Ok((0..ys.replicates())
        .map(|r| variogram_of_slice(ys.replicate(r), table).semivariances)
        .collect())
}
