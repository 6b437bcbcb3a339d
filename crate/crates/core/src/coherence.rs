//! Coherence and inter-atom-interference (IAI) diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot_h, ComplexMatrix};

/// Mutual incoherence: the largest `|φ_iᴴ φ_j|` over distinct unit columns.
pub fn mip(m: &ComplexMatrix) -> Result<f64> {
    if m.cols() < 2 {
        return Err(Error::ShapeMismatch("mip needs at least two columns".into()));
    }
    m.check_unit_columns()?;
    Ok(upper_triangle_max(m))
}

#[cfg(feature = "parallel")]
fn upper_triangle_max(m: &ComplexMatrix) -> f64 {
    use rayon::prelude::*;
    (0..m.cols())
        .into_par_iter()
        .map(|i| row_max(m, i))
        .reduce(|| 0.0, f64::max)
}

#[cfg(not(feature = "parallel"))]
fn upper_triangle_max(m: &ComplexMatrix) -> f64 {
    (0..m.cols()).map(|i| row_max(m, i)).fold(0.0, f64::max)
}

fn row_max(m: &ComplexMatrix, i: usize) -> f64 {
    let a = m.column(i);
    (i + 1..m.cols())
        .map(|j| dot_h(a, m.column(j)).norm())
        .fold(0.0, f64::max)
}

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// `bins` equal bins over `[0, upper]`; values above `upper` land in the last bin.
    pub fn new(values: &[f64], bins: usize, upper: f64) -> Self {
        assert!(bins >= 1 && upper > 0.0);
        let width = upper / bins as f64;
        let edges = (0..=bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = ((v / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub const IAI_BINS: usize = 50;

/// Correlation statistics of a sensing matrix `W` against one or more blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IaiReport {
    /// `min |(Wᴴ Φ_d)_{l,l}|` over blocks and cells.
    pub diag_min: f64,
    /// `max |(Wᴴ Φ_d)_{k,l}|`, `k ≠ l`, over blocks.
    pub offdiag_max: f64,
    pub per_block_offdiag_max: Vec<f64>,
    pub diag_histogram: Histogram,
    pub offdiag_histogram: Histogram,
}

/// IAI statistics of `w` against a single block.
pub fn iai_stats(w: &ComplexMatrix, block: &ComplexMatrix) -> Result<IaiReport> {
    iai_report(w, std::slice::from_ref(block))
}

/// IAI statistics of `w` against every block, with histograms of all diagonal
/// and off-diagonal magnitudes.
pub fn iai_report(w: &ComplexMatrix, blocks: &[ComplexMatrix]) -> Result<IaiReport> {
    if blocks.is_empty() {
        return Err(Error::ShapeMismatch("no blocks".into()));
    }
    let mut diag = Vec::new();
    let mut off = Vec::new();
    let mut per_block = Vec::with_capacity(blocks.len());
    for b in blocks {
        if b.shape() != w.shape() {
            return Err(Error::ShapeMismatch(format!(
                "W is {:?}, block is {:?}",
                w.shape(),
                b.shape()
            )));
        }
        let mut block_max: f64 = 0.0;
        for l in 0..b.cols() {
            let phi = b.column(l);
            for k in 0..w.cols() {
                let v = dot_h(w.column(k), phi).norm();
                if k == l {
                    diag.push(v);
                } else {
                    block_max = block_max.max(v);
                    off.push(v);
                }
            }
        }
        per_block.push(block_max);
    }
    let diag_min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let offdiag_max = per_block.iter().copied().fold(0.0, f64::max);
    let upper = diag
        .iter()
        .chain(&off)
        .copied()
        .fold(1.0, f64::max);
    Ok(IaiReport {
        diag_min,
        offdiag_max,
        per_block_offdiag_max: per_block,
        diag_histogram: Histogram::new(&diag, IAI_BINS, upper),
        offdiag_histogram: Histogram::new(&off, IAI_BINS, upper),
    })
}

/// Coherence figures of a block dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCoherence {
    /// Mutual incoherence of the whole dictionary.
    pub mip: f64,
    /// Largest `|φ_{d,k}ᴴ φ_{d',l}|` with `d ≠ d'` and `k ≠ l`: interference
    /// between atoms that differ in both mechanism and range cell.
    pub mixed_block_max: f64,
    /// Smallest `|φ_{d,l}ᴴ φ_{d',l}|` with `d ≠ d'`: how similar two mechanisms
    /// look in the same range cell. This is one reading of the "IAI minimum"
    /// of the original dictionary; it is an interpretation, not a definition.
    pub cross_mechanism_diag_min: f64,
    /// Largest `|φ_{d,l}ᴴ φ_{d',l}|` with `d ≠ d'`.
    pub cross_mechanism_diag_max: f64,
}
// The three cross-block fields are NaN when there is a single mechanism.

pub fn block_coherence(blocks: &[ComplexMatrix]) -> Result<BlockCoherence> {
    let all = ComplexMatrix::hstack(blocks)?;
    let mip = mip(&all)?;
    let cells = blocks[0].cols();
    if blocks.iter().any(|b| b.cols() != cells) {
        return Err(Error::ShapeMismatch("blocks differ in column count".into()));
    }
    let mut mixed: f64 = 0.0;
    let mut dmin = f64::INFINITY;
    let mut dmax: f64 = 0.0;
    for (d, a) in blocks.iter().enumerate() {
        for b in &blocks[d + 1..] {
            for k in 0..cells {
                for l in 0..cells {
                    let v = dot_h(a.column(k), b.column(l)).norm();
                    if k == l {
                        dmin = dmin.min(v);
                        dmax = dmax.max(v);
                    } else {
                        mixed = mixed.max(v);
                    }
                }
            }
        }
    }
    if blocks.len() < 2 {
        mixed = f64::NAN;
        dmin = f64::NAN;
        dmax = f64::NAN;
    }
    Ok(BlockCoherence {
        mip,
        mixed_block_max: mixed,
        cross_mechanism_diag_min: dmin,
        cross_mechanism_diag_max: dmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{normalize_columns, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        normalize_columns(&ComplexMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }))
        .unwrap()
    }

    #[test]
    fn mip_trivial_cases() {
        assert!(mip(&ComplexMatrix::identity(4)).unwrap() < 1e-15);
        let a = random_unit(5, 1, 1);
        let twice = ComplexMatrix::hstack(&[a.clone(), a]).unwrap();
        assert!((mip(&twice).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mip_requires_unit_columns() {
        let m = ComplexMatrix::from_fn(3, 2, |_, _| C64::new(1.0, 0.0));
        assert!(matches!(mip(&m), Err(Error::NotNormalized { column: 0, .. })));
    }

    #[test]
    fn mip_invariant_to_permutation_and_phase() {
        let m = random_unit(6, 9, 2);
        let base = mip(&m).unwrap();
        let perm = [4, 0, 8, 2, 7, 1, 3, 6, 5];
        let shuffled = m.select_columns(&perm);
        assert!((mip(&shuffled).unwrap() - base).abs() < 1e-14);
        let rotated = ComplexMatrix::from_fn(6, 9, |r, c| m.get(r, c) * C64::from_polar(1.0, 0.3 * c as f64));
        assert!((mip(&rotated).unwrap() - base).abs() < 1e-14);
    }

    #[test]
    fn iai_trivial_cases() {
        let id = ComplexMatrix::identity(5);
        let r = iai_stats(&id, &id).unwrap();
        assert!((r.diag_min - 1.0).abs() < 1e-15);
        assert!(r.offdiag_max < 1e-15);

        let m = random_unit(7, 4, 3);
        let r = iai_stats(&m, &m).unwrap();
        assert!((r.diag_min - 1.0).abs() < 1e-12);
        assert_eq!(r.diag_histogram.total(), 4);
        assert_eq!(r.offdiag_histogram.total(), 12);
    }

    #[test]
    fn iai_shape_mismatch() {
        let a = random_unit(4, 3, 1);
        let b = random_unit(4, 2, 1);
        assert!(iai_stats(&a, &b).is_err());
    }

    #[test]
    fn block_coherence_splits_pairs() {
        let a = random_unit(6, 4, 10);
        let b = random_unit(6, 4, 11);
        let bc = block_coherence(&[a.clone(), b.clone()]).unwrap();
        let mut diag_min = f64::INFINITY;
        let mut mixed: f64 = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                let v = dot_h(a.column(k), b.column(l)).norm();
                if k == l {
                    diag_min = diag_min.min(v);
                } else {
                    mixed = mixed.max(v);
                }
            }
        }
        assert_eq!(bc.cross_mechanism_diag_min, diag_min);
        assert_eq!(bc.mixed_block_max, mixed);
        assert!(bc.mip >= mixed);
    }
}
