//! Protein k-mer featurization: overlapping 1/2/3-mer counts over the
//! canonical 20-letter alphabet, concatenated into one 8420-dimensional
//! vector, plus the per-block standardization applied before the projection
//! stack.

use thiserror::Error;

/// Canonical residues, in the order that defines every k-mer index.
pub const AMINO_ACIDS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// 1-mer block width.
pub const KMER_BLOCK_1: usize = 20;
/// 2-mer block width.
pub const KMER_BLOCK_2: usize = 400;
/// 3-mer block width.
pub const KMER_BLOCK_3: usize = 8000;
/// Total k-mer feature width.
pub const KMER_DIM: usize = KMER_BLOCK_1 + KMER_BLOCK_2 + KMER_BLOCK_3;

/// Constant blocks (population std below this) normalize to all zeros.
pub const ZERO_VARIANCE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProteinError {
    #[error("empty protein sequence")]
    EmptySequence,
}

/// Index of a canonical residue in [`AMINO_ACIDS`], `None` for anything else
/// (nonstandard letters such as B, J, O, U, X, Z are skipped, case-exactly).
fn residue_index(c: u8) -> Option<usize> {
    AMINO_ACIDS.bytes().position(|a| a == c)
}

/// Overlapping k-mer counts (k = 1, 2, 3) of a residue string.
///
/// The output has the 1-mer block at `[0, 20)`, the 2-mer block at
/// `[20, 420)`, and the 3-mer block at `[420, 8420)`, each ordered
/// lexicographically by [`AMINO_ACIDS`]. Any k-mer window containing a
/// nonstandard letter contributes nothing.
pub fn kmer_features(sequence: &str) -> Result<Vec<f64>, ProteinError> {
    if sequence.is_empty() {
        return Err(ProteinError::EmptySequence);
    }
    let idx: Vec<Option<usize>> = sequence.bytes().map(residue_index).collect();
    let mut out = vec![0.0; KMER_DIM];
    for w in idx.windows(1) {
        if let [Some(a)] = w {
            out[*a] += 1.0;
        }
    }
    for w in idx.windows(2) {
        if let [Some(a), Some(b)] = w {
            out[KMER_BLOCK_1 + a * 20 + b] += 1.0;
        }
    }
    for w in idx.windows(3) {
        if let [Some(a), Some(b), Some(c)] = w {
            out[KMER_BLOCK_1 + KMER_BLOCK_2 + a * 400 + b * 20 + c] += 1.0;
        }
    }
    Ok(out)
}

/// Standardize each k-mer block independently to mean 0 and population
/// standard deviation 1; blocks with (near-)zero variance become all zeros.
pub fn block_normalize(raw: &[f64]) -> Vec<f64> {
    assert_eq!(raw.len(), KMER_DIM, "k-mer vector has wrong length");
    let mut out = vec![0.0; KMER_DIM];
    let bounds = [0, KMER_BLOCK_1, KMER_BLOCK_1 + KMER_BLOCK_2, KMER_DIM];
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let block = &raw[lo..hi];
        let n = block.len() as f64;
        let mean = block.iter().sum::<f64>() / n;
        let var = block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std < ZERO_VARIANCE_EPS {
            continue; // constant block stays all-zero
        }
        for (o, v) in out[lo..hi].iter_mut().zip(block) {
            *o = (v - mean) / std;
        }
    }
    out
}
