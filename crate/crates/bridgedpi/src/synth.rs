//! Synthetic interaction benchmark with a known ground-truth rule.
//!
//! The generator builds a pool of random protein sequences (half of which
//! carry a fixed residue motif) and a pool of drugs drawn from two chemical
//! families (aromatic ring systems vs. purely aliphatic molecules). A pair
//! interacts exactly when the protein carries the motif AND the drug is
//! aromatic, so a perfect model exists and the dataset's Bayes AUC is 1.0.
//! Pairs are sampled from the four (motif × family) cells without
//! replacement, with quotas chosen so positives and negatives land exactly
//! 50/50.
//!
//! Everything is driven by one seed; the same config reproduces the same
//! records byte for byte.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::data::PairRecord;
use crate::protein::AMINO_ACIDS;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_records: usize,
    pub n_proteins: usize,
    pub n_drugs: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// residue motif that marks an interacting protein
    pub motif: String,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_records: 3000,
            n_proteins: 120,
            n_drugs: 100,
            min_len: 40,
            max_len: 60,
            motif: "HKW".to_string(),
            seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator configuration: {0}")]
    BadConfig(String),
    #[error("{family} drug pool has {available} entries, need {needed}")]
    PoolTooSmall { family: &'static str, needed: usize, available: usize },
    #[error("cell {cell} holds {available} distinct pairs, quota asks for {quota}")]
    QuotaExceedsCell { cell: &'static str, quota: usize, available: usize },
}

/// Aromatic drug pool: substituent prefixes attached to aromatic ring cores.
/// Every string parses with the in-crate SMILES reader and contains at least
/// one aromatic atom.
fn aromatic_pool() -> Vec<String> {
    let cores = ["c1ccccc1", "c1ccncc1", "c1ccc2ccccc2c1", "c1cncnc1"];
    let prefixes = [
        "", "C", "CC", "CCC", "CCCC", "CCCCC", "O", "N", "CO", "CN", "OC", "NC", "OCC", "NCC",
        "CC(C)", "CCO", "CCN", "COC", "CC(C)C", "C(C)C",
    ];
    let mut pool = Vec::new();
    for core in cores {
        for prefix in prefixes {
            pool.push(format!("{prefix}{core}"));
        }
    }
    pool
}

/// Aliphatic drug pool: chains, branched chains, saturated rings, and simple
/// heteroatom decorations. No aromatic atoms anywhere.
fn aliphatic_pool() -> Vec<String> {
    let mut pool: Vec<String> = Vec::new();
    for k in 2..=9usize {
        let chain = "C".repeat(k);
        pool.push(chain.clone());
        pool.push(format!("{chain}O"));
        pool.push(format!("{chain}N"));
        if k >= 3 {
            pool.push(format!("CC(C){}", "C".repeat(k - 2)));
        }
    }
    pool.extend(
        [
            "C1CCCC1", "C1CCCCC1", "C1CCCCCC1", "CC1CCCC1", "CC1CCCCC1", "CCC1CCCCC1",
            "CC1CCC(C)CC1", "OC1CCCCC1", "NC1CCCCC1", "CC(C)(C)C", "CC(C)(C)CC", "CCOCC",
            "CCNCC", "CC(=O)O", "CCC(=O)O", "CC(=O)OC", "CC(=O)N", "CCC(=O)N", "C(=O)O",
            "CC=C", "CC=CC", "CCC=C", "C#C", "CC#C", "CC#N",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    pool
}

fn random_sequence(rng: &mut ChaCha12Rng, len: usize) -> String {
    let residues = AMINO_ACIDS.as_bytes();
    (0..len)
        .map(|_| residues[rng.gen_range(0..residues.len())] as char)
        .collect()
}

/// The generated benchmark plus its ground truth, for callers that need the
/// per-entity flags (tests, stratified reporting).
#[derive(Debug)]
pub struct SynthDataset {
    pub records: Vec<PairRecord>,
    /// (id, sequence, carries_motif) per protein
    pub proteins: Vec<(String, String, bool)>,
    /// (id, smiles, is_aromatic) per drug
    pub drugs: Vec<(String, String, bool)>,
}

/// Score a record with the generating rule itself: 1 when the protein
/// carries `motif` and the drug comes from the aromatic family. Against the
/// generated labels this scores a perfect AUC — the ceiling any model can
/// reach on this benchmark.
pub fn rule_score(record: &PairRecord, motif: &str) -> f64 {
    let motif_hit = record.protein_sequence.contains(motif);
    // family membership is recoverable from the SMILES text: the pools use
    // lowercase letters only for aromatic atoms
    let aromatic = record.smiles.chars().any(|c| c.is_ascii_lowercase());
    f64::from(motif_hit && aromatic)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset, SynthError> {
    if cfg.n_records == 0 {
        return Err(SynthError::BadConfig("n_records must be positive".into()));
    }
    if cfg.n_proteins < 2 || cfg.n_proteins % 2 != 0 {
        return Err(SynthError::BadConfig(format!(
            "n_proteins must be even and at least 2, got {}",
            cfg.n_proteins
        )));
    }
    if cfg.n_drugs < 2 || cfg.n_drugs % 2 != 0 {
        return Err(SynthError::BadConfig(format!(
            "n_drugs must be even and at least 2, got {}",
            cfg.n_drugs
        )));
    }
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(SynthError::BadConfig(format!(
            "bad length range {}..={}",
            cfg.min_len, cfg.max_len
        )));
    }
    if cfg.motif.is_empty() || !cfg.motif.bytes().all(|b| AMINO_ACIDS.bytes().any(|a| a == b)) {
        return Err(SynthError::BadConfig(format!(
            "motif {:?} must be non-empty canonical residues",
            cfg.motif
        )));
    }
    if cfg.motif.len() > cfg.min_len {
        return Err(SynthError::BadConfig("motif longer than the shortest protein".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    // --- proteins: first half carry the motif, second half never do
    let n_motif = cfg.n_proteins / 2;
    let mut proteins = Vec::with_capacity(cfg.n_proteins);
    for i in 0..cfg.n_proteins {
        let with_motif = i < n_motif;
        let seq = loop {
            let len = rng.gen_range(cfg.min_len..=cfg.max_len);
            let mut seq = random_sequence(&mut rng, len);
            if with_motif {
                let pos = rng.gen_range(0..=len - cfg.motif.len());
                seq.replace_range(pos..pos + cfg.motif.len(), &cfg.motif);
                break seq;
            }
            if !seq.contains(&cfg.motif) {
                break seq;
            }
            // rare accidental motif: resample
        };
        proteins.push((format!("P{i:04}"), seq, with_motif));
    }

    // --- drugs: half aromatic, half aliphatic, drawn in pool order
    let n_half = cfg.n_drugs / 2;
    let aromatic = aromatic_pool();
    let aliphatic = aliphatic_pool();
    if aromatic.len() < n_half {
        return Err(SynthError::PoolTooSmall {
            family: "aromatic",
            needed: n_half,
            available: aromatic.len(),
        });
    }
    if aliphatic.len() < n_half {
        return Err(SynthError::PoolTooSmall {
            family: "aliphatic",
            needed: n_half,
            available: aliphatic.len(),
        });
    }
    let mut drugs = Vec::with_capacity(cfg.n_drugs);
    for (i, smiles) in aromatic[..n_half].iter().enumerate() {
        drugs.push((format!("D{i:04}"), smiles.clone(), true));
    }
    for (i, smiles) in aliphatic[..n_half].iter().enumerate() {
        drugs.push((format!("D{:04}", n_half + i), smiles.clone(), false));
    }

    // --- pairs: positives from the (motif, aromatic) cell; negatives split
    // near-equally across the other three cells
    let n_pos = cfg.n_records / 2;
    let n_neg = cfg.n_records - n_pos;
    let neg_base = n_neg / 3;
    let neg_quotas = [
        neg_base + usize::from(n_neg % 3 > 0),
        neg_base + usize::from(n_neg % 3 > 1),
        neg_base,
    ];

    let motif_ids: Vec<usize> = (0..n_motif).collect();
    let plain_ids: Vec<usize> = (n_motif..cfg.n_proteins).collect();
    let aromatic_ids: Vec<usize> = (0..n_half).collect();
    let aliphatic_ids: Vec<usize> = (n_half..cfg.n_drugs).collect();

    let sample_cell = |cell: &'static str,
                           prot_ids: &[usize],
                           drug_ids: &[usize],
                           quota: usize,
                           label: u8,
                           rng: &mut ChaCha12Rng|
     -> Result<Vec<PairRecord>, SynthError> {
        let mut cross: Vec<(usize, usize)> = prot_ids
            .iter()
            .flat_map(|&p| drug_ids.iter().map(move |&d| (p, d)))
            .collect();
        if quota > cross.len() {
            return Err(SynthError::QuotaExceedsCell { cell, quota, available: cross.len() });
        }
        cross.shuffle(rng);
        Ok(cross[..quota]
            .iter()
            .map(|&(p, d)| PairRecord {
                protein_id: proteins[p].0.clone(),
                drug_id: drugs[d].0.clone(),
                protein_sequence: proteins[p].1.clone(),
                smiles: drugs[d].1.clone(),
                label,
            })
            .collect())
    };

    let mut records = Vec::with_capacity(cfg.n_records);
    records.extend(sample_cell("motif x aromatic", &motif_ids, &aromatic_ids, n_pos, 1, &mut rng)?);
    records.extend(sample_cell(
        "motif x aliphatic",
        &motif_ids,
        &aliphatic_ids,
        neg_quotas[0],
        0,
        &mut rng,
    )?);
    records.extend(sample_cell(
        "plain x aromatic",
        &plain_ids,
        &aromatic_ids,
        neg_quotas[1],
        0,
        &mut rng,
    )?);
    records.extend(sample_cell(
        "plain x aliphatic",
        &plain_ids,
        &aliphatic_ids,
        neg_quotas[2],
        0,
        &mut rng,
    )?);

    // interleave the cells so file order carries no label signal
    records.shuffle(&mut rng);

    Ok(SynthDataset { records, proteins, drugs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use crate::chem::parse_smiles;
    use crate::metrics::roc_auc;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            n_records: 120,
            n_proteins: 20,
            n_drugs: 16,
            seed: 7,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&small_cfg()).unwrap();
        let b = generate(&small_cfg()).unwrap();
        assert_eq!(a.records, b.records);
        let c = generate(&SynthConfig { seed: 8, ..small_cfg() }).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn labels_are_exactly_balanced() {
        let data = generate(&small_cfg()).unwrap();
        let pos = data.records.iter().filter(|r| r.label == 1).count();
        assert_eq!(pos, 60);
        assert_eq!(data.records.len(), 120);
    }

    #[test]
    fn every_drug_parses_and_families_are_honest() {
        let data = generate(&small_cfg()).unwrap();
        for (id, smiles, is_aromatic) in &data.drugs {
            let mol = parse_smiles(smiles).unwrap_or_else(|e| panic!("{id} ({smiles}): {e}"));
            let has_aromatic = mol.atoms.iter().any(|a| a.aromatic);
            assert_eq!(has_aromatic, *is_aromatic, "{id} ({smiles})");
        }
    }

    #[test]
    fn full_pools_parse() {
        for smiles in aromatic_pool().iter().chain(aliphatic_pool().iter()) {
            let mol = parse_smiles(smiles).unwrap_or_else(|e| panic!("{smiles}: {e}"));
            assert!(!mol.atoms.is_empty());
        }
        // pools contain no duplicates
        let aromatic = aromatic_pool();
        let unique: BTreeSet<&String> = aromatic.iter().collect();
        assert_eq!(unique.len(), aromatic.len());
        let aliphatic = aliphatic_pool();
        let unique: BTreeSet<&String> = aliphatic.iter().collect();
        assert_eq!(unique.len(), aliphatic.len());
    }

    #[test]
    fn labels_follow_the_generating_rule() {
        let cfg = small_cfg();
        let data = generate(&cfg).unwrap();
        for r in &data.records {
            let motif_hit = r.protein_sequence.contains(&cfg.motif);
            let aromatic = parse_smiles(&r.smiles).unwrap().atoms.iter().any(|a| a.aromatic);
            assert_eq!(r.label, u8::from(motif_hit && aromatic));
            assert_eq!(rule_score(r, &cfg.motif), f64::from(r.label));
        }
    }

    #[test]
    fn plain_proteins_never_contain_the_motif() {
        let cfg = small_cfg();
        let data = generate(&cfg).unwrap();
        for (_, seq, with_motif) in &data.proteins {
            assert_eq!(seq.contains(&cfg.motif), *with_motif);
            assert!(seq.len() >= cfg.min_len && seq.len() <= cfg.max_len);
        }
    }

    #[test]
    fn rule_scores_reach_perfect_auc() {
        let cfg = small_cfg();
        let data = generate(&cfg).unwrap();
        let scores: Vec<f64> = data.records.iter().map(|r| rule_score(r, &cfg.motif)).collect();
        let labels: Vec<u8> = data.records.iter().map(|r| r.label).collect();
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!((auc - 1.0).abs() < 1e-12, "rule AUC {auc}");
    }

    #[test]
    fn no_duplicate_pairs() {
        let data = generate(&SynthConfig { n_records: 3000, ..SynthConfig::default() }).unwrap();
        let pairs: BTreeSet<(&str, &str)> = data
            .records
            .iter()
            .map(|r| (r.protein_id.as_str(), r.drug_id.as_str()))
            .collect();
        assert_eq!(pairs.len(), data.records.len());
    }

    #[test]
    fn oversized_quota_is_rejected() {
        let err = generate(&SynthConfig {
            n_records: 1000,
            n_proteins: 4,
            n_drugs: 4,
            ..SynthConfig::default()
        })
        .unwrap_err();
        assert!(matches!(err, SynthError::QuotaExceedsCell { .. }));
    }
}
