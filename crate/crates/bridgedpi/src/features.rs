//! Turning raw dataset records into model inputs.
//!
//! Proteins map to a normalized residue k-mer profile plus a padded token
//! sequence; drugs map to a folded circular-substructure fingerprint plus a
//! padded SMILES character sequence. Datasets repeat the same protein and
//! drug across many pairs, so featurization is cached per id and the cached
//! buffers are shared (`Arc`) across every pair that uses them.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::chem::{morgan_fingerprint, parse_smiles};
use crate::data::PairRecord;
use crate::model::{ModelConfig, PairInput};
use crate::protein::{block_normalize, kmer_features, ProteinError};
use crate::tokens;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("protein {id}: {source}")]
    Protein { id: String, source: ProteinError },
    #[error("drug {id}: cannot parse SMILES {smiles:?}: {msg}")]
    Smiles { id: String, smiles: String, msg: String },
    #[error("drug {id}: fingerprint failed: {msg}")]
    Fingerprint { id: String, msg: String },
}

/// Featurization context: tokenizer vocabularies plus per-id caches.
pub struct Featurizer {
    config: ModelConfig,
    protein_vocab: tokens::Vocabulary,
    smiles_vocab: tokens::Vocabulary,
    proteins: BTreeMap<String, (Arc<Vec<f64>>, Arc<Vec<usize>>)>,
    drugs: BTreeMap<String, (Arc<Vec<f64>>, Arc<Vec<usize>>)>,
}

impl Featurizer {
    pub fn new(config: ModelConfig) -> Self {
        Featurizer {
            config,
            protein_vocab: tokens::protein_vocabulary(),
            smiles_vocab: tokens::smiles_vocabulary(),
            proteins: BTreeMap::new(),
            drugs: BTreeMap::new(),
        }
    }

    /// Use explicit vocabularies (restoring from a checkpoint, where the
    /// stored character sets are authoritative).
    pub fn with_vocabs(
        config: ModelConfig,
        protein_vocab: tokens::Vocabulary,
        smiles_vocab: tokens::Vocabulary,
    ) -> Self {
        Featurizer {
            config,
            protein_vocab,
            smiles_vocab,
            proteins: BTreeMap::new(),
            drugs: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Featurize one protein (cached by id): normalized k-mer profile plus
    /// padded token ids.
    pub fn protein_features(
        &mut self,
        id: &str,
        sequence: &str,
    ) -> Result<(Arc<Vec<f64>>, Arc<Vec<usize>>), FeatureError> {
        if let Some(hit) = self.proteins.get(id) {
            return Ok(hit.clone());
        }
        let raw = kmer_features(sequence)
            .map_err(|source| FeatureError::Protein { id: id.to_string(), source })?;
        let kmer = Arc::new(block_normalize(&raw));
        let ids: Vec<usize> =
            tokens::encode_sequence(sequence, self.config.protein_max_len, &self.protein_vocab)
                .into_iter()
                .map(|t| t as usize)
                .collect();
        let entry = (kmer, Arc::new(ids));
        self.proteins.insert(id.to_string(), entry.clone());
        Ok(entry)
    }

    /// Featurize one drug (cached by id): fingerprint bits plus padded
    /// SMILES token ids.
    pub fn drug_features(
        &mut self,
        id: &str,
        smiles: &str,
    ) -> Result<(Arc<Vec<f64>>, Arc<Vec<usize>>), FeatureError> {
        if let Some(hit) = self.drugs.get(id) {
            return Ok(hit.clone());
        }
        let mol = parse_smiles(smiles).map_err(|e| FeatureError::Smiles {
            id: id.to_string(),
            smiles: smiles.to_string(),
            msg: e.to_string(),
        })?;
        let fp = morgan_fingerprint(
            &mol,
            self.config.fingerprint_radius,
            self.config.fingerprint_bits,
        )
        .map_err(|e| FeatureError::Fingerprint { id: id.to_string(), msg: e.to_string() })?;
        let ids: Vec<usize> =
            tokens::encode_sequence(smiles, self.config.drug_max_len, &self.smiles_vocab)
                .into_iter()
                .map(|t| t as usize)
                .collect();
        let entry = (Arc::new(fp.to_f64()), Arc::new(ids));
        self.drugs.insert(id.to_string(), entry.clone());
        Ok(entry)
    }

    /// Model input for one record. Identical protein/drug ids share buffers.
    pub fn featurize(&mut self, record: &PairRecord) -> Result<PairInput, FeatureError> {
        let (kmer, protein_tokens) =
            self.protein_features(&record.protein_id, &record.protein_sequence)?;
        let (fp, drug_tokens) = self.drug_features(&record.drug_id, &record.smiles)?;
        Ok(PairInput { kmer, protein_tokens, fp, drug_tokens })
    }

    /// Featurize a whole dataset, pairing inputs with labels. Fails on the
    /// first bad record, naming the entity that broke.
    pub fn featurize_all(
        &mut self,
        records: &[PairRecord],
    ) -> Result<Vec<(PairInput, u8)>, FeatureError> {
        records
            .iter()
            .map(|r| Ok((self.featurize(r)?, r.label)))
            .collect()
    }

    /// Featurize records, skipping failures. Returns the kept (input, label,
    /// original index) triples and a description of each skipped record.
    pub fn featurize_lossy(
        &mut self,
        records: &[PairRecord],
    ) -> (Vec<(PairInput, u8, usize)>, Vec<String>) {
        let mut kept = Vec::new();
        let mut skipped = Vec::new();
        for (i, r) in records.iter().enumerate() {
            match self.featurize(r) {
                Ok(input) => kept.push((input, r.label, i)),
                Err(e) => skipped.push(format!("record {i}: {e}")),
            }
        }
        (kept, skipped)
    }

    pub fn cache_sizes(&self) -> (usize, usize) {
        (self.proteins.len(), self.drugs.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protein::KMER_DIM;

    fn record(pid: &str, did: &str, seq: &str, smiles: &str) -> PairRecord {
        PairRecord {
            protein_id: pid.into(),
            drug_id: did.into(),
            protein_sequence: seq.into(),
            smiles: smiles.into(),
            label: 1,
        }
    }

    #[test]
    fn featurizes_a_valid_record() {
        let cfg = ModelConfig::default();
        let mut f = Featurizer::new(cfg.clone());
        let input = f.featurize(&record("P1", "D1", "MKVAAAL", "CCO")).unwrap();
        assert_eq!(input.kmer.len(), KMER_DIM);
        assert_eq!(input.protein_tokens.len(), cfg.protein_max_len);
        assert_eq!(input.fp.len(), cfg.fingerprint_bits);
        assert_eq!(input.drug_tokens.len(), cfg.drug_max_len);
        assert!(input.fp.iter().all(|&b| b == 0.0 || b == 1.0));
        assert!(input.fp.iter().any(|&b| b == 1.0));
    }

    #[test]
    fn repeated_ids_share_buffers() {
        let mut f = Featurizer::new(ModelConfig::default());
        let a = f.featurize(&record("P1", "D1", "MKVAAAL", "CCO")).unwrap();
        let b = f.featurize(&record("P1", "D2", "MKVAAAL", "c1ccccc1")).unwrap();
        assert!(Arc::ptr_eq(&a.kmer, &b.kmer));
        assert!(!Arc::ptr_eq(&a.fp, &b.fp));
        assert_eq!(f.cache_sizes(), (1, 2));
    }

    #[test]
    fn bad_smiles_names_the_drug() {
        let mut f = Featurizer::new(ModelConfig::default());
        let err = f.featurize(&record("P1", "D9", "MKV", "C1CC")).unwrap_err();
        match err {
            FeatureError::Smiles { id, .. } => assert_eq!(id, "D9"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_sequence_names_the_protein() {
        let mut f = Featurizer::new(ModelConfig::default());
        let err = f.featurize(&record("P7", "D1", "", "CCO")).unwrap_err();
        assert!(matches!(err, FeatureError::Protein { id, .. } if id == "P7"));
    }

    #[test]
    fn lossy_featurization_skips_and_reports() {
        let mut f = Featurizer::new(ModelConfig::default());
        let records = vec![
            record("P1", "D1", "MKV", "CCO"),
            record("P2", "D2", "MKV", "C1CC"), // unclosed ring
            record("P3", "D3", "MKV", "CC"),
        ];
        let (kept, skipped) = f.featurize_lossy(&records);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].2, 0);
        assert_eq!(kept[1].2, 2);
        assert_eq!(skipped.len(), 1);
        assert!(skipped[0].contains("record 1"));
    }

    #[test]
    fn token_ids_stay_inside_the_vocabulary() {
        let cfg = ModelConfig::default();
        let mut f = Featurizer::new(cfg.clone());
        let input = f
            .featurize(&record("P1", "D1", "MKVXXXZ", "CC(=O)Oc1ccccc1C(=O)O"))
            .unwrap();
        assert!(input.protein_tokens.iter().all(|&t| t < cfg.protein_vocab_size));
        assert!(input.drug_tokens.iter().all(|&t| t < cfg.smiles_vocab_size));
    }
}
