//! Dataset loading and splitting.
//!
//! Interaction datasets are tab-separated text with a fixed header:
//! `protein_id  drug_id  protein_sequence  smiles  label`. Splitting
//! supports the protein cold-start protocol — a seeded fraction of proteins
//! is withheld from training entirely so the test set can be stratified into
//! pairs whose protein was seen during training and pairs whose protein was
//! not — plus plain k-fold over records.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

pub const DATASET_COLUMNS: [&str; 5] =
    ["protein_id", "drug_id", "protein_sequence", "smiles", "label"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub protein_id: String,
    pub drug_id: String,
    pub protein_sequence: String,
    pub smiles: String,
    pub label: u8,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty file: expected a header line")]
    MissingHeader,
    #[error("bad header: expected columns {expected:?}, got {got:?}")]
    BadHeader { expected: Vec<String>, got: Vec<String> },
    #[error("line {line}: expected {expected} tab-separated fields, got {got}")]
    FieldCount { line: usize, expected: usize, got: usize },
    #[error("line {line}: label must be 0 or 1, got {value:?}")]
    BadLabel { line: usize, value: String },
    #[error("line {line}: empty {field} field")]
    EmptyField { line: usize, field: &'static str },
    #[error("split fractions must be positive and sum to 1, got {train} / {valid} / {test}")]
    BadFractions { train: f64, valid: f64, test: f64 },
    #[error("unseen fraction must be in [0, 1), got {0}")]
    BadUnseenFraction(f64),
    #[error("need at least {needed} distinct proteins for this split, found {found}")]
    TooFewProteins { needed: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("fold count must be between 2 and the record count ({records}), got {k}")]
    BadFoldCount { k: usize, records: usize },
    #[error("fold index {index} out of range for {k} folds")]
    BadFoldIndex { index: usize, k: usize },
    #[error("line {line}: bad manifest row: {msg}")]
    BadManifest { line: usize, msg: String },
}

/// Warnings that do not stop a load (surfaced so callers can print them).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataWarning {
    HeaderOnly,
    DuplicatePair { line: usize, protein_id: String, drug_id: String },
}

impl std::fmt::Display for DataWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataWarning::HeaderOnly => {
                write!(f, "file contains a header but no records")
            }
            DataWarning::DuplicatePair { line, protein_id, drug_id } => {
                write!(f, "line {line}: duplicate pair ({protein_id}, {drug_id})")
            }
        }
    }
}

pub fn load_dataset(path: &Path) -> Result<(Vec<PairRecord>, Vec<DataWarning>), DataError> {
    let file = std::fs::File::open(path)?;
    read_dataset(BufReader::new(file))
}

/// Parse a dataset from any reader. The header line is validated against
/// [`DATASET_COLUMNS`]; every subsequent line must have exactly five fields
/// and a binary label. Errors carry 1-based line numbers.
pub fn read_dataset<R: Read>(
    reader: BufReader<R>,
) -> Result<(Vec<PairRecord>, Vec<DataWarning>), DataError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(DataError::MissingHeader),
    };
    let got: Vec<String> = header.trim_end_matches('\r').split('\t').map(str::to_string).collect();
    if got != DATASET_COLUMNS {
        return Err(DataError::BadHeader {
            expected: DATASET_COLUMNS.iter().map(|s| s.to_string()).collect(),
            got,
        });
    }

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut seen_pairs: BTreeSet<(String, String)> = BTreeSet::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2; // 1-based, after the header
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != DATASET_COLUMNS.len() {
            return Err(DataError::FieldCount {
                line: line_no,
                expected: DATASET_COLUMNS.len(),
                got: fields.len(),
            });
        }
        for (field, name) in fields.iter().zip(["protein_id", "drug_id", "protein_sequence", "smiles"]) {
            if field.is_empty() {
                return Err(DataError::EmptyField { line: line_no, field: name });
            }
        }
        let label = match fields[4] {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(DataError::BadLabel { line: line_no, value: other.to_string() })
            }
        };
        let key = (fields[0].to_string(), fields[1].to_string());
        if !seen_pairs.insert(key.clone()) {
            warnings.push(DataWarning::DuplicatePair {
                line: line_no,
                protein_id: key.0,
                drug_id: key.1,
            });
        }
        records.push(PairRecord {
            protein_id: fields[0].to_string(),
            drug_id: fields[1].to_string(),
            protein_sequence: fields[2].to_string(),
            smiles: fields[3].to_string(),
            label,
        });
    }
    if records.is_empty() {
        warnings.push(DataWarning::HeaderOnly);
    }
    Ok((records, warnings))
}

pub fn write_dataset(path: &Path, records: &[PairRecord]) -> Result<(), DataError> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", DATASET_COLUMNS.join("\t"))?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.protein_id, r.drug_id, r.protein_sequence, r.smiles, r.label
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Train,
    Valid,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Valid => "valid",
            Partition::Test => "test",
        }
    }
}

/// Record-index split with a per-record flag marking whether the record's
/// protein occurs in the training partition.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    /// indexed by record position in the original dataset
    pub protein_seen_in_train: Vec<bool>,
}

impl Split {
    pub fn partition_of(&self, index: usize) -> Option<Partition> {
        if self.train.contains(&index) {
            Some(Partition::Train)
        } else if self.valid.contains(&index) {
            Some(Partition::Valid)
        } else if self.test.contains(&index) {
            Some(Partition::Test)
        } else {
            None
        }
    }
}

/// Largest-remainder apportionment of `total` into three parts proportional
/// to the fractions. Guarantees the parts sum to `total` exactly.
fn apportion(total: usize, fractions: [f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        counts[order[i % 3]] += 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Split records so a seeded `unseen_fraction` of distinct proteins is
/// withheld from training. Withheld-protein records land in test first
/// (then valid, if test is full); remaining records are apportioned to hit
/// the requested fractions as closely as integer counts allow.
///
/// Fractions must be positive and sum to 1 (within 1e-9). Requires at least
/// two distinct proteins withheld-eligible when `unseen_fraction > 0`.
pub fn split_seen_unseen(
    records: &[PairRecord],
    fractions: (f64, f64, f64),
    unseen_fraction: f64,
    seed: u64,
) -> Result<Split, DataError> {
    let (ft, fv, fe) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fe <= 0.0 || (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(DataError::BadFractions { train: ft, valid: fv, test: fe });
    }
    if !(0.0..1.0).contains(&unseen_fraction) {
        return Err(DataError::BadUnseenFraction(unseen_fraction));
    }
    if records.is_empty() {
        return Err(DataError::EmptyDataset);
    }

    let mut proteins: Vec<&str> = records
        .iter()
        .map(|r| r.protein_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_withheld = (proteins.len() as f64 * unseen_fraction).round() as usize;
    if unseen_fraction > 0.0 {
        if proteins.len() < 2 {
            return Err(DataError::TooFewProteins { needed: 2, found: proteins.len() });
        }
        if n_withheld >= proteins.len() {
            return Err(DataError::TooFewProteins {
                needed: n_withheld + 1,
                found: proteins.len(),
            });
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    proteins.shuffle(&mut rng);
    let withheld: BTreeSet<&str> = proteins[..n_withheld].iter().copied().collect();

    let quotas = apportion(records.len(), [ft, fv, fe]);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();

    // withheld-protein records can never enter train; they are shared
    // between valid and test in proportion to those quotas so the test set
    // keeps a mix of seen and unseen proteins whenever there is room
    let mut remaining: Vec<usize> = Vec::new();
    let mut withheld_indices: Vec<usize> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if withheld.contains(r.protein_id.as_str()) {
            withheld_indices.push(i);
        } else {
            remaining.push(i);
        }
    }
    withheld_indices.shuffle(&mut rng);
    let holdout_quota = quotas[1] + quotas[2];
    let test_share = if withheld_indices.len() >= holdout_quota {
        quotas[2]
    } else {
        (withheld_indices.len() as f64 * quotas[2] as f64 / holdout_quota as f64).round()
            as usize
    };
    for (k, i) in withheld_indices.iter().copied().enumerate() {
        if k < test_share && test.len() < quotas[2] {
            test.push(i);
        } else if valid.len() < quotas[1] {
            valid.push(i);
        } else {
            // more withheld records than the holdout partitions can take:
            // test absorbs the overflow rather than leaking into train
            test.push(i);
        }
    }

    remaining.shuffle(&mut rng);
    for i in remaining {
        if train.len() < quotas[0] {
            train.push(i);
        } else if valid.len() < quotas[1] {
            valid.push(i);
        } else {
            test.push(i);
        }
    }

    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();

    let train_proteins: BTreeSet<&str> =
        train.iter().map(|&i| records[i].protein_id.as_str()).collect();
    // explicit no-leakage check: no withheld protein may reach train
    assert!(
        withheld.intersection(&train_proteins).next().is_none(),
        "withheld protein leaked into the train partition"
    );
    let protein_seen_in_train = records
        .iter()
        .map(|r| train_proteins.contains(r.protein_id.as_str()))
        .collect();

    Ok(Split { train, valid, test, protein_seen_in_train })
}

/// Deterministic k-fold assignment: a seeded shuffle of record indices dealt
/// into `k` near-equal folds. Returns `(train, held_out)` for `fold_index`.
pub fn kfold(
    n_records: usize,
    k: usize,
    fold_index: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if k < 2 || k > n_records {
        return Err(DataError::BadFoldCount { k, records: n_records });
    }
    if fold_index >= k {
        return Err(DataError::BadFoldIndex { index: fold_index, k });
    }
    let mut indices: Vec<usize> = (0..n_records).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let base = n_records / k;
    let extra = n_records % k;
    let mut start = 0usize;
    let mut held_out = Vec::new();
    let mut train = Vec::new();
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let slice = &indices[start..start + len];
        if f == fold_index {
            held_out.extend_from_slice(slice);
        } else {
            train.extend_from_slice(slice);
        }
        start += len;
    }
    train.sort_unstable();
    held_out.sort_unstable();
    Ok((train, held_out))
}

/// Serialize a split as `index<TAB>partition<TAB>seen_flag` rows, one per
/// record, ordered by index.
pub fn split_manifest(split: &Split) -> String {
    let mut rows: Vec<(usize, Partition)> = Vec::new();
    for &i in &split.train {
        rows.push((i, Partition::Train));
    }
    for &i in &split.valid {
        rows.push((i, Partition::Valid));
    }
    for &i in &split.test {
        rows.push((i, Partition::Test));
    }
    rows.sort_by_key(|&(i, _)| i);
    let mut out = String::from("index\tpartition\tseen_flag\n");
    for (i, p) in rows {
        let seen = u8::from(split.protein_seen_in_train[i]);
        out.push_str(&format!("{i}\t{}\t{seen}\n", p.as_str()));
    }
    out
}

/// Parse a manifest produced by [`split_manifest`].
pub fn parse_split_manifest(text: &str) -> Result<Split, DataError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "index\tpartition\tseen_flag")) => {}
        Some((_, other)) => {
            return Err(DataError::BadManifest {
                line: 1,
                msg: format!("unexpected header {other:?}"),
            })
        }
        None => return Err(DataError::MissingHeader),
    }
    let mut entries: Vec<(usize, Partition, bool)> = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(DataError::BadManifest {
                line: line_no,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let index: usize = fields[0].parse().map_err(|_| DataError::BadManifest {
            line: line_no,
            msg: format!("bad index {:?}", fields[0]),
        })?;
        let partition = match fields[1] {
            "train" => Partition::Train,
            "valid" => Partition::Valid,
            "test" => Partition::Test,
            other => {
                return Err(DataError::BadManifest {
                    line: line_no,
                    msg: format!("unknown partition {other:?}"),
                })
            }
        };
        let seen = match fields[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(DataError::BadManifest {
                    line: line_no,
                    msg: format!("seen_flag must be 0 or 1, got {other:?}"),
                })
            }
        };
        entries.push((index, partition, seen));
    }
    let max_index = entries.iter().map(|e| e.0).max().map_or(0, |m| m + 1);
    let mut split = Split {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
        protein_seen_in_train: vec![false; max_index],
    };
    for (index, partition, seen) in entries {
        match partition {
            Partition::Train => split.train.push(index),
            Partition::Valid => split.valid.push(index),
            Partition::Test => split.test.push(index),
        }
        split.protein_seen_in_train[index] = seen;
    }
    Ok(split)
}

/// Distinct protein ids per partition, for leakage checks and reporting.
pub fn partition_proteins<'a>(
    records: &'a [PairRecord],
    indices: &[usize],
) -> BTreeSet<&'a str> {
    indices.iter().map(|&i| records[i].protein_id.as_str()).collect()
}

/// Count records per (partition, label) — dataset balance diagnostics.
pub fn label_counts(records: &[PairRecord], indices: &[usize]) -> BTreeMap<u8, usize> {
    let mut counts = BTreeMap::new();
    for &i in indices {
        *counts.entry(records[i].label).or_insert(0) += 1;
    }
    counts
}
