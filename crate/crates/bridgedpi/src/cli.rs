//! Command-line interface: train, eval, predict, sweep, featurize, and
//! make-synthetic subcommands.
//!
//! Exit codes are a stable contract: 0 success, 2 usage error (bad flags,
//! missing or contradictory arguments), 1 runtime error (bad data, failed
//! training, I/O). Every command is reproducible under a fixed seed.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use crate::config::RunConfig;
use crate::data::{self, PairRecord, Split};
use crate::features::Featurizer;
use crate::metrics::EvalReport;
use crate::model::{ModelParams, PairInput};
use crate::synth;
use crate::tokens::Vocabulary;
use crate::train::{self, history_csv, TrainConfig, TrainOutcome};

#[derive(Debug)]
pub enum CliError {
    /// wrong invocation: exit 2
    Usage(String),
    /// valid invocation that failed: exit 1
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

macro_rules! runtime_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Runtime(e.to_string())
            }
        })*
    };
}
runtime_from!(
    crate::data::DataError,
    crate::features::FeatureError,
    crate::train::TrainError,
    crate::checkpoint::CheckpointError,
    crate::model::ModelError,
    crate::metrics::MetricsError,
    crate::synth::SynthError,
    crate::config::ConfigError,
    std::io::Error
);

#[derive(Debug, Parser)]
#[command(
    name = "bridgedpi",
    version,
    about = "Drug-protein interaction prediction with hyper-node graph bridges"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, history, split manifest, report
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labeled dataset
    Eval(EvalArgs),
    /// Export a drugs x proteins interaction-probability matrix
    Predict(PredictArgs),
    /// Train one model per hyper-node count (or per feature-branch variant)
    Sweep(SweepArgs),
    /// Export protein and drug feature tables from a dataset
    Featurize(FeaturizeArgs),
    /// Generate the synthetic benchmark dataset
    MakeSynthetic(MakeSyntheticArgs),
}

/// Flags shared by every command that builds a run configuration.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML config file (defaults apply when omitted)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable), e.g. --set embed_dim=32
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Override the run seed
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let mut rc = base.apply_overrides(&self.set)?;
        if let Some(seed) = self.seed {
            rc.seed = seed;
        }
        Ok(rc)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Dataset TSV; split into train/valid/test unless --valid/--test given
    #[arg(long)]
    pub data: PathBuf,
    /// Pre-split validation TSV (requires --test; --data becomes train-only)
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Pre-split test TSV (requires --valid)
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Cross-validation: number of folds (test = --fold, train = the rest)
    #[arg(long)]
    pub folds: Option<usize>,
    /// Cross-validation: which fold to hold out (0-based)
    #[arg(long)]
    pub fold: Option<usize>,
    /// Output directory for model.ckpt, history.csv, split.tsv, report
    #[arg(long)]
    pub out: PathBuf,
    /// Disable dropout noise so runs are bit-reproducible for checking
    #[arg(long)]
    pub deterministic: bool,
    /// Suppress per-epoch progress lines
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled dataset TSV
    #[arg(long)]
    pub data: PathBuf,
    /// Decision threshold for the accuracy-family metrics
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Optional CSV file for the report row
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Protein list TSV: header `protein_id<TAB>protein_sequence`
    #[arg(long)]
    pub proteins: PathBuf,
    /// Drug list TSV: header `drug_id<TAB>smiles`
    #[arg(long)]
    pub drugs: PathBuf,
    /// Output CSV (rows = drugs, columns = proteins)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Dataset TSV (split per the config fractions, same split every run)
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated hyper-node counts, each >= -1
    #[arg(long = "hyper-nodes", default_value = "-1,1,8", allow_hyphen_values = true)]
    pub hyper_nodes: String,
    /// Sweep feature branches instead: all-on plus each branch disabled
    #[arg(long)]
    pub branches: bool,
    /// Run sweep points on threads instead of sequentially
    #[arg(long)]
    pub parallel: bool,
    /// Output directory: sweep.csv plus one subdirectory per run
    #[arg(long)]
    pub out: PathBuf,
    /// Disable dropout noise in every run
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Dataset TSV to extract unique proteins and drugs from
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for protein_features.tsv and drug_features.tsv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeSyntheticArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output dataset TSV path
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Featurize(args) => cmd_featurize(&args),
        Command::MakeSynthetic(args) => cmd_make_synthetic(&args),
    }
}

// --------------------------------------------------------------------------
// shared pipeline pieces

/// Featurized, partitioned data ready for the train loop.
pub struct PreparedData {
    pub train: Vec<(PairInput, u8)>,
    pub valid: Vec<(PairInput, u8)>,
    pub test: Vec<(PairInput, u8)>,
    /// per-test-record: does its protein occur in the train partition?
    pub test_seen: Vec<bool>,
    /// present when this process performed the split itself
    pub split: Option<Split>,
}

fn load_records(path: &Path) -> Result<Vec<PairRecord>, CliError> {
    let (records, warnings) = data::load_dataset(path)?;
    for w in &warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(records)
}

fn featurize_labeled(
    featurizer: &mut Featurizer,
    records: &[PairRecord],
    indices: &[usize],
) -> Result<Vec<(PairInput, u8)>, CliError> {
    indices
        .iter()
        .map(|&i| Ok((featurizer.featurize(&records[i])?, records[i].label)))
        .collect()
}

fn seen_flags(train_records: &[&PairRecord], test_records: &[&PairRecord]) -> Vec<bool> {
    let train_proteins: BTreeSet<&str> =
        train_records.iter().map(|r| r.protein_id.as_str()).collect();
    test_records
        .iter()
        .map(|r| train_proteins.contains(r.protein_id.as_str()))
        .collect()
}

/// Split one dataset per the config and featurize every partition.
pub fn prepare_split(records: &[PairRecord], rc: &RunConfig) -> Result<PreparedData, CliError> {
    let split = data::split_seen_unseen(records, rc.fractions(), rc.unseen_fraction, rc.seed)?;
    let mut featurizer = Featurizer::new(rc.to_model_config());
    let train = featurize_labeled(&mut featurizer, records, &split.train)?;
    let valid = featurize_labeled(&mut featurizer, records, &split.valid)?;
    let test = featurize_labeled(&mut featurizer, records, &split.test)?;
    let test_seen = split.test.iter().map(|&i| split.protein_seen_in_train[i]).collect();
    Ok(PreparedData { train, valid, test, test_seen, split: Some(split) })
}

fn prepare_explicit(
    train_records: &[PairRecord],
    valid_records: &[PairRecord],
    test_records: &[PairRecord],
    rc: &RunConfig,
) -> Result<PreparedData, CliError> {
    let mut featurizer = Featurizer::new(rc.to_model_config());
    let all: Vec<usize> = (0..train_records.len()).collect();
    let train = featurize_labeled(&mut featurizer, train_records, &all)?;
    let all: Vec<usize> = (0..valid_records.len()).collect();
    let valid = featurize_labeled(&mut featurizer, valid_records, &all)?;
    let all: Vec<usize> = (0..test_records.len()).collect();
    let test = featurize_labeled(&mut featurizer, test_records, &all)?;
    let test_seen = seen_flags(
        &train_records.iter().collect::<Vec<_>>(),
        &test_records.iter().collect::<Vec<_>>(),
    );
    Ok(PreparedData { train, valid, test, test_seen, split: None })
}

fn prepare_kfold(
    records: &[PairRecord],
    k: usize,
    fold: usize,
    rc: &RunConfig,
) -> Result<PreparedData, CliError> {
    let (rest, test_idx) = data::kfold(records.len(), k, fold, rc.seed)?;
    let (train_idx, valid_idx) = if k >= 3 {
        let (_, v) = data::kfold(records.len(), k, (fold + 1) % k, rc.seed)?;
        let v_set: BTreeSet<usize> = v.iter().copied().collect();
        (rest.into_iter().filter(|i| !v_set.contains(i)).collect::<Vec<_>>(), v)
    } else {
        // two folds leave nothing to spare: validate on the held-out fold
        (rest, test_idx.clone())
    };
    let mut featurizer = Featurizer::new(rc.to_model_config());
    let train = featurize_labeled(&mut featurizer, records, &train_idx)?;
    let valid = featurize_labeled(&mut featurizer, records, &valid_idx)?;
    let test = featurize_labeled(&mut featurizer, records, &test_idx)?;
    let train_recs: Vec<&PairRecord> = train_idx.iter().map(|&i| &records[i]).collect();
    let test_recs: Vec<&PairRecord> = test_idx.iter().map(|&i| &records[i]).collect();
    let test_seen = seen_flags(&train_recs, &test_recs);
    Ok(PreparedData { train, valid, test, test_seen, split: None })
}

/// Test-set reports: overall plus the two protein strata.
pub struct StratifiedReports {
    pub overall: EvalReport,
    pub seen: Option<EvalReport>,
    pub unseen: Option<EvalReport>,
}

fn stratified_reports(
    params: &ModelParams,
    test: &[(PairInput, u8)],
    test_seen: &[bool],
    tc: &TrainConfig,
) -> Result<StratifiedReports, CliError> {
    let overall = train::evaluate_set(params, test, tc.batch_size, tc.threshold)?;
    let pick = |want: bool| -> Vec<(PairInput, u8)> {
        test.iter()
            .zip(test_seen)
            .filter(|(_, &s)| s == want)
            .map(|(pair, _)| pair.clone())
            .collect()
    };
    let seen_set = pick(true);
    let unseen_set = pick(false);
    let seen = if seen_set.is_empty() {
        None
    } else {
        Some(train::evaluate_set(params, &seen_set, tc.batch_size, tc.threshold)?)
    };
    let unseen = if unseen_set.is_empty() {
        None
    } else {
        Some(train::evaluate_set(params, &unseen_set, tc.batch_size, tc.threshold)?)
    };
    Ok(StratifiedReports { overall, seen, unseen })
}

fn report_csv(reports: &StratifiedReports) -> String {
    let mut out = format!("stratum,{}\n", EvalReport::CSV_HEADER);
    out.push_str(&format!("overall,{}\n", reports.overall.to_csv_row()));
    if let Some(r) = &reports.seen {
        out.push_str(&format!("seen,{}\n", r.to_csv_row()));
    }
    if let Some(r) = &reports.unseen {
        out.push_str(&format!("unseen,{}\n", r.to_csv_row()));
    }
    out
}

fn print_reports(reports: &StratifiedReports) {
    println!("test (overall):\n{}", reports.overall);
    match &reports.seen {
        Some(r) => println!("test (seen proteins):\n{r}"),
        None => println!("test (seen proteins): no records"),
    }
    match &reports.unseen {
        Some(r) => println!("test (unseen proteins):\n{r}"),
        None => println!("test (unseen proteins): no records"),
    }
}

pub struct RunArtifacts {
    pub outcome: TrainOutcome,
    pub reports: StratifiedReports,
}

/// Train on prepared data and write the artifact set into `out_dir`:
/// `model.ckpt`, `history.csv`, `test_report.csv`, and `split.tsv` when the
/// split was produced here.
pub fn train_and_write(
    rc: &RunConfig,
    prepared: &PreparedData,
    out_dir: &Path,
    echo: bool,
) -> Result<RunArtifacts, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let model_config = rc.to_model_config();
    model_config.validate()?;
    let tc = rc.to_train_config();
    let params = ModelParams::init(model_config.clone(), rc.seed)?;

    let mut echo_cb = |r: &train::EpochRecord| {
        println!(
            "epoch {:>3}  train_loss {:.4}  val_auc {:.4}  val_acc {:.4}",
            r.epoch, r.train_loss, r.val_auc, r.val_acc
        );
    };
    let outcome = train::train(
        params,
        &prepared.train,
        &prepared.valid,
        &tc,
        if echo { Some(&mut echo_cb) } else { None },
    )?;

    let meta = CheckpointMeta {
        config: model_config,
        seed: rc.seed,
        best_epoch: outcome.best_epoch,
        best_val_auc: if outcome.best_val_auc.is_nan() {
            None
        } else {
            Some(outcome.best_val_auc)
        },
        protein_vocab: crate::tokens::protein_vocabulary().chars().to_string(),
        smiles_vocab: crate::tokens::smiles_vocabulary().chars().to_string(),
    };
    save_checkpoint(&out_dir.join("model.ckpt"), &outcome.best_params, &meta)?;
    std::fs::write(out_dir.join("history.csv"), history_csv(&outcome.history))?;
    if let Some(split) = &prepared.split {
        std::fs::write(out_dir.join("split.tsv"), data::split_manifest(split))?;
    }

    let reports =
        stratified_reports(&outcome.best_params, &prepared.test, &prepared.test_seen, &tc)?;
    std::fs::write(out_dir.join("test_report.csv"), report_csv(&reports))?;
    Ok(RunArtifacts { outcome, reports })
}

// --------------------------------------------------------------------------
// commands

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    match (&args.valid, &args.test) {
        (Some(_), None) | (None, Some(_)) => {
            return Err(CliError::Usage(
                "--valid and --test must be given together".to_string(),
            ))
        }
        _ => {}
    }
    if args.fold.is_some() && args.folds.is_none() {
        return Err(CliError::Usage("--fold requires --folds".to_string()));
    }
    if args.folds.is_some() && args.valid.is_some() {
        return Err(CliError::Usage(
            "--folds cannot be combined with --valid/--test".to_string(),
        ));
    }

    let mut rc = args.config.build()?;
    if args.deterministic {
        rc.deterministic = true;
    }

    let records = load_records(&args.data)?;
    let prepared = if let Some(k) = args.folds {
        let fold = args.fold.unwrap_or(0);
        prepare_kfold(&records, k, fold, &rc)?
    } else if let (Some(valid_path), Some(test_path)) = (&args.valid, &args.test) {
        let valid_records = load_records(valid_path)?;
        let test_records = load_records(test_path)?;
        prepare_explicit(&records, &valid_records, &test_records, &rc)?
    } else {
        prepare_split(&records, &rc)?
    };

    println!(
        "training on {} pairs (valid {}, test {})",
        prepared.train.len(),
        prepared.valid.len(),
        prepared.test.len()
    );
    let artifacts = train_and_write(&rc, &prepared, &args.out, !args.quiet)?;
    println!(
        "best epoch {} (val_auc {:.4}); artifacts in {}",
        artifacts.outcome.best_epoch,
        artifacts.outcome.best_val_auc,
        args.out.display()
    );
    print_reports(&artifacts.reports);
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let loaded = load_checkpoint(&args.checkpoint)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let records = load_records(&args.data)?;
    let mut featurizer = Featurizer::with_vocabs(
        loaded.meta.config.clone(),
        Vocabulary::from_chars(&loaded.meta.protein_vocab),
        Vocabulary::from_chars(&loaded.meta.smiles_vocab),
    );
    let (kept, skipped) = featurizer.featurize_lossy(&records);
    for s in &skipped {
        eprintln!("skipped {s}");
    }
    if kept.is_empty() {
        return Err(CliError::Runtime("no usable records in the dataset".to_string()));
    }
    let set: Vec<(PairInput, u8)> = kept.into_iter().map(|(p, y, _)| (p, y)).collect();
    let report = train::evaluate_set(&loaded.params, &set, 512, args.threshold)?;
    if !skipped.is_empty() {
        println!("skipped {} unusable records", skipped.len());
    }
    println!("{report}");
    if let Some(out) = &args.out {
        std::fs::write(out, format!("{}\n{}\n", EvalReport::CSV_HEADER, report.to_csv_row()))?;
    }
    Ok(())
}

/// Two-column TSV reader for entity lists (`id<TAB>payload`).
fn read_entity_list(
    path: &Path,
    expected_header: &str,
) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == expected_header => {}
        Some((_, h)) => {
            return Err(CliError::Runtime(format!(
                "{}: expected header {expected_header:?}, got {h:?}",
                path.display()
            )))
        }
        None => {
            return Err(CliError::Runtime(format!("{}: empty file", path.display())))
        }
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(id), Some(payload), None) if !id.is_empty() && !payload.is_empty() => {
                entries.push((id.to_string(), payload.to_string()));
            }
            _ => {
                return Err(CliError::Runtime(format!(
                    "{}: line {}: expected 2 tab-separated fields",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(entries)
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let loaded = load_checkpoint(&args.checkpoint)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let proteins = read_entity_list(&args.proteins, "protein_id\tprotein_sequence")?;
    let drugs = read_entity_list(&args.drugs, "drug_id\tsmiles")?;

    let mut featurizer = Featurizer::with_vocabs(
        loaded.meta.config.clone(),
        Vocabulary::from_chars(&loaded.meta.protein_vocab),
        Vocabulary::from_chars(&loaded.meta.smiles_vocab),
    );

    type Feats = (Arc<Vec<f64>>, Arc<Vec<usize>>);
    let mut good_proteins: Vec<(String, Feats)> = Vec::new();
    let mut good_drugs: Vec<(String, Feats)> = Vec::new();
    let mut skipped = 0usize;
    for (id, seq) in &proteins {
        match featurizer.protein_features(id, seq) {
            Ok(f) => good_proteins.push((id.clone(), f)),
            Err(e) => {
                skipped += 1;
                eprintln!("skipped protein {id}: {e}");
            }
        }
    }
    for (id, smiles) in &drugs {
        match featurizer.drug_features(id, smiles) {
            Ok(f) => good_drugs.push((id.clone(), f)),
            Err(e) => {
                skipped += 1;
                eprintln!("skipped drug {id}: {e}");
            }
        }
    }
    if good_proteins.is_empty() || good_drugs.is_empty() {
        return Err(CliError::Runtime(
            "need at least one usable protein and one usable drug".to_string(),
        ));
    }

    // rows = drugs, columns = proteins
    let mut inputs = Vec::with_capacity(good_drugs.len() * good_proteins.len());
    for (_, (fp, drug_tokens)) in &good_drugs {
        for (_, (kmer, protein_tokens)) in &good_proteins {
            inputs.push(PairInput {
                kmer: kmer.clone(),
                protein_tokens: protein_tokens.clone(),
                fp: fp.clone(),
                drug_tokens: drug_tokens.clone(),
            });
        }
    }
    let probs = train::predict_probs(&loaded.params, &inputs, 512)?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    write!(out, "drug_id")?;
    for (id, _) in &good_proteins {
        write!(out, ",{id}")?;
    }
    writeln!(out)?;
    for (d, (id, _)) in good_drugs.iter().enumerate() {
        write!(out, "{id}")?;
        for p in 0..good_proteins.len() {
            write!(out, ",{:.6}", probs[d * good_proteins.len() + p])?;
        }
        writeln!(out)?;
    }
    out.flush()?;

    println!(
        "wrote {} x {} probability matrix to {} ({} input rows skipped)",
        good_drugs.len(),
        good_proteins.len(),
        args.out.display(),
        skipped
    );
    Ok(())
}

/// One sweep point: a labeled config variation.
struct SweepPoint {
    label: String,
    rc: RunConfig,
}

fn sweep_points(args: &SweepArgs, base: &RunConfig) -> Result<Vec<SweepPoint>, CliError> {
    if args.branches {
        let variants: [(&str, fn(&mut RunConfig)); 5] = [
            ("all_on", |_| {}),
            ("no_protein_kmer", |rc| rc.use_protein_kmer = false),
            ("no_protein_cnn", |rc| rc.use_protein_cnn = false),
            ("no_drug_fp", |rc| rc.use_drug_fp = false),
            ("no_drug_cnn", |rc| rc.use_drug_cnn = false),
        ];
        Ok(variants
            .into_iter()
            .map(|(label, tweak)| {
                let mut rc = base.clone();
                tweak(&mut rc);
                SweepPoint { label: label.to_string(), rc }
            })
            .collect())
    } else {
        let mut points = Vec::new();
        for part in args.hyper_nodes.split(',') {
            let m: i64 = part.trim().parse().map_err(|_| {
                CliError::Usage(format!("bad hyper-node count {part:?} in --hyper-nodes"))
            })?;
            if m < -1 {
                return Err(CliError::Usage(format!(
                    "hyper-node count must be >= -1, got {m}"
                )));
            }
            let mut rc = base.clone();
            rc.hyper_nodes = m;
            points.push(SweepPoint { label: format!("{m}"), rc });
        }
        if points.is_empty() {
            return Err(CliError::Usage("--hyper-nodes list is empty".to_string()));
        }
        Ok(points)
    }
}

fn sweep_row(label: &str, result: &Result<RunArtifacts, CliError>) -> String {
    match result {
        Ok(artifacts) => {
            let r = &artifacts.reports;
            let overall_auc = if r.overall.auc_defined {
                format!("{:.6}", r.overall.auc)
            } else {
                "NA".to_string()
            };
            let (unseen_auc, unseen_acc) = match &r.unseen {
                Some(u) => (
                    if u.auc_defined { format!("{:.6}", u.auc) } else { "NA".to_string() },
                    format!("{:.6}", u.acc),
                ),
                None => ("NA".to_string(), "NA".to_string()),
            };
            format!(
                "{label},{overall_auc},{:.6},{unseen_auc},{unseen_acc},ok",
                r.overall.acc
            )
        }
        Err(e) => {
            let msg = e.to_string().replace([',', '\n'], ";");
            format!("{label},NA,NA,NA,NA,error: {msg}")
        }
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut base = args.config.build()?;
    if args.deterministic {
        base.deterministic = true;
    }
    let points = sweep_points(args, &base)?;

    let records = load_records(&args.data)?;
    // featurization is identical across sweep points (the swept knobs do not
    // touch the feature pipeline), so prepare once and share
    let prepared = prepare_split(&records, &base)?;
    std::fs::create_dir_all(&args.out)?;

    let axis = if args.branches { "variant" } else { "m" };
    let run_point = |point: &SweepPoint| -> Result<RunArtifacts, CliError> {
        let sub = args.out.join(format!("{axis}_{}", point.label));
        train_and_write(&point.rc, &prepared, &sub, false)
    };

    let results: Vec<Result<RunArtifacts, CliError>> = if args.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                points.iter().map(|point| scope.spawn(|| run_point(point))).collect();
            handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
        })
    } else {
        points
            .iter()
            .map(|point| {
                println!("sweep {axis}={} ...", point.label);
                run_point(point)
            })
            .collect()
    };

    let mut csv = format!("{axis},overall_auc,overall_acc,unseen_auc,unseen_acc,status\n");
    let mut failures = 0usize;
    for (point, result) in points.iter().zip(&results) {
        if result.is_err() {
            failures += 1;
        }
        csv.push_str(&sweep_row(&point.label, result));
        csv.push('\n');
    }
    let csv_path = args.out.join("sweep.csv");
    std::fs::write(&csv_path, &csv)?;
    print!("{csv}");
    println!("sweep summary written to {}", csv_path.display());
    if failures == results.len() {
        return Err(CliError::Runtime("every sweep run failed".to_string()));
    }
    if failures > 0 {
        eprintln!("warning: {failures} sweep run(s) failed; see sweep.csv");
    }
    Ok(())
}

fn cmd_featurize(args: &FeaturizeArgs) -> Result<(), CliError> {
    let rc = args.config.build()?;
    let model_config = rc.to_model_config();
    let records = load_records(&args.data)?;
    if records.is_empty() {
        return Err(CliError::Runtime("dataset has no records".to_string()));
    }
    std::fs::create_dir_all(&args.out)?;

    let mut featurizer = Featurizer::new(model_config.clone());
    let mut protein_rows: Vec<(String, String)> = Vec::new();
    let mut drug_rows: Vec<(String, String)> = Vec::new();
    let mut done_proteins = BTreeSet::new();
    let mut done_drugs = BTreeSet::new();
    let mut skipped = 0usize;

    for r in &records {
        if done_proteins.insert(r.protein_id.clone()) {
            match featurizer.protein_features(&r.protein_id, &r.protein_sequence) {
                Ok((kmer, _)) => {
                    let joined = kmer
                        .iter()
                        .map(|x| format!("{x:.6}"))
                        .collect::<Vec<_>>()
                        .join(",");
                    protein_rows.push((
                        r.protein_id.clone(),
                        format!("{}\t{joined}", r.protein_sequence.len()),
                    ));
                }
                Err(e) => {
                    skipped += 1;
                    eprintln!("skipped protein {}: {e}", r.protein_id);
                }
            }
        }
        if done_drugs.insert(r.drug_id.clone()) {
            match crate::chem::parse_smiles(&r.smiles).map_err(|e| e.to_string()).and_then(
                |mol| {
                    crate::chem::morgan_fingerprint(
                        &mol,
                        model_config.fingerprint_radius,
                        model_config.fingerprint_bits,
                    )
                    .map_err(|e| e.to_string())
                },
            ) {
                Ok(fp) => {
                    drug_rows.push((r.drug_id.clone(), format!("{}\t{}", r.smiles, fp.to_hex())))
                }
                Err(e) => {
                    skipped += 1;
                    eprintln!("skipped drug {}: {e}", r.drug_id);
                }
            }
        }
    }

    let mut out = String::from("protein_id\tlength\tkmer_features\n");
    for (id, rest) in &protein_rows {
        out.push_str(&format!("{id}\t{rest}\n"));
    }
    std::fs::write(args.out.join("protein_features.tsv"), out)?;

    let mut out = String::from("drug_id\tsmiles\tfingerprint_hex\n");
    for (id, rest) in &drug_rows {
        out.push_str(&format!("{id}\t{rest}\n"));
    }
    std::fs::write(args.out.join("drug_features.tsv"), out)?;

    println!(
        "featurized {} proteins and {} drugs into {} ({skipped} skipped)",
        protein_rows.len(),
        drug_rows.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_make_synthetic(args: &MakeSyntheticArgs) -> Result<(), CliError> {
    let rc = args.config.build()?;
    let dataset = synth::generate(&rc.to_synth_config())?;
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    data::write_dataset(&args.out, &dataset.records)?;
    let positives = dataset.records.iter().filter(|r| r.label == 1).count();
    println!(
        "wrote {} pairs ({} proteins x {} drugs, {positives} positive) to {}",
        dataset.records.len(),
        dataset.proteins.len(),
        dataset.drugs.len(),
        args.out.display()
    );
    Ok(())
}
