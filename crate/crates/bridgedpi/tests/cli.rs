//! Black-box checks of the binary: exit codes, artifact layout, determinism
//! of emitted files, and output formats. Training here uses a deliberately
//! tiny architecture — these tests are about the command surface, not about
//! model quality.

use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bridgedpi"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should launch")
}

fn assert_ok(out: &Output, context: &str) {
    assert!(
        out.status.success(),
        "{context} failed ({:?}):\n{}{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

/// Overrides shrinking the model enough that a training run takes about a
/// second. Used by every command that touches a checkpoint.
const TINY: &[&str] = &[
    "--set",
    "embed_dim=16",
    "--set",
    "protein_mlp_widths=[32, 16]",
    "--set",
    "drug_mlp_widths=[32, 16]",
    "--set",
    "hyper_nodes=2",
    "--set",
    "gnn_layers=1",
    "--set",
    "token_embed_dim=8",
    "--set",
    "protein_max_len=64",
    "--set",
    "drug_max_len=32",
    "--set",
    "max_epochs=3",
    "--set",
    "batch_size=64",
];

/// One synthetic dataset and one finished training run, shared by the tests
/// that only need *a* checkpoint. The directory is leaked so it outlives
/// every test thread.
struct Fixture {
    data: PathBuf,
    run_dir: PathBuf,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir").keep();
        let data = dir.join("data.tsv");
        let out = run(&[
            "make-synthetic",
            "--out",
            data.to_str().unwrap(),
            "--seed",
            "7",
            "--set",
            "synth_records=200",
            "--set",
            "synth_proteins=24",
            "--set",
            "synth_drugs=20",
        ]);
        assert_ok(&out, "fixture make-synthetic");

        let run_dir = dir.join("run");
        let mut args = vec![
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out",
            run_dir.to_str().unwrap(),
            "--seed",
            "11",
            "--quiet",
        ];
        args.extend_from_slice(TINY);
        let out = run(&args);
        assert_ok(&out, "fixture train");
        Fixture { data, run_dir }
    })
}

fn ckpt(fx: &Fixture) -> String {
    fx.run_dir.join("model.ckpt").to_str().unwrap().to_string()
}

#[test]
fn train_writes_the_documented_artifacts() {
    let fx = fixture();
    for name in ["model.ckpt", "history.csv", "split.tsv", "test_report.csv"] {
        assert!(fx.run_dir.join(name).exists(), "missing artifact {name}");
    }
    let history = std::fs::read_to_string(fx.run_dir.join("history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_auc,val_acc"));
    assert!(lines.count() >= 1, "history should hold at least one epoch");

    let report = std::fs::read_to_string(fx.run_dir.join("test_report.csv")).unwrap();
    assert!(report.starts_with("stratum,n,auc,"), "report header: {report}");
    assert!(report.lines().any(|l| l.starts_with("overall,")));

    let manifest = std::fs::read_to_string(fx.run_dir.join("split.tsv")).unwrap();
    assert_eq!(manifest.lines().next(), Some("index\tpartition\tseen_flag"));
    // every record is assigned exactly once
    assert_eq!(manifest.lines().count(), 1 + 200);
}

#[test]
fn same_seed_reproduces_artifacts_bitwise() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let rerun = dir.path().join("rerun");
    let mut args = vec![
        "train",
        "--data",
        fx.data.to_str().unwrap(),
        "--out",
        rerun.to_str().unwrap(),
        "--seed",
        "11",
        "--quiet",
    ];
    args.extend_from_slice(TINY);
    let out = run(&args);
    assert_ok(&out, "rerun train");

    for name in ["history.csv", "model.ckpt", "split.tsv"] {
        let a = std::fs::read(fx.run_dir.join(name)).unwrap();
        let b = std::fs::read(rerun.join(name)).unwrap();
        assert_eq!(a, b, "{name} should be byte-identical across equal seeds");
    }
}

#[test]
fn eval_prints_metrics_and_writes_csv() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("eval.csv");
    let out = run(&[
        "eval",
        "--checkpoint",
        &ckpt(fx),
        "--data",
        fx.data.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_ok(&out, "eval");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("AUC"), "eval should report AUC: {stdout}");
    let written = std::fs::read_to_string(&csv).unwrap();
    assert!(written.starts_with("n,auc,acc,"), "eval csv header: {written}");
    assert_eq!(written.lines().count(), 2, "header plus one metrics row");
}

#[test]
fn predict_emits_one_probability_per_drug_protein_cell() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let proteins = dir.path().join("proteins.tsv");
    let drugs = dir.path().join("drugs.tsv");
    std::fs::write(
        &proteins,
        "protein_id\tprotein_sequence\nPA\tMKVLHHAWYHKWAAPQR\nPB\tGGGSSTTPPLLKKAE\nPC\tAAACCCDDDEEEFFF\n",
    )
    .unwrap();
    std::fs::write(&drugs, "drug_id\tsmiles\nDA\tCc1ccccc1\nDB\tCCCCO\n").unwrap();
    let matrix = dir.path().join("matrix.csv");

    let out = run(&[
        "predict",
        "--checkpoint",
        &ckpt(fx),
        "--proteins",
        proteins.to_str().unwrap(),
        "--drugs",
        drugs.to_str().unwrap(),
        "--out",
        matrix.to_str().unwrap(),
    ]);
    assert_ok(&out, "predict");

    let text = std::fs::read_to_string(&matrix).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "drug_id,PA,PB,PC");
    assert_eq!(lines.len(), 1 + 2, "one row per drug");
    for row in &lines[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 1 + 3, "one column per protein: {row}");
        for cell in &cells[1..] {
            let p: f64 = cell.parse().expect("probability cell");
            assert!(p > 0.0 && p < 1.0, "probability {p} left (0,1)");
        }
    }

    // rerunning must reproduce the matrix exactly
    let again = dir.path().join("again.csv");
    let out = run(&[
        "predict",
        "--checkpoint",
        &ckpt(fx),
        "--proteins",
        proteins.to_str().unwrap(),
        "--drugs",
        drugs.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_ok(&out, "predict rerun");
    assert_eq!(std::fs::read(&matrix).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn predict_skips_unparseable_drugs_but_keeps_going() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let proteins = dir.path().join("p.tsv");
    let drugs = dir.path().join("d.tsv");
    std::fs::write(&proteins, "protein_id\tprotein_sequence\nPA\tMKVLHHAWYHKW\n").unwrap();
    // ring bond 1 never closes in the second entry
    std::fs::write(&drugs, "drug_id\tsmiles\nDA\tCCO\nDBAD\tC1CC\n").unwrap();
    let matrix = dir.path().join("m.csv");
    let out = run(&[
        "predict",
        "--checkpoint",
        &ckpt(fx),
        "--proteins",
        proteins.to_str().unwrap(),
        "--drugs",
        drugs.to_str().unwrap(),
        "--out",
        matrix.to_str().unwrap(),
    ]);
    assert_ok(&out, "predict with bad drug");
    let text = std::fs::read_to_string(&matrix).unwrap();
    assert_eq!(text.lines().count(), 2, "header plus the one good drug");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stderr.contains("DBAD") || stdout.contains("DBAD"),
        "skipped drug should be named:\n{stdout}{stderr}"
    );
}

#[test]
fn sweep_writes_summary_and_per_run_directories() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--data",
        fx.data.to_str().unwrap(),
        "--hyper-nodes",
        "-1,1",
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "11",
    ];
    args.extend_from_slice(TINY);
    let out = run(&args);
    assert_ok(&out, "sweep");

    let summary = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "m,overall_auc,overall_acc,unseen_auc,unseen_acc,status");
    assert_eq!(lines.len(), 3, "header plus one row per point:\n{summary}");
    assert!(lines[1].starts_with("-1,") && lines[1].ends_with(",ok"));
    assert!(lines[2].starts_with("1,") && lines[2].ends_with(",ok"));
    for sub in ["m_-1", "m_1"] {
        assert!(out_dir.join(sub).join("model.ckpt").exists(), "{sub}/model.ckpt");
        assert!(out_dir.join(sub).join("history.csv").exists(), "{sub}/history.csv");
    }
}

#[test]
fn featurize_exports_per_entity_tables() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("features");
    let out = run(&[
        "featurize",
        "--data",
        fx.data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out, "featurize");

    let proteins = std::fs::read_to_string(out_dir.join("protein_features.tsv")).unwrap();
    assert_eq!(proteins.lines().next(), Some("protein_id\tlength\tkmer_features"));
    assert_eq!(proteins.lines().count(), 1 + 24, "one row per distinct protein");

    let drugs = std::fs::read_to_string(out_dir.join("drug_features.tsv")).unwrap();
    assert_eq!(drugs.lines().next(), Some("drug_id\tsmiles\tfingerprint_hex"));
    assert_eq!(drugs.lines().count(), 1 + 20, "one row per distinct drug");
    let row = drugs.lines().nth(1).unwrap();
    let hex = row.split('\t').nth(2).unwrap();
    assert_eq!(hex.len(), 1024 / 4, "1024 bits in hex");
}

#[test]
fn make_synthetic_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let emit = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = run(&[
            "make-synthetic",
            "--out",
            path.to_str().unwrap(),
            "--seed",
            seed,
            "--set",
            "synth_records=100",
            "--set",
            "synth_proteins=20",
            "--set",
            "synth_drugs=16",
        ]);
        assert_ok(&out, "make-synthetic");
        std::fs::read(&path).unwrap()
    };
    let a = emit("a.tsv", "3");
    let b = emit("b.tsv", "3");
    let c = emit("c.tsv", "4");
    assert_eq!(a, b, "same seed, same file");
    assert_ne!(a, c, "different seed should shuffle differently");

    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("protein_id\tdrug_id\tprotein_sequence\tsmiles\tlabel")
    );
    assert_eq!(text.lines().count(), 1 + 100);
    let positives = text.lines().skip(1).filter(|l| l.ends_with("\t1")).count();
    assert_eq!(positives, 50, "labels should be balanced exactly");
}

#[test]
fn usage_mistakes_exit_two_runtime_failures_exit_one() {
    // clap-level: missing required flag
    let out = run(&["train", "--out", "/tmp/nowhere"]);
    assert_eq!(code(&out), 2, "missing --data");

    // command-level pairing rules
    let fx = fixture();
    let out = run(&[
        "train",
        "--data",
        fx.data.to_str().unwrap(),
        "--valid",
        fx.data.to_str().unwrap(),
        "--out",
        "/tmp/nowhere",
    ]);
    assert_eq!(code(&out), 2, "--valid without --test");
    let out = run(&[
        "train",
        "--data",
        fx.data.to_str().unwrap(),
        "--fold",
        "0",
        "--out",
        "/tmp/nowhere",
    ]);
    assert_eq!(code(&out), 2, "--fold without --folds");

    // well-formed invocation failing at runtime: dataset does not exist
    let out = run(&[
        "train",
        "--data",
        "/definitely/not/here.tsv",
        "--out",
        "/tmp/nowhere",
    ]);
    assert_eq!(code(&out), 1, "missing dataset file");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "diagnostic goes to stderr: {stderr}");

    // checkpoint path errors are runtime failures too
    let out = run(&["eval", "--checkpoint", "/no/model.ckpt", "--data", fx.data.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "missing checkpoint");
}

#[test]
fn explicit_validation_and_test_files_are_honored() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();

    // slice the fixture dataset into three disjoint files
    let text = std::fs::read_to_string(&fx.data).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let (header, rows) = (lines[0], &lines[1..]);
    let write_slice = |name: &str, range: std::ops::Range<usize>| {
        let path = dir.path().join(name);
        let mut body = String::from(header);
        body.push('\n');
        for row in &rows[range] {
            body.push_str(row);
            body.push('\n');
        }
        std::fs::write(&path, body).unwrap();
        path
    };
    let train = write_slice("train.tsv", 0..140);
    let valid = write_slice("valid.tsv", 140..170);
    let test = write_slice("test.tsv", 170..200);

    let run_dir = dir.path().join("run");
    let mut args = vec![
        "train",
        "--data",
        train.to_str().unwrap(),
        "--valid",
        valid.to_str().unwrap(),
        "--test",
        test.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--seed",
        "5",
        "--quiet",
    ];
    args.extend_from_slice(TINY);
    let out = run(&args);
    assert_ok(&out, "pre-split train");
    assert!(run_dir.join("model.ckpt").exists());
    // no internal split happened, so no manifest is written
    assert!(!run_dir.join("split.tsv").exists());
}
