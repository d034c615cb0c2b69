use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fusiontrack::synthetic;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusiontrack"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn fusiontrack")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "fusiontrack {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dataset(root: &Path, n: usize) {
    for i in 0..n {
        synthetic::preset("lanes", &format!("seq-{i}"), i as u64, 60, 4)
            .unwrap()
            .write(root)
            .unwrap();
    }
}

#[test]
fn track_single_sequence_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 1);
    let dets = dir.path().join("seq-0/det/det.txt");
    let r1 = dir.path().join("r1");
    let r2 = dir.path().join("r2");
    for out in [&r1, &r2] {
        ok(&[
            "track",
            "--dets",
            s(&dets),
            "--fusion",
            "minimum",
            "--cues",
            "motion",
            "--out",
            s(out),
        ]);
    }
    let a = fs::read(r1.join("seq-0.txt")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, fs::read(r2.join("seq-0.txt")).unwrap());

    let named = dir.path().join("r3");
    ok(&[
        "track",
        "--dets",
        s(&dets),
        "--name",
        "custom",
        "--out",
        s(&named),
    ]);
    assert!(named.join("custom.txt").is_file());
}

#[test]
fn appearance_without_embeddings_fails_naming_the_sequence() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 1);
    let dets = dir.path().join("seq-0/det/det.txt");
    let out = cli(&[
        "track",
        "--dets",
        s(&dets),
        "--cues",
        "motion,appearance",
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seq-0") && err.contains("embeddings"), "{err}");

    let emb = dir.path().join("seq-0/emb.txt");
    ok(&[
        "track",
        "--dets",
        s(&dets),
        "--embeddings",
        s(&emb),
        "--cues",
        "motion,appearance",
        "--out",
        s(&dir.path().join("r")),
    ]);
}

#[test]
fn track_dataset_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    dataset(&data, 2);
    let res = dir.path().join("res");
    let listed = ok(&[
        "track",
        "--dataset",
        s(&data),
        "--cues",
        "motion,app,hiou,confidence",
        "--out",
        s(&res),
    ]);
    assert_eq!(listed.lines().count(), 2);

    let csv = dir.path().join("report/eval.csv");
    let report = ok(&[
        "eval",
        "--results",
        s(&res),
        "--gt",
        s(&data),
        "--out",
        s(&csv),
    ]);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "sequence,MOTA,IDF1,FP,FN,IDSW,IDTP,IDFP,IDFN");
    assert!(lines[1].starts_with("seq-0,1.000000,1.000000,0,0,0,"));
    assert!(lines[3].starts_with("OVERALL,1.000000,1.000000,"));
    assert_eq!(fs::read_to_string(csv).unwrap(), report);

    let single = ok(&[
        "eval",
        "--results",
        s(&res.join("seq-1.txt")),
        "--gt",
        s(&data.join("seq-1/gt/gt.txt")),
    ]);
    assert!(single.contains("\nseq-1,1.000000,1.000000"));
}

#[test]
fn eval_of_empty_results_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    dataset(&dir.path().join("data"), 1);
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let out = cli(&[
        "eval",
        "--results",
        s(&empty),
        "--gt",
        s(&dir.path().join("data")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no result files"));
}

#[test]
fn config_precedence_defaults_file_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    fs::write(
        &file,
        "# dance preset\nlambda2 = 0.2\ntau-high = 0.7\ninit-score = 0.75\nfusion = hadamard\n",
    )
    .unwrap();

    let defaults = ok(&["config"]);
    assert!(defaults.contains("tau-high = 0.6\n"));
    assert!(defaults.contains("lambda2 = 0.1\n"));
    assert!(defaults.contains("fusion = minimum\n"));

    let from_file = ok(&["config", "--config", s(&file)]);
    assert!(from_file.contains("tau-high = 0.7\n"));
    assert!(from_file.contains("lambda2 = 0.2\n"));
    assert!(from_file.contains("fusion = hadamard\n"));
    assert!(from_file.contains("theta-emb = 0.25\n"));

    let flags = ok(&[
        "config",
        "--config",
        s(&file),
        "--tau-high",
        "0.65",
        "--fusion",
        "kf-gating",
        "--set",
        "lambda-h=0.3",
    ]);
    assert!(flags.contains("tau-high = 0.65\n"));
    assert!(flags.contains("fusion = kf-gating\n"));
    assert!(flags.contains("lambda-h = 0.3\n"));
    assert!(flags.contains("lambda2 = 0.2\n"));

    // the printed form is itself a valid config file
    let round = dir.path().join("round.cfg");
    fs::write(&round, &flags).unwrap();
    assert_eq!(ok(&["config", "--config", s(&round)]), flags);

    let bad = cli(&["config", "--tau-low", "0.9"]);
    assert!(!bad.status.success());
    let unknown = cli(&["config", "--set", "tau-hgh=0.5"]);
    assert!(!unknown.status.success());
}

#[test]
fn sweep_writes_tables_and_reuses_cache() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    dataset(&data, 1);
    let out = dir.path().join("sweep");
    let args = [
        "sweep",
        "--dataset",
        s(&data),
        "--out",
        s(&out),
        "--methods",
        "minimum,hadamard",
    ];
    let printed = ok(&args);
    assert!(printed.contains("Minimum"));
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 4);
    assert!(!out.join("second_stage.csv").exists());
    let stamp = out.join("runs/minimum__mot__iou/inputs.sha256");
    let first = fs::metadata(out.join("runs/minimum__mot__iou/seq-0.txt"))
        .unwrap()
        .modified()
        .unwrap();
    assert!(stamp.is_file());

    ok(&args);
    let again = fs::metadata(out.join("runs/minimum__mot__iou/seq-0.txt"))
        .unwrap()
        .modified()
        .unwrap();
    assert_eq!(first, again, "cached combination was re-tracked");
    assert_eq!(fs::read_to_string(out.join("table.csv")).unwrap(), table);

    // only the KF-gating rows are added for the second-stage table
    ok(&[
        "sweep",
        "--dataset",
        s(&data),
        "--out",
        s(&out),
        "--methods",
        "minimum",
        "--second-stage",
        "mahalanobis",
    ]);
    let second = fs::read_to_string(out.join("second_stage.csv")).unwrap();
    assert_eq!(second.lines().count(), 1 + 8);
    assert!(out.join("runs/kf-gating__mot__mahalanobis").is_dir());
}

#[test]
fn sweep_marks_failed_cells_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    dataset(&data, 1);
    fs::remove_file(data.join("seq-0/emb.txt")).unwrap();
    let out = dir.path().join("sweep");
    let res = cli(&[
        "sweep",
        "--dataset",
        s(&data),
        "--out",
        s(&out),
        "--methods",
        "weighted-sum",
    ]);
    assert!(!res.status.success());
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert!(
        !rows[1].contains(",-,"),
        "motion-only row should succeed: {}",
        rows[1]
    );
    assert!(rows[2].ends_with(",-,-"), "{}", rows[2]);
}

#[test]
fn synth_writes_dataset_layout() {
    let dir = tempfile::tempdir().unwrap();
    let listed = ok(&[
        "synth",
        "--out",
        s(dir.path()),
        "--scenario",
        "crossing",
        "--frames",
        "40",
    ]);
    assert_eq!(listed.trim(), s(&dir.path().join("crossing-01")));
    for f in ["det/det.txt", "emb.txt", "gt/gt.txt", "seqinfo.ini"] {
        assert!(dir.path().join("crossing-01").join(f).is_file(), "{f}");
    }
    assert!(
        !cli(&["synth", "--out", s(dir.path()), "--scenario", "spiral"])
            .status
            .success()
    );
}
