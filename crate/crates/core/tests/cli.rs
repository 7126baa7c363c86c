use std::fs;
use std::path::Path;

use earlypred::cli::{run, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
use earlypred::eval::load_report;

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("earlypred").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_DATA: &[&str] = &["--c", "3", "--k", "4", "--d-raw", "6", "--n-train", "24", "--n-test", "9", "--onset-min", "1", "--onset-max", "3", "--seed", "5"];
const SMALL_MODEL: &[&str] = &[
    "--iters1", "30", "--iters2", "4", "--batch", "8", "--d-enc", "8", "--d-feat", "6", "--d-hidden", "6", "--head1", "8", "--head2",
    "6", "--log-every", "10",
];

fn gen(dir: &Path) {
    let mut args = vec!["gen-data", "--out-dir", p(dir)];
    args.extend_from_slice(SMALL_DATA);
    assert_eq!(cli(&args), EXIT_OK);
}

fn train(data: &Path, out: &Path, seed: &str) {
    let train = data.join("train_a.epd");
    let mut args = vec!["train", "--train", p(&train), "--out-dir", p(out), "--seed", seed];
    args.extend_from_slice(SMALL_MODEL);
    assert_eq!(cli(&args), EXIT_OK);
}

fn eval(ckpt: &Path, test: &Path, reports: &Path) -> i32 {
    cli(&["eval", "--checkpoint", p(ckpt), "--test", p(test), "--report-dir", p(reports)])
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(cli(&["--help"]), EXIT_OK);
    assert_eq!(cli(&["train", "--help"]), EXIT_OK);
    assert_eq!(cli(&["--version"]), EXIT_OK);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli(&["train", "--no-such-flag"]), EXIT_USAGE);
    assert_eq!(cli(&[]), EXIT_USAGE);
    assert_eq!(cli(&["gen-data", "--alpha", "not-a-number"]), EXIT_USAGE);
    let dir = tempfile::tempdir().unwrap();
    // parses, but fails validation
    assert_eq!(cli(&["gen-data", "--out-dir", p(dir.path()), "--alpha", "1.5"]), EXIT_USAGE);
    assert_eq!(cli(&["gen-data", "--out-dir", p(dir.path()), "--onset-min", "7", "--onset-max", "3"]), EXIT_USAGE);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ckpt");
    let test = dir.path().join("missing.epd");
    assert_eq!(eval(&missing, &test, dir.path()), EXIT_RUNTIME);

    let garbage = dir.path().join("garbage.epd");
    fs::write(&garbage, b"definitely not a dataset").unwrap();
    assert_eq!(cli(&["train", "--train", p(&garbage), "--out-dir", p(dir.path())]), EXIT_RUNTIME);
}

#[test]
fn incompatible_test_set_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen(&data);
    let run_dir = dir.path().join("run");
    let mut args = vec!["train", "--train", "", "--out-dir", p(&run_dir), "--stage1-only"];
    let train = data.join("train_a.epd");
    args[2] = p(&train);
    args.extend_from_slice(SMALL_MODEL);
    assert_eq!(cli(&args), EXIT_OK);
    assert!(!run_dir.join("stage1.ckpt").exists());

    let other = dir.path().join("other");
    assert_eq!(cli(&["gen-data", "--out-dir", p(&other), "--c", "5", "--k", "4", "--d-raw", "6", "--n-train", "5", "--n-test", "5", "--onset-max", "3"]), EXIT_OK);
    let code = eval(&run_dir.join("model.ckpt"), &other.join("test_a.epd"), &dir.path().join("r"));
    assert_eq!(code, EXIT_RUNTIME);
}

#[test]
fn end_to_end_runs_are_byte_identical() {
    // Both passes use the same paths: they are echoed into checkpoints and reports.
    let base = tempfile::tempdir().unwrap();
    let dir = base.path().join("work");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let data = dir.join("data");
        gen(&data);
        let run_dir = dir.join("run");
        train(&data, &run_dir, "3");
        let reports = dir.join("reports");
        assert_eq!(eval(&run_dir.join("model.ckpt"), &data.join("test_a.epd"), &reports), EXIT_OK);
        let files = [
            data.join("train_a.epd"),
            data.join("test_b.epd"),
            run_dir.join("stage1.ckpt"),
            run_dir.join("model.ckpt"),
            run_dir.join("train_log.csv"),
            reports.join("report.json"),
            reports.join("report_curve.csv"),
            reports.join("report.txt"),
            reports.join("report_confusion.csv"),
        ];
        outputs.push(files.iter().map(|f| (f.clone(), fs::read(f).unwrap())).collect::<Vec<_>>());
        for echo in [data.join("gen_data_config.json"), run_dir.join("train_config.json"), reports.join("eval_config.json")] {
            let v: serde_json::Value = serde_json::from_slice(&fs::read(&echo).unwrap()).unwrap();
            assert!(v.get("resolved").is_some(), "{}", echo.display());
        }
        fs::remove_dir_all(&dir).unwrap();
    }
    for ((path, a), (_, b)) in outputs[0].iter().zip(&outputs[1]) {
        assert!(a == b, "{} differs between runs", path.display());
    }
}

#[test]
fn fused_eval_and_curve_export() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen(&data);
    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    train(&data, &run_a, "1");
    let train_b = data.join("train_b.epd");
    let mut args = vec!["train", "--train", p(&train_b), "--out-dir", p(&run_b), "--seed", "2"];
    args.extend_from_slice(SMALL_MODEL);
    assert_eq!(cli(&args), EXIT_OK);

    let reports = dir.path().join("reports");
    let code = cli(&[
        "eval",
        "--checkpoint",
        p(&run_a.join("model.ckpt")),
        "--test",
        p(&data.join("test_a.epd")),
        "--fuse",
        p(&run_b.join("model.ckpt")),
        "--fuse-test",
        p(&data.join("test_b.epd")),
        "--report-dir",
        p(&reports),
        "--stem",
        "fused",
    ]);
    assert_eq!(code, EXIT_OK);
    let report = load_report(&reports.join("fused.json")).unwrap();
    assert_eq!(report.segments, 4);

    let out = dir.path().join("curve.csv");
    assert_eq!(cli(&["curve", "--report", p(&reports.join("fused.json")), "--out", p(&out)]), EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ratio,accuracy");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[4].starts_with("1.0000,"));

    // --fuse without its test set is a usage error
    let code = cli(&["eval", "--checkpoint", p(&run_a.join("model.ckpt")), "--test", p(&data.join("test_a.epd")), "--fuse", "x"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn gradcheck_command() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["gradcheck", "--report-dir", p(dir.path())]), EXIT_OK);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("gradcheck.json")).unwrap()).unwrap();
    assert!(v["checks"].as_array().unwrap().len() > 20);
    assert_eq!(cli(&["gradcheck", "--inject-fault", "1.01"]), earlypred::cli::EXIT_NUMERIC);
}
