use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psc_core::io::read_chain;
use psc_core::PosteriorChain;

fn psc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn psc")
}

fn ok(args: &[&str]) -> String {
    let out = psc(args);
    assert!(out.status.success(), "psc {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Simulated 2-d subspace in 5 dimensions and a short-chain run config.
fn setup(root: &Path) -> PathBuf {
    let spec = r#"{
        "m": 5, "k": 2, "c": 2, "n": 150,
        "atoms": {"random": {"count": 4, "separation": 5.0, "purity": 0.95}},
        "sigma": [1.0, 1.0], "sigma0": 0.3, "frame": null, "eta": null, "seed": 4
    }"#;
    let spec_path = root.join("synth.json");
    fs::write(&spec_path, spec).unwrap();
    let data = root.join("data");
    ok(&["synth", "--config", p(&spec_path), "--out", p(&data)]);
    let cfg = r#"{
        "dataset": {"format": "csv", "path": "data/data.csv"},
        "sampler": {"iterations": 150, "burn_in": 50, "seed": 9},
        "k_grid": [1, 2],
        "baselines": {"knn_grid": [1, 3, 5], "gmm_grid": [1, 2]}
    }"#;
    let cfg_path = root.join("run.json");
    fs::write(&cfg_path, cfg).unwrap();
    cfg_path
}

/// Every file under `dir` keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                out.insert(path.strip_prefix(base).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn synthetic_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let data = tmp.path().join("data");
    for f in ["data.csv", "truth.json", "run.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let run = tmp.path().join("run");
    let report = ok(&["run", "--config", p(&cfg), "--out", p(&run)]);
    for f in [
        "config.json",
        "metadata.json",
        "split.json",
        "transform.json",
        "chains/k=1.jsonl",
        "chains/k=2.jsonl",
        "chains/k=2.trace.csv",
        "chains/k=2.diagnostics.json",
        "metrics.csv",
        "selection.json",
        "estimate/subspace.csv",
        "estimate/importance.csv",
        "baselines.csv",
        "predictions.csv",
        "report.txt",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    assert_eq!(report, fs::read_to_string(run.join("report.txt")).unwrap());
    assert!(report.contains("principal directions"));
    assert!(report.contains("norm"));

    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), "method,k,error_rate,auc,auc_minus_error");
    assert_eq!(metrics.lines().count(), 3);

    // well-separated atoms: the fitted classifier should beat chance comfortably
    let best = metrics
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(best < 0.3, "best error {best}");

    let importance = fs::read_to_string(run.join("estimate/importance.csv")).unwrap();
    let header: Vec<&str> = importance.lines().next().unwrap().split(',').collect();
    assert_eq!(header.first(), Some(&"feature"));
    assert_eq!(&header[header.len() - 2..], ["norm", "score"]);
    assert_eq!(importance.lines().count(), 6);

    let trace = fs::read_to_string(run.join("chains/k=2.trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 151);

    let preds = fs::read_to_string(run.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().next().unwrap(), "row,p_1,p_2,predicted,label");
    assert_eq!(preds.lines().count(), 1 + 50);
}

#[test]
fn predict_on_new_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let run = tmp.path().join("run");
    ok(&["fit", "--config", p(&cfg), "--out", p(&run), "--k", "2"]);
    let input = tmp.path().join("new.csv");
    fs::write(&input, "x1,x2,x3,x4,x5\n0,0,0,0,0\n1,2,3,4,5\n").unwrap();
    let output = tmp.path().join("pred.csv");
    ok(&["predict", "--out", p(&run), "--k", "2", "--input", p(&input), "--output", p(&output)]);
    let text = fs::read_to_string(&output).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "row,p_1,p_2,predicted");
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        let f: Vec<&str> = r.split(',').collect();
        let sum: f64 = f[1].parse::<f64>().unwrap() + f[2].parse::<f64>().unwrap();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    fs::write(&input, "a,b\n1,2\n").unwrap();
    let out = psc(&["predict", "--out", p(&run), "--k", "2", "--input", p(&input)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match training features"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", p(&cfg), "--out", p(&a)]);
    ok(&["run", "--config", p(&cfg), "--out", p(&b)]);
    let (mut sa, mut sb) = (snapshot(&a), snapshot(&b));
    let meta = PathBuf::from("metadata.json");
    assert!(sa.remove(&meta).is_some() && sb.remove(&meta).is_some());
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{} differs between runs", k.display());
    }

    // a different seed changes the chains
    let c = tmp.path().join("c");
    ok(&["fit", "--config", p(&cfg), "--out", p(&c), "--seed", "10"]);
    assert_ne!(fs::read(c.join("chains/k=2.jsonl")).unwrap(), sa[&PathBuf::from("chains/k=2.jsonl")]);
}

#[test]
fn chain_file_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let run = tmp.path().join("run");
    ok(&["fit", "--config", p(&cfg), "--out", p(&run), "--k", "2"]);
    assert!(!run.join("chains/k=1.jsonl").exists());
    let path = run.join("chains/k=2.jsonl");
    let records = read_chain(&path).unwrap();
    assert_eq!(records.len(), 100);
    let chain = PosteriorChain::from_records(&records).unwrap();
    assert_eq!(chain.k, 2);
    assert_eq!(chain.iterations.first(), Some(&50));
    let again = tmp.path().join("again.jsonl");
    psc_core::io::write_chain(&again, &chain.to_records()).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn missing_artifacts_are_named() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    for (cmd, needle) in [
        ("select-k", "missing config.json"),
        ("report", "missing config.json"),
        ("baseline", "missing config.json"),
    ] {
        let out = psc(&[cmd, "--out", p(&empty)]);
        assert!(!out.status.success());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle) && err.contains("psc fit"), "{cmd}: {err}");
    }

    let cfg = setup(tmp.path());
    let run = tmp.path().join("run");
    ok(&["fit", "--config", p(&cfg), "--out", p(&run), "--k", "1"]);
    let out = psc(&["estimate", "--out", p(&run)]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing selection.json") && err.contains("psc select-k"), "{err}");
    let out = psc(&["estimate", "--out", p(&run), "--k", "2"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k=2.jsonl"), "{err}");
    ok(&["select-k", "--out", p(&run)]);
    let out = psc(&["report", "--out", p(&run)]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("estimate.json") && err.contains("psc estimate"), "{err}");
}

#[test]
fn config_errors_carry_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, "{\n  \"dataset\": {\"format\": \"wbc\", \"path\": \"x\"},\n  \"sampler\": {\"burnin\": 3}\n}\n").unwrap();
    let out = psc(&["fit", "--config", p(&cfg), "--out", p(&tmp.path().join("r"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("burnin"), "{err}");
}
