use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use collapse_lab::seed::rng_from_seed;
use collapse_lab::tensorset::{load_pointset, save_pointset, Format};
use collapse_lab::PointSet;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_collapse-lab"));
    cmd.env_remove("COLLAPSE_LAB_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn normal_file(dir: &Path, name: &str, n: usize, seed: u64) -> String {
    let mut rng = rng_from_seed(seed);
    let data = (0..2 * n)
        .map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let p = dir.join(name);
    save_pointset(
        &PointSet::from_flat(data, 2).unwrap(),
        &p,
        Format::from_path(&p),
    )
    .unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn entropy_two_points() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "two.csv", "0\n1\n");
    let out = run(&["entropy", "--input", &f, "--gamma", "1"]);
    let v = json(&out);
    assert_eq!(v["estimate"].as_f64().unwrap(), 1.6931471805599453);
    assert_eq!(v["gamma"], 1);
    assert_eq!(v["duplicateCount"], 0);
}

#[test]
fn entropy_errors_and_identity_feature() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "two.csv", "0\n1\n");
    assert_eq!(code(&run(&["entropy", "--input", &f, "--gamma", "2"])), 3);
    assert_eq!(
        code(&run(&["entropy", "--input", &path(&dir, "missing.csv")])),
        2
    );
    let bad = write(dir.path(), "bad.csv", "1,2\n3\n");
    assert_eq!(code(&run(&["entropy", "--input", &bad])), 2);
    let nan = write(dir.path(), "nan.csv", "1\nNaN\n");
    assert_eq!(code(&run(&["entropy", "--input", &nan])), 2);

    let data = normal_file(dir.path(), "n.csv", 50, 1);
    let plain = run(&["entropy", "--input", &data]);
    let ident = run(&["entropy", "--input", &data, "--feature", "identity"]);
    assert!(plain.status.success());
    assert_eq!(plain.stdout, ident.stdout);
    let proj = json(&run(&[
        "entropy",
        "--input",
        &data,
        "--feature",
        "randproj:1:3",
    ]));
    assert_eq!(proj["dim"], 1);
    assert_eq!(
        code(&run(&["entropy", "--input", &data, "--feature", "pca"])),
        4
    );
}

#[test]
fn select_policies() {
    let dir = TempDir::new().unwrap();
    let four = write(dir.path(), "four.csv", "0\n1\n9\n10\n");
    let v = json(&run(&[
        "select",
        "--input",
        &four,
        "-n",
        "2",
        "--greedy",
        "--initial",
        "0",
    ]));
    assert_eq!(v["indices"], serde_json::json!([0, 3]));

    let v = json(&run(&[
        "select",
        "--input",
        &four,
        "-n",
        "3",
        "--threshold",
        "--tau0",
        "5",
        "--alpha",
        "0.5",
        "--initial",
        "0",
    ]));
    assert_eq!(v["indices"], serde_json::json!([0, 2, 1]));
    assert_eq!(v["finalThreshold"].as_f64().unwrap(), 0.625);

    assert_eq!(
        code(&run(&[
            "select",
            "--input",
            &four,
            "-n",
            "2",
            "--threshold"
        ])),
        4
    );
    assert_eq!(
        code(&run(&[
            "select",
            "--input",
            &four,
            "-n",
            "2",
            "--threshold",
            "--tau0",
            "5",
            "--alpha",
            "2"
        ])),
        4
    );
    assert_eq!(code(&run(&["select", "--input", &four, "-n", "2"])), 4);
    assert_eq!(
        code(&run(&[
            "select", "--input", &four, "-n", "2", "--greedy", "--random"
        ])),
        4
    );
    assert_eq!(
        code(&run(&["select", "--input", &four, "-n", "5", "--random"])),
        3
    );

    let data = normal_file(dir.path(), "pool.csv", 100, 2);
    let a = run(&[
        "select", "--input", &data, "-n", "10", "--random", "--seed", "7",
    ]);
    let b = run(&[
        "select", "--input", &data, "-n", "10", "--random", "--seed", "7",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn select_writes_subset_in_input_format() {
    let dir = TempDir::new().unwrap();
    let pool = normal_file(dir.path(), "pool.bin", 40, 3);
    let out = path(&dir, "subset.out");
    let v = json(&run(&[
        "select", "--input", &pool, "-n", "5", "--greedy", "--out", &out,
    ]));
    let subset = load_pointset(Path::new(&out), Format::Rawbin).unwrap();
    let all = load_pointset(Path::new(&pool), Format::Rawbin).unwrap();
    let idx: Vec<usize> = v["indices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i.as_u64().unwrap() as usize)
        .collect();
    assert_eq!(subset.len(), 5);
    for (k, &i) in idx.iter().enumerate() {
        assert_eq!(subset.row(k), all.row(i));
    }
}

#[test]
fn measures() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.csv", "-1\n1\n");
    let b = write(dir.path(), "b.csv", "2\n4\n");
    let v = json(&run(&["frechet", "--input", &a, "--reference", &b]));
    assert!((v["frechet"].as_f64().unwrap() - 9.0).abs() < 1e-10);

    let g = write(dir.path(), "g.csv", "0.5\n4\n");
    let v = json(&run(&["gs", "--input", &g, "--reference", &a]));
    assert!((v["gs"].as_f64().unwrap() - 1.75).abs() < 1e-12);

    let m = write(dir.path(), "m.csv", "0\n1\n3\n");
    let v = json(&run(&["mnnd", "--input", &m]));
    assert!((v["mnnd"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn gen_bootstrap_copies_rows() {
    let dir = TempDir::new().unwrap();
    let train = normal_file(dir.path(), "train.csv", 30, 4);
    let out = path(&dir, "sample.csv");
    let v = json(&run(&[
        "gen",
        "--input",
        &train,
        "--generator",
        "bootstrap:0",
        "-m",
        "50",
        "--seed",
        "3",
        "--out",
        &out,
    ]));
    assert_eq!(v["samples"], 50);
    let t = load_pointset(Path::new(&train), Format::Csv).unwrap();
    let s = load_pointset(Path::new(&out), Format::Csv).unwrap();
    assert_eq!(s.len(), 50);
    assert!(s.rows().all(|r| t.rows().any(|q| q == r)));
    assert!(s.sources().iter().all(|t| t.to_string() == "syn1"));

    let v = json(&run(&[
        "gen",
        "--input",
        &train,
        "--generator",
        "gmm:2",
        "--out",
        &out,
    ]));
    assert!(v["diagnostics"]["logLikelihood"].as_array().unwrap().len() >= 2);
    assert_eq!(
        code(&run(&[
            "gen",
            "--input",
            &train,
            "--generator",
            "flow",
            "--out",
            &out
        ])),
        4
    );
}

fn loop_args<'a>(real: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "loop",
        "--input",
        real,
        "--out",
        out,
        "--iterations",
        "3",
        "--train-size",
        "60",
    ]
}

#[test]
fn loop_canonical_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let real = normal_file(dir.path(), "real.csv", 80, 5);
    let (o1, o2, o3) = (
        path(&dir, "a.json"),
        path(&dir, "b.json"),
        path(&dir, "c.json"),
    );
    for (o, canonical) in [(&o1, true), (&o2, true), (&o3, false)] {
        let mut args = loop_args(&real, o);
        args.extend([
            "--generator",
            "bootstrap:0.1",
            "--paradigm",
            "accumulate-subsample",
            "--selection",
            "greedy",
        ]);
        if canonical {
            args.push("--canonical");
        }
        let out = run(&args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(
            String::from_utf8_lossy(&out.stderr)
                .lines()
                .filter(|l| l.starts_with('['))
                .count(),
            3
        );
    }
    let a = std::fs::read(&o1).unwrap();
    assert_eq!(a, std::fs::read(&o2).unwrap());
    let stamped: Value = serde_json::from_slice(&std::fs::read(&o3).unwrap()).unwrap();
    assert!(stamped["runTimestamp"].is_string());
    let plain: Value = serde_json::from_slice(&a).unwrap();
    assert!(plain.get("runTimestamp").is_none());
    assert_eq!(plain["schemaVersion"], 1);
    assert!(Path::new(&path(&dir, "a.csv")).exists());
}

#[test]
fn loop_single_iteration_has_one_csv_row() {
    let dir = TempDir::new().unwrap();
    let real = normal_file(dir.path(), "real.csv", 50, 6);
    let out = path(&dir, "t.json");
    let csv = path(&dir, "custom.csv");
    let r = run(&[
        "loop",
        "--input",
        &real,
        "--out",
        &out,
        "--csv",
        &csv,
        "--iterations",
        "1",
        "--canonical",
    ]);
    assert!(r.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "iteration,entropy,duplicates,gs,mnnd,trace_cov,frechet_real,frac_real,frac_syn_1"
    );
}

#[test]
fn loop_bootstrap_memorization_entropy_decreases() {
    let dir = TempDir::new().unwrap();
    let mut good = 0;
    for seed in 0..50u64 {
        let real = normal_file(dir.path(), "real.csv", 1000, 100 + seed);
        let out = path(&dir, "t.json");
        let s = seed.to_string();
        let r = run(&[
            "loop",
            "--input",
            &real,
            "--out",
            &out,
            "--iterations",
            "8",
            "--generator",
            "bootstrap:0",
            "--seed",
            &s,
            "--canonical",
        ]);
        assert!(r.status.success());
        let csv = std::fs::read_to_string(path(&dir, "t.csv")).unwrap();
        let entropy: Vec<f64> = csv
            .lines()
            .skip(1)
            .take(5)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        if entropy.windows(2).all(|w| w[1] < w[0]) {
            good += 1;
        }
    }
    assert!(good >= 45, "{good}/50");
}

#[test]
fn loop_config_file_and_overrides() {
    let dir = TempDir::new().unwrap();
    let real = normal_file(dir.path(), "real.csv", 60, 7);
    let out = path(&dir, "t.json");
    let cfg = write(
        dir.path(),
        "run.ini",
        &format!(
            "# desk run\n[loop]\ninput = {real}\nout = {out}\nparadigm = replace\niterations = 2\ntrainSize = 40\ngenerator = bootstrap:0.05\nselection = random\nmasterSeed = 11\n"
        ),
    );
    let v = json(&run(&[
        "loop",
        "--config",
        &cfg,
        "--iterations",
        "3",
        "--canonical",
    ]));
    assert_eq!(v["config"]["iterations"], 3);
    assert_eq!(v["config"]["trainSize"], 40);
    assert_eq!(v["config"]["masterSeed"], 11);
    assert_eq!(v["config"]["selection"]["kind"], "random");
    let trace: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(trace["records"].as_array().unwrap().len(), 3);
    assert_eq!(trace["config"]["generationMultiplier"], Value::Null);

    let bad = write(dir.path(), "bad.ini", "train_size = 3\n");
    assert_eq!(code(&run(&["loop", "--config", &bad])), 4);
    assert_eq!(
        code(&run(&["loop", "--config", &path(&dir, "none.ini")])),
        2
    );
}

#[test]
fn loop_error_codes() {
    let dir = TempDir::new().unwrap();
    let real = normal_file(dir.path(), "real.csv", 30, 8);
    let out = path(&dir, "t.json");
    let mut args = loop_args(&real, &out);
    args[8] = "20";
    let mut acc = args.clone();
    acc.extend(["--paradigm", "accumulate", "--selection", "greedy"]);
    assert_eq!(code(&run(&acc)), 4);
    let mut big = args.clone();
    big[8] = "31";
    assert_eq!(code(&run(&big)), 3);
    assert_eq!(code(&run(&["loop", "--out", &out])), 4);
    let mut limit = args.clone();
    limit.extend(["--paradigm", "accumulate", "--pool-limit", "50"]);
    assert_eq!(code(&run(&limit)), 4);

    let tiny = write(dir.path(), "tiny.csv", "1\n2\n");
    let r = run(&[
        "loop",
        "--input",
        &tiny,
        "--out",
        &out,
        "--iterations",
        "2",
        "--generator",
        "gmm:3",
    ]);
    assert_eq!(code(&r), 5);
    assert!(String::from_utf8_lossy(&r.stderr).contains("iteration 1"));
}

#[test]
fn thread_env_is_validated() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "two.csv", "0\n1\n");
    for bad in ["0", "many"] {
        let out = bin()
            .args(["entropy", "--input", &f])
            .env("COLLAPSE_LAB_THREADS", bad)
            .output()
            .unwrap();
        assert_eq!(code(&out), 4);
    }
    let out = bin()
        .args(["entropy", "--input", &f])
        .env("COLLAPSE_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 4);
}

fn make_trace(dir: &TempDir, name: &str, iterations: &str) -> PathBuf {
    let real = normal_file(dir.path(), "real.csv", 60, 9);
    let out = dir.path().join(name);
    let r = run(&[
        "loop",
        "--input",
        &real,
        "--out",
        out.to_str().unwrap(),
        "--iterations",
        iterations,
        "--generator",
        "bootstrap:0.1",
        "--canonical",
    ]);
    assert!(r.status.success());
    out
}

#[test]
fn analyze_compare() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, "t.json", "4");
    let t = t.to_str().unwrap();
    let v = json(&run(&["analyze", "--mode", "compare", t, t]));
    let deltas = v["deltas"].as_array().unwrap();
    assert_eq!(deltas.len(), 4);
    for d in deltas {
        for key in ["entropy", "gs", "mnnd", "frechetToReal"] {
            assert_eq!(d[key].as_f64().unwrap(), 0.0);
        }
    }
    let short = make_trace(&dir, "s.json", "2");
    assert_eq!(
        code(&run(&[
            "analyze",
            "--mode",
            "compare",
            t,
            short.to_str().unwrap()
        ])),
        4
    );
    assert_eq!(code(&run(&["analyze", "--mode", "compare", t])), 4);
    let junk = write(dir.path(), "junk.json", "{\"records\": 3}");
    assert_eq!(code(&run(&["analyze", "--mode", "correlate", &junk])), 2);
}

#[test]
fn analyze_correlate_constructed_identity() {
    let dir = TempDir::new().unwrap();
    let t = make_trace(&dir, "t.json", "5");
    let mut trace: Value = serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
    for (i, rec) in trace["records"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .enumerate()
    {
        let gs = 0.1 * (i as f64 + 1.0).powi(2);
        rec["gsValue"] = gs.into();
        rec["trainingEntropy"] = gs.ln().into();
    }
    let f = dir.path().join("id.json");
    std::fs::write(&f, serde_json::to_string(&trace).unwrap()).unwrap();
    let report = path(&dir, "report.json");
    let v = json(&run(&[
        "analyze",
        "--mode",
        "correlate",
        f.to_str().unwrap(),
        "--out",
        &report,
    ]));
    assert!((v["r"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["pointCount"], 5);
    assert_eq!(v["excludedCount"], 0);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(saved, v);

    trace["records"][0]["gsValue"] = 0.0.into();
    std::fs::write(&f, serde_json::to_string(&trace).unwrap()).unwrap();
    let v = json(&run(&[
        "analyze",
        "--mode",
        "correlate",
        f.to_str().unwrap(),
    ]));
    assert_eq!(v["excludedCount"], 1);
    assert_eq!(v["pointCount"], 4);
}
