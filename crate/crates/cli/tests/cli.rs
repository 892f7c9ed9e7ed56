use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_vnnarena");
const SOLVE: &str = env!("CARGO_BIN_EXE_vnnarena-solve");

fn vnnarena(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("VNNARENA_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// `y = x` on `x in [0, 1]`, violated when `y >= 0.5`.
fn identity_case(dir: &Path) -> (PathBuf, PathBuf) {
    let net = dir.join("id.txt");
    let spec = dir.join("p.vnnlib");
    fs::write(&net, "gemm 1 1\nweights 1\n").unwrap();
    fs::write(
        &spec,
        "(declare-const X_0 Real)\n(declare-const Y_0 Real)\n\
         (assert (>= X_0 0))\n(assert (<= X_0 1))\n(assert (>= Y_0 0.5))\n",
    )
    .unwrap();
    (net, spec)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_ce_valid_witness() {
    let dir = tempfile::tempdir().unwrap();
    let (net, spec) = identity_case(dir.path());
    let ce = dir.path().join("w.txt");
    fs::write(&ce, "((X_0 0.75)\n(Y_0 0.75))\n").unwrap();
    let o = vnnarena(&[
        "check-ce",
        "--network",
        s(&net),
        "--spec",
        s(&spec),
        "--ce",
        s(&ce),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "valid (clause 0)");

    fs::write(&ce, "((X_0 0.25)\n(Y_0 0.25))\n").unwrap();
    let o = vnnarena(&[
        "check-ce",
        "--network",
        s(&net),
        "--spec",
        s(&spec),
        "--ce",
        s(&ce),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("invalid output"), "{}", stdout(&o));

    // claimed outputs are ignored; the network is re-run
    fs::write(&ce, "((X_0 0.25)\n(Y_0 0.9))\n").unwrap();
    let o = vnnarena(&[
        "check-ce",
        "--network",
        s(&net),
        "--spec",
        s(&spec),
        "--ce",
        s(&ce),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn parse_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.vnnlib");
    fs::write(&bad, "(declare-const X_0 Real)\n(assert (<= X_0 ))\n").unwrap();
    let o = vnnarena(&["parse", s(&bad)]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("bad.vnnlib: 2:"), "{err}");

    let (net, spec) = identity_case(dir.path());
    let o = vnnarena(&["parse", s(&spec)]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).trim(),
        "property: 1 inputs, 1 outputs, 1 clauses"
    );
    let o = vnnarena(&["parse", s(&net)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("network: 1 inputs, 1 outputs"));
}

#[test]
fn bad_invocations_fail() {
    assert!(!vnnarena(&["frobnicate"]).status.success());
    assert!(!vnnarena(&["score"]).status.success());
    let o = vnnarena(&["score", "--records", "/nonexistent/records.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn score_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let records = fixture("score/adjudicated.csv");
    let o = vnnarena(&["score", "--records", s(&records), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = fixture("score/golden");
    let mut names: Vec<_> = fs::read_dir(&golden)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 3);
    let text = stdout(&o);
    for name in names {
        let want = fs::read_to_string(golden.join(&name)).unwrap();
        let got = fs::read_to_string(dir.path().join(&name)).unwrap();
        assert_eq!(got, want, "{name:?}");
        // every CSV row also appears in the printed table
        for line in want.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert!(
                text.lines()
                    .any(|l| l.split_whitespace().collect::<Vec<_>>() == fields),
                "row {line} missing from output"
            );
        }
    }
}

fn tools_file(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("tools.toml");
    fs::write(
        &p,
        format!("[[tool]]\nname = \"bab\"\nbuiltin = \"verify-first\"\n\n[[tool]]\nname = \"pgd\"\nbuiltin = \"attack-first\"\n{extra}"),
    )
    .unwrap();
    p
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("b");
    assert!(
        vnnarena(&["gen-benchmark", "--out", s(&bench), "--count", "2"])
            .status
            .success()
    );
    let inst = bench.join("instances.csv");
    let out = dir.path().join("out");
    for extra in [
        "[[tool]]\nname = \"bab\"\nbuiltin = \"verify-first\"\n",
        "[[tool]]\nname = \"x\"\n",
        "[[tool]]\nname = \"x\"\nbuiltin = \"verify-first\"\nrun = \"true\"\n",
        "[[tool]]\nname = \"x y\"\nrun = \"true\"\n",
        "[[tool]]\nname = \"x\"\nbuiltin = \"guess\"\n",
        "[[tool]]\nname = \"x\"\nrun = \"true\"\ncolour = \"red\"\n",
    ] {
        let cfg = tools_file(dir.path(), extra);
        let o = vnnarena(&[
            "run",
            "--config",
            s(&cfg),
            "--instances",
            s(&inst),
            "--out",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(2), "{extra}");
    }
}

#[test]
fn external_solver_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("synth");
    let o = vnnarena(&[
        "gen-benchmark",
        "--out",
        s(&bench),
        "--count",
        "4",
        "--seed",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = dir.path().join("tools.toml");
    fs::write(
        &cfg,
        format!(
            "[[tool]]\nname = \"ext\"\nrun = \"{SOLVE} --mode verify-first {{network}} {{spec}} {{timeout}} {{result}} {{ce}}\"\n\
             [[tool]]\nname = \"bab\"\nbuiltin = \"verify-first\"\n"
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = vnnarena(&[
        "all",
        "--config",
        s(&cfg),
        "--instances",
        s(&bench.join("instances.csv")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let adjudicated = fs::read_to_string(out.join("adjudicated.csv")).unwrap();
    assert!(!adjudicated.contains(",incorrect"), "{adjudicated}");
    let manifest = fs::read_to_string(bench.join("manifest.csv")).unwrap();
    let labels: Vec<&str> = manifest
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    for line in adjudicated.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let label = labels[f[2].parse::<usize>().unwrap()];
        assert_eq!(f[6], label, "{line}");
    }
    for f in [
        "detail.csv",
        "overall.csv",
        "synth.table.csv",
        "synth.cactus.csv",
        "synth.cactus.svg",
    ] {
        assert!(out.join("report").join(f).exists(), "{f}");
    }
}
