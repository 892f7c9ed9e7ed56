use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use vnnarena::adjudicate::{Classification, ResultStatus, Tolerances};
use vnnarena::harness::{
    adjudicate_records, apply_overhead, gen_benchmark, load_instances, measure_overhead,
    minimum_runtime, read_adjudicated, read_records, run_instance, write_adjudicated,
    write_records, GenConfig, Instance, RunRecord, ToolAdapter, PROBE_TIMEOUT,
};
use vnnarena::netir::load_network;
use vnnarena::solvers::{oracle_decide, Mode};
use vnnarena::vnnlib::parse_vnnlib;

struct Capture(Mutex<Vec<String>>);

impl log::Log for Capture {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }
    fn log(&self, record: &log::Record) {
        if record.level() <= log::Level::Warn {
            self.0.lock().unwrap().push(record.args().to_string());
        }
    }
    fn flush(&self) {}
}

static LOGS: Capture = Capture(Mutex::new(Vec::new()));

fn warnings() -> Vec<String> {
    let _ = log::set_logger(&LOGS);
    log::set_max_level(log::LevelFilter::Warn);
    LOGS.0.lock().unwrap().clone()
}

const IDENTITY: &str = "gemm 1 1\nweights 1\n";

fn spec(out: &str) -> String {
    format!("(declare-const X_0 Real)(declare-const Y_0 Real)(assert (>= X_0 0))(assert (<= X_0 1)){out}\n")
}

fn bench(dir: &Path, rows: &[(&str, f64)]) -> std::path::PathBuf {
    let b = dir.join("toy");
    fs::create_dir_all(&b).unwrap();
    fs::write(b.join("id.net"), IDENTITY).unwrap();
    fs::write(b.join("unreachable.vnnlib"), spec("(assert (>= Y_0 2))")).unwrap();
    fs::write(b.join("reachable.vnnlib"), spec("(assert (>= Y_0 0.5))")).unwrap();
    let csv: String = rows
        .iter()
        .map(|(s, t)| format!("id.net,{s},{t}\n"))
        .collect();
    fs::write(b.join("instances.csv"), csv).unwrap();
    b.join("instances.csv")
}

fn one(dir: &Path, spec_file: &str, timeout: f64) -> Instance {
    load_instances(bench(dir, &[(spec_file, timeout)]))
        .unwrap()
        .remove(0)
}

#[test]
fn loads_rows_relative_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = bench(
        dir.path(),
        &[
            ("unreachable.vnnlib", 5.0),
            ("reachable.vnnlib", 5.0),
            ("reachable.vnnlib", 2.5),
        ],
    );
    let insts = load_instances(&path).unwrap();
    assert_eq!(insts.len(), 3);
    assert_eq!(insts[2].index, 2);
    assert_eq!(insts[2].timeout, 2.5);
    assert_eq!(insts[0].benchmark, "toy");
    assert!(insts[1].spec.ends_with("reachable.vnnlib"));

    fs::write(&path, "network,spec,timeout\nid.net,reachable.vnnlib,1\n").unwrap();
    assert_eq!(load_instances(&path).unwrap().len(), 1);
}

#[test]
fn rejects_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = bench(dir.path(), &[("reachable.vnnlib", -1.0)]);
    let err = load_instances(&path).unwrap_err().to_string();
    assert!(err.contains("timeout"), "{err}");

    fs::write(&path, "id.net,missing.vnnlib,1\n").unwrap();
    assert!(load_instances(&path)
        .unwrap_err()
        .to_string()
        .contains("missing file"));

    fs::write(
        path.with_file_name("two.vnnlib"),
        "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)\
         (assert (>= X_0 0))(assert (<= X_0 1))(assert (>= X_1 0))(assert (<= X_1 1))(assert (>= Y_0 0))",
    )
    .unwrap();
    fs::write(&path, "id.net,two.vnnlib,1\n").unwrap();
    let err = load_instances(&path).unwrap_err().to_string();
    assert!(err.contains("inputs"), "{err}");
}

#[test]
fn warns_above_time_cap() {
    let dir = tempfile::tempdir().unwrap();
    let path = bench(
        dir.path(),
        &[
            ("reachable.vnnlib", 12_500.0),
            ("reachable.vnnlib", 12_500.0),
        ],
    );
    warnings();
    let insts = load_instances(&path).unwrap();
    assert_eq!(insts.len(), 2);
    assert!(warnings()
        .iter()
        .any(|w| w.contains("25000") && w.contains("cap")));
}

#[test]
fn builtin_holds_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let inst = one(dir.path(), "unreachable.vnnlib", 10.0);
    let tool = ToolAdapter::builtin("bab", Mode::VerifyFirst, dir.path().join("results"));
    let r = run_instance(&tool, &inst).unwrap();
    assert_eq!(r.status, ResultStatus::Holds);
    assert!(r.raw < 10.0);
    assert_eq!(
        fs::read_to_string(tool.files(&inst).result).unwrap(),
        "holds\n"
    );
}

#[test]
fn builtin_violation_writes_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let inst = one(dir.path(), "reachable.vnnlib", 10.0);
    let tool = ToolAdapter::builtin("pgd", Mode::AttackFirst, dir.path().join("results"));
    let r = run_instance(&tool, &inst).unwrap();
    assert_eq!(r.status, ResultStatus::Violated);
    assert_eq!(r.ce.as_deref(), Some(tool.files(&inst).ce.as_path()));
    let adj = adjudicate_records(&[r], Tolerances::default()).unwrap();
    assert_eq!(adj[0].classification, Classification::CorrectViolated);
    assert_eq!(adj[0].ce_verdict, "valid (clause 0)");
}

#[test]
fn sleeping_tool_is_killed_at_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let inst = one(dir.path(), "reachable.vnnlib", 1.0);
    let tool =
        ToolAdapter::external("sleeper", None, "sleep 999", dir.path().join("results")).unwrap();
    let start = Instant::now();
    let r = run_instance(&tool, &inst).unwrap();
    let wall = start.elapsed().as_secs_f64();
    assert_eq!(r.status, ResultStatus::Timeout);
    assert_eq!(r.raw, 1.0);
    assert!(wall < 3.0, "took {wall}");
}

#[test]
fn whole_process_group_is_killed() {
    let dir = tempfile::tempdir().unwrap();
    let inst = one(dir.path(), "reachable.vnnlib", 1.0);
    let pidfile = dir.path().join("pid");
    let cmd = format!("sleep 999 & echo $! > {}; wait", pidfile.display());
    let tool = ToolAdapter::external("forker", None, cmd, dir.path().join("results")).unwrap();
    let r = run_instance(&tool, &inst).unwrap();
    assert_eq!(r.status, ResultStatus::Timeout);
    let pid = fs::read_to_string(&pidfile).unwrap().trim().to_string();
    std::thread::sleep(std::time::Duration::from_millis(100));
    let stat = fs::read_to_string(format!("/proc/{pid}/stat")).unwrap_or_default();
    assert!(
        stat.is_empty() || stat.contains(") Z "),
        "background sleep {pid} survived: {stat}"
    );
}

#[test]
fn failing_tool_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = one(dir.path(), "reachable.vnnlib", 5.0);
    let results = dir.path().join("results");
    let tool = ToolAdapter::external("crash", None, "exit 3", &results).unwrap();
    assert_eq!(
        run_instance(&tool, &inst).unwrap().status,
        ResultStatus::Error
    );

    let garbage =
        ToolAdapter::external("garbage", None, "echo maybe > {result}", &results).unwrap();
    assert_eq!(
        run_instance(&garbage, &inst).unwrap().status,
        ResultStatus::Error
    );

    let bad_prepare = ToolAdapter::external(
        "prep",
        Some("exit 1".into()),
        "echo holds > {result}",
        &results,
    )
    .unwrap();
    assert_eq!(
        run_instance(&bad_prepare, &inst).unwrap().status,
        ResultStatus::Error
    );
}

#[test]
fn external_protocol_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = one(dir.path(), "reachable.vnnlib", 5.0);
    let run = "test -f {network} && test -f {spec} && test {timeout} = 5 && \
               printf 'violated\\n' > {result} && printf '((X_0 0.75)\\n(Y_0 0.75))\\n' > {ce}";
    let tool = ToolAdapter::external(
        "echo",
        Some("true {network}".into()),
        run,
        dir.path().join("r s"),
    )
    .unwrap();
    let r = run_instance(&tool, &inst).unwrap();
    assert_eq!(r.status, ResultStatus::Violated);
    assert!(r.ce.is_some());

    let seeded = ToolAdapter::external(
        "seed",
        None,
        "echo unknown $VNNARENA_SEED > {result}",
        dir.path(),
    )
    .unwrap()
    .with_seed(42);
    run_instance(&seeded, &inst).unwrap();
    assert_eq!(
        fs::read_to_string(seeded.files(&inst).result).unwrap(),
        "unknown 42\n"
    );
}

#[test]
fn missing_ce_is_incorrect() {
    let dir = tempfile::tempdir().unwrap();
    let inst = one(dir.path(), "reachable.vnnlib", 5.0);
    let tool = ToolAdapter::external("noce", None, "echo violated > {result}", dir.path()).unwrap();
    let r = run_instance(&tool, &inst).unwrap();
    assert_eq!((r.status, r.ce.is_none()), (ResultStatus::Violated, true));
    let adj = adjudicate_records(&[r], Tolerances::default()).unwrap();
    assert_eq!(adj[0].ce_verdict, "absent");
    assert_eq!(adj[0].classification, Classification::Incorrect);
}

#[test]
fn overhead_rules() {
    use ResultStatus::*;
    assert_eq!(
        minimum_runtime(&[(Holds, 2.3), (Holds, 2.1), (Violated, 2.6)]),
        Some(2.1)
    );
    assert_eq!(minimum_runtime(&[(Unknown, 0.4)]), Some(0.4));
    assert_eq!(minimum_runtime(&[(Error, 0.1), (Timeout, 60.0)]), None);

    let rec = |raw| RunRecord {
        tool: "t".into(),
        benchmark: "b".into(),
        instance: 0,
        network: "n".into(),
        spec: "s".into(),
        timeout: 10.0,
        status: Holds,
        raw,
        corrected: raw,
        ce: None,
    };
    let out = apply_overhead(vec![rec(5.2), rec(1.5)], 2.1);
    assert!((out[0].corrected - 3.1).abs() < 1e-12);
    assert_eq!(out[1].corrected, 0.0);
    assert_eq!(apply_overhead(vec![rec(5.2)], 0.0)[0].corrected, 5.2);
}

#[test]
fn overhead_probes() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = ToolAdapter::builtin("b", Mode::VerifyFirst, dir.path().join("b"));
    let t = measure_overhead(&builtin, PROBE_TIMEOUT).unwrap();
    assert!((0.0..1.0).contains(&t), "{t}");

    let broken = ToolAdapter::external("x", None, "exit 1", dir.path().join("x")).unwrap();
    warnings();
    assert_eq!(measure_overhead(&broken, PROBE_TIMEOUT).unwrap(), 0.0);
    assert!(warnings()
        .iter()
        .any(|w| w.contains("every overhead probe failed")));
}

#[test]
fn generated_benchmark_is_labelled_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig {
        seed: 7,
        count: 30,
        ..GenConfig::default()
    };
    let a = dir.path().join("a");
    let manifest = gen_benchmark(&a, &cfg).unwrap();
    assert_eq!(manifest.len(), 30);
    let insts = load_instances(a.join("instances.csv")).unwrap();
    assert_eq!(insts.len(), 30);
    for (m, inst) in manifest.iter().zip(&insts) {
        let net = load_network(&inst.network).unwrap();
        let p = parse_vnnlib(&fs::read_to_string(&inst.spec).unwrap()).unwrap();
        let holds = oracle_decide(&net, &p).unwrap().is_holds();
        assert_eq!(m.label, if holds { "holds" } else { "violated" });
    }
    assert!(manifest.iter().any(|m| m.label == "holds"));
    assert!(manifest.iter().any(|m| m.label == "violated"));

    let b = dir.path().join("b");
    gen_benchmark(&b, &cfg).unwrap();
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 62);
    for n in names {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n:?}"
        );
    }

    let empty = GenConfig { count: 0, ..cfg };
    assert!(gen_benchmark(&dir.path().join("c"), &empty)
        .unwrap_err()
        .to_string()
        .contains("empty"));
    let big = GenConfig {
        hidden: vec![10, 10],
        count: 1,
        ..GenConfig::default()
    };
    assert!(gen_benchmark(&dir.path().join("d"), &big).is_err());
}

#[test]
fn records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = one(dir.path(), "reachable.vnnlib", 10.0);
    let tool = ToolAdapter::builtin("pgd", Mode::AttackFirst, dir.path().join("out/results"));
    let recs = vec![run_instance(&tool, &inst).unwrap()];
    let path = dir.path().join("out/records.csv");
    write_records(&path, &recs).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains(",results/toy/0000.ce\n"), "{text}");
    let back = read_records(&path).unwrap();
    assert_eq!(back[0].status, recs[0].status);
    assert_eq!(
        fs::canonicalize(back[0].ce.as_ref().unwrap()).unwrap(),
        fs::canonicalize(recs[0].ce.as_ref().unwrap()).unwrap()
    );

    let adj = adjudicate_records(&back, Tolerances::default()).unwrap();
    let apath = dir.path().join("out/adjudicated.csv");
    write_adjudicated(&apath, &adj).unwrap();
    let again = read_adjudicated(&apath).unwrap();
    assert_eq!(again[0].classification, adj[0].classification);
    assert_eq!(again[0].ce_verdict, adj[0].ce_verdict);
    assert_eq!(again[0].witness_tool.as_deref(), Some("pgd"));
}
