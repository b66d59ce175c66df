use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn cycleflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cycleflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn basis_of_triangle_has_one_cycle() {
    let doc = stdout_json(&cycleflow(&["basis", path(&fixture("triangle.json"))]));
    assert_eq!(doc["mu"], 1);
    assert_eq!(doc["cycles"].as_array().unwrap().len(), 1);
}

#[test]
fn basis_file_certifies_against_its_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("basis.json");
    for method in ["tree", "horton"] {
        let r = cycleflow(&[
            "basis",
            path(&fixture("ieee30.json")),
            "--method",
            method,
            "--out",
            path(&out),
        ]);
        assert!(r.status.success());
        let ok = cycleflow(&[
            "validate",
            path(&out),
            "--problem",
            path(&fixture("ieee30.json")),
        ]);
        assert!(ok.status.success(), "{}", stderr(&ok));
        assert!(String::from_utf8_lossy(&ok.stdout).contains("12 cycles, certified"));
    }
    // a 12-cycle basis cannot certify against a 3-node graph
    let bad = cycleflow(&[
        "validate",
        path(&out),
        "--problem",
        path(&fixture("triangle.json")),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn unbalanced_file_fails_validation_with_the_field() {
    let r = cycleflow(&["validate", path(&fixture("unbalanced.json"))]);
    assert_eq!(r.status.code(), Some(1));
    let msg = stderr(&r);
    assert!(
        msg.contains("IoError::Validation")
            && msg.contains("injections")
            && msg.contains("unbalanced"),
        "{msg}"
    );
}

#[test]
fn bad_inputs_exit_one() {
    let r = cycleflow(&["solve", path(&fixture("absent.json"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("IoError::Io"));
    let r = cycleflow(&["solve", path(&fixture("opf_small.json"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("cli::WrongKind"));
    let r = cycleflow(&["reduce", path(&fixture("triangle.json")), "--ref-node", "3"]);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(cycleflow(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cycleflow(&["basis"]).status.code(), Some(1));
}

#[test]
fn reduced_solve_matches_full_solve() {
    let dir = tempfile::tempdir().unwrap();
    let basis = dir.path().join("basis.json");
    let problem = fixture("eleven_node.json");
    assert!(cycleflow(&["basis", path(&problem), "-o", path(&basis)])
        .status
        .success());
    let full = stdout_json(&cycleflow(&["solve", path(&problem)]));
    for ref_node in ["10", "0", "4"] {
        let red = stdout_json(&cycleflow(&[
            "solve",
            path(&problem),
            "--reduced",
            path(&basis),
            "--ref-node",
            ref_node,
        ]));
        let (a, b) = (
            full["objective"].as_f64().unwrap(),
            red["objective"].as_f64().unwrap(),
        );
        assert!(
            (a - b).abs() <= 1e-6 * a.abs().max(1.0),
            "reference {ref_node}: {a} vs {b}"
        );
        assert_eq!(red["cycle_flows"].as_array().unwrap().len(), 8);
    }
    let sol = dir.path().join("solution.json");
    assert!(cycleflow(&["solve", path(&problem), "-o", path(&sol)])
        .status
        .success());
    let ok = cycleflow(&["validate", path(&sol), "--problem", path(&problem)]);
    assert!(ok.status.success(), "{}", stderr(&ok));
}

#[test]
fn solve_trace_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let doc = stdout_json(&cycleflow(&[
        "solve",
        path(&fixture("triangle.json")),
        "--trace",
        path(&trace),
    ]));
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("iteration,primal_res,dual_res,objective")
    );
    assert_eq!(lines.count() as u64, doc["iterations"].as_u64().unwrap());
}

#[test]
fn iteration_limit_exits_two_and_keeps_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let r = cycleflow(&[
        "solve",
        path(&fixture("eleven_node.json")),
        "--max-iterations",
        "3",
        "--trace",
        path(&trace),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("QpError::MaxIterations"));
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 4);
}

#[test]
fn reduce_writes_the_reduced_problem() {
    let doc = stdout_json(&cycleflow(&[
        "reduce",
        path(&fixture("triangle.json")),
        "--method",
        "tree",
    ]));
    assert_eq!(doc["kind"], "reduced");
    assert_eq!(doc["mu"], 1);
    assert_eq!(doc["particular"].as_array().unwrap().len(), 3);
}

#[test]
fn maxflow_of_the_eleven_node_example() {
    let doc = stdout_json(&cycleflow(&[
        "maxflow",
        path(&fixture("eleven_node.json")),
        "--sources",
        "0,3",
        "--sinks",
        "8,10",
    ]));
    assert_eq!(doc["value"].as_f64(), Some(82.0));
    assert_eq!(doc["cut_capacity"].as_f64(), Some(82.0));
    let by_sign = stdout_json(&cycleflow(&["maxflow", path(&fixture("eleven_node.json"))]));
    assert!(by_sign["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn opf_reduced_and_full_agree() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("opf.json");
    let problem = fixture("opf_small.json");
    assert!(cycleflow(&["opf", path(&problem), "-o", path(&sol)])
        .status
        .success());
    let red: Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    let full = stdout_json(&cycleflow(&["opf", path(&problem), "--full"]));
    let (a, b) = (
        red["objective"].as_f64().unwrap(),
        full["objective"].as_f64().unwrap(),
    );
    assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
    assert!(red["residuals"]["dc"].as_f64().unwrap() <= 1e-6);
    let ok = cycleflow(&["validate", path(&sol), "--problem", path(&problem)]);
    assert!(ok.status.success(), "{}", stderr(&ok));
}

#[test]
fn simulate_writes_a_trace_with_the_switch() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let refs = dir.path().join("reference.json");
    let problem = fixture("eleven_node.json");
    let schedule = fixture("eleven_node_schedule.json");
    let doc = stdout_json(&cycleflow(&[
        "simulate",
        path(&problem),
        "--schedule",
        path(&schedule),
        "--trace",
        path(&trace),
        "--save-reference",
        path(&refs),
        "--threads",
        "2",
    ]));
    assert_eq!(doc["converged"], true);
    assert_eq!(doc["agents"], 8);
    let rounds = doc["rounds"].as_u64().unwrap() as usize;
    let text = std::fs::read_to_string(&trace).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), rounds * 8);
    assert!(rows.iter().filter(|r| r[2] == "1").all(|r| r[0] == "50"));
    assert_eq!(rows.iter().filter(|r| r[2] == "1").count(), 8);

    let ok = cycleflow(&[
        "validate",
        path(&refs),
        "--problem",
        path(&problem),
        "--schedule",
        path(&schedule),
    ]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(
        cycleflow(&["validate", path(&schedule), "--problem", path(&problem)])
            .status
            .success()
    );

    // a supplied reference replaces the computed one
    let again = stdout_json(&cycleflow(&[
        "simulate",
        path(&problem),
        "--schedule",
        path(&schedule),
        "--reference",
        path(&refs),
    ]));
    assert_eq!(again["rounds"], doc["rounds"]);
}

#[test]
fn round_limit_exits_two_and_keeps_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let r = cycleflow(&[
        "simulate",
        path(&fixture("eleven_node.json")),
        "--max-rounds",
        "5",
        "--trace",
        path(&trace),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("AdmmError::MaxRounds"));
    assert_eq!(
        std::fs::read_to_string(&trace).unwrap().lines().count(),
        1 + 5 * 8
    );
}

#[test]
fn validate_recognizes_every_document() {
    for (name, prefix) in [
        ("ieee30.json", "ok: graph"),
        ("triangle.json", "ok: flow problem"),
        ("opf_small.json", "ok: opf problem"),
        ("eleven_node_schedule.json", "ok: schedule"),
    ] {
        let r = cycleflow(&["validate", path(&fixture(name))]);
        assert!(r.status.success(), "{name}: {}", stderr(&r));
        assert!(
            String::from_utf8_lossy(&r.stdout).starts_with(prefix),
            "{name}"
        );
    }
}

#[test]
fn help_documents_every_flag() {
    let top = cycleflow(&["--help"]);
    assert!(top.status.success());
    let text = String::from_utf8_lossy(&top.stdout);
    assert!(text.contains("Exit codes"));
    let flags: &[(&str, &[&str])] = &[
        ("basis", &["--method", "--out"]),
        ("reduce", &["--basis", "--method", "--ref-node", "--out"]),
        (
            "solve",
            &[
                "--reduced",
                "--ref-node",
                "--trace",
                "--max-iterations",
                "--eps-abs",
                "--eps-rel",
                "--out",
            ],
        ),
        ("maxflow", &["--sources", "--sinks", "--out"]),
        (
            "opf",
            &[
                "--basis",
                "--method",
                "--ref-node",
                "--full",
                "--max-iterations",
                "--eps-abs",
                "--eps-rel",
                "--out",
            ],
        ),
        (
            "simulate",
            &[
                "--basis",
                "--method",
                "--ref-node",
                "--schedule",
                "--reference",
                "--save-reference",
                "--trace",
                "--threads",
                "--rho",
                "--no-curvature-scaling",
                "--tolerance",
                "--max-rounds",
                "--out",
            ],
        ),
        ("validate", &["--problem", "--schedule"]),
    ];
    for (cmd, expected) in flags {
        assert!(text.contains(cmd), "{cmd} missing from top-level help");
        let r = cycleflow(&[cmd, "-h"]);
        assert!(r.status.success());
        let help = String::from_utf8_lossy(&r.stdout);
        for flag in *expected {
            let line = help
                .lines()
                .find(|l| l.contains(flag))
                .unwrap_or_else(|| panic!("{cmd}: {flag}"));
            // every flag line carries a description after its name
            let tail = line
                .split(flag)
                .nth(1)
                .unwrap()
                .trim_start_matches(|c: char| c != ' ')
                .trim();
            assert!(!tail.is_empty(), "{cmd}: {flag} is undocumented");
        }
    }
}
