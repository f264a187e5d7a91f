use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qgm_core::anneal::SampleSet;
use qgm_core::bench::{solve_model, Solver, SolverParams};
use qgm_core::qap::{brute_force_qap, QapInstance};
use qgm_core::qubo::{build, Formulation, QuboModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn qgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgm"))
        .args(args)
        .env("QGM_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = qgm(args);
    assert!(
        out.status.success(),
        "qgm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write_instance(dir: &Path, name: &str, inst: &QapInstance) -> PathBuf {
    let path = dir.join(name);
    inst.save(&path).unwrap();
    path
}

fn random_instance(n: usize, seed: u64) -> QapInstance {
    QapInstance::random_uniform(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Lambda list from the printed build summary.
fn lambdas(summary: &str) -> Vec<f64> {
    let start = summary.find("lambda=[").unwrap() + "lambda=[".len();
    let end = start + summary[start..].find(']').unwrap();
    summary[start..end].split(", ").map(|v| v.parse().unwrap()).collect()
}

fn field<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap()
}

#[test]
fn build_zero_instance_has_zero_penalty() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(dir.path(), "z.json", &QapInstance::zeros(2));
    let model_path = dir.path().join("z.qubo.json");
    let out = ok(&[
        "build",
        "--instance",
        s(&inst),
        "--formulation",
        "baseline",
        "--out",
        s(&model_path),
    ]);
    let summary = stdout(&out);
    assert_eq!(field(&summary, "dim"), "4");
    assert!(lambdas(&summary).iter().all(|&l| l == 0.0));
    let model = QuboModel::load(&model_path).unwrap();
    assert_eq!(model.dim(), 4);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    assert!(json["provenance"]["inputs"]["instance"].is_string());
    assert!(json["bounds"].is_object());
}

#[test]
fn build_inserted_three_has_four_variables() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(dir.path(), "i.json", &random_instance(3, 1));
    let out = ok(&["build", "--instance", s(&inst), "--formulation", "inserted"]);
    assert_eq!(field(&stderr(&out), "dim"), "4");
    let model = QuboModel::from_json_str(&stdout(&out)).unwrap();
    assert_eq!(model.dim(), 4);
}

#[test]
fn build_row_wise_four_prints_eight_lambdas() {
    let dir = TempDir::new().unwrap();
    let inst = random_instance(4, 2);
    let path = write_instance(dir.path(), "i.json", &inst);
    let out = ok(&[
        "build",
        "--instance",
        s(&path),
        "--formulation",
        "row-wise",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    let summary = stdout(&out);
    assert_eq!(field(&summary, "dim"), "16");
    let printed = lambdas(&summary);
    assert_eq!(printed.len(), 8);
    let model = build(&inst, Formulation::RowWise, 1.0).unwrap();
    for (p, l) in printed.iter().zip(model.applied_lambdas()) {
        assert!((p - l).abs() < 1e-6);
    }
    let mut distinct = printed.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    assert!(distinct.len() > 1);
}

#[test]
fn sparse_text_output() {
    let dir = TempDir::new().unwrap();
    let inst = random_instance(3, 3);
    let path = write_instance(dir.path(), "i.json", &inst);
    let txt = dir.path().join("m.txt");
    ok(&[
        "build",
        "--instance",
        s(&path),
        "--formulation",
        "baseline",
        "--out",
        s(&txt),
    ]);
    let text = std::fs::read_to_string(&txt).unwrap();
    let form = qgm_core::qubo::parse_sparse_text(&text, 9).unwrap();
    let model = build(&inst, Formulation::Baseline, 1.0).unwrap();
    for z in 0..512u64 {
        let ones: Vec<usize> = (0..9).filter(|i| z >> i & 1 == 1).collect();
        let e = form.energy_of_support(&ones);
        assert!((e - model.energy_of_index(z)).abs() < 1e-9 * e.abs().max(1.0));
    }
}

#[test]
fn nonpositive_scale_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let path = write_instance(dir.path(), "i.json", &random_instance(2, 4));
    let out = qgm(&[
        "build",
        "--instance",
        s(&path),
        "--formulation",
        "baseline",
        "--scale",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_instance_names_the_field() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"n": 2, "W": [[1.0]], "c": [0, 0, 0, 0]}"#).unwrap();
    let out = qgm(&["build", "--instance", s(&path), "--formulation", "baseline"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("W"));

    std::fs::write(&path, "{\"n\": 2,\n \"W\": oops}").unwrap();
    let out = qgm(&["build", "--instance", s(&path), "--formulation", "baseline"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn gap_csv_starts_at_the_driver_gap() {
    let dir = TempDir::new().unwrap();
    let path = write_instance(dir.path(), "i.json", &random_instance(2, 5));
    let out = ok(&[
        "gap",
        "--instance",
        s(&path),
        "--formulation",
        "baseline",
        "--samples",
        "8",
    ]);
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scale,u,e0,e1,gap"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[1], 0.0);
    assert!((first[4] - 2.0).abs() < 1e-9);
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn gap_shrinks_with_the_penalty_scale() {
    let dir = TempDir::new().unwrap();
    let path = write_instance(dir.path(), "i.json", &random_instance(3, 6));
    let json_path = dir.path().join("g.json");
    ok(&[
        "gap",
        "--instance",
        s(&path),
        "--formulation",
        "baseline",
        "--scales",
        "1,2,3,4,5",
        "--samples",
        "32",
        "--out",
        s(&json_path),
    ]);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    let gaps: Vec<f64> = json["profiles"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["min_gap"].as_f64().unwrap())
        .collect();
    assert_eq!(gaps.len(), 5);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn gap_refuses_twenty_five_qubits() {
    let dir = TempDir::new().unwrap();
    let path = write_instance(dir.path(), "i.json", &random_instance(5, 7));
    let out = qgm(&["gap", "--instance", s(&path), "--formulation", "baseline"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("16"));
}

#[test]
fn brute_solver_always_succeeds() {
    let dir = TempDir::new().unwrap();
    for n in 2..=4 {
        let path = write_instance(dir.path(), "i.json", &random_instance(n, 10 + n as u64));
        for f in ["baseline", "row-wise", "inserted"] {
            // The baseline hypercube at n = 4 has 2¹⁶ states; still quick.
            let out = ok(&["solve", "--instance", s(&path), "--formulation", f, "--solver", "brute"]);
            let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
            assert_eq!(
                json["summary"]["success"]["probability"].as_f64(),
                Some(1.0),
                "n={n} {f}"
            );
            assert_eq!(json["summary"]["optimal"].as_bool(), Some(true));
        }
    }
}

#[test]
fn schrodinger_finds_the_optimum_of_an_inserted_three() {
    let dir = TempDir::new().unwrap();
    let inst = random_instance(3, 20);
    let path = write_instance(dir.path(), "i.json", &inst);
    let hist = dir.path().join("h.csv");
    let out = ok(&[
        "--seed",
        "4",
        "solve",
        "--instance",
        s(&path),
        "--formulation",
        "inserted",
        "--solver",
        "schrodinger",
        "--tau",
        "100",
        "--histogram",
        s(&hist),
    ]);
    let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["summary"]["optimal"].as_bool(), Some(true));
    let (best, _) = brute_force_qap(&inst).unwrap();
    let assignment: Vec<usize> = json["summary"]["most_frequent"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    assert_eq!(assignment, best.assignment());
    assert!((json["summary"]["success"]["random_guess"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert!(std::fs::read_to_string(hist)
        .unwrap()
        .starts_with("energy_bin,count,valid_count"));
    assert_eq!(json["provenance"]["seed"].as_u64(), Some(4));
}

#[test]
fn built_model_solves_like_the_library() {
    let dir = TempDir::new().unwrap();
    let inst = random_instance(3, 30);
    let path = write_instance(dir.path(), "i.json", &inst);
    for (f, fname) in [(Formulation::RowWise, "row-wise"), (Formulation::Inserted, "inserted")] {
        let model_path = dir.path().join(format!("{fname}.json"));
        ok(&[
            "build",
            "--instance",
            s(&path),
            "--formulation",
            fname,
            "--scale",
            "1.5",
            "--out",
            s(&model_path),
        ]);
        for (solver, name) in [(Solver::Sa, "sa"), (Solver::Schrodinger, "schrodinger")] {
            let out_path = dir.path().join("s.json");
            ok(&[
                "--seed",
                "9",
                "solve",
                "--instance",
                s(&path),
                "--qubo",
                s(&model_path),
                "--solver",
                name,
                "--runs",
                "50",
                "--sweeps",
                "200",
                "--tau",
                "20",
                "--out",
                s(&out_path),
            ]);
            let json: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
            let from_cli: SampleSet = serde_json::from_value(json["samples"].clone()).unwrap();

            let model = build(&inst, f, 1.5).unwrap();
            let params = SolverParams {
                runs: 50,
                sweeps: 200,
                tau: 20.0,
                ..SolverParams::default()
            };
            let in_process = solve_model(&model, solver, &params, 9).unwrap();
            assert_eq!(from_cli, in_process, "{fname} {name}");
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let path = write_instance(dir.path(), "i.json", &random_instance(3, 40));
    let run = || {
        stdout(&ok(&[
            "--seed",
            "11",
            "solve",
            "--instance",
            s(&path),
            "--formulation",
            "baseline",
            "--solver",
            "sa",
            "--runs",
            "64",
            "--sweeps",
            "100",
        ]))
    };
    assert_eq!(run(), run());
}

#[test]
fn mismatched_model_is_rejected() {
    let dir = TempDir::new().unwrap();
    let i2 = write_instance(dir.path(), "i2.json", &random_instance(2, 50));
    let i3 = write_instance(dir.path(), "i3.json", &random_instance(3, 51));
    let m = dir.path().join("m.json");
    ok(&[
        "build",
        "--instance",
        s(&i2),
        "--formulation",
        "baseline",
        "--out",
        s(&m),
    ]);
    let out = qgm(&["solve", "--instance", s(&i3), "--qubo", s(&m), "--solver", "brute"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evolution_beyond_the_qubit_cap_is_refused() {
    let dir = TempDir::new().unwrap();
    let path = write_instance(dir.path(), "i.json", &random_instance(4, 52));
    let out = qgm(&[
        "solve",
        "--instance",
        s(&path),
        "--formulation",
        "baseline",
        "--solver",
        "schrodinger",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bench_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"n": 2, "num_instances": 3, "seed": 5, "formulations": ["baseline", "row-wise", "inserted"],
            "scales": [1.0, 2.0], "solver": "brute", "solver_params": {"gap_samples": 8}}"#,
    )
    .unwrap();
    let report = dir.path().join("r.json");
    let runs = dir.path().join("runs.csv");
    ok(&["bench", "--spec", s(&spec), "--out", s(&report), "--csv", s(&runs)]);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["instances"].as_array().unwrap().len(), 3);
    assert_eq!(json["aggregates"].as_array().unwrap().len(), 6);
    assert!(json["spec_hash"].is_string());
    for agg in json["aggregates"].as_array().unwrap() {
        assert_eq!(agg["success_rate"].as_f64(), Some(1.0));
        assert!(agg["mean_min_gap"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(std::fs::read_to_string(&runs).unwrap().lines().count(), 1 + 3 * 6);

    let text = stdout(&ok(&["report", "--input", s(&report)]));
    assert_eq!(text.lines().count(), 7);
    assert!(text.contains("inserted"));
    let csv = dir.path().join("agg.csv");
    ok(&["report", "--input", s(&report), "--out", s(&csv)]);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 7);
}

#[test]
fn empty_bench_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"n": 3, "num_instances": 0, "seed": 1, "formulations": ["baseline"], "scales": [1.0], "solver": "sa"}"#,
    )
    .unwrap();
    let out = qgm(&["bench", "--spec", s(&spec)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_bench_is_refused_up_front() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"n": 4, "num_instances": 1, "seed": 1, "formulations": ["baseline"], "scales": [1.0], "solver": "schrodinger"}"#,
    )
    .unwrap();
    let out = qgm(&["bench", "--spec", s(&spec)]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn generate_matches_the_bench_instances() {
    let dir = TempDir::new().unwrap();
    ok(&[
        "--seed",
        "8",
        "generate",
        "--n",
        "3",
        "--count",
        "2",
        "--out",
        s(&dir.path().join("inst")),
    ]);
    let spec: qgm_core::bench::ExperimentSpec = serde_json::from_value(serde_json::json!({
        "n": 3, "num_instances": 2, "seed": 8, "formulations": ["baseline"], "scales": [1.0], "solver": "brute"
    }))
    .unwrap();
    let expected = qgm_core::bench::generate_instances(&spec);
    for (i, inst) in expected.iter().enumerate() {
        let got = QapInstance::load(dir.path().join(format!("inst/instance_{i:03}.json"))).unwrap();
        assert_eq!(&got, inst);
    }
}

#[test]
fn distance_pair_input_builds_the_matching_cost() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("d.json");
    std::fs::write(
        &path,
        r#"{"n": 3, "d1": [[0, 1, 2], [1, 0, 1], [2, 1, 0]], "d2": [[0, 2, 1], [2, 0, 1], [1, 1, 0]]}"#,
    )
    .unwrap();
    let out = ok(&[
        "solve",
        "--instance",
        s(&path),
        "--formulation",
        "inserted",
        "--solver",
        "brute",
    ]);
    let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["summary"]["optimal"].as_bool(), Some(true));
}
