use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn lenskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lenskit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn ok(args: &[&str]) -> Output {
    let o = lenskit(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn p(dir: &Path, rel: &str) -> String {
    dir.join(rel).to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// A model and a handful of positions in a fresh directory.
fn setup(positions: usize) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["model", "init", "--seed", "3", "--out", &p(d, "model")]);
    ok(&["positions", "gen", "--count", &positions.to_string(), "--seed", "2", "--out", &p(d, "pos")]);
    let w = d.join("model/weights.json");
    let pos = d.join("pos/positions.jsonl");
    (tmp, w, pos)
}

#[test]
fn model_init_is_reproducible_and_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["model", "init", "--seed", "11", "--out", &p(d, "a")]);
    ok(&["model", "init", "--seed", "11", "--out", &p(d, "b")]);
    let a = std::fs::read(d.join("a/weights.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/weights.json")).unwrap());
    assert_eq!(manifest(&d.join("a"))["seed"], 11);

    let bad_cfg = d.join("bad.json");
    std::fs::write(&bad_cfg, r#"{"layers":2,"d_model":30,"heads":4,"head_dim":8,"ffn_dim":8,"planes":4,"norm_style":"preln"}"#).unwrap();
    assert_eq!(code(&lenskit(&["model", "init", "--config", &p(d, "bad.json"), "--out", &p(d, "c")])), 2);

    let good_cfg = d.join("good.json");
    std::fs::write(&good_cfg, r#"{"layers":2,"d_model":16,"heads":2,"head_dim":8,"ffn_dim":8,"planes":4,"norm_style":"preln"}"#).unwrap();
    ok(&["model", "init", "--config", &p(d, "good.json"), "--out", &p(d, "g")]);
    assert!(manifest(&d.join("g"))["config"].as_str().unwrap().ends_with("good.json"));

    // A corrupted tag is a format error.
    let text = String::from_utf8(a).unwrap().replacen("LENSW1", "LENSW9", 1);
    std::fs::write(d.join("corrupt.json"), text).unwrap();
    ok(&["positions", "gen", "--count", "2", "--out", &p(d, "pos")]);
    let o = lenskit(&["lens", "sweep", "--weights", &p(d, "corrupt.json"), "--positions", &p(d, "pos/positions.jsonl"), "--out", &p(d, "l")]);
    assert_eq!(code(&o), 3);
}

#[test]
fn lens_sweep_counts_and_reruns() {
    let (tmp, w, pos) = setup(3);
    let d = tmp.path();
    let (w, pos) = (w.to_string_lossy(), pos.to_string_lossy());
    ok(&["lens", "sweep", "--weights", &w, "--positions", &pos, "--out", &p(d, "l1")]);
    ok(&["lens", "sweep", "--weights", &w, "--positions", &pos, "--out", &p(d, "l2")]);
    ok(&["lens", "sweep", "--weights", &w, "--positions", &pos, "--mode", "keep-beta", "--out", &p(d, "l3")]);
    let a = std::fs::read_to_string(d.join("l1/lens_report.jsonl")).unwrap();
    assert_eq!(a.lines().count(), 3 * 5);
    assert_eq!(a, std::fs::read_to_string(d.join("l2/lens_report.jsonl")).unwrap());
    assert_ne!(a, std::fs::read_to_string(d.join("l3/lens_report.jsonl")).unwrap());
    assert_eq!(manifest(&d.join("l1"))["parameters"]["mode"], "default");
    assert_eq!(manifest(&d.join("l3"))["parameters"]["mode"], "keep-beta");

    let missing = lenskit(&["lens", "sweep", "--weights", &w, "--positions", &p(d, "nope.jsonl"), "--out", &p(d, "l4")]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn decomp_verify_exit_codes() {
    let (tmp, w, pos) = setup(3);
    let d = tmp.path();
    let (w, pos) = (w.to_string_lossy(), pos.to_string_lossy());
    ok(&["decomp", "verify", "--weights", &w, "--positions", &pos, "--tol", "1e-9", "--out", &p(d, "v")]);
    let csv = std::fs::read_to_string(d.join("v/decomp.csv")).unwrap();
    assert!(csv.starts_with("position_id,stage,max_abs_err,max_rel_err,norm_i,norm_z_mha,norm_z_ffn,norm_b,norm_m\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 5);

    // Float accumulation leaves errors around 1e-16..1e-15; nothing passes 1e-17.
    let o = lenskit(&["decomp", "verify", "--weights", &w, "--positions", &pos, "--tol", "1e-17", "--out", &p(d, "v2")]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceed"));

    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    let o = lenskit(&["decomp", "verify", "--weights", &w, "--positions", &p(d, "empty.jsonl"), "--out", &p(d, "v3")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn metrics_on_one_position_are_degenerate() {
    let (tmp, w, pos) = setup(1);
    let d = tmp.path();
    let (w, pos) = (w.to_string_lossy(), pos.to_string_lossy());
    ok(&["lens", "sweep", "--weights", &w, "--positions", &pos, "--out", &p(d, "l")]);
    ok(&["metrics", "compute", "--report", &p(d, "l/lens_report.jsonl"), "--top-k", "3", "--out", &p(d, "m")]);
    for name in ["js", "entropy", "top_move_prob", "kendall_all", "kendall_topk"] {
        let text = std::fs::read_to_string(d.join(format!("m/{name}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("stage,p5,p25,p50,p75,p95,n"));
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells[1].is_empty() {
                continue;
            }
            assert!(cells[1..6].iter().all(|c| c == &cells[1]), "{name}: {line}");
        }
    }
    ok(&["chart", "--metrics", &p(d, "m"), "--out", &p(d, "c")]);
    let svg = std::fs::read_to_string(d.join("c/js.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    ok(&["metrics", "mlp-norm", "--weights", &w, "--positions", &pos, "--out", &p(d, "n")]);
    assert!(std::fs::read_to_string(d.join("n/mlp_norm.csv")).unwrap().starts_with("layer,p5"));
    assert!(d.join("c/manifest.json").exists() && d.join("n/manifest.json").exists());

    std::fs::write(d.join("garbage.jsonl"), "{not json\n").unwrap();
    assert_eq!(code(&lenskit(&["metrics", "compute", "--report", &p(d, "garbage.jsonl"), "--out", &p(d, "x")])), 3);
}

#[test]
fn tournament_and_elo() {
    let (tmp, w, _) = setup(1);
    let d = tmp.path();
    let w = w.to_string_lossy();
    ok(&["tournament", "--weights", &w, "--stages", "-1,1,3", "--games", "2", "--opening-plies", "4", "--seed", "5", "--out", &p(d, "t")]);
    let results = std::fs::read_to_string(d.join("t/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 6);
    ok(&["tournament", "--weights", &w, "--stages=-1,1,3", "--games", "2", "--opening-plies", "4", "--seed", "5", "--out", &p(d, "t2")]);
    assert_eq!(results, std::fs::read_to_string(d.join("t2/results.csv")).unwrap());
    assert_eq!(manifest(&d.join("t"))["seed"], 5);

    assert_eq!(code(&lenskit(&["tournament", "--weights", &w, "--stages", "1", "--out", &p(d, "t3")])), 2);
    assert_eq!(code(&lenskit(&["tournament", "--weights", &w, "--stages", "0,9", "--out", &p(d, "t4")])), 2);

    std::fs::write(d.join("sym.csv"), "white_id,black_id,outcome\nA,B,1-0\nB,A,1-0\nA,B,1/2\nB,A,1/2\n").unwrap();
    ok(&["elo", "--results", &p(d, "sym.csv"), "--out", &p(d, "e")]);
    let table = std::fs::read_to_string(d.join("e/ratings.csv")).unwrap();
    let elos: Vec<f64> = table.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(elos.len(), 2);
    assert_eq!(elos[0], elos[1]);

    std::fs::write(d.join("bad.csv"), "white_id,black_id,outcome\nA,B,3-0\n").unwrap();
    assert_eq!(code(&lenskit(&["elo", "--results", &p(d, "bad.csv"), "--out", &p(d, "e2")])), 3);
    ok(&["elo", "--results", &p(d, "t/results.csv"), "--anchor", "Full", "--anchor-value", "-50", "--out", &p(d, "e3")]);
    assert!(std::fs::read_to_string(d.join("e3/ratings.csv")).unwrap().contains(",Full,-50.0,"));
}

#[test]
fn puzzles_gen_and_eval() {
    let (tmp, w, _) = setup(1);
    let d = tmp.path();
    let w = w.to_string_lossy();
    ok(&["puzzles", "gen", "--count", "6", "--seed", "1", "--out", &p(d, "pz")]);
    let text = std::fs::read_to_string(d.join("pz/puzzles.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 6);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["board"].as_str().unwrap().len(), 64);
    assert_eq!(first["depth"], 2);
    ok(&["puzzles", "eval", "--weights", &w, "--puzzles", &p(d, "pz/puzzles.jsonl"), "--out", &p(d, "ev")]);
    let matrix = std::fs::read_to_string(d.join("ev/solve_matrix.csv")).unwrap();
    assert_eq!(matrix.lines().next(), Some("puzzle,Input,L0,L1,L2,Full"));
    assert_eq!(matrix.lines().count(), 7);
    let dynamics = std::fs::read_to_string(d.join("ev/solve_dynamics.csv")).unwrap();
    assert!(dynamics.starts_with("stage,current,cumulative,converged,first\n"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&lenskit(&[])), 2);
    assert_eq!(code(&lenskit(&["lens", "sweep", "--weights", "x"])), 2);
    assert_eq!(code(&lenskit(&["lens", "sweep", "--weights", "x", "--positions", "y", "--mode", "odd", "--out", "z"])), 2);
    assert_eq!(code(&lenskit(&["frobnicate"])), 2);
}
