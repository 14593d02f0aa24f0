use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn toposketch(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toposketch"))
        .args(args)
        .env("TOPOSKETCH_OUT", out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Two rooms of equal length in a 3x1 strip: no integer placement on the
/// module grid, two 3x2 halves once each module is split in two.
const HALVES: &str = r#"
schema = "toposketch/1"
name = "halves"

[[units]]
id = "strip"
L = { min = 3, max = 3 }
W = { min = 1, max = 1 }

[[spaces]]
id = "a"
unit = "strip"
kind = "room"
L = { min = 1, max = 3 }
W = { min = 1, max = 1 }

[[spaces]]
id = "b"
unit = "strip"
kind = "room"
L = { min = 1, max = 3 }
W = { min = 1, max = 1 }

[[constraints]]
kind = "ratio"
p1 = "a.L"
p2 = "b.L"
lower = [1, 1]
upper = [1, 1]
"#;

#[test]
fn bench_reports_table_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = toposketch(&["bench", "pfk", "lr", "tng"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("bench.json"));
    let n2: Vec<u64> = report["rows"].as_array().unwrap().iter().map(|r| r["n2"].as_u64().unwrap()).collect();
    assert_eq!(n2, [24, 72, 4]);
    let md = std::fs::read_to_string(dir.path().join("bench.md")).unwrap();
    assert!(md.contains("| problem | spaces | N1 | N2 | N2/N1 | wall-clock (ms) |"));
    assert!(md.contains("Hardware:"));
}

#[test]
fn infeasible_problem_exits_one_with_refinement_hint() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("halves.toml");
    std::fs::write(&file, HALVES).unwrap();
    let f = file.to_str().unwrap();
    let o = toposketch(&["enumerate", "--problem", f], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--refine"), "{}", stderr(&o));

    let o = toposketch(&["enumerate", "--problem", f, "--refine", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sol = json(&dir.path().join("solutions.json"));
    // a west or east of b; the ratio names them, so they are not interchangeable
    assert_eq!(sol["n2"], 2);
    for t in sol["topologies"].as_array().unwrap() {
        let w = &t["witness"]["spaces"];
        assert_eq!((w[0]["l"].as_i64(), w[1]["l"].as_i64()), (Some(3), Some(3)));
    }

    let o = toposketch(&["enumerate", "--benchmark", "office_patio"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_check_agrees_on_tong() {
    let dir = tempfile::tempdir().unwrap();
    let o = toposketch(&["oracle-check", "--benchmark", "tng"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("agreement"));
}

#[test]
fn oracle_check_on_refined_problem() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("halves.toml");
    std::fs::write(&file, HALVES).unwrap();
    let o = toposketch(&["oracle-check", "--problem", file.to_str().unwrap(), "--refine", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn usage_and_schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema = \"toposketch/1\"\nname = \"x\"\nunits = []\n[[constraints]]\nkind = \"teleport\"\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["enumerate", "--benchmark", "nope"],
        vec!["enumerate", "--problem", bad.to_str().unwrap()],
        vec!["enumerate", "--problem", "/nonexistent.toml"],
        vec!["enumerate", "--benchmark", "pfk", "--weight", "beauty=3"],
        vec!["enumerate"],
        vec!["frobnicate"],
        vec!["oracle-check", "--benchmark", "pfk", "--cap", "10"],
    ];
    for args in cases {
        let o = toposketch(&args, dir.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn enumerate_writes_solutions_and_gallery_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&toposketch(&["enumerate", "--benchmark", "pfk", "--jobs", "1"], a.path())), 0);
    assert_eq!(code(&toposketch(&["enumerate", "--benchmark", "pfk", "--jobs", "3"], b.path())), 0);
    let (sa, sb) = (json(&a.path().join("solutions.json")), json(&b.path().join("solutions.json")));
    assert_eq!(sa["n2"], 24);
    assert_eq!(sa["topologies"], sb["topologies"]);
    assert_eq!(sa["problem_hash"], sb["problem_hash"]);
    for i in 0..24 {
        let name = format!("sketches/topology_{i:04}.svg");
        let (x, y) = (std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
        assert_eq!(x, y, "{name}");
    }
    let index = std::fs::read_to_string(a.path().join("sketches/index.html")).unwrap();
    assert_eq!(index.matches("<img ").count(), 24);
}

#[test]
fn out_flag_overrides_environment() {
    let env = tempfile::tempdir().unwrap();
    let flag = tempfile::tempdir().unwrap();
    let o = toposketch(&["enumerate", "--benchmark", "tng", "-o", flag.path().to_str().unwrap()], env.path());
    assert_eq!(code(&o), 0);
    assert!(flag.path().join("solutions.json").exists());
    assert!(!env.path().join("solutions.json").exists());
}

#[test]
fn optimize_ranks_by_cost() {
    let dir = tempfile::tempdir().unwrap();
    let o = toposketch(&["optimize", "--benchmark", "tng", "--weight", "internal_wall_length=3"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&dir.path().join("ranking.json"));
    let ranking = r["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 4);
    let costs: Vec<i64> = ranking.iter().map(|e| e["cost"].as_str().unwrap().parse().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]));
    // three times the single-weight cost of every tng topology
    assert!(costs.iter().all(|&c| c == 54), "{costs:?}");
    assert_eq!(r["timing"]["topologies"], 4);
    assert!(dir.path().join("layouts/rank_0000.svg").exists());
    let sol = json(&dir.path().join("solutions.json"));
    assert_eq!(sol["optima"].as_array().unwrap().len(), 4);
}

#[test]
fn render_and_diff_use_a_saved_solution_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&toposketch(&["enumerate", "--benchmark", "pfk"], dir.path())), 0);
    let sol = dir.path().join("solutions.json");
    let s = sol.to_str().unwrap();

    let o = toposketch(&["render", "--benchmark", "pfk", "--solutions", s, "--topology", "5"], dir.path());
    assert_eq!(code(&o), 0);
    let svg = String::from_utf8(o.stdout).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("class=\"room").count(), 6);

    let o = toposketch(&["render", "--benchmark", "pfk", "--solutions", s, "--topology", "99"], dir.path());
    assert_eq!(code(&o), 2);
    let o = toposketch(&["render", "--benchmark", "lr", "--solutions", s], dir.path());
    assert_eq!(code(&o), 2, "solution file of another problem");

    let o = toposketch(&["diff", "--benchmark", "pfk", "--solutions", s, "0", "1"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let spaces: Vec<&str> = text.lines().last().unwrap().split("spaces ").nth(1).unwrap().split(' ').collect();
    let svg = std::fs::read_to_string(dir.path().join("diff_0_1_topology_0.svg")).unwrap();
    assert_eq!(svg.matches(" diff\"").count(), spaces.len(), "{svg}");
    for id in spaces {
        assert!(svg.contains(&format!("id=\"space-{id}\"")));
    }
}
