use std::path::Path;
use std::process::{Command, Output};

use locg_cli::tracefile::read_trace;

fn locg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locg")).args(args).arg("--out").arg(out).output().expect("spawn locg")
}

fn files_ending(dir: &Path, suffix: &str) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(suffix))
        .collect();
    v.sort();
    v
}

#[test]
fn single_run_trace_shape_is_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let out = locg(&["run", "--problem", "outlier_cluster", "--nb", "1", "--me", "1", "--mh", "1", "--seed", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stem = "outlier_cluster_n1000_q1__nb1_me1_mh1__s1";
    let text = std::fs::read_to_string(dir.path().join(format!("{stem}.trace.csv"))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,rho_1,resnorm_1,err_rel_1,sigma,ratio_two_step,ratio_vs_bound"));
    // regression pin: 35 steps after the initial row
    assert_eq!(lines.count(), 36);
    for ext in ["rate.csv", "timing.csv", "json"] {
        assert!(dir.path().join(format!("{stem}.{ext}")).exists(), "{ext}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{stem}.json"))).unwrap()).unwrap();
    for key in ["problem", "nb", "me", "mh", "seed", "outcome", "iters", "final_err_rel"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn full_sweep_writes_thirteen_traces_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = locg(&["run", "--problem", "outlier_cluster", "--n", "300", "--triples", "all13", "--trials", "2"], dir.path());
    assert!(out.status.success());
    let traces = files_ending(dir.path(), ".trace.csv");
    assert_eq!(traces.len(), 26);
    let mut seeds: Vec<&str> = traces.iter().map(|n| n.rsplit("__s").next().unwrap()).collect();
    seeds.sort();
    seeds.dedup();
    assert_eq!(seeds.len(), 2);
    for seed in seeds {
        assert_eq!(traces.iter().filter(|n| n.ends_with(&format!("__s{seed}"))).count(), 13, "{seed}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = locg(&["run", "--problem", "outlier_cluster", "--triples", ""], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = locg(&["run", "--problem", "no_such_problem"], dir.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn corrupted_trace_is_reported_with_iteration() {
    let dir = tempfile::tempdir().unwrap();
    locg(&["run", "--problem", "laplacian2d", "--N", "8", "--nb", "1", "--me", "1", "--mh", "1", "--seed", "1"], dir.path());
    let name = &files_ending(dir.path(), ".trace.csv")[0];
    let path = dir.path().join(name);
    let good = Command::new(env!("CARGO_BIN_EXE_locg")).args(["verify", "--trace"]).arg(&path).output().unwrap();
    assert!(good.status.success());

    // push the Ritz value of row 5 upward
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[6].split(',').map(String::from).collect();
    cells[1] = format!("{:.16e}", cells[1].parse::<f64>().unwrap() + 1.0);
    lines[6] = cells.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let bad = Command::new(env!("CARGO_BIN_EXE_locg")).args(["verify", "--trace"]).arg(&path).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("iteration 5"));
}

#[test]
fn verify_small_block_problem_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = locg(&["verify", "--problem", "laplacian2d", "--N", "10", "--nb", "2", "--me", "1", "--mh", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(files_ending(dir.path(), ".verify.csv").len(), 1);
}

#[test]
fn sigma_table_and_plots_from_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = locg(&["sigma-table", "--problem", "outlier_cluster", "--n", "300", "--triples", "1,1,1;1,1,0;2,1,1"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("sigma_table.csv")).unwrap();
    let row = csv.lines().find(|l| l.contains(",1,1,1,")).unwrap();
    assert!(row.ends_with(",ok,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0"), "{row}");
    assert!(csv.lines().any(|l| l.contains(",1,1,0,") && l.contains("no_history")));

    let svg_dir = dir.path().join("svg");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_locg"));
    let out = cmd.arg("plot").arg(dir.path()).arg("--out").arg(&svg_dir).output().unwrap();
    assert!(out.status.success());
    let svgs = files_ending(&svg_dir, ".svg");
    assert_eq!(svgs.len(), 3);
    let svg = std::fs::read_to_string(svg_dir.join(&svgs[0])).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("href"));
    assert_eq!(read_trace(&dir.path().join(svgs[0].replace(".svg", ".trace.csv"))).map(|t| t.nb).ok(), Some(1));
}
