//! CLI contract tests: exit codes, stage handoffs through files, and the
//! pinned output formats.

use std::path::PathBuf;
use std::process::{Command, Output};

fn netos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netos"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("netos-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn missing_trace_file_exits_2_and_names_the_path() {
    let out = netos(&[
        "pipeline",
        "--trace",
        "/no/such/trace.txt",
        "--mesh",
        "2x2",
        "--out",
        "/tmp/never-created",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/no/such/trace.txt"), "{stderr}");
}

#[test]
fn unknown_policy_is_a_usage_error_listing_choices() {
    let out = netos(&["pipeline", "--gen", "chain:4:0", "--policy", "fifo", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("netos"), "{stderr}");
    assert!(stderr.contains("roundrobin"), "{stderr}");
    assert!(stderr.contains("random"), "{stderr}");
}

#[test]
fn unknown_sweep_policy_exits_2() {
    let out = netos(&["sweep", "--policies", "netos,bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown policy 'bogus'"), "{stderr}");
}

#[test]
fn conflicting_sources_exit_2() {
    let out = netos(&["graph", "--trace", "a", "--gen", "chain:4:0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly one"));
}

#[test]
fn stage_failure_exits_1() {
    // An empty trace yields zero processes; the mapping stage refuses.
    let dir = tmpdir("empty");
    let trace = dir.join("empty.trace");
    std::fs::write(&trace, "# name: empty\n").unwrap();
    let out = netos(&[
        "pipeline",
        "--trace",
        trace.to_str().unwrap(),
        "--mesh",
        "2x2",
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("map"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pipeline_writes_all_artifacts() {
    let dir = tmpdir("pipeline");
    let out_dir = dir.join("out");
    let out = netos(&[
        "pipeline",
        "--gen",
        "diamond:4:1",
        "--cores",
        "4",
        "--overlap",
        "--restarts",
        "8",
        "--mesh",
        "2x2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "report.txt",
        "report.json",
        "partition.txt",
        "mapping.txt",
        "depgraph.dot",
        "depgraph.edges",
        "mlgraph.dot",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["quality"]["t_scaled"], 4);
    assert_eq!(json["quality"]["n"], 4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn stage_handoff_round_trip() {
    let dir = tmpdir("handoff");
    let trace = dir.join("t.trace");
    let part = dir.join("t.part");
    let map = dir.join("t.map");

    let out = netos(&[
        "trace-gen",
        "--gen",
        "mapreduce:6:3",
        "--out-file",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let out = netos(&[
        "partition",
        "--trace",
        trace.to_str().unwrap(),
        "--cores",
        "4",
        "--out-file",
        part.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let part_text = std::fs::read_to_string(&part).unwrap();
    assert!(part_text.lines().all(|l| l.starts_with("C ")), "{part_text}");

    let out = netos(&[
        "map",
        "--trace",
        trace.to_str().unwrap(),
        "--partition",
        part.to_str().unwrap(),
        "--mesh",
        "2x2",
        "--out-file",
        map.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let map_text = std::fs::read_to_string(&map).unwrap();
    assert!(map_text.lines().all(|l| l.starts_with("M ")), "{map_text}");

    let out = netos(&[
        "simulate",
        "--trace",
        trace.to_str().unwrap(),
        "--partition",
        part.to_str().unwrap(),
        "--mapping",
        map.to_str().unwrap(),
        "--mesh",
        "2x2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("makespan: "), "{text}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_header_is_exact() {
    let out = netos(&["sweep", "--pairs", "1", "--msg", "1", "--cores", "2", "--policies", "netos"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next(),
        Some("policy,cores_x,cores_y,pairs,msg_kib,seed,makespan,msg_cycles,block_cycles")
    );
    assert_eq!(lines.count(), 1);
}

#[test]
fn sweep_reports_refused_rows_on_stderr() {
    let out = netos(&["sweep", "--pairs", "8", "--msg", "1", "--cores", "2", "--policies", "netos"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1, "only the header expected");
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped"));
}

#[test]
fn oracle_refuses_oversized_graphs() {
    let out = netos(&["oracle", "--gen", "chain:12:0", "--cores", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("limited to 8"));
}

#[test]
fn oracle_reports_gap_zero_on_diamond() {
    let out = netos(&["oracle", "--gen", "diamond:4:0", "--cores", "4"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gap_scaled: 0"), "{stdout}");
    assert!(stdout.contains("oracle_t: 2"), "{stdout}");
}

#[test]
fn oracle_single_node_is_zero_both_ways() {
    let out = netos(&["oracle", "--gen", "chain:1:0", "--cores", "4"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("greedy_t_scaled: 0"), "{stdout}");
    assert!(stdout.contains("oracle_t_scaled: 0"), "{stdout}");
}

#[test]
fn trace_gen_output_reparses() {
    let out = netos(&["trace-gen", "--gen", "random-dag:20:5"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.starts_with("# name: random-dag-20\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("I ")).count(), 20);
}
