use std::path::PathBuf;
use std::process::Command;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bribery").chain(args.iter().copied());
    let code = bribery_cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn analyze_bs_worked_example() {
    let whale = fixture("whale20.pools");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bs.csv");
    let r = run(&[
        "analyze",
        "--pools",
        &whale,
        "--target",
        "m",
        "--strategy",
        "bs",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("single pass: cost 1495.59 BTC"));
    assert!(r.out.contains("attacker recaptures 997.06 BTC, target 498.53 BTC"));
    assert!(r.out.contains("catch-up 0.2656%"));
    let report = std::fs::read_to_string(out).unwrap();
    assert!(report.starts_with("record,field,state,value\n"));
    assert!(report.contains("meta,schema_version,,1\n"));
    assert!(report.contains("schedule,bribe,0,1e-8\n"));
    assert!(report.contains("schedule,bribe,6,876.27\n"));
}

#[test]
fn analyze_gvc_json_has_schedule_and_version() {
    let t2 = fixture("table2.pools");
    let r = run(&[
        "analyze",
        "--pools",
        &t2,
        "--strategy",
        "gvc",
        "--objective",
        "ac",
        "--start-state",
        "4",
        "--restarts",
        "4",
        "--format",
        "json",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let doc: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["outcome"]["tag"], "GVC_AC");
    assert_eq!(doc["outcome"]["schedule"]["per_state"].as_array().unwrap().len(), 7);
    assert!(doc["outcome"]["cost_unconditional"].as_f64().unwrap() > 0.0);
}

#[test]
fn analyze_reference_gvc_schedule() {
    let t2 = fixture("table2.pools");
    let r = run(&[
        "analyze",
        "--pools",
        &t2,
        "--strategy",
        "gvc",
        "--objective",
        "ac",
        "--start-state",
        "4",
        "--schedule",
        "1e-8,8.6,37.02,72.25,1e-8,6.43,25.51",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("summary,success_prob,,0.4194\n"));
    assert!(r.out.contains("summary,cost_unconditional,,94.56\n"));
}

#[test]
fn usage_errors_exit_two_with_json_record() {
    let t2 = fixture("table2.pools");
    for args in [
        vec!["analyze", "--pools", &t2, "--strategy", "bs", "--start-state", "7"],
        vec!["analyze", "--pools", &t2, "--strategy", "gvc"],
        vec!["analyze", "--pools", &t2, "--strategy", "bs", "--objective", "ac"],
        vec!["analyze", "--pools", &t2, "--strategy", "nope"],
        vec!["sweep-start", "--pools", &t2, "--strategy", "bs", "--states", ""],
        vec!["sweep-reward", "--pools", &t2, "--strategy", "bs", "--rewards", "0"],
    ] {
        let r = run(&args);
        assert_eq!(r.code, 2, "{args:?}");
        let rec: serde_json::Value = serde_json::from_str(r.err.trim()).unwrap();
        assert_eq!(rec["error"], "usage");
    }
}

#[test]
fn missing_pool_file_is_an_io_error() {
    let r = run(&["analyze", "--pools", "/nonexistent.pools", "--strategy", "bs"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("\"error\":\"io\""));
}

#[test]
fn sweep_start_rows_are_sorted_and_bs_falls() {
    let t2 = fixture("table2.pools");
    let r = run(&[
        "sweep-start",
        "--pools",
        &t2,
        "--strategy",
        "bs,bff",
        "--states",
        "6,1,2,3,4,5",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with(
        "strategy,start_state,success_prob,expected_steps,cost_unconditional,cost_on_success\n"
    ));
    let rows = csv_rows(&r.out);
    let states: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(states.windows(2).all(|w| w[0] <= w[1]));
    let bs: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == "BS")
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(bs.len(), 6);
    assert!(bs.windows(2).all(|w| w[1] < w[0]));
    let bff4 = rows.iter().find(|r| r[0] == "BFF" && r[1] == "4").unwrap();
    assert!((bff4[2].parse::<f64>().unwrap() - 0.60).abs() <= 0.05);
}

#[test]
fn single_reward_sweep_matches_analyze() {
    let t2 = fixture("table2.pools");
    let sweep = run(&[
        "sweep-reward",
        "--pools",
        &t2,
        "--strategy",
        "crb2",
        "--start-state",
        "4",
        "--rewards",
        "6.25",
    ]);
    let analyze = run(&[
        "analyze",
        "--pools",
        &t2,
        "--strategy",
        "crb2",
        "--start-state",
        "4",
    ]);
    let row = &csv_rows(&sweep.out)[0];
    assert!(analyze
        .out
        .contains(&format!("summary,cost_unconditional,,{}\n", row[4])));
    assert!(analyze.out.contains(&format!("summary,success_prob,,{}\n", row[2])));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let t2 = fixture("table2.pools");
    let args = [
        "sweep-start",
        "--pools",
        &t2,
        "--strategy",
        "gvc",
        "--objective",
        "rac",
        "--restarts",
        "3",
        "--seed",
        "5",
        "--states",
        "2,4",
        "--format",
        "json",
    ];
    assert_eq!(run(&args).out, run(&args).out);
    let v = [
        "validate", "--pools", &t2, "--strategy", "crb1", "--trials", "20000", "--seed", "9",
    ];
    assert_eq!(run(&v).out, run(&v).out);
}

#[test]
fn validate_passes_with_few_trials_and_catches_corruption() {
    let t2 = fixture("table2.pools");
    let base = ["validate", "--pools", &t2, "--strategy", "bff", "--start-state", "4"];
    let few: Vec<&str> = base.iter().copied().chain(["--trials", "10"]).collect();
    assert_eq!(run(&few).code, 0);
    let bad: Vec<&str> = base
        .iter()
        .copied()
        .chain(["--trials", "50000", "--debug-corrupt-schedule"])
        .collect();
    let r = run(&bad);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("validation_failed"));
    assert!(r.err.contains("cost_unconditional"));
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_bribery");
    let t2 = fixture("table2.pools");
    let ok = Command::new(exe)
        .args(["analyze", "--pools", &t2, "--strategy", "bff"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let bad = Command::new(exe)
        .args(["analyze", "--pools", &t2, "--strategy", "bff", "--start-state", "9"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let help = Command::new(exe).arg("--help").output().unwrap();
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("sweep-reward"));
}
