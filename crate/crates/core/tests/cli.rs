use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rscache(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rscache"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("report is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn construct_prints_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let o = rscache(&[
        "construct",
        "binomial",
        "--n",
        "6",
        "--a",
        "2",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("15\t15\t15\t"), "{row}");
    assert!(
        row.contains("1 (1.000000)") && row.contains("3/5 (0.600000)"),
        "{row}"
    );
    let graph: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(graph["F"], 15);

    let o = rscache(&["construct", "mn", "--k", "4", "--s", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("2/3"));

    let o = rscache(&["construct", "binomial", "--n", "3", "--a", "2"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    rscache(&[
        "construct",
        "mn",
        "--k",
        "4",
        "--s",
        "1",
        "--out",
        path_str(&good),
    ]);
    assert_eq!(code(&rscache(&["validate", path_str(&good)])), 0);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"F":2,"K":2,"matchings":[[[0,0],[1,1]],[[0,1]]]}"#).unwrap();
    let o = rscache(&["validate", path_str(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("invalid"));

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"F\": 2,").unwrap();
    assert_eq!(code(&rscache(&["validate", path_str(&junk)])), 2);
}

#[test]
fn centralized_sim() {
    let o = rscache(&[
        "centralized-sim",
        "--family",
        "binomial",
        "--n",
        "4",
        "--a",
        "1",
        "--files",
        "8",
        "--demand",
        "distinct",
        "--trials",
        "3",
    ]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["aggregate"]["decode_failures"], 0);
    assert_eq!(r["records"][0]["naive_rate"], 1.0);

    let o = rscache(&[
        "centralized-sim",
        "--family",
        "mn",
        "--k",
        "5",
        "--s",
        "2",
        "--demand",
        "constant",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["status"], "pass");
}

#[test]
fn centralized_refuses_invalid_graph() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"F":2,"K":2,"matchings":[[[0,0],[1,1]],[[0,1]]]}"#).unwrap();
    let o = rscache(&["centralized-sim", "--graph", path_str(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
}

#[test]
fn centralized_dump_parses() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("tx.jsonl");
    let o = rscache(&[
        "centralized-sim",
        "--family",
        "binomial",
        "--n",
        "5",
        "--a",
        "1",
        "--dump",
        path_str(&dump),
    ]);
    assert_eq!(code(&o), 0);
    let parsed = rscache::codec::parse_dump(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(parsed.len(), 10);
    // same defaults as the command line: 8 files, 64-byte packets, distinct demands, seed 1
    let cfg = rscache::harness::CentralizedConfig {
        num_files: 8,
        packet_bytes: 64,
        demand: rscache::harness::DemandGen::Distinct,
        trials: 1,
        master_seed: 1,
    };
    let graph = rscache::rsgraph::construct_binomial(5, 1).unwrap();
    let tx = rscache::harness::centralized_transmissions(&graph, &cfg, 0).unwrap();
    for (d, t) in parsed.iter().zip(&tx) {
        assert_eq!(
            (d.matching_index, &d.payload),
            (t.matching_index, &t.payload)
        );
    }
}

#[test]
fn decentralized_single_user() {
    let o = rscache(&[
        "decentralized-sim",
        "--users",
        "1",
        "--gain",
        "20",
        "--memory-ratio",
        "0.5",
        "--trials",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    let rc = r["parameters"]["centralized_rate"].as_f64().unwrap();
    let rec = &r["records"][0];
    assert_eq!(rec["round_count"], 1);
    assert!((rec["naive_rate"].as_f64().unwrap() - rc).abs() < 1e-12);
    assert_eq!(rec["decode_ok"], true);
}

#[test]
fn decentralized_reports_are_reproducible() {
    let args = [
        "decentralized-sim",
        "--users",
        "300",
        "--gain",
        "5",
        "--memory-ratio",
        "0.5",
        "--trials",
        "4",
        "--seed",
        "17",
        "--format",
        "csv",
    ];
    let a = rscache(&args);
    let b = rscache(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("# rscache-report/1 decentralized-sim\ntrial,seed,"));
}

#[test]
fn ballsbins_modes() {
    let o = rscache(&[
        "ballsbins",
        "--balls",
        "100000",
        "--bins",
        "1000",
        "--trials",
        "20",
    ]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert!(r["aggregate"]["fraction_within_bound"].as_f64().unwrap() >= 0.95);
    assert!((r["aggregate"]["bound"].as_f64().unwrap() - 111.79).abs() < 0.005);

    let base = [
        "--balls", "3000", "--bins", "50", "--trials", "5", "--seed", "4",
    ];
    let s = rscache(&[&["ballsbins", "--mode", "static"][..], &base].concat());
    let c = rscache(
        &[
            &[
                "ballsbins",
                "--mode",
                "churn",
                "--steps",
                "0",
                "--slack",
                "9",
            ][..],
            &base,
        ]
        .concat(),
    );
    let loads = |o: &Output| -> Vec<Value> {
        json(o)["records"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["max_load"].clone())
            .collect()
    };
    assert_eq!(loads(&s), loads(&c));

    let o = rscache(&[
        "ballsbins",
        "--mode",
        "churn",
        "--balls",
        "3",
        "--bins",
        "3",
        "--steps",
        "2",
        "--adversary",
        "explicit:1,1",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn ballsbins_series_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let script = dir.path().join("script.json");
    std::fs::write(&script, r#"{"population_cap": 4, "deletions": [1, 5, 2]}"#).unwrap();
    let o = rscache(&[
        "ballsbins",
        "--mode",
        "churn",
        "--bins",
        "3",
        "--balls",
        "0",
        "--script",
        path_str(&script),
        "--series",
        path_str(&series),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&series).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# rscache-series/1"));
    assert_eq!(lines.next(), Some("step,max_load,population"));
    assert_eq!(lines.count(), 7);
}

#[test]
fn churn_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let o = rscache(&[
        "churn",
        "--family",
        "mn",
        "--k",
        "6",
        "--s",
        "2",
        "--users",
        "1000",
        "--events",
        path_str(&log),
    ]);
    assert_eq!(code(&o), 0);
    let o = rscache(&[
        "churn-replay",
        path_str(&log),
        "--slots",
        "6",
        "--k-cap",
        "1024",
    ]);
    assert_eq!(code(&o), 0);
    let audit = json(&o);
    assert_eq!(audit["ok"], true);
    assert_eq!(audit["bits_total"], 30_000);

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = rscache(&[
        "churn-replay",
        path_str(&empty),
        "--slots",
        "6",
        "--k-cap",
        "1024",
    ]);
    assert_eq!(code(&o), 0);
    let audit = json(&o);
    assert_eq!(
        (audit["bits_total"].as_u64(), audit["population"].as_u64()),
        (Some(0), Some(0))
    );

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"op\":\"leave\",\"user\":3,\"chosen\":0,\"loads_digest\":\"0000000000000000\"}\n",
    )
    .unwrap();
    let o = rscache(&[
        "churn-replay",
        path_str(&bad),
        "--slots",
        "6",
        "--k-cap",
        "1024",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["failure"]["line"], 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&rscache(&["no-such-command"])), 2);
    assert_eq!(code(&rscache(&["ballsbins", "--bins", "10"])), 2);
    assert_eq!(
        code(&rscache(&[
            "centralized-sim",
            "--family",
            "binomial",
            "--n",
            "5"
        ])),
        2
    );
}
