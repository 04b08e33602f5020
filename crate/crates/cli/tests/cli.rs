use std::path::Path;
use std::process::{Command, Output};

use drinf::io::{read_csv, write_csv};
use drinf::numkernel::DataMatrix;
use drinf::simharness::{generate, run_experiment_with_threads, ClusterLevel, DgpSpec, ExperimentSpec, Procedure};
use drinf::equality::StatisticKind;
use serde_json::Value;

fn drinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drinf"))
        .args(args)
        .env_remove("DRINF_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Deterministic pseudo-data with a clear nonzero mean in column 0.
fn sample_csv(n: usize, m: usize, shift: f64) -> String {
    let values: Vec<f64> = (0..n * m)
        .map(|k| ((k * 7919 % 1000) as f64 / 1000.0 - 0.5) * 2.0 + if k % m == 0 { shift } else { 0.0 })
        .collect();
    let x = DataMatrix::from_row_major(n, m, values).unwrap();
    let names: Vec<String> = (0..m).map(|k| format!("x{k}")).collect();
    write_csv(&x, Some(&names)).unwrap()
}

#[test]
fn test_subcommand_contract_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.csv", &sample_csv(300, 2, 0.0));
    let args = ["test", "--input", &input, "--mu", "0,0", "--stat", "u", "--alpha", "0.05", "--seed", "7"];
    let a = drinf(&args);
    let v = json(&a);
    for key in ["statistic", "critical_value", "p_value", "reject", "rn"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["statistic"], "u_type");
    // ⌊150^{4/3}⌋ = 796
    assert_eq!(v["rn"], 796);
    assert_eq!(stdout(&a), stdout(&drinf(&args)));

    let shifted = write(dir.path(), "y.csv", &sample_csv(300, 2, 1.0));
    let v = json(&drinf(&["test", "--input", &shifted, "--mu", "0,0", "--stat", "m"]));
    assert_eq!(v["reject"], true);
    assert_eq!(v["statistic"], "mean_type");
    assert_eq!(v["rn"], 17);

    // --rn overrides the rule; permutation mode has no p-value
    let v = json(&drinf(&[
        "test", "--input", &input, "--mu", "0,0", "--rn", "50", "--eps", "1.4", "--cv", "permutation", "--L", "200",
    ]));
    assert_eq!(v["rn"], 50);
    assert!(v["p_value"].is_null());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "x.csv", &sample_csv(50, 1, 0.0));
    let missing = write(dir.path(), "m.csv", "x\n1\n\n2\n,\n");
    let usage: [&[&str]; 6] = [
        &["test", "--input", &good, "--mu", "0", "--alpha", "1.5"],
        &["test", "--input", &good, "--mu", "0", "--unknown"],
        &["test", "--input", &good],
        &["test", "--input", &good, "--mu", "0", "--cv", "permutation", "--L", "10"],
        &["ci", "--input", &good, "--eps", "-1"],
        &["frobnicate"],
    ];
    for args in usage {
        assert_eq!(drinf(args).status.code(), Some(2), "{args:?}");
    }
    let data: [&[&str]; 4] = [
        &["test", "--input", &missing, "--mu", "0"],
        &["test", "--input", "/nonexistent/x.csv", "--mu", "0"],
        &["test", "--input", &good, "--mu", "0,0"],
        &["powerlaw", "--input", &good, "--xmin", "1"],
    ];
    for args in data {
        let o = drinf(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty());
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(drinf(&["--help"]).status.code(), Some(0));
}

#[test]
fn ci_ineq_powerlaw_netstat() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", &sample_csv(1000, 1, 0.25));
    let v = json(&drinf(&["ci", "--input", &x, "--rn", "31"]));
    let (lo, hi) = (v["lower"].as_f64().unwrap(), v["upper"].as_f64().unwrap());
    assert!(lo < hi);
    assert_eq!(v["rn_used"], 31);

    let v = json(&drinf(&["ineq", "--input", &x, "--alpha", "0.05", "--L", "200", "--seed", "7"]));
    for key in ["q_stat", "c", "reject"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["reject"], true);
    let v = json(&drinf(&["ineq", "--input", &x, "--asymptotic"]));
    assert!(v["l"].is_null());

    let z: String = (1..=400).map(|k| format!("{}\n", 1.0 - (k as f64 / 401.0).ln() / 0.5)).collect();
    let tail = write(dir.path(), "z.csv", &z);
    let v = json(&drinf(&["powerlaw", "--input", &tail, "--xmin", "1"]));
    assert_eq!(v["decision"], "favor_null");
    assert!(v["normalized_llr"].as_f64().unwrap() < 0.0);

    // two disjoint triangles, one-based ids, plus an isolated node
    let edges = write(dir.path(), "g.txt", "# triangles\n1 2\n2 3\n3 1\n4 5\n5 6\n6 4\n");
    let v = json(&drinf(&["netstat", "--edges", &edges, "--nodes", "7", "--moment", "clustering", "--rn", "20"]));
    assert_eq!(v["nodes"], 7);
    assert_eq!(v["edges"], 6);
    assert!((v["estimate"].as_f64().unwrap() - 6.0 / 7.0).abs() < 1e-12);
    let tsv = stdout(&drinf(&[
        "netstat", "--edges", &edges, "--nodes", "7", "--moment", "degree", "--format", "tsv", "--rn", "20",
    ]));
    assert!(tsv.lines().any(|l| l == format!("estimate\t{:?}", 12.0 / 7.0)), "{tsv}");
    // without the isolated node every degree is 2 and cannot be studentized
    let o = drinf(&["netstat", "--edges", &edges, "--moment", "degree"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn mc_matches_harness_and_worker_count() {
    let args = [
        "mc", "--design", "cluster", "--nc", "5", "--nf", "25", "--ni", "50", "--reps", "60", "--stat", "u", "--seed", "1",
    ];
    let out = drinf(&args);
    assert_eq!(out.status.code(), Some(0));
    let mut procs = Procedure::epsilon_grid(StatisticKind::UType);
    procs.extend([ClusterLevel::City, ClusterLevel::Family, ClusterLevel::Individual].map(|level| Procedure::ClusterT { level }));
    let mut spec = ExperimentSpec::cluster_table(DgpSpec::cluster(5, 25, 50, 1.0));
    spec.procedures = procs;
    let want = run_experiment_with_threads(&spec, 60, 1, 1).unwrap().to_tsv();
    assert_eq!(stdout(&out), want);
    let lines: Vec<&str> = want.lines().collect();
    assert!(lines[2].starts_with("Size\t") && lines[3].starts_with("Power\t"));

    let with_threads = |t: &str| {
        Command::new(env!("CARGO_BIN_EXE_drinf"))
            .args(args)
            .env("DRINF_THREADS", t)
            .output()
            .unwrap()
    };
    assert_eq!(with_threads("1").stdout, with_threads("3").stdout);
    assert_eq!(with_threads("lots").status.code(), Some(2));
    assert_eq!(drinf(&["mc", "--design", "cluster", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(drinf(&["mc", "--design", "cluster", "--nc", "3", "--reps", "10"]).status.code(), Some(2));
}

#[test]
fn written_sample_reingests_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for (design, extra) in [("cluster", vec![]), ("spillover", vec!["--n", "150"]), ("tail", vec!["--n", "100"])] {
        let path = dir.path().join(format!("{design}.csv"));
        let mut args = vec!["mc", "--design", design, "--reps", "2", "--seed", "9", "--write-sample", path.to_str().unwrap()];
        args.extend(extra.iter());
        assert_eq!(drinf(&args).status.code(), Some(0), "{design}");
        let back = read_csv(&std::fs::read_to_string(&path).unwrap()).unwrap().data;
        let dgp = match design {
            "cluster" => DgpSpec::cluster(20, 100, 200, 1.0),
            "spillover" => DgpSpec::spillover(150),
            _ => ExperimentSpec::tail_table(100, drinf::simharness::TailFamily::Exponential { rate: 0.5 }).dgp,
        };
        let want = generate(&dgp, 9, 0).unwrap().moments().unwrap();
        let bits = |d: &DataMatrix| d.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&want), "{design}");
    }
}
