use std::path::PathBuf;
use std::process::{Command, Output};

fn kantorel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kantorel"))
        .args(args)
        .env_remove("KANTOREL_FORMAT")
        .env_remove("KANTOREL_MODE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_program(name: &str, src: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kantorel-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, src).unwrap();
    path
}

const COIN: &str = "input x: int;\ny :~ bernoulli(1/4);\nx := x + y\n";

const CAPPED: &str = "input c: int;\nt := 0;\nwhile t == 0 do\n  if c < 3 then c := c + 1 end;\n  t :~ bernoulli(1/2)\nend\n";

#[test]
fn lists_all_cases() {
    let o = kantorel(&["cases", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for name in ["hwalk", "rtop", "rtrans", "riffle", "binom", "td0", "sgd", "pgd"] {
        assert!(out.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn hypercube_invariant_holds() {
    let o = kantorel(&["check-inv", "--case", "hwalk", "-N", "3", "-K", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("holds"));
}

#[test]
fn weakened_invariant_fails_with_witnesses() {
    let inv = "inf * [k<1> != k<2>] + [k<1> == k<2>] * dH(pos<1>, pos<2>) * (1/4) ^ monus(K<1>, k<1>)";
    let o = kantorel(&["check-inv", "--case", "hwalk", "-N", "3", "-K", "2", "--inv", inv, "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["verdict"], "fails");
    assert!(!v["result"]["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn identical_runs_are_at_distance_zero() {
    let a = write_program("coin.pwl", COIN);
    let a = a.to_str().unwrap();
    let o = kantorel(&["dist", a, a, "--cost", "discrete", "--state", "{x = 0}"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("distance 0 "));
    let o = kantorel(&["dist", a, "--s1", "{x = 0}", "--s2", "{x = 1}", "--format", "csv"]);
    assert_eq!(stdout(&o), "value,value_float\n1,1\n");
}

#[test]
fn inline_distributions_and_plans() {
    let o = kantorel(&["dist", "--d1", "bernoulli(1/4)", "--d2", "bernoulli(1/2)", "--plan", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["value"], "1/4");
    let mass: f64 = v["result"]["plan"].as_array().unwrap().iter().map(|r| r["probability_float"].as_f64().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    let f = kantorel(&["--mode", "float", "dist", "--d1", "bernoulli(1/4)", "--d2", "bernoulli(1/2)", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&f.stdout).unwrap();
    assert!((v["result"]["value_float"].as_f64().unwrap() - 0.25).abs() < 1e-9);
}

#[test]
fn json_carries_the_schema() {
    let o = kantorel(&["--format", "json", "rpe", "--case", "hwalk", "-N", "3", "-K", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema"], "kantorel.report/v1");
    assert_eq!(v["command"], "rpe");
    assert_eq!(v["result"]["entries"][0][1], "1/4");
}

#[test]
fn parse_errors_exit_with_usage_code() {
    let bad = write_program("bad.pwl", "x := \n");
    let o = kantorel(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error"));
    assert_eq!(kantorel(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(kantorel(&["mix"]).status.code(), Some(2));
}

#[test]
fn run_and_wpe_of_a_file() {
    let p = write_program("capped.pwl", CAPPED);
    let p = p.to_str().unwrap();
    let o = kantorel(&["run", p, "--state", "{c = 0}", "--project", "c", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("{c=1},1/2,0.5"));
    let tail: f64 = out.lines().find(|l| l.starts_with("{c=3}")).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(tail <= 0.25 && 0.25 - tail < 1e-8);
    let o = kantorel(&["run", p, "--state", "{c = 0}", "--project", "c"]);
    assert!(stdout(&o).contains("status Approximate"));
    let o = kantorel(&["wpe", p, "--f", "[c <= 2]", "--state", "{c = 0}", "--format", "csv"]);
    assert_eq!(stdout(&o), "state,value,value_float\n{c=0},3/4,0.75\n");
}

#[test]
fn budget_exhaustion_is_inconclusive() {
    let p = write_program("forever.pwl", "input c: int;\nwhile c >= 0 do c :~ uniform(0 .. 2) end\n");
    let o = kantorel(&["--max-iters", "20", "run", p.to_str().unwrap(), "--state", "{c = 0}"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}

#[test]
fn async_check_for_binomial() {
    let o = kantorel(&["check-async", "--case", "binom", "-N", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn mixing_curve_csv_columns() {
    let o = kantorel(&["mix", "--case", "hwalk", "-N", "3", "--ks", "0,2,4", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("case,N,K,tv_exact,bound,tv_uniform,trials,mean,ci_lo,ci_hi,seed"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn simulation_is_reproducible() {
    let args = ["--seed", "11", "--format", "json", "simulate", "--case", "hwalk", "-N", "3", "-K", "3", "--trials", "300"];
    let a = kantorel(&args);
    let b = kantorel(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let one = kantorel(&["--jobs", "1", "--format", "json", "check-inv", "--case", "hwalk", "-N", "3", "-K", "2"]);
    let four = kantorel(&["--jobs", "4", "--format", "json", "check-inv", "--case", "hwalk", "-N", "3", "-K", "2"]);
    assert_eq!(one.stdout, four.stdout);
}
