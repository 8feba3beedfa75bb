use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

fn ut() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ut"));
    c.env_remove("UT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    ut().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["tune", "--bogus"])), 1);
    assert_eq!(code(&run(&["tune"])), 1);
    let o = run(&["tune", "--plant", "no_such_plant"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no_such_plant"));
    assert_eq!(
        code(&run(&["tune", "--plant", "vcm_like", "--set", "mass"])),
        1
    );
}

#[test]
fn pure_integrator_has_no_oscillation() {
    let d = TempDir::new().unwrap();
    let o = run(&[
        "tune",
        "--plant",
        "pure_integrator",
        "-o",
        s(d.path()),
        "--no-traces",
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(
        stderr(&o).contains("no sustained oscillation"),
        "{}",
        stderr(&o)
    );
    let r = report(d.path());
    assert!(r["results"]["pi_lead_error"].is_string());
}

#[test]
fn tune_with_zn_reports_both_designs() {
    let d = TempDir::new().unwrap();
    let o = run(&[
        "tune",
        "--plant",
        "second_order_type_one",
        "--zn",
        "-o",
        s(d.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("C(s) = ("), "{out}");
    assert!(out.contains("L(s) = ("), "{out}");
    let r = report(d.path());
    assert!(r["results"]["pi_lead"].is_object());
    assert!(r["results"]["zn"].is_object());
    for f in [
        "bode.csv",
        "step.svg",
        "pi.ctl",
        "pi_lead.ctl",
        "zn_pid.ctl",
        "trace_000.csv",
    ] {
        assert!(d.path().join(f).exists(), "{f} missing");
    }
    let bode = fs::read_to_string(d.path().join("bode.csv")).unwrap();
    assert!(bode.starts_with("omega,mag_db,phase_deg\n"));
}

#[test]
fn seeded_runs_are_byte_identical_and_reproducible_from_traces() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let o = run(&[
        "tune",
        "--plant",
        "vcm_like",
        "--seed",
        "7",
        "-o",
        s(a.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = ut()
        .args(["tune", "--plant", "vcm_like", "-o", s(b.path())])
        .env("UT_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ra = fs::read(a.path().join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.path().join("report.json")).unwrap());

    let r = report(a.path());
    let m = r["results"]["pi_lead"]["achieved_m"].as_f64().unwrap();
    assert!((0.30..=0.40).contains(&m), "M = {m}");

    for e in r["results"]["experiments"].as_array().unwrap() {
        let file = e["trace"].as_str().unwrap();
        let x_ref = e["x_ref"].as_f64().unwrap().to_string();
        let skip = e["verdict_skip"].as_f64().unwrap().to_string();
        let o = run(&[
            "analyze",
            s(&a.path().join(file)),
            "--x-ref",
            &x_ref,
            "--skip",
            &skip,
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let got: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(got["metrics"], e["metrics"], "{file}");
        let verdict = got.get("verdict").cloned().unwrap_or(Value::Null);
        assert_eq!(verdict, e["verdict"], "{file}");
    }
}

#[test]
fn analyze_sees_a_sine_as_sustained() {
    let d = TempDir::new().unwrap();
    let mut csv = String::from("t,r,u,x,d,x_clean\n");
    for i in 0..20_000 {
        let t = i as f64 * 1e-4;
        let x = 0.01 + 0.002 * (2.0 * std::f64::consts::PI * t / 0.05).sin();
        csv.push_str(&format!("{t},0.01,0,{x},0,\n"));
    }
    let p = d.path().join("sine.csv");
    fs::write(&p, csv).unwrap();
    let o = run(&["analyze", s(&p)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"]["sustained"], Value::Bool(true));
    let period = v["verdict"]["period"].as_f64().unwrap();
    assert!((period - 0.05).abs() < 1e-3);
}

#[test]
fn malformed_files_name_the_line() {
    let d = TempDir::new().unwrap();
    let p = d.path().join("bad.csv");
    fs::write(&p, "t,r,u,x,d,x_clean\n0,1,0,0,0,\n0.1,1,zero,0,0,\n").unwrap();
    let o = run(&["analyze", s(&p)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let c = d.path().join("bad.ctl");
    fs::write(&c, "# PI\nnum: 1 2\nden: 1 x\n").unwrap();
    let o = run(&[
        "simulate",
        "--plant",
        "second_order_type_one",
        "--controller",
        s(&c),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let j = d.path().join("plant.json");
    fs::write(&j, "{\"ut_schema\": 1,\n  \"model\": [\n").unwrap();
    let o = run(&["tune", "--plant-file", s(&j)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_a_trace_that_analyze_reads() {
    let d = TempDir::new().unwrap();
    let t = d.path().join("t.csv");
    let o = run(&[
        "simulate",
        "--plant",
        "second_order_type_one",
        "--pi",
        "12,1",
        "--lead",
        "0.1,0.1",
        "--t-end",
        "3",
        "--pulse",
        "1.5,0.01,-0.05",
        "-o",
        s(&t),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["analyze", s(&t), "--release", "1.51"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let csv = fs::read_to_string(&t).unwrap();
    assert!(csv.lines().any(|l| l.split(',').nth(4) == Some("-0.05")));
    assert!(v["recovery_time"].is_number());
}

fn metrics_rows(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("metrics.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn compare_orders_the_controllers_as_expected() {
    let d = TempDir::new().unwrap();
    let o = run(&[
        "compare",
        "--plant",
        "vcm_like",
        "--seed",
        "3",
        "--ctl",
        "pi=pi:383.1,0.3182",
        "--ctl",
        "pilead=pilead:383.1,0.3182",
        "--ctl",
        "zn=zn:4535,0.0549",
        "--refs",
        "0.01",
        "-o",
        s(d.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = metrics_rows(d.path());
    assert_eq!(rows.len(), 3);
    let get = |label: &str, col: usize| -> f64 {
        rows.iter().find(|r| r[0] == label).unwrap()[col]
            .parse()
            .unwrap()
    };
    assert!(get("pilead", 5) <= get("pi", 5), "{rows:?}");
    assert!(get("zn", 3) > get("pilead", 3), "{rows:?}");
    assert!(d.path().join("step_0.svg").exists());
}

#[test]
fn compare_covers_the_three_default_references() {
    let o = run(&[
        "compare",
        "--plant",
        "second_order_type_one",
        "--ctl",
        "pi:12,1",
        "--no-pulse",
        "--t-end",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    for r in ["0.005", "0.01", "0.015"] {
        assert!(out.lines().any(|l| l.contains(r)), "{out}");
    }
}

#[test]
fn unreachable_server_is_a_transport_failure() {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    drop(l);
    let d = TempDir::new().unwrap();
    let o = run(&["tune", "--connect", &addr, "--no-traces", "-o", s(d.path())]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn serve_and_connect_match_a_local_run() {
    let mut server = ut()
        .args([
            "serve",
            "--plant",
            "delayed_type_one",
            "--port",
            "0",
            "--sessions",
            "1",
        ])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().to_string();

    let (remote, local) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let o = run(&[
        "tune",
        "--connect",
        &addr,
        "--no-traces",
        "-o",
        s(remote.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(server.wait().unwrap().success());
    let o = run(&[
        "tune",
        "--plant",
        "delayed_type_one",
        "--no-traces",
        "-o",
        s(local.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (r, l) = (report(remote.path()), report(local.path()));
    assert_eq!(r["plant"], "external");
    assert_eq!(
        serde_json::to_string(&r["results"]).unwrap(),
        serde_json::to_string(&l["results"]).unwrap()
    );
}

#[test]
fn closed_stdout_is_not_an_error() {
    let mut child = ut()
        .args([
            "simulate",
            "--plant",
            "second_order_type_one",
            "--pi",
            "12,1",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .unwrap();
    assert_eq!(first, "t,r,u,x,d,x_clean\n");
    let o = child.wait_with_output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).is_empty(), "{}", stderr(&o));
}
