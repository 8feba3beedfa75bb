use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use ut_core::lti::make_pi;
use ut_core::report::{run_campaign, CampaignOptions};
use ut_core::sim::{catalog, make_session, PlantSession, PlantSpec, ScenarioSpec, SessionError};
use ut_core::tuner::TuneConfig;
use ut_core::wire::{self, RemoteSession};

fn spawn(plant: PlantSpec, sessions: usize) -> (SocketAddr, JoinHandle<()>) {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    let h = thread::spawn(move || wire::serve(l, plant, Some(sessions)).unwrap());
    (addr, h)
}

fn vcm(seed: u64) -> PlantSpec {
    let mut p = catalog("vcm_like", &BTreeMap::new()).unwrap();
    p.seed = seed;
    p
}

fn read_line(s: &TcpStream) -> String {
    let mut line = String::new();
    BufReader::new(s).read_line(&mut line).unwrap();
    line
}

#[test]
fn remote_traces_equal_local_traces() {
    let p = vcm(11);
    let (addr, h) = spawn(p.clone(), 1);
    let mut remote = RemoteSession::connect(addr).unwrap();
    let mut local = make_session(p).unwrap();
    let c = make_pi(383.1, 0.3182).unwrap();
    let s = ScenarioSpec::with_pulse(0.01, 1.5, 1.0, 0.01, -20.0);
    for _ in 0..2 {
        let mut a = local.run(&c, &s).unwrap();
        let b = remote.run(&c, &s).unwrap();
        a.x_clean = None;
        assert_eq!(a, b);
    }
    local.reset().unwrap();
    remote.reset().unwrap();
    let mut a = local.run(&c, &s).unwrap();
    a.x_clean = None;
    assert_eq!(a, remote.run(&c, &s).unwrap());
    drop(remote);
    h.join().unwrap();
}

#[test]
fn campaign_results_are_identical_over_the_wire() {
    let p = vcm(7);
    let cfg = TuneConfig::default();
    let opts = CampaignOptions::default();
    let local = run_campaign(
        || Ok(make_session(p.clone())?),
        &cfg,
        "vcm_like",
        Some(7),
        &opts,
    )
    .unwrap();
    let (addr, h) = spawn(p, 1);
    let remote = run_campaign(
        || RemoteSession::connect_retry(addr, 50, Duration::from_millis(20)),
        &cfg,
        "external",
        None,
        &opts,
    )
    .unwrap();
    h.join().unwrap();
    let a = serde_json::to_string_pretty(&local.report.results).unwrap();
    let b = serde_json::to_string_pretty(&remote.report.results).unwrap();
    assert!(local.report.results.pi_lead.is_some());
    assert_eq!(a, b);
}

#[test]
fn malformed_frame_gets_bad_frame_then_close() {
    let (addr, h) = spawn(vcm(0), 1);
    let mut s = TcpStream::connect(addr).unwrap();
    s.write_all(b"{\"hello\":{\"schema\":1}}\n").unwrap();
    assert_eq!(read_line(&s).trim(), r#"{"hello":{"schema":1}}"#);
    s.write_all(b"{\"launch\":true}\n").unwrap();
    let mut r = BufReader::new(&s);
    let mut line = String::new();
    r.read_line(&mut line).unwrap();
    assert_eq!(line.trim(), r#"{"err":"bad_frame"}"#);
    line.clear();
    assert_eq!(r.read_line(&mut line).unwrap(), 0);
    h.join().unwrap();
}

#[test]
fn run_before_hello_is_a_protocol_violation() {
    let (addr, h) = spawn(vcm(0), 1);
    let mut s = TcpStream::connect(addr).unwrap();
    s.write_all(b"{\"reset\":{}}\n").unwrap();
    assert_eq!(read_line(&s).trim(), r#"{"err":"bad_frame"}"#);
    h.join().unwrap();
}

#[test]
fn second_client_is_told_busy() {
    let (addr, h) = spawn(vcm(0), 1);
    let first = RemoteSession::connect(addr).unwrap();
    match RemoteSession::connect(addr) {
        Err(SessionError::Remote(m)) => assert_eq!(m, wire::ERR_BUSY),
        other => panic!("expected busy, got {:?}", other.map(|_| ())),
    }
    drop(first);
    h.join().unwrap();
}
