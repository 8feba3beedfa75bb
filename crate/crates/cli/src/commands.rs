use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::net::TcpListener;
use std::path::Path;

use serde_json::json;
use ut_core::analysis::{
    detect_sustained, overshoot, peak_deviation, recovery_time, SETTLING_BAND,
};
use ut_core::docs::{self, parse_ctl_spec, write_controller};
use ut_core::lti::{make_lead, make_pi, make_zn_pid, TransferFunction};
use ut_core::report::{
    bode_csv, pulse_scenario, read_trace, run_campaign, step_svg, CampaignOptions, PULSE_FORCE,
    PULSE_T_ON, PULSE_WIDTH,
};
use ut_core::sim::{ScenarioSpec, SessionError, SimError, Trace};
use ut_core::tuner::{TuneConfig, TuneError};
use ut_core::wire;

use crate::plant::{read_file, session_failure, PlantSource};
use crate::{ControllerArgs, Failure, PlantArgs, ScenarioArgs};

/// Writes to stdout, exiting quietly once the reader has gone away.
fn emit(args: std::fmt::Arguments) {
    let mut o = std::io::stdout().lock();
    if let Err(e) = o.write_fmt(args).and_then(|()| o.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: stdout: {e}");
        }
        std::process::exit(0);
    }
}

macro_rules! out {
    ($($a:tt)*) => { emit(format_args!($($a)*)) };
}

macro_rules! outln {
    ($($a:tt)*) => { emit(format_args!("{}\n", format_args!($($a)*))) };
}

fn pair(flag: &str, s: &str) -> Result<(f64, f64), Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::usage(format!("--{flag}: expected two numbers, got {s:?}")))?;
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Failure::usage(format!(
            "--{flag}: expected two numbers, got {s:?}"
        ))),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn tune_failure(e: &TuneError) -> Failure {
    match e {
        TuneError::Session(s) => session_failure(s.clone()),
        other => Failure::tune(other.to_string()),
    }
}

pub fn tune(
    plant: &PlantArgs,
    config: Option<&str>,
    zn: bool,
    out: &str,
    traces: bool,
) -> Result<(), Failure> {
    let source = PlantSource::resolve(plant)?;
    let cfg: TuneConfig = match config {
        Some(p) => {
            docs::from_document(&read_file(p)?).map_err(|e| Failure::usage(format!("{p}: {e}")))?
        }
        None => TuneConfig::default(),
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let dir = Path::new(out);
    fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{out}: {e}")))?;
    let opts = CampaignOptions {
        zn,
        trace_dir: traces.then(|| dir.to_path_buf()),
    };
    let run = run_campaign(
        || source.open(),
        &cfg,
        source.descriptor(),
        source.seed(),
        &opts,
    )
    .map_err(session_failure)?;
    let report_path = dir.join("report.json");
    write(&report_path, &run.report.to_json())?;

    let res = &run.report.results;
    outln!("plant: {}", run.report.plant);
    outln!("experiments: {}", res.experiments.len());
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(r) = &res.pi_lead {
        outln!("k = {}", r.k);
        outln!("C(s) = {}", r.controllers.pi);
        outln!("L(s) = {}", r.controllers.lead);
        match r.predicted_phase_margin_deg {
            Some(pm) => outln!(
                "M = {:.4} (predicted phase margin {:.1} deg)",
                r.achieved_m,
                pm
            ),
            None => outln!("M = {}", r.achieved_m),
        }
        outln!("M with Lead = {:.4}", r.lead_m);
        write(&dir.join("pi.ctl"), &write_controller(&r.controllers.pi))?;
        write(
            &dir.join("pi_lead.ctl"),
            &write_controller(&r.controllers.pi_lead),
        )?;
        let bode = bode_csv(&r.controllers.pi_lead, 1e-2 / r.ti, 1e4 / r.ti)
            .map_err(|e| Failure::tune(e.to_string()))?;
        write(&dir.join("bode.csv"), &bode)?;
        if let [pi, pl] = &run.verification[..] {
            let svg = step_svg(&[("C(s)", pi), ("C(s)L(s)", pl)], cfg.experiment.x_ref);
            write(&dir.join("step.svg"), &svg)?;
        }
    }
    if let Some(z) = &res.zn {
        outln!(
            "ZN: Ku = {}, Tu = {} -> Kp = {}, Ti = {}, Td = {}",
            z.ultimate.ku,
            z.ultimate.tu,
            z.gains.kp,
            z.gains.ti,
            z.gains.td
        );
        write(&dir.join("zn_pid.ctl"), &write_controller(&z.pid))?;
    }
    if let Some(e) = &run.zn_error {
        eprintln!("warning: ZN baseline failed: {e}");
    }
    outln!("report: {}", report_path.display());
    match &run.pi_lead_error {
        Some(e) => Err(tune_failure(e)),
        None => Ok(()),
    }
}

fn controller(c: &ControllerArgs) -> Result<TransferFunction, Failure> {
    let lti = |e: ut_core::lti::LtiError| Failure::usage(e.to_string());
    if let Some(pi) = &c.pi {
        let (kp, ti) = pair("pi", pi)?;
        let mut tf = make_pi(kp, ti).map_err(lti)?;
        if let Some(l) = &c.lead {
            let (alpha, tau) = pair("lead", l)?;
            tf = tf.series(&make_lead(alpha, tau, 1.0).map_err(lti)?);
        }
        Ok(tf)
    } else if let Some(p) = &c.controller {
        docs::parse_controller(&read_file(p)?).map_err(|e| Failure::usage(format!("{p}: {e}")))
    } else if let Some(z) = &c.zn_pid {
        let (ku, tu) = pair("zn-pid", z)?;
        make_zn_pid(ku, tu, 1000.0, 2).map_err(lti)
    } else {
        Err(Failure::usage(
            "one of --pi, --controller or --zn-pid is required",
        ))
    }
}

fn scenario(a: &ScenarioArgs) -> Result<ScenarioSpec, Failure> {
    if let Some(p) = &a.scenario {
        let s: ScenarioSpec =
            docs::from_document(&read_file(p)?).map_err(|e| Failure::usage(format!("{p}: {e}")))?;
        s.validate()
            .map_err(|e| Failure::usage(format!("{p}: {e}")))?;
        return Ok(s);
    }
    let mut s = ScenarioSpec::step(a.x_ref, a.t_end);
    s.dt = a.dt;
    s.gravity_feedforward = a.gravity_ff;
    match a.pulse.as_deref() {
        None => {}
        Some("default") => {
            s = ScenarioSpec {
                disturbance: pulse_scenario(a.x_ref).disturbance,
                ..s
            }
        }
        Some(p) => {
            let v: Vec<f64> = p
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| {
                    Failure::usage(format!("--pulse: expected t_on,width,force, got {p:?}"))
                })?;
            let [t_on, width, force] = v[..] else {
                return Err(Failure::usage(format!(
                    "--pulse: expected t_on,width,force, got {p:?}"
                )));
            };
            s = ScenarioSpec {
                disturbance: ScenarioSpec::with_pulse(a.x_ref, a.t_end, t_on, width, force)
                    .disturbance,
                ..s
            };
        }
    }
    s.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(s)
}

pub fn simulate(
    plant: &PlantArgs,
    ctl: &ControllerArgs,
    sc: &ScenarioArgs,
    out: Option<&str>,
) -> Result<(), Failure> {
    let source = PlantSource::resolve(plant)?;
    let c = controller(ctl)?;
    let s = scenario(sc)?;
    let mut session = source.open().map_err(session_failure)?;
    let trace = session.run(&c, &s).map_err(session_failure)?;
    let csv = trace.to_csv();
    match out {
        Some(p) => write(Path::new(p), &csv)?,
        None => out!("{csv}"),
    }
    if trace.diverged {
        eprintln!("warning: simulation diverged at t = {}", trace.duration());
    }
    Ok(())
}

pub fn analyze(
    path: &str,
    x_ref: Option<f64>,
    skip: f64,
    release: Option<f64>,
) -> Result<(), Failure> {
    let trace = read_trace(Path::new(path)).map_err(|e| match e {
        SimError::Csv { line, msg } => Failure::usage(format!("{path}: line {line}: {msg}")),
        other => Failure::usage(format!("{path}: {other}")),
    })?;
    let x_ref = match x_ref.or_else(|| trace.r.last().copied()) {
        Some(x) if x != 0.0 => x,
        _ => return Err(Failure::usage("--x-ref is required when r ends at zero")),
    };
    let metrics = overshoot(&trace, x_ref).map_err(|e| Failure::tune(e.to_string()))?;
    let verdict = detect_sustained(&trace, skip);
    let mut doc = json!({
        "x_ref": x_ref,
        "metrics": metrics,
        "peak_deviation": peak_deviation(&trace, x_ref).map_err(|e| Failure::tune(e.to_string()))?,
    });
    match verdict {
        Ok(v) => doc["verdict"] = json!(v),
        Err(e) => doc["verdict_error"] = json!(e.to_string()),
    }
    doc["verdict_skip"] = json!(skip);
    if let Some(t) = release {
        let r = recovery_time(&trace, x_ref, t, SETTLING_BAND)
            .map_err(|e| Failure::usage(e.to_string()))?;
        doc["recovery_time"] = json!(r);
    }
    outln!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(())
}

struct Row {
    label: String,
    x_ref: f64,
    m: f64,
    peak: f64,
    settling: Option<f64>,
    recovery: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

pub fn compare(
    plant: &PlantArgs,
    specs: &[String],
    refs: &[f64],
    t_end: f64,
    pulse: bool,
    out: Option<&str>,
) -> Result<(), Failure> {
    let source = PlantSource::resolve(plant)?;
    let mut ctls = Vec::new();
    for s in specs {
        let l = parse_ctl_spec(s).map_err(|e| Failure::usage(e.to_string()))?;
        let tf = l
            .spec
            .build(|p| read_file(p).map_err(|f| docs::DocError::Invalid(f.msg)))
            .map_err(|e| Failure::usage(format!("{}: {e}", l.label)))?;
        ctls.push((l.label, tf));
    }
    if refs.is_empty() || refs.iter().any(|r| !r.is_finite() || *r == 0.0) {
        return Err(Failure::usage("--refs must be nonzero numbers"));
    }
    let mut rows = Vec::new();
    let mut plots: Vec<Vec<(String, Trace)>> = vec![Vec::new(); refs.len()];
    for (label, tf) in &ctls {
        let mut session = source.open().map_err(session_failure)?;
        let mut run = |s: &ScenarioSpec| -> Result<Trace, Failure> {
            session.reset().map_err(session_failure)?;
            session
                .run(tf, s)
                .map_err(|e: SessionError| session_failure(e))
        };
        for (k, &x_ref) in refs.iter().enumerate() {
            let t = run(&ScenarioSpec::step(x_ref, t_end))?;
            let m = overshoot(&t, x_ref).map_err(|e| Failure::tune(e.to_string()))?;
            let peak = peak_deviation(&t, x_ref).map_err(|e| Failure::tune(e.to_string()))?;
            let recovery = if pulse {
                let p = pulse_scenario(x_ref);
                let tp = run(&p)?;
                recovery_time(&tp, x_ref, PULSE_T_ON + PULSE_WIDTH, SETTLING_BAND)
                    .map_err(|e| Failure::tune(e.to_string()))?
            } else {
                None
            };
            rows.push(Row {
                label: label.clone(),
                x_ref,
                m: m.overshoot_m,
                peak,
                settling: m.settling_time_2pct,
                recovery,
            });
            plots[k].push((label.clone(), t));
        }
    }

    let width = rows
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(0)
        .max(10);
    let mut table = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>10}  {:>10}\n",
        "controller", "x_ref", "M", "peak_dev", "settling_s", "recovery_s"
    );
    let mut csv = String::from("controller,x_ref,overshoot,peak_deviation,settling_s,recovery_s\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{:<width$}  {:>8}  {:>8.4}  {:>8.4}  {:>10}  {:>10}",
            r.label,
            r.x_ref,
            r.m,
            r.peak,
            opt(r.settling),
            opt(r.recovery)
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.label,
            r.x_ref,
            r.m,
            r.peak,
            r.settling.map_or(String::new(), |v| v.to_string()),
            r.recovery.map_or(String::new(), |v| v.to_string())
        );
    }
    out!("{table}");
    if pulse {
        outln!(
            "recovery: {PULSE_FORCE} input units for {PULSE_WIDTH} s at t = {PULSE_T_ON} s, {}% band",
            SETTLING_BAND * 100.0
        );
    }
    if let Some(dir) = out {
        let dir = Path::new(dir);
        fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
        write(&dir.join("metrics.csv"), &csv)?;
        for (k, series) in plots.iter().enumerate() {
            let refs_: Vec<(&str, &Trace)> = series.iter().map(|(l, t)| (l.as_str(), t)).collect();
            write(
                &dir.join(format!("step_{k}.svg")),
                &step_svg(&refs_, refs[k]),
            )?;
        }
    }
    Ok(())
}

pub fn serve(
    plant: &PlantArgs,
    bind: &str,
    port: u16,
    sessions: Option<usize>,
) -> Result<(), Failure> {
    let PlantSource::Local { spec, name } = PlantSource::resolve(plant)? else {
        return Err(Failure::usage("serve needs --plant or --plant-file"));
    };
    let listener = TcpListener::bind((bind, port))
        .map_err(|e| Failure::transport(format!("{bind}:{port}: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Failure::transport(e.to_string()))?;
    eprintln!("serving {name} on {addr}");
    wire::serve(listener, spec, sessions).map_err(|e| Failure::transport(e.to_string()))
}
