//! Tuning campaigns as reproducible reports: every experiment trace is
//! quantized through its CSV form before the tuner sees it, so metrics in the
//! report are exactly what `analyze` recomputes from the stored files.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::lti::{bode, TransferFunction};
use crate::sim::{PlantSession, ScenarioSpec, SessionError, SimError, Trace};
use crate::tuner::{
    tune_pi_lead, zn_pid, zn_pid_with_k, ExperimentRecord, PiLeadResult, TuneConfig, TuneError,
    TuneLog, ZnResult,
};

pub const REPORT_SCHEMA: u64 = 1;
pub const TOOL: &str = concat!("ut ", env!("CARGO_PKG_VERSION"));

/// Default push used for disturbance-recovery comparisons: a short knock on
/// the plant input after the step has settled.
pub const PULSE_T_ON: f64 = 2.0;
pub const PULSE_WIDTH: f64 = 0.01;
pub const PULSE_FORCE: f64 = -20.0;
pub const PULSE_T_END: f64 = 4.0;

pub fn pulse_scenario(x_ref: f64) -> ScenarioSpec {
    ScenarioSpec::with_pulse(x_ref, PULSE_T_END, PULSE_T_ON, PULSE_WIDTH, PULSE_FORCE)
}

/// Wraps a session, rounds every trace to its CSV representation and
/// optionally writes it as `trace_NNN.csv`.
pub struct RecordingSession<S> {
    inner: S,
    dir: Option<PathBuf>,
    next: usize,
    files: Vec<String>,
    keep: usize,
    recent: VecDeque<Trace>,
}

pub fn trace_file_name(index: usize) -> String {
    format!("trace_{index:03}.csv")
}

impl<S: PlantSession> RecordingSession<S> {
    /// `first_index` numbers the first trace file; `keep` traces stay in memory.
    pub fn new(inner: S, dir: Option<PathBuf>, first_index: usize, keep: usize) -> Self {
        RecordingSession {
            inner,
            dir,
            next: first_index,
            files: Vec::new(),
            keep,
            recent: VecDeque::new(),
        }
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn next_index(&self) -> usize {
        self.next
    }

    pub fn recent(&self) -> &VecDeque<Trace> {
        &self.recent
    }
}

impl<S: PlantSession> PlantSession for RecordingSession<S> {
    fn run(
        &mut self,
        controller: &TransferFunction,
        scenario: &ScenarioSpec,
    ) -> Result<Trace, SessionError> {
        let t = self.inner.run(controller, scenario)?.quantized()?;
        let name = trace_file_name(self.next);
        self.next += 1;
        if let Some(dir) = &self.dir {
            fs::write(dir.join(&name), t.to_csv())
                .map_err(|e| SessionError::Sim(SimError::InvalidTrace(format!("{name}: {e}"))))?;
            self.files.push(name);
        }
        if self.keep > 0 {
            if self.recent.len() == self.keep {
                self.recent.pop_front();
            }
            self.recent.push_back(t.clone());
        }
        Ok(t)
    }

    fn reset(&mut self) -> Result<(), SessionError> {
        self.inner.reset()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignKind {
    PiLead,
    Zn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportExperiment {
    pub campaign: CampaignKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<String>,
    #[serde(flatten)]
    pub record: ExperimentRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub ut_schema: u64,
    pub tool: String,
    pub plant: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub config: TuneConfig,
    pub results: CampaignResults,
}

/// Everything in a report that depends on the experiments alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignResults {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pi_lead: Option<PiLeadResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pi_lead_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zn: Option<ZnResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zn_error: Option<String>,
    pub experiments: Vec<ReportExperiment>,
    pub warnings: Vec<String>,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<CampaignReport, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The report plus the typed failures behind any `*_error` entries.
#[derive(Debug)]
pub struct CampaignRun {
    pub report: CampaignReport,
    pub pi_lead_error: Option<TuneError>,
    pub zn_error: Option<TuneError>,
    /// Verification traces (PI, then PI·Lead) when the pipeline succeeded.
    pub verification: Vec<Trace>,
}

#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    pub zn: bool,
    pub trace_dir: Option<PathBuf>,
}

fn append(
    out: &mut Vec<ReportExperiment>,
    warnings: &mut Vec<String>,
    kind: CampaignKind,
    log: TuneLog,
    files: &[String],
) {
    for (i, record) in log.experiments.into_iter().enumerate() {
        out.push(ReportExperiment {
            campaign: kind,
            trace: files.get(i).cloned(),
            record,
        });
    }
    warnings.extend(log.warnings);
}

/// Runs the PI-Lead pipeline and, if asked, the ultimate-gain baseline, each
/// on a fresh session from `open`. Tuner failures end up in the report;
/// only a failure to open a session is returned as an error.
pub fn run_campaign<S, F>(
    mut open: F,
    cfg: &TuneConfig,
    plant: &str,
    seed: Option<u64>,
    opts: &CampaignOptions,
) -> Result<CampaignRun, SessionError>
where
    S: PlantSession,
    F: FnMut() -> Result<S, SessionError>,
{
    let mut results = CampaignResults::default();
    let (mut pi_lead_error, mut zn_error) = (None, None);
    let mut verification = Vec::new();

    let mut rec = RecordingSession::new(open()?, opts.trace_dir.clone(), 0, 2);
    let outcome = tune_pi_lead(&mut rec, cfg);
    let next = rec.next_index();
    let files = rec.files().to_vec();
    let k = match outcome {
        Ok(mut r) => {
            let log = std::mem::take(&mut r.log);
            append(
                &mut results.experiments,
                &mut results.warnings,
                CampaignKind::PiLead,
                log,
                &files,
            );
            verification = rec.recent().iter().cloned().collect();
            let k = r.k;
            results.pi_lead = Some(r);
            Some(k)
        }
        Err(f) => {
            append(
                &mut results.experiments,
                &mut results.warnings,
                CampaignKind::PiLead,
                f.log,
                &files,
            );
            results.pi_lead_error = Some(f.error.to_string());
            pi_lead_error = Some(f.error);
            None
        }
    };
    drop(rec);

    if opts.zn {
        let mut rec = RecordingSession::new(open()?, opts.trace_dir.clone(), next, 0);
        let outcome = match k {
            Some(k) => zn_pid_with_k(&mut rec, cfg, k),
            None => zn_pid(&mut rec, cfg),
        };
        let files = rec.files().to_vec();
        match outcome {
            Ok(mut z) => {
                let log = std::mem::take(&mut z.log);
                append(
                    &mut results.experiments,
                    &mut results.warnings,
                    CampaignKind::Zn,
                    log,
                    &files,
                );
                results.zn = Some(z);
            }
            Err(f) => {
                append(
                    &mut results.experiments,
                    &mut results.warnings,
                    CampaignKind::Zn,
                    f.log,
                    &files,
                );
                results.zn_error = Some(f.error.to_string());
                zn_error = Some(f.error);
            }
        }
    }

    Ok(CampaignRun {
        report: CampaignReport {
            ut_schema: REPORT_SCHEMA,
            tool: TOOL.to_string(),
            plant: plant.to_string(),
            seed,
            config: cfg.clone(),
            results,
        },
        pi_lead_error,
        zn_error,
        verification,
    })
}

/// `omega,mag_db,phase_deg` rows.
pub fn bode_csv(tf: &TransferFunction, lo: f64, hi: f64) -> Result<String, crate::lti::LtiError> {
    let mut s = String::from("omega,mag_db,phase_deg\n");
    for p in bode(tf, lo, hi, 512)? {
        let _ = writeln!(
            s,
            "{:.9e},{:.9e},{:.9e}",
            p.omega, p.magnitude_db, p.phase_deg
        );
    }
    Ok(s)
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Minimal standalone SVG of output traces against time, with the reference
/// drawn dashed.
pub fn step_svg(series: &[(&str, &Trace)], x_ref: f64) -> String {
    const W: f64 = 800.0;
    const H: f64 = 450.0;
    const PAD: f64 = 50.0;
    let t_max = series
        .iter()
        .map(|(_, t)| t.duration())
        .fold(0.0, f64::max)
        .max(1e-12);
    let (mut lo, mut hi) = (x_ref.min(0.0), x_ref.max(0.0));
    for (_, t) in series {
        for v in &t.x {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let sx = |t: f64| PAD + (t / t_max) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<path d="M{PAD} {PAD}V{b}H{r}" fill="none" stroke="#444"/>"##,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        s,
        r##"<line x1="{PAD}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#888" stroke-dasharray="6 4"/>"##,
        y = sy(x_ref),
        r = W - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle">t = {t_max:.3} s</text>"#,
        x = W - PAD,
        y = H - PAD + 20.0
    );
    for (k, (name, t)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let step = (t.len() / 2000).max(1);
        let mut d = String::new();
        for (j, i) in (0..t.len()).step_by(step).enumerate() {
            let _ = write!(
                d,
                "{}{:.2} {:.2}",
                if j == 0 { "M" } else { "L" },
                sx(t.time(i) - t.t0),
                sy(t.x[i])
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" fill="{color}">{n}</text>"#,
            x = PAD + 10.0,
            y = PAD + 15.0 * (k as f64 + 1.0),
            n = escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Loads a trace file, mapping I/O failures to the same error type as parse
/// failures.
pub fn read_trace(path: &Path) -> Result<Trace, SimError> {
    let text = fs::read_to_string(path)
        .map_err(|e| SimError::InvalidTrace(format!("{}: {e}", path.display())))?;
    Trace::from_csv(&text)
}
