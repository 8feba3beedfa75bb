use std::collections::BTreeMap;
use std::fs;
use std::time::Duration;

use ut_core::docs;
use ut_core::sim::{catalog, make_session, PlantSession, PlantSpec, SessionError};
use ut_core::wire::RemoteSession;

use crate::{Failure, PlantArgs};

pub enum PlantSource {
    Local { spec: PlantSpec, name: String },
    Remote { addr: String },
}

pub fn read_file(path: &str) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{path}: {e}")))
}

fn overrides(set: &[String]) -> Result<BTreeMap<String, f64>, Failure> {
    let mut out = BTreeMap::new();
    for s in set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("--set {k}: not a number: {v:?}")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

impl PlantSource {
    pub fn resolve(a: &PlantArgs) -> Result<PlantSource, Failure> {
        let (mut spec, name) = if let Some(name) = &a.plant {
            let o = overrides(&a.set)?;
            let spec = catalog(name, &o).map_err(|e| Failure::usage(e.to_string()))?;
            let mut label = name.clone();
            if !o.is_empty() {
                let kv: Vec<String> = o.iter().map(|(k, v)| format!("{k}={v}")).collect();
                label = format!("{name}[{}]", kv.join(","));
            }
            (spec, label)
        } else if let Some(path) = &a.plant_file {
            let spec = docs::parse_plant(&read_file(path)?)
                .map_err(|e| Failure::usage(format!("{path}: {e}")))?;
            (spec, format!("file:{path}"))
        } else if let Some(addr) = &a.connect {
            if a.seed.is_some() {
                eprintln!("warning: --seed has no effect on a remote plant");
            }
            return Ok(PlantSource::Remote { addr: addr.clone() });
        } else {
            return Err(Failure::usage(
                "one of --plant, --plant-file or --connect is required",
            ));
        };
        if let Some(seed) = a.seed {
            spec.seed = seed;
        }
        Ok(PlantSource::Local { spec, name })
    }

    pub fn descriptor(&self) -> &str {
        match self {
            PlantSource::Local { name, .. } => name,
            PlantSource::Remote { .. } => "external",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            PlantSource::Local { spec, .. } => Some(spec.seed),
            PlantSource::Remote { .. } => None,
        }
    }

    pub fn open(&self) -> Result<Box<dyn PlantSession>, SessionError> {
        match self {
            PlantSource::Local { spec, .. } => Ok(Box::new(make_session(spec.clone())?)),
            PlantSource::Remote { addr } => Ok(Box::new(RemoteSession::connect_retry(
                addr.as_str(),
                100,
                Duration::from_millis(20),
            )?)),
        }
    }
}

/// Exit code for a session-level failure.
pub fn session_failure(e: SessionError) -> Failure {
    match e {
        SessionError::Transport(_) | SessionError::Protocol(_) | SessionError::Remote(_) => {
            Failure::transport(e.to_string())
        }
        SessionError::Sim(_) => Failure::tune(e.to_string()),
    }
}
