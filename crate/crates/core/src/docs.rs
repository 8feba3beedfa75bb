//! Schema-tagged JSON documents, the controller coefficient file and the
//! compact controller specs accepted on the command line.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::lti::{make_lead, make_pi, make_zn_pid, LtiError, TransferFunction};
use crate::sim::PlantSpec;

pub const SCHEMA_VERSION: u64 = 1;
pub const SCHEMA_KEY: &str = "ut_schema";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DocError {
    #[error("line {line}, column {column}: {msg}")]
    Json {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("missing \"ut_schema\" field")]
    MissingSchema,
    #[error("unsupported ut_schema {0}, expected 1")]
    UnsupportedSchema(String),
    #[error("document is not a JSON object")]
    NotAnObject,
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error(transparent)]
    Lti(#[from] LtiError),
}

impl From<serde_json::Error> for DocError {
    fn from(e: serde_json::Error) -> Self {
        DocError::Json {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}

/// Parses a document carrying `"ut_schema": 1` next to the fields of `T`.
pub fn from_document<T: DeserializeOwned>(text: &str) -> Result<T, DocError> {
    let mut v: Value = serde_json::from_str(text)?;
    let obj = v.as_object_mut().ok_or(DocError::NotAnObject)?;
    match obj.remove(SCHEMA_KEY) {
        None => return Err(DocError::MissingSchema),
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(other) => return Err(DocError::UnsupportedSchema(other.to_string())),
    }
    serde_json::from_value(v).map_err(|e| DocError::Invalid(e.to_string()))
}

/// Pretty JSON with `"ut_schema": 1` as the first field.
pub fn to_document<T: Serialize>(value: &T) -> String {
    let body = serde_json::to_value(value).expect("documents serialize to JSON");
    let mut out = serde_json::Map::new();
    out.insert(SCHEMA_KEY.to_string(), Value::from(SCHEMA_VERSION));
    match body {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("value".to_string(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(out)).expect("JSON map");
    s.push('\n');
    s
}

pub fn parse_plant(text: &str) -> Result<PlantSpec, DocError> {
    let p: PlantSpec = from_document(text)?;
    p.validate().map_err(|e| DocError::Invalid(e.to_string()))?;
    Ok(p)
}

fn numbers(line: usize, s: &str) -> Result<Vec<f64>, DocError> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DocError::Line {
                    line,
                    msg: format!("not a finite number: {t:?}"),
                })
        })
        .collect()
}

/// Reads a controller coefficient file:
///
/// ```text
/// # PI-Lead
/// num: 4.3245 139.5 450
/// den: 0.000961 0.31 0
/// dead_time: 0
/// ```
///
/// Coefficients are in descending powers of `s`; `#` starts a comment.
pub fn parse_controller(text: &str) -> Result<TransferFunction, DocError> {
    let (mut num, mut den, mut dead) = (None, None, None);
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last = line;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, rest) = body.split_once(':').ok_or_else(|| DocError::Line {
            line,
            msg: "expected `key: values`".into(),
        })?;
        let slot = match key.trim() {
            "num" => &mut num,
            "den" => &mut den,
            "dead_time" => &mut dead,
            k => {
                return Err(DocError::Line {
                    line,
                    msg: format!("unknown key {k:?}"),
                })
            }
        };
        if slot.is_some() {
            return Err(DocError::Line {
                line,
                msg: format!("duplicate key {:?}", key.trim()),
            });
        }
        let v = numbers(line, rest)?;
        if v.is_empty() {
            return Err(DocError::Line {
                line,
                msg: "no coefficients".into(),
            });
        }
        *slot = Some((line, v));
    }
    let missing = |k: &str| DocError::Line {
        line: last.max(1),
        msg: format!("missing `{k}:` line"),
    };
    let (_, num) = num.ok_or_else(|| missing("num"))?;
    let (dline, den) = den.ok_or_else(|| missing("den"))?;
    let tf = TransferFunction::new(num, den).map_err(|e| DocError::Line {
        line: dline,
        msg: e.to_string(),
    })?;
    match dead {
        None => Ok(tf),
        Some((line, v)) if v.len() == 1 => tf.with_dead_time(v[0]).map_err(|e| DocError::Line {
            line,
            msg: e.to_string(),
        }),
        Some((line, _)) => Err(DocError::Line {
            line,
            msg: "dead_time takes one value".into(),
        }),
    }
}

/// Inverse of [`parse_controller`].
pub fn write_controller(tf: &TransferFunction) -> String {
    let join = |c: &[f64]| {
        c.iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = format!("num: {}\nden: {}\n", join(tf.num()), join(tf.den()));
    if tf.dead_time() > 0.0 {
        s.push_str(&format!("dead_time: {:?}\n", tf.dead_time()));
    }
    s
}

/// Controller named on the command line, `[label=]kind:args`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CtlSpec {
    /// `pi:Kp,Ti`
    Pi { kp: f64, ti: f64 },
    /// `pilead:Kp,Ti[,alpha,tau]`; the Lead defaults to `α = 0.1, τ = Ti/10`.
    PiLead {
        kp: f64,
        ti: f64,
        alpha: f64,
        tau: f64,
    },
    /// `zn:Ku,Tu[,f_c,order]`
    Zn {
        ku: f64,
        tu: f64,
        f_c: f64,
        order: usize,
    },
    /// `file:path`
    File { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCtl {
    pub label: String,
    pub spec: CtlSpec,
}

pub fn parse_ctl_spec(s: &str) -> Result<LabeledCtl, DocError> {
    let bad = |msg: String| DocError::Invalid(format!("controller spec {s:?}: {msg}"));
    let (label, body) = match s.split_once('=') {
        Some((l, b)) if !l.is_empty() && !l.contains(':') => (Some(l.to_string()), b),
        _ => (None, s),
    };
    let (kind, args) = body
        .split_once(':')
        .ok_or_else(|| bad("expected kind:args".into()))?;
    let nums = || -> Result<Vec<f64>, DocError> {
        args.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("not a finite number: {t:?}")))
            })
            .collect()
    };
    let spec = match kind {
        "pi" => match nums()?[..] {
            [kp, ti] => CtlSpec::Pi { kp, ti },
            _ => return Err(bad("pi takes Kp,Ti".into())),
        },
        "pilead" => match nums()?[..] {
            [kp, ti] => CtlSpec::PiLead {
                kp,
                ti,
                alpha: 0.1,
                tau: ti / 10.0,
            },
            [kp, ti, alpha, tau] => CtlSpec::PiLead { kp, ti, alpha, tau },
            _ => return Err(bad("pilead takes Kp,Ti[,alpha,tau]".into())),
        },
        "zn" => match nums()?[..] {
            [ku, tu] => CtlSpec::Zn {
                ku,
                tu,
                f_c: 1000.0,
                order: 2,
            },
            [ku, tu, f_c, order] if order.fract() == 0.0 && (1.0..=8.0).contains(&order) => {
                CtlSpec::Zn {
                    ku,
                    tu,
                    f_c,
                    order: order as usize,
                }
            }
            _ => return Err(bad("zn takes Ku,Tu[,f_c,order]".into())),
        },
        "file" if !args.is_empty() => CtlSpec::File {
            path: args.to_string(),
        },
        _ => return Err(bad(format!("unknown kind {kind:?}"))),
    };
    Ok(LabeledCtl {
        label: label.unwrap_or_else(|| body.to_string()),
        spec,
    })
}

impl CtlSpec {
    /// Builds the controller; `File` specs are read through `read`.
    pub fn build(
        &self,
        read: impl FnOnce(&str) -> Result<String, DocError>,
    ) -> Result<TransferFunction, DocError> {
        Ok(match self {
            CtlSpec::Pi { kp, ti } => make_pi(*kp, *ti)?,
            CtlSpec::PiLead { kp, ti, alpha, tau } => {
                make_pi(*kp, *ti)?.series(&make_lead(*alpha, *tau, 1.0)?)
            }
            CtlSpec::Zn { ku, tu, f_c, order } => make_zn_pid(*ku, *tu, *f_c, *order)?,
            CtlSpec::File { path } => parse_controller(&read(path)?)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ScenarioSpec;

    #[test]
    fn document_round_trip_and_schema_checks() {
        let sc = ScenarioSpec::step(0.01, 2.0);
        let text = to_document(&sc);
        assert!(text.starts_with("{\n  \"ut_schema\": 1,"));
        assert_eq!(from_document::<ScenarioSpec>(&text).unwrap(), sc);
        assert_eq!(
            from_document::<ScenarioSpec>(r#"{"x_ref":1,"t_end":1}"#),
            Err(DocError::MissingSchema)
        );
        assert!(matches!(
            from_document::<ScenarioSpec>(r#"{"ut_schema":2,"x_ref":1,"t_end":1}"#),
            Err(DocError::UnsupportedSchema(_))
        ));
        match from_document::<ScenarioSpec>("{\n\"ut_schema\": 1,\n  \"x_ref\": ]") {
            Err(DocError::Json { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn controller_file_round_trip() {
        let c = make_pi(450.0, 0.31)
            .unwrap()
            .series(&make_lead(0.1, 0.031, 1.0).unwrap());
        let text = write_controller(&c);
        assert_eq!(parse_controller(&text).unwrap(), c);
        let d = c.clone().with_dead_time(0.002).unwrap();
        assert_eq!(parse_controller(&write_controller(&d)).unwrap(), d);
    }

    #[test]
    fn controller_file_errors_name_the_line() {
        let cases = [
            ("num: 1\nden 1 0\n", 2),
            ("# c\nnum: 1 x\nden: 1\n", 2),
            ("num: 1\nnum: 2\nden: 1\n", 2),
            ("num: 1\n\nden: 0 0\n", 3),
            ("num: 1\n", 1),
            ("num: 1\nden: 1\ndead_time: -1\n", 3),
        ];
        for (text, want) in cases {
            match parse_controller(text) {
                Err(DocError::Line { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn ctl_specs() {
        let l = parse_ctl_spec("PI-Lead=pilead:450,0.31").unwrap();
        assert_eq!(l.label, "PI-Lead");
        let tf = l.spec.build(|_| unreachable!()).unwrap();
        let want = make_pi(450.0, 0.31)
            .unwrap()
            .series(&make_lead(0.1, 0.031, 1.0).unwrap());
        assert_eq!(tf, want);
        assert_eq!(parse_ctl_spec("pi:2,3").unwrap().label, "pi:2,3");
        assert!(matches!(
            parse_ctl_spec("zn:1290,0.098").unwrap().spec,
            CtlSpec::Zn { order: 2, .. }
        ));
        for bad in [
            "",
            "pi",
            "pi:1",
            "pid:1,2",
            "zn:1,2,3,2.5",
            "pi:nan,1",
            "file:",
        ] {
            assert!(parse_ctl_spec(bad).is_err(), "{bad}");
        }
    }
}
