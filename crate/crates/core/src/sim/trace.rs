//! Sampled experiment records and their CSV form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Uniformly sampled record of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub t0: f64,
    pub dt: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub d: Vec<f64>,
    /// Noise-free output, only available from local simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_clean: Option<Vec<f64>>,
    /// The run was cut short by numerical divergence.
    #[serde(default)]
    pub diverged: bool,
    /// The run was cut short by the scenario's amplitude guard.
    #[serde(default)]
    pub aborted: bool,
}

pub const CSV_HEADER: &str = "t,r,u,x,d,x_clean";

impl Trace {
    pub fn with_capacity(t0: f64, dt: f64, n: usize) -> Trace {
        Trace {
            t0,
            dt,
            r: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            x: Vec::with_capacity(n),
            d: Vec::with_capacity(n),
            x_clean: Some(Vec::with_capacity(n)),
            diverged: false,
            aborted: false,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.len().saturating_sub(1)) as f64
    }

    /// Checks the structural invariants: equal lengths and a positive step.
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.x.len();
        let same = self.r.len() == n && self.u.len() == n && self.d.len() == n;
        let clean_ok = self.x_clean.as_ref().map_or(true, |c| c.len() == n);
        if !same || !clean_ok {
            return Err(SimError::InvalidTrace(
                "signal arrays differ in length".into(),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.t0.is_finite()) {
            return Err(SimError::InvalidTrace(
                "dt must be > 0 and t0 finite".into(),
            ));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        let t0 = round9(self.t0);
        let dt = round9(self.dt);
        for i in 0..self.len() {
            let t = t0 + i as f64 * dt;
            let _ = write!(
                out,
                "{},{},{},{},{},",
                fmt_g9(t),
                fmt_g9(self.r[i]),
                fmt_g9(self.u[i]),
                fmt_g9(self.x[i]),
                fmt_g9(self.d[i])
            );
            if let Some(c) = &self.x_clean {
                out.push_str(&fmt_g9(c[i]));
            }
            out.push('\n');
        }
        out
    }

    /// The trace exactly as `from_csv(to_csv())` would return it, without
    /// building the text. Flags are carried over.
    pub fn quantized(&self) -> Result<Trace, SimError> {
        let n = self.len();
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let all_finite = finite(&self.r)
            && finite(&self.u)
            && finite(&self.x)
            && finite(&self.d)
            && self.x_clean.as_deref().map_or(true, finite);
        if n < 2 || !all_finite {
            let mut t = Trace::from_csv(&self.to_csv())?;
            t.diverged = self.diverged;
            t.aborted = self.aborted;
            return Ok(t);
        }
        let mut buf = String::with_capacity(32);
        let mut q = |v: f64| -> f64 {
            if v == 0.0 {
                return 0.0;
            }
            buf.clear();
            let _ = write!(buf, "{v:.8e}");
            buf.parse().unwrap_or(v)
        };
        let t0 = q(round9(self.t0));
        let t_last = q(t0 + (n - 1) as f64 * round9(self.dt));
        let dt = round9((t_last - t0) / (n - 1) as f64);
        let mut col = |v: &[f64]| v.iter().map(|x| q(*x)).collect::<Vec<f64>>();
        Ok(Trace {
            t0,
            dt,
            r: col(&self.r),
            u: col(&self.u),
            x: col(&self.x),
            d: col(&self.d),
            x_clean: self.x_clean.as_deref().map(&mut col),
            diverged: self.diverged,
            aborted: self.aborted,
        })
    }

    /// Parses the CSV form. Errors name the 1-based line.
    pub fn from_csv(text: &str) -> Result<Trace, SimError> {
        let err = |line: usize, msg: &str| SimError::Csv {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        if header.trim_end_matches('\r') != CSV_HEADER {
            return Err(err(1, "expected header t,r,u,x,d,x_clean"));
        }
        let mut t = Vec::new();
        let mut cols: [Vec<f64>; 4] = Default::default();
        let mut clean: Vec<Option<f64>> = Vec::new();
        let mut line_of: Vec<usize> = Vec::new();
        let mut last_line = 1;
        for (no, raw) in lines {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            last_line = no;
            line_of.push(no);
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(err(
                    no,
                    &format!("expected 6 fields, found {}", fields.len()),
                ));
            }
            let num = |s: &str, name: &str| -> Result<f64, SimError> {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| err(no, &format!("column {name}: not a number: {s:?}")))?;
                if !v.is_finite() {
                    return Err(err(no, &format!("column {name}: non-finite value")));
                }
                Ok(v)
            };
            t.push(num(fields[0], "t")?);
            for (k, name) in ["r", "u", "x", "d"].iter().enumerate() {
                cols[k].push(num(fields[k + 1], name)?);
            }
            clean.push(if fields[5].trim().is_empty() {
                None
            } else {
                Some(num(fields[5], "x_clean")?)
            });
        }
        let n = t.len();
        if n < 2 {
            return Err(err(last_line, "a trace needs at least 2 samples"));
        }
        let t0 = t[0];
        let dt = round9((t[n - 1] - t0) / (n - 1) as f64);
        if !(dt > 0.0) {
            return Err(err(line_of[n - 1], "time must be strictly increasing"));
        }
        for (i, ti) in t.iter().enumerate() {
            let want = t0 + i as f64 * dt;
            let tol = 1e-8 * want.abs().max(ti.abs()) + 1e-6 * dt;
            if (ti - want).abs() > tol {
                return Err(err(line_of[i], "time column is not uniformly spaced"));
            }
        }
        let x_clean = match clean.iter().filter(|c| c.is_some()).count() {
            0 => None,
            k if k == n => Some(clean.into_iter().map(Option::unwrap).collect()),
            _ => {
                let first = clean
                    .iter()
                    .position(|c| c.is_some() != clean[0].is_some())
                    .unwrap();
                return Err(err(
                    line_of[first],
                    "x_clean must be present on all rows or none",
                ));
            }
        };
        let [r, u, x, d] = cols;
        Ok(Trace {
            t0,
            dt,
            r,
            u,
            x,
            d,
            x_clean,
            diverged: false,
            aborted: false,
        })
    }
}

/// Rounds to 9 significant decimal digits.
pub fn round9(v: f64) -> f64 {
    format!("{v:.8e}").parse().unwrap_or(v)
}

/// `%.9g`-style formatting: 9 significant digits, trailing zeros removed,
/// exponent form outside `[1e-5, 1e9)`.
pub fn fmt_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        trim_fraction(&s).to_string()
    } else {
        let mant = trim_fraction(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantized_equals_the_csv_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for case in 0..50 {
            let n = 2 + case * 37;
            let mut tr =
                Trace::with_capacity(rng.random::<f64>() * 3.0, 1e-4 * (1.0 + case as f64), n);
            for i in 0..n {
                let e = rng.random_range(-12..12);
                let v = (rng.random::<f64>() - 0.5) * 10f64.powi(e);
                tr.r.push(if i % 7 == 0 { -0.0 } else { 0.01 });
                tr.u.push(v);
                tr.x.push(v * 1e-3 + 99999.99995 * (i % 3) as f64);
                tr.d.push(9.9999999995e-6);
                tr.x_clean.as_mut().unwrap().push(-v);
            }
            tr.aborted = case % 2 == 0;
            let mut via_csv = Trace::from_csv(&tr.to_csv()).unwrap();
            via_csv.aborted = tr.aborted;
            let q = tr.quantized().unwrap();
            assert_eq!(
                serde_json::to_string(&q).unwrap(),
                serde_json::to_string(&via_csv).unwrap()
            );
        }
    }

    #[test]
    fn g9_matches_printf_conventions() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(1.0), "1");
        assert_eq!(fmt_g9(0.1), "0.1");
        assert_eq!(fmt_g9(-2.5e-7), "-2.5e-07");
        assert_eq!(fmt_g9(123456789.0), "123456789");
        assert_eq!(fmt_g9(1.0e9), "1e+09");
        assert_eq!(fmt_g9(0.000123456789123), "0.000123456789");
        assert_eq!(fmt_g9(1.0 / 3.0), "0.333333333");
    }

    fn sample() -> Trace {
        let mut tr = Trace::with_capacity(0.0, 1e-4, 5);
        for i in 0..5 {
            tr.r.push(0.01);
            tr.u.push(i as f64 * 0.1234567891234);
            tr.x.push((i as f64).sin() * 1e-3);
            tr.d.push(0.0);
            tr.x_clean.as_mut().unwrap().push((i as f64).sin() * 1e-3);
        }
        tr
    }

    #[test]
    fn csv_rewrite_is_byte_identical() {
        let a = sample().to_csv();
        let b = Trace::from_csv(&a).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("t,r,u,x,d,x_clean\n0,0.01,0,0,0,0\n"));
    }

    #[test]
    fn csv_errors_are_line_precise() {
        let mut text = sample().to_csv();
        text = text.replacen("0.01,0.123456789", "0.01,abc", 1);
        match Trace::from_csv(&text) {
            Err(SimError::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let gap = "t,r,u,x,d,x_clean\n0,1,1,1,1,\n0.1,1,1,1,1,\n0.3,1,1,1,1,\n";
        assert!(matches!(
            Trace::from_csv(gap),
            Err(SimError::Csv { line: 3, .. })
        ));
        assert!(matches!(
            Trace::from_csv("t,x\n"),
            Err(SimError::Csv { line: 1, .. })
        ));
    }

    #[test]
    fn missing_x_clean_reads_as_none() {
        let text = "t,r,u,x,d,x_clean\n0,1,0,0,0,\n0.5,1,0,0.5,0,\n";
        let tr = Trace::from_csv(text).unwrap();
        assert!(tr.x_clean.is_none());
        assert_eq!(tr.dt, 0.5);
        assert_eq!(tr.to_csv(), text);
    }
}
