//! Newline-delimited JSON protocol for driving a plant across a TCP
//! connection, with a single-session server and a [`PlantSession`] client.
//!
//! A session is `hello` / `hello`, then any number of `run` requests (each
//! answered by `chunk` frames of up to [`CHUNK_LEN`] samples and a `done`) or
//! `reset` requests (answered by `reset`). Malformed input is answered with
//! `{"err":"bad_frame"}` and the connection is closed; a second client while
//! a session is active gets `{"err":"busy"}`.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::TransferFunction;
use crate::sim::{make_session, PlantSession, PlantSpec, ScenarioSpec, SessionError, Trace};

pub const PROTOCOL_SCHEMA: u64 = 1;
pub const CHUNK_LEN: usize = 1024;
/// Longest accepted frame in bytes, newline excluded.
pub const MAX_FRAME: usize = 1 << 24;

pub const ERR_BAD_FRAME: &str = "bad_frame";
pub const ERR_BUSY: &str = "busy";

const ACCEPT_POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Frame {
    Hello {
        schema: u64,
    },
    Run {
        controller: TransferFunction,
        scenario: ScenarioSpec,
    },
    Chunk {
        t0: f64,
        dt: f64,
        r: Vec<f64>,
        u: Vec<f64>,
        x: Vec<f64>,
        d: Vec<f64>,
    },
    Done {
        diverged: bool,
        aborted: bool,
    },
    Reset {},
    Err(String),
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("frame exceeds {MAX_FRAME} bytes")]
    Oversize,
    #[error("bad frame: {0}")]
    BadFrame(String),
}

impl From<WireError> for SessionError {
    fn from(e: WireError) -> Self {
        match e {
            WireError::Io(e) => SessionError::Transport(e.to_string()),
            other => SessionError::Protocol(other.to_string()),
        }
    }
}

/// One frame as a single JSON line, newline included.
pub fn encode(frame: &Frame) -> String {
    let mut s = serde_json::to_string(frame).expect("frames serialize");
    s.push('\n');
    s
}

pub fn decode(line: &str) -> Result<Frame, WireError> {
    serde_json::from_str(line.trim_end_matches(['\n', '\r']))
        .map_err(|e| WireError::BadFrame(e.to_string()))
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: BufRead>(r: &mut R) -> Result<Option<Frame>, WireError> {
    let mut buf = Vec::new();
    let n = r.take(MAX_FRAME as u64 + 1).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        return Err(if buf.len() > MAX_FRAME {
            WireError::Oversize
        } else {
            WireError::BadFrame("unterminated frame".into())
        });
    }
    let text = std::str::from_utf8(&buf).map_err(|e| WireError::BadFrame(e.to_string()))?;
    decode(text).map(Some)
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), WireError> {
    w.write_all(encode(frame).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Splits a trace into `chunk` frames followed by `done`.
pub fn trace_frames(trace: &Trace) -> Vec<Frame> {
    let n = trace.len();
    let mut out: Vec<Frame> = (0..n)
        .step_by(CHUNK_LEN)
        .map(|i| {
            let j = (i + CHUNK_LEN).min(n);
            Frame::Chunk {
                t0: trace.time(i),
                dt: trace.dt,
                r: trace.r[i..j].to_vec(),
                u: trace.u[i..j].to_vec(),
                x: trace.x[i..j].to_vec(),
                d: trace.d[i..j].to_vec(),
            }
        })
        .collect();
    out.push(Frame::Done {
        diverged: trace.diverged,
        aborted: trace.aborted,
    });
    out
}

/// Reassembles `chunk` frames; the noiseless output never crosses the wire.
#[derive(Debug, Default)]
pub struct TraceAssembler {
    trace: Option<Trace>,
}

impl TraceAssembler {
    pub fn push(&mut self, frame: Frame) -> Result<Option<Trace>, WireError> {
        match frame {
            Frame::Chunk { t0, dt, r, u, x, d } => {
                let m = x.len();
                if m == 0 || r.len() != m || u.len() != m || d.len() != m {
                    return Err(WireError::BadFrame("chunk arrays differ in length".into()));
                }
                let tr = self
                    .trace
                    .get_or_insert_with(|| Trace::with_capacity(t0, dt, m));
                if tr.dt != dt {
                    return Err(WireError::BadFrame("chunk dt changed mid-trace".into()));
                }
                tr.r.extend(r);
                tr.u.extend(u);
                tr.x.extend(x);
                tr.d.extend(d);
                Ok(None)
            }
            Frame::Done { diverged, aborted } => {
                let mut tr = self
                    .trace
                    .take()
                    .ok_or_else(|| WireError::BadFrame("done without chunks".into()))?;
                tr.x_clean = None;
                tr.diverged = diverged;
                tr.aborted = aborted;
                tr.validate()
                    .map_err(|e| WireError::BadFrame(e.to_string()))?;
                Ok(Some(tr))
            }
            other => Err(WireError::BadFrame(format!(
                "unexpected {}",
                frame_name(&other)
            ))),
        }
    }
}

fn frame_name(f: &Frame) -> &'static str {
    match f {
        Frame::Hello { .. } => "hello",
        Frame::Run { .. } => "run",
        Frame::Chunk { .. } => "chunk",
        Frame::Done { .. } => "done",
        Frame::Reset {} => "reset",
        Frame::Err(_) => "err",
    }
}

/// Drives one client connection against a fresh session on `plant`.
pub fn handle_connection(stream: TcpStream, plant: &PlantSpec) -> Result<(), WireError> {
    let mut w = stream.try_clone()?;
    let mut r = BufReader::new(stream);
    let mut session = match make_session(plant.clone()) {
        Ok(s) => s,
        Err(e) => return write_frame(&mut w, &Frame::Err(e.to_string())),
    };
    let mut greeted = false;
    loop {
        let frame = match read_frame(&mut r) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(WireError::Io(e)) => return Err(WireError::Io(e)),
            Err(_) => return write_frame(&mut w, &Frame::Err(ERR_BAD_FRAME.into())),
        };
        match frame {
            Frame::Hello { schema } if !greeted && schema == PROTOCOL_SCHEMA => {
                greeted = true;
                write_frame(&mut w, &Frame::Hello { schema })?;
            }
            Frame::Run {
                controller,
                scenario,
            } if greeted => match session.run(&controller, &scenario) {
                Ok(trace) => {
                    let mut out = io::BufWriter::new(&mut w);
                    for f in trace_frames(&trace) {
                        out.write_all(encode(&f).as_bytes())?;
                    }
                    out.flush()?;
                }
                Err(e) => write_frame(&mut w, &Frame::Err(e.to_string()))?,
            },
            Frame::Reset {} if greeted => {
                session.reset().ok();
                write_frame(&mut w, &Frame::Reset {})?;
            }
            _ => return write_frame(&mut w, &Frame::Err(ERR_BAD_FRAME.into())),
        }
    }
}

struct BusyGuard(Arc<AtomicBool>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

/// Accepts connections one session at a time. Returns after `max_sessions`
/// sessions have completed, or never when `None`. Clients arriving while a
/// session is active, including the last one, are told `busy`.
pub fn serve(
    listener: TcpListener,
    plant: PlantSpec,
    max_sessions: Option<usize>,
) -> io::Result<()> {
    plant
        .validate()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    listener.set_nonblocking(true)?;
    let busy = Arc::new(AtomicBool::new(false));
    let mut served = 0usize;
    let mut workers: Vec<thread::JoinHandle<()>> = Vec::new();
    loop {
        let done = max_sessions.is_some_and(|m| served >= m);
        if done && !busy.load(Ordering::SeqCst) {
            break;
        }
        let mut stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                thread::sleep(ACCEPT_POLL);
                continue;
            }
            Err(_) => continue,
        };
        stream.set_nonblocking(false)?;
        if done || busy.swap(true, Ordering::SeqCst) {
            let _ = write_frame(&mut stream, &Frame::Err(ERR_BUSY.into()));
            continue;
        }
        let guard = BusyGuard(busy.clone());
        let plant = plant.clone();
        workers.push(thread::spawn(move || {
            let _guard = guard;
            let _ = stream.set_nodelay(true);
            let _ = handle_connection(stream, &plant);
        }));
        served += 1;
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}

/// Client side of the protocol.
pub struct RemoteSession {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl RemoteSession {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<RemoteSession, SessionError> {
        let stream =
            TcpStream::connect(addr).map_err(|e| SessionError::Transport(e.to_string()))?;
        let _ = stream.set_nodelay(true);
        let writer = stream
            .try_clone()
            .map_err(|e| SessionError::Transport(e.to_string()))?;
        let mut s = RemoteSession {
            reader: BufReader::new(stream),
            writer,
        };
        write_frame(
            &mut s.writer,
            &Frame::Hello {
                schema: PROTOCOL_SCHEMA,
            },
        )?;
        match s.next()? {
            Frame::Hello { schema } if schema == PROTOCOL_SCHEMA => Ok(s),
            Frame::Hello { schema } => Err(SessionError::Protocol(format!(
                "server speaks schema {schema}"
            ))),
            Frame::Err(msg) => Err(SessionError::Remote(msg)),
            other => Err(SessionError::Protocol(format!(
                "expected hello, got {}",
                frame_name(&other)
            ))),
        }
    }

    /// Like [`RemoteSession::connect`], retrying while the server reports
    /// busy (a previous session may still be winding down).
    pub fn connect_retry(
        addr: impl ToSocketAddrs + Clone,
        attempts: usize,
        wait: Duration,
    ) -> Result<RemoteSession, SessionError> {
        let mut last = SessionError::Remote(ERR_BUSY.into());
        for _ in 0..attempts.max(1) {
            match RemoteSession::connect(addr.clone()) {
                Err(SessionError::Remote(m)) if m == ERR_BUSY => {
                    last = SessionError::Remote(m);
                    thread::sleep(wait);
                }
                other => return other,
            }
        }
        Err(last)
    }

    fn next(&mut self) -> Result<Frame, SessionError> {
        read_frame(&mut self.reader)?
            .ok_or_else(|| SessionError::Transport("connection closed by server".into()))
    }
}

impl PlantSession for RemoteSession {
    fn run(
        &mut self,
        controller: &TransferFunction,
        scenario: &ScenarioSpec,
    ) -> Result<Trace, SessionError> {
        write_frame(
            &mut self.writer,
            &Frame::Run {
                controller: controller.clone(),
                scenario: scenario.clone(),
            },
        )?;
        let mut asm = TraceAssembler::default();
        loop {
            match self.next()? {
                Frame::Err(msg) => return Err(SessionError::Remote(msg)),
                f => {
                    if let Some(tr) = asm.push(f)? {
                        return Ok(tr);
                    }
                }
            }
        }
    }

    fn reset(&mut self) -> Result<(), SessionError> {
        write_frame(&mut self.writer, &Frame::Reset {})?;
        match self.next()? {
            Frame::Reset {} => Ok(()),
            Frame::Err(msg) => Err(SessionError::Remote(msg)),
            other => Err(SessionError::Protocol(format!(
                "expected reset, got {}",
                frame_name(&other)
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_use_the_documented_shapes() {
        assert_eq!(encode(&Frame::Err("busy".into())), "{\"err\":\"busy\"}\n");
        assert_eq!(encode(&Frame::Reset {}), "{\"reset\":{}}\n");
        assert_eq!(
            encode(&Frame::Hello { schema: 1 }),
            "{\"hello\":{\"schema\":1}}\n"
        );
        let f = decode(r#"{"done":{"diverged":false,"aborted":true}}"#).unwrap();
        assert_eq!(
            f,
            Frame::Done {
                diverged: false,
                aborted: true
            }
        );
        assert!(decode(r#"{"hello":{"schema":1,"x":2}}"#).is_err());
        assert!(decode("[]").is_err());
    }

    #[test]
    fn chunking_round_trip_drops_only_x_clean() {
        let n = 2 * CHUNK_LEN + 5;
        let mut t = Trace::with_capacity(0.5, 1e-4, n);
        for i in 0..n {
            let v = i as f64 * 0.1;
            t.r.push(1.0);
            t.u.push(v.sin());
            t.x.push(v.cos() / 3.0);
            t.d.push(0.0);
        }
        t.x_clean = Some(t.x.clone());
        t.aborted = true;
        let frames = trace_frames(&t);
        assert_eq!(frames.len(), 4);
        let mut asm = TraceAssembler::default();
        let mut out = None;
        for f in frames {
            let line = encode(&f);
            out = asm.push(decode(&line).unwrap()).unwrap();
        }
        let out = out.unwrap();
        assert_eq!(out.x, t.x);
        assert_eq!(out.u, t.u);
        assert_eq!((out.t0, out.dt, out.aborted), (0.5, 1e-4, true));
        assert!(out.x_clean.is_none());
    }

    #[test]
    fn oversize_and_unterminated_frames() {
        let mut r = io::Cursor::new(b"{\"reset\":{}}".to_vec());
        assert!(matches!(read_frame(&mut r), Err(WireError::BadFrame(_))));
        let mut big = vec![b' '; MAX_FRAME + 10];
        big.push(b'\n');
        assert!(matches!(
            read_frame(&mut io::Cursor::new(big)),
            Err(WireError::Oversize)
        ));
        assert!(read_frame(&mut io::Cursor::new(Vec::new()))
            .unwrap()
            .is_none());
    }
}
