//! Host side of the wire protocol: candidate runtimes as supervised child
//! processes.
//!
//! Each session owns one child. A reader thread turns the child's stdout
//! into frames; every call waits for its response with a per-call timeout
//! and kills the child on expiry, on a malformed frame or on end of
//! output. Killing closes the child's stdin, waits up to a grace period
//! and then forces termination.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex, Weak};
use std::time::{Duration, Instant};

use serde_json::{json, Map, Value};

use super::{encode_frame, method, WireRequest, WireResponse, MAX_FRAME_BYTES, PROTOCOL_VERSION};
use crate::fingerprint::Fingerprint;
use crate::model::{ActionId, PlayerId};
use crate::session::{
    ApplyResult, ResampleRecord, Session, SessionError, SessionFactory, SessionInfo, StateHandle,
    StateRef,
};

/// Environment variable holding the adapter command line.
pub const ADAPTER_ENV: &str = "CWM_ADAPTER";

pub const DEFAULT_ADAPTER: &str = "cwm-adapter --stdio";

pub const DEFAULT_CALL_TIMEOUT: Duration = Duration::from_secs(5);

pub const KILL_GRACE: Duration = Duration::from_secs(1);

/// The adapter argv: `$CWM_ADAPTER` split on whitespace, or the default.
pub fn default_adapter_command() -> Vec<String> {
    let text = std::env::var(ADAPTER_ENV)
        .ok()
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| DEFAULT_ADAPTER.to_string());
    text.split_whitespace().map(str::to_string).collect()
}

/// Counts live child processes.
#[derive(Debug, Default)]
pub struct LiveGauge {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl LiveGauge {
    pub fn new() -> Arc<Self> {
        Arc::new(LiveGauge::default())
    }

    pub fn current(&self) -> usize {
        self.current.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    fn up(&self) {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
    }

    fn down(&self) {
        self.current.fetch_sub(1, Ordering::SeqCst);
    }
}

enum Frame {
    Line(Vec<u8>),
    Oversized,
    Eof,
}

/// A child process that can be killed from any thread, once.
struct ChildGuard {
    child: Mutex<Option<Child>>,
    stdin: Mutex<Option<ChildStdin>>,
    gauge: Arc<LiveGauge>,
}

impl ChildGuard {
    fn write(&self, bytes: &[u8]) -> std::io::Result<()> {
        let mut stdin = self.stdin.lock().unwrap_or_else(|p| p.into_inner());
        match stdin.as_mut() {
            Some(w) => {
                w.write_all(bytes)?;
                w.flush()
            }
            None => Err(std::io::Error::new(std::io::ErrorKind::BrokenPipe, "child stdin closed")),
        }
    }

    fn kill(&self) {
        let child = self.child.lock().unwrap_or_else(|p| p.into_inner()).take();
        drop(self.stdin.lock().unwrap_or_else(|p| p.into_inner()).take());
        let Some(mut child) = child else { return };
        let deadline = Instant::now() + KILL_GRACE;
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
                _ => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break;
                }
            }
        }
        self.gauge.down();
    }

    fn pid(&self) -> Option<u32> {
        self.child.lock().unwrap_or_else(|p| p.into_inner()).as_ref().map(Child::id)
    }
}

impl Drop for ChildGuard {
    fn drop(&mut self) {
        self.kill();
    }
}

pub struct SubprocessSession {
    guard: Arc<ChildGuard>,
    frames: Receiver<Frame>,
    next_id: u64,
    call_timeout: Duration,
    dead: bool,
    info: SessionInfo,
}

impl SubprocessSession {
    /// Process id of the child while it is alive.
    pub fn pid(&self) -> Option<u32> {
        self.guard.pid()
    }

    fn call(&mut self, m: &str, params: Value) -> Result<Value, SessionError> {
        self.call_with_timeout(m, params, self.call_timeout)
    }

    fn call_with_timeout(&mut self, m: &str, params: Value, timeout: Duration) -> Result<Value, SessionError> {
        if self.dead {
            return Err(SessionError::Dead);
        }
        let id = self.next_id;
        self.next_id += 1;
        let request = WireRequest {
            id,
            method: m.to_string(),
            params: match params {
                Value::Object(map) => map,
                _ => Map::new(),
            },
        };
        if self.guard.write(&encode_frame(&request)).is_err() {
            return Err(self.die(SessionError::Dead));
        }
        match self.frames.recv_timeout(timeout) {
            Ok(Frame::Line(line)) => match serde_json::from_slice::<WireResponse>(&line) {
                Ok(resp) if resp.id == Some(id) => resp.into_result(),
                Ok(resp) => Err(self.die(SessionError::Protocol(format!(
                    "response id {:?} does not match request id {id}",
                    resp.id
                )))),
                Err(e) => Err(self.die(SessionError::Protocol(format!("malformed frame: {e}")))),
            },
            Ok(Frame::Oversized) => Err(self.die(SessionError::Protocol(format!(
                "frame exceeds {MAX_FRAME_BYTES} bytes"
            )))),
            Ok(Frame::Eof) | Err(RecvTimeoutError::Disconnected) => Err(self.die(SessionError::Dead)),
            Err(RecvTimeoutError::Timeout) => Err(self.die(SessionError::Timeout(format!(
                "{m} did not answer within {timeout:?}"
            )))),
        }
    }

    fn die(&mut self, e: SessionError) -> SessionError {
        self.dead = true;
        self.guard.kill();
        e
    }

    fn state_call(&mut self, m: &str, state: StateHandle) -> Result<Value, SessionError> {
        self.call(m, json!({"state": state.0}))
    }
}

fn shape(what: &str, v: &Value) -> SessionError {
    SessionError::Protocol(format!("unexpected {what} result: {v}"))
}

fn handle_of(v: &Value, what: &str) -> Result<StateHandle, SessionError> {
    v.get("state").and_then(Value::as_u64).map(StateHandle).ok_or_else(|| shape(what, v))
}

impl Session for SubprocessSession {
    fn info(&mut self) -> Result<SessionInfo, SessionError> {
        Ok(self.info.clone())
    }

    fn initial_state(&mut self) -> Result<StateRef, SessionError> {
        let v = self.call(method::INITIAL_STATE, json!({}))?;
        Ok(StateRef {
            state: handle_of(&v, "initial_state")?,
            is_map: v.get("is_map").and_then(Value::as_bool).ok_or_else(|| shape("initial_state", &v))?,
        })
    }

    fn apply_action(&mut self, state: StateHandle, action: &ActionId) -> Result<ApplyResult, SessionError> {
        let v = self.call(method::APPLY_ACTION, json!({"state": state.0, "action": action}))?;
        Ok(ApplyResult {
            new_state: handle_of(&v, "apply_action")?,
            input_mutated: v
                .get("input_mutated")
                .and_then(Value::as_bool)
                .ok_or_else(|| shape("apply_action", &v))?,
        })
    }

    fn current_player_raw(&mut self, state: StateHandle) -> Result<Value, SessionError> {
        self.state_call(method::CURRENT_PLAYER, state)
    }

    fn legal_actions_raw(&mut self, state: StateHandle) -> Result<Value, SessionError> {
        self.state_call(method::LEGAL_ACTIONS, state)
    }

    fn rewards_raw(&mut self, state: StateHandle) -> Result<Value, SessionError> {
        self.state_call(method::REWARDS, state)
    }

    fn observations_raw(&mut self, state: StateHandle) -> Result<Value, SessionError> {
        self.state_call(method::OBSERVATIONS, state)
    }

    fn player_name(&mut self, player: PlayerId) -> Result<String, SessionError> {
        let v = self.call(method::PLAYER_NAME, json!({"player": player}))?;
        v.as_str().map(str::to_string).ok_or_else(|| SessionError::Shape(format!("player_name returned {v}")))
    }

    fn fingerprint(&mut self, state: StateHandle) -> Result<Fingerprint, SessionError> {
        let v = self.state_call(method::FINGERPRINT, state)?;
        serde_json::from_value(v.clone()).map_err(|_| shape("fingerprint", &v))
    }

    fn resample(&mut self, records: &[ResampleRecord], player: PlayerId) -> Result<Value, SessionError> {
        self.call(method::RESAMPLE, json!({"records": records, "player": player}))
    }

    fn close(&mut self) {
        if !self.dead {
            let _ = self.call_with_timeout(method::SHUTDOWN, json!({}), KILL_GRACE);
            self.dead = true;
        }
        self.guard.kill();
    }
}

impl Drop for SubprocessSession {
    fn drop(&mut self) {
        self.guard.kill();
    }
}

fn reader_thread<R: Read + Send + 'static>(out: R, tx: mpsc::Sender<Frame>) {
    std::thread::spawn(move || {
        let mut reader = BufReader::new(out);
        loop {
            let mut buf = Vec::new();
            let n = reader
                .by_ref()
                .take(MAX_FRAME_BYTES as u64 + 1)
                .read_until(b'\n', &mut buf)
                .unwrap_or_default();
            if n == 0 {
                let _ = tx.send(Frame::Eof);
                return;
            }
            if buf.last() != Some(&b'\n') && n > MAX_FRAME_BYTES {
                let _ = tx.send(Frame::Oversized);
                return;
            }
            while matches!(buf.last(), Some(b'\n') | Some(b'\r')) {
                buf.pop();
            }
            if buf.is_empty() {
                continue;
            }
            if tx.send(Frame::Line(buf)).is_err() {
                return;
            }
        }
    });
}

/// Opens sessions by spawning `command` and loading `candidate` into it.
pub struct SubprocessFactory {
    command: Vec<String>,
    candidate: PathBuf,
    preamble: Option<String>,
    call_timeout: Duration,
    gauge: Arc<LiveGauge>,
    live: Mutex<Vec<Weak<ChildGuard>>>,
}

impl SubprocessFactory {
    pub fn new(command: Vec<String>, candidate: impl Into<PathBuf>) -> Self {
        SubprocessFactory {
            command,
            candidate: candidate.into(),
            preamble: Some(super::DEFAULT_PREAMBLE.to_string()),
            call_timeout: DEFAULT_CALL_TIMEOUT,
            gauge: LiveGauge::new(),
            live: Mutex::new(Vec::new()),
        }
    }

    pub fn with_preamble(mut self, preamble: Option<String>) -> Self {
        self.preamble = preamble;
        self
    }

    pub fn with_call_timeout(mut self, timeout: Duration) -> Self {
        self.call_timeout = timeout;
        self
    }

    /// Shares a gauge across factories, e.g. all requests of one service.
    pub fn with_gauge(mut self, gauge: Arc<LiveGauge>) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn gauge(&self) -> &Arc<LiveGauge> {
        &self.gauge
    }

    pub fn candidate(&self) -> &Path {
        &self.candidate
    }

    pub fn spawn(&self) -> Result<SubprocessSession, crate::Error> {
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| crate::Error::Spawn("empty adapter command".to_string()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| crate::Error::Spawn(format!("{}: {e}", self.command.join(" "))))?;
        self.gauge.up();
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let guard = Arc::new(ChildGuard {
            child: Mutex::new(Some(child)),
            stdin: Mutex::new(stdin),
            gauge: Arc::clone(&self.gauge),
        });
        {
            let mut live = self.live.lock().unwrap_or_else(|p| p.into_inner());
            live.retain(|w| w.strong_count() > 0);
            live.push(Arc::downgrade(&guard));
        }
        let (tx, rx) = mpsc::channel();
        reader_thread(stdout, tx);
        let mut session = SubprocessSession {
            guard,
            frames: rx,
            next_id: 1,
            call_timeout: self.call_timeout,
            dead: false,
            info: SessionInfo::default(),
        };
        let mut params = json!({
            "path": self.candidate.to_string_lossy(),
            "protocol_version": PROTOCOL_VERSION,
        });
        if let Some(p) = &self.preamble {
            params["preamble"] = json!(p);
        }
        session.info = match session.call(method::LOAD, params) {
            Ok(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| SessionInfo {
                load_ok: false,
                load_error: Some(format!("malformed load response: {e}")),
                api_present: BTreeMap::new(),
                resample_source: None,
            }),
            Err(e) => SessionInfo {
                load_ok: false,
                load_error: Some(match e {
                    SessionError::Load(m) => m,
                    other => format!("handshake failed: {other}"),
                }),
                ..SessionInfo::default()
            },
        };
        Ok(session)
    }
}

impl SessionFactory for SubprocessFactory {
    fn open(&self) -> Result<Box<dyn Session>, crate::Error> {
        Ok(Box::new(self.spawn()?))
    }

    fn describe(&self) -> String {
        format!("{} {}", self.command.join(" "), self.candidate.display())
    }

    fn abort(&self) {
        let live: Vec<_> = self
            .live
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .drain(..)
            .filter_map(|w| w.upgrade())
            .collect();
        for guard in live {
            guard.kill();
        }
    }
}
