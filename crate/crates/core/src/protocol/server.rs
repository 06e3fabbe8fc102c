//! Runtime side of the wire protocol, serving any [`Session`] over a pair of
//! byte streams.
//!
//! Used by the built-in test adapter (`cwm adapter --stdio`), which hosts
//! reference games and mutants behind the same protocol a Python runtime
//! speaks.

use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use super::{encode_frame, method, ErrorKind, WireError, WireRequest, WireResponse, MAX_FRAME_BYTES, PROTOCOL_VERSION};
use crate::model::ActionId;
use crate::session::{ResampleRecord, Session, SessionError, SessionInfo, StateHandle};

/// Loads a candidate from its path and optional preamble; `Err` carries
/// the load error message reported to the host.
pub type Loader = dyn Fn(&Path, Option<&str>) -> Result<Box<dyn Session>, String>;

enum Loaded {
    Nothing,
    Failed(String),
    Ready(Box<dyn Session>),
}

/// Answers requests until `shutdown`, end of input or an unreadable frame.
pub fn serve<R: BufRead, W: Write>(mut input: R, mut output: W, loader: &Loader) -> io::Result<()> {
    let mut loaded = Loaded::Nothing;
    let mut last_id = 0u64;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = input
            .by_ref()
            .take(MAX_FRAME_BYTES as u64 + 1)
            .read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        if buf.last() != Some(&b'\n') && n > MAX_FRAME_BYTES {
            let r = WireResponse::failure(None, ErrorKind::ProtocolError, "frame exceeds size limit");
            output.write_all(&encode_frame(&r))?;
            output.flush()?;
            break;
        }
        let line = trim_newline(&buf);
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let request: WireRequest = match serde_json::from_slice(line) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_slice::<Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64));
                let r = WireResponse::failure(id, ErrorKind::ProtocolError, format!("malformed frame: {e}"));
                output.write_all(&encode_frame(&r))?;
                output.flush()?;
                continue;
            }
        };
        let id = Some(request.id);
        let response = if request.id <= last_id {
            WireResponse::failure(
                id,
                ErrorKind::ProtocolError,
                format!("request id {} does not exceed {last_id}", request.id),
            )
        } else {
            last_id = request.id;
            match dispatch(&mut loaded, &request, loader) {
                Ok(result) => WireResponse::success(id, result),
                Err(e) => WireResponse {
                    id,
                    ok: false,
                    result: None,
                    error: Some(e),
                },
            }
        };
        output.write_all(&encode_frame(&response))?;
        output.flush()?;
        if request.method == method::SHUTDOWN {
            break;
        }
    }
    if let Loaded::Ready(s) = &mut loaded {
        s.close();
    }
    Ok(())
}

fn trim_newline(buf: &[u8]) -> &[u8] {
    let mut end = buf.len();
    while end > 0 && (buf[end - 1] == b'\n' || buf[end - 1] == b'\r') {
        end -= 1;
    }
    &buf[..end]
}

fn protocol(message: impl Into<String>) -> WireError {
    WireError {
        kind: ErrorKind::ProtocolError,
        message: message.into(),
    }
}

fn state_param(params: &Map<String, Value>) -> Result<StateHandle, WireError> {
    params
        .get("state")
        .and_then(Value::as_u64)
        .map(StateHandle)
        .ok_or_else(|| protocol("missing or invalid \"state\" parameter"))
}

fn failed_info(message: &str) -> SessionInfo {
    SessionInfo {
        load_ok: false,
        load_error: Some(message.to_string()),
        ..SessionInfo::default()
    }
}

fn dispatch(loaded: &mut Loaded, req: &WireRequest, loader: &Loader) -> Result<Value, WireError> {
    let p = &req.params;
    let m = req.method.as_str();
    if m == method::SHUTDOWN {
        return Ok(Value::Null);
    }
    if m == method::LOAD {
        let version = p.get("protocol_version").and_then(Value::as_u64);
        if version != Some(PROTOCOL_VERSION as u64) {
            return Err(protocol(format!(
                "unsupported protocol_version {version:?}; expected {PROTOCOL_VERSION}"
            )));
        }
        let path = p
            .get("path")
            .and_then(Value::as_str)
            .ok_or_else(|| protocol("missing \"path\" parameter"))?;
        let preamble = p.get("preamble").and_then(Value::as_str);
        if let Loaded::Ready(s) = loaded {
            s.close();
        }
        *loaded = match loader(Path::new(path), preamble) {
            Ok(s) => Loaded::Ready(s),
            Err(msg) => Loaded::Failed(msg),
        };
    }
    let session = match loaded {
        Loaded::Nothing => return Err(protocol("no candidate loaded")),
        Loaded::Failed(msg) => {
            if m == method::LOAD || m == method::INFO {
                return Ok(serde_json::to_value(failed_info(msg)).expect("info serializes"));
            }
            return Err(WireError {
                kind: ErrorKind::LoadError,
                message: msg.clone(),
            });
        }
        Loaded::Ready(s) => s.as_mut(),
    };
    call(session, m, p).map_err(|e| WireError::from(&e))
}

fn call(s: &mut dyn Session, m: &str, p: &Map<String, Value>) -> Result<Value, SessionError> {
    let bad = |msg: &str| SessionError::Protocol(msg.to_string());
    let state = || state_param(p).map_err(|e| SessionError::Protocol(e.message));
    Ok(match m {
        method::LOAD | method::INFO => serde_json::to_value(s.info()?).expect("info serializes"),
        method::INITIAL_STATE => {
            let r = s.initial_state()?;
            json!({"state": r.state.0, "is_map": r.is_map})
        }
        method::APPLY_ACTION => {
            let action = p
                .get("action")
                .and_then(Value::as_str)
                .and_then(|a| ActionId::new(a).ok())
                .ok_or_else(|| bad("missing or invalid \"action\" parameter"))?;
            let r = s.apply_action(state()?, &action)?;
            json!({"state": r.new_state.0, "input_mutated": r.input_mutated})
        }
        method::CURRENT_PLAYER => s.current_player_raw(state()?)?,
        method::LEGAL_ACTIONS => s.legal_actions_raw(state()?)?,
        method::REWARDS => s.rewards_raw(state()?)?,
        method::OBSERVATIONS => s.observations_raw(state()?)?,
        method::PLAYER_NAME => {
            let player = p
                .get("player")
                .and_then(Value::as_i64)
                .ok_or_else(|| bad("missing \"player\" parameter"))?;
            json!(s.player_name(player)?)
        }
        method::FINGERPRINT => json!(s.fingerprint(state()?)?),
        method::RESAMPLE => {
            let records: Vec<ResampleRecord> = p
                .get("records")
                .cloned()
                .and_then(|v| serde_json::from_value(v).ok())
                .ok_or_else(|| bad("missing or invalid \"records\" parameter"))?;
            let player = p
                .get("player")
                .and_then(Value::as_i64)
                .ok_or_else(|| bad("missing \"player\" parameter"))?;
            s.resample(&records, player)?
        }
        other => return Err(SessionError::Unsupported(format!("unknown method {other:?}"))),
    })
}
