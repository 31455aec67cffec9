//! Newline-delimited JSON protocol for external variation backends.
//!
//! A backend process writes a handshake line on start, then answers one
//! request line with one response line. Pattern payloads are base64 of the
//! canonical P4 bytes.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::genloop::{BackendRequest, BackendResponse, VariationBackend};
use crate::grid::{load_pattern, save_pattern, MaskSetId, MaskSpec, PatternGrid, PbmFormat, Rect};

pub const PROTOCOL: &str = "patternforge-backend";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub version: u32,
    pub name: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: u64,
    pub pattern: String,
    pub mask: Vec<Rect>,
    pub num_variations: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

fn parse_json<T: DeserializeOwned>(line: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(line.trim_end());
    serde_path_to_error::deserialize(de).map_err(|e| Error::Protocol {
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })
}

fn to_line<T: Serialize>(msg: &T) -> Result<String> {
    Ok(serde_json::to_string(msg)?)
}

pub fn encode_pattern(g: &PatternGrid) -> String {
    B64.encode(save_pattern(g, PbmFormat::P4))
}

pub fn decode_pattern(payload: &str, path: &str) -> Result<PatternGrid> {
    let bytes = B64.decode(payload).map_err(|e| Error::Protocol {
        path: path.into(),
        msg: format!("bad base64: {e}"),
    })?;
    load_pattern(&bytes).map_err(|e| Error::Protocol {
        path: path.into(),
        msg: e.to_string(),
    })
}

pub fn encode_handshake(name: &str) -> Result<String> {
    to_line(&Handshake {
        protocol: PROTOCOL.into(),
        version: VERSION,
        name: name.into(),
        extra: Map::new(),
    })
}

pub fn parse_handshake(line: &str) -> Result<Handshake> {
    let h: Handshake = parse_json(line)?;
    if h.protocol != PROTOCOL {
        return Err(Error::Protocol {
            path: "protocol".into(),
            msg: format!("expected {PROTOCOL:?}, got {:?}", h.protocol),
        });
    }
    if h.version != VERSION {
        return Err(Error::Protocol {
            path: "version".into(),
            msg: format!("unsupported version {}", h.version),
        });
    }
    Ok(h)
}

pub fn request_to_wire(req: &BackendRequest) -> Result<WireRequest> {
    if req.mask.rects.is_empty() {
        return Err(Error::InvalidInput("request mask has no rects".into()));
    }
    if req.num_variations == 0 {
        return Err(Error::InvalidInput("request asks for zero variations".into()));
    }
    Ok(WireRequest {
        id: req.id,
        pattern: encode_pattern(&req.pattern),
        mask: req.mask.rects.clone(),
        num_variations: req.num_variations,
        seed: req.seed,
        extra: Map::new(),
    })
}

pub fn encode_request(req: &BackendRequest) -> Result<String> {
    to_line(&request_to_wire(req)?)
}

/// Requests carry only the rect list, so the mask comes back as a custom one.
pub fn parse_request(line: &str) -> Result<BackendRequest> {
    let w: WireRequest = parse_json(line)?;
    let pattern = decode_pattern(&w.pattern, "pattern")?;
    let mask = MaskSpec::new(w.mask, MaskSetId::Custom, 0).map_err(|e| Error::Protocol {
        path: "mask".into(),
        msg: e.to_string(),
    })?;
    mask.check_within(pattern.width(), pattern.height())
        .map_err(|e| Error::Protocol {
            path: "mask".into(),
            msg: e.to_string(),
        })?;
    if w.num_variations == 0 {
        return Err(Error::Protocol {
            path: "num_variations".into(),
            msg: "must be at least 1".into(),
        });
    }
    Ok(BackendRequest {
        id: w.id,
        pattern,
        mask,
        num_variations: w.num_variations,
        seed: w.seed,
    })
}

pub fn encode_response(resp: &BackendResponse) -> Result<String> {
    let wire = match resp {
        BackendResponse::Variations { id, variations } => WireResponse {
            id: *id,
            variations: Some(variations.iter().map(encode_pattern).collect()),
            error: None,
            extra: Map::new(),
        },
        BackendResponse::Error { id, error } => WireResponse {
            id: *id,
            variations: None,
            error: Some(error.clone()),
            extra: Map::new(),
        },
    };
    to_line(&wire)
}

pub fn parse_response(line: &str) -> Result<BackendResponse> {
    let w: WireResponse = parse_json(line)?;
    if let Some(error) = w.error {
        return Ok(BackendResponse::Error { id: w.id, error });
    }
    let payloads = w.variations.ok_or_else(|| Error::Protocol {
        path: "variations".into(),
        msg: "response has neither variations nor error".into(),
    })?;
    let variations = payloads
        .iter()
        .enumerate()
        .map(|(i, p)| decode_pattern(p, &format!("variations[{i}]")))
        .collect::<Result<_>>()?;
    Ok(BackendResponse::Variations { id: w.id, variations })
}

/// One backend subprocess with at most one request in flight.
pub struct BackendSession {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    name: String,
    version: u32,
    next_id: u64,
    failed: bool,
}

impl std::fmt::Debug for BackendSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendSession")
            .field("name", &self.name)
            .field("next_id", &self.next_id)
            .field("failed", &self.failed)
            .finish()
    }
}

impl BackendSession {
    /// Runs `command` through `sh -c` and reads its handshake.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut s = Self {
            child,
            stdin,
            stdout,
            name: String::new(),
            version: 0,
            next_id: 1,
            failed: false,
        };
        let line = s.read_line()?;
        let h = parse_handshake(&line)?;
        s.name = h.name;
        s.version = h.version;
        Ok(s)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn is_failed(&self) -> bool {
        self.failed
    }

    fn read_line(&mut self) -> Result<String> {
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            self.failed = true;
            return Err(Error::Backend("backend closed its output".into()));
        }
        Ok(line)
    }

    /// Sends `req` under a fresh id and returns the variations. Any protocol
    /// problem marks the session failed.
    pub fn request(&mut self, req: &BackendRequest) -> Result<Vec<PatternGrid>> {
        if self.failed {
            return Err(Error::Backend("session already failed".into()));
        }
        let req = BackendRequest {
            id: self.next_id,
            ..req.clone()
        };
        self.next_id += 1;
        let result = (|| {
            let line = encode_request(&req)?;
            writeln!(self.stdin, "{line}")?;
            self.stdin.flush()?;
            let resp = parse_response(&self.read_line()?)?;
            if resp.id() != req.id {
                return Err(Error::Protocol {
                    path: "id".into(),
                    msg: format!("expected {}, got {}", req.id, resp.id()),
                });
            }
            match resp {
                BackendResponse::Variations { variations, .. } => Ok(variations),
                BackendResponse::Error { error, .. } => Err(Error::Backend(error)),
            }
        })();
        if matches!(result, Err(Error::Protocol { .. } | Error::Io(_) | Error::Json(_))) {
            self.failed = true;
        }
        result
    }
}

impl Drop for BackendSession {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Backend served by subprocesses; sessions are pooled so concurrent
/// callers each get their own process.
#[derive(Debug)]
pub struct ExecBackend {
    command: String,
    name: String,
    pool: Mutex<Vec<BackendSession>>,
}

impl ExecBackend {
    pub fn new(command: &str) -> Result<Self> {
        let first = BackendSession::spawn(command)?;
        Ok(Self {
            command: command.into(),
            name: format!("exec:{}", first.name()),
            pool: Mutex::new(vec![first]),
        })
    }
}

impl VariationBackend for ExecBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn vary(&self, req: &BackendRequest) -> Result<Vec<PatternGrid>> {
        let pooled = self.pool.lock().expect("pool lock").pop();
        let mut session = match pooled {
            Some(s) => s,
            None => BackendSession::spawn(&self.command)?,
        };
        let out = session.request(req);
        if !session.is_failed() {
            self.pool.lock().expect("pool lock").push(session);
        }
        out
    }
}

/// Backend side of the protocol: handshake, then one response per request
/// line until end of input. Unparseable requests get an error response.
pub fn serve<R: BufRead, W: Write>(reader: R, mut writer: W, backend: &dyn VariationBackend) -> Result<()> {
    writeln!(writer, "{}", encode_handshake(backend.name())?)?;
    writer.flush()?;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match parse_request(&line) {
            Ok(req) => match backend.vary(&req) {
                Ok(variations) => BackendResponse::Variations { id: req.id, variations },
                Err(e) => BackendResponse::Error {
                    id: req.id,
                    error: e.to_string(),
                },
            },
            Err(e) => {
                let id = serde_json::from_str::<Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64))
                    .unwrap_or(0);
                BackendResponse::Error { id, error: e.to_string() }
            }
        };
        writeln!(writer, "{}", encode_response(&resp)?)?;
        writer.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req() -> BackendRequest {
        let mut g = PatternGrid::new(8, 4, 1).unwrap();
        g.set(1, 2, true);
        BackendRequest {
            id: 3,
            pattern: g,
            mask: MaskSpec::single(Rect { x0: 0, y0: 0, x1: 4, y1: 4 }, MaskSetId::Custom, 0),
            num_variations: 1,
            seed: 42,
        }
    }

    #[test]
    fn request_round_trip_and_rejects() {
        let r = req();
        assert_eq!(parse_request(&encode_request(&r).unwrap()).unwrap(), r);
        let mut bad = r.clone();
        bad.num_variations = 0;
        assert!(encode_request(&bad).is_err());
        bad = r;
        bad.mask.rects.clear();
        assert!(encode_request(&bad).is_err());
    }

    #[test]
    fn error_and_path_reporting() {
        let resp = parse_response(r#"{"id":5,"error":"out of memory","note":1}"#).unwrap();
        assert_eq!(resp, BackendResponse::Error { id: 5, error: "out of memory".into() });
        match parse_response(r#"{"id":5,"variations":[7]}"#) {
            Err(Error::Protocol { path, .. }) => assert_eq!(path, "variations[0]"),
            other => panic!("{other:?}"),
        }
        match parse_response(r#"{"id":5,"variations":["@@"]}"#) {
            Err(Error::Protocol { path, .. }) => assert_eq!(path, "variations[0]"),
            other => panic!("{other:?}"),
        }
        assert!(parse_handshake(r#"{"protocol":"other","version":1,"name":"x"}"#).is_err());
        assert!(parse_handshake(r#"{"protocol":"patternforge-backend","version":2,"name":"x"}"#).is_err());
    }
}
