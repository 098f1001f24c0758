//! WebSocket frame streaming for remote steering.
//!
//! Inbound text messages are JSON:
//! `{"type":"rotate","dx":..,"dy":..}`,
//! `{"type":"mapping", "map":"size,color", "radius":[..], "nearColor":[..], ...}`
//! (every mapping field optional), and `{"type":"resize","w":..,"h":..}`.
//!
//! Every rendered frame is pushed as one binary message
//! (`u32 frame id | u32 width | u32 height | RGBA8`, little-endian) followed by a
//! text message `{"type":"stats","frameId",..,"frameMs",..,"sortMs",..,"workers",..,"sortRounds",..}`.
//! Malformed input gets `{"type":"error","message":..}` and the connection stays open.
//! Messages that queue up while a frame renders are applied together before
//! the next frame, so rotation floods collapse to the latest camera.

use std::io::{self, ErrorKind};
use std::net::{TcpListener, TcpStream};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tungstenite::{Message, WebSocket};

use super::engine::{Engine, EngineError, FrameStats};
use crate::stylemap::{MappingSpec, Orientation, Rgb, VisualVariables};

/// Largest accepted viewport edge.
pub const MAX_VIEWPORT: u32 = 8192;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("socket error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MapField {
    List(Vec<String>),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MappingPatch {
    pub map: Option<MapField>,
    pub radius: Option<[f64; 2]>,
    pub near_color: Option<Rgb>,
    pub far_color: Option<Rgb>,
    pub value_range: Option<[f64; 2]>,
    pub alpha_range: Option<[f64; 2]>,
    pub orientation: Option<Orientation>,
}

impl MappingPatch {
    /// `base` with the present fields replaced; the result is validated.
    pub fn apply(&self, base: &MappingSpec) -> Result<MappingSpec, String> {
        let mut s = *base;
        if let Some(m) = &self.map {
            let text = match m {
                MapField::List(v) => v.join(","),
                MapField::Text(t) => t.clone(),
            };
            s.enabled = text.parse::<VisualVariables>().map_err(|e| e.to_string())?;
        }
        if let Some(r) = self.radius {
            s.radius_range = r;
        }
        if let Some(c) = self.near_color {
            s.near_color = c;
        }
        if let Some(c) = self.far_color {
            s.far_color = c;
        }
        if let Some(r) = self.value_range {
            s.value_range = r;
        }
        if let Some(r) = self.alpha_range {
            s.alpha_range = r;
        }
        if let Some(o) = self.orientation {
            s.orientation = o;
        }
        s.validate().map_err(|e| e.to_string())?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Inbound {
    Rotate { dx: f64, dy: f64 },
    Mapping(MappingPatch),
    Resize { w: u32, h: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsMessage {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub frame_id: u64,
    pub frame_ms: f64,
    pub sort_ms: f64,
    pub workers: usize,
    pub sort_rounds: u32,
    pub tube_builds: u32,
}

impl From<&FrameStats> for StatsMessage {
    fn from(s: &FrameStats) -> Self {
        StatsMessage {
            kind: "stats",
            frame_id: s.frame_id,
            frame_ms: s.frame_ms,
            sort_ms: s.sort_ms,
            workers: s.workers,
            sort_rounds: s.sort_rounds,
            tube_builds: s.tube_builds,
        }
    }
}

/// Binary frame message: id, width, height, then RGBA8 rows.
pub fn encode_frame(frame_id: u64, engine: &Engine) -> Vec<u8> {
    let tile = engine.frame();
    let mut out = Vec::with_capacity(12 + tile.pixel_count() * 4);
    out.extend_from_slice(&(frame_id as u32).to_le_bytes());
    out.extend_from_slice(&tile.width().to_le_bytes());
    out.extend_from_slice(&tile.height().to_le_bytes());
    out.extend_from_slice(&tile.rgba_bytes());
    out
}

/// Applies one inbound message to the engine state. Returns whether a new frame is needed.
pub fn apply_inbound(engine: &mut Engine, text: &str) -> Result<bool, String> {
    let msg: Inbound = serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))?;
    match msg {
        Inbound::Rotate { dx, dy } => {
            if !(dx.is_finite() && dy.is_finite()) {
                return Err("rotate deltas must be finite".into());
            }
            let cam = engine.camera().trackball_rotate(dx, dy);
            engine.set_camera(cam);
        }
        Inbound::Mapping(patch) => {
            let spec = patch.apply(engine.spec())?;
            engine.set_mapping(spec).map_err(|e| e.to_string())?;
        }
        Inbound::Resize { w, h } => {
            if w == 0 || h == 0 || w > MAX_VIEWPORT || h > MAX_VIEWPORT {
                return Err(format!("viewport {w}x{h} outside 1..={MAX_VIEWPORT}"));
            }
            engine.set_viewport(w, h).map_err(|e| e.to_string())?;
        }
    }
    Ok(true)
}

fn is_would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if io.kind() == ErrorKind::WouldBlock)
}

fn closed(e: &tungstenite::Error) -> bool {
    matches!(
        e,
        tungstenite::Error::ConnectionClosed
            | tungstenite::Error::AlreadyClosed
            | tungstenite::Error::Protocol(_)
    ) || matches!(e, tungstenite::Error::Io(_))
}

struct Session {
    ws: WebSocket<TcpStream>,
}

impl Session {
    fn send_error(&mut self, message: &str) -> tungstenite::Result<()> {
        let body = json!({ "type": "error", "message": message }).to_string();
        self.ws.send(Message::text(body))
    }

    fn push_frame(&mut self, engine: &mut Engine) -> Result<(), ServeError> {
        let stats = engine.render_frame()?;
        let frame = encode_frame(stats.frame_id, engine);
        let body = serde_json::to_string(&StatsMessage::from(&stats)).expect("stats serialize");
        let sent = self
            .ws
            .send(Message::binary(frame))
            .and_then(|_| self.ws.send(Message::text(body)));
        if let Err(e) = sent {
            log::debug!("client went away while sending: {e}");
        }
        Ok(())
    }

    /// Handles one message; `Ok(false)` on close.
    fn handle(&mut self, engine: &mut Engine, msg: Message, dirty: &mut bool) -> tungstenite::Result<bool> {
        match msg {
            Message::Text(t) => match apply_inbound(engine, t.as_str()) {
                Ok(changed) => *dirty |= changed,
                Err(e) => self.send_error(&e)?,
            },
            Message::Binary(_) => self.send_error("binary control messages are not accepted")?,
            Message::Close(_) => return Ok(false),
            _ => {}
        }
        Ok(true)
    }

    fn run(&mut self, engine: &mut Engine) -> Result<(), ServeError> {
        self.push_frame(engine)?;
        loop {
            let first = match self.ws.read() {
                Ok(m) => m,
                Err(e) if closed(&e) => return Ok(()),
                Err(e) => {
                    log::warn!("read failed: {e}");
                    return Ok(());
                }
            };
            let mut dirty = false;
            match self.handle(engine, first, &mut dirty) {
                Ok(true) => {}
                _ => return Ok(()),
            }
            // Drain whatever else is already queued before rendering.
            self.ws.get_mut().set_nonblocking(true)?;
            let drained = loop {
                match self.ws.read() {
                    Ok(m) => match self.handle(engine, m, &mut dirty) {
                        Ok(true) => {}
                        Ok(false) => break false,
                        Err(e) if is_would_block(&e) => break true,
                        Err(_) => break false,
                    },
                    Err(e) if is_would_block(&e) => break true,
                    Err(_) => break false,
                }
            };
            self.ws.get_mut().set_nonblocking(false)?;
            if !drained {
                return Ok(());
            }
            if dirty {
                self.push_frame(engine)?;
            }
        }
    }
}

/// Serves clients one at a time on `listener`, stopping after `max_sessions` if given.
pub fn serve_on(
    listener: &TcpListener,
    engine: &mut Engine,
    max_sessions: Option<usize>,
) -> Result<(), ServeError> {
    let mut served = 0;
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().ok();
        stream.set_nodelay(true)?;
        match tungstenite::accept(stream) {
            Ok(ws) => {
                log::info!("client connected: {peer:?}");
                Session { ws }.run(engine)?;
                log::info!("client disconnected: {peer:?}");
            }
            Err(e) => log::warn!("handshake failed: {e}"),
        }
        served += 1;
        if max_sessions.is_some_and(|m| served >= m) {
            break;
        }
    }
    Ok(())
}

/// Binds `host:port` and serves until the process is stopped or a worker fails.
pub fn serve_frames(host: &str, port: u16, engine: &mut Engine) -> Result<(), ServeError> {
    let listener = TcpListener::bind((host, port))?;
    log::info!("serving frames on ws://{}", listener.local_addr()?);
    serve_on(&listener, engine, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inbound_messages() {
        let m: Inbound = serde_json::from_str(r#"{"type":"rotate","dx":0.5,"dy":-0.1}"#).unwrap();
        assert_eq!(m, Inbound::Rotate { dx: 0.5, dy: -0.1 });
        let m: Inbound =
            serde_json::from_str(r#"{"type":"mapping","map":["size","color"],"orientation":"near-min"}"#)
                .unwrap();
        let Inbound::Mapping(p) = m else { panic!() };
        let s = p.apply(&MappingSpec::default()).unwrap();
        assert!(s.enabled.size && s.enabled.color);
        assert_eq!(s.orientation, Orientation::NearIsMin);
        assert!(serde_json::from_str::<Inbound>(r#"{"type":"zoom"}"#).is_err());
        assert!(serde_json::from_str::<Inbound>(r#"{"type":"mapping","bogus":1}"#).is_err());
    }

    #[test]
    fn patch_rejects_bad_ranges() {
        let p = MappingPatch {
            radius: Some([0.5, 0.1]),
            ..MappingPatch::default()
        };
        assert!(p.apply(&MappingSpec::default()).is_err());
        let p = MappingPatch {
            map: Some(MapField::Text("size,glow".into())),
            ..MappingPatch::default()
        };
        assert!(p.apply(&MappingSpec::default()).is_err());
    }
}
