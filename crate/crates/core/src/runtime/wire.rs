//! Binary framing for master/worker control messages.
//!
//! Every message is `u32 length | u8 kind | payload`, where `length` counts the
//! kind byte plus payload. All multi-byte integers and floats are little-endian.
//!
//! | kind | message            | payload |
//! |------|--------------------|---------|
//! | 1    | CameraSync         | position, focal, up (9 x f64), fov f64, width u32, height u32 |
//! | 2    | MappingUpdate      | enabled bits u8, orientation u8, radius 2xf64, near 3xf64, far 3xf64, value 2xf64, alpha 2xf64 |
//! | 3    | RenderFrame        | frame id u64 |
//! | 4    | TileUpload         | worker u16, tube builds u32, width u32, height u32, background 4xu8, RGBA8 pixels, f32 depths, u16 provenance |
//! | 5    | DepthCellsUpload   | worker u16, pass u8, count u32, count x (depth f64, id u32) |
//! | 6    | HashIndexBroadcast | pass u8, count u32, count x rank u32 |
//! | 7    | Shutdown           | empty |

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::camera::Camera;
use crate::math::Vec3;
use crate::ranksort::DepthCell;
use crate::raster::FrameTile;
use crate::stylemap::{MappingSpec, Orientation, VisualVariables};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("message truncated: needed {needed} bytes, had {had}")]
    Truncated { needed: usize, had: usize },
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
    #[error("{kind} payload has {got} bytes, expected {expected}")]
    BadLength {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid {0} payload: {1}")]
    Invalid(&'static str, String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    CameraSync = 1,
    MappingUpdate = 2,
    RenderFrame = 3,
    TileUpload = 4,
    DepthCellsUpload = 5,
    HashIndexBroadcast = 6,
    Shutdown = 7,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlMessage {
    CameraSync(Camera),
    MappingUpdate(MappingSpec),
    RenderFrame {
        frame_id: u64,
    },
    TileUpload {
        worker_id: u16,
        tube_builds: u32,
        tile: FrameTile,
    },
    DepthCellsUpload {
        worker_id: u16,
        pass: u8,
        cells: Vec<DepthCell>,
    },
    HashIndexBroadcast {
        pass: u8,
        ranks: Vec<u32>,
    },
    Shutdown,
}

impl ControlMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            ControlMessage::CameraSync(_) => MessageKind::CameraSync,
            ControlMessage::MappingUpdate(_) => MessageKind::MappingUpdate,
            ControlMessage::RenderFrame { .. } => MessageKind::RenderFrame,
            ControlMessage::TileUpload { .. } => MessageKind::TileUpload,
            ControlMessage::DepthCellsUpload { .. } => MessageKind::DepthCellsUpload,
            ControlMessage::HashIndexBroadcast { .. } => MessageKind::HashIndexBroadcast,
            ControlMessage::Shutdown => MessageKind::Shutdown,
        }
    }

    /// Encodes the full frame including the length prefix.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = start_frame(self.kind(), 0);
        match self {
            ControlMessage::CameraSync(cam) => {
                for v in [cam.position(), cam.focal(), cam.up()] {
                    put_vec3(&mut buf, v);
                }
                put_f64(&mut buf, cam.fov_y_deg());
                let (w, h) = cam.viewport();
                buf.extend_from_slice(&w.to_le_bytes());
                buf.extend_from_slice(&h.to_le_bytes());
            }
            ControlMessage::MappingUpdate(spec) => {
                buf.push(spec.enabled.to_bits());
                buf.push(match spec.orientation {
                    Orientation::NearIsMax => 0,
                    Orientation::NearIsMin => 1,
                });
                for v in spec.radius_range {
                    put_f64(&mut buf, v);
                }
                for v in spec.near_color.iter().chain(&spec.far_color) {
                    put_f64(&mut buf, *v);
                }
                for v in spec.value_range.iter().chain(&spec.alpha_range) {
                    put_f64(&mut buf, *v);
                }
            }
            ControlMessage::RenderFrame { frame_id } => buf.extend_from_slice(&frame_id.to_le_bytes()),
            ControlMessage::TileUpload {
                worker_id,
                tube_builds,
                tile,
            } => put_tile_upload(&mut buf, *worker_id, *tube_builds, tile),
            ControlMessage::DepthCellsUpload {
                worker_id,
                pass,
                cells,
            } => put_depth_cells(&mut buf, *worker_id, *pass, cells),
            ControlMessage::HashIndexBroadcast { pass, ranks } => put_hash_index(&mut buf, *pass, ranks),
            ControlMessage::Shutdown => {}
        }
        finish_frame(buf)
    }

    /// Decodes one complete frame (length prefix included).
    pub fn decode(frame: &[u8]) -> Result<Self, WireError> {
        let mut r = Cursor::new(frame);
        let len = r.u32()? as usize;
        if frame.len() - 4 != len {
            return Err(WireError::BadLength {
                kind: "frame",
                expected: len + 4,
                got: frame.len(),
            });
        }
        let kind = r.u8()?;
        let body = &frame[5..];
        let mut r = Cursor::new(body);
        let msg = match kind {
            1 => {
                expect_len("CameraSync", body, 88)?;
                let pos = r.vec3()?;
                let focal = r.vec3()?;
                let up = r.vec3()?;
                let fov = r.f64()?;
                let (w, h) = (r.u32()?, r.u32()?);
                let cam = Camera::from_synced(pos, focal, up, fov, w, h)
                    .map_err(|e| WireError::Invalid("CameraSync", e.to_string()))?;
                ControlMessage::CameraSync(cam)
            }
            2 => {
                expect_len("MappingUpdate", body, 2 + 12 * 8)?;
                let enabled = VisualVariables::from_bits(r.u8()?);
                let orientation = match r.u8()? {
                    0 => Orientation::NearIsMax,
                    1 => Orientation::NearIsMin,
                    o => return Err(WireError::Invalid("MappingUpdate", format!("orientation {o}"))),
                };
                let radius_range = [r.f64()?, r.f64()?];
                let near_color = [r.f64()?, r.f64()?, r.f64()?];
                let far_color = [r.f64()?, r.f64()?, r.f64()?];
                let value_range = [r.f64()?, r.f64()?];
                let alpha_range = [r.f64()?, r.f64()?];
                let spec = MappingSpec {
                    enabled,
                    radius_range,
                    near_color,
                    far_color,
                    value_range,
                    alpha_range,
                    orientation,
                };
                spec.validate()
                    .map_err(|e| WireError::Invalid("MappingUpdate", e.to_string()))?;
                ControlMessage::MappingUpdate(spec)
            }
            3 => {
                expect_len("RenderFrame", body, 8)?;
                ControlMessage::RenderFrame { frame_id: r.u64()? }
            }
            4 => {
                let worker_id = r.u16()?;
                let tube_builds = r.u32()?;
                let (w, h) = (r.u32()?, r.u32()?);
                let bg = r.take(4)?;
                let background = [bg[0], bg[1], bg[2], bg[3]];
                let n = w as usize * h as usize;
                expect_len("TileUpload", body, 18 + n * 10)?;
                let color = r.take(n * 4)?.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
                let depth = r
                    .take(n * 4)?
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                let provenance = r
                    .take(n * 2)?
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect();
                let tile = FrameTile::from_parts(w, h, background, color, depth, provenance)
                    .ok_or_else(|| WireError::Invalid("TileUpload", "buffer size".into()))?;
                ControlMessage::TileUpload {
                    worker_id,
                    tube_builds,
                    tile,
                }
            }
            5 => {
                let worker_id = r.u16()?;
                let pass = r.u8()?;
                let count = r.u32()? as usize;
                expect_len("DepthCellsUpload", body, 7 + count * 12)?;
                let cells = r
                    .take(count * 12)?
                    .chunks_exact(12)
                    .map(|c| DepthCell {
                        vd: f64::from_le_bytes(c[..8].try_into().unwrap()),
                        id: u32::from_le_bytes(c[8..].try_into().unwrap()),
                    })
                    .collect();
                ControlMessage::DepthCellsUpload {
                    worker_id,
                    pass,
                    cells,
                }
            }
            6 => {
                let pass = r.u8()?;
                let count = r.u32()? as usize;
                expect_len("HashIndexBroadcast", body, 5 + count * 4)?;
                let ranks = r
                    .take(count * 4)?
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                ControlMessage::HashIndexBroadcast { pass, ranks }
            }
            7 => {
                expect_len("Shutdown", body, 0)?;
                ControlMessage::Shutdown
            }
            k => return Err(WireError::UnknownKind(k)),
        };
        Ok(msg)
    }
}

fn start_frame(kind: MessageKind, capacity: usize) -> Vec<u8> {
    let mut buf = Vec::with_capacity(5 + capacity);
    buf.extend_from_slice(&[0; 4]);
    buf.push(kind as u8);
    buf
}

fn finish_frame(mut buf: Vec<u8>) -> Vec<u8> {
    let len = (buf.len() - 4) as u32;
    buf[..4].copy_from_slice(&len.to_le_bytes());
    buf
}

fn put_tile_upload(buf: &mut Vec<u8>, worker_id: u16, tube_builds: u32, tile: &FrameTile) {
    let n = tile.pixel_count();
    buf.reserve(18 + n * 10);
    buf.extend_from_slice(&worker_id.to_le_bytes());
    buf.extend_from_slice(&tube_builds.to_le_bytes());
    buf.extend_from_slice(&tile.width().to_le_bytes());
    buf.extend_from_slice(&tile.height().to_le_bytes());
    buf.extend_from_slice(&tile.background());
    buf.extend(tile.color.iter().flatten());
    buf.extend(tile.depth.iter().flat_map(|d| d.to_le_bytes()));
    buf.extend(tile.provenance.iter().flat_map(|p| p.to_le_bytes()));
}

fn put_depth_cells(buf: &mut Vec<u8>, worker_id: u16, pass: u8, cells: &[DepthCell]) {
    buf.reserve(7 + cells.len() * 12);
    buf.extend_from_slice(&worker_id.to_le_bytes());
    buf.push(pass);
    buf.extend_from_slice(&(cells.len() as u32).to_le_bytes());
    for c in cells {
        buf.extend_from_slice(&c.vd.to_le_bytes());
        buf.extend_from_slice(&c.id.to_le_bytes());
    }
}

fn put_hash_index(buf: &mut Vec<u8>, pass: u8, ranks: &[u32]) {
    buf.reserve(5 + ranks.len() * 4);
    buf.push(pass);
    buf.extend_from_slice(&(ranks.len() as u32).to_le_bytes());
    buf.extend(ranks.iter().flat_map(|r| r.to_le_bytes()));
}

/// Frames a tile upload without taking ownership of the tile.
pub fn encode_tile_upload(worker_id: u16, tube_builds: u32, tile: &FrameTile) -> Vec<u8> {
    let mut buf = start_frame(MessageKind::TileUpload, 18 + tile.pixel_count() * 10);
    put_tile_upload(&mut buf, worker_id, tube_builds, tile);
    finish_frame(buf)
}

pub fn encode_depth_cells(worker_id: u16, pass: u8, cells: &[DepthCell]) -> Vec<u8> {
    let mut buf = start_frame(MessageKind::DepthCellsUpload, 7 + cells.len() * 12);
    put_depth_cells(&mut buf, worker_id, pass, cells);
    finish_frame(buf)
}

pub fn encode_hash_index(pass: u8, ranks: &[u32]) -> Vec<u8> {
    let mut buf = start_frame(MessageKind::HashIndexBroadcast, 5 + ranks.len() * 4);
    put_hash_index(&mut buf, pass, ranks);
    finish_frame(buf)
}

/// Writes one framed message to a byte stream.
pub fn write_message<W: Write>(w: &mut W, msg: &ControlMessage) -> Result<(), WireError> {
    w.write_all(&msg.encode())?;
    Ok(())
}

/// Reads one framed message from a byte stream.
pub fn read_message<R: Read>(r: &mut R) -> Result<ControlMessage, WireError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let n = u32::from_le_bytes(len) as usize;
    let mut frame = Vec::with_capacity(n + 4);
    frame.extend_from_slice(&len);
    frame.resize(n + 4, 0);
    r.read_exact(&mut frame[4..])?;
    ControlMessage::decode(&frame)
}

fn expect_len(kind: &'static str, body: &[u8], expected: usize) -> Result<(), WireError> {
    if body.len() == expected {
        Ok(())
    } else {
        Err(WireError::BadLength {
            kind,
            expected,
            got: body.len(),
        })
    }
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_vec3(buf: &mut Vec<u8>, v: Vec3) {
    for c in v.to_array() {
        put_f64(buf, c);
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or(
            WireError::Truncated {
                needed: self.pos.saturating_add(n),
                had: self.data.len(),
            },
        )?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn vec3(&mut self) -> Result<Vec3, WireError> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}
