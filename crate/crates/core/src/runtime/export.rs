//! Image files: binary PPM for color, a raw `DPTH` dump for depth.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::raster::FrameTile;

pub const DEPTH_MAGIC: &[u8; 4] = b"DPTH";
pub const DEPTH_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct ExportError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// `P6` header followed by packed RGB.
pub fn encode_ppm(tile: &FrameTile) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", tile.width(), tile.height());
    let mut out = Vec::with_capacity(header.len() + tile.pixel_count() * 3);
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&tile.rgb_bytes());
    out
}

/// `DPTH`, width, height and a zero reserved word (all u32 LE), then f32 LE depths.
pub fn encode_depth(tile: &FrameTile) -> Vec<u8> {
    let mut out = Vec::with_capacity(DEPTH_HEADER_LEN + tile.pixel_count() * 4);
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&tile.width().to_le_bytes());
    out.extend_from_slice(&tile.height().to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for d in &tile.depth {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    fs::write(path, bytes).map_err(|source| ExportError {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_ppm(tile: &FrameTile, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_bytes(path.as_ref(), &encode_ppm(tile))
}

pub fn write_depth(tile: &FrameTile, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_bytes(path.as_ref(), &encode_depth(tile))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_red_pixel() {
        let mut t = FrameTile::new(1, 1, [0, 0, 0, 255]);
        t.color[0] = [255, 0, 0, 255];
        let bytes = encode_ppm(&t);
        assert_eq!(&bytes[..11], b"P6\n1 1\n255\n");
        assert_eq!(&bytes[11..], &[255, 0, 0]);
        assert_eq!(bytes, encode_ppm(&t));
    }

    #[test]
    fn cleared_depth_is_infinite() {
        let t = FrameTile::new(3, 2, [0, 0, 0, 255]);
        let bytes = encode_depth(&t);
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(&bytes[..4], b"DPTH");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        for chunk in bytes[16..].chunks(4) {
            assert_eq!(f32::from_le_bytes(chunk.try_into().unwrap()), f32::INFINITY);
        }
    }

    #[test]
    fn error_names_path() {
        let t = FrameTile::new(1, 1, [0, 0, 0, 255]);
        let err = write_ppm(&t, "/nonexistent-dir/x.ppm").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.ppm"));
    }
}
