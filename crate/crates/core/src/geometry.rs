//! Polyline datasets: loading, validation, and synthetic bundles.
//!
//! A polyline is the smallest unit handed to a worker; partitions never split one.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math::Vec3;

/// Minimum distance between consecutive polyline vertices.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no polylines")]
    Empty,
    #[error("polyline {id}: {message}")]
    InvalidPolyline { id: usize, message: String },
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid synthetic parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).length()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    id: usize,
    vertices: Vec<Vec3>,
}

impl Polyline {
    pub fn new(id: usize, vertices: Vec<Vec3>) -> Result<Self, GeometryError> {
        if vertices.len() < 2 {
            return Err(GeometryError::InvalidPolyline {
                id,
                message: format!("needs at least 2 vertices, got {}", vertices.len()),
            });
        }
        if let Some(v) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPolyline {
                id,
                message: format!("vertex {v} is not finite"),
            });
        }
        for (i, w) in vertices.windows(2).enumerate() {
            if (w[1] - w[0]).length() <= MIN_SEGMENT_LENGTH {
                return Err(GeometryError::InvalidPolyline {
                    id,
                    message: format!("vertices {} and {} coincide", i, i + 1),
                });
            }
        }
        Ok(Polyline { id, vertices })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    polylines: Vec<Polyline>,
    total_vertices: usize,
    bounds: Aabb,
}

impl Dataset {
    /// Builds a dataset, assigning ids `0..n` in input order.
    pub fn from_vertex_lists(lists: Vec<Vec<Vec3>>) -> Result<Self, GeometryError> {
        if lists.is_empty() {
            return Err(GeometryError::Empty);
        }
        let polylines = lists
            .into_iter()
            .enumerate()
            .map(|(id, verts)| Polyline::new(id, verts))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_valid(polylines))
    }

    fn from_valid(polylines: Vec<Polyline>) -> Self {
        let mut bounds = Aabb::empty();
        let mut total_vertices = 0;
        for p in &polylines {
            total_vertices += p.len();
            for &v in p.vertices() {
                bounds.grow(v);
            }
        }
        Dataset {
            polylines,
            total_vertices,
            bounds,
        }
    }

    pub fn polylines(&self) -> &[Polyline] {
        &self.polylines
    }

    pub fn total_vertices(&self) -> usize {
        self.total_vertices
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.polylines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    /// Global id of the first vertex of every polyline.
    pub fn vertex_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.polylines
            .iter()
            .map(|p| {
                let off = acc;
                acc += p.len();
                off
            })
            .collect()
    }
}

/// Parses the text polyline format: one polyline per line as
/// `x0 y0 z0 x1 y1 z1 ...`; lines starting with `#` and blank lines are skipped.
pub fn parse_dataset(text: &str) -> Result<Dataset, GeometryError> {
    let mut lists = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut coords = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| GeometryError::Parse {
                line: line_no,
                message: format!("non-numeric coordinate {tok:?}"),
            })?;
            if !v.is_finite() {
                return Err(GeometryError::Parse {
                    line: line_no,
                    message: format!("non-finite coordinate {tok:?}"),
                });
            }
            coords.push(v);
        }
        if coords.len() % 3 != 0 {
            return Err(GeometryError::Parse {
                line: line_no,
                message: format!("{} values is not a multiple of 3", coords.len()),
            });
        }
        let verts: Vec<Vec3> = coords
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]))
            .collect();
        if verts.len() < 2 {
            return Err(GeometryError::Parse {
                line: line_no,
                message: format!("polyline needs at least 2 vertices, got {}", verts.len()),
            });
        }
        let id = lists.len();
        Polyline::new(id, verts.clone()).map_err(|e| GeometryError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        lists.push(verts);
    }
    Dataset::from_vertex_lists(lists)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, GeometryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| GeometryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_dataset(&text)
}

/// Writes a dataset in the text polyline format.
pub fn format_dataset(ds: &Dataset) -> String {
    let mut out = String::new();
    for p in ds.polylines() {
        let line: Vec<String> = p
            .vertices()
            .iter()
            .flat_map(|v| [v.x, v.y, v.z])
            .map(|c| format!("{c:?}"))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Deterministic bundle of gently curving helical tubes inside `[-0.5, 0.5]^3`.
///
/// Every tube advances monotonically along its main axis, so consecutive
/// vertices never coincide.
pub fn generate_synthetic_bundle(
    count: usize,
    vertices_per: usize,
    seed: u64,
) -> Result<Dataset, GeometryError> {
    if count == 0 {
        return Err(GeometryError::InvalidParameters("count must be >= 1".into()));
    }
    if vertices_per < 2 {
        return Err(GeometryError::InvalidParameters(
            "vertices per polyline must be >= 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let mut polylines = Vec::with_capacity(count);
    for id in 0..count {
        // Position in the cross-section disc.
        let r0 = 0.3 * rng.gen::<f64>().sqrt();
        let a0 = rng.gen::<f64>() * tau;
        let (cx, cy) = (r0 * a0.cos(), r0 * a0.sin());
        let helix_r = rng.gen_range(0.005..0.04);
        let turns = rng.gen_range(0.25..2.0);
        let phase = rng.gen::<f64>() * tau;
        let bend = Vec3::new(rng.gen_range(-0.12..0.12), rng.gen_range(-0.12..0.12), 0.0);
        let z0 = rng.gen_range(-0.45..-0.2);
        let z1 = rng.gen_range(0.2..0.45);

        let denom = (vertices_per - 1) as f64;
        let verts = (0..vertices_per)
            .map(|i| {
                let t = i as f64 / denom;
                let ang = phase + turns * tau * t;
                let arch = (std::f64::consts::PI * t).sin();
                Vec3::new(
                    cx + helix_r * ang.cos() + bend.x * arch,
                    cy + helix_r * ang.sin() + bend.y * arch,
                    z0 + (z1 - z0) * t,
                )
            })
            .collect();
        polylines.push(Polyline::new(id, verts)?);
    }
    Ok(Dataset::from_valid(polylines))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let ds = parse_dataset("0 0 0 1 0 0\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.total_vertices(), 2);
        assert_eq!(ds.bounds().min, Vec3::ZERO);
        assert_eq!(ds.bounds().max, Vec3::X);
    }

    #[test]
    fn empty_file_rejected() {
        assert_eq!(parse_dataset(""), Err(GeometryError::Empty));
        assert_eq!(parse_dataset("# only a comment\n\n"), Err(GeometryError::Empty));
        assert_eq!(GeometryError::Empty.to_string(), "no polylines");
    }

    #[test]
    fn vertex_count_sums() {
        let mut text = String::from("# three lines\n");
        for n in [5, 7, 9] {
            let line: Vec<String> = (0..n).map(|i| format!("{i} 0 0")).collect();
            text.push_str(&line.join(" "));
            text.push('\n');
        }
        let ds = parse_dataset(&text).unwrap();
        assert_eq!(ds.total_vertices(), 21);
        assert_eq!(ds.vertex_offsets(), vec![0, 5, 12]);
        let ids: Vec<usize> = ds.polylines().iter().map(Polyline::id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn parse_errors_name_line() {
        let err = parse_dataset("0 0 0 1 0 0\n0 0 x 1 1 1\n").unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("# c\n0 0 0\n").unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("0 0 0 1 0\n").unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 1, .. }), "{err}");
        let err = parse_dataset("0 0 0 0 0 0\n").unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn synthetic_minimal() {
        let ds = generate_synthetic_bundle(1, 2, 0).unwrap();
        assert_eq!(ds.total_vertices(), 2);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic_bundle(100, 50, 7).unwrap();
        let b = generate_synthetic_bundle(100, 50, 7).unwrap();
        assert_eq!(format_dataset(&a), format_dataset(&b));
        assert_eq!(a, b);
        let c = generate_synthetic_bundle(100, 50, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_rejects_bad_params() {
        assert!(generate_synthetic_bundle(0, 5, 1).is_err());
        assert!(generate_synthetic_bundle(5, 1, 1).is_err());
    }

    #[test]
    fn synthetic_fits_unit_volume() {
        let ds = generate_synthetic_bundle(200, 30, 3).unwrap();
        let b = ds.bounds();
        for v in [b.min, b.max] {
            assert!(v.x.abs() <= 0.5 && v.y.abs() <= 0.5 && v.z.abs() <= 0.5);
        }
        for p in ds.polylines() {
            assert!(p.vertices().iter().all(|&v| b.contains(v)));
        }
    }

    #[test]
    fn text_round_trip() {
        let ds = generate_synthetic_bundle(5, 4, 11).unwrap();
        assert_eq!(parse_dataset(&format_dataset(&ds)).unwrap(), ds);
    }
}
