//! Tube meshes swept along polylines with parallel-transport frames.

use thiserror::Error;

use crate::geometry::Polyline;
use crate::math::Vec3;

pub const DEFAULT_SIDES: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum TubeError {
    #[error("tube needs at least 3 sides, got {0}")]
    TooFewSides(usize),
    #[error("expected {expected} radii, got {got}")]
    RadiusCount { expected: usize, got: usize },
    #[error("radius {value} at vertex {index} must be positive and finite")]
    InvalidRadius { index: usize, value: f64 },
}

/// Orthonormal frame at a polyline vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub tangent: Vec3,
    pub normal: Vec3,
    pub binormal: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TubeMesh {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Global id of the polyline vertex each ring vertex was swept from.
    pub source_vertex: Vec<u32>,
    pub triangles: Vec<[u32; 3]>,
    pub polyline_id: usize,
}

impl TubeMesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }
}

fn tangents(v: &[Vec3]) -> Vec<Vec3> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let fwd = v[(i + 1).min(n - 1)] - v[i];
            let back = v[i] - v[i.saturating_sub(1)];
            (fwd + back)
                .try_normalize()
                .or_else(|| fwd.try_normalize())
                .or_else(|| back.try_normalize())
                .unwrap_or(Vec3::X)
        })
        .collect()
}

/// Unit vector orthogonal to `t`, built from the world axis least aligned with it.
fn initial_normal(t: Vec3) -> Vec3 {
    let (ax, ay, az) = (t.x.abs(), t.y.abs(), t.z.abs());
    let axis = if ax <= ay && ax <= az {
        Vec3::X
    } else if ay <= az {
        Vec3::Y
    } else {
        Vec3::Z
    };
    (axis - t * axis.dot(t)).normalize()
}

pub fn sweep_frames(polyline: &Polyline) -> Vec<Frame> {
    let ts = tangents(polyline.vertices());
    let mut frames = Vec::with_capacity(ts.len());
    let mut normal = initial_normal(ts[0]);
    for (i, &t) in ts.iter().enumerate() {
        if i > 0 {
            let prev = ts[i - 1];
            let axis = prev.cross(t);
            let s = axis.length();
            if s > 1e-12 {
                let angle = s.atan2(prev.dot(t));
                normal = normal.rotate_about(axis / s, angle);
            }
            // Remove drift (and handle antiparallel tangents) by re-projecting.
            normal = (normal - t * normal.dot(t))
                .try_normalize()
                .unwrap_or_else(|| initial_normal(t));
        }
        frames.push(Frame {
            tangent: t,
            normal,
            binormal: t.cross(normal),
        });
    }
    frames
}

/// Sweeps a ring of `sides` vertices around every polyline vertex.
///
/// `first_vertex_id` is the global id of the polyline's first vertex and is
/// propagated into `source_vertex`. Produces `sides * n` vertices and
/// `2 * sides * (n - 1)` triangles; ends are left open.
pub fn tessellate_tube(
    polyline: &Polyline,
    radii: &[f64],
    sides: usize,
    first_vertex_id: u32,
) -> Result<TubeMesh, TubeError> {
    if sides < 3 {
        return Err(TubeError::TooFewSides(sides));
    }
    let n = polyline.len();
    if radii.len() != n {
        return Err(TubeError::RadiusCount {
            expected: n,
            got: radii.len(),
        });
    }
    if let Some((index, &value)) = radii
        .iter()
        .enumerate()
        .find(|(_, r)| !(r.is_finite() && **r > 0.0))
    {
        return Err(TubeError::InvalidRadius { index, value });
    }

    let ring: Vec<(f64, f64)> = (0..sides)
        .map(|k| (std::f64::consts::TAU * k as f64 / sides as f64).sin_cos())
        .collect();

    let frames = sweep_frames(polyline);
    let mut mesh = TubeMesh {
        positions: Vec::with_capacity(n * sides),
        normals: Vec::with_capacity(n * sides),
        source_vertex: Vec::with_capacity(n * sides),
        triangles: Vec::with_capacity(2 * sides * (n - 1)),
        polyline_id: polyline.id(),
    };
    for (i, (&center, f)) in polyline.vertices().iter().zip(&frames).enumerate() {
        for &(s, c) in &ring {
            let dir = f.normal * c + f.binormal * s;
            mesh.positions.push(center + dir * radii[i]);
            mesh.normals.push(dir);
            mesh.source_vertex.push(first_vertex_id + i as u32);
        }
    }
    let sides32 = sides as u32;
    for i in 0..(n as u32 - 1) {
        for k in 0..sides32 {
            let k1 = (k + 1) % sides32;
            let a = i * sides32 + k;
            let b = i * sides32 + k1;
            let c = a + sides32;
            let d = b + sides32;
            mesh.triangles.push([a, b, d]);
            mesh.triangles.push([a, d, c]);
        }
    }
    Ok(mesh)
}
