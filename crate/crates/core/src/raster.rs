//! Off-screen software rasterizer.
//!
//! Each worker owns one [`FrameTile`] holding color, eye-space depth, and the
//! id of the worker that wrote each pixel. Coverage uses pixel centers, a
//! top-left fill rule on 8-bit subpixel fixed-point edges, and a strict
//! less-than depth test, so the same triangle always touches the same pixels
//! with the same values regardless of which worker draws it.

use crate::camera::Camera;
use crate::math::Vec3;
use crate::stylemap::{Rgb, VertexStyle};
use crate::tubegen::TubeMesh;

pub const BACKGROUND_DEPTH: f32 = f32::INFINITY;
pub const BACKGROUND_PROVENANCE: u16 = 0xFFFF;

const SUBPIXEL_BITS: u32 = 8;
const SUBPIXEL: f64 = (1 << SUBPIXEL_BITS) as f64;
/// Triangles reaching beyond this many pixels from the origin are dropped.
const GUARD_BAND_PX: f64 = 1.0e7;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTile {
    width: u32,
    height: u32,
    background: [u8; 4],
    pub color: Vec<[u8; 4]>,
    pub depth: Vec<f32>,
    pub provenance: Vec<u16>,
}

impl FrameTile {
    /// A cleared tile.
    pub fn new(width: u32, height: u32, background: [u8; 4]) -> Self {
        let n = width as usize * height as usize;
        FrameTile {
            width,
            height,
            background,
            color: vec![background; n],
            depth: vec![BACKGROUND_DEPTH; n],
            provenance: vec![BACKGROUND_PROVENANCE; n],
        }
    }

    /// Assembles a tile from raw buffers; `None` if lengths disagree with the size.
    pub fn from_parts(
        width: u32,
        height: u32,
        background: [u8; 4],
        color: Vec<[u8; 4]>,
        depth: Vec<f32>,
        provenance: Vec<u16>,
    ) -> Option<Self> {
        let n = width as usize * height as usize;
        (color.len() == n && depth.len() == n && provenance.len() == n).then_some(FrameTile {
            width,
            height,
            background,
            color,
            depth,
            provenance,
        })
    }

    pub fn clear(&mut self, background: [u8; 4]) {
        self.background = background;
        self.color.fill(background);
        self.depth.fill(BACKGROUND_DEPTH);
        self.provenance.fill(BACKGROUND_PROVENANCE);
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn background(&self) -> [u8; 4] {
        self.background
    }

    pub fn pixel_count(&self) -> usize {
        self.color.len()
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> ([u8; 4], f32, u16) {
        let i = self.index(x, y);
        (self.color[i], self.depth[i], self.provenance[i])
    }

    /// Number of pixels holding geometry.
    pub fn covered(&self) -> usize {
        self.provenance
            .iter()
            .filter(|&&p| p != BACKGROUND_PROVENANCE)
            .count()
    }

    /// Color buffer as packed RGB bytes.
    pub fn rgb_bytes(&self) -> Vec<u8> {
        self.color.iter().flat_map(|c| [c[0], c[1], c[2]]).collect()
    }

    pub fn rgba_bytes(&self) -> Vec<u8> {
        self.color.iter().flatten().copied().collect()
    }
}

pub fn background_rgb(bg: [u8; 4]) -> Rgb {
    [bg[0] as f64 / 255.0, bg[1] as f64 / 255.0, bg[2] as f64 / 255.0]
}

#[inline]
fn quantize(v: f64) -> u8 {
    // Round half up.
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Headlight Lambert shading with transparency folded against the background.
#[inline]
pub fn shade(base: Rgb, alpha: f64, normal: Vec3, view_dir: Vec3, background: Rgb) -> [u8; 4] {
    let intensity = 0.2 + 0.8 * (-normal.dot(view_dir)).max(0.0);
    let mut out = [0u8, 0, 0, 255];
    for k in 0..3 {
        let lit = base[k] * intensity;
        out[k] = quantize(alpha * lit + (1.0 - alpha) * background[k]);
    }
    out
}

#[derive(Clone, Copy)]
struct Projected {
    x: i64,
    y: i64,
    inv_z: f64,
}

#[inline]
fn edge(ax: i64, ay: i64, bx: i64, by: i64, px: i64, py: i64) -> i64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

#[inline]
fn is_top_left(ax: i64, ay: i64, bx: i64, by: i64) -> bool {
    let (dx, dy) = (bx - ax, by - ay);
    dy < 0 || (dy == 0 && dx > 0)
}

/// Draws `mesh` into `tile` with one style per mesh vertex.
///
/// Triangles are processed in index order; a triangle with any vertex behind
/// the camera is discarded whole.
pub fn rasterize_mesh(
    tile: &mut FrameTile,
    mesh: &TubeMesh,
    styles: &[VertexStyle],
    cam: &Camera,
    worker_id: u16,
) {
    assert_eq!(
        styles.len(),
        mesh.vertex_count(),
        "one style per mesh vertex"
    );
    let projector = cam.projector();
    let view = projector.view();
    let bg = background_rgb(tile.background);
    let (w, h) = (tile.width as i64, tile.height as i64);
    if w == 0 || h == 0 {
        return;
    }

    let projected: Vec<Option<Projected>> = mesh
        .positions
        .iter()
        .map(|&p| {
            let s = projector.project(p)?;
            if s.x.abs() > GUARD_BAND_PX || s.y.abs() > GUARD_BAND_PX {
                return None;
            }
            Some(Projected {
                x: (s.x * SUBPIXEL).round() as i64,
                y: (s.y * SUBPIXEL).round() as i64,
                inv_z: 1.0 / s.depth,
            })
        })
        .collect();

    let half = 1i64 << (SUBPIXEL_BITS - 1);
    let one = 1i64 << SUBPIXEL_BITS;

    for tri in &mesh.triangles {
        let [mut i0, mut i1, i2] = tri.map(|i| i as usize);
        let (Some(mut a), Some(mut b), Some(c)) = (projected[i0], projected[i1], projected[i2]) else {
            continue;
        };
        let mut area = edge(a.x, a.y, b.x, b.y, c.x, c.y);
        if area == 0 {
            continue;
        }
        if area < 0 {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut i0, &mut i1);
            area = -area;
        }

        // Pixel (px, py) has its center at ((px + 0.5) * one, (py + 0.5) * one).
        let min_x = a.x.min(b.x).min(c.x);
        let max_x = a.x.max(b.x).max(c.x);
        let min_y = a.y.min(b.y).min(c.y);
        let max_y = a.y.max(b.y).max(c.y);
        let px0 = ((min_x - half + one - 1).div_euclid(one)).max(0);
        let px1 = ((max_x - half).div_euclid(one)).min(w - 1);
        let py0 = ((min_y - half + one - 1).div_euclid(one)).max(0);
        let py1 = ((max_y - half).div_euclid(one)).min(h - 1);
        if px0 > px1 || py0 > py1 {
            continue;
        }

        let tl0 = is_top_left(b.x, b.y, c.x, c.y);
        let tl1 = is_top_left(c.x, c.y, a.x, a.y);
        let tl2 = is_top_left(a.x, a.y, b.x, b.y);
        let inv_area = 1.0 / area as f64;
        let (s0, s1, s2) = (&styles[i0], &styles[i1], &styles[i2]);
        let (n0, n1, n2) = (mesh.normals[i0], mesh.normals[i1], mesh.normals[i2]);

        for py in py0..=py1 {
            let cy = py * one + half;
            let row = py as usize * w as usize;
            for px in px0..=px1 {
                let cx = px * one + half;
                let e0 = edge(b.x, b.y, c.x, c.y, cx, cy);
                let e1 = edge(c.x, c.y, a.x, a.y, cx, cy);
                let e2 = edge(a.x, a.y, b.x, b.y, cx, cy);
                let inside = (e0 > 0 || (e0 == 0 && tl0))
                    && (e1 > 0 || (e1 == 0 && tl1))
                    && (e2 > 0 || (e2 == 0 && tl2));
                if !inside {
                    continue;
                }
                // Perspective-correct weights.
                let w0 = e0 as f64 * inv_area * a.inv_z;
                let w1 = e1 as f64 * inv_area * b.inv_z;
                let w2 = e2 as f64 * inv_area * c.inv_z;
                let q = w0 + w1 + w2;
                let depth = (1.0 / q) as f32;
                let idx = row + px as usize;
                if !(depth < tile.depth[idx]) {
                    continue;
                }
                let (w0, w1, w2) = (w0 / q, w1 / q, w2 / q);
                let rgb = [
                    s0.rgb[0] * w0 + s1.rgb[0] * w1 + s2.rgb[0] * w2,
                    s0.rgb[1] * w0 + s1.rgb[1] * w1 + s2.rgb[1] * w2,
                    s0.rgb[2] * w0 + s1.rgb[2] * w1 + s2.rgb[2] * w2,
                ];
                let alpha = s0.alpha * w0 + s1.alpha * w1 + s2.alpha * w2;
                let normal = (n0 * w0 + n1 * w1 + n2 * w2)
                    .try_normalize()
                    .unwrap_or(-view);
                tile.color[idx] = shade(rgb, alpha.clamp(0.0, 1.0), normal, view, bg);
                tile.depth[idx] = depth;
                tile.provenance[idx] = worker_id;
            }
        }
    }
}
