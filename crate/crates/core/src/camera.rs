//! Pinhole camera: view depth, trackball rotation, and screen projection.

use thiserror::Error;

use crate::math::Vec3;

/// Depth at or below which a point counts as behind the camera.
pub const NEAR_EPSILON: f64 = 1e-6;
/// Minimum angle kept between the view direction and `up` after elevation.
pub const ELEVATION_MARGIN: f64 = 1e-4;
pub const DEFAULT_FOV_DEG: f64 = 30.0;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("camera position coincides with focal point")]
    DegenerateView,
    #[error("up vector is zero or parallel to the view direction")]
    DegenerateUp,
    #[error("field of view {0} outside (0, 180) degrees")]
    InvalidFov(f64),
    #[error("viewport {0}x{1} must be at least 1x1")]
    InvalidViewport(u32, u32),
    #[error("non-finite camera parameter")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    position: Vec3,
    focal: Vec3,
    up: Vec3,
    fov_y_deg: f64,
    width: u32,
    height: u32,
}

/// A projected point in pixel space (origin top-left, +y down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

impl Camera {
    /// `up` is normalized and orthogonalized against the view direction.
    pub fn new(
        position: Vec3,
        focal: Vec3,
        up: Vec3,
        fov_y_deg: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        if !(position.is_finite() && focal.is_finite() && up.is_finite() && fov_y_deg.is_finite())
        {
            return Err(CameraError::NonFinite);
        }
        if !(fov_y_deg > 0.0 && fov_y_deg < 180.0) {
            return Err(CameraError::InvalidFov(fov_y_deg));
        }
        if width == 0 || height == 0 {
            return Err(CameraError::InvalidViewport(width, height));
        }
        let view = (focal - position)
            .try_normalize()
            .ok_or(CameraError::DegenerateView)?;
        let up = orthogonal_up(up, view).ok_or(CameraError::DegenerateUp)?;
        Ok(Camera {
            position,
            focal,
            up,
            fov_y_deg,
            width,
            height,
        })
    }

    /// Rebuilds a camera received from another context, keeping every field
    /// bit-for-bit. `up` must already be unit length and orthogonal to the view.
    pub fn from_synced(
        position: Vec3,
        focal: Vec3,
        up: Vec3,
        fov_y_deg: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let checked = Camera::new(position, focal, up, fov_y_deg, width, height)?;
        if (up.length() - 1.0).abs() > 1e-9 || up.dot(checked.view_direction()).abs() > 1e-9 {
            return Err(CameraError::DegenerateUp);
        }
        Ok(Camera { up, ..checked })
    }

    /// Places the camera on the +Z side of `bounds`, far enough to see all of it.
    pub fn framing(
        center: Vec3,
        radius: f64,
        fov_y_deg: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let half = (fov_y_deg.to_radians() * 0.5).sin().max(1e-3);
        let dist = (radius.max(1e-6) / half) * 1.05;
        Camera::new(
            center + Vec3::Z * dist,
            center,
            Vec3::Y,
            fov_y_deg,
            width,
            height,
        )
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn focal(&self) -> Vec3 {
        self.focal
    }

    pub fn up(&self) -> Vec3 {
        self.up
    }

    pub fn fov_y_deg(&self) -> f64 {
        self.fov_y_deg
    }

    pub fn viewport(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn with_viewport(&self, width: u32, height: u32) -> Result<Self, CameraError> {
        Camera::new(self.position, self.focal, self.up, self.fov_y_deg, width, height)
    }

    pub fn view_direction(&self) -> Vec3 {
        (self.focal - self.position).normalize()
    }

    /// Unit vector pointing to screen right.
    pub fn right(&self) -> Vec3 {
        self.view_direction().cross(self.up).normalize()
    }

    /// Signed eye-space distance along the view direction; larger is farther.
    #[inline]
    pub fn vertex_depth(&self, v: Vec3) -> f64 {
        (v - self.position).dot(self.view_direction())
    }

    /// Focal length in pixels.
    pub fn focal_length_px(&self) -> f64 {
        self.height as f64 / (2.0 * (self.fov_y_deg.to_radians() * 0.5).tan())
    }

    pub fn projector(&self) -> Projector {
        let view = self.view_direction();
        let right = view.cross(self.up).normalize();
        let up = right.cross(view);
        Projector {
            position: self.position,
            view,
            right,
            up,
            f: self.focal_length_px(),
            cx: self.width as f64 * 0.5,
            cy: self.height as f64 * 0.5,
        }
    }

    /// Returns `None` when the point is behind (or on) the camera plane.
    pub fn project_to_screen(&self, v: Vec3) -> Option<ScreenPoint> {
        self.projector().project(v)
    }

    /// Trackball rotation about the focal point.
    ///
    /// `dx` turns the camera about `up` by `180° * dx`; `dy` raises it about the
    /// right axis by `180° * dy`, clamped so the view never aligns with `up`.
    pub fn trackball_rotate(&self, dx: f64, dy: f64) -> Camera {
        let dx = dx.clamp(-1.0, 1.0);
        let dy = dy.clamp(-1.0, 1.0);
        if dx == 0.0 && dy == 0.0 {
            return *self;
        }
        let up = self.up;
        let mut offset = self.position - self.focal;
        let dist = offset.length();

        if dx != 0.0 {
            offset = offset.rotate_about(up, std::f64::consts::PI * dx);
        }

        if dy != 0.0 {
            let dir = offset / offset.length();
            let polar = dir.dot(up).clamp(-1.0, 1.0).acos();
            let target = (polar - std::f64::consts::PI * dy)
                .clamp(ELEVATION_MARGIN, std::f64::consts::PI - ELEVATION_MARGIN);
            let horizontal = (dir - up * dir.dot(up))
                .try_normalize()
                .unwrap_or_else(|| up.cross(self.right()));
            offset = (up * target.cos() + horizontal * target.sin()) * dist;
        }

        // Keep the distance exact up to rounding.
        let offset = offset * (dist / offset.length());
        let position = self.focal + offset;
        let view = (-offset).normalize();
        let new_up = orthogonal_up(up, view).unwrap_or(up);
        Camera {
            position,
            up: new_up,
            ..*self
        }
    }

    /// Spins `up` about the view axis by `angle` radians.
    pub fn roll(&self, angle: f64) -> Camera {
        let view = self.view_direction();
        let up = self.up.rotate_about(view, angle);
        Camera {
            up: orthogonal_up(up, view).unwrap_or(self.up),
            ..*self
        }
    }
}

fn orthogonal_up(up: Vec3, view: Vec3) -> Option<Vec3> {
    let u = up.try_normalize()?;
    let ortho = u - view * u.dot(view);
    if ortho.length() < 1e-9 {
        return None;
    }
    ortho.try_normalize()
}

/// Precomputed camera basis for projecting many points.
#[derive(Debug, Clone, Copy)]
pub struct Projector {
    position: Vec3,
    view: Vec3,
    right: Vec3,
    up: Vec3,
    f: f64,
    cx: f64,
    cy: f64,
}

impl Projector {
    #[inline]
    pub fn project(&self, v: Vec3) -> Option<ScreenPoint> {
        let rel = v - self.position;
        let depth = rel.dot(self.view);
        if depth <= NEAR_EPSILON {
            return None;
        }
        let inv = self.f / depth;
        Some(ScreenPoint {
            x: self.cx + rel.dot(self.right) * inv,
            y: self.cy - rel.dot(self.up) * inv,
            depth,
        })
    }

    /// Same value as [`Camera::vertex_depth`].
    #[inline]
    pub fn depth(&self, v: Vec3) -> f64 {
        (v - self.position).dot(self.view)
    }

    pub fn view(&self) -> Vec3 {
        self.view
    }
}
