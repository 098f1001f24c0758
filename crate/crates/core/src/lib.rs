//! Depth-stylized dense tube rendering on CPU workers.
//!
//! Polylines are split across workers. Each frame every worker ranks its
//! vertices by eye depth, the master merges the sorted runs into a global rank
//! index, visual variables (tube radius, hue, value, opacity) are mapped linearly
//! from rank, and each worker rasterizes its own tubes into a depth-tested tile
//! that the master composites.

pub mod camera;
pub mod compositor;
pub mod geometry;
pub mod math;
pub mod ranksort;
pub mod raster;
pub mod runtime;
pub mod stylemap;
pub mod tubegen;

pub use camera::Camera;
pub use geometry::{Dataset, Polyline};
pub use math::Vec3;
pub use ranksort::{DepthCell, HashIndex};
pub use raster::FrameTile;
pub use runtime::{Engine, EngineConfig, FrameStats};
pub use stylemap::{MappingSpec, Orientation, VisualVariables};
