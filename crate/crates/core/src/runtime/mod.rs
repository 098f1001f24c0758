//! Parallel runtime: partitioning, messaging, the frame engine, and its front ends.

pub mod bench;
pub mod engine;
pub mod export;
pub mod partition;
pub mod serve;
pub mod wire;

pub use engine::{render_sequential, Engine, EngineConfig, EngineCounters, EngineError, FrameStats};
pub use partition::{partition_bounds, partition_ranges, Partition};
