//! Worker-count scaling benchmark.

use std::fmt::Write as _;

use serde::Serialize;

use super::engine::{Engine, EngineConfig, EngineError};
use crate::camera::Camera;
use crate::geometry::Dataset;
use crate::stylemap::MappingSpec;

/// Horizontal trackball input per benchmark frame (1.8° of azimuth).
pub const ROTATION_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRecord {
    pub workers: usize,
    pub frame_time_ms: f64,
    pub sort_time_ms: f64,
    pub speedup: f64,
    pub efficiency: f64,
    pub mapping_mode: &'static str,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub mesh_vertices: usize,
}

#[derive(Clone, Copy)]
struct Sample {
    frame_ms: f64,
    sort_ms: f64,
}

fn sample(
    dataset: &Dataset,
    camera: Camera,
    spec: MappingSpec,
    config: EngineConfig,
    frames: usize,
) -> Result<Sample, EngineError> {
    let mut engine = Engine::new(dataset, camera, spec, config)?;
    // Warm-up frame builds caches and is not timed.
    engine.render_frame()?;
    let (mut frame_ms, mut sort_ms) = (0.0, 0.0);
    for _ in 0..frames {
        let s = engine.handle_interaction(ROTATION_STEP, 0.0)?;
        frame_ms += s.frame_ms;
        sort_ms += s.sort_ms;
    }
    Ok(Sample {
        frame_ms: frame_ms / frames as f64,
        sort_ms: sort_ms / frames as f64,
    })
}

/// Times `frames` rotating frames for each worker count; speedups are relative to one worker.
///
/// A one-worker baseline is measured even when `worker_counts` omits it.
pub fn benchmark_run(
    dataset: &Dataset,
    camera: Camera,
    spec: MappingSpec,
    config: EngineConfig,
    worker_counts: &[usize],
    frames: usize,
) -> Result<Vec<BenchRecord>, EngineError> {
    let frames = frames.max(1);
    let run = |workers: usize| {
        log::info!("benchmarking {workers} worker(s), {frames} frames");
        sample(dataset, camera, spec, EngineConfig { workers, ..config }, frames)
    };
    let baseline = run(1)?;
    let (width, height) = camera.viewport();
    let mesh_vertices = dataset.total_vertices() * config.tube_sides;
    let mut out = Vec::with_capacity(worker_counts.len());
    for &p in worker_counts {
        let s = if p == 1 {
            baseline
        } else {
            run(p)?
        };
        let speedup = baseline.frame_ms / s.frame_ms;
        out.push(BenchRecord {
            workers: p,
            frame_time_ms: s.frame_ms,
            sort_time_ms: s.sort_ms,
            speedup,
            efficiency: speedup / p as f64,
            mapping_mode: spec.mapping_mode(),
            width,
            height,
            frames,
            mesh_vertices,
        });
    }
    Ok(out)
}

pub const TABLE_HEADER: &str =
    "P\tTime(ms)\tSort(ms)\tSpeedup\tEfficiency\tMapping\tWidth\tHeight\tFrames\tMeshVertices";

/// Tab-separated table, one row per record.
pub fn format_table(records: &[BenchRecord]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{:.2}\t{:.2}\t{:.3}\t{:.3}\t{}\t{}\t{}\t{}\t{}",
            r.workers,
            r.frame_time_ms,
            r.sort_time_ms,
            r.speedup,
            r.efficiency,
            r.mapping_mode,
            r.width,
            r.height,
            r.frames,
            r.mesh_vertices
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_synthetic_bundle;

    #[test]
    fn baseline_row_is_unity() {
        let ds = generate_synthetic_bundle(12, 8, 3).unwrap();
        let b = ds.bounds();
        let cam = Camera::framing(b.center(), b.diagonal() * 0.5, 30.0, 64, 48).unwrap();
        let recs =
            benchmark_run(&ds, cam, MappingSpec::default(), EngineConfig::default(), &[1, 2], 2)
                .unwrap();
        assert_eq!(recs[0].speedup, 1.0);
        assert_eq!(recs[0].efficiency, 1.0);
        for r in &recs {
            assert!((r.efficiency - r.speedup / r.workers as f64).abs() < 1e-12);
            assert!(r.frame_time_ms >= r.sort_time_ms);
            assert_eq!(r.mapping_mode, "single");
        }
        let table = format_table(&recs);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(1).unwrap().starts_with("1\t"));
    }
}
