//! Master/worker frame pipeline.
//!
//! The master (worker 0) owns the final image and also renders its own
//! partition. Every other worker runs on its own thread, holds only its
//! partition's polylines, and talks to the master exclusively through framed
//! byte messages (see [`super::wire`]).
//!
//! Per frame:
//! 1. master sends `CameraSync` and `RenderFrame` to every worker;
//! 2. with size mapping on, polyline-vertex depths go through one
//!    sort/merge/index round and each worker sweeps tubes with rank-driven radii;
//! 3. tube-vertex depths go through a second round, then every worker styles
//!    and rasterizes its tubes;
//! 4. workers upload tiles and the master composites them as they arrive.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::partition::{partition_ranges, Partition, PartitionError};
use super::wire::{self, ControlMessage, WireError};
use crate::camera::Camera;
use crate::compositor::{composite_into, CompositeError};
use crate::geometry::{Dataset, Polyline};
use crate::ranksort::{cell_order, DepthCell, HashIndex, MergeBuffer, RankError};
use crate::raster::{rasterize_mesh, FrameTile};
use crate::stylemap::{radii_for_polylines, style_vertex, MappingSpec, Rgb, StyleError, VertexStyle};
use crate::tubegen::{tessellate_tube, TubeError, TubeMesh, DEFAULT_SIDES};

pub const PASS_POLYLINES: u8 = 1;
pub const PASS_MESH: u8 = 2;

const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Tube(#[from] TubeError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error(transparent)]
    Camera(#[from] crate::camera::CameraError),
    #[error("worker {worker} failed: {reason}")]
    WorkerFailed { worker: usize, reason: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("dataset has {0} vertices, more than 32-bit ids allow")]
    TooLarge(usize),
    #[error("engine is unusable after an earlier worker failure")]
    Poisoned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub workers: usize,
    pub tube_sides: usize,
    pub base_color: Rgb,
    pub background: [u8; 4],
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            workers: 1,
            tube_sides: DEFAULT_SIDES,
            base_color: [0.85, 0.85, 0.85],
            background: [0, 0, 0, 255],
        }
    }
}

/// Timing and instrumentation for one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameStats {
    pub frame_id: u64,
    pub frame_ms: f64,
    pub sort_ms: f64,
    /// Sort/merge/index-broadcast cycles run this frame.
    pub sort_rounds: u32,
    pub workers: usize,
    /// Tube meshes rebuilt this frame, summed over workers.
    pub tube_builds: u32,
    pub ranked_points: usize,
}

/// Running totals over the engine's lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineCounters {
    pub frames: u64,
    pub sort_rounds: u64,
    pub merges: u64,
    pub index_broadcasts: u64,
    pub tube_builds: u64,
}

/// One partition's share of the pipeline; runs inside a worker context.
struct PartitionWorker {
    worker_id: u16,
    polylines: Vec<Polyline>,
    first_vertex_ids: Vec<u32>,
    vertex_id_offset: u32,
    vertex_count: usize,
    sides: usize,
    base_color: Rgb,
    background: [u8; 4],
    camera: Camera,
    spec: MappingSpec,
    meshes: Vec<TubeMesh>,
    /// Radius the cached meshes were swept with, when built without size mapping.
    cached_uniform_radius: Option<f64>,
    builds: u32,
    styles: Vec<VertexStyle>,
    tile: FrameTile,
}

impl PartitionWorker {
    #[allow(clippy::too_many_arguments)]
    fn new(
        worker_id: u16,
        polylines: Vec<Polyline>,
        part: &Partition,
        config: &EngineConfig,
        camera: Camera,
        spec: MappingSpec,
    ) -> Self {
        let mut first_vertex_ids = Vec::with_capacity(polylines.len());
        let mut next = part.vertex_id_offset as u32;
        for p in &polylines {
            first_vertex_ids.push(next);
            next += p.len() as u32;
        }
        let (w, h) = camera.viewport();
        PartitionWorker {
            worker_id,
            polylines,
            first_vertex_ids,
            vertex_id_offset: part.vertex_id_offset as u32,
            vertex_count: part.vertex_count,
            sides: config.tube_sides,
            base_color: config.base_color,
            background: config.background,
            camera,
            spec,
            meshes: Vec::new(),
            cached_uniform_radius: None,
            builds: 0,
            styles: Vec::new(),
            tile: FrameTile::new(w, h, config.background),
        }
    }

    fn mesh_id_offset(&self) -> u32 {
        self.vertex_id_offset * self.sides as u32
    }

    fn sorted(mut cells: Vec<DepthCell>) -> Result<Vec<DepthCell>, RankError> {
        if let Some(c) = cells.iter().find(|c| !c.vd.is_finite()) {
            return Err(RankError::NonFinite { id: c.id, vd: c.vd });
        }
        cells.sort_unstable_by(cell_order);
        Ok(cells)
    }

    /// Sorted depth cells of this partition's polyline vertices.
    fn polyline_cells(&self) -> Result<Vec<DepthCell>, RankError> {
        let proj = self.camera.projector();
        let mut cells = Vec::with_capacity(self.vertex_count);
        let mut id = self.vertex_id_offset;
        for p in &self.polylines {
            for &v in p.vertices() {
                cells.push(DepthCell::new(proj.depth(v), id));
                id += 1;
            }
        }
        Self::sorted(cells)
    }

    /// Sorted depth cells of this partition's tube-mesh vertices.
    fn mesh_cells(&self) -> Result<Vec<DepthCell>, RankError> {
        let proj = self.camera.projector();
        let mut cells = Vec::with_capacity(self.vertex_count * self.sides);
        let mut id = self.mesh_id_offset();
        for m in &self.meshes {
            for &v in &m.positions {
                cells.push(DepthCell::new(proj.depth(v), id));
                id += 1;
            }
        }
        Self::sorted(cells)
    }

    fn build_sized_meshes(&mut self, index: &HashIndex) -> Result<(), EngineError> {
        let rank_max = index.rank_max();
        self.meshes.clear();
        for (p, &first) in self.polylines.iter().zip(&self.first_vertex_ids) {
            let ranks = index.lookup_global_ranks(first as usize, p.len())?;
            let radii = radii_for_polylines(ranks, rank_max, &self.spec)?;
            self.meshes.push(tessellate_tube(p, &radii, self.sides, first)?);
        }
        self.cached_uniform_radius = None;
        self.builds += 1;
        Ok(())
    }

    fn ensure_uniform_meshes(&mut self) -> Result<(), EngineError> {
        let r = self.spec.uniform_radius();
        if self.cached_uniform_radius == Some(r) {
            return Ok(());
        }
        self.meshes.clear();
        for (p, &first) in self.polylines.iter().zip(&self.first_vertex_ids) {
            let radii = vec![r; p.len()];
            self.meshes.push(tessellate_tube(p, &radii, self.sides, first)?);
        }
        self.cached_uniform_radius = Some(r);
        self.builds += 1;
        Ok(())
    }

    fn render(&mut self, index: &HashIndex) -> Result<&FrameTile, EngineError> {
        let (w, h) = self.camera.viewport();
        if (self.tile.width(), self.tile.height()) != (w, h) {
            self.tile = FrameTile::new(w, h, self.background);
        } else {
            self.tile.clear(self.background);
        }
        let rank_max = index.rank_max();
        let mut offset = self.mesh_id_offset() as usize;
        for mesh in &self.meshes {
            let ranks = index.lookup_global_ranks(offset, mesh.vertex_count())?;
            self.styles.clear();
            self.styles.extend(
                ranks
                    .iter()
                    .map(|&r| style_vertex(r, rank_max, &self.spec, self.base_color)),
            );
            rasterize_mesh(&mut self.tile, mesh, &self.styles, &self.camera, self.worker_id);
            offset += mesh.vertex_count();
        }
        Ok(&self.tile)
    }

    fn take_builds(&mut self) -> u32 {
        std::mem::take(&mut self.builds)
    }
}

fn wait_index(rx: &Receiver<Vec<u8>>, pass: u8) -> Result<HashIndex, EngineError> {
    let bytes = rx
        .recv()
        .map_err(|_| EngineError::Protocol("master channel closed".into()))?;
    match ControlMessage::decode(&bytes)? {
        ControlMessage::HashIndexBroadcast { pass: p, ranks } if p == pass => {
            Ok(HashIndex::from_trusted(ranks))
        }
        other => Err(EngineError::Protocol(format!(
            "expected hash index for pass {pass}, got {:?}",
            other.kind()
        ))),
    }
}

fn send(tx: &Sender<Vec<u8>>, bytes: Vec<u8>) -> Result<(), EngineError> {
    tx.send(bytes)
        .map_err(|_| EngineError::Protocol("channel closed".into()))
}

fn worker_loop(
    mut w: PartitionWorker,
    rx: Receiver<Vec<u8>>,
    tx: Sender<Vec<u8>>,
) -> Result<(), EngineError> {
    loop {
        let Ok(bytes) = rx.recv() else {
            return Ok(());
        };
        match ControlMessage::decode(&bytes)? {
            ControlMessage::CameraSync(cam) => w.camera = cam,
            ControlMessage::MappingUpdate(spec) => w.spec = spec,
            ControlMessage::RenderFrame { .. } => {
                if w.spec.enabled.size {
                    let cells = w.polyline_cells()?;
                    send(&tx, wire::encode_depth_cells(w.worker_id, PASS_POLYLINES, &cells))?;
                    let index = wait_index(&rx, PASS_POLYLINES)?;
                    w.build_sized_meshes(&index)?;
                } else {
                    w.ensure_uniform_meshes()?;
                }
                let cells = w.mesh_cells()?;
                send(&tx, wire::encode_depth_cells(w.worker_id, PASS_MESH, &cells))?;
                let index = wait_index(&rx, PASS_MESH)?;
                let builds = w.take_builds();
                let worker_id = w.worker_id;
                let tile = w.render(&index)?;
                send(&tx, wire::encode_tile_upload(worker_id, builds, tile))?;
            }
            ControlMessage::Shutdown => return Ok(()),
            other => {
                return Err(EngineError::Protocol(format!(
                    "worker received {:?}",
                    other.kind()
                )))
            }
        }
    }
}

struct WorkerHandle {
    id: usize,
    tx: Sender<Vec<u8>>,
    join: Option<JoinHandle<Result<(), EngineError>>>,
}

/// The parallel rendering engine.
pub struct Engine {
    config: EngineConfig,
    camera: Camera,
    spec: MappingSpec,
    partitions: Vec<Partition>,
    total_vertices: usize,
    master: PartitionWorker,
    workers: Vec<WorkerHandle>,
    inbox: Receiver<Vec<u8>>,
    merge: MergeBuffer,
    polyline_index: HashIndex,
    mesh_index: HashIndex,
    frame: FrameTile,
    frame_id: u64,
    counters: EngineCounters,
    mapping_dirty: bool,
    poisoned: bool,
}

impl Engine {
    /// Partitions `dataset` and starts `config.workers - 1` worker threads.
    pub fn new(
        dataset: &Dataset,
        camera: Camera,
        spec: MappingSpec,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        spec.validate()?;
        if config.tube_sides < 3 {
            return Err(TubeError::TooFewSides(config.tube_sides).into());
        }
        let total_vertices = dataset.total_vertices();
        if total_vertices
            .checked_mul(config.tube_sides)
            .is_none_or(|n| n >= u32::MAX as usize)
        {
            return Err(EngineError::TooLarge(total_vertices));
        }
        let counts: Vec<usize> = dataset.polylines().iter().map(Polyline::len).collect();
        let partitions = partition_ranges(&counts, config.workers)?;

        let (up_tx, inbox) = mpsc::channel();
        let mut workers = Vec::with_capacity(partitions.len().saturating_sub(1));
        for part in partitions.iter().skip(1) {
            let polylines = dataset.polylines()[part.polyline_range.clone()].to_vec();
            let state = PartitionWorker::new(
                part.worker_id as u16,
                polylines,
                part,
                &config,
                camera,
                spec,
            );
            let (tx, rx) = mpsc::channel();
            let up = up_tx.clone();
            let join = thread::Builder::new()
                .name(format!("depthtube-worker-{}", part.worker_id))
                .spawn(move || {
                    let res = worker_loop(state, rx, up);
                    if let Err(e) = &res {
                        log::error!("worker failed: {e}");
                    }
                    res
                })
                .map_err(|e| EngineError::WorkerFailed {
                    worker: part.worker_id,
                    reason: e.to_string(),
                })?;
            workers.push(WorkerHandle {
                id: part.worker_id,
                tx,
                join: Some(join),
            });
        }
        drop(up_tx);

        let p0 = &partitions[0];
        let master = PartitionWorker::new(
            0,
            dataset.polylines()[p0.polyline_range.clone()].to_vec(),
            p0,
            &config,
            camera,
            spec,
        );
        let (w, h) = camera.viewport();
        Ok(Engine {
            config,
            camera,
            spec,
            partitions,
            total_vertices,
            master,
            workers,
            inbox,
            merge: MergeBuffer::new(),
            polyline_index: HashIndex::default(),
            mesh_index: HashIndex::default(),
            frame: FrameTile::new(w, h, config.background),
            frame_id: 0,
            counters: EngineCounters::default(),
            mapping_dirty: true,
            poisoned: false,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn worker_count(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn spec(&self) -> &MappingSpec {
        &self.spec
    }

    pub fn set_camera(&mut self, camera: Camera) {
        self.camera = camera;
    }

    pub fn set_viewport(&mut self, width: u32, height: u32) -> Result<(), EngineError> {
        self.camera = self.camera.with_viewport(width, height)?;
        Ok(())
    }

    /// Replaces the mapping; workers receive it with the next frame.
    pub fn set_mapping(&mut self, spec: MappingSpec) -> Result<(), EngineError> {
        spec.validate()?;
        self.spec = spec;
        self.mapping_dirty = true;
        Ok(())
    }

    /// Last composited image.
    pub fn frame(&self) -> &FrameTile {
        &self.frame
    }

    pub fn counters(&self) -> EngineCounters {
        self.counters
    }

    /// Rank index of tube-mesh vertices from the last frame.
    pub fn mesh_index(&self) -> &HashIndex {
        &self.mesh_index
    }

    /// Rank index of polyline vertices from the last size-mapped frame.
    pub fn polyline_index(&self) -> &HashIndex {
        &self.polyline_index
    }

    /// Rotates the camera and renders a fresh frame.
    pub fn handle_interaction(&mut self, dx: f64, dy: f64) -> Result<FrameStats, EngineError> {
        self.camera = self.camera.trackball_rotate(dx, dy);
        self.mapping_dirty = true;
        self.render_frame()
    }

    fn broadcast(&self, bytes: &[u8]) -> Result<(), EngineError> {
        for w in &self.workers {
            if w.tx.send(bytes.to_vec()).is_err() {
                return Err(EngineError::WorkerFailed {
                    worker: w.id,
                    reason: "channel closed".into(),
                });
            }
        }
        Ok(())
    }

    /// Next message from any worker, failing if a worker thread has exited.
    fn recv_from_workers(&mut self) -> Result<ControlMessage, EngineError> {
        loop {
            match self.inbox.recv_timeout(POLL) {
                Ok(bytes) => return Ok(ControlMessage::decode(&bytes)?),
                Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => {
                    if let Some(w) = self
                        .workers
                        .iter_mut()
                        .find(|w| w.join.as_ref().is_some_and(|j| j.is_finished()))
                    {
                        let reason = match w.join.take().map(JoinHandle::join) {
                            Some(Ok(Err(e))) => e.to_string(),
                            Some(Err(_)) => "worker panicked".to_string(),
                            _ => "worker exited".to_string(),
                        };
                        return Err(EngineError::WorkerFailed { worker: w.id, reason });
                    }
                }
            }
        }
    }

    /// One sort/merge/index/broadcast cycle; the master's own run is merged first.
    fn rank_round(&mut self, pass: u8, own: Vec<DepthCell>) -> Result<(), EngineError> {
        self.merge.reset();
        self.merge.absorb(&own)?;
        drop(own);
        for _ in 0..self.workers.len() {
            match self.recv_from_workers()? {
                ControlMessage::DepthCellsUpload { pass: p, cells, .. } if p == pass => {
                    self.merge.absorb(&cells)?;
                    self.counters.merges += 1;
                }
                other => {
                    return Err(EngineError::Protocol(format!(
                        "expected depth cells for pass {pass}, got {:?}",
                        other.kind()
                    )))
                }
            }
        }
        let index = if pass == PASS_POLYLINES {
            &mut self.polyline_index
        } else {
            &mut self.mesh_index
        };
        index.rebuild(self.merge.merged())?;
        if !self.workers.is_empty() {
            let bytes = wire::encode_hash_index(pass, index.ranks());
            self.broadcast(&bytes)?;
            self.counters.index_broadcasts += 1;
        }
        self.counters.sort_rounds += 1;
        Ok(())
    }

    /// Renders one frame with the current camera and mapping.
    ///
    /// On failure no image is produced and the engine refuses further frames.
    pub fn render_frame(&mut self) -> Result<FrameStats, EngineError> {
        if self.poisoned {
            return Err(EngineError::Poisoned);
        }
        let res = self.render_frame_inner();
        if res.is_err() {
            self.poisoned = true;
        }
        res
    }

    fn render_frame_inner(&mut self) -> Result<FrameStats, EngineError> {
        let start = Instant::now();
        self.frame_id += 1;
        let mut stats = FrameStats {
            frame_id: self.frame_id,
            workers: self.worker_count(),
            ..FrameStats::default()
        };

        if self.mapping_dirty {
            self.broadcast(&ControlMessage::MappingUpdate(self.spec).encode())?;
            self.master.spec = self.spec;
            self.mapping_dirty = false;
        }
        self.broadcast(&ControlMessage::CameraSync(self.camera).encode())?;
        self.master.camera = self.camera;
        self.broadcast(&ControlMessage::RenderFrame { frame_id: self.frame_id }.encode())?;

        let mut sort_time = Duration::ZERO;
        if self.spec.enabled.size {
            let t = Instant::now();
            let own = self.master.polyline_cells()?;
            self.rank_round(PASS_POLYLINES, own)?;
            sort_time += t.elapsed();
            stats.sort_rounds += 1;
            stats.ranked_points = self.polyline_index.total_points();
            let index = std::mem::take(&mut self.polyline_index);
            let built = self.master.build_sized_meshes(&index);
            self.polyline_index = index;
            built?;
        } else {
            self.master.ensure_uniform_meshes()?;
        }

        let t = Instant::now();
        let own = self.master.mesh_cells()?;
        self.rank_round(PASS_MESH, own)?;
        sort_time += t.elapsed();
        stats.sort_rounds += 1;
        stats.ranked_points += self.mesh_index.total_points();

        let mut builds = self.master.take_builds();
        let index = std::mem::take(&mut self.mesh_index);
        let rendered = self.master.render(&index).map(|tile| self.frame.clone_from(tile));
        self.mesh_index = index;
        rendered?;

        for _ in 0..self.workers.len() {
            match self.recv_from_workers()? {
                ControlMessage::TileUpload {
                    tube_builds, tile, ..
                } => {
                    composite_into(&mut self.frame, &tile)?;
                    builds += tube_builds;
                }
                other => {
                    return Err(EngineError::Protocol(format!(
                        "expected tile upload, got {:?}",
                        other.kind()
                    )))
                }
            }
        }

        stats.tube_builds = builds;
        stats.sort_ms = sort_time.as_secs_f64() * 1e3;
        stats.frame_ms = start.elapsed().as_secs_f64() * 1e3;
        self.counters.frames += 1;
        self.counters.tube_builds += builds as u64;
        debug_assert_eq!(self.mesh_index.total_points(), self.total_vertices * self.config.tube_sides);
        Ok(stats)
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        let bye = ControlMessage::Shutdown.encode();
        for w in &self.workers {
            let _ = w.tx.send(bye.clone());
        }
        for w in &mut self.workers {
            if let Some(j) = w.join.take() {
                let _ = j.join();
            }
        }
    }
}

/// Runs the whole pipeline in the calling thread without partitions or messages.
///
/// Reference path for checking the parallel engine.
pub fn render_sequential(
    dataset: &Dataset,
    camera: Camera,
    spec: MappingSpec,
    config: EngineConfig,
) -> Result<FrameTile, EngineError> {
    spec.validate()?;
    let whole = Partition {
        worker_id: 0,
        polyline_range: 0..dataset.len(),
        vertex_id_offset: 0,
        vertex_count: dataset.total_vertices(),
    };
    let mut w = PartitionWorker::new(0, dataset.polylines().to_vec(), &whole, &config, camera, spec);
    if spec.enabled.size {
        let cells = w.polyline_cells()?;
        let index = crate::ranksort::build_hash_index(&cells)?;
        w.build_sized_meshes(&index)?;
    } else {
        w.ensure_uniform_meshes()?;
    }
    let cells = w.mesh_cells()?;
    let index = crate::ranksort::build_hash_index(&cells)?;
    Ok(w.render(&index)?.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_synthetic_bundle;
    use crate::math::Vec3;
    use crate::stylemap::VisualVariables;

    fn setup(workers: usize, map: &str) -> (Dataset, Camera, MappingSpec, EngineConfig) {
        let ds = generate_synthetic_bundle(40, 12, 5).unwrap();
        let b = ds.bounds();
        let cam = Camera::framing(b.center(), b.diagonal() * 0.5, 30.0, 96, 72).unwrap();
        let spec = MappingSpec {
            enabled: map.parse::<VisualVariables>().unwrap(),
            radius_range: [0.004, 0.02],
            ..MappingSpec::default()
        };
        let config = EngineConfig {
            workers,
            ..EngineConfig::default()
        };
        (ds, cam, spec, config)
    }

    #[test]
    fn single_worker_matches_sequential() {
        let (ds, cam, spec, config) = setup(1, "size,color");
        let mut e = Engine::new(&ds, cam, spec, config).unwrap();
        e.render_frame().unwrap();
        let reference = render_sequential(&ds, cam, spec, config).unwrap();
        assert_eq!(e.frame().color, reference.color);
        assert!(reference.covered() > 0);
    }

    #[test]
    fn four_workers_match_one() {
        for map in ["color", "size,color", "size,value"] {
            let (ds, cam, spec, config) = setup(1, map);
            let mut one = Engine::new(&ds, cam, spec, config).unwrap();
            one.render_frame().unwrap();
            let mut four = Engine::new(&ds, cam, spec, EngineConfig { workers: 4, ..config }).unwrap();
            four.render_frame().unwrap();
            assert_eq!(one.frame().color, four.frame().color, "{map}");
            assert_eq!(one.frame().depth, four.frame().depth, "{map}");
            assert_eq!(one.mesh_index(), four.mesh_index());
        }
    }

    #[test]
    fn sort_rounds_follow_size_mapping() {
        let (ds, cam, spec, config) = setup(3, "size,color");
        let mut e = Engine::new(&ds, cam, spec, config).unwrap();
        assert_eq!(e.render_frame().unwrap().sort_rounds, 2);
        e.set_mapping(MappingSpec {
            enabled: "color".parse().unwrap(),
            ..spec
        })
        .unwrap();
        assert_eq!(e.render_frame().unwrap().sort_rounds, 1);
    }

    #[test]
    fn uniform_meshes_are_built_once() {
        let (ds, cam, spec, config) = setup(3, "color");
        let mut e = Engine::new(&ds, cam, spec, config).unwrap();
        assert_eq!(e.render_frame().unwrap().tube_builds, 3);
        for _ in 0..3 {
            assert_eq!(e.handle_interaction(0.05, 0.02).unwrap().tube_builds, 0);
        }
        // Changing the uniform radius forces one rebuild per worker.
        let mut s = spec;
        s.radius_range = [0.002, 0.004];
        e.set_mapping(s).unwrap();
        assert_eq!(e.render_frame().unwrap().tube_builds, 3);
    }

    #[test]
    fn zero_rotation_keeps_image() {
        let (ds, cam, spec, config) = setup(2, "color,alpha");
        let mut e = Engine::new(&ds, cam, spec, config).unwrap();
        e.render_frame().unwrap();
        let before = e.frame().clone();
        let s = e.handle_interaction(0.0, 0.0).unwrap();
        assert_eq!(s.frame_id, 2);
        assert_eq!(e.frame(), &before);
    }

    #[test]
    fn worker_failure_aborts_frame() {
        let huge = 1.7e308;
        let mut lists: Vec<Vec<Vec3>> = (0..3)
            .map(|i| vec![Vec3::new(i as f64, 0.0, 0.0), Vec3::new(i as f64, 1.0, 0.0)])
            .collect();
        lists.push(vec![Vec3::new(-huge, -huge, -huge), Vec3::new(0.0, 0.0, 0.0)]);
        let ds = Dataset::from_vertex_lists(lists).unwrap();
        let cam = Camera::new(Vec3::new(5.0, 5.0, 5.0), Vec3::ZERO, Vec3::Y, 30.0, 16, 16).unwrap();
        let config = EngineConfig {
            workers: 2,
            ..EngineConfig::default()
        };
        let mut e = Engine::new(&ds, cam, MappingSpec::default(), config).unwrap();
        let err = e.render_frame().unwrap_err();
        assert!(matches!(err, EngineError::WorkerFailed { worker: 1, .. }), "{err}");
        assert!(matches!(e.render_frame(), Err(EngineError::Poisoned)));
    }
}
