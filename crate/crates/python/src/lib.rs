//! Python bindings: datasets, cameras, mapping specs, the parallel engine and a few core operations.

use std::sync::Mutex;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use depthtube::camera::{Camera, DEFAULT_FOV_DEG};
use depthtube::geometry::{self, Dataset};
use depthtube::math::Vec3;
use depthtube::ranksort::{build_hash_index, local_depth_sort, DepthCell, MergeBuffer};
use depthtube::runtime::export::{encode_depth, encode_ppm};
use depthtube::runtime::partition::partition_bounds;
use depthtube::runtime::{Engine, EngineConfig, FrameStats};
use depthtube::stylemap::{self, MappingSpec, Orientation, VisualVariables};
use depthtube::tubegen::{tessellate_tube, DEFAULT_SIDES};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::from_array(a)
}

#[pyclass(name = "Dataset", module = "pydepthtube", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Builds a dataset from a list of polylines, each a list of (x, y, z).
    #[new]
    fn new(polylines: Vec<Vec<[f64; 3]>>) -> PyResult<Self> {
        let lists = polylines
            .into_iter()
            .map(|p| p.into_iter().map(v3).collect())
            .collect();
        Ok(PyDataset {
            inner: Dataset::from_vertex_lists(lists).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn synthetic(count: usize, vertices_per: usize, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: geometry::generate_synthetic_bundle(count, vertices_per, seed).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: geometry::parse_dataset(text).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: geometry::load_dataset(path).map_err(|e| PyIOError::new_err(e.to_string()))?,
        })
    }

    fn to_text(&self) -> String {
        geometry::format_dataset(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn total_vertices(&self) -> usize {
        self.inner.total_vertices()
    }

    /// ((min x, y, z), (max x, y, z))
    #[getter]
    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let b = self.inner.bounds();
        (b.min.to_array(), b.max.to_array())
    }

    fn polyline(&self, index: usize) -> PyResult<Vec<[f64; 3]>> {
        let p = self
            .inner
            .polylines()
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("no polyline {index}")))?;
        Ok(p.vertices().iter().map(|v| v.to_array()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} polylines, {} vertices)",
            self.inner.len(),
            self.inner.total_vertices()
        )
    }
}

#[pyclass(name = "Camera", module = "pydepthtube", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCamera {
    inner: Camera,
}

#[pymethods]
impl PyCamera {
    #[new]
    #[pyo3(signature = (position, focal, up, fov_y_deg = DEFAULT_FOV_DEG, width = 800, height = 600))]
    fn new(position: [f64; 3], focal: [f64; 3], up: [f64; 3], fov_y_deg: f64, width: u32, height: u32) -> PyResult<Self> {
        Ok(PyCamera {
            inner: Camera::new(v3(position), v3(focal), v3(up), fov_y_deg, width, height).map_err(value_err)?,
        })
    }

    /// Looks at the dataset's bounding sphere from +Z.
    #[staticmethod]
    #[pyo3(signature = (dataset, width = 800, height = 600, fov_y_deg = DEFAULT_FOV_DEG))]
    fn framing(dataset: &PyDataset, width: u32, height: u32, fov_y_deg: f64) -> PyResult<Self> {
        let b = dataset.inner.bounds();
        Ok(PyCamera {
            inner: Camera::framing(b.center(), b.diagonal() * 0.5, fov_y_deg, width, height).map_err(value_err)?,
        })
    }

    #[getter]
    fn position(&self) -> [f64; 3] {
        self.inner.position().to_array()
    }

    #[getter]
    fn focal(&self) -> [f64; 3] {
        self.inner.focal().to_array()
    }

    #[getter]
    fn up(&self) -> [f64; 3] {
        self.inner.up().to_array()
    }

    #[getter]
    fn viewport(&self) -> (u32, u32) {
        self.inner.viewport()
    }

    fn depth(&self, point: [f64; 3]) -> f64 {
        self.inner.vertex_depth(v3(point))
    }

    /// Screen (x, y, depth), or None behind the camera.
    fn project(&self, point: [f64; 3]) -> Option<(f64, f64, f64)> {
        self.inner
            .project_to_screen(v3(point))
            .map(|p| (p.x, p.y, p.depth))
    }

    fn trackball_rotate(&self, dx: f64, dy: f64) -> Self {
        PyCamera {
            inner: self.inner.trackball_rotate(dx, dy),
        }
    }

    fn roll(&self, angle: f64) -> Self {
        PyCamera {
            inner: self.inner.roll(angle),
        }
    }

    fn __repr__(&self) -> String {
        let (w, h) = self.inner.viewport();
        format!(
            "Camera(position={:?}, focal={:?}, {}x{})",
            self.position(),
            self.focal(),
            w,
            h
        )
    }
}

#[pyclass(name = "MappingSpec", module = "pydepthtube", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMappingSpec {
    inner: MappingSpec,
}

#[pymethods]
impl PyMappingSpec {
    /// Every argument is optional; omitted ones keep their defaults.
    #[new]
    #[pyo3(signature = (map = None, radius = None, near_color = None, far_color = None, value_range = None, alpha_range = None, orientation = None))]
    fn new(
        map: Option<&str>,
        radius: Option<[f64; 2]>,
        near_color: Option<[f64; 3]>,
        far_color: Option<[f64; 3]>,
        value_range: Option<[f64; 2]>,
        alpha_range: Option<[f64; 2]>,
        orientation: Option<&str>,
    ) -> PyResult<Self> {
        let mut s = MappingSpec::default();
        if let Some(m) = map {
            s.enabled = m.parse::<VisualVariables>().map_err(value_err)?;
        }
        if let Some(r) = radius {
            s.radius_range = r;
        }
        if let Some(c) = near_color {
            s.near_color = c;
        }
        if let Some(c) = far_color {
            s.far_color = c;
        }
        if let Some(r) = value_range {
            s.value_range = r;
        }
        if let Some(r) = alpha_range {
            s.alpha_range = r;
        }
        if let Some(o) = orientation {
            s.orientation = o.parse::<Orientation>().map_err(value_err)?;
        }
        s.validate().map_err(value_err)?;
        Ok(PyMappingSpec { inner: s })
    }

    #[getter]
    fn map(&self) -> String {
        self.inner.enabled.to_string()
    }

    #[getter]
    fn radius(&self) -> [f64; 2] {
        self.inner.radius_range
    }

    #[getter]
    fn orientation(&self) -> String {
        self.inner.orientation.to_string()
    }

    #[getter]
    fn mapping_mode(&self) -> &'static str {
        self.inner.mapping_mode()
    }

    /// (radius, (r, g, b), alpha) for a vertex of the given rank.
    #[pyo3(signature = (rank, rank_max, base_color = [0.85, 0.85, 0.85]))]
    fn style(&self, rank: u32, rank_max: u32, base_color: [f64; 3]) -> PyResult<(f64, [f64; 3], f64)> {
        if rank > rank_max {
            return Err(PyValueError::new_err("rank exceeds rank_max"));
        }
        let s = stylemap::style_vertex(rank, rank_max, &self.inner, base_color);
        Ok((s.radius, s.rgb, s.alpha))
    }

    fn __repr__(&self) -> String {
        format!(
            "MappingSpec(map={:?}, orientation={:?})",
            self.inner.enabled.to_string(),
            self.inner.orientation.to_string()
        )
    }
}

fn stats_dict<'py>(py: Python<'py>, s: &FrameStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("frame_id", s.frame_id)?;
    d.set_item("frame_ms", s.frame_ms)?;
    d.set_item("sort_ms", s.sort_ms)?;
    d.set_item("sort_rounds", s.sort_rounds)?;
    d.set_item("workers", s.workers)?;
    d.set_item("tube_builds", s.tube_builds)?;
    Ok(d)
}

/// The master/worker renderer. Worker threads live as long as this object.
#[pyclass(name = "Engine", module = "pydepthtube")]
struct PyEngine {
    inner: Mutex<Engine>,
}

impl PyEngine {
    fn with<T>(&self, f: impl FnOnce(&mut Engine) -> PyResult<T>) -> PyResult<T> {
        let mut guard = self
            .inner
            .lock()
            .map_err(|_| PyRuntimeError::new_err("engine lock poisoned"))?;
        f(&mut guard)
    }
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (dataset, camera, spec = None, workers = 1, tube_sides = DEFAULT_SIDES))]
    fn new(
        dataset: &PyDataset,
        camera: &PyCamera,
        spec: Option<&PyMappingSpec>,
        workers: usize,
        tube_sides: usize,
    ) -> PyResult<Self> {
        let spec = spec.map(|s| s.inner).unwrap_or_default();
        let config = EngineConfig {
            workers,
            tube_sides,
            ..EngineConfig::default()
        };
        let engine = Engine::new(&dataset.inner, camera.inner, spec, config).map_err(value_err)?;
        Ok(PyEngine {
            inner: Mutex::new(engine),
        })
    }

    /// Renders a frame and returns its stats as a dict.
    fn render_frame<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let stats = self.with(|e| e.render_frame().map_err(runtime_err))?;
        stats_dict(py, &stats)
    }

    fn handle_interaction<'py>(&self, py: Python<'py>, dx: f64, dy: f64) -> PyResult<Bound<'py, PyDict>> {
        let stats = self.with(|e| e.handle_interaction(dx, dy).map_err(runtime_err))?;
        stats_dict(py, &stats)
    }

    fn set_mapping(&self, spec: &PyMappingSpec) -> PyResult<()> {
        self.with(|e| e.set_mapping(spec.inner).map_err(value_err))
    }

    fn set_camera(&self, camera: &PyCamera) -> PyResult<()> {
        self.with(|e| {
            e.set_camera(camera.inner);
            Ok(())
        })
    }

    #[getter]
    fn camera(&self) -> PyResult<PyCamera> {
        self.with(|e| Ok(PyCamera { inner: *e.camera() }))
    }

    #[getter]
    fn workers(&self) -> PyResult<usize> {
        self.with(|e| Ok(e.worker_count()))
    }

    /// (width, height) of the last frame.
    #[getter]
    fn size(&self) -> PyResult<(u32, u32)> {
        self.with(|e| Ok((e.frame().width(), e.frame().height())))
    }

    fn rgb<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.with(|e| Ok(e.frame().rgb_bytes()))?;
        Ok(PyBytes::new(py, &bytes))
    }

    fn rgba<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.with(|e| Ok(e.frame().rgba_bytes()))?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// Binary PPM of the last frame.
    fn ppm<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.with(|e| Ok(encode_ppm(e.frame())))?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// `DPTH` depth dump of the last frame.
    fn depth_dump<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.with(|e| Ok(encode_depth(e.frame())))?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// Global ranks of tube-mesh vertices from the last frame.
    fn mesh_ranks(&self) -> PyResult<Vec<u32>> {
        self.with(|e| Ok(e.mesh_index().ranks().to_vec()))
    }

    fn counters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.with(|e| Ok(e.counters()))?;
        let d = PyDict::new(py);
        d.set_item("frames", c.frames)?;
        d.set_item("sort_rounds", c.sort_rounds)?;
        d.set_item("merges", c.merges)?;
        d.set_item("index_broadcasts", c.index_broadcasts)?;
        d.set_item("tube_builds", c.tube_builds)?;
        Ok(d)
    }
}

#[pyfunction]
fn linear_map(rank: u32, rank_max: u32, v_min: f64, v_max: f64) -> PyResult<f64> {
    if rank > rank_max {
        return Err(PyValueError::new_err("rank exceeds rank_max"));
    }
    Ok(stylemap::linear_map(rank, rank_max, v_min, v_max))
}

/// Global depth ranks of `depths`, computed by sorting `workers` blocks and merging them.
#[pyfunction]
#[pyo3(signature = (depths, workers = 1))]
fn depth_ranks(depths: Vec<f64>, workers: usize) -> PyResult<Vec<u32>> {
    if depths.len() > u32::MAX as usize {
        return Err(PyValueError::new_err("too many depths"));
    }
    let mut merge = MergeBuffer::new();
    for r in partition_bounds(depths.len(), workers).map_err(value_err)? {
        let cells = r.map(|i| DepthCell::new(depths[i], i as u32)).collect();
        let sorted = local_depth_sort(cells).map_err(value_err)?;
        merge.absorb(&sorted).map_err(value_err)?;
    }
    Ok(build_hash_index(merge.merged()).map_err(value_err)?.into_ranks())
}

/// (vertex count, triangle count) of the tube swept around `points`.
#[pyfunction]
#[pyo3(signature = (points, radius, sides = DEFAULT_SIDES))]
fn tube_counts(points: Vec<[f64; 3]>, radius: f64, sides: usize) -> PyResult<(usize, usize)> {
    let line = geometry::Polyline::new(0, points.into_iter().map(v3).collect()).map_err(value_err)?;
    let radii = vec![radius; line.len()];
    let mesh = tessellate_tube(&line, &radii, sides, 0).map_err(value_err)?;
    Ok((mesh.vertex_count(), mesh.triangle_count()))
}

#[pymodule]
fn pydepthtube(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyCamera>()?;
    m.add_class::<PyMappingSpec>()?;
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(linear_map, m)?)?;
    m.add_function(wrap_pyfunction!(depth_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(tube_counts, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
