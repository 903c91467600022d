//! Python bindings: images, extraction, matching and the two simulators.

use orbfront::extractor::{self, ArithMode, Extraction};
use orbfront::imaging::ImagingError;
use orbfront::matcher::{self, DepthRange, MatcherConfig, SearchStrip, StereoCalib};
use orbfront::pipeline::{self, StageLatency};
use orbfront::sync::{self, TriggerConfig};
use orbfront::{corpus, Descriptor, ExtractorConfig};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn imaging_err(e: ImagingError) -> PyErr {
    match e {
        ImagingError::Io(io) => PyIOError::new_err(io.to_string()),
        other => value_err(other),
    }
}

#[pyclass(name = "GrayImage", module = "pyorbfront", from_py_object)]
#[derive(Clone)]
pub struct PyGrayImage {
    inner: orbfront::GrayImage,
}

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: usize, height: usize, data: &[u8]) -> PyResult<Self> {
        let inner = orbfront::GrayImage::from_raw(width, height, data.to_vec()).map_err(imaging_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            inner: orbfront::GrayImage::filled(width, height, value),
        }
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<u8> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(value_err(format!("({x}, {y}) outside image")));
        }
        Ok(self.inner.get(x, y))
    }

    fn data<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.data())
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.inner.to_pgm_bytes().map_err(imaging_err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[staticmethod]
    fn from_pgm(bytes: &[u8]) -> PyResult<Self> {
        let inner = orbfront::GrayImage::from_pgm_bytes(bytes).map_err(imaging_err)?;
        Ok(Self { inner })
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.inner.width(), self.inner.height())
    }
}

#[pyfunction]
fn load_pgm(path: &str) -> PyResult<PyGrayImage> {
    let inner = orbfront::load_pgm(path).map_err(imaging_err)?;
    Ok(PyGrayImage { inner })
}

#[pyfunction]
fn save_pgm(img: &PyGrayImage, path: &str) -> PyResult<()> {
    orbfront::save_pgm(&img.inner, path).map_err(imaging_err)
}

#[pyfunction]
#[pyo3(signature = (img, scale_factor = 1.2))]
fn build_pyramid(img: &PyGrayImage, scale_factor: f64) -> PyResult<Vec<PyGrayImage>> {
    let pyr = orbfront::build_pyramid(&img.inner, scale_factor).map_err(imaging_err)?;
    Ok(pyr
        .levels()
        .iter()
        .map(|l| PyGrayImage { inner: l.clone() })
        .collect())
}

/// Synthetic left/right pair with constant disparity `shift`.
#[pyfunction]
#[pyo3(signature = (width = 640, height = 480, shift = 12, seed = 2021))]
fn stereo_pair(width: usize, height: usize, shift: u32, seed: u64) -> (PyGrayImage, PyGrayImage) {
    let (l, r) = corpus::stereo_pair(width, height, shift, seed);
    (PyGrayImage { inner: l }, PyGrayImage { inner: r })
}

#[pyclass(name = "Feature", module = "pyorbfront", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyFeature {
    inner: extractor::Feature,
}

#[pymethods]
impl PyFeature {
    #[getter]
    fn x(&self) -> u32 {
        self.inner.point.x
    }
    #[getter]
    fn y(&self) -> u32 {
        self.inner.point.y
    }
    #[getter]
    fn level(&self) -> u8 {
        self.inner.point.level
    }
    #[getter]
    fn score(&self) -> u32 {
        self.inner.point.score
    }
    #[getter]
    fn theta_q(&self) -> u8 {
        self.inner.point.theta_q
    }
    #[getter]
    fn theta_f(&self) -> Option<f64> {
        self.inner.point.theta_f
    }
    #[getter]
    fn degenerate(&self) -> bool {
        self.inner.point.degenerate
    }
    #[getter]
    fn descriptor<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.descriptor.as_bytes())
    }

    fn __repr__(&self) -> String {
        let p = &self.inner.point;
        format!("Feature(x={}, y={}, level={}, theta_q={})", p.x, p.y, p.level, p.theta_q)
    }
}

#[pyclass(name = "Extraction", module = "pyorbfront", frozen, skip_from_py_object)]
pub struct PyExtraction {
    inner: Extraction,
}

#[pymethods]
impl PyExtraction {
    #[getter]
    fn features(&self) -> Vec<PyFeature> {
        self.inner.features.iter().map(|&inner| PyFeature { inner }).collect()
    }

    #[getter]
    fn level_scales(&self) -> Vec<f64> {
        self.inner.level_scales.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.features.len()
    }

    /// Descriptor dump in the 48-byte-per-feature binary layout.
    fn dump<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let mut buf = Vec::new();
        extractor::write_descriptor_dump(&self.inner.features, &self.inner.level_scales, &mut buf)
            .map_err(value_err)?;
        Ok(PyBytes::new(py, &buf))
    }
}

#[pyfunction]
#[pyo3(signature = (img, fast_threshold = 20, max_features_per_level = 600, arith_mode = "float", scale_factor = 1.2))]
fn extract(
    py: Python<'_>,
    img: &PyGrayImage,
    fast_threshold: u8,
    max_features_per_level: usize,
    arith_mode: &str,
    scale_factor: f64,
) -> PyResult<PyExtraction> {
    let cfg = ExtractorConfig {
        fast_threshold,
        max_features_per_level,
        arith_mode: arith_mode.parse::<ArithMode>().map_err(value_err)?,
        scale_factor,
    };
    let image = img.inner.clone();
    let inner = py
        .detach(move || extractor::extract_image(&image, &cfg))
        .map_err(value_err)?;
    Ok(PyExtraction { inner })
}

fn descriptor(bytes: &[u8]) -> PyResult<Descriptor> {
    let arr: [u8; 32] = bytes
        .try_into()
        .map_err(|_| value_err(format!("descriptor must be 32 bytes, got {}", bytes.len())))?;
    Ok(Descriptor(arr))
}

#[pyfunction]
fn hamming(a: &[u8], b: &[u8]) -> PyResult<u32> {
    Ok(matcher::hamming_distance(&descriptor(a)?, &descriptor(b)?))
}

#[pyclass(name = "MatchPair", module = "pyorbfront", frozen, get_all, skip_from_py_object)]
pub struct PyMatchPair {
    level: u8,
    xl: u32,
    yl: u32,
    xr: u32,
    yr: u32,
    hamming: u32,
    disparity: f64,
    depth: Option<f64>,
    sad_min: u32,
}

#[pymethods]
impl PyMatchPair {
    fn __repr__(&self) -> String {
        format!(
            "MatchPair(level={}, xl={}, yl={}, xr={}, disparity={:.4}, depth={:?})",
            self.level, self.xl, self.yl, self.xr, self.disparity, self.depth
        )
    }
}

#[pyfunction]
#[pyo3(signature = (
    left, right, fx = None, baseline = None, row_tolerance = 2, min_disparity = 1,
    max_disparity = 96, max_hamming = 64, sad_slide = 5,
))]
#[allow(clippy::too_many_arguments)]
fn match_stereo(
    py: Python<'_>,
    left: &PyExtraction,
    right: &PyExtraction,
    fx: Option<f64>,
    baseline: Option<f64>,
    row_tolerance: u32,
    min_disparity: u32,
    max_disparity: u32,
    max_hamming: u32,
    sad_slide: u32,
) -> PyResult<Vec<PyMatchPair>> {
    let calib = match (fx, baseline) {
        (Some(f), Some(b)) => Some(StereoCalib::new(f, b).map_err(value_err)?),
        (None, None) => None,
        _ => return Err(value_err("fx and baseline must be given together")),
    };
    let strip = SearchStrip {
        row_tolerance,
        min_disparity,
        max_disparity,
    };
    let cfg = MatcherConfig { max_hamming, sad_slide };
    let out = py
        .detach(|| matcher::match_stereo(&left.inner, &right.inner, &strip, calib.as_ref(), &cfg))
        .map_err(value_err)?;
    Ok(out
        .pairs
        .into_iter()
        .map(|p| PyMatchPair {
            level: p.left.level,
            xl: p.left.x,
            yl: p.left.y,
            xr: p.right.x,
            yr: p.right.y,
            hamming: p.hamming,
            disparity: p.disparity,
            depth: p.depth,
            sad_min: p.sad_min,
        })
        .collect())
}

/// Count of depths that are positive and inside the open range.
#[pyfunction]
#[pyo3(signature = (pairs, depth_min = 0.1, depth_max = 50.0))]
fn effective_depths(pairs: Vec<PyRef<'_, PyMatchPair>>, depth_min: f64, depth_max: f64) -> usize {
    let range = DepthRange {
        min: depth_min,
        max: depth_max,
    };
    pairs
        .iter()
        .filter(|p| p.disparity > 0.0 && p.depth.is_some_and(|d| range.contains(d)))
        .count()
}

type TraceRow = (u8, u32, String, f64, f64);
type StreamRow = (String, u64, u64, u64);
type BundleRow = (u64, Vec<(String, u64)>);

/// Trace events as `(chain, frame, stage, start_ms, end_ms)` tuples.
#[pyfunction]
#[pyo3(signature = (t_fe_ms, t_fm_ms, frames = 100, chains = 1))]
fn pipeline_simulate(t_fe_ms: f64, t_fm_ms: f64, frames: usize, chains: usize) -> PyResult<Vec<TraceRow>> {
    let lat = StageLatency::from_ms(t_fe_ms, t_fm_ms).map_err(value_err)?;
    let trace = pipeline::simulate(lat, frames, chains).map_err(value_err)?;
    Ok(trace
        .events
        .iter()
        .map(|e| (e.chain, e.frame, e.stage.to_string(), e.start_ns as f64 / 1e6, e.end_ns as f64 / 1e6))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (t_fe_ms, t_fm_ms, frames = 100, chains = 1))]
fn pipeline_throughput(t_fe_ms: f64, t_fm_ms: f64, frames: usize, chains: usize) -> PyResult<f64> {
    let lat = StageLatency::from_ms(t_fe_ms, t_fm_ms).map_err(value_err)?;
    let trace = pipeline::simulate(lat, frames, chains).map_err(value_err)?;
    pipeline::throughput(&trace).map_err(value_err)
}


fn trigger(cam_rate: u32, imu_rate: u32) -> PyResult<TriggerConfig> {
    TriggerConfig::new(cam_rate, imu_rate).map_err(value_err)
}

/// Samples as `(sensor, tag, capture_ns, arrival_ns)` in arrival order.
#[pyfunction]
#[pyo3(signature = (duration_s = 1.0, jitter_ns = 0, seed = 0, cam_rate = 30, imu_rate = 120))]
fn generate_stream(duration_s: f64, jitter_ns: u64, seed: u64, cam_rate: u32, imu_rate: u32) -> PyResult<Vec<StreamRow>> {
    let cfg = trigger(cam_rate, imu_rate)?;
    Ok(sync::generate_stream(&cfg, duration_s, jitter_ns, seed)
        .into_iter()
        .map(|s| (s.sensor.to_string(), s.tag, s.capture_ns, s.arrival_ns))
        .collect())
}

fn parse_stream(rows: &[StreamRow]) -> PyResult<Vec<sync::TaggedSample>> {
    rows.iter()
        .map(|(sensor, tag, capture_ns, arrival_ns)| {
            Ok(sync::TaggedSample {
                sensor: sensor.parse().map_err(value_err)?,
                tag: *tag,
                capture_ns: *capture_ns,
                arrival_ns: *arrival_ns,
            })
        })
        .collect()
}

/// Groups a stream by tag. Returns complete bundles as
/// `(tag, [(sensor, tag), ...])` plus the number of incomplete ones.
#[pyfunction]
#[pyo3(signature = (stream, cam_rate = 30, imu_rate = 120))]
fn assemble_bundles(stream: Vec<StreamRow>, cam_rate: u32, imu_rate: u32) -> PyResult<(Vec<BundleRow>, usize)> {
    let cfg = trigger(cam_rate, imu_rate)?;
    let asm = sync::assemble_bundles(&cfg, &parse_stream(&stream)?).map_err(value_err)?;
    let bundles = asm
        .bundles
        .iter()
        .map(|b| {
            let members = b.frames.iter().chain(&b.imu).map(|s| (s.sensor.to_string(), s.tag)).collect();
            (b.tag, members)
        })
        .collect();
    Ok((bundles, asm.incomplete.len()))
}

/// Number of samples the arrival-time baseline puts in the wrong bundle.
#[pyfunction]
#[pyo3(signature = (stream, cam_rate = 30, imu_rate = 120))]
fn naive_misassociations(stream: Vec<StreamRow>, cam_rate: u32, imu_rate: u32) -> PyResult<usize> {
    let cfg = trigger(cam_rate, imu_rate)?;
    Ok(sync::naive_associate(&cfg, &parse_stream(&stream)?).len())
}

#[pymodule]
fn pyorbfront(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyFeature>()?;
    m.add_class::<PyExtraction>()?;
    m.add_class::<PyMatchPair>()?;
    m.add_function(wrap_pyfunction!(load_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(save_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(build_pyramid, m)?)?;
    m.add_function(wrap_pyfunction!(stereo_pair, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(hamming, m)?)?;
    m.add_function(wrap_pyfunction!(match_stereo, m)?)?;
    m.add_function(wrap_pyfunction!(effective_depths, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline_simulate, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline_throughput, m)?)?;
    m.add_function(wrap_pyfunction!(generate_stream, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_bundles, m)?)?;
    m.add_function(wrap_pyfunction!(naive_misassociations, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_length_is_checked() {
        assert!(descriptor(&[0u8; 32]).is_ok());
        assert!(descriptor(&[0u8; 31]).is_err());
    }

    #[test]
    fn trigger_rejects_non_integer_ratio() {
        assert!(trigger(30, 120).is_ok());
        assert!(trigger(30, 100).is_err());
    }
}
