//! Python bindings for `rodskel_core`.
//!
//! A colony is passed as a list of `Skeleton` objects; distance models are
//! named by the strings `"simplified"` and `"oriented"`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rodskel_core::energy::total_energy;
use rodskel_core::geometry::{dilation_outline, distance_to_skeleton};
use rodskel_core::gradients::grad_total;
use rodskel_core::initializer::build_initial_colony;
use rodskel_core::measurements::{localize, measure};
use rodskel_core::optimizer::optimize_eroded;
use rodskel_core::synthesis::{add_noise, evaluate, render_synthetic, RenderSettings};
use rodskel_core::{
    io, Colony, DistanceModel, EnergyParams as CoreParams, Error, ImageGrid,
    OptimizeOptions as CoreOptions, Point2, Skeleton as CoreSkeleton,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn model(name: &str) -> PyResult<DistanceModel> {
    name.parse().map_err(to_py)
}

/// Polyline with per-node radii.
#[pyclass(name = "Skeleton", module = "rodskel", skip_from_py_object)]
#[derive(Clone)]
struct Skeleton {
    inner: CoreSkeleton,
}

#[pymethods]
impl Skeleton {
    /// `nodes` is a sequence of `(x, y, r)` triples.
    #[new]
    fn new(nodes: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreSkeleton::from_xyr(&nodes).map_err(to_py)?,
        })
    }

    fn nodes(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .nodes()
            .iter()
            .map(|n| (n.position.x, n.position.y, n.radius))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn polyline_length(&self) -> f64 {
        self.inner.polyline_length()
    }

    /// Length, width, perimeter and orientation as a dict.
    #[pyo3(signature = (model_name = "simplified"))]
    fn measure<'py>(&self, py: Python<'py>, model_name: &str) -> PyResult<Bound<'py, PyDict>> {
        let m = measure(&self.inner, model(model_name)?).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("length", m.length)?;
        d.set_item("width", m.width)?;
        d.set_item("perimeter", m.perimeter)?;
        d.set_item("orientation", m.orientation)?;
        Ok(d)
    }

    /// `(x_norm, y_px)` of a point in the cell-centered frame.
    fn localize(&self, x: f64, y: f64) -> (f64, f64) {
        let c = localize(&self.inner, Point2::new(x, y));
        (c.x_norm, c.y_px)
    }

    /// Closed outline sampled at about `step` pixels.
    #[pyo3(signature = (step = 0.5, model_name = "simplified"))]
    fn outline(&self, step: f64, model_name: &str) -> PyResult<Vec<(f64, f64)>> {
        let c = dilation_outline(&self.inner, model(model_name)?, step).map_err(to_py)?;
        Ok(c.points.iter().map(|p| (p.x, p.y)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Skeleton({:?})", self.nodes())
    }
}

/// Grayscale image with intensities in `[0, 1]`, stored row-major.
#[pyclass(name = "Image", module = "rodskel", skip_from_py_object)]
#[derive(Clone)]
struct Image {
    inner: ImageGrid,
}

#[pymethods]
impl Image {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ImageGrid::new(width, height, data).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::load_image(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::save_image(path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.width() || j >= self.inner.height() {
            return Err(PyValueError::new_err("pixel index out of range"));
        }
        Ok(self.inner.get(i, j))
    }
}

/// Energy weights and settings; every field is a read/write attribute.
#[pyclass(name = "EnergyParams", module = "rodskel", skip_from_py_object)]
#[derive(Clone)]
struct EnergyParams {
    inner: CoreParams,
}

#[pymethods]
impl EnergyParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = Self {
            inner: CoreParams::default(),
        };
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                match key.as_str() {
                    "model" => p.inner.model = model(&v.extract::<String>()?)?,
                    "a" => p.inner.a = v.extract()?,
                    "b" => p.inner.b = v.extract()?,
                    "c" => p.inner.c = v.extract()?,
                    "d" => p.inner.d = v.extract()?,
                    "rho" => p.inner.rho = v.extract()?,
                    "delta" => p.inner.delta = v.extract()?,
                    "h" => p.inner.h = v.extract()?,
                    "alpha_in" => p.inner.alpha_in = v.extract()?,
                    "contrast_exponent" => p.inner.contrast_exponent = v.extract()?,
                    other => {
                        return Err(PyValueError::new_err(format!(
                            "unknown parameter {other:?}"
                        )))
                    }
                }
            }
        }
        p.inner.validate().map_err(to_py)?;
        Ok(p)
    }

    #[getter]
    fn model(&self) -> String {
        self.inner.model.to_string()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    fn effective_delta(&self) -> f64 {
        self.inner.effective_delta()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn colony(cells: &[PyRef<'_, Skeleton>]) -> Colony {
    Colony::new(cells.iter().map(|s| s.inner.clone()).collect())
}

fn wrap(colony: Colony) -> Vec<Skeleton> {
    colony
        .into_cells()
        .into_iter()
        .map(|inner| Skeleton { inner })
        .collect()
}

/// `(segment_index, lambda, distance, radius)` of the closest segment.
#[pyfunction]
#[pyo3(signature = (x, y, skeleton, model_name = "simplified"))]
fn project(
    x: f64,
    y: f64,
    skeleton: PyRef<'_, Skeleton>,
    model_name: &str,
) -> PyResult<(usize, f64, f64, f64)> {
    let q = distance_to_skeleton(Point2::new(x, y), &skeleton.inner, model(model_name)?);
    Ok((
        q.segment_index,
        q.lambda_clamped,
        q.distance,
        q.interp_radius,
    ))
}

/// Grand total and per-cell term values.
#[pyfunction]
fn energy<'py>(
    py: Python<'py>,
    image: PyRef<'_, Image>,
    cells: Vec<PyRef<'_, Skeleton>>,
    params: PyRef<'_, EnergyParams>,
) -> PyResult<Bound<'py, PyDict>> {
    let e = total_energy(&image.inner, &colony(&cells), &params.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("total", e.total)?;
    let per_cell: Vec<Bound<'py, PyDict>> = e
        .cells
        .iter()
        .map(|b| {
            let c = PyDict::new(py);
            c.set_item("e_in", b.e_in)?;
            c.set_item("e_out", b.e_out)?;
            c.set_item("e_data", b.e_data)?;
            c.set_item("e_curv", b.e_curv)?;
            c.set_item("e_homog", b.e_homog)?;
            c.set_item("e_repul", b.e_repul)?;
            c.set_item("total", b.total)?;
            Ok(c)
        })
        .collect::<PyResult<_>>()?;
    d.set_item("cells", per_cell)?;
    Ok(d)
}

/// Per-cell lists of `(dE/dx, dE/dy, dE/dr)`.
#[pyfunction]
fn gradient(
    image: PyRef<'_, Image>,
    cells: Vec<PyRef<'_, Skeleton>>,
    params: PyRef<'_, EnergyParams>,
) -> PyResult<Vec<Vec<(f64, f64, f64)>>> {
    let g = grad_total(&image.inner, &colony(&cells), &params.inner).map_err(to_py)?;
    Ok(g.cells
        .iter()
        .map(|c| c.iter().map(|n| (n.dx, n.dy, n.dr)).collect())
        .collect())
}

/// Fits `cells` to `image`; returns the fitted cells and the energy trace.
#[pyfunction]
#[pyo3(signature = (image, cells, params, max_iters = 5000, initial_step = 0.5, min_rel_decrease = 1e-6))]
fn optimize(
    image: PyRef<'_, Image>,
    cells: Vec<PyRef<'_, Skeleton>>,
    params: PyRef<'_, EnergyParams>,
    max_iters: usize,
    initial_step: f64,
    min_rel_decrease: f64,
) -> PyResult<(Vec<Skeleton>, Vec<f64>)> {
    let opts = CoreOptions {
        max_iters,
        initial_step,
        min_rel_decrease,
        ..CoreOptions::default()
    };
    let (fitted, trace) =
        optimize_eroded(&image.inner, &colony(&cells), &params.inner, &opts).map_err(to_py)?;
    let mut energies = vec![trace.initial_energy];
    energies.extend(trace.records.iter().map(|r| r.energy.total));
    Ok((wrap(fitted), energies))
}

/// Synthetic image of dark cells on a bright background, with optional noise
/// (`sigma` as a fraction of the contrast).
#[pyfunction]
#[pyo3(signature = (cells, width, height, sigma = 0.0, seed = 0, softness = 0.08, foreground = 0.15, background = 0.85))]
#[allow(clippy::too_many_arguments)]
fn render(
    cells: Vec<PyRef<'_, Skeleton>>,
    width: usize,
    height: usize,
    sigma: f64,
    seed: u64,
    softness: f64,
    foreground: f64,
    background: f64,
) -> PyResult<Image> {
    let settings = RenderSettings {
        width,
        height,
        edge_softness: softness,
        foreground,
        background,
    };
    let clean = render_synthetic(&colony(&cells), &settings).map_err(to_py)?;
    let inner = add_noise(&clean, sigma * settings.contrast(), seed).map_err(to_py)?;
    Ok(Image { inner })
}

/// `(hausdorff, mean_symmetric_distance)` between matched outlines.
#[pyfunction]
#[pyo3(signature = (gt, pred, model_name = "simplified"))]
fn compare(
    gt: Vec<PyRef<'_, Skeleton>>,
    pred: Vec<PyRef<'_, Skeleton>>,
    model_name: &str,
) -> PyResult<(f64, f64)> {
    let r = evaluate(&colony(&gt), &colony(&pred), model(model_name)?).map_err(to_py)?;
    Ok((r.hausdorff, r.mean_symmetric_distance))
}

/// Initial skeletons from a mask image (foreground: intensity >= threshold).
#[pyfunction]
#[pyo3(signature = (mask, threshold = 0.5, spacing = 8.0, angle_tol = 15.0))]
fn initialize(
    mask: PyRef<'_, Image>,
    threshold: f64,
    spacing: f64,
    angle_tol: f64,
) -> PyResult<Vec<Skeleton>> {
    let bits = mask.inner.threshold(threshold);
    Ok(wrap(
        build_initial_colony(&bits, spacing, angle_tol).map_err(to_py)?,
    ))
}

#[pyfunction]
fn load_skeletons(path: &str) -> PyResult<Vec<Skeleton>> {
    Ok(wrap(io::load_skeletons(path).map_err(to_py)?))
}

#[pyfunction]
fn save_skeletons(path: &str, cells: Vec<PyRef<'_, Skeleton>>) -> PyResult<()> {
    io::save_skeletons(path, &colony(&cells)).map_err(to_py)
}

#[pymodule]
fn rodskel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Skeleton>()?;
    m.add_class::<Image>()?;
    m.add_class::<EnergyParams>()?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(initialize, m)?)?;
    m.add_function(wrap_pyfunction!(load_skeletons, m)?)?;
    m.add_function(wrap_pyfunction!(save_skeletons, m)?)?;
    Ok(())
}
