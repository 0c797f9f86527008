//! Python bindings: the validation wing, the panel kernels, the co-simulation
//! step ladder, the kite mesh and trim, and whole scenarios from TOML.

use std::path::PathBuf;

use nalgebra::Point3;
use panelflow::cosim::{self, CosimConfig};
use panelflow::geometry::naca4_airfoil;
use panelflow::io::PolyData;
use panelflow::kernels::{self, panel_frame, Influence};
use panelflow::kite::{self, KiteConfig};
use panelflow::scenario::{self, ScenarioConfig, ScenarioKind, WingGeometry};
use panelflow::steady::{freestream, solve_steady, steady_outputs, SteadyCase, SteadyOptions};
use panelflow::surface::VelocityMode;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(panelflow_py, PanelflowError, PyException);

fn fail(e: impl std::fmt::Display) -> PyErr {
    PanelflowError::new_err(e.to_string())
}

fn velocity_mode(name: &str) -> PyResult<VelocityMode> {
    match name {
        "marcov" => Ok(VelocityMode::Marcov),
        "gradmu" => Ok(VelocityMode::DoubletGradientOnly),
        other => Err(PyValueError::new_err(format!(
            "unknown velocity mode `{other}`, expected marcov or gradmu"
        ))),
    }
}

/// Converged steady solution of the wing at one angle of attack.
#[pyclass(name = "SteadyResult", frozen, get_all, skip_from_py_object)]
#[derive(Debug, Clone)]
struct PySteadyResult {
    alpha_deg: f64,
    cl: f64,
    cd: f64,
    cm: f64,
    steps: usize,
    iterations: usize,
    residual: f64,
    cp: Vec<f64>,
}

#[pymethods]
impl PySteadyResult {
    fn __repr__(&self) -> String {
        format!(
            "SteadyResult(alpha_deg={}, cl={:.5}, cd={:.5}, cm={:.5}, steps={})",
            self.alpha_deg, self.cl, self.cd, self.cm, self.steps
        )
    }
}

/// Rectangular NACA 4-digit wing with closed tips.
#[pyclass(name = "Wing", frozen)]
struct PyWing {
    case: SteadyCase,
    chord: f64,
}

#[pymethods]
impl PyWing {
    #[new]
    #[pyo3(signature = (airfoil = "0012", chordwise_panels = 32, spanwise_panels = 40, span = 6.0, chord = 1.0, density = 1.2))]
    fn new(
        airfoil: &str,
        chordwise_panels: usize,
        spanwise_panels: usize,
        span: f64,
        chord: f64,
        density: f64,
    ) -> PyResult<Self> {
        let geometry = WingGeometry {
            airfoil: airfoil.to_string(),
            chordwise_panels,
            spanwise_panels,
            span,
            chord,
        };
        let body = geometry.body().map_err(fail)?;
        Ok(PyWing {
            case: SteadyCase::new(body, geometry.reference(density)),
            chord,
        })
    }

    #[getter]
    fn n_panels(&self) -> usize {
        self.case.body.len()
    }

    /// Solve to a converged wake at `alpha_deg` and integrate the loads.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (alpha_deg, speed = 30.0, velocity_mode = "marcov", wake_rows = 200, wake_steps = 2000, wake_tol = 1e-8))]
    fn solve(
        &self,
        py: Python<'_>,
        alpha_deg: f64,
        speed: f64,
        velocity_mode: &str,
        wake_rows: usize,
        wake_steps: usize,
        wake_tol: f64,
    ) -> PyResult<PySteadyResult> {
        let mode = self::velocity_mode(velocity_mode)?;
        let opts = SteadyOptions {
            dt: self.chord / speed,
            max_rows: wake_rows,
            max_steps: wake_steps,
            tol: wake_tol,
            ..Default::default()
        };
        py.detach(|| {
            let sol = solve_steady(&self.case, &freestream(speed, alpha_deg), &opts)
                .map_err(|e| e.to_string())?;
            let out = steady_outputs(&self.case, &sol, mode).map_err(|e| e.to_string())?;
            Ok::<_, String>(PySteadyResult {
                alpha_deg,
                cl: out.coefficients.cl,
                cd: out.coefficients.cd,
                cm: out.coefficients.cm,
                steps: sol.steps,
                iterations: sol.report.iterations,
                residual: sol.report.residual,
                cp: out.cp,
            })
        })
        .map_err(fail)
    }
}

/// Step-size ladder of the co-simulation master.
#[pyclass(name = "CosimConfig", get_all, set_all, from_py_object)]
#[derive(Debug, Clone)]
struct PyCosimConfig {
    h_min: f64,
    h_max: f64,
    double_period: usize,
    linearity_tol: f64,
}

impl PyCosimConfig {
    fn inner(&self) -> PyResult<CosimConfig> {
        let cfg = CosimConfig {
            h_min: self.h_min,
            h_max: self.h_max,
            double_period: self.double_period,
            linearity_tol: self.linearity_tol,
        };
        cfg.validate().map_err(fail)?;
        Ok(cfg)
    }
}

#[pymethods]
impl PyCosimConfig {
    #[new]
    #[pyo3(signature = (h_min = None, h_max = None, double_period = None, linearity_tol = None))]
    fn new(
        h_min: Option<f64>,
        h_max: Option<f64>,
        double_period: Option<usize>,
        linearity_tol: Option<f64>,
    ) -> PyResult<Self> {
        let d = CosimConfig::default();
        let cfg = PyCosimConfig {
            h_min: h_min.unwrap_or(d.h_min),
            h_max: h_max.unwrap_or(d.h_max),
            double_period: double_period.unwrap_or(d.double_period),
            linearity_tol: linearity_tol.unwrap_or(d.linearity_tol),
        };
        cfg.inner()?;
        Ok(cfg)
    }

    fn finest_level(&self) -> PyResult<f64> {
        Ok(self.inner()?.finest_level())
    }

    fn halve(&self, h: f64) -> PyResult<f64> {
        Ok(self.inner()?.halve(h))
    }

    fn double(&self, h: f64) -> PyResult<f64> {
        Ok(self.inner()?.double(h))
    }

    fn is_admissible(&self, h: f64) -> PyResult<bool> {
        Ok(self.inner()?.is_admissible(h))
    }

    fn __repr__(&self) -> String {
        format!(
            "CosimConfig(h_min={:e}, h_max={:e}, double_period={}, linearity_tol={})",
            self.h_min, self.h_max, self.double_period, self.linearity_tol
        )
    }
}

/// Relative gap between the state increment and its linear prediction.
#[pyfunction]
fn linearity_defect(y_t: Vec<f64>, y_th: Vec<f64>, ydot: Vec<f64>, h: f64) -> PyResult<f64> {
    if y_t.len() != y_th.len() || y_t.len() != ydot.len() {
        return Err(PyValueError::new_err("state vectors differ in length"));
    }
    Ok(cosim::linearity_defect(&y_t, &y_th, &ydot, h))
}

/// Section points of a NACA 4-digit airfoil, trailing edge first.
#[pyfunction]
fn naca4(code: &str, n_panels: usize) -> PyResult<Vec<(f64, f64)>> {
    let foil = naca4_airfoil(code, n_panels).map_err(fail)?;
    Ok(foil.points.iter().map(|p| (p[0], p[1])).collect())
}

type PyInfluence = (f64, [f64; 3]);
type KernelFn = fn(&kernels::PanelFrame, &Point3<f64>) -> Result<Influence, kernels::KernelError>;
type MeshLists = (Vec<[f64; 3]>, Vec<Vec<usize>>);
type CoefficientRow = (f64, Option<(f64, f64, f64)>);

fn influence(corners: [[f64; 3]; 4], point: [f64; 3], kernel: KernelFn) -> PyResult<PyInfluence> {
    let frame = panel_frame(&corners.map(Point3::from)).map_err(fail)?;
    let v = kernel(&frame, &Point3::from(point)).map_err(fail)?;
    Ok((v.potential, [v.velocity.x, v.velocity.y, v.velocity.z]))
}

/// Potential and velocity of a unit source on a quadrilateral panel.
#[pyfunction]
fn source_influence(corners: [[f64; 3]; 4], point: [f64; 3]) -> PyResult<PyInfluence> {
    influence(corners, point, kernels::source_influence)
}

/// Potential and velocity of a unit doublet on a quadrilateral panel.
#[pyfunction]
fn doublet_influence(corners: [[f64; 3]; 4], point: [f64; 3]) -> PyResult<PyInfluence> {
    influence(corners, point, kernels::doublet_influence)
}

/// Nodes and polygons of the default kite with steering input `u`.
#[pyfunction]
#[pyo3(signature = (u = 0.0))]
fn kite_mesh(u: f64) -> PyResult<MeshLists> {
    let body = KiteConfig::default().mesh(u).map_err(fail)?;
    let data = PolyData::from_collection(&body);
    Ok((
        data.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
        data.polygons,
    ))
}

/// Static equilibrium of the default kite on its tether.
#[pyfunction]
fn kite_trim(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let trim = py
        .detach(|| kite::trim(&KiteConfig::default()).map_err(|e| e.to_string()))
        .map_err(fail)?;
    let out = PyDict::new(py);
    out.set_item("elevation_deg", trim.elevation.to_degrees())?;
    out.set_item("force", [trim.force.x, trim.force.y, trim.force.z])?;
    out.set_item("tension", trim.tension)?;
    Ok(out)
}

/// Run a TOML scenario, optionally writing its outputs to `out_dir`.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    config: &str,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ScenarioConfig::from_toml(config).map_err(fail)?;
    let out = PyDict::new(py);
    let kind = match cfg.scenario {
        ScenarioKind::Validate => "validate",
        ScenarioKind::Kite => "kite",
        ScenarioKind::MeshExport => "mesh-export",
    };
    out.set_item("scenario", kind)?;
    let dir = out_dir.as_deref();
    match cfg.scenario {
        ScenarioKind::Validate => {
            let rows = py
                .detach(|| scenario::run_validate(&cfg, dir).map_err(|e| e.to_string()))
                .map_err(fail)?;
            let table: Vec<CoefficientRow> = rows
                .iter()
                .map(|r| (r.alpha_deg, r.coefficients().map(|c| (c.cl, c.cd, c.cm))))
                .collect();
            out.set_item("coefficients", table)?;
        }
        ScenarioKind::Kite => {
            let run = py
                .detach(|| scenario::run_kite(&cfg, dir).map_err(|e| e.to_string()))
                .map_err(fail)?;
            out.set_item("steps", run.trajectory.len())?;
            out.set_item("t_end", run.trajectory.last().map_or(0.0, |r| r.t))?;
            out.set_item("trim_elevation_deg", run.trim_elevation.to_degrees())?;
        }
        ScenarioKind::MeshExport => {
            let dir = dir.ok_or_else(|| PyValueError::new_err("mesh export needs out_dir"))?;
            let files = py
                .detach(|| scenario::run_mesh_export(&cfg, dir).map_err(|e| e.to_string()))
                .map_err(fail)?;
            out.set_item("files", files)?;
        }
    }
    Ok(out)
}

#[pymodule]
fn panelflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PanelflowError", m.py().get_type::<PanelflowError>())?;
    m.add_class::<PyWing>()?;
    m.add_class::<PySteadyResult>()?;
    m.add_class::<PyCosimConfig>()?;
    m.add_function(wrap_pyfunction!(linearity_defect, m)?)?;
    m.add_function(wrap_pyfunction!(naca4, m)?)?;
    m.add_function(wrap_pyfunction!(source_influence, m)?)?;
    m.add_function(wrap_pyfunction!(doublet_influence, m)?)?;
    m.add_function(wrap_pyfunction!(kite_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(kite_trim, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
