//! Python bindings for the `gasurf` core: wall potentials, velocity
//! grids, collision kernels, accommodation fractions, flat scattering
//! kernels, the surface-layer solver, and rough-wall tracing.
//!
//! The module mirrors the Rust API thinly: methods validate through the
//! same constructors, errors surface as `ValueError` (domain) or
//! `RuntimeError` (numerical failure), and all arrays are plain lists of
//! floats ordered by the half-grid index.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gasurf::error::Error;
use gasurf::flat_bc::{self, Regime};
use gasurf::kernel::verify_kernel_axioms;
use gasurf::layer::{self, LayerConfig};
use gasurf::numerics::OdeSpec;
use gasurf::phonon;
use gasurf::potential;
use gasurf::rough;

fn err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_regime(name: &str) -> PyResult<Regime> {
    Ok(match name {
        "specular" => Regime::Specular,
        "diffuse" | "perfect-accommodation" => Regime::PerfectAccommodation,
        "maxwell-like" => Regime::MaxwellLike,
        "lksl-albedo" | "numerical-albedo" => Regime::NumericalAlbedo,
        other => {
            return Err(PyValueError::new_err(format!(
                "regime must be one of specular, diffuse, maxwell-like, lksl-albedo \
                 (got {other:?})"
            )))
        }
    })
}

/// Flat wall potential `W(z)`: depth `w_m` at the barrier, well floor at
/// `z_m`, blow-up at `z = l`.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct FlatPotential {
    inner: potential::FlatPotential,
}

#[pymethods]
impl FlatPotential {
    #[new]
    #[pyo3(signature = (w_m = 1.0, l = 1.0, z_m = 0.5))]
    fn new(w_m: f64, l: f64, z_m: f64) -> PyResult<Self> {
        Ok(Self {
            inner: potential::FlatPotential::new(w_m, l, z_m).map_err(err)?,
        })
    }

    #[getter]
    fn w_m(&self) -> f64 {
        self.inner.w_m()
    }

    #[getter]
    fn l(&self) -> f64 {
        self.inner.l()
    }

    #[getter]
    fn z_m(&self) -> f64 {
        self.inner.z_m()
    }

    /// `W(z)` for `0 ≤ z < l`.
    fn value(&self, z: f64) -> PyResult<f64> {
        self.inner.value(z).map_err(err)
    }

    /// Speed needed to clear the entrance barrier from the well floor.
    fn escape_speed(&self) -> f64 {
        self.inner.escape_speed()
    }

    fn __repr__(&self) -> String {
        format!(
            "FlatPotential(w_m={}, l={}, z_m={})",
            self.inner.w_m(),
            self.inner.l(),
            self.inner.z_m()
        )
    }
}

/// Periodically corrugated wall `W(y, z) = W(z/ζ(y))` with scale profile
/// `ζ(y) = l·(s0 + s1·cos(2πy))`.
#[pyclass(frozen)]
struct PeriodicPotential {
    inner: potential::PeriodicPotential,
}

#[pymethods]
impl PeriodicPotential {
    #[new]
    #[pyo3(signature = (base, beta_star = 1.0, s0 = 0.7, s1 = 0.12))]
    fn new(base: FlatPotential, beta_star: f64, s0: f64, s1: f64) -> PyResult<Self> {
        Ok(Self {
            inner: potential::PeriodicPotential::new(base.inner, beta_star, s0, s1)
                .map_err(err)?,
        })
    }

    #[getter]
    fn beta_star(&self) -> f64 {
        self.inner.beta_star()
    }

    #[getter]
    fn s0(&self) -> f64 {
        self.inner.s0()
    }

    #[getter]
    fn s1(&self) -> f64 {
        self.inner.s1()
    }

    /// `W(y, z)` below the blow-up curve.
    fn value(&self, y: f64, z: f64) -> PyResult<f64> {
        self.inner.eval(y, z).map(|(w, _, _)| w).map_err(err)
    }

    /// Height of the blow-up curve above ordinate `y`.
    fn zeta_inf(&self, y: f64) -> f64 {
        self.inner.zeta_inf(y)
    }

    fn __repr__(&self) -> String {
        format!(
            "PeriodicPotential(beta_star={}, s0={}, s1={})",
            self.inner.beta_star(),
            self.inner.s0(),
            self.inner.s1()
        )
    }
}

/// Molecule–phonon collision kernel `K(e, e′)`.
#[pyclass(frozen)]
struct CollisionKernel {
    inner: phonon::CollisionKernel,
}

#[pymethods]
impl CollisionKernel {
    /// `K ≡ ν`.
    #[staticmethod]
    fn constant(nu: f64) -> PyResult<Self> {
        Ok(Self {
            inner: phonon::CollisionKernel::constant(nu).map_err(err)?,
        })
    }

    /// `K = ν₀ + (ν₁ − ν₀)·exp(−|e − e′|²/width²)`.
    #[staticmethod]
    fn gaussian_smooth(nu0: f64, nu1: f64, width: f64) -> PyResult<Self> {
        Ok(Self {
            inner: phonon::CollisionKernel::gaussian_smooth(nu0, nu1, width).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Symmetric half-grid over incoming (or outgoing) velocities: `n_x`
/// cells of `v_x ∈ (−v_max_x, v_max_x)` × `n_z/2` cells of
/// `|v_z| ∈ (0, v_max_z)`.
#[pyclass(frozen)]
struct VelocityGrid {
    inner: gasurf::grid::VelocityGrid,
}

#[pymethods]
impl VelocityGrid {
    #[new]
    #[pyo3(signature = (v_max_x = 6.0, n_x = 32, v_max_z = 6.0, n_z = 64))]
    fn new(v_max_x: f64, n_x: usize, v_max_z: f64, n_z: usize) -> PyResult<Self> {
        Ok(Self {
            inner: gasurf::grid::VelocityGrid::new(v_max_x, n_x, v_max_z, n_z).map_err(err)?,
        })
    }

    /// Number of half-grid cells.
    #[getter]
    fn half_len(&self) -> usize {
        self.inner.half_len()
    }

    /// Tangential cell-center velocity.
    fn vx(&self, h: usize) -> f64 {
        self.inner.vx(h)
    }

    /// Normal cell-center speed `|v_z|`.
    fn vz_mag(&self, h: usize) -> f64 {
        self.inner.vz_mag(h)
    }

    /// Cell area `Δv_x · Δv_z`.
    fn area(&self, h: usize) -> f64 {
        self.inner.area(h)
    }

    /// Flux quadrature weight `|v_z| Δv`.
    fn flux_weight(&self, h: usize) -> f64 {
        self.inner.flux_weight(h)
    }

    /// Wall Maxwellian `M(v) = e^{−|v|²/2}` sampled at cell centers.
    fn maxwellian(&self) -> Vec<f64> {
        self.inner.maxwellian_field()
    }

    /// Mass flux `∫ |v_z| f dv` of a half-grid field.
    fn flux(&self, f: Vec<f64>) -> PyResult<f64> {
        if f.len() != self.inner.half_len() {
            return Err(PyValueError::new_err(format!(
                "field has {} values for a half-grid of {}",
                f.len(),
                self.inner.half_len()
            )));
        }
        Ok(self.inner.flux(&f))
    }

    fn __repr__(&self) -> String {
        format!("VelocityGrid(half_len={})", self.inner.half_len())
    }
}

/// Accommodation fraction `a(v) = 1 − exp(−2τ̂_z/τ̂_ms)` of one incoming
/// velocity (or its rational lower bound with `pade=True`).
#[pyfunction]
#[pyo3(signature = (model, potential, vx, vz, pade = false))]
fn accommodation(
    model: &CollisionKernel,
    potential: &FlatPotential,
    vx: f64,
    vz: f64,
    pade: bool,
) -> PyResult<f64> {
    if pade {
        flat_bc::pade_accommodation(&model.inner, &potential.inner, (vx, vz)).map_err(err)
    } else {
        flat_bc::accommodation_fraction(&model.inner, &potential.inner, (vx, vz)).map_err(err)
    }
}

/// Accommodation fraction tabulated over a half-grid (even in `v_x`
/// bit-for-bit).
#[pyfunction]
#[pyo3(signature = (model, potential, grid, pade = false))]
fn accommodation_table(
    model: &CollisionKernel,
    potential: &FlatPotential,
    grid: &VelocityGrid,
    pade: bool,
) -> PyResult<Vec<f64>> {
    flat_bc::accommodation_table(&model.inner, &potential.inner, &grid.inner, pade).map_err(err)
}

/// Applies a flat boundary condition to an incoming half-grid field and
/// returns the outgoing one.
#[pyfunction]
#[pyo3(signature = (regime, f_in, grid, model = None, potential = None))]
fn apply_boundary(
    regime: &str,
    f_in: Vec<f64>,
    grid: &VelocityGrid,
    model: Option<&CollisionKernel>,
    potential: Option<&FlatPotential>,
) -> PyResult<Vec<f64>> {
    flat_bc::apply_boundary(
        parse_regime(regime)?,
        &f_in,
        &grid.inner,
        model.map(|m| &m.inner),
        potential.map(|p| &p.inner),
    )
    .map_err(err)
}

/// Assembles the scattering kernel of a flat regime and reports its
/// axiom residuals: non-negativity, normalization, mass flux, and
/// reciprocity.
#[pyfunction]
#[pyo3(signature = (regime, grid, model = None, potential = None))]
fn kernel_residuals<'py>(
    py: Python<'py>,
    regime: &str,
    grid: &VelocityGrid,
    model: Option<&CollisionKernel>,
    potential: Option<&FlatPotential>,
) -> PyResult<Bound<'py, PyDict>> {
    let k = flat_bc::scattering_kernel_r(
        parse_regime(regime)?,
        &grid.inner,
        model.map(|m| &m.inner),
        potential.map(|p| &p.inner),
    )
    .map_err(err)?;
    let rep = verify_kernel_axioms(&k);
    let d = PyDict::new(py);
    d.set_item("nonneg", rep.nonneg)?;
    d.set_item("normalization", rep.normalization)?;
    d.set_item("mass_flux", rep.mass_flux)?;
    d.set_item("reciprocity", rep.reciprocity)?;
    Ok(d)
}

/// Solves the linear kinetic surface-layer problem for an incoming field
/// and returns the outgoing trace with solver diagnostics.
#[pyfunction]
#[pyo3(signature = (f_in, model, potential, grid, n_z_base = 48))]
fn solve_lksl<'py>(
    py: Python<'py>,
    f_in: Vec<f64>,
    model: &CollisionKernel,
    potential: &FlatPotential,
    grid: &VelocityGrid,
    n_z_base: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = LayerConfig {
        n_z_base,
        ..LayerConfig::default()
    };
    let sol = layer::solve_lksl(&f_in, &model.inner, &potential.inner, &grid.inner, &cfg)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("f_out", sol.f_out)?;
    d.set_item("iterations", sol.iterations)?;
    d.set_item("alpha1", sol.alpha1)?;
    d.set_item("flux_in", sol.flux_in)?;
    d.set_item("flux_residual", sol.flux_residual)?;
    Ok(d)
}

/// Traces one molecule through the rough layer from `(y, z = 0)` with
/// `vz > 0` until it exits downward, and returns the exit record.
#[pyfunction]
#[pyo3(signature = (potential, y, vx, vz, model = None, step_tol = 1e-11))]
fn trace<'py>(
    py: Python<'py>,
    potential: &PeriodicPotential,
    y: f64,
    vx: f64,
    vz: f64,
    model: Option<&CollisionKernel>,
    step_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = OdeSpec {
        step_tol,
        ..OdeSpec::default()
    };
    let rec = rough::trace_particle(
        &potential.inner,
        model.map(|m| &m.inner),
        y,
        (vx, vz),
        &spec,
    )
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("y_out", rec.y_out)?;
    d.set_item("vx_out", rec.v_out.0)?;
    d.set_item("vz_out", rec.v_out.1)?;
    d.set_item("tau_fl", rec.tau_fl)?;
    d.set_item("r", rec.r)?;
    d.set_item("energy_drift", rec.energy_drift)?;
    d.set_item("steps", rec.steps)?;
    Ok(d)
}

#[pymodule]
fn gasurf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FlatPotential>()?;
    m.add_class::<PeriodicPotential>()?;
    m.add_class::<CollisionKernel>()?;
    m.add_class::<VelocityGrid>()?;
    m.add_function(wrap_pyfunction!(accommodation, m)?)?;
    m.add_function(wrap_pyfunction!(accommodation_table, m)?)?;
    m.add_function(wrap_pyfunction!(apply_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lksl, m)?)?;
    m.add_function(wrap_pyfunction!(trace, m)?)?;
    Ok(())
}
