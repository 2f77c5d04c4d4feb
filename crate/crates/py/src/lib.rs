//! Python bindings. Boundary units match the command line: nm, mW, MHz, uK,
//! um^2; powers in the saturation functions are in W.

use nanofiber_trap::atomic::{saturated_power_per_atom, AtomSpecies};
use nanofiber_trap::constants::BOLTZMANN;
use nanofiber_trap::spectroscopy::{
    broadening_recovery_factor, envelope_fwhm, fit_saturation as fit_saturation_rs, fit_spectrum as fit_spectrum_rs,
    single_line_transmission, validate_components, FitOptions, LineComponent, SaturationDataset, SaturationFitOptions,
    SaturationModel, SaturationPoint, SpectrumDataset, SpectrumFitMode, SpectrumPoint,
};
use nanofiber_trap::trap::{characterize as characterize_rs, SearchOptions, TrapConfiguration, TrapModel};
use nanofiber_trap::{effective_mode_area, solve_he11, CoreIndex, Error, FiberSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

const NM: f64 = 1e-9;
const MHZ: f64 = 1e6;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NoRoot { .. } | Error::NoMinimum(_) | Error::Saddle(_) | Error::ZeroIntensity { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn fiber(radius_nm: f64, n_core: Option<f64>, n_clad: f64) -> PyResult<FiberSpec> {
    let core = n_core.map_or(CoreIndex::Sellmeier, CoreIndex::Constant);
    FiberSpec::with_cladding(radius_nm * NM, core, n_clad).map_err(to_py)
}

/// HE11 summary: n_eff, beta [1/m], V number and intensity decay length [nm].
#[pyfunction]
#[pyo3(signature = (radius_nm, wavelength_nm, n_core=None, n_clad=1.0))]
fn solve_mode<'py>(py: Python<'py>, radius_nm: f64, wavelength_nm: f64, n_core: Option<f64>, n_clad: f64) -> PyResult<Bound<'py, PyDict>> {
    let m = solve_he11(&fiber(radius_nm, n_core, n_clad)?, wavelength_nm * NM, 1.0, 0.0).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n_core", m.n_core)?;
    d.set_item("n_eff", m.n_eff())?;
    d.set_item("beta_per_m", m.beta)?;
    d.set_item("v_number", m.v_number())?;
    d.set_item("single_mode", m.is_single_mode())?;
    d.set_item("decay_length_nm", m.intensity_decay_length() / NM)?;
    Ok(d)
}

/// Effective mode area [um^2] at a distance from the surface, on the
/// polarization axis.
#[pyfunction]
#[pyo3(signature = (radius_nm, wavelength_nm, distance_nm, n_core=None, n_clad=1.0))]
fn effective_area_um2(radius_nm: f64, wavelength_nm: f64, distance_nm: f64, n_core: Option<f64>, n_clad: f64) -> PyResult<f64> {
    let m = solve_he11(&fiber(radius_nm, n_core, n_clad)?, wavelength_nm * NM, 1.0, 0.0).map_err(to_py)?;
    Ok(effective_mode_area(&m, m.fiber.radius + distance_nm * NM, 0.0).map_err(to_py)? * 1e12)
}

/// Characterize the reference trap, optionally with other beam powers.
#[pyfunction]
#[pyo3(signature = (red_power_mw=None, blue_power_mw=None))]
fn characterize<'py>(py: Python<'py>, red_power_mw: Option<f64>, blue_power_mw: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = TrapConfiguration::reference();
    if let Some(p) = red_power_mw {
        cfg.red.power_per_beam = p * 1e-3;
    }
    if let Some(p) = blue_power_mw {
        cfg.blue.power_per_beam = p * 1e-3;
    }
    let model = TrapModel::new(cfg).map_err(to_py)?;
    let c = py.allow_threads(|| characterize_rs(&model, &SearchOptions::default())).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("distance_to_surface_nm", c.distance_to_surface / NM)?;
    d.set_item("phi_deg", c.minimum.phi.to_degrees())?;
    d.set_item("z_nm", c.minimum.z / NM)?;
    d.set_item("potential_uK", c.minimum.potential / BOLTZMANN * 1e6)?;
    d.set_item("frequencies_khz", (c.frequencies.radial * 1e-3, c.frequencies.axial * 1e-3, c.frequencies.azimuthal * 1e-3))?;
    d.set_item("depth_uK", c.depth.depth / BOLTZMANN * 1e6)?;
    d.set_item("scattering_rate_per_s", c.scattering_rate)?;
    d.set_item("antinode_spacing_nm", c.antinode_spacing.map(|s| s / NM))?;
    d.set_item("max_linear_density_per_mm", c.max_linear_density.map(|n| n * 1e-3))?;
    Ok(d)
}

/// Single-Lorentzian transmission `exp(-OD L)` on a detuning grid [MHz].
#[pyfunction]
fn transmission(detuning_mhz: Vec<f64>, od: f64, shift_mhz: f64, fwhm_mhz: f64) -> Vec<f64> {
    detuning_mhz.iter().map(|d| single_line_transmission(d * MHZ, od, shift_mhz * MHZ, fwhm_mhz * MHZ)).collect()
}

/// Single-line fit. Returns value/uncertainty pairs for od, shift_mhz and
/// fwhm_mhz plus convergence flags and warnings.
#[pyfunction]
#[pyo3(signature = (detuning_mhz, transmission, sigma=None))]
fn fit_spectrum<'py>(
    py: Python<'py>,
    detuning_mhz: Vec<f64>,
    transmission: Vec<f64>,
    sigma: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    if detuning_mhz.len() != transmission.len() || sigma.as_ref().is_some_and(|s| s.len() != transmission.len()) {
        return Err(PyValueError::new_err("input sequences differ in length"));
    }
    let points = detuning_mhz
        .iter()
        .zip(&transmission)
        .enumerate()
        .map(|(i, (d, t))| SpectrumPoint { detuning: d * MHZ, transmission: *t, sigma: sigma.as_ref().map(|s| s[i]) })
        .collect();
    let data = SpectrumDataset::new(points).map_err(to_py)?;
    let fit = fit_spectrum_rs(&data, &SpectrumFitMode::SingleLine, &FitOptions::for_atom(&AtomSpecies::cesium133()))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("od", (fit.od.value, fit.od.uncertainty))?;
    d.set_item("shift_mhz", (fit.shift.value / MHZ, fit.shift.uncertainty.map(|u| u / MHZ)))?;
    d.set_item("fwhm_mhz", (fit.fwhm.value / MHZ, fit.fwhm.uncertainty.map(|u| u / MHZ)))?;
    d.set_item("reduced_chi_squared", fit.reduced_chi_squared)?;
    d.set_item("converged", fit.converged)?;
    d.set_item("warnings", fit.warnings)?;
    Ok(d)
}

/// Envelope FWHM [MHz] and broadening factor of a component pattern.
#[pyfunction]
#[pyo3(signature = (weights, shifts_mhz, gamma0_mhz=None))]
fn broadening(weights: Vec<f64>, shifts_mhz: Vec<f64>, gamma0_mhz: Option<f64>) -> PyResult<(f64, f64)> {
    if weights.len() != shifts_mhz.len() {
        return Err(PyValueError::new_err("weights and shifts differ in length"));
    }
    let comps: Vec<LineComponent> =
        weights.iter().zip(&shifts_mhz).map(|(w, s)| LineComponent { weight: *w, shift: s * MHZ }).collect();
    let comps = validate_components(&comps, false).map_err(to_py)?;
    let gamma0 = gamma0_mhz.map_or_else(|| FitOptions::for_atom(&AtomSpecies::cesium133()).gamma0, |g| g * MHZ);
    let eta = broadening_recovery_factor(&comps, gamma0).map_err(to_py)?;
    Ok((envelope_fwhm(&comps, gamma0) / MHZ, eta))
}

/// Saturated scattering power per cesium atom [W].
#[pyfunction]
fn power_per_atom() -> f64 {
    saturated_power_per_atom(&AtomSpecies::cesium133())
}

/// Absorbed power [W] for `n` atoms at mode area `a_eff_um2`.
#[pyfunction]
fn absorbed_power(p_in_w: Vec<f64>, n: f64, a_eff_um2: f64) -> PyResult<Vec<f64>> {
    let model = SaturationModel::new(&AtomSpecies::cesium133(), a_eff_um2 * 1e-12).map_err(to_py)?;
    Ok(p_in_w.iter().map(|p| model.absorbed(*p, n)).collect())
}

/// Atom number from absorbed vs incident power.
#[pyfunction]
fn fit_saturation<'py>(py: Python<'py>, p_in_w: Vec<f64>, p_abs_w: Vec<f64>, a_eff_um2: f64) -> PyResult<Bound<'py, PyDict>> {
    if p_in_w.len() != p_abs_w.len() {
        return Err(PyValueError::new_err("input sequences differ in length"));
    }
    let points = p_in_w.iter().zip(&p_abs_w).map(|(i, a)| SaturationPoint { incident: *i, absorbed: *a }).collect();
    let data = SaturationDataset::new(points).map_err(to_py)?;
    let model = SaturationModel::new(&AtomSpecies::cesium133(), a_eff_um2 * 1e-12).map_err(to_py)?;
    let fit = fit_saturation_rs(&data, &model, &SaturationFitOptions::default()).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("atom_number", (fit.atom_number.value, fit.atom_number.uncertainty))?;
    d.set_item("asymptote_estimate", fit.asymptote_estimate)?;
    d.set_item("degenerate", fit.degenerate)?;
    d.set_item("converged", fit.converged)?;
    d.set_item("warnings", fit.warnings)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "nanofiber_trap")]
pub fn nanofiber_trap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(solve_mode, m)?)?;
    m.add_function(wrap_pyfunction!(effective_area_um2, m)?)?;
    m.add_function(wrap_pyfunction!(characterize, m)?)?;
    m.add_function(wrap_pyfunction!(transmission, m)?)?;
    m.add_function(wrap_pyfunction!(fit_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(broadening, m)?)?;
    m.add_function(wrap_pyfunction!(power_per_atom, m)?)?;
    m.add_function(wrap_pyfunction!(absorbed_power, m)?)?;
    m.add_function(wrap_pyfunction!(fit_saturation, m)?)?;
    Ok(())
}
