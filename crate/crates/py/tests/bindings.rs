use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn with_module<F: FnOnce(&Bound<'_, PyModule>)>(f: F) {
    Python::with_gil(|py| {
        let m = wrap_pymodule!(nanofiber_trap_py::nanofiber_trap_module)(py);
        f(m.bind(py));
    });
}

#[test]
fn mode_and_area() {
    with_module(|m| {
        let d = m.getattr("solve_mode").unwrap().call1((250.0, 852.35)).unwrap();
        let d = d.downcast::<PyDict>().unwrap();
        let n: f64 = d.get_item("n_eff").unwrap().unwrap().extract().unwrap();
        assert!(n > 1.0 && n < 1.46);
        let a: f64 = m.getattr("effective_area_um2").unwrap().call1((250.0, 852.35, 230.0)).unwrap().extract().unwrap();
        assert!(a > 1.0 && a < 10.0);
    });
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(|m| {
        let py = m.py();
        let e = m.getattr("solve_mode").unwrap().call1((0.0, 852.0)).unwrap_err();
        assert!(e.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let e = m.getattr("characterize").unwrap().call1((None::<f64>, 0.0)).unwrap_err();
        assert!(e.is_instance_of::<pyo3::exceptions::PyRuntimeError>(py), "{e}");
    });
}

#[test]
fn spectrum_round_trip() {
    with_module(|m| {
        let det: Vec<f64> = (0..121).map(|i| -50.0 + i as f64).collect();
        let t: Vec<f64> = m.getattr("transmission").unwrap().call1((det.clone(), 13.0, 13.0, 20.0)).unwrap().extract().unwrap();
        let d = m.getattr("fit_spectrum").unwrap().call1((det, t)).unwrap();
        let (od, _): (f64, Option<f64>) = d.get_item("od").unwrap().extract().unwrap();
        assert!((od - 13.0).abs() < 1e-6);
    });
}
