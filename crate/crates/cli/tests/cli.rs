use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_nftrap");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn nftrap(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_result(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap()
}

fn validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/result.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_schema_valid(doc: &Value) {
    let v = validator();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

fn without_timestamp(mut doc: Value) -> Value {
    doc["provenance"]["timestamp"] = Value::Null;
    doc
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_ok(args: &[&str], out: &Path) -> Value {
    let o = nftrap(args, out);
    assert!(o.status.success(), "nftrap {args:?} failed: {}", stderr(&o));
    let doc = read_result(out);
    assert_schema_valid(&doc);
    doc
}

#[test]
fn mode_reports_three_wavelengths() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = run_ok(&["mode", "--paper-defaults"], tmp.path());
    assert_eq!(doc["command"], "mode");
    let modes = doc["payload"]["modes"].as_array().unwrap();
    let wl: Vec<f64> = modes.iter().map(|m| m["wavelength_nm"].as_f64().unwrap()).collect();
    assert_eq!(wl.len(), 3);
    assert_eq!((wl[0], wl[1]), (1064.0, 780.0));
    assert!((wl[2] - 852.347).abs() < 1e-3);
    for m in modes {
        let n = m["n_eff"].as_f64().unwrap();
        assert!(n > 1.0 && n < m["n_core"].as_f64().unwrap());
        assert!(m["single_mode"].as_bool().unwrap());
    }
    assert!(doc["provenance"]["paper_defaults"].as_bool().unwrap());
    assert!((doc["config"]["surface"]["C3_SI"].as_f64().unwrap() - 7.686e-49).abs() < 1e-51);
}

#[test]
fn zero_radius_is_a_validation_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[fiber]\nradius_nm = 0.0\n");
    let o = nftrap(&["mode", "--paper-defaults", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fiber.radius_nm"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected_with_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[lasers.red]\npower_mw = 3.0\n");
    let o = nftrap(&["mode", "--paper-defaults", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("lasers.red") && err.contains("power_mw"), "{err}");
}

#[test]
fn physical_fields_have_no_silent_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "partial.toml", "[fiber]\nradius_nm = 250.0\n");
    let o = nftrap(&["mode", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lasers"), "{}", stderr(&o));

    let o = nftrap(&["mode"], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mode_is_deterministic_apart_from_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_ok(&["mode", "--paper-defaults"], &tmp.path().join("a"));
    let b = run_ok(&["mode", "--paper-defaults"], &tmp.path().join("b"));
    assert_eq!(without_timestamp(a), without_timestamp(b));
}

#[test]
fn characterize_reference_trap() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = run_ok(&["characterize", "--paper-defaults"], tmp.path());
    let p = &doc["payload"];
    let d = p["minimum"]["distance_to_surface_nm"].as_f64().unwrap();
    assert!((d - 230.0).abs() < 40.0, "{d}");
    let f = &p["frequencies_khz"];
    let (nr, nz, np) = (f["radial"].as_f64().unwrap(), f["axial"].as_f64().unwrap(), f["azimuthal"].as_f64().unwrap());
    assert!(nz > nr && nr > np);
    assert!(p["depth"]["depth_uK"].as_f64().unwrap() > 125.0);
    assert!(doc["warnings"].as_array().unwrap().is_empty(), "{:?}", doc["warnings"]);
}

#[test]
fn characterize_without_blue_light_reports_surface_crash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "noblue.toml", "[lasers.blue]\npower_mw_per_beam = 0.0\n");
    let o = nftrap(&["characterize", "--paper-defaults", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no interior trap minimum") && stderr(&o).contains("fiber surface"), "{}", stderr(&o));
}

#[test]
fn characterize_minimum_is_robust_to_search_resolution() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_ok(&["characterize", "--paper-defaults"], &tmp.path().join("a"));
    let cfg = write(tmp.path(), "coarse.toml", "[grids]\nradial_samples = 48\nazimuthal_samples = 40\naxial_samples = 56\n");
    let b = run_ok(&["characterize", "--paper-defaults", "--config", cfg.to_str().unwrap()], &tmp.path().join("b"));
    let r = |d: &Value| d["payload"]["minimum"]["r_nm"].as_f64().unwrap();
    assert!((r(&a) - r(&b)).abs() < 1e-3, "{} vs {}", r(&a), r(&b));
}

#[test]
fn config_echo_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_ok(&["characterize", "--paper-defaults"], &tmp.path().join("a"));
    let echo = write(tmp.path(), "echo.json", &serde_json::to_string(&a["config"]).unwrap());
    let b = run_ok(&["characterize", "--config", echo.to_str().unwrap()], &tmp.path().join("b"));
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["payload"], b["payload"]);
}

#[test]
fn grid_exports_two_site_chains_per_level() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let doc = run_ok(&["grid", "--paper-defaults", "--offsets-uk", "40,125"], &out);
    let levels = doc["payload"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    for l in levels {
        assert_eq!(l["chain_count"], 2, "{l}");
        let file = out.join(l["file"].as_str().unwrap());
        let lines = std::fs::read_to_string(file).unwrap().lines().count();
        assert_eq!(lines as u64, l["rows"].as_u64().unwrap() + 1);
    }
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(grid.starts_with("x,y,z,U_microK\n"));
    assert_eq!(grid.lines().count() as u64, doc["payload"]["grid"]["rows"].as_u64().unwrap() + 1);
    assert!(grid.contains(",nan\n"));

    let again = tmp.path().join("b");
    run_ok(&["grid", "--paper-defaults", "--offsets-uk", "40,125"], &again);
    for name in ["grid.csv", "mask_40uK.csv", "mask_125uK.csv"] {
        assert_eq!(std::fs::read(out.join(name)).unwrap(), std::fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn grid_without_offsets_writes_no_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.toml", "[grids]\noffsets_uK = []\n");
    let out = tmp.path().join("out");
    let doc = run_ok(&["grid", "--paper-defaults", "--config", cfg.to_str().unwrap()], &out);
    assert!(doc["payload"]["levels"].as_array().unwrap().is_empty());
    let masks = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("mask_")).count();
    assert_eq!(masks, 0);
}

#[test]
fn oversize_grid_is_refused_with_the_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.toml", "[grids]\nmax_cells = 1000\n");
    let o = nftrap(&["grid", "--paper-defaults", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1000"), "{}", stderr(&o));
}

#[test]
fn fit_spectrum_recovers_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture("spectrum_synthetic.csv");
    let cfg = write(tmp.path(), "n.toml", "[fit]\natom_number = 2000.0\n");
    let doc = run_ok(
        &["fit-spectrum", "--paper-defaults", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap()],
        tmp.path(),
    );
    let fit = &doc["payload"]["fit"];
    for (key, truth) in [("od", 13.0), ("shift_mhz", 13.0), ("fwhm_mhz", 20.0)] {
        let v = fit[key]["value"].as_f64().unwrap();
        let s = fit[key]["uncertainty"].as_f64().unwrap();
        assert!((v - truth).abs() < 3.0 * s, "{key}: {v} +- {s}");
    }
    assert!(fit["weighted"].as_bool().unwrap());
    let eps = doc["payload"]["absorbances"]["epsilon"]["value"].as_f64().unwrap();
    assert!((eps - 0.0065).abs() < 0.0005);
    let curve = std::fs::read_to_string(tmp.path().join("model_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 402);
    assert_eq!(doc["provenance"]["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn fit_spectrum_skips_nan_rows_with_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = std::fs::read_to_string(fixture("spectrum_synthetic.csv")).unwrap();
    text.push_str("90,NaN,0.01\n");
    let data = write(tmp.path(), "nan.csv", &text);
    let doc = run_ok(&["fit-spectrum", "--paper-defaults", "--data", data.to_str().unwrap()], tmp.path());
    assert_eq!(doc["payload"]["skipped_rows"], 1);
    let w = doc["warnings"].as_array().unwrap();
    assert!(w.iter().any(|s| s.as_str().unwrap().contains("line 143")), "{w:?}");
}

#[test]
fn fit_spectrum_ingestion_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "empty.csv", "");
    let o = nftrap(&["fit-spectrum", "--paper-defaults", "--data", empty.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no data rows"));

    let bad = write(tmp.path(), "bad.csv", "detuning_MHz,transmission\n0,0.5\n1,abc\n");
    let o = nftrap(&["fit-spectrum", "--paper-defaults", "--data", bad.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let few = write(tmp.path(), "few.csv", "0,0.5\n1,0.6\n");
    let o = nftrap(&["fit-spectrum", "--paper-defaults", "--data", few.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_spectrum_multi_component_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = run_ok(
        &[
            "fit-spectrum",
            "--paper-defaults",
            "--config",
            fixture("broadening_pattern.toml").to_str().unwrap(),
            "--data",
            fixture("spectrum_synthetic.csv").to_str().unwrap(),
        ],
        tmp.path(),
    );
    let p = &doc["payload"];
    assert_eq!(p["fit"]["mode"], "multi_component");
    let eta = p["eta"].as_f64().unwrap();
    assert!((2.0..=3.0).contains(&eta), "{eta}");
    assert!((p["envelope_fwhm_mhz"].as_f64().unwrap() - 20.0).abs() < 1.0);
}

#[test]
fn fit_saturation_recovers_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture("saturation_synthetic.csv");
    let doc = run_ok(&["fit-saturation", "--paper-defaults", "--data", data.to_str().unwrap()], tmp.path());
    let p = &doc["payload"];
    let n = p["atom_number"]["value"].as_f64().unwrap();
    assert!((n / 2000.0 - 1.0).abs() < 0.05, "{n}");
    assert!(!p["degenerate"].as_bool().unwrap());
    assert!((p["power_per_atom_pw"].as_f64().unwrap() - 3.8).abs() < 0.19);
    let curve = std::fs::read_to_string(tmp.path().join("saturation_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 202);
}

#[test]
fn fit_saturation_flags_linear_regime_and_empty_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "a.toml", "[fit.saturation]\na_eff_um2 = 3.6\n");
    let linear: String = std::iter::once("p_in_W,p_abs_W\n".to_string())
        .chain((1..=10).map(|i| format!("{:e},{:e}\n", i as f64 * 1e-13, i as f64 * 0.999e-13)))
        .collect();
    let data = write(tmp.path(), "lin.csv", &linear);
    let doc = run_ok(
        &["fit-saturation", "--paper-defaults", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap()],
        &tmp.path().join("lin"),
    );
    assert!(doc["payload"]["degenerate"].as_bool().unwrap());
    assert_eq!(doc["payload"]["a_eff_source"], "config");

    let empty = write(tmp.path(), "empty.csv", "p_in_W,p_abs_W\n");
    let o = nftrap(&["fit-saturation", "--paper-defaults", "--data", empty.to_str().unwrap()], &tmp.path().join("e"));
    assert_eq!(o.status.code(), Some(2));
}
