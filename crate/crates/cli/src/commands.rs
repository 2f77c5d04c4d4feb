//! Subcommand bodies. Each returns the result document after writing it and
//! any companion CSV files into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nanofiber_trap::atomic::saturated_power_per_atom;
use nanofiber_trap::constants::BOLTZMANN;
use nanofiber_trap::spectroscopy::{
    broadening_recovery_factor, derived_absorbances, envelope_fwhm, fit_saturation,
    fit_spectrum, single_line_transmission, spectrum_model, Estimate, SaturationModel, SpectrumFitMode,
};
use nanofiber_trap::trap::{characterize, equipotential_grid, find_minimum, EscapeChannel, TrapMinimum, TrapModel};
use nanofiber_trap::{effective_mode_area, solve_he11, GuidedMode};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, LoadedConfig};
use crate::error::CliError;
use crate::ingest;
use crate::result::{hash_input, provenance, InputFile, ResultDocument};

const NM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Mode,
    Characterize,
    Grid,
    FitSpectrum { data: PathBuf },
    FitSaturation { data: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Mode => "mode",
            Command::Characterize => "characterize",
            Command::Grid => "grid",
            Command::FitSpectrum { .. } => "fit-spectrum",
            Command::FitSaturation { .. } => "fit-saturation",
        }
    }
}

struct Output {
    payload: Value,
    warnings: Vec<String>,
    inputs: Vec<InputFile>,
}

pub fn run(command: &Command, loaded: &LoadedConfig, out_dir: &Path) -> Result<ResultDocument, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let cfg = &loaded.config;
    let output = match command {
        Command::Mode => mode(cfg)?,
        Command::Characterize => characterize_cmd(cfg)?,
        Command::Grid => grid(cfg, out_dir)?,
        Command::FitSpectrum { data } => fit_spectrum_cmd(cfg, data, out_dir)?,
        Command::FitSaturation { data } => fit_saturation_cmd(cfg, data, out_dir)?,
    };
    let mut inputs = Vec::new();
    if let Some(src) = &loaded.source {
        inputs.push(hash_input("config", src)?);
    }
    inputs.extend(output.inputs);
    let doc = ResultDocument::new(command.name(), cfg, output.payload, output.warnings, provenance(loaded.paper_defaults, inputs));
    doc.write(out_dir)?;
    Ok(doc)
}

fn micro_kelvin(energy: f64) -> f64 {
    energy / BOLTZMANN * 1e6
}

/// JSON number, or null when not finite.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn estimate(e: &Estimate, scale: f64) -> Value {
    json!({ "value": num(e.value * scale), "uncertainty": e.uncertainty.map_or(Value::Null, |u| num(u * scale)) })
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn mode_summary(role: &str, mode: &GuidedMode, distances_nm: &[f64], cross_section: Option<f64>) -> Result<Value, CliError> {
    let a = mode.fiber.radius;
    let mut profile = Vec::new();
    for &d in distances_nm {
        let area = effective_mode_area(mode, a + d * NM, mode.pol_axis)?;
        let mut row = json!({ "distance_nm": d, "a_eff_um2": area * 1e12 });
        if let Some(sigma) = cross_section {
            row["sigma0_over_a_eff"] = json!(sigma / area);
        }
        profile.push(row);
    }
    Ok(json!({
        "role": role,
        "wavelength_nm": mode.wavelength / NM,
        "n_core": mode.n_core,
        "n_eff": mode.n_eff(),
        "beta_per_m": mode.beta,
        "v_number": mode.v_number(),
        "single_mode": mode.is_single_mode(),
        "intensity_decay_length_nm": mode.intensity_decay_length() / NM,
        "a_eff_profile": profile,
    }))
}

fn mode(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let fiber = cfg.fiber_spec()?;
    let atom = cfg.atom();
    let l = &cfg.lasers;
    let mut modes = Vec::new();
    for (role, wl, pol, sigma) in [
        ("red", l.red.wavelength_nm, l.red.pol_deg, None),
        ("blue", l.blue.wavelength_nm, l.blue.pol_deg, None),
        ("probe", l.probe.wavelength_nm, l.probe.pol_deg.unwrap_or(l.red.pol_deg), Some(atom.cross_section)),
    ] {
        let m = solve_he11(&fiber, wl * NM, 1.0, pol.to_radians())?;
        modes.push(mode_summary(role, &m, &cfg.grids.profile_distances_nm, sigma)?);
    }
    let payload = json!({
        "modes": modes,
        "atom": {
            "species": atom.name,
            "cycling_cross_section_m2": atom.cross_section,
            "saturated_power_per_atom_w": saturated_power_per_atom(&atom),
        },
    });
    Ok(Output { payload, warnings: Vec::new(), inputs: Vec::new() })
}

fn position(r: f64, phi: f64, z: f64) -> Value {
    json!({ "r_nm": num(r / NM), "phi_deg": num(phi.to_degrees()), "z_nm": num(z / NM) })
}

/// Probe mode area at the atoms. Unless configured otherwise the probe is
/// polarized along the atoms' azimuth.
pub fn probe_area(cfg: &ExperimentConfig, m: &TrapMinimum) -> Result<f64, CliError> {
    let pol = cfg.lasers.probe.pol_deg.map_or(m.phi, f64::to_radians);
    let probe = solve_he11(&cfg.fiber_spec()?, cfg.lasers.probe.wavelength_nm * NM, cfg.lasers.probe.power_pw * 1e-12, pol)?;
    Ok(effective_mode_area(&probe, m.r, m.phi)?)
}

fn characterize_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let model = TrapModel::new(cfg.trap_configuration()?)?;
    let c = characterize(&model, &cfg.search_options())?;
    let atom = cfg.atom();
    let m = &c.minimum;
    let mut warnings = Vec::new();
    if !model.config.polarizations_orthogonal() {
        warnings.push("red and blue polarizations are not orthogonal".to_string());
    }
    if c.frequency_step_change.iter().any(|d| *d > 1e-3) {
        warnings.push(format!("trap frequencies change by {:?} between Hessian steps h and h/2", c.frequency_step_change));
    }
    let limiting = c
        .depth
        .channels
        .iter()
        .filter(|ch| ch.bound)
        .min_by(|a, b| a.barrier.total_cmp(&b.barrier))
        .map(|ch| ch.channel);
    let channels: Vec<Value> = c
        .depth
        .channels
        .iter()
        .map(|ch| {
            json!({
                "channel": ch.channel,
                "barrier_uK": num(micro_kelvin(ch.barrier)),
                "bound": ch.bound,
                "saddle": position(ch.saddle.0, ch.saddle.1, ch.saddle.2),
            })
        })
        .collect();
    let lights: Vec<Value> = model
        .lasers
        .iter()
        .zip(&c.light_potentials)
        .map(|(l, u)| json!({ "wavelength_nm": l.laser.wavelength / NM, "potential_uK": micro_kelvin(*u) }))
        .collect();
    let area = probe_area(cfg, m)?;
    let h = &c.frequencies.hessian;
    let payload = json!({
        "minimum": {
            "r_nm": m.r / NM,
            "distance_to_surface_nm": c.distance_to_surface / NM,
            "phi_deg": m.phi.to_degrees(),
            "z_nm": m.z / NM,
            "potential_uK": micro_kelvin(m.potential),
            "on_polarization_axis": m.on_polarization_axis,
            "on_antinode": m.on_antinode,
        },
        "frequencies_khz": {
            "radial": c.frequencies.radial * 1e-3,
            "axial": c.frequencies.axial * 1e-3,
            "azimuthal": c.frequencies.azimuthal * 1e-3,
        },
        "max_cross_coupling": c.frequencies.max_cross_coupling,
        "frequency_step_change": c.frequency_step_change,
        "hessian": { "matrix_j_per_m2": h.matrix, "step_nm": h.step / NM },
        "depth": {
            "depth_uK": num(micro_kelvin(c.depth.depth)),
            "limiting_channel": limiting.map_or(Value::Null, |ch: EscapeChannel| json!(ch)),
            "channels": channels,
        },
        "scattering_rate_per_s": c.scattering_rate,
        "coherence_time_ms": c.coherence_time * 1e3,
        "heating_lifetime_s": num(c.heating_lifetime),
        "antinode_spacing_nm": c.antinode_spacing.map(|s| s / NM),
        "max_linear_density_per_mm": c.max_linear_density.map(|d| d * 1e-3),
        "light_shift_estimate_mhz": c.light_shift_estimate * 1e-6,
        "light_potentials": lights,
        "vdw_potential_uK": micro_kelvin(c.vdw_potential),
        "probe": {
            "a_eff_um2": area * 1e12,
            "sigma0_over_a_eff": atom.cross_section / area,
        },
    });
    Ok(Output { payload, warnings, inputs: Vec::new() })
}

fn grid_value(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |u| format!("{:.6}", micro_kelvin(u)))
}

fn grid_row(buf: &mut String, p: &[f64; 3], v: Option<f64>) {
    let _ = writeln!(buf, "{:.4},{:.4},{:.4},{}", p[0] / NM, p[1] / NM, p[2] / NM, grid_value(v));
}

fn range(values: impl Iterator<Item = f64>) -> Value {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo <= hi {
        json!([lo, hi])
    } else {
        Value::Null
    }
}

pub fn mask_file_name(offset_uk: f64) -> String {
    format!("mask_{offset_uk}uK.csv")
}

fn grid(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Output, CliError> {
    let spec = cfg.export_grid();
    let cells = spec.cell_count();
    if cells > cfg.grids.max_cells {
        return Err(CliError::Validation(format!(
            "grids.export: {cells} cells exceeds the cap grids.max_cells = {}",
            cfg.grids.max_cells
        )));
    }
    let model = TrapModel::new(cfg.trap_configuration()?)?;
    let minimum = find_minimum(&model, &cfg.search_options())?;
    let offsets: Vec<f64> = cfg.grids.offsets_uk.iter().map(|o| o * 1e-6 * BOLTZMANN).collect();
    let g = equipotential_grid(&model, &minimum, &offsets, &spec);

    let header = "x,y,z,U_microK\n";
    let mut text = String::with_capacity(header.len() + 48 * g.points.len());
    text.push_str(header);
    for (p, v) in g.points.iter().zip(&g.values) {
        grid_row(&mut text, p, *v);
    }
    write_file(out_dir, "grid.csv", &text)?;

    let mut levels = Vec::new();
    let mut warnings = Vec::new();
    for (offset_uk, level) in cfg.grids.offsets_uk.iter().zip(&g.levels) {
        let name = mask_file_name(*offset_uk);
        let mut text = String::from(header);
        let mut rows = 0;
        for ((p, v), keep) in g.points.iter().zip(&g.values).zip(&level.mask) {
            if *keep {
                grid_row(&mut text, p, *v);
                rows += 1;
            }
        }
        write_file(out_dir, &name, &text)?;
        if rows == 0 {
            warnings.push(format!("level +{offset_uk} uK selects no grid points"));
        }
        let components: Vec<Value> = level
            .components
            .iter()
            .map(|c| {
                json!({
                    "size": c.size,
                    "centroid_nm": [c.centroid[0] / NM, c.centroid[1] / NM, c.centroid[2] / NM],
                    "surface_attached": c.surface_attached,
                })
            })
            .collect();
        let chains: Vec<Value> = level
            .chains
            .iter()
            .map(|ch| {
                json!({
                    "side": ch.side,
                    "sites": ch.centroid_z.len(),
                    "centroid_z_nm": ch.centroid_z.iter().map(|z| z / NM).collect::<Vec<_>>(),
                    "mean_spacing_nm": ch.mean_spacing.map(|s| s / NM),
                })
            })
            .collect();
        levels.push(json!({
            "offset_uK": offset_uk,
            "file": name,
            "rows": rows,
            "components": components,
            "chain_count": level.chains.len(),
            "chains": chains,
        }));
    }

    let finite = || g.values.iter().flatten().map(|u| micro_kelvin(*u));
    let coord = |k: usize| range(g.points.iter().map(move |p| p[k] / NM));
    let payload = json!({
        "grid": {
            "file": "grid.csv",
            "columns": ["x", "y", "z", "U_microK"],
            "length_unit": "nm",
            "rows": g.points.len(),
            "shape": spec.shape(),
            "spec": cfg.grids.export,
            "inside_fiber_rows": g.values.iter().filter(|v| v.is_none()).count(),
            "x_range_nm": coord(0),
            "y_range_nm": coord(1),
            "z_range_nm": coord(2),
            "u_range_uK": range(finite()),
        },
        "minimum": {
            "position": position(minimum.r, minimum.phi, minimum.z),
            "potential_uK": micro_kelvin(minimum.potential),
        },
        "levels": levels,
    });
    Ok(Output { payload, warnings, inputs: Vec::new() })
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn fit_spectrum_cmd(cfg: &ExperimentConfig, data: &Path, out_dir: &Path) -> Result<Output, CliError> {
    let table = ingest::read_table(data, &ingest::SPECTRUM_COLUMNS, 2)?;
    let dataset = ingest::spectrum(&table)?;
    let mode = cfg.spectrum_fit_mode()?;
    let opts = cfg.fit_options();
    let fit = fit_spectrum(&dataset, &mode, &opts)?;
    let mut warnings = table.warnings.clone();
    warnings.extend(fit.warnings.iter().cloned());
    if dataset.above_unity() > 0 {
        warnings.push(format!("{} points have transmission above 1", dataset.above_unity()));
    }

    let (eta, envelope) = match (&mode, cfg.fit.eta) {
        (_, Some(e)) => (e, None),
        (SpectrumFitMode::MultiComponent { components }, None) => {
            (broadening_recovery_factor(components, opts.gamma0)?, Some(envelope_fwhm(components, opts.gamma0)))
        }
        (SpectrumFitMode::SingleLine, None) => (1.0, None),
    };
    let absorbances = match cfg.fit.atom_number {
        Some(n) => {
            let a = derived_absorbances(fit.od, Estimate { value: n, uncertainty: cfg.fit.atom_number_uncertainty }, eta)?;
            json!({ "atom_number": n, "epsilon": estimate(&a.epsilon, 1.0), "epsilon0": estimate(&a.epsilon0, 1.0), "eta": a.eta })
        }
        None => Value::Null,
    };

    let lo = dataset.points.first().map_or(0.0, |p| p.detuning);
    let hi = dataset.points.last().map_or(0.0, |p| p.detuning);
    let mut curve = String::from("detuning_MHz,transmission\n");
    for d in linspace(lo, hi, cfg.fit.curve_points) {
        let t = match &mode {
            SpectrumFitMode::SingleLine => single_line_transmission(d, fit.od.value, fit.shift.value, fit.fwhm.value),
            SpectrumFitMode::MultiComponent { components } => {
                spectrum_model(d - fit.shift.value, fit.od.value, components, opts.gamma0)?
            }
        };
        let _ = writeln!(curve, "{},{}", d * 1e-6, t);
    }
    write_file(out_dir, "model_curve.csv", &curve)?;

    let payload = json!({
        "fit": {
            "mode": fit.mode,
            "od": estimate(&fit.od, 1.0),
            "shift_mhz": estimate(&fit.shift, 1e-6),
            "fwhm_mhz": estimate(&fit.fwhm, 1e-6),
            "parameter_names": fit.parameter_names,
            "covariance": fit.covariance,
            "residual_norm": fit.residual_norm,
            "reduced_chi_squared": num(fit.reduced_chi_squared),
            "weighted": fit.weighted,
            "iterations": fit.iterations,
            "converged": fit.converged,
        },
        "gamma0_mhz": opts.gamma0 * 1e-6,
        "envelope_fwhm_mhz": envelope.map(|w| w * 1e-6),
        "eta": eta,
        "absorbances": absorbances,
        "points": dataset.points.len(),
        "skipped_rows": table.warnings.len(),
        "model_curve": { "file": "model_curve.csv", "columns": ["detuning_MHz", "transmission"], "rows": cfg.fit.curve_points },
    });
    Ok(Output { payload, warnings, inputs: vec![hash_input("data", data)?] })
}

fn fit_saturation_cmd(cfg: &ExperimentConfig, data: &Path, out_dir: &Path) -> Result<Output, CliError> {
    let table = ingest::read_table(data, &ingest::SATURATION_COLUMNS, 2)?;
    let dataset = ingest::saturation(&table)?;
    let atom = cfg.atom();
    let (area, area_source) = match cfg.fit.saturation.a_eff_um2 {
        Some(a) => (a * 1e-12, "config"),
        None => {
            let model = TrapModel::new(cfg.trap_configuration()?)?;
            let m = find_minimum(&model, &cfg.search_options())?;
            (probe_area(cfg, &m)?, "probe mode at trap minimum")
        }
    };
    let model = SaturationModel::new(&atom, area)?;
    let fit = fit_saturation(&dataset, &model, &cfg.saturation_options())?;
    let mut warnings = table.warnings.clone();
    warnings.extend(fit.warnings.iter().cloned());

    let fitted = fit.saturation_scale.map_or(model, |s| model.with_saturation_scale(s.value));
    let p_lo = dataset.points.first().map_or(0.0, |p| p.incident);
    let p_hi = dataset.points.last().map_or(0.0, |p| p.incident);
    let mut curve = String::from("p_in_W,p_abs_W\n");
    if p_lo > 0.0 && p_hi > p_lo {
        let (l0, l1) = (p_lo.ln(), p_hi.ln());
        for x in linspace(l0, l1, cfg.fit.saturation.curve_points) {
            let p = x.exp();
            let _ = writeln!(curve, "{:e},{:e}", p, fitted.absorbed(p, fit.atom_number.value));
        }
    }
    write_file(out_dir, "saturation_curve.csv", &curve)?;

    let payload = json!({
        "atom_number": estimate(&fit.atom_number, 1.0),
        "saturation_scale": fit.saturation_scale.map(|s| estimate(&s, 1.0)),
        "power_per_atom_pw": fit.power_per_atom * 1e12,
        "asymptote_estimate": fit.asymptote_estimate,
        "a_eff_um2": area * 1e12,
        "a_eff_source": area_source,
        "single_atom_od": model.single_atom_od(),
        "saturation_reach": fit.saturation_reach,
        "degenerate": fit.degenerate,
        "residual_norm": fit.residual_norm,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "points": dataset.points.len(),
        "skipped_rows": table.warnings.len(),
        "model_curve": { "file": "saturation_curve.csv", "columns": ["p_in_W", "p_abs_W"] },
    });
    Ok(Output { payload, warnings, inputs: vec![hash_input("data", data)?] })
}
