//! Experiment description: parsing, default materialization and the
//! conversion from boundary units (nm, mW, pW, deg, MHz, uK) to SI.

use std::path::Path;

use nanofiber_trap::atomic::{AtomSpecies, SurfaceInteraction};
use nanofiber_trap::spectroscopy::{FitOptions, LineComponent, SaturationFitOptions, SpectrumFitMode};
use nanofiber_trap::trap::{Axis, BeamGeometry, GridSpec, SearchOptions, TrapConfiguration, TrapLaser};
use nanofiber_trap::{CoreIndex, FiberSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The built-in reference parameter set used by `--paper-defaults`.
pub const PAPER_DEFAULTS: &str = include_str!("../fixtures/paper.toml");

const NM: f64 = 1e-9;
const MHZ: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fiber: FiberConfig,
    pub lasers: LasersConfig,
    #[serde(default)]
    pub atom: AtomConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub grids: GridsConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub radius_nm: f64,
    /// `"sellmeier"` (fused silica dispersion) or a constant index.
    #[serde(default)]
    pub n_core: CoreIndexConfig,
    #[serde(default = "one")]
    pub n_clad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoreIndexConfig {
    Model(IndexModel),
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexModel {
    Sellmeier,
}

impl Default for CoreIndexConfig {
    fn default() -> Self {
        CoreIndexConfig::Model(IndexModel::Sellmeier)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LasersConfig {
    pub red: BeamConfig,
    pub blue: BeamConfig,
    pub probe: ProbeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub wavelength_nm: f64,
    /// Zero switches the beam off.
    pub power_mw_per_beam: f64,
    pub pol_deg: f64,
    pub standing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub wavelength_nm: f64,
    pub power_pw: f64,
    /// When absent the probe is polarized along the azimuth of the trapped atoms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pol_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub species: String,
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self { species: "Cs133".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    /// van der Waals coefficient [J m^3].
    #[serde(rename = "C3_SI")]
    pub c3_si: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { c3_si: SurfaceInteraction::CS_SILICA_C3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsConfig {
    pub radial_samples: usize,
    pub azimuthal_samples: usize,
    pub axial_samples: usize,
    /// Radial search window beyond the fiber surface.
    pub radial_extent_nm: f64,
    pub position_tolerance_nm: f64,
    pub hessian_step_nm: f64,
    /// Distances from the surface at which mode areas are tabulated.
    pub profile_distances_nm: Vec<f64>,
    /// Level-set offsets above the trap minimum.
    #[serde(rename = "offsets_uK")]
    pub offsets_uk: Vec<f64>,
    pub max_cells: usize,
    pub export: ExportGrid,
}

impl Default for GridsConfig {
    fn default() -> Self {
        let search = SearchOptions::default();
        Self {
            radial_samples: search.grid[0],
            azimuthal_samples: search.grid[1],
            axial_samples: search.grid[2],
            radial_extent_nm: search.radial_extent / NM,
            position_tolerance_nm: search.position_tolerance / NM,
            hessian_step_nm: search.hessian_step / NM,
            profile_distances_nm: vec![100.0, 150.0, 200.0, 230.0, 250.0, 300.0, 400.0, 500.0],
            offsets_uk: vec![40.0, 125.0],
            max_cells: 2_000_000,
            export: ExportGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Export grid in nm (and degrees for `phi_deg`). Cartesian `x` runs along
/// the red polarization axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExportGrid {
    Cartesian { x_nm: AxisConfig, y_nm: AxisConfig, z_nm: AxisConfig },
    Cylindrical { r_nm: AxisConfig, phi_deg: AxisConfig, z_nm: AxisConfig },
}

impl Default for ExportGrid {
    fn default() -> Self {
        ExportGrid::Cartesian {
            x_nm: AxisConfig { min: -900.0, max: 900.0, count: 61 },
            y_nm: AxisConfig { min: -300.0, max: 300.0, count: 21 },
            z_nm: AxisConfig { min: -750.0, max: 750.0, count: 61 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModeConfig {
    SingleLine,
    MultiComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub shift_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub mode: FitModeConfig,
    pub components: Vec<ComponentConfig>,
    pub renormalize: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Defaults to the natural linewidth of the cycling line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0_mhz: Option<f64>,
    /// Atom number used for the per-atom absorbance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom_number: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom_number_uncertainty: Option<f64>,
    /// Broadening factor; defaults to the value computed from the component
    /// pattern, or 1 for a single line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub curve_points: usize,
    pub saturation: SaturationConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: FitModeConfig::SingleLine,
            components: Vec::new(),
            renormalize: false,
            max_iterations: 200,
            tolerance: 1e-12,
            gamma0_mhz: None,
            atom_number: None,
            atom_number_uncertainty: None,
            eta: None,
            curve_points: 401,
            saturation: SaturationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaturationConfig {
    /// Probe mode area at the atoms; computed at the trap minimum when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_eff_um2: Option<f64>,
    pub fit_saturation_scale: bool,
    pub relative_residuals: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub curve_points: usize,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        let o = SaturationFitOptions::default();
        Self {
            a_eff_um2: None,
            fit_saturation_scale: o.fit_saturation_scale,
            relative_residuals: o.relative_residuals,
            max_iterations: o.max_iterations,
            tolerance: o.tolerance,
            curve_points: 201,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Parsed configuration plus what went into it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub source: Option<std::path::PathBuf>,
    pub paper_defaults: bool,
}

/// Reads a TOML (or `.json`) file, optionally layered over the reference
/// parameter set, and validates it.
pub fn load(path: Option<&Path>, paper_defaults: bool) -> Result<LoadedConfig, CliError> {
    let mut tree = if paper_defaults {
        toml::from_str::<toml::Value>(PAPER_DEFAULTS).expect("bundled defaults parse")
    } else {
        toml::Value::Table(Default::default())
    };
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        let user = parse_tree(&text, p)?;
        merge(&mut tree, user);
    } else if !paper_defaults {
        return Err(CliError::Validation("no configuration: pass --config <file> and/or --paper-defaults".into()));
    }
    let mut config = from_tree(tree)?;
    config.validate()?;
    if config.fit.gamma0_mhz.is_none() {
        config.fit.gamma0_mhz = Some(nanofiber_trap::spectroscopy::natural_linewidth_hz(&config.atom()) / MHZ);
    }
    Ok(LoadedConfig { config, source: path.map(Path::to_path_buf), paper_defaults })
}

fn parse_tree(text: &str, path: &Path) -> Result<toml::Value, CliError> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let json: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        toml::Value::try_from(json).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

/// Tables merge recursively; anything else in `over` replaces `base`.
pub fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn from_tree(tree: toml::Value) -> Result<ExperimentConfig, CliError> {
    serde_path_to_error::deserialize(tree).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Validation(inner.to_string())
        } else {
            CliError::Validation(format!("{path}: {inner}"))
        }
    })
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {reason}"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a positive finite number, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be >= 0, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn check_axis(field: &str, a: &AxisConfig) -> Result<(), CliError> {
    finite(&format!("{field}.min"), a.min)?;
    finite(&format!("{field}.max"), a.max)?;
    if a.count == 0 {
        return Err(invalid(&format!("{field}.count"), "must be at least 1"));
    }
    if a.count > 1 && !(a.max > a.min) {
        return Err(invalid(field, format!("max ({}) must exceed min ({})", a.max, a.min)));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("fiber.radius_nm", self.fiber.radius_nm)?;
        if let CoreIndexConfig::Constant(n) = self.fiber.n_core {
            positive("fiber.n_core", n)?;
        }
        positive("fiber.n_clad", self.fiber.n_clad)?;
        for (name, b) in [("red", &self.lasers.red), ("blue", &self.lasers.blue)] {
            positive(&format!("lasers.{name}.wavelength_nm"), b.wavelength_nm)?;
            non_negative(&format!("lasers.{name}.power_mw_per_beam"), b.power_mw_per_beam)?;
            finite(&format!("lasers.{name}.pol_deg"), b.pol_deg)?;
        }
        positive("lasers.probe.wavelength_nm", self.lasers.probe.wavelength_nm)?;
        positive("lasers.probe.power_pw", self.lasers.probe.power_pw)?;
        if let Some(p) = self.lasers.probe.pol_deg {
            finite("lasers.probe.pol_deg", p)?;
        }
        if self.atom.species != "Cs133" {
            return Err(invalid("atom.species", format!("unknown species {:?} (supported: \"Cs133\")", self.atom.species)));
        }
        positive("surface.C3_SI", self.surface.c3_si)?;

        let g = &self.grids;
        for (name, n) in [
            ("grids.radial_samples", g.radial_samples),
            ("grids.azimuthal_samples", g.azimuthal_samples),
            ("grids.axial_samples", g.axial_samples),
        ] {
            if n < 4 {
                return Err(invalid(name, format!("need at least 4 samples, got {n}")));
            }
        }
        positive("grids.radial_extent_nm", g.radial_extent_nm)?;
        positive("grids.position_tolerance_nm", g.position_tolerance_nm)?;
        positive("grids.hessian_step_nm", g.hessian_step_nm)?;
        for d in &g.profile_distances_nm {
            positive("grids.profile_distances_nm", *d)?;
        }
        for o in &g.offsets_uk {
            finite("grids.offsets_uK", *o)?;
        }
        if g.max_cells == 0 {
            return Err(invalid("grids.max_cells", "must be at least 1"));
        }
        match &g.export {
            ExportGrid::Cartesian { x_nm, y_nm, z_nm } => {
                check_axis("grids.export.x_nm", x_nm)?;
                check_axis("grids.export.y_nm", y_nm)?;
                check_axis("grids.export.z_nm", z_nm)?;
            }
            ExportGrid::Cylindrical { r_nm, phi_deg, z_nm } => {
                check_axis("grids.export.r_nm", r_nm)?;
                check_axis("grids.export.phi_deg", phi_deg)?;
                check_axis("grids.export.z_nm", z_nm)?;
                if r_nm.min < 0.0 {
                    return Err(invalid("grids.export.r_nm.min", "radius must be >= 0"));
                }
            }
        }

        let f = &self.fit;
        if f.max_iterations == 0 {
            return Err(invalid("fit.max_iterations", "must be at least 1"));
        }
        positive("fit.tolerance", f.tolerance)?;
        if let Some(v) = f.gamma0_mhz {
            positive("fit.gamma0_mhz", v)?;
        }
        if let Some(v) = f.atom_number {
            positive("fit.atom_number", v)?;
        }
        if let Some(v) = f.atom_number_uncertainty {
            non_negative("fit.atom_number_uncertainty", v)?;
        }
        if let Some(v) = f.eta {
            positive("fit.eta", v)?;
        }
        if f.mode == FitModeConfig::MultiComponent && f.components.is_empty() {
            return Err(invalid("fit.components", "multi_component mode needs at least one component"));
        }
        for c in &f.components {
            finite("fit.components.shift_mhz", c.shift_mhz)?;
        }
        if f.curve_points < 2 {
            return Err(invalid("fit.curve_points", "need at least 2"));
        }
        let s = &f.saturation;
        if let Some(v) = s.a_eff_um2 {
            positive("fit.saturation.a_eff_um2", v)?;
        }
        if s.max_iterations == 0 {
            return Err(invalid("fit.saturation.max_iterations", "must be at least 1"));
        }
        positive("fit.saturation.tolerance", s.tolerance)?;
        if s.curve_points < 2 {
            return Err(invalid("fit.saturation.curve_points", "need at least 2"));
        }
        Ok(())
    }

    pub fn atom(&self) -> AtomSpecies {
        AtomSpecies::cesium133()
    }

    pub fn fiber_spec(&self) -> Result<FiberSpec, CliError> {
        let core = match self.fiber.n_core {
            CoreIndexConfig::Model(IndexModel::Sellmeier) => CoreIndex::Sellmeier,
            CoreIndexConfig::Constant(n) => CoreIndex::Constant(n),
        };
        Ok(FiberSpec::with_cladding(self.fiber.radius_nm * NM, core, self.fiber.n_clad)?)
    }

    pub fn trap_configuration(&self) -> Result<TrapConfiguration, CliError> {
        let laser = |b: &BeamConfig| {
            let geometry = if b.standing { BeamGeometry::Standing } else { BeamGeometry::Running };
            TrapLaser::new(b.wavelength_nm * NM, b.power_mw_per_beam * 1e-3, b.pol_deg.to_radians(), geometry)
        };
        Ok(TrapConfiguration {
            fiber: self.fiber_spec()?,
            red: laser(&self.lasers.red)?,
            blue: laser(&self.lasers.blue)?,
            atom: self.atom(),
            surface: SurfaceInteraction::new(self.surface.c3_si)?,
        })
    }

    pub fn search_options(&self) -> SearchOptions {
        let g = &self.grids;
        SearchOptions {
            radial_extent: g.radial_extent_nm * NM,
            grid: [g.radial_samples, g.azimuthal_samples, g.axial_samples],
            position_tolerance: g.position_tolerance_nm * NM,
            hessian_step: g.hessian_step_nm * NM,
        }
    }

    pub fn export_grid(&self) -> GridSpec {
        let ax = |a: &AxisConfig, scale: f64| Axis::new(a.min * scale, a.max * scale, a.count);
        match &self.grids.export {
            ExportGrid::Cartesian { x_nm, y_nm, z_nm } => {
                GridSpec::Cartesian { x: ax(x_nm, NM), y: ax(y_nm, NM), z: ax(z_nm, NM) }
            }
            ExportGrid::Cylindrical { r_nm, phi_deg, z_nm } => GridSpec::Cylindrical {
                r: ax(r_nm, NM),
                phi: ax(phi_deg, std::f64::consts::PI / 180.0),
                z: ax(z_nm, NM),
            },
        }
    }

    pub fn components(&self) -> Vec<LineComponent> {
        self.fit.components.iter().map(|c| LineComponent { weight: c.weight, shift: c.shift_mhz * MHZ }).collect()
    }

    pub fn spectrum_fit_mode(&self) -> Result<SpectrumFitMode, CliError> {
        Ok(match self.fit.mode {
            FitModeConfig::SingleLine => SpectrumFitMode::SingleLine,
            FitModeConfig::MultiComponent => {
                let components = nanofiber_trap::spectroscopy::validate_components(&self.components(), self.fit.renormalize)?;
                SpectrumFitMode::MultiComponent { components }
            }
        })
    }

    pub fn fit_options(&self) -> FitOptions {
        let mut o = FitOptions::for_atom(&self.atom());
        o.max_iterations = self.fit.max_iterations;
        o.tolerance = self.fit.tolerance;
        if let Some(g) = self.fit.gamma0_mhz {
            o.gamma0 = g * MHZ;
        }
        o
    }

    pub fn saturation_options(&self) -> SaturationFitOptions {
        let s = &self.fit.saturation;
        SaturationFitOptions {
            fit_saturation_scale: s.fit_saturation_scale,
            relative_residuals: s.relative_residuals,
            max_iterations: s.max_iterations,
            tolerance: s.tolerance,
        }
    }
}
