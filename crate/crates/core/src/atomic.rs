//! Cesium D-line data and the far-detuned atom-light response.
//!
//! The ground-state scalar polarizability is the two-line sum with
//! counter-rotating terms,
//!
//! `alpha(w) = sum_l s_l (3 pi eps0 c^3 Gamma_l / w_l^3) [1/(w_l - w) + 1/(w_l + w)]`,
//!
//! so that `U = -(1/4) alpha |E|^2`. Line strengths are 2/3 (D2) and 1/3 (D1).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{ATOMIC_MASS_UNIT, HBAR, PLANCK, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicLine {
    pub label: String,
    /// Vacuum wavelength of the line center [m].
    pub wavelength: f64,
    /// Natural linewidth (excited-state decay rate) [rad/s].
    pub linewidth: f64,
    /// Relative contribution to the ground-state scalar polarizability.
    pub strength: f64,
}

impl AtomicLine {
    pub fn omega(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.wavelength
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    pub name: String,
    pub lines: Vec<AtomicLine>,
    /// [kg]
    pub mass: f64,
    /// Saturation intensity of the D2 cycling transition [W/m^2].
    pub saturation_intensity: f64,
    /// Resonant cross section of the D2 cycling transition, `3 lambda^2 / 2 pi` [m^2].
    pub cross_section: f64,
}

/// Resonant cross section of a closed two-level transition.
pub fn cycling_cross_section(wavelength: f64) -> f64 {
    3.0 * wavelength * wavelength / (2.0 * PI)
}

impl AtomSpecies {
    /// Builds a species, deriving the cycling-transition cross section and
    /// saturation intensity from the first (cycling) line.
    pub fn new(name: &str, lines: Vec<AtomicLine>, mass: f64) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::InvalidParameter { name: "lines", reason: "at least one line required".into() });
        }
        let total: f64 = lines.iter().map(|l| l.strength).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter { name: "lines", reason: format!("strengths sum to {total}, not 1") });
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter { name: "mass", reason: format!("must be > 0, got {mass}") });
        }
        let cycling = &lines[0];
        let cross_section = cycling_cross_section(cycling.wavelength);
        let saturation_intensity = HBAR * cycling.omega() * cycling.linewidth / (2.0 * cross_section);
        Ok(Self { name: name.to_string(), lines, mass, saturation_intensity, cross_section })
    }

    /// Cesium-133 D2 (852 nm) and D1 (894 nm) lines.
    pub fn cesium133() -> Self {
        let lines = vec![
            AtomicLine {
                label: "D2".into(),
                wavelength: 852.347_275_82e-9,
                linewidth: 2.0 * PI * 5.2227e6,
                strength: 2.0 / 3.0,
            },
            AtomicLine {
                label: "D1".into(),
                wavelength: 894.592_959_86e-9,
                linewidth: 2.0 * PI * 4.5612e6,
                strength: 1.0 / 3.0,
            },
        ];
        Self::new("Cs133", lines, 132.905_451_961 * ATOMIC_MASS_UNIT).expect("built-in cesium data")
    }

    /// The cycling (probe) line.
    pub fn cycling_line(&self) -> &AtomicLine {
        &self.lines[0]
    }

    fn check_off_resonance(&self, wavelength: f64) -> Result<f64> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidParameter { name: "wavelength", reason: format!("must be > 0, got {wavelength}") });
        }
        let omega = 2.0 * PI * SPEED_OF_LIGHT / wavelength;
        for line in &self.lines {
            if (line.omega() - omega).abs() < line.linewidth {
                return Err(Error::Resonance { wavelength, line: line.label.clone() });
            }
        }
        Ok(omega)
    }
}

/// Ground-state scalar polarizability [C m^2 / V].
pub fn scalar_polarizability(atom: &AtomSpecies, wavelength: f64) -> Result<f64> {
    let omega = atom.check_off_resonance(wavelength)?;
    Ok(atom
        .lines
        .iter()
        .map(|l| {
            let w0 = l.omega();
            l.strength * 3.0 * PI * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT.powi(3) * l.linewidth / w0.powi(3)
                * (1.0 / (w0 - omega) + 1.0 / (w0 + omega))
        })
        .sum())
}

/// Optical dipole potential `U = -(1/4) alpha |E|^2` [J].
pub fn dipole_potential(atom: &AtomSpecies, wavelength: f64, field_sq: f64) -> Result<f64> {
    if !(field_sq >= 0.0) {
        return Err(Error::InvalidParameter { name: "field_sq", reason: format!("must be >= 0, got {field_sq}") });
    }
    Ok(-0.25 * scalar_polarizability(atom, wavelength)? * field_sq)
}

/// Photon scattering rate [1/s] for a vacuum field with `|E|^2 = field_sq`.
pub fn scattering_rate(atom: &AtomSpecies, wavelength: f64, field_sq: f64) -> Result<f64> {
    let omega = atom.check_off_resonance(wavelength)?;
    let intensity = 0.5 * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT * field_sq;
    Ok(atom
        .lines
        .iter()
        .map(|l| {
            let w0 = l.omega();
            let amp = l.linewidth / (w0 - omega) + l.linewidth / (w0 + omega);
            l.strength * 3.0 * PI * SPEED_OF_LIGHT.powi(2) / (2.0 * HBAR * w0.powi(3)) * (omega / w0).powi(3) * amp * amp
        })
        .sum::<f64>()
        * intensity)
}

/// Power radiated by one fully saturated atom on the cycling line,
/// `hbar w * Gamma / 2` [W].
pub fn saturated_power_per_atom(atom: &AtomSpecies) -> f64 {
    let line = atom.cycling_line();
    HBAR * line.omega() * line.linewidth / 2.0
}

/// Photon recoil energy `(hbar k)^2 / 2m` at `wavelength` [J].
pub fn recoil_energy(atom: &AtomSpecies, wavelength: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    (HBAR * k).powi(2) / (2.0 * atom.mass)
}

/// Atom-surface van der Waals interaction `U = -C3 / d^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceInteraction {
    /// [J m^3]
    pub c3: f64,
}

impl SurfaceInteraction {
    /// Literature default for ground-state cesium near fused silica,
    /// `C3 / h = 1.16 kHz um^3`.
    pub const CS_SILICA_C3: f64 = PLANCK * 1.16e3 * 1e-18;

    pub fn new(c3: f64) -> Result<Self> {
        if !(c3 > 0.0 && c3.is_finite()) {
            return Err(Error::InvalidParameter { name: "c3", reason: format!("must be > 0, got {c3}") });
        }
        Ok(Self { c3 })
    }

    pub fn cesium_silica() -> Self {
        Self { c3: Self::CS_SILICA_C3 }
    }

    /// `-C3 / d^3` for distance `d` from the surface [J].
    pub fn potential(&self, distance: f64) -> Result<f64> {
        if !(distance > 0.0) {
            return Err(Error::NonPositiveDistance(distance));
        }
        Ok(-self.c3 / distance.powi(3))
    }
}

pub fn vdw_potential(surface: &SurfaceInteraction, distance: f64) -> Result<f64> {
    surface.potential(distance)
}
