//! Two-color evanescent-field trap: potential composition, minimum search,
//! trap frequencies, escape barriers, equipotential grids and the
//! collisional-blockade density bound.
//!
//! The potential is `U = sum_lasers -(1/4) alpha(lambda) |E|^2 - C3 / (r - a)^3`.
//! Fields at different wavelengths do not interfere. A standing-wave laser is
//! two counter-propagating HE11 modes of equal power per beam; the
//! longitudinal component flips sign on reflection, giving
//! `|E|^2 = 4 (|E_t|^2 cos^2(beta z) + |E_z|^2 sin^2(beta z))`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::{recoil_energy, scalar_polarizability, scattering_rate, AtomSpecies, SurfaceInteraction};
use crate::constants::{BOLTZMANN, PLANCK};
use crate::error::{Boundary, Error, Result};
use crate::fiber::{solve_he11, FiberSpec, GuidedMode, RadialProfile};

/// Average site occupancy in the collisional-blockade regime.
pub const BLOCKADE_OCCUPANCY: f64 = 0.5;
/// Relative slack on level-set comparisons so grid points at a minimum are kept.
pub const LEVEL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamGeometry {
    Running,
    Standing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapLaser {
    /// [m]
    pub wavelength: f64,
    /// Power in each beam [W]. Zero switches the laser off.
    pub power_per_beam: f64,
    /// Quasi-linear polarization axis [rad].
    pub pol_axis: f64,
    pub geometry: BeamGeometry,
}

impl TrapLaser {
    pub fn new(wavelength: f64, power_per_beam: f64, pol_axis: f64, geometry: BeamGeometry) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidParameter { name: "wavelength", reason: format!("must be > 0, got {wavelength}") });
        }
        if !(power_per_beam >= 0.0 && power_per_beam.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "power_per_beam",
                reason: format!("must be >= 0, got {power_per_beam}"),
            });
        }
        Ok(Self { wavelength, power_per_beam, pol_axis, geometry })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfiguration {
    pub fiber: FiberSpec,
    pub red: TrapLaser,
    pub blue: TrapLaser,
    pub atom: AtomSpecies,
    pub surface: SurfaceInteraction,
}

impl TrapConfiguration {
    /// 500 nm fiber, 2 x 2.2 mW standing wave at 1064 nm, 25 mW running wave
    /// at 780 nm, orthogonal linear polarizations, cesium.
    pub fn reference() -> Self {
        Self {
            fiber: FiberSpec::nanofiber_500nm(),
            red: TrapLaser { wavelength: 1064e-9, power_per_beam: 2.2e-3, pol_axis: 0.0, geometry: BeamGeometry::Standing },
            blue: TrapLaser { wavelength: 780e-9, power_per_beam: 25e-3, pol_axis: PI / 2.0, geometry: BeamGeometry::Running },
            atom: AtomSpecies::cesium133(),
            surface: SurfaceInteraction::cesium_silica(),
        }
    }

    pub fn polarizations_orthogonal(&self) -> bool {
        let d = (self.red.pol_axis - self.blue.pol_axis).rem_euclid(PI);
        (d - PI / 2.0).abs() < 1e-12
    }
}

/// One laser with its solved mode and polarizability.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserField {
    pub laser: TrapLaser,
    /// Single-beam mode at the per-beam power.
    pub mode: GuidedMode,
    pub polarizability: f64,
}

impl LaserField {
    /// `|E|^2` of the (possibly standing) field from a precomputed profile.
    fn field_sq(&self, p: &RadialProfile, phi: f64, z: f64) -> f64 {
        let (sin, cos) = (phi - self.mode.pol_axis).sin_cos();
        let a2 = self.mode.amplitude * self.mode.amplitude;
        let transverse = a2 * (p.e_r * p.e_r * cos * cos + p.e_phi * p.e_phi * sin * sin);
        let longitudinal = a2 * p.e_z * p.e_z * cos * cos;
        match self.laser.geometry {
            BeamGeometry::Running => transverse + longitudinal,
            BeamGeometry::Standing => {
                let (s, c) = (self.mode.beta * z).sin_cos();
                4.0 * (transverse * c * c + longitudinal * s * s)
            }
        }
    }

    pub fn field_sq_at(&self, r: f64, phi: f64, z: f64) -> f64 {
        self.field_sq(&self.mode.radial_profile(r), phi, z)
    }
}

/// `|E_total|^2` of two counter-propagating copies of `mode`.
pub fn standing_wave_intensity(mode: &GuidedMode, r: f64, phi: f64, z: f64) -> f64 {
    let (transverse, longitudinal) = mode.intensity_parts(r, phi);
    let (s, c) = (mode.beta * z).sin_cos();
    4.0 * (transverse * c * c + longitudinal * s * s)
}

/// Anything that can be evaluated as a potential in cylindrical coordinates.
pub trait PotentialField {
    /// Potential energy [J]; may be non-finite at excluded points.
    fn potential_at(&self, r: f64, phi: f64, z: f64) -> f64;
}

/// Trap configuration with its modes solved once.
#[derive(Debug, Clone)]
pub struct TrapModel {
    pub config: TrapConfiguration,
    pub lasers: Vec<LaserField>,
}

impl TrapModel {
    pub fn new(config: TrapConfiguration) -> Result<Self> {
        let mut lasers = Vec::new();
        for laser in [config.red, config.blue] {
            if laser.power_per_beam == 0.0 {
                continue;
            }
            let mode = solve_he11(&config.fiber, laser.wavelength, laser.power_per_beam, laser.pol_axis)?;
            let polarizability = scalar_polarizability(&config.atom, laser.wavelength)?;
            lasers.push(LaserField { laser, mode, polarizability });
        }
        Ok(Self { config, lasers })
    }

    pub fn radius(&self) -> f64 {
        self.config.fiber.radius
    }

    /// Axial lattice period `pi / beta` of the first standing-wave laser.
    pub fn lattice_period(&self) -> Option<f64> {
        self.lasers.iter().find(|l| l.laser.geometry == BeamGeometry::Standing).map(|l| PI / l.mode.beta)
    }

    /// Solved red mode, if the red laser is on.
    pub fn red_field(&self) -> Option<&LaserField> {
        self.lasers.iter().find(|l| l.laser == self.config.red)
    }

    fn profiles(&self, r: f64) -> Vec<RadialProfile> {
        self.lasers.iter().map(|l| l.mode.radial_profile(r)).collect()
    }

    fn potential_from_profiles(&self, profiles: &[RadialProfile], r: f64, phi: f64, z: f64) -> f64 {
        let light: f64 = self
            .lasers
            .iter()
            .zip(profiles)
            .map(|(l, p)| -0.25 * l.polarizability * l.field_sq(p, phi, z))
            .sum();
        light - self.config.surface.c3 / (r - self.radius()).powi(3)
    }

    /// Total potential [J]; `r` must lie outside the fiber.
    pub fn total_potential(&self, r: f64, phi: f64, z: f64) -> Result<f64> {
        if !(r > self.radius()) {
            return Err(Error::InsideFiber { r, radius: self.radius() });
        }
        Ok(self.potential_at(r, phi, z))
    }

    /// Per-laser light potentials and the van der Waals term at a point.
    pub fn potential_terms(&self, r: f64, phi: f64, z: f64) -> (Vec<f64>, f64) {
        let light = self.lasers.iter().map(|l| -0.25 * l.polarizability * l.field_sq_at(r, phi, z)).collect();
        (light, -self.config.surface.c3 / (r - self.radius()).powi(3))
    }

    /// Photon scattering rate from all trap lasers and the recoil heating
    /// rate `sum 2 E_rec Gamma_sc` [J/s] at a point.
    pub fn scattering(&self, r: f64, phi: f64, z: f64) -> Result<(f64, f64)> {
        let mut rate = 0.0;
        let mut heating = 0.0;
        for l in &self.lasers {
            let g = scattering_rate(&self.config.atom, l.laser.wavelength, l.field_sq_at(r, phi, z))?;
            rate += g;
            heating += 2.0 * recoil_energy(&self.config.atom, l.laser.wavelength) * g;
        }
        Ok((rate, heating))
    }
}

impl PotentialField for TrapModel {
    fn potential_at(&self, r: f64, phi: f64, z: f64) -> f64 {
        if r <= self.radius() {
            return f64::NAN;
        }
        self.potential_from_profiles(&self.profiles(r), r, phi, z)
    }
}

/// `total_potential` for a configuration (solves the modes on every call).
pub fn total_potential(cfg: &TrapConfiguration, r: f64, phi: f64, z: f64) -> Result<f64> {
    TrapModel::new(cfg.clone())?.total_potential(r, phi, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Radial search window past the surface [m].
    pub radial_extent: f64,
    /// Coarse grid samples (radial, azimuthal, axial).
    pub grid: [usize; 3],
    /// Final simplex size [m].
    pub position_tolerance: f64,
    /// Base finite-difference step for the Hessian [m].
    pub hessian_step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { radial_extent: 1.2e-6, grid: [64, 64, 64], position_tolerance: 1e-13, hessian_step: 2e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapMinimum {
    pub r: f64,
    pub phi: f64,
    pub z: f64,
    /// Potential at the minimum [J].
    pub potential: f64,
    /// The minimum lies on the red polarization axis (either side).
    pub on_polarization_axis: bool,
    /// The minimum lies on a standing-wave antinode.
    pub on_antinode: bool,
}

impl TrapMinimum {
    pub fn distance_to_surface(&self, radius: f64) -> f64 {
        self.r - radius
    }
}

/// Locate the deepest interior trap minimum in one lattice cell.
///
/// The van der Waals term diverges at the surface, so the search keeps only
/// discrete local minima of the coarse grid that are not on the radial
/// boundary, then polishes them with Nelder–Mead.
pub fn find_minimum(model: &TrapModel, opts: &SearchOptions) -> Result<TrapMinimum> {
    let a = model.radius();
    let [nr, nphi, nz] = opts.grid;
    if nr < 3 || nphi < 3 || nz < 1 {
        return Err(Error::InvalidParameter { name: "grid", reason: format!("too coarse: {:?}", opts.grid) });
    }
    let period = model.lattice_period();
    let nz = if period.is_some() { nz.max(1) } else { 1 };
    let dr = opts.radial_extent / nr as f64;
    let rs: Vec<f64> = (0..nr).map(|i| a + (i + 1) as f64 * dr).collect();
    let phis: Vec<f64> = (0..nphi).map(|j| 2.0 * PI * j as f64 / nphi as f64).collect();
    let zs: Vec<f64> = (0..nz).map(|k| period.unwrap_or(0.0) * k as f64 / nz as f64).collect();

    let values: Vec<f64> = rs
        .par_iter()
        .flat_map_iter(|&r| {
            let profiles = model.profiles(r);
            let mut row = Vec::with_capacity(nphi * nz);
            for &phi in &phis {
                for &z in &zs {
                    row.push(model.potential_from_profiles(&profiles, r, phi, z));
                }
            }
            row
        })
        .collect();
    let idx = |i: usize, j: usize, k: usize| (i * nphi + j) * nz + k;

    let mut candidates = Vec::new();
    for i in 1..nr - 1 {
        for j in 0..nphi {
            for k in 0..nz {
                let v = values[idx(i, j, k)];
                let mut is_min = true;
                'nb: for di in [-1i64, 0, 1] {
                    for dj in [-1i64, 0, 1] {
                        for dk in [-1i64, 0, 1] {
                            if di == 0 && dj == 0 && dk == 0 {
                                continue;
                            }
                            let ii = (i as i64 + di) as usize;
                            let jj = (j as i64 + dj).rem_euclid(nphi as i64) as usize;
                            let kk = (k as i64 + dk).rem_euclid(nz as i64) as usize;
                            if values[idx(ii, jj, kk)] < v {
                                is_min = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_min {
                    candidates.push((v, rs[i], phis[j], zs[k]));
                }
            }
        }
    }

    if candidates.is_empty() {
        let (gi, _) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        let i = gi / (nphi * nz);
        return Err(Error::NoMinimum(if i < nr / 2 { Boundary::Surface } else { Boundary::Outer }));
    }

    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<TrapMinimum> = None;
    for &(_, r0, phi0, z0) in candidates.iter().take(4) {
        let m = polish_minimum(model, r0, phi0, z0, dr, opts.position_tolerance);
        if m.r - a < 0.5 * dr {
            continue;
        }
        if best.is_none_or(|b| m.potential < b.potential) {
            best = Some(m);
        }
    }
    best.ok_or(Error::NoMinimum(Boundary::Surface))
}

fn polish_minimum(model: &TrapModel, r0: f64, phi0: f64, z0: f64, scale: f64, tol: f64) -> TrapMinimum {
    let a = model.radius();
    // local Cartesian offsets in meters: radial, arc length, axial
    let f = |x: &[f64; 3]| {
        let r = r0 + x[0];
        if r <= a {
            return f64::INFINITY;
        }
        model.potential_at(r, phi0 + x[1] / r0, z0 + x[2])
    };
    let best = nelder_mead(f, [0.0; 3], 0.5 * scale, tol, 20_000);
    let r = r0 + best[0];
    let mut phi = (phi0 + best[1] / r0).rem_euclid(2.0 * PI);
    let mut z = z0 + best[2];
    if let Some(p) = model.lattice_period() {
        z = z.rem_euclid(p);
        if p - z < 1e-15 {
            z = 0.0;
        }
    }
    if (2.0 * PI - phi) < 1e-15 {
        phi = 0.0;
    }
    let potential = model.potential_at(r, phi, z);
    let red_axis = model.config.red.pol_axis;
    let dphi = (phi - red_axis).rem_euclid(PI);
    let on_polarization_axis = dphi.min(PI - dphi) < 1e-6;
    let on_antinode = match model.lattice_period() {
        Some(p) => z.min(p - z) < 1e-12,
        None => true,
    };
    TrapMinimum { r, phi, z, potential, on_polarization_axis, on_antinode }
}

/// Nelder–Mead simplex minimization in three dimensions.
pub(crate) fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(f: F, start: [f64; 3], step: f64, xtol: f64, max_iter: usize) -> [f64; 3] {
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, f(&start)));
    for d in 0..3 {
        let mut p = start;
        p[d] += step;
        simplex.push((p, f(&p)));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| (0..3).map(|d| (p[d] - simplex[0].0[d]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < xtol {
            break;
        }
        let mut centroid = [0.0; 3];
        for (p, _) in &simplex[..3] {
            for d in 0..3 {
                centroid[d] += p[d] / 3.0;
            }
        }
        let worst = simplex[3];
        let along = |t: f64| -> [f64; 3] {
            let mut q = [0.0; 3];
            for d in 0..3 {
                q[d] = centroid[d] + t * (worst.0[d] - centroid[d]);
            }
            q
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                (x, f(&x))
            } else {
                let x = along(0.5);
                (x, f(&x))
            };
            if fc < worst.1.min(fr) {
                simplex[3] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    for d in 0..3 {
                        v.0[d] = best[d] + 0.5 * (v.0[d] - best[d]);
                    }
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].0
}

/// Hessian of a potential in the local Cartesian frame at a point,
/// coordinate order (radial, axial, azimuthal arc).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalHessian {
    pub matrix: [[f64; 3]; 3],
    pub step: f64,
}

fn local_point(r0: f64, phi0: f64, z0: f64, x: [f64; 3]) -> (f64, f64, f64) {
    // x = (radial, axial, tangential)
    let rx = r0 + x[0];
    let r = (rx * rx + x[2] * x[2]).sqrt();
    (r, phi0 + x[2].atan2(rx), z0 + x[1])
}

fn hessian_raw<P: PotentialField + ?Sized>(p: &P, at: (f64, f64, f64), h: f64) -> [[f64; 3]; 3] {
    let (r0, phi0, z0) = at;
    let eval = |x: [f64; 3]| {
        let (r, phi, z) = local_point(r0, phi0, z0, x);
        p.potential_at(r, phi, z)
    };
    let f0 = eval([0.0; 3]);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut xp = [0.0; 3];
        let mut xm = [0.0; 3];
        xp[i] = h;
        xm[i] = -h;
        m[i][i] = (eval(xp) - 2.0 * f0 + eval(xm)) / (h * h);
        for j in (i + 1)..3 {
            let mut pp = [0.0; 3];
            pp[i] = h;
            pp[j] = h;
            let mut pm = pp;
            pm[j] = -h;
            let mut mp = pp;
            mp[i] = -h;
            let mut mm = mp;
            mm[j] = -h;
            let v = (eval(pp) - eval(pm) - eval(mp) + eval(mm)) / (4.0 * h * h);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Central-difference Hessian with one Richardson extrapolation step.
pub fn local_hessian<P: PotentialField + ?Sized>(p: &P, at: (f64, f64, f64), step: f64) -> LocalHessian {
    let coarse = hessian_raw(p, at, step);
    let fine = hessian_raw(p, at, 0.5 * step);
    let mut matrix = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            matrix[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
        }
    }
    LocalHessian { matrix, step }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapFrequencies {
    /// [Hz]
    pub radial: f64,
    pub axial: f64,
    pub azimuthal: f64,
    /// Largest `|H_ij| / sqrt(H_ii H_jj)` over off-diagonal pairs.
    pub max_cross_coupling: f64,
    pub hessian: LocalHessian,
}

/// Trap frequencies `nu_i = sqrt(H_ii / m) / 2 pi` from the local Hessian.
pub fn frequencies_at<P: PotentialField + ?Sized>(p: &P, at: (f64, f64, f64), mass: f64, step: f64) -> Result<TrapFrequencies> {
    let hessian = local_hessian(p, at, step);
    let m = hessian.matrix;
    let diag = [m[0][0], m[1][1], m[2][2]];
    // Sylvester's criterion
    let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let d3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !(m[0][0] > 0.0 && d2 > 0.0 && d3 > 0.0) {
        return Err(Error::Saddle(diag));
    }
    let nu = |k: f64| (k / mass).sqrt() / (2.0 * PI);
    let mut cross: f64 = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            cross = cross.max(m[i][j].abs() / (m[i][i] * m[j][j]).sqrt());
        }
    }
    Ok(TrapFrequencies { radial: nu(diag[0]), axial: nu(diag[1]), azimuthal: nu(diag[2]), max_cross_coupling: cross, hessian })
}

pub fn trap_frequencies(model: &TrapModel, minimum: &TrapMinimum, step: f64) -> Result<TrapFrequencies> {
    frequencies_at(model, (minimum.r, minimum.phi, minimum.z), model.config.atom.mass, step)
}

/// Relative change of each frequency between base step `h` and `h/2`.
pub fn frequency_step_convergence(model: &TrapModel, minimum: &TrapMinimum, step: f64) -> Result<[f64; 3]> {
    let a = trap_frequencies(model, minimum, step)?;
    let b = trap_frequencies(model, minimum, 0.5 * step)?;
    Ok([
        ((a.radial - b.radial) / b.radial).abs(),
        ((a.axial - b.axial) / b.axial).abs(),
        ((a.azimuthal - b.azimuthal) / b.azimuthal).abs(),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeChannel {
    /// Radially inward onto the fiber.
    Surface,
    /// Radially outward, out of the evanescent field.
    Outward,
    /// Around the fiber to the opposite site family.
    Azimuthal,
    /// Along the fiber to the neighbouring lattice site.
    Axial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBarrier {
    pub channel: EscapeChannel,
    /// Barrier height above the minimum [J]; zero when unbound.
    pub barrier: f64,
    pub bound: bool,
    /// Position of the barrier top `(r, phi, z)`.
    pub saddle: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapDepth {
    /// Smallest barrier over all channels [J].
    pub depth: f64,
    pub channels: Vec<ChannelBarrier>,
}

impl TrapDepth {
    pub fn depth_kelvin(&self) -> f64 {
        self.depth / BOLTZMANN
    }

    pub fn channel(&self, c: EscapeChannel) -> Option<&ChannelBarrier> {
        self.channels.iter().find(|b| b.channel == c)
    }
}

const SURFACE_GUARD: f64 = 0.5e-9;

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

fn radial_barrier(model: &TrapModel, m: &TrapMinimum, inward: bool) -> ChannelBarrier {
    let a = model.radius();
    let far = m.r
        + 40.0
            * model
                .lasers
                .iter()
                .map(|l| l.mode.intensity_decay_length())
                .fold(0.0, f64::max)
                .max(1e-7);
    let (start, end) = if inward { (m.r, a + SURFACE_GUARD) } else { (m.r, far) };
    let n = 4000;
    let f = |r: f64| model.potential_at(r, m.phi, m.z);
    let mut best = (start, m.potential);
    for i in 1..=n {
        let r = start + (end - start) * i as f64 / n as f64;
        let v = f(r);
        if v > best.1 {
            best = (r, v);
        }
    }
    let channel = if inward { EscapeChannel::Surface } else { EscapeChannel::Outward };
    if best.0 == start {
        return ChannelBarrier { channel, barrier: 0.0, bound: false, saddle: (m.r, m.phi, m.z) };
    }
    let h = (end - start).abs() / n as f64;
    let (mut r_top, mut top) = golden_max(f, (best.0 - h).min(best.0 + h), (best.0 - h).max(best.0 + h), 1e-13);
    if !inward && top < 0.0 && best.0 == end {
        // still climbing toward zero at the far edge: the limit r -> inf is the barrier
        r_top = f64::INFINITY;
        top = 0.0;
    }
    ChannelBarrier { channel, barrier: top - m.potential, bound: true, saddle: (r_top, m.phi, m.z) }
}

/// Follow the valley floor (minimum over `r`) while a path parameter is
/// swept, returning the highest floor value and where it occurs.
fn valley_barrier<F: Fn(f64, f64) -> f64>(f: F, r_start: f64, r_floor: f64, params: &[f64]) -> (f64, f64, f64, bool) {
    let window = 40e-9;
    let samples = 41;
    let mut r_prev = r_start;
    let mut top = (f64::NEG_INFINITY, r_start, params[0]);
    let mut hit_surface = false;
    for &t in params {
        let mut lo = (r_prev - window).max(r_floor);
        let mut hi = r_prev + window;
        let mut found = None;
        for _ in 0..50 {
            let step = (hi - lo) / (samples - 1) as f64;
            let vals: Vec<(f64, f64)> = (0..samples).map(|i| lo + i as f64 * step).map(|r| (r, f(r, t))).collect();
            let (k, _) = vals.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).expect("samples");
            if k == 0 && lo <= r_floor {
                hit_surface = true;
                break;
            } else if k == 0 {
                hi = lo + 2.0 * step;
                lo = (lo - window).max(r_floor);
            } else if k == samples - 1 {
                lo = hi - 2.0 * step;
                hi += window;
            } else {
                let (r_min, v) = golden_min(|r| f(r, t), vals[k - 1].0, vals[k + 1].0, 1e-13);
                found = Some((r_min, v));
                break;
            }
        }
        match found {
            Some((r, v)) => {
                r_prev = r;
                if v > top.0 {
                    top = (v, r, t);
                }
            }
            None => {
                hit_surface = true;
            }
        }
        if hit_surface {
            break;
        }
    }
    (top.0, top.1, top.2, hit_surface)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_max(|x| -f(x), lo, hi, tol);
    (x, -v)
}

/// Escape barriers per channel and the headline depth (their minimum).
pub fn trap_depth(model: &TrapModel, m: &TrapMinimum) -> TrapDepth {
    let a = model.radius();
    let mut channels = vec![radial_barrier(model, m, true), radial_barrier(model, m, false)];

    let n_phi = 720;
    let phis: Vec<f64> = (0..=n_phi).map(|i| m.phi + PI * i as f64 / n_phi as f64).collect();
    let (top, r_top, phi_top, _) =
        valley_barrier(|r, phi| model.potential_at(r, phi, m.z), m.r, a + SURFACE_GUARD, &phis);
    channels.push(ChannelBarrier {
        channel: EscapeChannel::Azimuthal,
        barrier: (top - m.potential).max(0.0),
        bound: top > m.potential,
        saddle: (r_top, phi_top, m.z),
    });

    if let Some(period) = model.lattice_period() {
        let n_z = 400;
        let zs: Vec<f64> = (0..=n_z).map(|i| m.z + period * i as f64 / n_z as f64).collect();
        let (top, r_top, z_top, _) =
            valley_barrier(|r, z| model.potential_at(r, m.phi, z), m.r, a + SURFACE_GUARD, &zs);
        channels.push(ChannelBarrier {
            channel: EscapeChannel::Axial,
            barrier: (top - m.potential).max(0.0),
            bound: top > m.potential,
            saddle: (r_top, m.phi, z_top),
        });
    }
    let depth = channels.iter().map(|c| c.barrier).fold(f64::INFINITY, f64::min);
    TrapDepth { depth, channels }
}

/// Maximum linear atom density along the fiber [1/m]: two site families,
/// each site holding `occupancy` atoms on average, one site per `pi / beta`.
pub fn max_linear_density(model: &TrapModel, occupancy: f64) -> Result<f64> {
    let period = model.lattice_period().ok_or(Error::InvalidParameter {
        name: "red.geometry",
        reason: "a standing-wave laser is required for an axial lattice".into(),
    })?;
    Ok(2.0 * occupancy / period)
}

/// Ground-state light-shift estimate of the probe transition [Hz]: the
/// trapped ground state is lowered by `|U|`, so the transition moves up by `-U/h`.
pub fn light_shift_estimate(potential_min: f64) -> f64 {
    -potential_min / PLANCK
}

/// Full characterization of the default trap cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapCharacterization {
    pub minimum: TrapMinimum,
    pub distance_to_surface: f64,
    pub depth: TrapDepth,
    pub frequencies: TrapFrequencies,
    /// Relative frequency change between Hessian steps `h` and `h/2`.
    pub frequency_step_change: [f64; 3],
    /// Total trap-light scattering rate at the minimum [1/s].
    pub scattering_rate: f64,
    /// `1 / scattering_rate` [s].
    pub coherence_time: f64,
    /// Depth over the recoil heating rate [s].
    pub heating_lifetime: f64,
    pub antinode_spacing: Option<f64>,
    pub max_linear_density: Option<f64>,
    pub light_shift_estimate: f64,
    /// Per-laser light potentials and van der Waals term at the minimum [J].
    pub light_potentials: Vec<f64>,
    pub vdw_potential: f64,
}

pub fn characterize(model: &TrapModel, opts: &SearchOptions) -> Result<TrapCharacterization> {
    let minimum = find_minimum(model, opts)?;
    let frequencies = trap_frequencies(model, &minimum, opts.hessian_step)?;
    let frequency_step_change = frequency_step_convergence(model, &minimum, opts.hessian_step)?;
    let depth = trap_depth(model, &minimum);
    let (scattering_rate, heating) = model.scattering(minimum.r, minimum.phi, minimum.z)?;
    let (light_potentials, vdw_potential) = model.potential_terms(minimum.r, minimum.phi, minimum.z);
    Ok(TrapCharacterization {
        distance_to_surface: minimum.r - model.radius(),
        coherence_time: 1.0 / scattering_rate,
        heating_lifetime: depth.depth / heating,
        antinode_spacing: model.lattice_period(),
        max_linear_density: max_linear_density(model, BLOCKADE_OCCUPANCY).ok(),
        light_shift_estimate: light_shift_estimate(minimum.potential),
        minimum,
        depth,
        frequencies,
        frequency_step_change,
        scattering_rate,
        light_potentials,
        vdw_potential,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.min];
        }
        (0..self.count).map(|i| self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Cartesian { x: Axis, y: Axis, z: Axis },
    Cylindrical { r: Axis, phi: Axis, z: Axis },
}

impl GridSpec {
    pub fn shape(&self) -> [usize; 3] {
        match self {
            GridSpec::Cartesian { x, y, z } => [x.count, y.count, z.count],
            GridSpec::Cylindrical { r, phi, z } => [r.count, phi.count, z.count],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn z_axis(&self) -> Axis {
        match self {
            GridSpec::Cartesian { z, .. } | GridSpec::Cylindrical { z, .. } => *z,
        }
    }
}

/// Connected group of grid points below a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteComponent {
    pub size: usize,
    /// Centroid in Cartesian coordinates [m].
    pub centroid: [f64; 3],
    /// Region pulled onto the fiber by the van der Waals term rather than a
    /// trap site: it borders the fiber or dips below the trap minimum.
    pub surface_attached: bool,
}

/// Components on one side of the fiber, ordered along z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteChain {
    /// Azimuth of the side (the minimum's azimuth or opposite) [rad].
    pub side: f64,
    pub centroid_z: Vec<f64>,
    /// Mean spacing of consecutive centroids [m]; `None` with fewer than two sites.
    pub mean_spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    /// Level above the trap minimum [J].
    pub offset: f64,
    pub mask: Vec<bool>,
    pub components: Vec<SiteComponent>,
    pub chains: Vec<SiteChain>,
}

impl LevelSet {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipotentialGrid {
    pub spec: GridSpec,
    /// Reference minimum energy [J].
    pub reference: f64,
    /// Cartesian coordinates of each grid point, layout `(i * n1 + j) * n2 + k`.
    pub points: Vec<[f64; 3]>,
    /// Potential [J]; `None` inside the fiber.
    pub values: Vec<Option<f64>>,
    pub levels: Vec<LevelSet>,
}

/// Sample the potential on a grid and classify level sets
/// `U <= U_min + offset` for each offset.
pub fn equipotential_grid(model: &TrapModel, minimum: &TrapMinimum, offsets: &[f64], spec: &GridSpec) -> EquipotentialGrid {
    let a = model.radius();
    let [n0, n1, n2] = spec.shape();
    let (ax0, ax1, ax2) = match spec {
        GridSpec::Cartesian { x, y, z } => (x.values(), y.values(), z.values()),
        GridSpec::Cylindrical { r, phi, z } => (r.values(), phi.values(), z.values()),
    };
    let cylindrical = matches!(spec, GridSpec::Cylindrical { .. });
    let rows: Vec<(Vec<[f64; 3]>, Vec<Option<f64>>)> = (0..n0)
        .into_par_iter()
        .map(|i| {
            let mut pts = Vec::with_capacity(n1 * n2);
            let mut vals = Vec::with_capacity(n1 * n2);
            for j in 0..n1 {
                let (r, phi) = if cylindrical {
                    (ax0[i], ax1[j])
                } else {
                    let (x, y) = (ax0[i], ax1[j]);
                    ((x * x + y * y).sqrt(), y.atan2(x))
                };
                let (x, y) = (r * phi.cos(), r * phi.sin());
                let profiles = if r > a { Some(model.profiles(r)) } else { None };
                for &z in &ax2 {
                    pts.push(if cylindrical { [x, y, z] } else { [ax0[i], ax1[j], z] });
                    vals.push(profiles.as_ref().map(|p| model.potential_from_profiles(p, r, phi, z)));
                }
            }
            (pts, vals)
        })
        .collect();
    let mut points = Vec::with_capacity(n0 * n1 * n2);
    let mut values = Vec::with_capacity(n0 * n1 * n2);
    for (p, v) in rows {
        points.extend(p);
        values.extend(v);
    }

    let reference = minimum.potential;
    let levels = offsets
        .iter()
        .map(|&offset| {
            let threshold = reference + offset + LEVEL_TOLERANCE * reference.abs();
            let mask: Vec<bool> =
                values.iter().map(|v| offset >= 0.0 && v.is_some_and(|u| u <= threshold)).collect();
            let components = connected_components(&mask, [n0, n1, n2], &points, &values, reference - LEVEL_TOLERANCE * reference.abs());
            let chains = group_chains(&components, minimum.phi);
            LevelSet { offset, mask, components, chains }
        })
        .collect();
    EquipotentialGrid { spec: *spec, reference, points, values, levels }
}

fn connected_components(
    mask: &[bool],
    shape: [usize; 3],
    points: &[[f64; 3]],
    values: &[Option<f64>],
    floor: f64,
) -> Vec<SiteComponent> {
    let [n0, n1, n2] = shape;
    let idx = |i: usize, j: usize, k: usize| (i * n1 + j) * n2 + k;
    let mut label = vec![usize::MAX; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut sum = [0.0; 3];
        let mut size = 0;
        let mut surface_attached = false;
        while let Some(c) = stack.pop() {
            size += 1;
            if values[c].is_none_or(|u| u < floor) {
                surface_attached = true;
            }
            for d in 0..3 {
                sum[d] += points[c][d];
            }
            let (i, j, k) = (c / (n1 * n2), (c / n2) % n1, c % n2);
            let mut push = |ii: usize, jj: usize, kk: usize| {
                let n = idx(ii, jj, kk);
                if values[n].is_none() {
                    surface_attached = true;
                }
                if mask[n] && label[n] == usize::MAX {
                    label[n] = id;
                    stack.push(n);
                }
            };
            if i > 0 {
                push(i - 1, j, k);
            }
            if i + 1 < n0 {
                push(i + 1, j, k);
            }
            if j > 0 {
                push(i, j - 1, k);
            }
            if j + 1 < n1 {
                push(i, j + 1, k);
            }
            if k > 0 {
                push(i, j, k - 1);
            }
            if k + 1 < n2 {
                push(i, j, k + 1);
            }
        }
        let n = size as f64;
        out.push(SiteComponent { size, centroid: [sum[0] / n, sum[1] / n, sum[2] / n], surface_attached });
    }
    out
}

fn group_chains(components: &[SiteComponent], phi_min: f64) -> Vec<SiteChain> {
    let (s, c) = phi_min.sin_cos();
    let mut sides: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for comp in components.iter().filter(|c| !c.surface_attached) {
        let proj = comp.centroid[0] * c + comp.centroid[1] * s;
        sides[if proj >= 0.0 { 0 } else { 1 }].push(comp.centroid[2]);
    }
    sides
        .into_iter()
        .enumerate()
        .filter(|(_, zs)| !zs.is_empty())
        .map(|(side, mut zs)| {
            zs.sort_by(|a, b| a.total_cmp(b));
            let mean_spacing = (zs.len() > 1).then(|| (zs[zs.len() - 1] - zs[0]) / (zs.len() - 1) as f64);
            SiteChain { side: (phi_min + PI * side as f64).rem_euclid(2.0 * PI), centroid_z: zs, mean_spacing }
        })
        .collect()
}
