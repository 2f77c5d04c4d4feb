//! Exact HE11 mode of a step-index cylindrical waveguide with a homogeneous
//! cladding (a silica nanofiber in vacuum).
//!
//! Field convention: complex analytic amplitudes with time dependence
//! `exp(-i omega t)` and a forward mode varying as `exp(+i beta z)`. The local
//! intensity in a homogeneous region of index `n` is `(eps0 c n / 2) |E|^2`.
//! Other modules consume `|E|^2` directly.
//!
//! For the quasi-linearly polarized mode with polarization axis `phi0` the
//! components are
//!
//! ```text
//! E_r   =     A e_r(r) cos(phi - phi0)
//! E_phi =     A e_phi(r) sin(phi - phi0)
//! E_z   = i   A e_z(r) cos(phi - phi0)
//! ```
//!
//! with real radial profiles built from `J0, J1, J2` in the core and
//! `K0, K1, K2` in the cladding.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j01, bessel_j1_prime, bessel_j2, bessel_k01, bessel_k1_prime};
use crate::constants::{SPEED_OF_LIGHT, VACUUM_PERMEABILITY, VACUUM_PERMITTIVITY};
use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;

/// Samples used to bracket the HE11 root.
pub const BRACKET_SAMPLES: usize = 2048;
/// Single-mode cutoff of the next mode family (first zero of J0).
pub const SINGLE_MODE_CUTOFF: f64 = 2.404_825_557_695_773;
/// Cladding integration extends this many field decay constants past the surface.
const CLADDING_DECAY_SPAN: f64 = 40.0;

/// Refractive index of fused silica from the three-term Sellmeier formula
/// (Malitson). `wavelength` in meters.
pub fn fused_silica_index(wavelength: f64) -> f64 {
    const B: [f64; 3] = [0.696_166_3, 0.407_942_6, 0.897_479_4];
    const C: [f64; 3] = [0.068_404_3, 0.116_241_4, 9.896_161];
    let l2 = (wavelength * 1e6).powi(2);
    let n2 = 1.0 + B.iter().zip(C.iter()).map(|(b, c)| b * l2 / (l2 - c * c)).sum::<f64>();
    n2.sqrt()
}

/// How the core index is obtained at a given wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreIndex {
    Sellmeier,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    /// Fiber radius [m].
    pub radius: f64,
    pub core_index: CoreIndex,
    /// Cladding index (vacuum).
    pub n_clad: f64,
}

impl FiberSpec {
    pub fn new(radius: f64, core_index: CoreIndex) -> Result<Self> {
        Self::with_cladding(radius, core_index, 1.0)
    }

    pub fn with_cladding(radius: f64, core_index: CoreIndex, n_clad: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter { name: "radius", reason: format!("must be > 0, got {radius}") });
        }
        if !(n_clad >= 1.0) {
            return Err(Error::InvalidParameter { name: "n_clad", reason: format!("must be >= 1, got {n_clad}") });
        }
        if let CoreIndex::Constant(n) = core_index {
            if !(n > n_clad) {
                return Err(Error::InvalidParameter {
                    name: "n_core",
                    reason: format!("must exceed cladding index {n_clad}, got {n}"),
                });
            }
        }
        Ok(Self { radius, core_index, n_clad })
    }

    /// 500 nm diameter silica nanofiber with Sellmeier dispersion.
    pub fn nanofiber_500nm() -> Self {
        Self { radius: 250e-9, core_index: CoreIndex::Sellmeier, n_clad: 1.0 }
    }

    pub fn n_core(&self, wavelength: f64) -> f64 {
        match self.core_index {
            CoreIndex::Sellmeier => fused_silica_index(wavelength),
            CoreIndex::Constant(n) => n,
        }
    }

    /// Normalized frequency `V = k0 a sqrt(n_core^2 - n_clad^2)`.
    pub fn v_number(&self, wavelength: f64) -> f64 {
        let n1 = self.n_core(wavelength);
        2.0 * PI / wavelength * self.radius * (n1 * n1 - self.n_clad * self.n_clad).sqrt()
    }

    /// Open interval of guided propagation constants.
    pub fn guided_bracket(&self, wavelength: f64) -> (f64, f64) {
        let k0 = 2.0 * PI / wavelength;
        (self.n_clad * k0, self.n_core(wavelength) * k0)
    }
}

/// Residual of the exact HE11 characteristic equation,
///
/// `J0(u)/(u J1(u)) + (n1^2 + n2^2)/(2 n1^2) K1'(w)/(w K1(w)) - 1/u^2 + R`
///
/// with `u = h a`, `w = q a`. Zero iff `beta` is an HE1m propagation constant.
pub fn he11_eigenvalue_fn(fiber: &FiberSpec, wavelength: f64, beta: f64) -> Result<f64> {
    let (lo, hi) = fiber.guided_bracket(wavelength);
    if !(beta > lo && beta < hi) {
        return Err(Error::OutOfBracket { beta, lo, hi });
    }
    Ok(characteristic(fiber.radius, fiber.n_core(wavelength), fiber.n_clad, 2.0 * PI / wavelength, beta))
}

fn characteristic(a: f64, n1: f64, n2: f64, k0: f64, beta: f64) -> f64 {
    let h = (n1 * n1 * k0 * k0 - beta * beta).sqrt();
    let q = (beta * beta - n2 * n2 * k0 * k0).sqrt();
    let (u, w) = (h * a, q * a);
    let (j0, j1) = bessel_j01(u);
    let (k0w, k1w) = bessel_k01(w);
    let kp = (-k0w - k1w / w) / (w * k1w);
    let n1sq = n1 * n1;
    let n2sq = n2 * n2;
    let geom = 1.0 / (u * u) + 1.0 / (w * w);
    let r = (((n1sq - n2sq) / (2.0 * n1sq) * kp).powi(2) + (beta / (n1 * k0) * geom).powi(2)).sqrt();
    j0 / (u * j1) + (n1sq + n2sq) / (2.0 * n1sq) * kp - 1.0 / (u * u) + r
}

/// Real radial profiles `(e_r, e_phi, e_z, d e_z / dr)` of the unit-amplitude mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub e_r: f64,
    pub e_phi: f64,
    pub e_z: f64,
    pub de_z: f64,
}

/// Solved HE11 mode with power normalization and polarization axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidedMode {
    pub fiber: FiberSpec,
    pub wavelength: f64,
    pub n_core: f64,
    /// Propagation constant [rad/m].
    pub beta: f64,
    /// Transverse core wavenumber `h = sqrt(n1^2 k0^2 - beta^2)`.
    pub h: f64,
    /// Cladding decay constant `q = sqrt(beta^2 - n2^2 k0^2)`.
    pub q: f64,
    /// Hybrid-mode parameter `s`; `s -> -1` in the weak-guidance limit.
    pub s: f64,
    /// `J1(h a) / K1(q a)`, matching cladding to core amplitudes.
    pub cladding_scale: f64,
    /// Field amplitude `A` [V/m] fixing the guided power.
    pub amplitude: f64,
    /// Guided power [W].
    pub power: f64,
    /// Quasi-linear polarization axis [rad].
    pub pol_axis: f64,
}

/// Vector field sample at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub r: f64,
    pub phi: f64,
    pub z: f64,
    pub e_r: Complex64,
    pub e_phi: Complex64,
    pub e_z: Complex64,
    /// `|E|^2` [V^2/m^2].
    pub intensity: f64,
}

/// Solve the HE11 mode: bracket by uniform sampling, bisect, Newton-polish,
/// then normalize to the requested guided power.
pub fn solve_he11(fiber: &FiberSpec, wavelength: f64, power: f64, pol_axis: f64) -> Result<GuidedMode> {
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::InvalidParameter { name: "wavelength", reason: format!("must be > 0, got {wavelength}") });
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidParameter { name: "power", reason: format!("must be > 0, got {power}") });
    }
    let n1 = fiber.n_core(wavelength);
    let n2 = fiber.n_clad;
    if !(n1 > n2) {
        return Err(Error::InvalidParameter { name: "n_core", reason: format!("{n1} does not exceed cladding {n2}") });
    }
    let k0 = 2.0 * PI / wavelength;
    let a = fiber.radius;
    let f = |b: f64| characteristic(a, n1, n2, k0, b);
    let (lo, hi) = (n2 * k0, n1 * k0);

    // HE11 has the largest propagation constant of all HE1m roots, so walk
    // the samples downward from the core line and take the first true root.
    let step = (hi - lo) / (BRACKET_SAMPLES + 1) as f64;
    let samples: Vec<(f64, f64)> = (1..=BRACKET_SAMPLES).map(|i| lo + i as f64 * step).map(|b| (b, f(b))).collect();
    let mut root = None;
    for pair in samples.windows(2).rev() {
        let (b0, f0) = pair[0];
        let (b1, f1) = pair[1];
        if !(f0.is_finite() && f1.is_finite()) || f0.signum() == f1.signum() {
            continue;
        }
        let b = bisect(&f, b0, b1, f0);
        // a pole of J0/(u J1) also flips sign; reject it
        if f(b).abs() < 1e-6 * (1.0 + f0.abs().min(f1.abs())) {
            root = Some(newton_polish(&f, b, b0, b1));
            break;
        }
    }
    let beta = root.ok_or(Error::NoRoot { wavelength })?;

    let h = (n1 * n1 * k0 * k0 - beta * beta).sqrt();
    let q = (beta * beta - n2 * n2 * k0 * k0).sqrt();
    let (u, w) = (h * a, q * a);
    let (_, j1u) = bessel_j01(u);
    let (_, k1w) = bessel_k01(w);
    let s = (1.0 / (u * u) + 1.0 / (w * w)) / (bessel_j1_prime(u) / (u * j1u) + bessel_k1_prime(w) / (w * k1w));

    let mut mode = GuidedMode {
        fiber: *fiber,
        wavelength,
        n_core: n1,
        beta,
        h,
        q,
        s,
        cladding_scale: j1u / k1w,
        amplitude: 1.0,
        power,
        pol_axis,
    };
    let unit_power = mode.flux_integral(a + CLADDING_DECAY_SPAN / q, 1e-13);
    mode.amplitude = (power / unit_power).sqrt();
    Ok(mode)
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn newton_polish<F: Fn(f64) -> f64>(f: &F, mut x: f64, lo: f64, hi: f64) -> f64 {
    let mut fx = f(x);
    for _ in 0..4 {
        let dx = 1e-7 * x;
        let slope = (f(x + dx) - f(x - dx)) / (2.0 * dx);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let trial = x - fx / slope;
        if !(trial > lo && trial < hi) {
            break;
        }
        let ft = f(trial);
        if ft.abs() >= fx.abs() {
            break;
        }
        x = trial;
        fx = ft;
    }
    x
}

impl GuidedMode {
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn n_eff(&self) -> f64 {
        self.beta / self.k0()
    }

    pub fn v_number(&self) -> f64 {
        self.fiber.v_number(self.wavelength)
    }

    pub fn is_single_mode(&self) -> bool {
        self.v_number() < SINGLE_MODE_CUTOFF
    }

    /// Angular frequency [rad/s].
    pub fn omega(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.wavelength
    }

    /// 1/e decay length of the evanescent intensity far from the surface, `1/(2q)`.
    pub fn intensity_decay_length(&self) -> f64 {
        0.5 / self.q
    }

    /// Same mode carrying a different guided power.
    pub fn with_power(&self, power: f64) -> GuidedMode {
        GuidedMode { amplitude: self.amplitude * (power / self.power).sqrt(), power, ..*self }
    }

    /// Same mode with a rotated polarization axis.
    pub fn with_pol_axis(&self, pol_axis: f64) -> GuidedMode {
        GuidedMode { pol_axis, ..*self }
    }

    pub(crate) fn core_profile(&self, r: f64) -> RadialProfile {
        let (b, h, s) = (self.beta, self.h, self.s);
        let x = h * r;
        let (j0, j1) = bessel_j01(x);
        let j2 = bessel_j2(x);
        RadialProfile {
            e_r: b / (2.0 * h) * ((1.0 - s) * j0 - (1.0 + s) * j2),
            e_phi: -b / (2.0 * h) * ((1.0 - s) * j0 + (1.0 + s) * j2),
            e_z: -j1,
            de_z: -h * bessel_j1_prime(x),
        }
    }

    pub(crate) fn cladding_profile(&self, r: f64) -> RadialProfile {
        let (b, q, s, c) = (self.beta, self.q, self.s, self.cladding_scale);
        let x = q * r;
        let (k0, k1) = bessel_k01(x);
        let k2 = k0 + 2.0 * k1 / x;
        RadialProfile {
            e_r: c * b / (2.0 * q) * ((1.0 - s) * k0 + (1.0 + s) * k2),
            e_phi: -c * b / (2.0 * q) * ((1.0 - s) * k0 - (1.0 + s) * k2),
            e_z: -c * k1,
            de_z: c * q * (k0 + k1 / x),
        }
    }

    /// Unit-amplitude radial profiles at `r` (core form for `r < a`).
    pub fn radial_profile(&self, r: f64) -> RadialProfile {
        if r < self.fiber.radius {
            self.core_profile(r)
        } else {
            self.cladding_profile(r)
        }
    }

    /// Complex vector field of the forward-running mode.
    pub fn field_at(&self, r: f64, phi: f64, z: f64) -> FieldSample {
        let p = self.radial_profile(r.max(0.0));
        let (sin, cos) = (phi - self.pol_axis).sin_cos();
        let phase = Complex64::from_polar(self.amplitude, self.beta * z);
        let e_r = phase * (p.e_r * cos);
        let e_phi = phase * (p.e_phi * sin);
        let e_z = phase * Complex64::new(0.0, p.e_z * cos);
        FieldSample { r, phi, z, e_r, e_phi, e_z, intensity: e_r.norm_sqr() + e_phi.norm_sqr() + e_z.norm_sqr() }
    }

    /// `(|E_t|^2, |E_z|^2)` of the running mode at `(r, phi)`.
    pub fn intensity_parts(&self, r: f64, phi: f64) -> (f64, f64) {
        let p = self.radial_profile(r);
        let (sin, cos) = (phi - self.pol_axis).sin_cos();
        let a2 = self.amplitude * self.amplitude;
        let transverse = a2 * (p.e_r * p.e_r * cos * cos + p.e_phi * p.e_phi * sin * sin);
        let longitudinal = a2 * p.e_z * p.e_z * cos * cos;
        (transverse, longitudinal)
    }

    /// `|E|^2` of the running mode [V^2/m^2].
    pub fn intensity(&self, r: f64, phi: f64) -> f64 {
        let (t, l) = self.intensity_parts(r, phi);
        t + l
    }

    /// Time-averaged axial Poynting flux `S_z(r, phi)` [W/m^2].
    pub fn axial_flux(&self, r: f64, phi: f64) -> f64 {
        let (sin, cos) = (phi - self.pol_axis).sin_cos();
        let (along, across) = self.flux_parts(r);
        self.amplitude * self.amplitude * (along * cos * cos + across * sin * sin)
    }

    // Unit-amplitude flux density split into the cos^2 and sin^2 parts, times r
    // for the sin^2 part's e_z / r term to stay finite on axis.
    fn flux_parts(&self, r: f64) -> (f64, f64) {
        let p = self.radial_profile(r);
        let scale = 1.0 / (2.0 * self.omega() * VACUUM_PERMEABILITY);
        let ez_over_r = if r > 1e-6 * self.fiber.radius {
            p.e_z / r
        } else {
            -0.5 * self.h // limit of -J1(h r) / r
        };
        let along = p.e_r * (self.beta * p.e_r - p.de_z);
        let across = p.e_phi * (ez_over_r + self.beta * p.e_phi);
        (scale * along, scale * across)
    }

    /// Axial flux integrated over the cross section out to `r_max`, for the
    /// current amplitude. Radial integral adaptive and split at the surface;
    /// azimuthal integral analytic (`cos^2` and `sin^2` both give `pi`).
    pub fn flux_integral(&self, r_max: f64, rel_tol: f64) -> f64 {
        let a = self.fiber.radius;
        let integrand = |r: f64| {
            let (along, across) = self.flux_parts(r);
            PI * (along + across) * r
        };
        let core = integrate_adaptive(integrand, 0.0, a, rel_tol, 0.0);
        let cladding = integrate_adaptive(integrand, a, r_max.max(a), rel_tol, 0.0);
        self.amplitude * self.amplitude * (core + cladding)
    }

    /// Upper radius used as the infinity proxy in normalization checks.
    pub fn integration_radius(&self, decay_constants: f64) -> f64 {
        self.fiber.radius + decay_constants / self.q
    }
}

/// `A_eff(r, phi) = P / I(r, phi)` with `I = (eps0 c / 2) |E|^2` in the
/// vacuum cladding.
pub fn effective_mode_area(mode: &GuidedMode, r: f64, phi: f64) -> Result<f64> {
    if r < mode.fiber.radius {
        return Err(Error::InsideFiber { r, radius: mode.fiber.radius });
    }
    let intensity = 0.5 * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT * mode.fiber.n_clad * mode.intensity(r, phi);
    if !(intensity > 0.0) {
        return Err(Error::ZeroIntensity { r, phi });
    }
    Ok(mode.power / intensity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_composite_gl;

    const A: f64 = 250e-9;

    fn probe_fiber() -> FiberSpec {
        FiberSpec::new(A, CoreIndex::Constant(1.4525)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn sellmeier_reference_points() {
        // Malitson table values
        assert!((fused_silica_index(852e-9) - 1.4525).abs() < 2e-4);
        assert!((fused_silica_index(1064e-9) - 1.4496).abs() < 2e-4);
        assert!(fused_silica_index(780e-9) > fused_silica_index(1064e-9));
    }

    #[test]
    fn invalid_fiber_rejected() {
        assert!(FiberSpec::new(0.0, CoreIndex::Sellmeier).is_err());
        assert!(FiberSpec::new(A, CoreIndex::Constant(0.9)).is_err());
    }

    #[test]
    fn residual_finite_at_lower_bracket_edge() {
        let fiber = probe_fiber();
        let k0 = 2.0 * PI / 852e-9;
        let v = he11_eigenvalue_fn(&fiber, 852e-9, k0 * (1.0 + 1e-12)).unwrap();
        assert!(v.is_finite() && v != 0.0);
    }

    #[test]
    fn residual_out_of_bracket_is_error() {
        let fiber = probe_fiber();
        let k0 = 2.0 * PI / 852e-9;
        assert!(matches!(he11_eigenvalue_fn(&fiber, 852e-9, 0.5 * k0), Err(Error::OutOfBracket { .. })));
        assert!(he11_eigenvalue_fn(&fiber, 852e-9, 1.4525 * k0).is_err());
    }

    #[test]
    fn residual_changes_sign_exactly_once() {
        let fiber = probe_fiber();
        let (lo, hi) = fiber.guided_bracket(852e-9);
        let n = 10_000;
        let signs: Vec<f64> = (1..n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|b| he11_eigenvalue_fn(&fiber, 852e-9, b).unwrap().signum())
            .collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn root_is_polished() {
        let mode = solve_he11(&probe_fiber(), 852e-9, 1.0, 0.0).unwrap();
        let res = he11_eigenvalue_fn(&probe_fiber(), 852e-9, mode.beta).unwrap();
        assert!(res.abs() < 1e-10, "residual {res}");
    }

    #[test]
    fn neff_matches_high_precision_bisection() {
        // mpmath bisection, tests/oracles/gen_fixtures.py
        const N_EFF_852: f64 = 1.144_014_298_559_646_9;
        let mode = solve_he11(&probe_fiber(), 852e-9, 1.0, 0.0).unwrap();
        assert!(rel(mode.n_eff(), N_EFF_852) < 1e-9, "n_eff = {}", mode.n_eff());
    }

    #[test]
    fn neff_within_guided_bound_at_1064() {
        let fiber = FiberSpec::nanofiber_500nm();
        let mode = solve_he11(&fiber, 1064e-9, 1e-3, 0.0).unwrap();
        assert!(mode.n_eff() > 1.0 && mode.n_eff() < fiber.n_core(1064e-9));
        assert!(mode.is_single_mode());
    }

    #[test]
    fn boundary_continuity() {
        let fiber = FiberSpec::nanofiber_500nm();
        for &lambda in &[780e-9, 852e-9, 1064e-9] {
            let mode = solve_he11(&fiber, lambda, 1.0, 0.0).unwrap();
            let inside = mode.core_profile(A);
            let outside = mode.cladding_profile(A);
            let n1sq = mode.n_core * mode.n_core;
            assert!(rel(n1sq * inside.e_r, outside.e_r) < 1e-9, "D_r at {lambda}");
            assert!(rel(inside.e_phi, outside.e_phi) < 1e-9, "E_phi at {lambda}");
            assert!(rel(inside.e_z, outside.e_z) < 1e-9, "E_z at {lambda}");
        }
    }

    #[test]
    fn power_normalization_production_and_reference() {
        let fiber = FiberSpec::nanofiber_500nm();
        let mode = solve_he11(&fiber, 852e-9, 2.5e-3, 0.3).unwrap();
        let r_max = mode.integration_radius(20.0);
        let production = mode.flux_integral(r_max, 1e-10);
        assert!(rel(production, 2.5e-3) < 1e-6, "production {production}");

        // composite Gauss-Legendre with the same physics but no adaptivity
        let integrand = |r: f64| {
            let (along, across) = mode.flux_parts(r);
            PI * (along + across) * r * mode.amplitude * mode.amplitude
        };
        let reference = integrate_composite_gl(integrand, 0.0, A, 30, 8)
            + integrate_composite_gl(integrand, A, r_max, 30, 64);
        assert!(rel(reference, 2.5e-3) < 1e-9, "reference {reference}");
    }

    #[test]
    fn doubling_power_doubles_intensity() {
        let fiber = FiberSpec::nanofiber_500nm();
        let mode = solve_he11(&fiber, 1064e-9, 1e-3, 0.0).unwrap();
        let twice = mode.with_power(2e-3);
        for &(r, phi) in &[(100e-9, 0.2), (300e-9, 1.0), (600e-9, 2.5)] {
            assert!(rel(twice.intensity(r, phi), 2.0 * mode.intensity(r, phi)) < 1e-12);
        }
        let solved = solve_he11(&fiber, 1064e-9, 2e-3, 0.0).unwrap();
        assert!(rel(solved.intensity(400e-9, 0.0), 2.0 * mode.intensity(400e-9, 0.0)) < 1e-9);
    }

    #[test]
    fn quasi_linear_anisotropy_and_decay() {
        let fiber = FiberSpec::nanofiber_500nm();
        let mode = solve_he11(&fiber, 852e-9, 1.0, 0.4).unwrap();
        for &d in &[100e-9, 200e-9, 400e-9] {
            let r = A + d;
            assert!(mode.field_at(r, 0.4, 0.0).intensity > mode.field_at(r, 0.4 + PI / 2.0, 0.0).intensity);
        }
        let i: Vec<f64> = [100e-9, 200e-9, 400e-9].iter().map(|d| mode.field_at(A + d, 1.1, 0.0).intensity).collect();
        assert!(i[0] > i[1] && i[1] > i[2]);
    }

    #[test]
    fn running_wave_is_z_invariant() {
        let mode = solve_he11(&FiberSpec::nanofiber_500nm(), 1064e-9, 1e-3, 0.0).unwrap();
        let a = mode.field_at(480e-9, 0.7, 0.0).intensity;
        let b = mode.field_at(480e-9, 0.7, 123.4e-9).intensity;
        assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn wavelength_monotonicity() {
        let fiber = FiberSpec::nanofiber_500nm();
        let n: Vec<f64> =
            [780e-9, 852e-9, 1064e-9].iter().map(|&l| solve_he11(&fiber, l, 1.0, 0.0).unwrap().n_eff()).collect();
        assert!(n[0] > n[1] && n[1] > n[2]);
    }

    #[test]
    fn effective_area_properties() {
        let mode = solve_he11(&FiberSpec::nanofiber_500nm(), 852e-9, 1e-3, 0.0).unwrap();
        let a1 = effective_mode_area(&mode, A + 100e-9, 0.0).unwrap();
        let a2 = effective_mode_area(&mode, A + 300e-9, 0.0).unwrap();
        assert!(a1 < a2);
        let half = mode.with_power(0.5e-3);
        assert!(rel(effective_mode_area(&half, A + 100e-9, 0.0).unwrap(), a1) < 1e-12);
        assert!(effective_mode_area(&mode, 0.5 * A, 0.0).is_err());
    }
}
