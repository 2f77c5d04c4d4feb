//! Probe transmission and saturation models and their fitters.
//!
//! Frequencies here are ordinary (cyclic) frequencies in Hz. The detuning is
//! `Delta = f_probe - f_D2`, so red detunings are negative.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atomic::{saturated_power_per_atom, AtomSpecies};
use crate::error::{Error, Result};

/// Tolerance on `sum C_i = 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;
/// Minimum number of spectrum points for a fit.
pub const MIN_SPECTRUM_POINTS: usize = 8;

/// Natural linewidth (FWHM) of the cycling line [Hz].
pub fn natural_linewidth_hz(atom: &AtomSpecies) -> f64 {
    atom.cycling_line().linewidth / (2.0 * PI)
}

/// `T = (P_at - P_bg) / (P_0 - P_bg)`.
pub fn transmission_from_signals(p_at: f64, p0: f64, p_bg: f64) -> Result<f64> {
    if !(p0 > p_bg) {
        return Err(Error::DegenerateReference { p0, p_bg });
    }
    Ok((p_at - p_bg) / (p0 - p_bg))
}

/// One light-shifted transition: relative weight and shift [Hz].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineComponent {
    pub weight: f64,
    pub shift: f64,
}

/// Check `C_i >= 0` and `sum C_i = 1`; optionally rescale instead of failing.
pub fn validate_components(components: &[LineComponent], renormalize: bool) -> Result<Vec<LineComponent>> {
    if components.is_empty() {
        return Err(Error::Components("at least one component is required".into()));
    }
    if let Some(c) = components.iter().find(|c| !(c.weight >= 0.0 && c.weight.is_finite() && c.shift.is_finite())) {
        return Err(Error::Components(format!("invalid component {c:?}")));
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() <= WEIGHT_SUM_TOLERANCE {
        return Ok(components.to_vec());
    }
    if renormalize && total > 0.0 {
        return Ok(components.iter().map(|c| LineComponent { weight: c.weight / total, shift: c.shift }).collect());
    }
    Err(Error::Components(format!("weights sum to {total}, not 1")))
}

fn lorentzian(x: f64) -> f64 {
    1.0 / (1.0 + 4.0 * x * x)
}

/// Normalized absorption profile `sum_i C_i / (1 + 4 ((Delta - Delta_i) / Gamma0)^2)`.
pub fn absorption_profile(detuning: f64, components: &[LineComponent], gamma0: f64) -> f64 {
    components.iter().map(|c| c.weight * lorentzian((detuning - c.shift) / gamma0)).sum()
}

/// Transmission through the light-shifted ensemble.
pub fn spectrum_model(detuning: f64, od: f64, components: &[LineComponent], gamma0: f64) -> Result<f64> {
    if !(gamma0 > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma0", reason: format!("must be > 0, got {gamma0}") });
    }
    let components = validate_components(components, false)?;
    Ok((-od * absorption_profile(detuning, &components, gamma0)).exp())
}

/// Single effective Lorentzian line with free center and width.
pub fn single_line_transmission(detuning: f64, od: f64, center: f64, fwhm: f64) -> f64 {
    (-od * lorentzian((detuning - center) / fwhm)).exp()
}

/// Peak of the absorption profile: `(detuning, value)`.
pub fn profile_peak(components: &[LineComponent], gamma0: f64) -> (f64, f64) {
    let lo = components.iter().map(|c| c.shift).fold(f64::INFINITY, f64::min) - gamma0;
    let hi = components.iter().map(|c| c.shift).fold(f64::NEG_INFINITY, f64::max) + gamma0;
    let n = (((hi - lo) / gamma0) * 200.0).ceil() as usize + 1;
    let f = |d: f64| absorption_profile(d, components, gamma0);
    let step = (hi - lo) / (n - 1) as f64;
    let (k, _) = (0..n)
        .map(|i| f(lo + i as f64 * step))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let (mut a, mut b) = (lo + (k as f64 - 1.0) * step, lo + (k as f64 + 1.0) * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-9 * gamma0 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if f(x1) > f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Full width at half maximum of the absorption profile [Hz].
pub fn envelope_fwhm(components: &[LineComponent], gamma0: f64) -> f64 {
    let (center, peak) = profile_peak(components, gamma0);
    let f = |d: f64| absorption_profile(d, components, gamma0) - 0.5 * peak;
    let crossing = |dir: f64| {
        let mut inner = center;
        let mut outer = center + dir * gamma0;
        while f(outer) > 0.0 {
            inner = outer;
            outer += dir * gamma0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if f(mid) > 0.0 {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        0.5 * (inner + outer)
    };
    crossing(1.0) - crossing(-1.0)
}

/// Absorbance gain without inhomogeneous broadening: the unbroadened line
/// peaks at 1, the component sum at `max S`, so `eta = 1 / max S`.
pub fn broadening_recovery_factor(components: &[LineComponent], gamma0: f64) -> Result<f64> {
    if !(gamma0 > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma0", reason: format!("must be > 0, got {gamma0}") });
    }
    let components = validate_components(components, false)?;
    Ok(1.0 / profile_peak(&components, gamma0).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// [Hz]
    pub detuning: f64,
    pub transmission: f64,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectrumDataset {
    pub points: Vec<SpectrumPoint>,
    /// [W]
    pub probe_power: Option<f64>,
    pub averages: Option<u32>,
}

impl SpectrumDataset {
    /// Sort by detuning and validate.
    pub fn new(mut points: Vec<SpectrumPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.detuning.is_finite() && p.transmission.is_finite()) {
                return Err(Error::InvalidParameter { name: "points", reason: format!("point {i} is not finite") });
            }
            if p.transmission < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "transmission",
                    reason: format!("point {i} has negative transmission {}", p.transmission),
                });
            }
            if let Some(s) = p.sigma {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::InvalidParameter { name: "sigma", reason: format!("point {i} has sigma {s}") });
                }
            }
        }
        points.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
        if let Some(w) = points.windows(2).find(|w| w[0].detuning == w[1].detuning) {
            return Err(Error::InvalidParameter {
                name: "detuning",
                reason: format!("duplicate detuning {} Hz", w[0].detuning),
            });
        }
        Ok(Self { points, probe_power: None, averages: None })
    }

    /// Number of points with `T > 1` (allowed as noise).
    pub fn above_unity(&self) -> usize {
        self.points.iter().filter(|p| p.transmission > 1.0).count()
    }

    fn weighted(&self) -> bool {
        self.points.iter().all(|p| p.sigma.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumFitMode {
    /// Free `{OD, center, FWHM}`.
    SingleLine,
    /// Free `{OD, global offset}` with a fixed component pattern.
    MultiComponent { components: Vec<LineComponent> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative parameter-step tolerance.
    pub tolerance: f64,
    /// Natural linewidth [Hz]; lower bound on the fitted FWHM.
    pub gamma0: f64,
}

impl FitOptions {
    pub fn for_atom(atom: &AtomSpecies) -> Self {
        Self { max_iterations: 200, tolerance: 1e-12, gamma0: natural_linewidth_hz(atom) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mode: String,
    pub od: Estimate,
    /// Line center, or the global offset in multi-component mode [Hz].
    pub shift: Estimate,
    /// [Hz]
    pub fwhm: Estimate,
    pub covariance: Vec<Vec<f64>>,
    pub parameter_names: Vec<String>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub reduced_chi_squared: f64,
    pub weighted: bool,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

struct LmOutcome {
    x: Vec<f64>,
    residual: DVector<f64>,
    jacobian: DMatrix<f64>,
    iterations: usize,
    converged: bool,
}

/// Levenberg–Marquardt with Marquardt diagonal scaling and a projection
/// onto the feasible box after each step.
fn levenberg_marquardt<F, P>(eval: F, project: P, x0: Vec<f64>, max_iterations: usize, tolerance: f64) -> LmOutcome
where
    F: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
    P: Fn(&mut [f64]),
{
    let mut x = x0;
    project(&mut x);
    let (mut r, mut j) = eval(&x);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let n = x.len();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let dx = chol.solve(&(-&g));
            let mut trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect();
            project(&mut trial);
            let (rt, jt) = eval(&trial);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct <= cost {
                let small = x.iter().zip(&trial).all(|(a, b)| (a - b).abs() <= tolerance * (a.abs() + tolerance));
                let flat = cost - ct <= 1e-15 * cost;
                x = trial;
                r = rt;
                j = jt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small || (flat && lambda <= 1e-10) || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = g.amax() <= 1e-10 * (1.0 + cost) || lambda > 1e16;
            break;
        }
    }
    LmOutcome { x, residual: r, jacobian: j, iterations, converged }
}

fn covariance(j: &DMatrix<f64>, scale: f64) -> Option<(DMatrix<f64>, f64)> {
    let jtj = j.transpose() * j;
    let inv = jtj.clone().try_inverse()?;
    let d: Vec<f64> = (0..jtj.nrows()).map(|i| jtj[(i, i)].sqrt()).collect();
    let mut scaled = jtj.clone();
    for i in 0..d.len() {
        for k in 0..d.len() {
            scaled[(i, k)] /= d[i] * d[k];
        }
    }
    let sv = scaled.singular_values();
    let cond = sv.max() / sv.min();
    Some((inv * scale, cond))
}

fn initial_single_line(data: &SpectrumDataset, gamma0: f64) -> [f64; 3] {
    let pts = &data.points;
    let (k, min_t) = pts
        .iter()
        .map(|p| p.transmission)
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, t)| if t < b.1 { (i, t) } else { b });
    let od = -(min_t.clamp(1e-12, 1.0 - 1e-6)).ln();
    let center = pts[k].detuning;
    let absorb = |i: usize| -(pts[i].transmission.clamp(1e-12, 1.0)).ln();
    let half = 0.5 * od;
    let mut left = pts[0].detuning;
    for i in (0..k).rev() {
        if absorb(i) < half {
            let (a0, a1) = (absorb(i), absorb(i + 1));
            left = pts[i].detuning + (half - a0) / (a1 - a0) * (pts[i + 1].detuning - pts[i].detuning);
            break;
        }
    }
    let mut right = pts[pts.len() - 1].detuning;
    for i in k + 1..pts.len() {
        if absorb(i) < half {
            let (a0, a1) = (absorb(i - 1), absorb(i));
            right = pts[i - 1].detuning + (a0 - half) / (a0 - a1) * (pts[i].detuning - pts[i - 1].detuning);
            break;
        }
    }
    [od, center, (right - left).max(gamma0)]
}

/// Weighted (when every point carries `sigma`) nonlinear least squares.
pub fn fit_spectrum(data: &SpectrumDataset, mode: &SpectrumFitMode, opts: &FitOptions) -> Result<FitResult> {
    if data.points.len() < MIN_SPECTRUM_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} spectrum points, need at least {MIN_SPECTRUM_POINTS}",
            data.points.len()
        )));
    }
    if !(opts.gamma0 > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma0", reason: format!("must be > 0, got {}", opts.gamma0) });
    }
    let weighted = data.weighted();
    let weights: Vec<f64> = data.points.iter().map(|p| if weighted { 1.0 / p.sigma.unwrap_or(1.0) } else { 1.0 }).collect();
    let gamma0 = opts.gamma0;
    let n = data.points.len();
    let mut warnings = Vec::new();

    let (outcome, names, fwhm_of): (LmOutcome, Vec<&str>, Box<dyn Fn(&[f64]) -> f64>) = match mode {
        SpectrumFitMode::SingleLine => {
            let x0 = initial_single_line(data, gamma0);
            let eval = |x: &[f64]| {
                let (od, c, w) = (x[0], x[1], x[2]);
                let mut r = DVector::zeros(n);
                let mut j = DMatrix::zeros(n, 3);
                for (i, p) in data.points.iter().enumerate() {
                    let u = (p.detuning - c) / w;
                    let l = lorentzian(u);
                    let m = (-od * l).exp();
                    let dl = 8.0 * u * l * l / w;
                    r[i] = weights[i] * (m - p.transmission);
                    j[(i, 0)] = weights[i] * (-l * m);
                    j[(i, 1)] = weights[i] * (-od * m * dl);
                    j[(i, 2)] = weights[i] * (-od * m * dl * u);
                }
                (r, j)
            };
            let project = |x: &mut [f64]| {
                x[0] = x[0].max(0.0);
                x[2] = x[2].max(gamma0);
            };
            let out = levenberg_marquardt(eval, project, x0.to_vec(), opts.max_iterations, opts.tolerance);
            (out, vec!["od", "center", "fwhm"], Box::new(|x: &[f64]| x[2]))
        }
        SpectrumFitMode::MultiComponent { components } => {
            let components = validate_components(components, false)?;
            let (k, min_t) = data
                .points
                .iter()
                .map(|p| p.transmission)
                .enumerate()
                .fold((0, f64::INFINITY), |b, (i, t)| if t < b.1 { (i, t) } else { b });
            let (peak_at, peak) = profile_peak(&components, gamma0);
            let x0 = vec![-(min_t.clamp(1e-12, 1.0 - 1e-6)).ln() / peak, data.points[k].detuning - peak_at];
            let comps = components.clone();
            let eval = move |x: &[f64]| {
                let (od, offset) = (x[0], x[1]);
                let mut r = DVector::zeros(n);
                let mut j = DMatrix::zeros(n, 2);
                for (i, p) in data.points.iter().enumerate() {
                    let mut s = 0.0;
                    let mut ds = 0.0;
                    for c in &comps {
                        let u = (p.detuning - offset - c.shift) / gamma0;
                        let l = lorentzian(u);
                        s += c.weight * l;
                        ds += c.weight * 8.0 * u * l * l / gamma0;
                    }
                    let m = (-od * s).exp();
                    r[i] = weights[i] * (m - p.transmission);
                    j[(i, 0)] = weights[i] * (-s * m);
                    j[(i, 1)] = weights[i] * (-od * m * ds);
                }
                (r, j)
            };
            let project = |x: &mut [f64]| x[0] = x[0].max(0.0);
            let out = levenberg_marquardt(eval, project, x0, opts.max_iterations, opts.tolerance);
            let width = envelope_fwhm(&components, gamma0);
            (out, vec!["od", "offset"], Box::new(move |_: &[f64]| width))
        }
    };

    let p = outcome.x.len();
    let rss = outcome.residual.norm_squared();
    let dof = (n - p).max(1) as f64;
    let reduced = rss / dof;
    let scale = if weighted { 1.0 } else { reduced };
    let (cov, cond) = match covariance(&outcome.jacobian, scale) {
        Some(c) => c,
        None => {
            warnings.push("ill-conditioned: singular normal matrix, no uncertainties".into());
            (DMatrix::from_element(p, p, f64::NAN), f64::INFINITY)
        }
    };
    if cond > 1e10 && cond.is_finite() {
        warnings.push(format!("ill-conditioned: normal-matrix condition number {cond:.3e}"));
    }
    let od = outcome.x[0];
    let noise = if weighted {
        let mut s: Vec<f64> = data.points.iter().filter_map(|p| p.sigma).collect();
        s.sort_by(|a, b| a.total_cmp(b));
        s[s.len() / 2]
    } else {
        reduced.sqrt()
    };
    if 1.0 - (-od).exp() < 3.0 * noise {
        warnings.push("ill-conditioned: dip shallower than the noise level".into());
    }
    if od == 0.0 {
        warnings.push("od at its lower bound 0".into());
    }
    if matches!(mode, SpectrumFitMode::SingleLine) && outcome.x[2] == gamma0 {
        warnings.push("fwhm at its lower bound (natural linewidth)".into());
    }
    if !outcome.converged {
        warnings.push(format!("no convergence after {} iterations; last iterate reported", outcome.iterations));
    }
    let sd = |i: usize| {
        let v = cov[(i, i)];
        (v.is_finite() && v >= 0.0).then(|| v.sqrt())
    };
    let fwhm = fwhm_of(&outcome.x);
    Ok(FitResult {
        mode: match mode {
            SpectrumFitMode::SingleLine => "single_line".into(),
            SpectrumFitMode::MultiComponent { .. } => "multi_component".into(),
        },
        od: Estimate { value: od, uncertainty: sd(0) },
        shift: Estimate { value: outcome.x[1], uncertainty: sd(1) },
        fwhm: Estimate { value: fwhm, uncertainty: if p == 3 { sd(2) } else { None } },
        covariance: (0..p).map(|i| (0..p).map(|k| cov[(i, k)]).collect()).collect(),
        parameter_names: names.into_iter().map(String::from).collect(),
        residual_norm: rss.sqrt(),
        reduced_chi_squared: reduced,
        weighted,
        iterations: outcome.iterations,
        converged: outcome.converged,
        warnings,
    })
}

/// Per-atom absorbances `epsilon = OD / N` and `epsilon0 = eta * epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorbances {
    pub epsilon: Estimate,
    pub epsilon0: Estimate,
    pub eta: f64,
}

pub fn derived_absorbances(od: Estimate, n: Estimate, eta: f64) -> Result<Absorbances> {
    if !(n.value > 0.0) {
        return Err(Error::InvalidParameter { name: "n", reason: format!("must be > 0, got {}", n.value) });
    }
    let epsilon = od.value / n.value;
    let rel = match (od.uncertainty, n.uncertainty) {
        (None, None) => None,
        (a, b) => {
            let ra = a.map_or(0.0, |s| s / od.value);
            let rb = b.map_or(0.0, |s| s / n.value);
            Some((ra * ra + rb * rb).sqrt())
        }
    };
    Ok(Absorbances {
        epsilon: Estimate { value: epsilon, uncertainty: rel.map(|r| r * epsilon.abs()) },
        epsilon0: Estimate { value: eta * epsilon, uncertainty: rel.map(|r| r * (eta * epsilon).abs()) },
        eta,
    })
}

/// Saturable Beer–Lambert propagation through `N` atoms at mode area `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationModel {
    /// [m^2]
    pub cross_section: f64,
    /// [m^2]
    pub effective_area: f64,
    /// Guided saturation power `I_sat A` [W].
    pub saturation_power: f64,
    /// [W]
    pub power_per_atom: f64,
}

impl SaturationModel {
    pub fn new(atom: &AtomSpecies, effective_area: f64) -> Result<Self> {
        if !(effective_area > 0.0 && effective_area.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "effective_area",
                reason: format!("must be > 0, got {effective_area}"),
            });
        }
        Ok(Self {
            cross_section: atom.cross_section,
            effective_area,
            saturation_power: atom.saturation_intensity * effective_area,
            power_per_atom: saturated_power_per_atom(atom),
        })
    }

    /// Same model with the saturation power (and hence the per-atom
    /// saturated power) scaled by `factor`.
    pub fn with_saturation_scale(&self, factor: f64) -> Self {
        Self {
            saturation_power: self.saturation_power * factor,
            power_per_atom: self.power_per_atom * factor,
            ..*self
        }
    }

    /// Unsaturated optical depth per atom `sigma0 / A`.
    pub fn single_atom_od(&self) -> f64 {
        self.cross_section / self.effective_area
    }

    /// RK4 step count used by [`absorbed`](Self::absorbed).
    pub fn default_steps(&self, n: f64) -> usize {
        ((4.0 * n * self.single_atom_od()).ceil() as usize).max(400)
    }

    pub fn absorbed(&self, p_in: f64, n: f64) -> f64 {
        self.absorbed_with_steps(p_in, n, self.default_steps(n))
    }

    /// Integrates `d ln P / dn = -(sigma0/A) / (1 + P / P_sat)` with RK4.
    pub fn absorbed_with_steps(&self, p_in: f64, n: f64, steps: usize) -> f64 {
        if n <= 0.0 || p_in <= 0.0 {
            return 0.0;
        }
        let k = self.single_atom_od();
        let ratio = p_in / self.saturation_power;
        // y = ln(P / P_in)
        let f = |y: f64| -k / (1.0 + ratio * y.exp());
        let h = n / steps as f64;
        let mut y = 0.0;
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        -p_in * y.exp_m1()
    }

    /// Incident power at which half of `N * P_Cs` is absorbed. Closed form
    /// from the exact solution `ln(P_out/P_in) + (P_out - P_in)/P_sat = -OD`.
    pub fn half_saturation_power(&self, n: f64) -> f64 {
        let od = n * self.single_atom_od();
        0.5 * od * self.saturation_power / -(-0.5 * od).exp_m1()
    }
}

/// Absorbed probe power for `N` atoms at mode area `a_eff`.
pub fn saturation_model(p_in: f64, n: f64, a_eff: f64, atom: &AtomSpecies) -> Result<f64> {
    if !(p_in > 0.0) {
        return Err(Error::InvalidParameter { name: "p_in", reason: format!("must be > 0, got {p_in}") });
    }
    if !(n >= 0.0) {
        return Err(Error::InvalidParameter { name: "n", reason: format!("must be >= 0, got {n}") });
    }
    Ok(SaturationModel::new(atom, a_eff)?.absorbed(p_in, n))
}

/// Atom number from the saturated absorbed power, `N = P_abs / P_Cs`.
pub fn atom_number_from_asymptote(p_abs: f64, atom: &AtomSpecies) -> f64 {
    p_abs / saturated_power_per_atom(atom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    /// [W]
    pub incident: f64,
    /// [W]
    pub absorbed: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SaturationDataset {
    pub points: Vec<SaturationPoint>,
}

impl SaturationDataset {
    pub fn new(mut points: Vec<SaturationPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.incident > 0.0 && p.incident.is_finite() && p.absorbed.is_finite()) {
                return Err(Error::InvalidParameter { name: "points", reason: format!("point {i} is invalid: {p:?}") });
            }
            if p.absorbed > p.incident {
                return Err(Error::InvalidParameter {
                    name: "absorbed",
                    reason: format!("point {i} absorbs {} W of {} W incident", p.absorbed, p.incident),
                });
            }
        }
        points.sort_by(|a, b| a.incident.total_cmp(&b.incident));
        Ok(Self { points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationFitOptions {
    /// Also fit a scale factor on the saturation power.
    pub fit_saturation_scale: bool,
    /// Residuals relative to each measured value (multiplicative noise).
    pub relative_residuals: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SaturationFitOptions {
    fn default() -> Self {
        Self { fit_saturation_scale: false, relative_residuals: true, max_iterations: 200, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    pub atom_number: Estimate,
    pub saturation_scale: Option<Estimate>,
    /// `max P_abs / P_Cs`.
    pub asymptote_estimate: f64,
    /// [W]
    pub power_per_atom: f64,
    /// Strongest incident power over the fitted half-saturation power.
    pub saturation_reach: f64,
    /// The data never leave the linear regime; `N` and `A_eff` are degenerate.
    pub degenerate: bool,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Saturation reach below which the data count as linear-regime only.
pub const LINEAR_REGIME_REACH: f64 = 0.5;

pub fn fit_saturation(data: &SaturationDataset, model: &SaturationModel, opts: &SaturationFitOptions) -> Result<SaturationFit> {
    let p = if opts.fit_saturation_scale { 2 } else { 1 };
    if data.points.len() <= p {
        return Err(Error::InsufficientData(format!("{} saturation points", data.points.len())));
    }
    let max_abs = data.points.iter().map(|p| p.absorbed).fold(f64::NEG_INFINITY, f64::max);
    if !(max_abs > 0.0) {
        return Err(Error::InsufficientData("no positive absorbed power".into()));
    }
    let asymptote_estimate = max_abs / model.power_per_atom;
    let weights: Vec<f64> = data
        .points
        .iter()
        .map(|pt| if opts.relative_residuals && pt.absorbed > 0.0 { 1.0 / pt.absorbed } else { 1.0 / max_abs })
        .collect();
    let m = data.points.len();
    // a fixed step count keeps the model smooth in N for the finite-difference Jacobian
    let steps = model.default_steps(4.0 * asymptote_estimate);
    let predict = |x: &[f64]| -> Vec<f64> {
        let mdl = if p == 2 { model.with_saturation_scale(x[1]) } else { *model };
        data.points.iter().map(|pt| mdl.absorbed_with_steps(pt.incident, x[0], steps)).collect()
    };
    let eval = |x: &[f64]| {
        let base = predict(x);
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, p);
        for i in 0..m {
            r[i] = weights[i] * (base[i] - data.points[i].absorbed);
        }
        for k in 0..p {
            let h = 1e-6 * x[k].abs().max(1e-6);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] = (xm[k] - h).max(0.0);
            let (fp, fm) = (predict(&xp), predict(&xm));
            for i in 0..m {
                j[(i, k)] = weights[i] * (fp[i] - fm[i]) / (xp[k] - xm[k]);
            }
        }
        (r, j)
    };
    let mut x0 = vec![asymptote_estimate];
    if p == 2 {
        x0.push(1.0);
    }
    let project = |x: &mut [f64]| {
        x[0] = x[0].max(0.0);
        if x.len() > 1 {
            x[1] = x[1].max(1e-6);
        }
    };
    let out = levenberg_marquardt(eval, project, x0, opts.max_iterations, opts.tolerance);
    let rss = out.residual.norm_squared();
    let reduced = rss / (m - p).max(1) as f64;
    let mut warnings = Vec::new();
    let cov = match covariance(&out.jacobian, reduced) {
        Some((c, cond)) => {
            if cond > 1e8 {
                warnings.push(format!("ill-conditioned: normal-matrix condition number {cond:.3e}"));
            }
            Some(c)
        }
        None => {
            warnings.push("singular normal matrix, no uncertainties".into());
            None
        }
    };
    let sd = |i: usize| cov.as_ref().and_then(|c| (c[(i, i)] >= 0.0).then(|| c[(i, i)].sqrt()));
    let fitted = if p == 2 { model.with_saturation_scale(out.x[1]) } else { *model };
    let n = out.x[0];
    let max_in = data.points.iter().map(|p| p.incident).fold(0.0, f64::max);
    let saturation_reach = if n > 0.0 { max_in / fitted.half_saturation_power(n) } else { 0.0 };
    let degenerate = saturation_reach < LINEAR_REGIME_REACH;
    if degenerate {
        warnings.push(format!(
            "data stay in the linear regime (reach {saturation_reach:.3}); atom number and mode area are degenerate"
        ));
    }
    if !out.converged {
        warnings.push(format!("no convergence after {} iterations; last iterate reported", out.iterations));
    }
    Ok(SaturationFit {
        atom_number: Estimate { value: n, uncertainty: sd(0) },
        saturation_scale: (p == 2).then(|| Estimate { value: out.x[1], uncertainty: sd(1) }),
        asymptote_estimate,
        power_per_atom: model.power_per_atom,
        saturation_reach,
        degenerate,
        residual_norm: rss.sqrt(),
        iterations: out.iterations,
        converged: out.converged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const G0: f64 = 5.2e6;

    fn one() -> Vec<LineComponent> {
        vec![LineComponent { weight: 1.0, shift: 0.0 }]
    }

    #[test]
    fn transmission_signals() {
        assert_eq!(transmission_from_signals(11.0, 11.0, 1.0).unwrap(), 1.0);
        assert_eq!(transmission_from_signals(1.0, 11.0, 1.0).unwrap(), 0.0);
        assert_eq!(transmission_from_signals(6.0, 11.0, 1.0).unwrap(), 0.5);
        assert!(matches!(transmission_from_signals(1.0, 1.0, 1.0), Err(Error::DegenerateReference { .. })));
    }

    #[test]
    fn model_identities() {
        assert_eq!(spectrum_model(3e6, 0.0, &one(), G0).unwrap(), 1.0);
        let c = [LineComponent { weight: 1.0, shift: 13e6 }];
        assert_eq!(spectrum_model(13e6, 13.0, &c, G0).unwrap(), (-13.0f64).exp());
        let t = spectrum_model(13e6 + G0 / 2.0, 13.0, &c, G0).unwrap();
        assert!((t / (-6.5f64).exp() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn component_validation() {
        let bad = [LineComponent { weight: 0.5, shift: 0.0 }, LineComponent { weight: 0.6, shift: 1e6 }];
        assert!(matches!(spectrum_model(0.0, 1.0, &bad, G0), Err(Error::Components(_))));
        let fixed = validate_components(&bad, true).unwrap();
        assert!((fixed.iter().map(|c| c.weight).sum::<f64>() - 1.0).abs() < 1e-15);
        let neg = [LineComponent { weight: -0.1, shift: 0.0 }, LineComponent { weight: 1.1, shift: 0.0 }];
        assert!(validate_components(&neg, true).is_err());
    }

    #[test]
    fn single_component_eta_is_one() {
        assert!((broadening_recovery_factor(&one(), G0).unwrap() - 1.0).abs() < 1e-12);
        assert!((envelope_fwhm(&one(), G0) / G0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn absorbances() {
        let a = derived_absorbances(Estimate { value: 13.0, uncertainty: Some(2.0) }, Estimate { value: 2000.0, uncertainty: None }, 2.5)
            .unwrap();
        assert!((a.epsilon.value - 0.0065).abs() < 1e-15);
        assert!((a.epsilon.uncertainty.unwrap() - 0.001).abs() < 1e-15);
        assert!((a.epsilon0.value - 0.01625).abs() < 1e-15);
        let same = derived_absorbances(Estimate { value: 13.0, uncertainty: None }, Estimate { value: 2000.0, uncertainty: None }, 1.0)
            .unwrap();
        assert_eq!(same.epsilon0.value, same.epsilon.value);
        assert!(derived_absorbances(Estimate { value: 1.0, uncertainty: None }, Estimate { value: 0.0, uncertainty: None }, 1.0).is_err());
    }

    #[test]
    fn saturation_limits() {
        let atom = AtomSpecies::cesium133();
        let model = SaturationModel::new(&atom, 1e-12).unwrap();
        assert_eq!(model.absorbed(1e-9, 0.0), 0.0);
        let weak = model.absorbed(1e-22, 50.0);
        let expected = 1e-22 * -(-50.0 * model.single_atom_od()).exp_m1();
        assert!((weak / expected - 1.0).abs() < 1e-8);
    }
}
