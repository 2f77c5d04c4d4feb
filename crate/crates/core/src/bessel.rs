//! Bessel functions of the first kind `J0`, `J1` and modified Bessel functions
//! of the second kind `K0`, `K1` for non-negative real arguments, plus the
//! recurrence-derived `J2`, `K2` and first derivatives used by the fiber mode
//! solver.
//!
//! `J_n` uses Miller's backward recurrence normalized by the Neumann sum
//! `J0 + 2 (J2 + J4 + ...) = 1`, which is accurate to a few ulps in absolute
//! terms over the whole real line. `K_n` uses the ascending series for
//! `x <= 2` and Steed's continued fraction (CF2) above.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Returns `(J0(x), J1(x))`.
pub fn bessel_j01(x: f64) -> (f64, f64) {
    if x.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    let ax = x.abs();
    if ax == 0.0 {
        return (1.0, 0.0);
    }
    if ax < 1e-4 {
        // two-term series is exact to double precision here
        let y = 0.25 * ax * ax;
        let j0 = 1.0 - y + 0.25 * y * y;
        let j1 = 0.5 * ax * (1.0 - 0.5 * y);
        return (j0, if x < 0.0 { -j1 } else { j1 });
    }
    if ax > 1e4 {
        let (j0, j1) = hankel_asymptotic(ax);
        return (j0, if x < 0.0 { -j1 } else { j1 });
    }

    // start order: comfortably above x plus a margin that grows like sqrt(x)
    let start = {
        let m = (ax + 30.0 + 12.0 * ax.sqrt()) as usize;
        m + (m & 1) // even
    };
    let two_over_x = 2.0 / ax;
    let mut j_next = 0.0; // J_{k+1}
    let mut j_cur = 1e-300; // J_k
    let mut norm = 0.0;
    let mut j0 = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let j_prev = k as f64 * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds J_{k-1}
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
        let order = k - 1;
        if order == 1 {
            j1 = j_cur;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * j_cur;
        }
        if order == 0 {
            j0 = j_cur;
            norm += j_cur;
        }
    }
    let j0 = j0 / norm;
    let j1 = j1 / norm;
    (j0, if x < 0.0 { -j1 } else { j1 })
}

fn hankel_asymptotic(x: f64) -> (f64, f64) {
    let mut out = [0.0; 2];
    for (n, slot) in out.iter_mut().enumerate() {
        let mu = 4.0 * (n * n) as f64;
        let z = 8.0 * x;
        let p = 1.0 - (mu - 1.0) * (mu - 9.0) / (2.0 * z * z)
            + (mu - 1.0) * (mu - 9.0) * (mu - 25.0) * (mu - 49.0) / (24.0 * z.powi(4));
        let q = (mu - 1.0) / z - (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (6.0 * z.powi(3));
        let chi = x - (0.5 * n as f64 + 0.25) * PI;
        *slot = (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin());
    }
    (out[0], out[1])
}

pub fn bessel_j0(x: f64) -> f64 {
    bessel_j01(x).0
}

pub fn bessel_j1(x: f64) -> f64 {
    bessel_j01(x).1
}

/// `J2(x) = 2 J1(x)/x - J0(x)`, with the small-argument limit handled.
pub fn bessel_j2(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let y = 0.25 * x * x;
        return 0.125 * x * x * (1.0 - y / 3.0 + y * y / 24.0);
    }
    let (j0, j1) = bessel_j01(x);
    2.0 * j1 / x - j0
}

/// `J1'(x) = J0(x) - J1(x)/x`.
pub fn bessel_j1_prime(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let y = 0.25 * x * x;
        return 0.5 - 1.5 * y / 2.0 + 5.0 * y * y / 24.0;
    }
    let (j0, j1) = bessel_j01(x);
    j0 - j1 / x
}

/// Returns `(K0(x), K1(x))` for `x > 0`.
///
/// `x <= 0` yields `(inf, inf)` at zero and NaN for negative arguments.
pub fn bessel_k01(x: f64) -> (f64, f64) {
    if x.is_nan() || x < 0.0 {
        return (f64::NAN, f64::NAN);
    }
    if x == 0.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    if x <= 2.0 {
        k01_series(x)
    } else {
        k01_steed(x)
    }
}

fn k01_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let log_half = (0.5 * x).ln();

    // I0, I1 and the digamma-weighted sums
    let mut term0 = 1.0; // y^k / (k!)^2
    let mut term1 = 1.0; // y^k / (k! (k+1)!)
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut sum0 = 0.0;
    let mut sum1 = 0.0;
    let mut psi_k1 = -EULER_GAMMA; // psi(k+1)
    for k in 0..60 {
        let kf = k as f64;
        let psi_k2 = psi_k1 + 1.0 / (kf + 1.0); // psi(k+2)
        i0 += term0;
        i1 += term1;
        sum0 += psi_k1 * term0;
        sum1 += (psi_k1 + psi_k2) * term1;
        if term0 < 1e-18 * i0.abs() && term1 < 1e-18 * i1.abs() {
            break;
        }
        term0 *= y / ((kf + 1.0) * (kf + 1.0));
        term1 *= y / ((kf + 1.0) * (kf + 2.0));
        psi_k1 = psi_k2;
    }
    let i1 = 0.5 * x * i1;
    let k0 = -log_half * i0 + sum0;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * sum1;
    (k0, k1)
}

fn k01_steed(x: f64) -> (f64, f64) {
    // continued fraction CF2 for K_mu with mu = 0 (Temme / Steed)
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

pub fn bessel_k0(x: f64) -> f64 {
    bessel_k01(x).0
}

pub fn bessel_k1(x: f64) -> f64 {
    bessel_k01(x).1
}

/// `K2(x) = K0(x) + 2 K1(x)/x`.
pub fn bessel_k2(x: f64) -> f64 {
    let (k0, k1) = bessel_k01(x);
    k0 + 2.0 * k1 / x
}

/// `K1'(x) = -K0(x) - K1(x)/x`.
pub fn bessel_k1_prime(x: f64) -> f64 {
    let (k0, k1) = bessel_k01(x);
    -k0 - k1 / x
}
