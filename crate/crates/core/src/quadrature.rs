//! One-dimensional quadrature: adaptive Gauss–Kronrod (7/15) for production
//! integrals and composite Gauss–Legendre of arbitrary order for reference
//! checks.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_9,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod integral of `f` over `[lo, hi]` to relative
/// tolerance `rel_tol` (absolute floor `abs_tol`).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let mut stack = vec![(lo, hi, gk15(&f, lo, hi))];
    let mut total = stack[0].2 .0;
    let mut done = 0.0;
    let mut splits = 0;
    while let Some((a, b, (val, err))) = stack.pop() {
        let tol = (rel_tol * total.abs()).max(abs_tol);
        let width_frac = (b - a) / (hi - lo);
        if err <= tol * width_frac.max(1e-3) || splits > 20_000 || (b - a) < 1e-14 * (hi - lo).abs() {
            done += val;
            continue;
        }
        splits += 1;
        let mid = 0.5 * (a + b);
        let left = gk15(&f, a, mid);
        let right = gk15(&f, mid, b);
        total += left.0 + right.0 - val;
        stack.push((a, mid, left));
        stack.push((mid, b, right));
    }
    done
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre polynomial.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `order` nodes.
pub fn integrate_composite_gl<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, order: usize, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let width = (hi - lo) / panels as f64;
    (0..panels)
        .map(|p| {
            let a = lo + p as f64 * width;
            let c = a + 0.5 * width;
            x.iter().zip(&w).map(|(xi, wi)| wi * f(c + 0.5 * width * xi)).sum::<f64>() * 0.5 * width
        })
        .sum()
}
