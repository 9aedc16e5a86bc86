//! Special functions on the complex plane: log-gamma, gamma, the Gauss
//! hypergeometric function with its connection formulas, and a few
//! combinatorial helpers shared by the other modules.

use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// Bernoulli numbers B_0..B_n (with B_1 = -1/2).
pub fn bernoulli(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for m in 1..=n {
        let mut s = 0.0;
        for k in 0..m {
            s += binomial_f64(m as f64 + 1.0, k) * b[k];
        }
        b[m] = -s / (m as f64 + 1.0);
    }
    b
}

/// Generalised binomial coefficient C(x, k) for real x and integer k >= 0.
pub fn binomial_f64(x: f64, k: usize) -> f64 {
    let mut r = 1.0;
    for j in 0..k {
        r *= (x - j as f64) / (j as f64 + 1.0);
    }
    r
}

// Stirling coefficients B_{2k} / (2k (2k-1)).
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

/// Log-gamma on the closed right half plane, continuous in z (the branch
/// obtained by analytic continuation from the positive real axis). For
/// Re z < 0 the reflection formula is used and the branch is principal.
pub fn ln_gamma(z: C64) -> C64 {
    if z.re < 0.0 {
        // Γ(z) Γ(1-z) = π / sin(πz)
        let s = (C64::new(PI, 0.0) * z).sin();
        return C64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(C64::new(1.0, 0.0) - z);
    }
    let mut shift = C64::new(0.0, 0.0);
    let mut w = z;
    while w.norm() < 18.0 || w.re < 8.0 {
        shift += w.ln();
        w += 1.0;
    }
    let mut s = (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln();
    let w2 = w * w;
    let mut wp = w;
    for c in STIRLING.iter() {
        s += *c / wp;
        wp *= w2;
    }
    s - shift
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Complex gamma function.
pub fn gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        if z.im == 0.0 && z.re == z.re.round() {
            return C64::new(f64::INFINITY, 0.0);
        }
        let s = (C64::new(PI, 0.0) * z).sin();
        return C64::new(PI, 0.0) / (s * gamma(C64::new(1.0, 0.0) - z));
    }
    if z.norm() > 60.0 {
        return ln_gamma(z).exp();
    }
    let z = z - 1.0;
    let mut x = C64::new(LANCZOS[0], 0.0);
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// Real gamma function (poles return ±inf).
pub fn gamma_real(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        return f64::INFINITY;
    }
    libm::tgamma(x)
}

/// 1/Γ(x), vanishing at the poles.
pub fn rgamma_real(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        0.0
    } else {
        1.0 / gamma_real(x)
    }
}

fn rgamma(z: C64) -> C64 {
    if z.re <= 0.0 && z.im == 0.0 && z.re == z.re.round() {
        C64::new(0.0, 0.0)
    } else {
        C64::new(1.0, 0.0) / gamma(z)
    }
}

fn series(a: C64, b: C64, c: C64, w: C64) -> C64 {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for n in 0..20000 {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * w;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() && n > 3 {
            break;
        }
        if term.norm() == 0.0 {
            break;
        }
    }
    sum
}

fn near_int(x: C64) -> bool {
    x.im.abs() < 1e-9 && (x.re - x.re.round()).abs() < 1e-9
}

/// Continue (F, F') of 2F1 from w0 to w1 along a straight segment by
/// Taylor stepping of the hypergeometric differential equation.
/// Also returns the accumulated change of log F along the path and the point
/// reached; with `early` it stops once w1 is inside the current step disc.
fn ode_continue(
    a: C64,
    b: C64,
    c: C64,
    w0: C64,
    f0: C64,
    d0: C64,
    w1: C64,
    early: bool,
) -> (C64, C64, C64, C64) {
    let mut w = w0;
    let (mut f, mut d) = (f0, d0);
    let mut dlog = C64::new(0.0, 0.0);
    let ab = a * b;
    let apb1 = a + b + 1.0;
    let mut guard = 0;
    while (w1 - w).norm() > 1e-15 {
        guard += 1;
        if guard > 10000 {
            break;
        }
        let radius = w.norm().min((C64::new(1.0, 0.0) - w).norm());
        let remaining = w1 - w;
        // Near w = 1 the exponent c-a-b keeps the phase variation bounded.
        if early && (remaining.norm() <= 0.45 * radius || (radius < 0.2 && remaining.norm() < 0.2))
        {
            break;
        }
        let step = if remaining.norm() <= 0.45 * radius {
            remaining
        } else {
            remaining / remaining.norm() * (0.45 * radius)
        };
        let p = w * (C64::new(1.0, 0.0) - w);
        let q = C64::new(1.0, 0.0) - 2.0 * w;
        let r = c - apb1 * w;
        // Taylor coefficients f_n of F(w + h) = Σ f_n h^n.
        let mut fm1 = f; // f_n
        let mut fm = d; // f_{n+1}
        let mut sf = f + d * step;
        let mut sd = d;
        let mut hp = step; // h^{n+1}
        let mut hd = C64::new(1.0, 0.0); // h^n used for derivative
        for n in 0..4000usize {
            let nf = n as f64;
            let num = (q * nf + r) * (nf + 1.0) * fm - ((a + nf) * (b + nf)) * fm1;
            let _ = ab;
            let fn2 = -num / (p * (nf + 2.0) * (nf + 1.0));
            hp *= step;
            hd *= step;
            let tf = fn2 * hp;
            let td = fn2 * (nf + 2.0) * hd;
            sf += tf;
            sd += td;
            fm1 = fm;
            fm = fn2;
            if tf.norm() <= 1e-18 * sf.norm().max(1e-300)
                && td.norm() <= 1e-18 * sd.norm().max(1e-300)
                && n > 4
            {
                break;
            }
        }
        dlog += (sf / f).ln();
        f = sf;
        d = sd;
        w += step;
    }
    (f, d, dlog, w)
}

/// Gauss hypergeometric function 2F1(a, b; c; w) for complex parameters and
/// argument, on the principal branch (cut along [1, ∞)).
pub fn hyp2f1(a: C64, b: C64, c: C64, w: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    if w.norm() == 0.0 {
        return one;
    }
    let r_direct = w.norm();
    let r_one = (one - w).norm();
    let r_inv = 1.0 / w.norm();
    let r_pfaff = (w / (w - one)).norm();
    let cab = c - a - b;
    let amb = a - b;
    let one_ok = !near_int(cab);
    let inv_ok = !near_int(amb);
    let mut best = (r_direct, 0);
    if r_pfaff < best.0 {
        best = (r_pfaff, 1);
    }
    if one_ok && r_one < best.0 {
        best = (r_one, 2);
    }
    if inv_ok && r_inv < best.0 {
        best = (r_inv, 3);
    }
    if best.0 > 0.78 {
        // Hard zone around e^{±iπ/3}: continue along the ray from the origin.
        let ws = w / w.norm() * 0.5;
        let f0 = series(a, b, c, ws);
        let d0 = a * b / c * series(a + 1.0, b + 1.0, c + 1.0, ws);
        return ode_continue(a, b, c, ws, f0, d0, w, false).0;
    }
    match best.1 {
        0 => series(a, b, c, w),
        1 => (one - w).powc(-a) * series(a, c - b, c, w / (w - one)),
        2 => {
            let z = one - w;
            let t1 =
                gamma(c) * gamma(cab) * rgamma(c - a) * rgamma(c - b) * series(a, b, one - cab, z);
            let t2 = z.powc(cab)
                * gamma(c)
                * gamma(-cab)
                * rgamma(a)
                * rgamma(b)
                * series(c - a, c - b, one + cab, z);
            t1 + t2
        }
        _ => {
            let z = one / w;
            let mw = -w;
            let t1 = gamma(c)
                * gamma(-amb)
                * rgamma(b)
                * rgamma(c - a)
                * mw.powc(-a)
                * series(a, a - c + 1.0, one + amb, z);
            let t2 = gamma(c)
                * gamma(amb)
                * rgamma(a)
                * rgamma(c - b)
                * mw.powc(-b)
                * series(b, b - c + 1.0, one - amb, z);
            t1 + t2
        }
    }
}

/// log 2F1(a, b; c; w) continued along the segment [0, w], together with the
/// logarithmic derivatives F'/F and F''/F. The segment must avoid [1, ∞).
pub fn hyp2f1_log_d2(a: C64, b: C64, c: C64, w: C64) -> (C64, C64, C64) {
    let one = C64::new(1.0, 0.0);
    let f = hyp2f1(a, b, c, w);
    let d = a * b / c * hyp2f1(a + 1.0, b + 1.0, c + 1.0, w);
    let logf = if w.norm() <= 0.5 {
        f.ln()
    } else {
        // The path only selects the branch; the value comes from `hyp2f1`.
        let start = w / w.norm() * 0.5;
        let f0 = series(a, b, c, start);
        let d0 = a * b / c * series(a + 1.0, b + 1.0, c + 1.0, start);
        let (fe, _, dlog, _) = ode_continue(a, b, c, start, f0, d0, w, true);
        f0.ln() + dlog + (f / fe).ln()
    };
    let l1 = d / f;
    let l2 = if w.norm() < 1e-300 {
        a * (a + 1.0) * b * (b + 1.0) / (c * (c + 1.0))
    } else {
        -((c - (a + b + 1.0) * w) * d - a * b * f) / (w * (one - w) * f)
    };
    (logf, l1, l2)
}

/// 2F1 together with its first and second derivatives in w.
pub fn hyp2f1_d2(a: C64, b: C64, c: C64, w: C64) -> (C64, C64, C64) {
    let f = hyp2f1(a, b, c, w);
    let f1 = a * b / c * hyp2f1(a + 1.0, b + 1.0, c + 1.0, w);
    let f2 = a * (a + 1.0) * b * (b + 1.0) / (c * (c + 1.0)) * hyp2f1(a + 2.0, b + 2.0, c + 2.0, w);
    (f, f1, f2)
}

/// exp(i x) shorthand.
pub fn cis(x: f64) -> C64 {
    C64::new(x.cos(), x.sin())
}

/// Multiply by i^n.
pub fn i_pow(n: i64) -> C64 {
    match n.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => I,
        2 => C64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// Brent root finder on a bracketing interval.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1 * xm.signum()
        };
        fb = f(b);
    }
    Some(b)
}
