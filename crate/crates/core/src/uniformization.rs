//! Conformal geometry of the clipped triangle.
//!
//! The shape parameter t > 0 fixes R/d = 1/(2 cosh πt). On the unit disc D
//! the insertion point 1 carries the coordinate patch φ₀ : D₊ → K₀ ⊂ D, whose
//! inverse is known in closed form, and the region outside the patches is
//! mapped onto the clipped triangle by E. Everything here is expressed in the
//! wedge |arg z| ≤ π/3 and extended to the other wedges by rotation.

use crate::error::{CloakError, Result};
use crate::special::{
    binomial_f64, brent, cis, gamma_real, hyp2f1_d2, hyp2f1_log_d2, ln_gamma, C64,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_3, PI};

pub const DEFAULT_SERIES_ORDER: usize = 30;
const CORNER_SWITCH: f64 = 0.02;
const CORNER_RADIUS: f64 = 0.05;
pub const DEFAULT_CURVE_POINTS: usize = 512;

const I: C64 = C64::new(0.0, 1.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// R/d as a function of t.
pub fn ratio_of_t(t: f64) -> f64 {
    1.0 / (2.0 * (PI * t).cosh())
}

/// Inverse of `ratio_of_t`.
pub fn t_of_ratio(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio < 0.5) {
        return Err(CloakError::Config {
            field: "ratio".into(),
            msg: format!("R/d = {ratio} must lie in (0, 1/2)"),
        });
    }
    Ok((1.0 / (2.0 * ratio)).acosh() / PI)
}

/// Hole radius R(t) in the natural scale of E.
pub fn r_of_t(t: f64) -> f64 {
    let ch = (PI * t).cosh();
    // Γ(5/6 - it) Γ(5/6 + it) = |Γ(5/6 + it)|².
    let g = ln_gamma(C64::new(5.0 / 6.0, t)).re;
    (3.0 * PI).sqrt() / (ch * ch - 0.75) * gamma_real(7.0 / 6.0) * (-2.0 * g).exp()
}

/// Edge length d(t) = 2 cosh(πt) R(t).
pub fn d_of_t(t: f64) -> f64 {
    2.0 * (PI * t).cosh() * r_of_t(t)
}

/// X(t) = exp((1/2it) log(Γ(1/6+it)Γ(-it) / (Γ(1/6-it)Γ(it)))), evaluated on
/// the branch continuous in t. The Gamma ratio is a pure phase, so X is real.
pub fn x_of_t(t: f64) -> f64 {
    let phase = ln_gamma(C64::new(1.0 / 6.0, t)).im + ln_gamma(C64::new(0.0, -t)).im;
    (phase / t).exp()
}

/// One point of the traced cut preimage.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CutPoint {
    pub z: C64,
    /// Angle on the unit semicircle of D₊ that φ₀ maps to z.
    pub alpha: f64,
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub curvature: f64,
}

/// The curve b = φ₀(semicircle), oriented so that the region outside K₀ lies
/// on its left (from e^{-iθc} to e^{iθc}); curvatures are as seen from there.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutCurve {
    pub points: Vec<CutPoint>,
}

impl CutCurve {
    /// Rebuild tangents, normals and discrete curvatures from the positions.
    fn from_positions(zs: Vec<C64>, alphas: Vec<f64>) -> Self {
        let n = zs.len();
        let frame = |j: usize| -> ([f64; 2], [f64; 2]) {
            let dz = zs[j] - zs[j - 1];
            let len = dz.norm();
            ([dz.re / len, dz.im / len], [-dz.im / len, dz.re / len])
        };
        let mut points: Vec<CutPoint> = (0..n)
            .map(|j| CutPoint {
                z: zs[j],
                alpha: alphas[j],
                tangent: [0.0; 2],
                normal: [0.0; 2],
                curvature: 0.0,
            })
            .collect();
        for j in 1..n {
            let (t, nn) = frame(j);
            points[j].tangent = t;
            points[j].normal = nn;
        }
        for j in 1..n - 1 {
            let (t1, _) = frame(j + 1);
            let nj = points[j].normal;
            let chord = (zs[j + 1] - zs[j - 1]).norm();
            points[j].curvature = 2.0 * (t1[0] * nj[0] + t1[1] * nj[1]) / chord;
        }
        // End frames and curvatures by extrapolation from the interior.
        points[0].tangent = points[1].tangent;
        points[0].normal = points[1].normal;
        if n >= 4 {
            points[0].curvature = 2.0 * points[1].curvature - points[2].curvature;
            points[n - 1].curvature = 2.0 * points[n - 2].curvature - points[n - 3].curvature;
        }
        CutCurve { points }
    }

    /// Discrete curvature diagnostics for an arbitrary sampled curve.
    pub fn from_samples(zs: Vec<C64>) -> Self {
        let alphas = vec![f64::NAN; zs.len()];
        Self::from_positions(zs, alphas)
    }

    /// ∫ k·f dl along the polyline by the trapezoidal rule on arc length.
    pub fn boundary_integral(&self, f: impl Fn(C64) -> f64) -> f64 {
        let p = &self.points;
        let vals: Vec<f64> = p.iter().map(|q| q.curvature * f(q.z)).collect();
        let mut sum = 0.0;
        for j in 1..p.len() {
            sum += 0.5 * (vals[j] + vals[j - 1]) * (p[j].z - p[j - 1].z).norm();
        }
        sum
    }

    pub fn to_csv(&self, t: f64) -> String {
        let mut s = String::from("t,j,x,y,k\n");
        for (j, q) in self.points.iter().enumerate() {
            s.push_str(&format!(
                "{t},{j},{:.16e},{:.16e},{:.16e}\n",
                q.z.re, q.z.im, q.curvature
            ));
        }
        s
    }
}

/// Geometry of the clipped triangle for one value of t.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TriangleGeometry {
    pub t: f64,
    pub r_t: f64,
    pub d_t: f64,
    pub x_t: f64,
    /// Endpoint angle of the cut preimage on the unit circle.
    pub theta_c: f64,
    /// Taylor coefficients of φ₀ about 0.
    pub phi0_series: Vec<C64>,
    /// Root-test estimate of the radius of convergence of `phi0_series`.
    pub series_radius: f64,
    pub cut_curve: CutCurve,
}

/// Build the geometry with the default number of curve points.
pub fn geometry_of_t(t: f64, series_order: usize) -> Result<TriangleGeometry> {
    TriangleGeometry::new(t, series_order, DEFAULT_CURVE_POINTS)
}

pub fn uniformizer_e(geom: &TriangleGeometry, z: C64, d: f64) -> Result<C64> {
    geom.uniformizer(z, d)
}

pub fn trace_cut_curve(geom: &TriangleGeometry, n: usize) -> Result<CutCurve> {
    geom.trace_cut_curve(n)
}

impl TriangleGeometry {
    pub fn new(t: f64, series_order: usize, curve_points: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CloakError::Config {
                field: "t".into(),
                msg: format!("t = {t} must be positive"),
            });
        }
        if series_order < 3 {
            return Err(CloakError::Config {
                field: "series_order".into(),
                msg: "must be at least 3".into(),
            });
        }
        let mut g = TriangleGeometry {
            t,
            r_t: r_of_t(t),
            d_t: d_of_t(t),
            x_t: x_of_t(t),
            theta_c: 0.0,
            phi0_series: Vec::new(),
            series_radius: 0.0,
            cut_curve: CutCurve { points: Vec::new() },
        };
        g.phi0_series = g.compute_phi0_series(series_order);
        g.series_radius = root_test_radius(&g.phi0_series);
        let h = |th: f64| g.phi0_inverse(cis(th)).norm() - 1.0;
        g.theta_c = brent(h, 1e-12, FRAC_PI_3 * (1.0 - 1e-9), 1e-15).ok_or_else(|| {
            CloakError::Numerical(format!("no endpoint of the cut preimage found for t = {t}"))
        })?;
        g.cut_curve = g.trace_cut_curve(curve_points)?;
        Ok(g)
    }

    /// Constants and the φ₀ series only; θ_c and the cut curve are left empty.
    /// Enough for the Γ transformation, and usable at small t where tracing fails.
    pub fn series_only(t: f64, series_order: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CloakError::Config {
                field: "t".into(),
                msg: format!("t = {t} must be positive"),
            });
        }
        let mut g = TriangleGeometry {
            t,
            r_t: r_of_t(t),
            d_t: d_of_t(t),
            x_t: x_of_t(t),
            theta_c: f64::NAN,
            phi0_series: Vec::new(),
            series_radius: 0.0,
            cut_curve: CutCurve { points: Vec::new() },
        };
        g.phi0_series = g.compute_phi0_series(series_order);
        g.series_radius = root_test_radius(&g.phi0_series);
        Ok(g)
    }

    pub fn ratio(&self) -> f64 {
        ratio_of_t(self.t)
    }

    /// Distance from the triangle centre to a corner, L = d/√3, in E's scale.
    pub fn corner_distance(&self) -> f64 {
        self.d_t / 3f64.sqrt()
    }

    /// Warning text when the series cannot be trusted on all of D₊.
    pub fn series_warning(&self) -> Option<String> {
        if self.series_radius < 1.05 {
            Some(format!(
                "phi0 series radius {:.3} is close to or below 1 at t = {}; truncation error grows near |z| = 1",
                self.series_radius, self.t
            ))
        } else {
            None
        }
    }

    fn params_plus(&self) -> (C64, C64, C64) {
        let t = self.t;
        (
            C64::new(5.0 / 12.0, t / 2.0),
            C64::new(1.0 / 12.0, t / 2.0),
            C64::new(1.0, t),
        )
    }

    fn params_minus(&self) -> (C64, C64, C64) {
        let t = self.t;
        (
            C64::new(5.0 / 12.0, -t / 2.0),
            C64::new(1.0 / 12.0, -t / 2.0),
            C64::new(1.0, -t),
        )
    }

    /// φ₀⁻¹(u).
    pub fn phi0_inverse(&self, u: C64) -> C64 {
        self.phi0_inverse_d2(u).0
    }

    /// φ₀⁻¹ with its first two derivatives.
    pub fn phi0_inverse_d2(&self, u: C64) -> (C64, C64, C64) {
        let u12 = u.sqrt();
        let u32 = u * u12;
        let um32 = ONE / u32;
        let s = (u32 - um32) / (2.0 * I);
        let s1 = 1.5 * (u12 + um32 / u) / (2.0 * I);
        let s2 = 1.5 * (0.5 / u12 - 2.5 * um32 / (u * u)) / (2.0 * I);
        let sig = s * s;
        let sig1 = 2.0 * s * s1;
        let sig2 = 2.0 * (s1 * s1 + s * s2);
        let (a, b, c) = self.params_plus();
        let (logp, lp, lp2) = hyp2f1_log_d2(a, b, c, sig);
        let (a, b, c) = self.params_minus();
        let (logm, lm, lm2) = hyp2f1_log_d2(a, b, c, sig);
        let k = ONE / (2.0 * I * self.t);
        let lam = k * (logp - logm);
        let lam1 = k * (lp - lm) * sig1;
        let lam2 = k * ((lp2 - lp * lp - lm2 + lm * lm) * sig1 * sig1 + (lp - lm) * sig2);
        let pre = 0.5 * self.x_t * lam.exp();
        let psi = pre * s;
        let d1 = s1 + s * lam1;
        let psi1 = pre * d1;
        let psi2 = pre * (s2 + s1 * lam1 + s * lam2 + lam1 * d1);
        (psi, psi1, psi2)
    }

    /// Taylor coefficients of φ₀ about 0 by reverting the expansion of φ₀⁻¹
    /// about u = 1.
    fn compute_phi0_series(&self, order: usize) -> Vec<C64> {
        let n = order + 1;
        // (1+v)^{±3/2} as series in v.
        let p = |alpha: f64| -> Vec<C64> {
            (0..n)
                .map(|k| C64::new(binomial_f64(alpha, k), 0.0))
                .collect()
        };
        let up = p(1.5);
        let um = p(-1.5);
        let s: Vec<C64> = up
            .iter()
            .zip(&um)
            .map(|(a, b)| (a - b) / (2.0 * I))
            .collect();
        let sig = ser_mul(&s, &s, n);
        let hyp = |(a, b, c): (C64, C64, C64)| -> Vec<C64> {
            let mut out = vec![ONE; n];
            for k in 1..n {
                let kf = (k - 1) as f64;
                out[k] = out[k - 1] * (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0));
            }
            out
        };
        let fp = ser_compose(&hyp(self.params_plus()), &sig, n);
        let fm = ser_compose(&hyp(self.params_minus()), &sig, n);
        let k = ONE / (2.0 * I * self.t);
        let lam: Vec<C64> = ser_log(&fp, n)
            .iter()
            .zip(ser_log(&fm, n))
            .map(|(a, b)| k * (a - b))
            .collect();
        let e = ser_exp(&lam, n);
        let w: Vec<C64> = ser_mul(&s, &e, n)
            .into_iter()
            .map(|x| x * 0.5 * self.x_t)
            .collect();
        let mut v = ser_revert(&w, n);
        v[0] = ONE;
        v
    }

    /// Evaluate the truncated φ₀ series.
    pub fn phi0_series_eval(&self, z: C64) -> C64 {
        self.phi0_series
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// φ₀(z) by Newton iteration on the closed-form inverse, continued along
    /// the segment from 0 when the series guess is not reliable.
    pub fn phi0(&self, z: C64) -> Result<C64> {
        if z.norm() < 0.5 * self.series_radius.min(1.0) {
            if let Some(u) = self.newton_inverse(z, self.phi0_series_eval(z)) {
                return Ok(u);
            }
        }
        let steps = 16;
        let mut u = ONE;
        for k in 1..=steps {
            let zk = z * (k as f64 / steps as f64);
            u = self.newton_inverse(zk, u).ok_or_else(|| {
                CloakError::Numerical(format!(
                    "phi0 inversion failed at z = {z} for t = {}",
                    self.t
                ))
            })?;
        }
        Ok(u)
    }

    fn newton_inverse(&self, z: C64, mut u: C64) -> Option<C64> {
        for _ in 0..60 {
            let (psi, psi1, _) = self.phi0_inverse_d2(u);
            let du = (psi - z) / psi1;
            let mut step = du;
            // Keep the iterate in the right half plane where the branches are valid.
            while (u - step).re <= 0.0 || (u - step).arg().abs() > FRAC_PI_3 + 0.3 {
                step *= 0.5;
            }
            u -= step;
            if du.norm() < 1e-14 * u.norm().max(1.0) {
                break;
            }
        }
        let psi = self.phi0_inverse(u);
        ((psi - z).norm() < 1e-11 * z.norm().max(1.0)).then_some(u)
    }

    /// Radius of the cut preimage along the ray at angle θ (|θ| < θc).
    pub fn cut_radius(&self, theta: f64) -> Option<f64> {
        if theta.abs() >= self.theta_c {
            return None;
        }
        let f = |r: f64| self.phi0_inverse(C64::from_polar(r, theta)).norm() - 1.0;
        if f(1.0) >= 0.0 {
            return Some(1.0);
        }
        let mut lo = 1.0;
        loop {
            lo -= 0.05;
            if lo <= 0.0 {
                return None;
            }
            if f(lo) > 0.0 {
                break;
            }
        }
        brent(f, lo, 1.0, 1e-15)
    }

    /// Whether a point of D lies in one of the coordinate patches K_n.
    pub fn in_patch(&self, z: C64) -> bool {
        let w = rotate_into_wedge(z).0;
        match self.cut_radius(w.arg()) {
            Some(r) => w.norm() > r,
            None => false,
        }
    }

    /// The point of b with preimage e^{iα} on the semicircle, Newton-solved
    /// from a starting guess.
    pub fn cut_point_from(&self, alpha: f64, guess: C64) -> Option<C64> {
        self.newton_inverse(cis(alpha), guess)
    }

    /// The point of b with preimage e^{iα}, started from the nearest traced point.
    pub fn cut_point(&self, alpha: f64) -> Result<C64> {
        let pts = &self.cut_curve.points;
        let guess = pts
            .iter()
            .min_by(|a, b| (a.alpha - alpha).abs().total_cmp(&(b.alpha - alpha).abs()))
            .map(|p| p.z)
            .unwrap_or(ONE);
        self.cut_point_from(alpha, guess).ok_or_else(|| {
            CloakError::Numerical(format!(
                "cut point at alpha = {alpha} not found for t = {}",
                self.t
            ))
        })
    }

    /// Trace b with N+1 points equally spaced in the semicircle angle, by
    /// continuation from its midpoint towards both endpoints.
    pub fn trace_cut_curve(&self, n: usize) -> Result<CutCurve> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(CloakError::Config {
                field: "curve_points".into(),
                msg: format!("N = {n} must be even and >= 4"),
            });
        }
        let r0 = self.cut_radius(0.0).ok_or_else(|| {
            CloakError::Numerical(format!("cut midpoint not found for t = {}", self.t))
        })?;
        let alphas: Vec<f64> = (0..=n).map(|j| PI * (1.0 - j as f64 / n as f64)).collect();
        let mut zs = vec![C64::new(0.0, 0.0); n + 1];
        let mid = n / 2;
        zs[mid] = self
            .cut_point_from(alphas[mid], C64::new(r0, 0.0))
            .ok_or_else(|| {
                CloakError::Numerical(format!("tracing failed at t = {}, j = {mid}", self.t))
            })?;
        for j in (mid + 1..=n).chain((0..mid).rev()) {
            let prev = if j > mid { j - 1 } else { j + 1 };
            let prev2 = if j > mid { j.wrapping_sub(2) } else { j + 2 };
            // Linear predictor from the last two points, Newton corrector.
            let guess = if prev2 <= n
                && prev2 != usize::MAX
                && (prev2 as isize - mid as isize).abs() < (j as isize - mid as isize).abs()
            {
                2.0 * zs[prev] - zs[prev2]
            } else {
                zs[prev]
            };
            zs[j] = self
                .cut_point_from(alphas[j], guess)
                .or_else(|| self.cut_point_from(alphas[j], zs[prev]))
                .ok_or_else(|| {
                    CloakError::Numerical(format!("tracing failed at t = {}, j = {j}", self.t))
                })?;
        }
        Ok(CutCurve::from_positions(zs, alphas))
    }

    /// Raw E with derivatives on the wedge |arg z| ≤ π/3, in the scale d(t).
    pub fn uniformizer_raw_d2(&self, z: C64) -> (C64, C64, C64) {
        let t = self.t;
        // On |z| = 1 the argument w sits on the branch cut; take the limit from inside.
        let z = if z.norm() > 1.0 - 1e-13 {
            z * ((1.0 - 1e-13) / z.norm())
        } else {
            z
        };
        let z12 = z.sqrt();
        let z32 = z * z12;
        let zm32 = ONE / z32;
        let y = 0.5 * (zm32 - z32);
        let y1 = -0.75 * (zm32 / z + z12);
        let y2 = -0.75 * (-2.5 * zm32 / (z * z) + 0.5 / z12);
        let w = -ONE / (y * y);
        let w1 = 2.0 * y1 / (y * y * y);
        let w2 = 2.0 * (y2 / (y * y * y) - 3.0 * y1 * y1 / (y * y * y * y));
        let (f, f1, f2) = hyp2f1_d2(
            C64::new(5.0 / 12.0, t / 2.0),
            C64::new(5.0 / 12.0, -t / 2.0),
            C64::new(4.0 / 3.0, 0.0),
            w,
        );
        let (g, g1, g2) = hyp2f1_d2(
            C64::new(1.0 / 12.0, t / 2.0),
            C64::new(1.0 / 12.0, -t / 2.0),
            C64::new(2.0 / 3.0, 0.0),
            w,
        );
        let e = -I * y.powf(-2.0 / 3.0) * f / g;
        let lf = f1 / f;
        let lg = g1 / g;
        let l1 = -2.0 / 3.0 * y1 / y + (lf - lg) * w1;
        let l2 = -2.0 / 3.0 * (y2 / y - (y1 / y) * (y1 / y))
            + (f2 / f - lf * lf - g2 / g + lg * lg) * w1 * w1
            + (lf - lg) * w2;
        let e1 = e * l1;
        let e2 = e * (l2 + l1 * l1);
        (e, e1, e2)
    }

    /// E with derivatives on the wedge, in the scale d(t). Near the corners
    /// e^{±iπ/3} the hypergeometric ratio loses its cancellation, so there the
    /// derivatives come from a Cauchy integral over the reflected extension.
    pub fn uniformizer_d2(&self, z: C64) -> (C64, C64, C64) {
        if z.im < 0.0 {
            let (e, e1, e2) = self.uniformizer_d2(z.conj());
            return (-e.conj(), -e1.conj(), -e2.conj());
        }
        let c = cis(FRAC_PI_3);
        if (z - c).norm() >= CORNER_SWITCH {
            return self.uniformizer_raw_d2(z);
        }
        let n = 128;
        let mut acc = [C64::new(0.0, 0.0); 3];
        for k in 0..n {
            let e = cis(2.0 * PI * k as f64 / n as f64);
            let zeta = c + CORNER_RADIUS * e;
            let f = self.uniformizer_extended(zeta);
            let q = ONE / (zeta - z);
            // dζ = i ρ e dθ; the 1/(2πi) and dθ = 2π/n combine to ρ e / n.
            let wgt = f * CORNER_RADIUS * e / n as f64;
            acc[0] += wgt * q;
            acc[1] += wgt * q * q;
            acc[2] += 2.0 * wgt * q * q * q;
        }
        (acc[0], acc[1], acc[2])
    }

    /// E continued across the ray arg z = π/3 and the unit circle by reflection.
    fn uniformizer_extended(&self, z: C64) -> C64 {
        if z.norm() > 1.0 {
            let p = self.corner_distance() * cis(-FRAC_PI_3 / 2.0);
            let inner = self.uniformizer_extended(ONE / z.conj());
            return p + self.r_t * self.r_t / (inner - p).conj();
        }
        if z.arg() > FRAC_PI_3 {
            let m = cis(2.0 * FRAC_PI_3) * z.conj();
            return cis(-FRAC_PI_3) * self.uniformizer_raw_d2(m).0.conj();
        }
        self.uniformizer_raw_d2(z).0
    }

    /// E(z) scaled to edge length d, on all of D outside the patches.
    pub fn uniformizer(&self, z: C64, d: f64) -> Result<C64> {
        if z.norm() > 1.0 + 1e-12 {
            return Err(CloakError::Config {
                field: "z".into(),
                msg: format!("{z} lies outside the unit disc"),
            });
        }
        if self.in_patch(z) {
            return Err(CloakError::Config {
                field: "z".into(),
                msg: format!("{z} lies inside a coordinate patch"),
            });
        }
        let (w, rot) = rotate_into_wedge(z);
        Ok(rot * self.uniformizer_raw_d2(w).0 * (d / self.d_t))
    }
}

/// Rotate z into the wedge |arg| ≤ π/3; returns (rotated point, rotation back).
pub fn rotate_into_wedge(z: C64) -> (C64, C64) {
    let a = z.arg();
    let n = (a / (2.0 * FRAC_PI_3)).round();
    let rot = cis(2.0 * FRAC_PI_3 * n);
    (z / rot, rot)
}

fn root_test_radius(c: &[C64]) -> f64 {
    let n = c.len();
    let tail: Vec<f64> = (n / 2..n)
        .filter(|&k| k > 0 && c[k].norm() > 0.0)
        .map(|k| c[k].norm().powf(-1.0 / k as f64))
        .collect();
    if tail.is_empty() {
        f64::INFINITY
    } else {
        tail.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn ser_mul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (i, &x) in a.iter().enumerate().take(n) {
        for (j, &y) in b.iter().enumerate().take(n - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// f(σ(v)) for σ with zero constant term.
fn ser_compose(f: &[C64], sig: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for &c in f.iter().take(n).rev() {
        out = ser_mul(&out, sig, n);
        out[0] += c;
    }
    out
}

fn ser_log(a: &[C64], n: usize) -> Vec<C64> {
    let mut g = vec![C64::new(0.0, 0.0); n];
    g[0] = a[0].ln();
    for k in 1..n {
        let mut acc = a[k] * k as f64;
        for j in 1..k {
            acc -= g[j] * a[k - j] * j as f64;
        }
        g[k] = acc / (a[0] * k as f64);
    }
    g
}

fn ser_exp(g: &[C64], n: usize) -> Vec<C64> {
    let mut f = vec![C64::new(0.0, 0.0); n];
    f[0] = g[0].exp();
    for k in 1..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 1..=k {
            acc += g[j] * f[k - j] * j as f64;
        }
        f[k] = acc / k as f64;
    }
    f
}

/// Compositional inverse of w(v) = Σ_{k≥1} w_k v^k.
fn ser_revert(w: &[C64], n: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[1] = ONE / w[1];
    for m in 2..n {
        let mut comp = vec![C64::new(0.0, 0.0); n];
        let mut pow = v.clone();
        for &wk in w.iter().take(m + 1).skip(1) {
            comp[m] += wk * pow[m];
            pow = ser_mul(&pow, &v, m + 1);
            pow.resize(n, C64::new(0.0, 0.0));
        }
        v[m] = -comp[m] / w[1];
    }
    v
}
