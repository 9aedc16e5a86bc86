//! Anomaly (Liouville) action on planar regions with flat background metric:
//!
//!   L(Ω) = (1/4π) ∫ |∇Ω|² dA + (1/π) ∮ k Ω dl  [+ (1/2π) Σ (π²-α²)/α Ω(xᵢ)]
//!
//! Bulk integrals are nested adaptive tanh-sinh quadratures over polar
//! patches, boundary integrals run over parametrised arcs with the region on
//! the left.

use crate::error::{CloakError, Result};
use crate::special::{cis, C64};
use crate::uniformization::TriangleGeometry;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_3, PI};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Adaptive tanh-sinh quadrature with interval bisection; returns (value, error estimate).
/// Bisection stops once two halves reproduce the parent value, so integrands
/// with a noise floor above `tol` do not recurse forever.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let o = quadrature::double_exponential::integrate(f, a, b, tol);
    adapt(f, a, b, o.integral, o.error_estimate, tol, 10)
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    err: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64) {
    let tol = tol.max(1e-13 * whole.abs());
    if err <= tol || depth == 0 {
        return (whole, err);
    }
    let m = 0.5 * (a + b);
    let l = quadrature::double_exponential::integrate(f, a, m, 0.5 * tol);
    let r = quadrature::double_exponential::integrate(f, m, b, 0.5 * tol);
    let diff = (l.integral + r.integral - whole).abs();
    if diff <= tol {
        return (l.integral + r.integral, diff.max(l.error_estimate.min(err)));
    }
    let (vl, el) = adapt(f, a, m, l.integral, l.error_estimate, 0.5 * tol, depth - 1);
    let (vr, er) = adapt(f, m, b, r.integral, r.error_estimate, 0.5 * tol, depth - 1);
    (vl + vr, el + er)
}

/// Integrate over consecutive sub-intervals given by sorted break points.
fn integrate_broken<F: Fn(f64) -> f64 + Sync>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> (f64, f64) {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    let parts: Vec<(f64, f64)> = pts
        .par_windows(2)
        .map(|w| integrate(f, w[0], w[1], tol / (pts.len() - 1) as f64))
        .collect();
    parts
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
}

/// A smooth Weyl factor Ω with gradient access. The gradient is returned as
/// the complex number ∂ₓΩ + i∂ᵧΩ.
pub trait WeylField: Sync {
    fn omega(&self, z: C64) -> f64;
    fn grad(&self, z: C64) -> C64;
    fn laplacian(&self, z: C64) -> f64 {
        let h = 1e-5;
        let gx = self.grad(z + h).re - self.grad(z - h).re;
        let gy = self.grad(z + C64::new(0.0, h)).im - self.grad(z - C64::new(0.0, h)).im;
        (gx + gy) / (2.0 * h)
    }
}

/// Ω = log|F'|² for a holomorphic F given through (F', F'').
pub struct Holomorphic<F: Fn(C64) -> (C64, C64) + Sync>(pub F);

impl<F: Fn(C64) -> (C64, C64) + Sync> WeylField for Holomorphic<F> {
    fn omega(&self, z: C64) -> f64 {
        (self.0)(z).0.norm_sqr().ln()
    }
    fn grad(&self, z: C64) -> C64 {
        let (d1, d2) = (self.0)(z);
        2.0 * (d2 / d1).conj()
    }
    fn laplacian(&self, _z: C64) -> f64 {
        0.0
    }
}

pub struct Constant(pub f64);

impl WeylField for Constant {
    fn omega(&self, _z: C64) -> f64 {
        self.0
    }
    fn grad(&self, _z: C64) -> C64 {
        C64::new(0.0, 0.0)
    }
    fn laplacian(&self, _z: C64) -> f64 {
        0.0
    }
}

/// A field given by closures for Ω and its gradient.
pub struct FnField<O: Fn(C64) -> f64 + Sync, G: Fn(C64) -> C64 + Sync> {
    pub omega: O,
    pub grad: G,
}

impl<O: Fn(C64) -> f64 + Sync, G: Fn(C64) -> C64 + Sync> WeylField for FnField<O, G> {
    fn omega(&self, z: C64) -> f64 {
        (self.omega)(z)
    }
    fn grad(&self, z: C64) -> C64 {
        (self.grad)(z)
    }
}

pub struct Sum<'a>(pub &'a dyn WeylField, pub &'a dyn WeylField);

impl WeylField for Sum<'_> {
    fn omega(&self, z: C64) -> f64 {
        self.0.omega(z) + self.1.omega(z)
    }
    fn grad(&self, z: C64) -> C64 {
        self.0.grad(z) + self.1.grad(z)
    }
    fn laplacian(&self, z: C64) -> f64 {
        self.0.laplacian(z) + self.1.laplacian(z)
    }
}

/// Ω∘F for a holomorphic F given through (F, F').
pub struct Pullback<'a, F: Fn(C64) -> (C64, C64) + Sync>(pub &'a dyn WeylField, pub F);

impl<F: Fn(C64) -> (C64, C64) + Sync> WeylField for Pullback<'_, F> {
    fn omega(&self, z: C64) -> f64 {
        self.0.omega((self.1)(z).0)
    }
    fn grad(&self, z: C64) -> C64 {
        let (w, d) = (self.1)(z);
        self.0.grad(w) * d.conj()
    }
}

type RadialFn<'a> = Box<dyn Fn(f64) -> f64 + Sync + Send + 'a>;
type CurveFn<'a> = Box<dyn Fn(f64) -> (C64, C64, C64) + Sync + Send + 'a>;

/// {center + r e^{iθ} : θ₀ ≤ θ ≤ θ₁, r_in(θ) ≤ r ≤ r_out(θ)}.
pub struct PolarPatch<'a> {
    pub center: C64,
    pub theta: (f64, f64),
    pub r_in: RadialFn<'a>,
    pub r_out: RadialFn<'a>,
    /// Angles where r_in or r_out is not smooth.
    pub breaks: Vec<f64>,
}

/// A smooth boundary piece s ↦ γ(s), returning (γ, γ', γ''), with the region
/// on its left.
pub struct BoundaryArc<'a> {
    pub range: (f64, f64),
    pub curve: CurveFn<'a>,
    pub breaks: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Corner {
    pub point: C64,
    /// Interior opening angle.
    pub angle: f64,
}

#[derive(Default)]
pub struct Region<'a> {
    pub bulk: Vec<PolarPatch<'a>>,
    pub boundary: Vec<BoundaryArc<'a>>,
    pub corners: Vec<Corner>,
}

fn constant(x: f64) -> RadialFn<'static> {
    Box::new(move |_| x)
}

/// Circle of radius ρ about c, counter-clockwise (or clockwise) between two angles.
pub fn circle_arc(c: C64, rho: f64, from: f64, to: f64) -> BoundaryArc<'static> {
    BoundaryArc {
        range: (from, to),
        curve: Box::new(move |s| {
            let e = cis(s);
            (c + rho * e, C64::new(0.0, rho) * e, -rho * e)
        }),
        breaks: Vec::new(),
    }
}

pub fn segment(a: C64, b: C64) -> BoundaryArc<'static> {
    BoundaryArc {
        range: (0.0, 1.0),
        curve: Box::new(move |s| (a + s * (b - a), b - a, C64::new(0.0, 0.0))),
        breaks: Vec::new(),
    }
}

impl Region<'_> {
    pub fn disc(center: C64, radius: f64) -> Region<'static> {
        Region {
            bulk: vec![PolarPatch {
                center,
                theta: (0.0, 2.0 * PI),
                r_in: constant(0.0),
                r_out: constant(radius),
                breaks: vec![],
            }],
            boundary: vec![circle_arc(center, radius, 0.0, 2.0 * PI)],
            corners: vec![],
        }
    }

    pub fn annulus(r_minus: f64, r_plus: f64) -> Region<'static> {
        let o = C64::new(0.0, 0.0);
        Region {
            bulk: vec![PolarPatch {
                center: o,
                theta: (0.0, 2.0 * PI),
                r_in: constant(r_minus),
                r_out: constant(r_plus),
                breaks: vec![],
            }],
            boundary: vec![
                circle_arc(o, r_plus, 0.0, 2.0 * PI),
                circle_arc(o, r_minus, 2.0 * PI, 0.0),
            ],
            corners: vec![],
        }
    }

    /// Closed upper half of the unit disc; its two corners have angle π/2.
    pub fn upper_half_disc() -> Region<'static> {
        let o = C64::new(0.0, 0.0);
        Region {
            bulk: vec![PolarPatch {
                center: o,
                theta: (0.0, PI),
                r_in: constant(0.0),
                r_out: constant(1.0),
                breaks: vec![],
            }],
            boundary: vec![
                circle_arc(o, 1.0, 0.0, PI),
                segment(C64::new(-1.0, 0.0), C64::new(1.0, 0.0)),
            ],
            corners: vec![
                Corner {
                    point: C64::new(1.0, 0.0),
                    angle: PI / 2.0,
                },
                Corner {
                    point: C64::new(-1.0, 0.0),
                    angle: PI / 2.0,
                },
            ],
        }
    }

    /// Regular n-gon with corners on the unit circle at e^{2πik/n}.
    pub fn regular_ngon(n: usize) -> Region<'static> {
        let corner = |k: usize| cis(2.0 * PI * k as f64 / n as f64);
        let apothem = (PI / n as f64).cos();
        let mut r = Region::default();
        for k in 0..n {
            let mid = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            r.bulk.push(PolarPatch {
                center: C64::new(0.0, 0.0),
                theta: (
                    2.0 * PI * k as f64 / n as f64,
                    2.0 * PI * (k + 1) as f64 / n as f64,
                ),
                r_in: constant(0.0),
                r_out: Box::new(move |th| apothem / (th - mid).cos()),
                breaks: vec![],
            });
            r.boundary.push(segment(corner(k), corner(k + 1)));
            r.corners.push(Corner {
                point: corner(k),
                angle: PI - 2.0 * PI / n as f64,
            });
        }
        r
    }

    /// Largest gap between the end of one boundary piece and the start of the
    /// next, with the list taken cyclically.
    pub fn closure_gap(&self) -> f64 {
        let n = self.boundary.len();
        (0..n)
            .map(|i| {
                let a = &self.boundary[i];
                let b = &self.boundary[(i + 1) % n];
                ((a.curve)(a.range.1).0 - (b.curve)(b.range.0).0).norm()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Action {
    pub bulk: f64,
    pub boundary: f64,
    pub corners: f64,
    pub error: f64,
}

impl Action {
    pub fn total(&self) -> f64 {
        self.bulk + self.boundary + self.corners
    }
}

impl std::ops::Add for Action {
    type Output = Action;
    fn add(self, o: Action) -> Action {
        Action {
            bulk: self.bulk + o.bulk,
            boundary: self.boundary + o.boundary,
            corners: self.corners + o.corners,
            error: self.error + o.error,
        }
    }
}

impl std::ops::Neg for Action {
    type Output = Action;
    fn neg(self) -> Action {
        Action {
            bulk: -self.bulk,
            boundary: -self.boundary,
            corners: -self.corners,
            error: self.error,
        }
    }
}

fn bulk_integral(p: &PolarPatch, density: &(dyn Fn(C64) -> f64 + Sync), tol: f64) -> (f64, f64) {
    let inner = |th: f64| -> f64 {
        let (r0, r1) = ((p.r_in)(th), (p.r_out)(th));
        let e = cis(th);
        integrate(&|r: f64| r * density(p.center + r * e), r0, r1, 0.1 * tol).0
    };
    integrate_broken(&inner, p.theta.0, p.theta.1, &p.breaks, tol)
}

fn arc_integral(
    a: &BoundaryArc,
    weight: &(dyn Fn(C64, C64, C64) -> f64 + Sync),
    tol: f64,
) -> (f64, f64) {
    // The weight is a density in arc length, so a reversed range is integrated
    // over the same interval; orientation enters only through the curvature sign.
    let (lo, hi) = if a.range.0 <= a.range.1 {
        a.range
    } else {
        (a.range.1, a.range.0)
    };
    let f = |s: f64| {
        let (g, d1, d2) = (a.curve)(s);
        weight(g, d1, d2)
    };
    integrate_broken(&f, lo, hi, &a.breaks, tol)
}

/// Signed curvature times |γ'|, i.e. k dl/ds, positive when turning left.
fn curvature_speed(d1: C64, d2: C64) -> f64 {
    (d1.conj() * d2).im / d1.norm_sqr()
}

/// The anomaly action with flat background metric.
///
/// `include_corners` adds the corner term for each vertex of the region. That
/// term is exact for constant Ω; for non-constant Ω it is experimental.
pub fn liouville_action(
    region: &Region,
    field: &dyn WeylField,
    include_corners: bool,
    tol: f64,
) -> Result<Action> {
    let density = |z: C64| field.grad(z).norm_sqr() / (4.0 * PI);
    let bulk: Vec<(f64, f64)> = region
        .bulk
        .par_iter()
        .map(|p| bulk_integral(p, &density, tol))
        .collect();
    let bdy: Vec<(f64, f64)> = region
        .boundary
        .par_iter()
        .map(|a| {
            let reversed = a.range.0 > a.range.1;
            let w = move |g: C64, d1: C64, d2: C64| {
                let kv = curvature_speed(d1, d2);
                let kv = if reversed { -kv } else { kv };
                kv * field.omega(g) / PI
            };
            arc_integral(a, &w, tol)
        })
        .collect();
    let corners = if include_corners {
        region
            .corners
            .iter()
            .map(|c| (PI * PI - c.angle * c.angle) / c.angle * field.omega(c.point) / (2.0 * PI))
            .sum()
    } else {
        0.0
    };
    let act = Action {
        bulk: bulk.iter().map(|x| x.0).sum(),
        boundary: bdy.iter().map(|x| x.0).sum(),
        corners,
        error: bulk.iter().chain(&bdy).map(|x| x.1).sum(),
    };
    check_error(act, tol)
}

fn check_error(act: Action, tol: f64) -> Result<Action> {
    let scale = act.total().abs().max(1.0);
    if !act.total().is_finite() || act.error > 1e3 * tol * scale {
        return Err(CloakError::Numerical(format!(
            "anomaly quadrature did not converge: value {} with error estimate {:.3e}",
            act.total(),
            act.error
        )));
    }
    Ok(act)
}

/// L_{g₁}(Ω₂) for the curved metric g₁ = e^{Ω₁}δ, written in flat coordinates.
pub fn liouville_action_curved(
    region: &Region,
    omega1: &dyn WeylField,
    omega2: &dyn WeylField,
    tol: f64,
) -> Result<Action> {
    let density = |z: C64| {
        (-omega1.laplacian(z) * omega2.omega(z) + 0.5 * omega2.grad(z).norm_sqr()) / (2.0 * PI)
    };
    let bulk: Vec<(f64, f64)> = region
        .bulk
        .par_iter()
        .map(|p| bulk_integral(p, &density, tol))
        .collect();
    let bdy: Vec<(f64, f64)> = region
        .boundary
        .par_iter()
        .map(|a| {
            let reversed = a.range.0 > a.range.1;
            let w = move |g: C64, d1: C64, d2: C64| {
                let sgn = if reversed { -1.0 } else { 1.0 };
                let kv = sgn * curvature_speed(d1, d2);
                // Inward (left) unit normal along the direction of travel.
                let n = C64::new(0.0, sgn) * d1 / d1.norm();
                let dn = (omega1.grad(g) * n.conj()).re;
                (kv - 0.5 * dn * d1.norm()) * omega2.omega(g) / PI
            };
            arc_integral(a, &w, tol)
        })
        .collect();
    let act = Action {
        bulk: bulk.iter().map(|x| x.0).sum(),
        boundary: bdy.iter().map(|x| x.0).sum(),
        corners: 0.0,
        error: bulk.iter().chain(&bdy).map(|x| x.1).sum(),
    };
    check_error(act, tol)
}

/// |L_δ(Ω₁+Ω₂) − L_{g₁}(Ω₂) − L_δ(Ω₁)|.
pub fn cocycle_check(
    region: &Region,
    omega1: &dyn WeylField,
    omega2: &dyn WeylField,
    tol: f64,
) -> Result<f64> {
    let lhs = liouville_action(region, &Sum(omega1, omega2), false, tol)?.total();
    let curved = liouville_action_curved(region, omega1, omega2, tol)?.total();
    let flat = liouville_action(region, omega1, false, tol)?.total();
    Ok((lhs - curved - flat).abs())
}

/// Closed-form anomaly actions of the worked examples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReferenceCase {
    /// Unit disc with Ω = 2 log R (disc of radius R pulled back to radius 1).
    DiscScale { radius: f64 },
    /// Cylinder of radius R and length L mapped to an annulus.
    CylinderAnnulus { radius: f64, length: f64 },
    /// Hole of radius R rescaled to 1: contribution of the hole boundary.
    TorusHole { radius: f64 },
    /// Upper half disc with Ω from z ↦ (i-z)/(i+z).
    HalfDiscMobius,
    /// Regular n-gon with constant Ω, corner term included.
    RegularNgonCorner { n: usize, omega: f64 },
}

pub fn reference_anomaly(case: ReferenceCase) -> Result<f64> {
    let bad = |msg: &str| {
        Err(CloakError::Config {
            field: "reference_case".into(),
            msg: msg.into(),
        })
    };
    match case {
        ReferenceCase::DiscScale { radius } if radius > 0.0 => Ok(4.0 * radius.ln()),
        ReferenceCase::CylinderAnnulus { radius, length } if radius > 0.0 && length > 0.0 => {
            Ok(-2.0 * length / radius)
        }
        ReferenceCase::TorusHole { radius } if radius > 0.0 => Ok(-4.0 * radius.ln()),
        ReferenceCase::HalfDiscMobius => Ok(0.0),
        ReferenceCase::RegularNgonCorner { n, omega } if n >= 3 => {
            let n = n as f64;
            Ok(2.0 * (1.0 - 1.0 / n) / (1.0 - 2.0 / n) * omega)
        }
        _ => bad("parameters out of range"),
    }
}

/// How the boundary term on the cut preimage is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutScheme {
    /// Curvature and arc length from the closed-form φ₀⁻¹.
    Analytic,
    /// Discrete curvature and trapezoidal rule on the traced polyline.
    Traced,
}

/// The two actions entering the triangle anomaly constant.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TriangleAnomaly {
    pub t: f64,
    /// L over the part of the wedge outside K₀, with Ω = log|E'|².
    pub l_triangle: Action,
    /// L over D₊ with Ω = log|φ₀'|², obtained as −L over K₀ of log|(φ₀⁻¹)'|².
    pub l_half_disc: Action,
    /// Edge length of the triangle E maps onto.
    pub d_t: f64,
    /// Total geodesic curvature ∮k dl of the wedge region, used for rescaling.
    pub turning: f64,
}

impl TriangleAnomaly {
    /// A(t) for central charge c.
    pub fn a(&self, c: f64) -> f64 {
        c / 8.0 * (self.l_triangle.total() - self.l_half_disc.total())
    }

    /// A for the same shape rescaled to edge length d: a constant shift 2 log(d/d_t)
    /// of Ω only picks up the boundary term.
    pub fn a_at(&self, c: f64, d: f64) -> f64 {
        self.a(c) + c / 8.0 * 2.0 * (d / self.d_t).ln() * self.turning / PI
    }

    pub fn error(&self, c: f64) -> f64 {
        c.abs() / 8.0 * (self.l_triangle.error + self.l_half_disc.error)
    }
}

/// Both actions for the clipped-triangle wedge.
pub fn triangle_anomaly(
    geom: &TriangleGeometry,
    scheme: CutScheme,
    tol: f64,
) -> Result<TriangleAnomaly> {
    let tc = geom.theta_c;
    let e_field = Holomorphic(|z: C64| {
        let (_, d1, d2) = geom.uniformizer_d2(z);
        (d1, d2)
    });
    let psi_field = Holomorphic(|u: C64| {
        let (_, d1, d2) = geom.phi0_inverse_d2(u);
        (d1, d2)
    });
    let rho = move |th: f64| geom.cut_radius(th).unwrap_or(1.0);
    let o = C64::new(0.0, 0.0);

    let outside = Region {
        bulk: vec![PolarPatch {
            center: o,
            theta: (-FRAC_PI_3, FRAC_PI_3),
            r_in: constant(0.0),
            r_out: Box::new(rho),
            breaks: vec![-tc, 0.0, tc],
        }],
        // The two rays are straight and carry no boundary term.
        boundary: vec![
            circle_arc(o, 1.0, -FRAC_PI_3, -tc),
            circle_arc(o, 1.0, tc, FRAC_PI_3),
        ],
        corners: vec![],
    };
    let patch = Region {
        bulk: vec![PolarPatch {
            center: o,
            theta: (-tc, tc),
            r_in: Box::new(rho),
            r_out: constant(1.0),
            breaks: vec![0.0],
        }],
        boundary: vec![circle_arc(o, 1.0, -tc, tc)],
        corners: vec![],
    };
    let mut l_out = liouville_action(&outside, &e_field, false, tol)?;
    let arcs = 2.0 * (FRAC_PI_3 - tc);
    let mut l_patch = liouville_action(&patch, &psi_field, false, tol)?;

    // Boundary terms on the cut preimage b.
    let (cut_out, cut_patch, turning) = match scheme {
        CutScheme::Analytic => {
            // b parametrised by the semicircle angle α; α from 0 to π keeps K₀ on the left.
            let curve = |alpha: f64| -> (C64, C64, C64) {
                let u = geom
                    .cut_point(alpha)
                    .unwrap_or(C64::new(f64::NAN, f64::NAN));
                let (_, p1, p2) = geom.phi0_inverse_d2(u);
                let e = cis(alpha);
                let f1 = 1.0 / p1;
                let f2 = -p2 / (p1 * p1 * p1);
                (u, C64::new(0.0, 1.0) * e * f1, -e * f1 - e * e * f2)
            };
            let arc = BoundaryArc {
                range: (0.0, PI),
                curve: Box::new(curve),
                breaks: vec![PI / 2.0],
            };
            let kp = |g: C64, d1: C64, d2: C64| curvature_speed(d1, d2) * psi_field.omega(g) / PI;
            let ke = |g: C64, d1: C64, d2: C64| -curvature_speed(d1, d2) * e_field.omega(g) / PI;
            let (vp, ep) = arc_integral(&arc, &kp, tol);
            let (ve, ee) = arc_integral(&arc, &ke, tol);
            let (kb, _) = arc_integral(&arc, &|_, d1, d2| curvature_speed(d1, d2), tol);
            ((ve, ee), (vp, ep), arcs - kb)
        }
        CutScheme::Traced => {
            let c = &geom.cut_curve;
            let ve = c.boundary_integral(|z| e_field.omega(z)) / PI;
            let vp = -c.boundary_integral(|z| psi_field.omega(z)) / PI;
            ((ve, 0.0), (vp, 0.0), arcs + c.boundary_integral(|_| 1.0))
        }
    };
    l_out.boundary += cut_out.0;
    l_out.error += cut_out.1;
    l_patch.boundary += cut_patch.0;
    l_patch.error += cut_patch.1;
    Ok(TriangleAnomaly {
        t: geom.t,
        l_triangle: l_out,
        l_half_disc: -l_patch,
        d_t: geom.d_t,
        turning,
    })
}

/// A(t) = (c/8)(L_{T̃◁}(log|E'|²) − L_{D₊}(log|φ₀'|²)).
pub fn triangle_anomaly_a(geom: &TriangleGeometry, c: f64) -> Result<f64> {
    Ok(triangle_anomaly(geom, CutScheme::Analytic, DEFAULT_TOL)?.a(c))
}

/// L_{D₊}(log|φ₀'|²) evaluated directly on the half disc by inverting φ₀⁻¹.
pub fn half_disc_action_direct(geom: &TriangleGeometry, tol: f64) -> Result<Action> {
    let field = Holomorphic(|z: C64| {
        let u = geom.phi0(z).unwrap_or(C64::new(f64::NAN, f64::NAN));
        let (_, p1, p2) = geom.phi0_inverse_d2(u);
        (1.0 / p1, -p2 / (p1 * p1 * p1))
    });
    liouville_action(&Region::upper_half_disc(), &field, false, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uniformization::geometry_of_t;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CATALAN: f64 = 0.915_965_594_177_219;

    fn mobius_disc(a: C64, phase: f64) -> impl Fn(C64) -> (C64, C64) + Sync + Copy {
        // F(z) = e^{iφ}(z - a)/(1 - ā z): F' and F''.
        move |z: C64| {
            let den = C64::new(1.0, 0.0) - a.conj() * z;
            let k = cis(phase) * (1.0 - a.norm_sqr());
            (k / (den * den), 2.0 * k * a.conj() / (den * den * den))
        }
    }

    #[test]
    fn disc_scale() {
        for r in [0.5, 1.0, 3.0] {
            let v = liouville_action(
                &Region::disc(C64::new(0.0, 0.0), 1.0),
                &Constant(2.0 * f64::ln(r)),
                false,
                1e-10,
            )
            .unwrap();
            let want = reference_anomaly(ReferenceCase::DiscScale { radius: r }).unwrap();
            assert!((v.total() - want).abs() < 1e-9);
        }
        assert_eq!(
            reference_anomaly(ReferenceCase::DiscScale { radius: 1.0 }).unwrap(),
            0.0
        );
    }

    #[test]
    fn cylinder_annulus() {
        let (rad, len) = (1.3f64, 0.8f64);
        let (rm, rp) = ((-len / (2.0 * rad)).exp(), (len / (2.0 * rad)).exp());
        let f = Holomorphic(move |w: C64| (rad / w, -rad / (w * w)));
        let v = liouville_action(&Region::annulus(rm, rp), &f, false, 1e-10).unwrap();
        assert!((v.bulk - 2.0 * len / rad).abs() < 1e-8);
        assert!((v.boundary + 4.0 * len / rad).abs() < 1e-8);
        let want = reference_anomaly(ReferenceCase::CylinderAnnulus {
            radius: rad,
            length: len,
        })
        .unwrap();
        assert!((v.total() - want).abs() < 1e-8);
    }

    #[test]
    fn torus_hole_boundary() {
        let r = 0.37f64;
        // Unit hole traversed clockwise, Ω constant from the rescaling.
        let region = Region {
            bulk: vec![],
            boundary: vec![circle_arc(C64::new(0.0, 0.0), 1.0, 2.0 * PI, 0.0)],
            corners: vec![],
        };
        let v = liouville_action(&region, &Constant(2.0 * r.ln()), false, 1e-10).unwrap();
        let want = reference_anomaly(ReferenceCase::TorusHole { radius: r }).unwrap();
        assert!((v.total() - want).abs() < 1e-9);
    }

    #[test]
    fn half_disc_mobius() {
        let f = Holomorphic(|z: C64| {
            let d = z + C64::new(0.0, 1.0);
            (
                C64::new(0.0, -2.0) / (d * d),
                C64::new(0.0, 4.0) / (d * d * d),
            )
        });
        let v = liouville_action(&Region::upper_half_disc(), &f, false, 1e-10).unwrap();
        let bulk = 8.0 * CATALAN / PI - 2.0 * 2f64.ln();
        assert!((v.bulk - bulk).abs() < 1e-8, "{}", v.bulk);
        assert!((v.boundary + bulk).abs() < 1e-8);
        assert!(v.total().abs() < 1e-8);
    }

    #[test]
    fn ngon_corners() {
        for n in [3, 5, 8] {
            let om = 0.7;
            let region = Region::regular_ngon(n);
            assert!(region.closure_gap() < 1e-14);
            let v = liouville_action(&region, &Constant(om), true, 1e-10).unwrap();
            let want =
                reference_anomaly(ReferenceCase::RegularNgonCorner { n, omega: om }).unwrap();
            assert!((v.total() - want).abs() < 1e-10);
            assert!(v.boundary.abs() < 1e-12);
        }
        let big = reference_anomaly(ReferenceCase::RegularNgonCorner {
            n: 100_000,
            omega: 1.0,
        })
        .unwrap();
        assert!((big - 2.0).abs() < 1e-4);
    }

    #[test]
    fn corner_term_off_by_default() {
        let v = liouville_action(&Region::regular_ngon(4), &Constant(1.0), false, 1e-10).unwrap();
        assert!(v.total().abs() < 1e-12);
    }

    #[test]
    fn inversion_antisymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let a = C64::from_polar(rng.gen_range(0.0..0.6), rng.gen_range(0.0..2.0 * PI));
            let ph = rng.gen_range(0.0..2.0 * PI);
            // Inverse of e^{iφ}(z-a)/(1-āz) is w ↦ (w e^{-iφ} + a)/(1 + ā w e^{-iφ}).
            let b = -a * cis(ph);
            let f = Holomorphic(mobius_disc(a, ph));
            let g = Holomorphic(mobius_disc(b, -ph));
            let d = Region::disc(C64::new(0.0, 0.0), 1.0);
            let lf = liouville_action(&d, &f, false, 1e-10).unwrap().total();
            let lg = liouville_action(&d, &g, false, 1e-10).unwrap().total();
            assert!((lf + lg).abs() < 1e-8, "{lf} {lg}");
        }
    }

    #[test]
    fn cocycle_with_mobius_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = Region::disc(C64::new(0.0, 0.0), 1.0);
        for _ in 0..3 {
            let a = C64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..2.0 * PI));
            let b = C64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..2.0 * PI));
            let f1 = Holomorphic(mobius_disc(a, 0.3));
            let f2 = FnField {
                omega: move |z: C64| (z * b.conj()).re + 0.3 * z.norm_sqr(),
                grad: move |z: C64| b + 0.6 * z,
            };
            let res = cocycle_check(&d, &f1, &f2, 1e-10).unwrap();
            assert!(res < 1e-8, "{res}");
        }
        assert!(
            cocycle_check(
                &d,
                &Holomorphic(mobius_disc(C64::new(0.2, 0.1), 0.0)),
                &Constant(0.0),
                1e-10
            )
            .unwrap()
                < 1e-12
        );
    }

    #[test]
    fn curved_metric_with_nonholomorphic_background() {
        let d = Region::disc(C64::new(0.0, 0.0), 1.0);
        let f1 = FnField {
            omega: |z: C64| 0.2 * z.norm_sqr(),
            grad: |z: C64| 0.4 * z,
        };
        let f2 = FnField {
            omega: |z: C64| z.re * z.im,
            grad: |z: C64| C64::new(z.im, z.re),
        };
        assert!(cocycle_check(&d, &f1, &f2, 1e-10).unwrap() < 1e-7);
    }

    #[test]
    fn pullback_identity() {
        // L(Ω∘F + Ω_F) = L(Ω) + L(Ω_F) for a disc automorphism F.
        let a = C64::new(0.3, -0.2);
        let fmap = move |z: C64| {
            let den = C64::new(1.0, 0.0) - a.conj() * z;
            ((z - a) / den, (1.0 - a.norm_sqr()) / (den * den))
        };
        let omega = FnField {
            omega: |w: C64| (w * w).re,
            grad: |w: C64| 2.0 * w.conj(),
        };
        let om_f = Holomorphic(mobius_disc(a, 0.0));
        let pb = Pullback(&omega, fmap);
        let d = Region::disc(C64::new(0.0, 0.0), 1.0);
        let lhs = liouville_action(&d, &Sum(&pb, &om_f), false, 1e-10)
            .unwrap()
            .total();
        let rhs = liouville_action(&d, &omega, false, 1e-10).unwrap().total()
            + liouville_action(&d, &om_f, false, 1e-10).unwrap().total();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} {rhs}");
    }

    #[test]
    fn patch_additivity() {
        let f = Holomorphic(mobius_disc(C64::new(0.1, 0.4), 0.0));
        let whole = liouville_action(&Region::disc(C64::new(0.0, 0.0), 1.0), &f, false, 1e-10)
            .unwrap()
            .total();
        let o = C64::new(0.0, 0.0);
        let inner = Region {
            bulk: vec![PolarPatch {
                center: o,
                theta: (0.0, 2.0 * PI),
                r_in: constant(0.0),
                r_out: constant(0.5),
                breaks: vec![],
            }],
            boundary: vec![circle_arc(o, 0.5, 0.0, 2.0 * PI)],
            corners: vec![],
        };
        let parts = liouville_action(&Region::annulus(0.5, 1.0), &f, false, 1e-10)
            .unwrap()
            .total()
            + liouville_action(&inner, &f, false, 1e-10).unwrap().total();
        assert!((whole - parts).abs() < 1e-8);
    }

    #[test]
    fn wedge_turning_is_gauss_bonnet() {
        // Straight rays, two unit arcs and the cut, with turning angles
        // 2π/3 at 0 and π/2 at the four other corners.
        for t in [0.3, 1.0] {
            let g = geometry_of_t(t, 30).unwrap();
            let a = triangle_anomaly(&g, CutScheme::Analytic, 1e-9).unwrap();
            assert!((a.turning + PI / 3.0).abs() < 1e-8, "{}", a.turning);
            let b = triangle_anomaly(&g, CutScheme::Traced, 1e-9).unwrap();
            assert!((b.turning + PI / 3.0).abs() < 1e-4, "{}", b.turning);
            let c = 0.5;
            let shifted = a.a_at(c, 2.0 * g.d_t) - a.a(c);
            assert!((shifted + c / 12.0 * 2f64.ln()).abs() < 1e-8);
        }
    }

    #[test]
    fn triangle_anomaly_is_finite_and_linear_in_c() {
        let g = geometry_of_t(0.8, 30).unwrap();
        let ta = triangle_anomaly(&g, CutScheme::Analytic, 1e-9).unwrap();
        let a1 = ta.a(1.0);
        assert!(a1.is_finite());
        assert!((ta.a(0.5) - 0.5 * a1).abs() < 1e-15);
        assert_eq!(ta.a(0.0), 0.0);
    }

    #[test]
    fn half_disc_action_two_ways() {
        let g = geometry_of_t(1.0, 30).unwrap();
        let ta = triangle_anomaly(&g, CutScheme::Analytic, 1e-9).unwrap();
        let direct = half_disc_action_direct(&g, 1e-8).unwrap();
        assert!(
            (direct.total() - ta.l_half_disc.total()).abs() < 1e-6,
            "{} {}",
            direct.total(),
            ta.l_half_disc.total()
        );
    }

    #[test]
    fn traced_cut_agrees_with_analytic() {
        let g = geometry_of_t(0.8, 30).unwrap();
        let an = triangle_anomaly(&g, CutScheme::Analytic, 1e-9)
            .unwrap()
            .a(1.0);
        let mut g2 = g.clone();
        g2.cut_curve = g.trace_cut_curve(1024).unwrap();
        let t512 = triangle_anomaly(&g, CutScheme::Traced, 1e-9)
            .unwrap()
            .a(1.0);
        let t1024 = triangle_anomaly(&g2, CutScheme::Traced, 1e-9)
            .unwrap()
            .a(1.0);
        assert!((t512 - an).abs() < 1e-5, "{t512} {an}");
        assert!((t1024 - an).abs() < (t512 - an).abs().max(1e-9));
    }
}
