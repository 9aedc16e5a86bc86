//! Cloaking boundary states, the stability condition, torus one-point
//! functions of vacuum descendants and the two channels of the one-hole torus.

use crate::anomaly::{
    circle_arc, liouville_action, reference_anomaly, triangle_anomaly, Constant, CutScheme,
    ReferenceCase, Region, TriangleAnomaly,
};
use crate::blocks::{admissible, cached_gamma_block, cached_module, n_constant};
use crate::error::{CloakError, Result};
use crate::fsymbols::FSymbols;
use crate::minimal::{KacLabel, MinimalModel};
use crate::special::{bernoulli, C64};
use crate::uniformization::{geometry_of_t, t_of_ratio, TriangleGeometry};
use crate::virasoro::{rocha_caridi_dims, TruncatedModule};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

fn closed(model: &MinimalModel, set: &[KacLabel]) -> Result<()> {
    match model.fusion_closure_violation(set) {
        Some((a, b, c)) => Err(CloakError::NotFusionClosed(
            a.to_string(),
            b.to_string(),
            c.to_string(),
        )),
        None => Ok(()),
    }
}

/// Eigenvalue Σ_{j∈J} dim(j) S_{xj}/S_{x1} of the defect projector on the Ishibashi state of x.
pub fn projection_eigenvalue(model: &MinimalModel, set: &[KacLabel], x: KacLabel) -> f64 {
    let one = model.identity();
    set.iter()
        .map(|&j| model.quantum_dim(j) * model.s_matrix(x, j) / model.s_matrix(x, one))
        .sum()
}

/// Labels x whose normalised S-matrix row agrees with the vacuum row on J.
pub fn tilde_set(model: &MinimalModel, set: &[KacLabel]) -> Result<Vec<KacLabel>> {
    closed(model, set)?;
    let one = model.identity();
    let mut out: Vec<KacLabel> = model
        .labels()
        .iter()
        .copied()
        .filter(|&x| {
            set.iter().all(|&j| {
                let lhs = model.s_matrix(x, j) / model.s_matrix(x, one);
                (lhs - model.quantum_dim(j)).abs() < 1e-9 * (1.0 + model.quantum_dim(j))
            })
        })
        .collect();
    out.sort();
    Ok(out)
}

/// max_x |Σ_j dim(j) S_{xj}/S_{x1} − Dim(J)[x ∈ J̃]|.
pub fn tilde_lemma_residual(model: &MinimalModel, set: &[KacLabel]) -> Result<f64> {
    let tilde = tilde_set(model, set)?;
    let dim = model.total_dim(set);
    Ok(model
        .labels()
        .iter()
        .map(|&x| {
            let want = if tilde.contains(&x) { dim } else { 0.0 };
            (projection_eigenvalue(model, set, x) - want).abs()
        })
        .fold(0.0, f64::max))
}

/// Boundary state δ₀ Dim(J) Σ_{x∈J̃} √S_{x1} |x⟩⟩.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CloakingBoundaryState {
    pub set: Vec<KacLabel>,
    pub delta0: f64,
    pub tilde: Vec<KacLabel>,
    /// Ishibashi coefficients on J̃.
    pub coefficients: Vec<(KacLabel, f64)>,
}

impl CloakingBoundaryState {
    pub fn new(model: &MinimalModel, set: &[KacLabel], delta0: f64) -> Result<Self> {
        let tilde = tilde_set(model, set)?;
        let dim = model.total_dim(set);
        let one = model.identity();
        let coefficients = tilde
            .iter()
            .map(|&x| (x, delta0 * dim * model.s_matrix(x, one).sqrt()))
            .collect();
        Ok(CloakingBoundaryState {
            set: set.to_vec(),
            delta0,
            tilde,
            coefficients,
        })
    }

    /// The same state expanded as δ₀ Σ_j dim(j) ‖j⟩⟩ over all Ishibashi states.
    pub fn from_cardy_sum(
        model: &MinimalModel,
        set: &[KacLabel],
        delta0: f64,
    ) -> Vec<(KacLabel, f64)> {
        let one = model.identity();
        model
            .labels()
            .iter()
            .map(|&x| {
                let c: f64 = set
                    .iter()
                    .map(|&j| {
                        model.quantum_dim(j) * model.s_matrix(j, x) / model.s_matrix(x, one).sqrt()
                    })
                    .sum();
                (x, delta0 * c)
            })
            .collect()
    }

    /// Apply δ₀ Σ_j dim(j) D_j to a state given by Ishibashi coefficients.
    pub fn project(&self, model: &MinimalModel, state: &[(KacLabel, f64)]) -> Vec<(KacLabel, f64)> {
        state
            .iter()
            .map(|&(x, c)| {
                (
                    x,
                    self.delta0 * projection_eigenvalue(model, &self.set, x) * c,
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub satisfied: bool,
    /// Whether the vacuum module has a state at level 1.
    pub weight_one_descendant: bool,
    /// Labels in J̃ other than the vacuum with h ≤ 1.
    pub violators: Vec<(KacLabel, f64)>,
}

/// Only irrelevant bulk fields beyond the identity in the cloaking boundary state.
pub fn stability_check(model: &MinimalModel, set: &[KacLabel]) -> Result<StabilityVerdict> {
    let tilde = tilde_set(model, set)?;
    let one = model.identity();
    let weight_one_descendant = rocha_caridi_dims(model.p, model.q, one, 1)[1] != 0;
    let violators: Vec<(KacLabel, f64)> = tilde
        .iter()
        .filter(|&&x| x != one)
        .map(|&x| (x, model.weight(x)))
        .filter(|p| p.1 <= 1.0)
        .collect();
    Ok(StabilityVerdict {
        satisfied: !weight_one_descendant && violators.is_empty(),
        weight_one_descendant,
        violators,
    })
}

/// Mason-Tuite Eisenstein series E_k(q) = −B_k/k! + (2/(k−1)!) Σ σ_{k−1}(n) qⁿ, k even.
pub fn eisenstein(k: usize, order: usize) -> Vec<f64> {
    let b = bernoulli(k);
    let fact = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();
    let mut e = vec![0.0; order + 1];
    e[0] = -b[k] / fact(k);
    for (n, en) in e.iter_mut().enumerate().skip(1) {
        let sigma: f64 = (1..=n)
            .filter(|d| n % d == 0)
            .map(|d| (d as f64).powi(k as i32 - 1))
            .sum();
        *en = 2.0 / fact(k - 1) * sigma;
    }
    e
}

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(n - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn axpy(dst: &mut [f64], s: f64, src: &[f64]) {
    for (d, x) in dst.iter_mut().zip(src) {
        *d += s * x;
    }
}

/// Chiral torus traces Z_i(v) = tr_{R_i} o(v) q^{L₀−c/24} of all vacuum descendants up to
/// a weight cutoff, stored as q-series q^{h_i−c/24} Σ a_n qⁿ per basis vector and module.
#[derive(Clone, Debug)]
pub struct ZhuTable {
    pub p: u32,
    pub q: u32,
    pub weight_cutoff: usize,
    pub order: usize,
    pub modules: Vec<KacLabel>,
    pub exponents: Vec<f64>,
    pub vacuum: Arc<TruncatedModule>,
    series: Vec<Vec<Vec<f64>>>,
}

impl ZhuTable {
    pub fn build(model: &MinimalModel, weight_cutoff: usize, order: usize) -> Result<Self> {
        let vac = cached_module(model, model.identity(), weight_cutoff)?;
        let modules = model.labels().to_vec();
        let c = model.central_charge();
        let exponents: Vec<f64> = modules
            .iter()
            .map(|&l| model.weight(l) - c / 24.0)
            .collect();
        let chars: Vec<Vec<f64>> = modules
            .iter()
            .map(|&l| {
                rocha_caridi_dims(model.p, model.q, l, order)
                    .into_iter()
                    .map(|d| d as f64)
                    .collect()
            })
            .collect();
        let kmax = weight_cutoff / 2 + 1;
        let eis: Vec<Vec<f64>> = (0..=kmax)
            .map(|k| {
                if k == 0 {
                    vec![]
                } else {
                    eisenstein(2 * k, order)
                }
            })
            .collect();
        let nmod = modules.len();
        let dim = vac.dim();
        let mut series: Vec<Vec<Vec<f64>>> = Vec::with_capacity(dim);
        let zero = vec![vec![0.0; order + 1]; nmod];
        let eval = |series: &Vec<Vec<Vec<f64>>>, v: &[f64]| -> Vec<Vec<f64>> {
            let mut out = zero.clone();
            for (x, &cx) in v.iter().enumerate() {
                if cx != 0.0 {
                    for i in 0..nmod {
                        axpy(&mut out[i], cx, &series[x][i]);
                    }
                }
            }
            out
        };
        let apply = |m: i32, v: &[f64]| -> Vec<f64> {
            let mat = vac.mode(m);
            let mut out = vec![0.0; dim];
            for (cidx, &x) in v.iter().enumerate() {
                if x != 0.0 {
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += mat[(r, cidx)] * x;
                    }
                }
            }
            out
        };
        for x in 0..dim {
            let lvl = vac.level_of(x);
            if lvl == 0 {
                series.push(chars.clone());
                continue;
            }
            let l = &vac.levels[lvl];
            let word = &l.words[l.basis_idx[x - vac.offset(lvl)]];
            let n = word[0] as usize;
            let rest: Vec<f64> = vac.word_state(&word[1..])?.iter().map(|z| z.re).collect();
            let rest_level = lvl - n;
            let mut z = zero.clone();
            // Z(L[−1]b) = 0.
            if n == 2 {
                let zb = eval(&series, &rest);
                for i in 0..nmod {
                    for (k, a) in zb[i].iter().enumerate() {
                        z[i][k] += (exponents[i] + k as f64) * a;
                    }
                }
                for (k, e) in eis.iter().enumerate().skip(1) {
                    if 2 * k - 2 > rest_level {
                        break;
                    }
                    let zl = eval(&series, &apply(2 * k as i32 - 2, &rest));
                    for i in 0..nmod {
                        let prod = series_mul(e, &zl[i]);
                        axpy(&mut z[i], 1.0, &prod);
                    }
                }
            } else if n >= 3 {
                let mut cvec = rest;
                for _ in 0..n - 2 {
                    cvec = apply(-1, &cvec);
                }
                let c_level = rest_level + n - 2;
                let fact: f64 = (1..=n - 2).map(|x| x as f64).product();
                let pre = if n.is_multiple_of(2) { 1.0 } else { -1.0 } / fact;
                for (k, e) in eis.iter().enumerate().skip(1) {
                    if 2 * k - 2 > c_level {
                        break;
                    }
                    let zl = eval(&series, &apply(2 * k as i32 - 2, &cvec));
                    for i in 0..nmod {
                        let prod = series_mul(e, &zl[i]);
                        axpy(&mut z[i], pre, &prod);
                    }
                }
            }
            series.push(z);
        }
        Ok(ZhuTable {
            p: model.p,
            q: model.q,
            weight_cutoff,
            order,
            modules,
            exponents,
            vacuum: vac,
            series,
        })
    }

    /// Z_i(v) at τ for a state in vacuum-basis coordinates.
    pub fn chiral(&self, state: &[f64], module: usize, tau: C64) -> C64 {
        let qn = (C64::new(0.0, 2.0 * PI) * tau).exp();
        let mut acc = C64::new(0.0, 0.0);
        for (x, &cx) in state.iter().enumerate() {
            if cx == 0.0 {
                continue;
            }
            let s = &self.series[x][module];
            let mut v = C64::new(0.0, 0.0);
            for a in s.iter().rev() {
                v = v * qn + a;
            }
            acc += cx * v;
        }
        acc * (C64::new(0.0, 2.0 * PI) * tau * self.exponents[module]).exp()
    }

    /// Chiral traces of one basis vector for every module.
    pub fn basis_values(&self, x: usize, tau: C64) -> Vec<C64> {
        let mut e = vec![0.0; self.vacuum.dim()];
        e[x] = 1.0;
        (0..self.modules.len())
            .map(|i| self.chiral(&e, i, tau))
            .collect()
    }

    /// Per-level sums Σ_χ A(T², (χ⊗χ̄)(0)) over an ON basis, for the torus C/(Z + τZ)
    /// with the flat coordinate.
    pub fn level_sums(&self, tau: C64) -> Vec<f64> {
        let vac = &self.vacuum;
        let vals: Vec<Vec<C64>> = (0..vac.dim()).map(|x| self.basis_values(x, tau)).collect();
        (0..=vac.max_level)
            .map(|n| {
                let l = &vac.levels[n];
                if l.dim() == 0 {
                    return 0.0;
                }
                let ginv = l
                    .gram
                    .clone()
                    .try_inverse()
                    .unwrap_or_else(|| DMatrix::zeros(l.dim(), l.dim()));
                let o = vac.offset(n);
                let mut s = 0.0;
                for i in 0..self.modules.len() {
                    for a in 0..l.dim() {
                        for b in 0..l.dim() {
                            s += (vals[o + a][i] * ginv[(a, b)] * vals[o + b][i].conj()).re;
                        }
                    }
                }
                s * (2.0 * PI).powi(2 * n as i32)
            })
            .collect()
    }
}

fn cached_zhu(model: &MinimalModel, weight_cutoff: usize) -> Result<Arc<ZhuTable>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32, usize), Arc<OnceLock<Arc<ZhuTable>>>>>> =
        OnceLock::new();
    let cell = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry((model.p, model.q, weight_cutoff))
            .or_default()
            .clone()
    };
    if let Some(t) = cell.get() {
        return Ok(t.clone());
    }
    let t = Arc::new(ZhuTable::build(model, weight_cutoff, DEFAULT_Q_ORDER)?);
    Ok(cell.get_or_init(|| t).clone())
}

pub const DEFAULT_Q_ORDER: usize = 40;
pub const DEFAULT_WEIGHT_CUTOFF: usize = 14;
pub const DEFAULT_OPEN_LEVEL: usize = 7;

/// A(T², (χ⊗χ̄)(0)) for χ the vacuum descendant of a mode word, in the flat
/// coordinate of C/(Z + τZ). The empty word gives Σ_i |χ_i(τ)|².
pub fn torus_one_point(
    model: &MinimalModel,
    word: &[u32],
    tau: C64,
    level_cutoff: usize,
) -> Result<f64> {
    let level: usize = word.iter().map(|&m| m as usize).sum();
    if level > level_cutoff {
        return Err(CloakError::LevelOverflow {
            level,
            max: level_cutoff,
        });
    }
    if tau.im <= 0.0 {
        return Err(CloakError::Config {
            field: "tau".into(),
            msg: "Im τ must be positive".into(),
        });
    }
    let z = cached_zhu(model, level_cutoff)?;
    let state: Vec<f64> = z.vacuum.word_state(word)?.iter().map(|c| c.re).collect();
    let scale = (2.0 * PI).powi(2 * level as i32);
    Ok((0..z.modules.len())
        .map(|i| z.chiral(&state, i, tau).norm_sqr())
        .sum::<f64>()
        * scale)
}

/// Torus moduli: lattice Z + τZ with edge length d = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TorusModulus {
    /// τ = e^{iπ/3}.
    Hexagonal,
    /// Periods 1 and e^{iπ/6}.
    AltPeriods,
}

impl TorusModulus {
    pub fn tau(self) -> C64 {
        match self {
            TorusModulus::Hexagonal => C64::from_polar(1.0, PI / 3.0),
            TorusModulus::AltPeriods => C64::from_polar(1.0, PI / 6.0),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClosedPoint {
    pub r: f64,
    /// Σ R^{2h} A(T², χ⊗χ̄) without the R^{−c/6} factor.
    pub raw: f64,
    pub with_anomaly: f64,
    pub weight_cutoff: usize,
}

/// Closed-channel one-hole amplitude with J = I and δ₀ = S₁₁^{3/2} (edge length 1).
pub fn one_hole_closed(
    model: &MinimalModel,
    tau: C64,
    r: f64,
    weight_cutoff: usize,
) -> Result<ClosedPoint> {
    let z = cached_zhu(model, weight_cutoff)?;
    let sums = z.level_sums(tau);
    let raw: f64 = sums
        .iter()
        .enumerate()
        .map(|(n, s)| r.powi(2 * n as i32) * s)
        .sum();
    let c = model.central_charge();
    Ok(ClosedPoint {
        r,
        raw,
        with_anomaly: raw * r.powf(-c / 6.0),
        weight_cutoff,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OpenPoint {
    pub r_over_d: f64,
    pub t: f64,
    /// e^{−2A} times the amplitude.
    pub raw: f64,
    pub with_anomaly: f64,
    /// A at the requested edge length.
    pub a: f64,
    pub level_cutoff: usize,
}

/// Σ_a δ₀ dim(a) Σ_{ijk,αβγ} (T^{aaa})², without the anomaly factor.
pub fn open_sum(fs: &FSymbols, set: &[KacLabel], delta0: f64, t: f64, level: usize) -> Result<f64> {
    let m = fs.model();
    closed(m, set)?;
    let geom = TriangleGeometry::series_only(t, crate::uniformization::DEFAULT_SERIES_ORDER)?;
    let mut total = 0.0;
    for &a in set {
        let da = m.quantum_dim(a);
        for &i in set {
            for &j in set {
                for &k in set {
                    if !admissible(m, a, a, a, i, j, k) {
                        continue;
                    }
                    let n = n_constant(fs, a, a, a, i, j, k) / da.powf(1.5);
                    let block = cached_gamma_block(m, [i, j, k], level, &geom)?;
                    let mut s = C64::new(0.0, 0.0);
                    for x in 0..block.dims[0] {
                        for y in 0..block.dims[1] {
                            for zz in 0..block.dims[2] {
                                let v = block.get(x, y, zz);
                                s += v * v;
                            }
                        }
                    }
                    total += delta0 * da * n * n * s.re;
                }
            }
        }
    }
    Ok(total)
}

/// Open-channel one-hole amplitude with J = I, δ₀ = S₁₁^{3/2}, edge length d.
/// The anomaly is computed when not supplied.
pub fn one_hole_open(
    fs: &FSymbols,
    d: f64,
    r: f64,
    level: usize,
    anomaly: Option<&TriangleAnomaly>,
) -> Result<OpenPoint> {
    let m = fs.model();
    let ratio = r / d;
    let t = t_of_ratio(ratio)?;
    let raw = open_sum(fs, m.labels(), m.s11().powf(1.5), t, level)?;
    let owned;
    let an = match anomaly {
        Some(a) => a,
        None => {
            owned = triangle_anomaly(
                &geometry_of_t(t, crate::uniformization::DEFAULT_SERIES_ORDER)?,
                CutScheme::Analytic,
                ANOMALY_TOL,
            )?;
            &owned
        }
    };
    let a = an.a_at(m.central_charge(), d);
    Ok(OpenPoint {
        r_over_d: ratio,
        t,
        raw,
        with_anomaly: raw * (2.0 * a).exp(),
        a,
        level_cutoff: level,
    })
}

pub const ANOMALY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChannelRow {
    pub r_over_d: f64,
    pub open_raw: f64,
    pub open_anomaly: f64,
    pub closed_raw: f64,
    pub closed_anomaly: f64,
    /// (open − closed)/closed with anomaly factors.
    pub diff: f64,
    /// Same without anomaly factors.
    pub diff_raw: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelComparison {
    pub p: u32,
    pub q: u32,
    pub tau: [f64; 2],
    pub open_level: usize,
    pub closed_weight: usize,
    /// Whether the anomaly factors were applied.
    pub anomaly: bool,
    pub rows: Vec<ChannelRow>,
    /// Grid points that failed, with the error text.
    pub missing: Vec<(f64, String)>,
}

impl ChannelComparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "R_over_d,open_raw,open_anomaly,closed_raw,closed_anomaly,diff,diff_raw\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e}\n",
                r.r_over_d,
                r.open_raw,
                r.open_anomaly,
                r.closed_raw,
                r.closed_anomaly,
                r.diff,
                r.diff_raw
            ));
        }
        s
    }

    pub fn max_rel_diff(&self, lo: f64, hi: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.r_over_d >= lo - 1e-12 && r.r_over_d <= hi + 1e-12)
            .map(|r| r.diff.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_rel_diff_raw(&self, lo: f64, hi: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.r_over_d >= lo - 1e-12 && r.r_over_d <= hi + 1e-12)
            .map(|r| r.diff_raw.abs())
            .fold(0.0, f64::max)
    }
}

/// Both channels on a grid of R/d (edge length 1).
pub fn channel_compare(
    fs: &FSymbols,
    tau: C64,
    grid: &[f64],
    open_level: usize,
    closed_weight: usize,
) -> Result<ChannelComparison> {
    let default = |t: f64| {
        triangle_anomaly(
            &geometry_of_t(t, crate::uniformization::DEFAULT_SERIES_ORDER)?,
            CutScheme::Analytic,
            ANOMALY_TOL,
        )
    };
    channel_compare_with(fs, tau, grid, open_level, closed_weight, Some(&default))
}

/// `channel_compare` with the triangle anomaly supplied per t (e.g. from a disk
/// cache). With `None` the anomaly columns repeat the raw values.
pub fn channel_compare_with(
    fs: &FSymbols,
    tau: C64,
    grid: &[f64],
    open_level: usize,
    closed_weight: usize,
    anomaly: Option<&(dyn Fn(f64) -> Result<TriangleAnomaly> + Sync)>,
) -> Result<ChannelComparison> {
    let m = fs.model();
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CloakError::Config {
            field: "grid".into(),
            msg: "R/d grid must be strictly increasing".into(),
        });
    }
    cached_zhu(m, closed_weight)?;
    let results: Vec<std::result::Result<ChannelRow, (f64, String)>> = grid
        .par_iter()
        .map(|&x| {
            let run = || -> Result<ChannelRow> {
                let c = one_hole_closed(m, tau, x, closed_weight)?;
                let (open_raw, open_anomaly, closed_anomaly) = match anomaly {
                    Some(f) => {
                        let o = one_hole_open(fs, 1.0, x, open_level, Some(&f(t_of_ratio(x)?)?))?;
                        (o.raw, o.with_anomaly, c.with_anomaly)
                    }
                    None => {
                        let raw = open_sum(
                            fs,
                            m.labels(),
                            m.s11().powf(1.5),
                            t_of_ratio(x)?,
                            open_level,
                        )?;
                        (raw, raw, c.raw)
                    }
                };
                Ok(ChannelRow {
                    r_over_d: x,
                    open_raw,
                    open_anomaly,
                    closed_raw: c.raw,
                    closed_anomaly,
                    diff: (open_anomaly - closed_anomaly) / closed_anomaly,
                    diff_raw: (open_raw - c.raw) / c.raw,
                })
            };
            run().map_err(|e| (x, e.to_string()))
        })
        .collect();
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => missing.push(e),
        }
    }
    Ok(ChannelComparison {
        p: m.p,
        q: m.q,
        tau: [tau.re, tau.im],
        open_level,
        closed_weight,
        anomaly: anomaly.is_some(),
        rows,
        missing,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixtureCase {
    TorusFromSphere,
    CylinderClosed,
    CylinderOpen,
    BoundaryStateRadius,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixtureReport {
    pub case: FixtureCase,
    pub value: f64,
    pub reference: f64,
    pub residual: f64,
    pub passed: bool,
}

fn character_series(model: &MinimalModel, l: KacLabel, order: usize, nome: f64) -> f64 {
    let e = model.weight(l) - model.central_charge() / 24.0;
    let dims = rocha_caridi_dims(model.p, model.q, l, order);
    nome.powf(e)
        * dims
            .iter()
            .enumerate()
            .map(|(n, &d)| d as f64 * nome.powi(n as i32))
            .sum::<f64>()
}

/// Checks of the q-power structures of torus and cylinder amplitudes at L/R and truncation.
pub fn q_power_fixture(
    model: &MinimalModel,
    case: FixtureCase,
    l_over_r: f64,
    truncation: usize,
) -> Result<FixtureReport> {
    let c = model.central_charge();
    let one = model.identity();
    let report = |value: f64, reference: f64, tol: f64| {
        let residual = (value - reference).abs() / reference.abs().max(1e-300);
        FixtureReport {
            case,
            value,
            reference,
            residual,
            passed: residual < tol,
        }
    };
    match case {
        FixtureCase::TorusFromSphere => {
            // Σ over bulk states e^{−(L/R)(h + h̄ − c/12)} against Σ_i |χ_i(q)|², q = e^{−L/R}.
            let q = (-l_over_r).exp();
            let mut direct = 0.0;
            for &x in model.labels() {
                let dims = rocha_caridi_dims(model.p, model.q, x, truncation);
                let h = model.weight(x);
                for (n, &dn) in dims.iter().enumerate() {
                    for (nb, &dnb) in dims.iter().enumerate() {
                        direct += (dn * dnb) as f64
                            * (-l_over_r * (2.0 * h + (n + nb) as f64 - c / 12.0)).exp();
                    }
                }
            }
            let chars: f64 = model
                .labels()
                .iter()
                .map(|&x| character_series(model, x, 4 * truncation, q).powi(2))
                .sum();
            Ok(report(direct, chars, 1e-6))
        }
        FixtureCase::CylinderClosed | FixtureCase::CylinderOpen => {
            // Boundaries a = b = the label with the largest weight and the vacuum pair.
            let qc = (-2.0 * l_over_r).exp(); // e^{2πiτ}, τ = iL/(πR)
            let qo = (-2.0 * PI * PI / l_over_r).exp(); // e^{−2πi/τ}
            let mut worst = 0.0f64;
            let mut last = (0.0, 0.0);
            for &a in model.labels() {
                for &b in model.labels() {
                    let closed_v: f64 = model
                        .labels()
                        .iter()
                        .map(|&x| {
                            model.s_matrix(a, x) * model.s_matrix(b, x) / model.s_matrix(one, x)
                                * character_series(model, x, truncation, qc)
                        })
                        .sum();
                    let open_v: f64 = model
                        .labels()
                        .iter()
                        .map(|&j| {
                            model.fusion(a, b, j) as f64
                                * character_series(model, j, truncation, qo)
                        })
                        .sum();
                    let res = (closed_v - open_v).abs() / open_v.abs();
                    if res >= worst {
                        worst = res;
                        last = if case == FixtureCase::CylinderClosed {
                            (closed_v, open_v)
                        } else {
                            (open_v, closed_v)
                        };
                    }
                }
            }
            Ok(report(last.0, last.1, 1e-6))
        }
        FixtureCase::BoundaryStateRadius => {
            // The R^{−c/6} factor of the boundary state against the anomaly of the rescaled hole.
            let r = (-l_over_r / 2.0).exp();
            let hole = Region {
                bulk: vec![],
                boundary: vec![circle_arc(C64::new(0.0, 0.0), 1.0, 2.0 * PI, 0.0)],
                corners: vec![],
            };
            let lval = liouville_action(&hole, &Constant(2.0 * r.ln()), false, 1e-12)?.total();
            let closed_form = reference_anomaly(ReferenceCase::TorusHole { radius: r })?;
            let value = (c / 24.0 * lval).exp();
            let reference = r.powf(-c / 6.0);
            let mut rep = report(value, reference, 1e-10);
            rep.passed &= (lval - closed_form).abs() < 1e-10;
            Ok(rep)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ising() -> MinimalModel {
        MinimalModel::ising()
    }

    #[test]
    fn tilde_sets_match_closed_forms() {
        for p in 3..=7 {
            let m = MinimalModel::new(p, p + 1).unwrap();
            let one = m.identity();
            assert_eq!(tilde_set(&m, m.labels()).unwrap(), vec![one]);
            let mut want: Vec<KacLabel> = (1..p)
                .step_by(2)
                .map(|x| m.canonical(KacLabel::new(x, 1)))
                .collect();
            want.sort();
            assert_eq!(tilde_set(&m, &m.first_row()).unwrap(), want);
            let mut wz: Vec<KacLabel> = m
                .labels()
                .iter()
                .copied()
                .filter(|l| ((p + 1) * (l.r - 1) + p * (l.s - 1)) % 2 == 0)
                .collect();
            wz.sort();
            assert_eq!(tilde_set(&m, &m.z2_set()).unwrap(), wz);
            for set in [m.labels().to_vec(), m.first_row(), m.z2_set()] {
                assert!(tilde_lemma_residual(&m, &set).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn stability_verdicts() {
        for p in 3..=8 {
            let m = MinimalModel::new(p, p + 1).unwrap();
            assert!(stability_check(&m, m.labels()).unwrap().satisfied);
            assert!(stability_check(&m, &m.first_row()).unwrap().satisfied);
            let z = stability_check(&m, &m.z2_set()).unwrap();
            assert!(!z.satisfied);
            let f13 = m.canonical(KacLabel::new(1, 3));
            assert!(z.violators.iter().any(|v| v.0 == f13));
        }
        let m = ising();
        assert!(stability_check(&m, &[m.identity(), m.label(1, 2).unwrap()]).is_err());
    }

    #[test]
    fn boundary_state_coefficients_and_idempotency() {
        let m = MinimalModel::new(5, 6).unwrap();
        for set in [m.labels().to_vec(), m.first_row(), m.z2_set()] {
            let d0 = 0.7;
            let st = CloakingBoundaryState::new(&m, &set, d0).unwrap();
            assert!(st.tilde.contains(&m.identity()));
            assert!(st.coefficients.iter().all(|c| c.1 > 0.0));
            let full = CloakingBoundaryState::from_cardy_sum(&m, &set, d0);
            for (x, c) in &full {
                let want = st
                    .coefficients
                    .iter()
                    .find(|p| p.0 == *x)
                    .map_or(0.0, |p| p.1);
                assert!((c - want).abs() < 1e-10, "{x}: {c} {want}");
            }
            let once = st.project(&m, &full);
            let twice = st.project(&m, &once);
            let k = d0 * m.total_dim(&set);
            for (a, b) in once.iter().zip(&twice) {
                assert!((b.1 - k * a.1).abs() < 1e-9 * (1.0 + a.1.abs()));
            }
        }
    }

    #[test]
    fn eisenstein_values() {
        let e2 = eisenstein(2, 3);
        assert!((e2[0] + 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(&e2[1..], &[2.0, 6.0, 8.0]);
        let e4 = eisenstein(4, 2);
        assert!((e4[0] - 1.0 / 720.0).abs() < 1e-15);
        assert!((e4[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ising_partition_function_at_hexagonal_tau() {
        let m = ising();
        let tau = TorusModulus::Hexagonal.tau();
        let z = torus_one_point(&m, &[], tau, 4).unwrap();
        assert!((z - 1.88).abs() < 0.01 * 1.88, "{z}");
        // Z(−1/τ̄) symmetry: τ = e^{iπ/3} is fixed by τ → −1/τ up to a shift.
        let zs = torus_one_point(&m, &[], C64::new(1.0, 0.0) / -tau + 1.0, 4).unwrap();
        assert!((z - zs).abs() < 1e-10);
    }

    #[test]
    fn stress_tensor_insertion_is_tau_derivative() {
        let m = ising();
        let z = ZhuTable::build(&m, 4, 40).unwrap();
        let tau = C64::new(0.13, 0.91);
        let mut e = vec![0.0; z.vacuum.dim()];
        let st = z.vacuum.word_state(&[2]).unwrap();
        for (a, b) in e.iter_mut().zip(&st) {
            *a = b.re;
        }
        let h = 1e-4;
        for i in 0..3 {
            let mut one = vec![0.0; z.vacuum.dim()];
            one[0] = 1.0;
            let fd = (z.chiral(&one, i, tau + h) - z.chiral(&one, i, tau - h)) / (2.0 * h);
            let v = z.chiral(&e, i, tau) * C64::new(0.0, 2.0 * PI);
            assert!((fd - v).norm() < 1e-6 * v.norm(), "{fd} {v}");
        }
        // Bulk L₋₂L̄₋₂: (2π)⁴ Σ|q∂_q χ|² = (2π)² Σ|∂_τ χ|².
        let bulk = torus_one_point(&m, &[2], tau, 4).unwrap();
        let fd: f64 = (0..3)
            .map(|i| {
                let mut one = vec![0.0; z.vacuum.dim()];
                one[0] = 1.0;
                ((z.chiral(&one, i, tau + h) - z.chiral(&one, i, tau - h)) / (2.0 * h)).norm_sqr()
            })
            .sum::<f64>()
            * (2.0 * PI).powi(2);
        assert!((bulk - fd).abs() < 1e-6 * fd, "{bulk} {fd}");
    }

    #[test]
    fn zhu_traces_are_modular_covariant() {
        // Z(v, −1/τ) = τ^{wt} Σ_j S_ij Z_j(v, τ) for every L[0]-homogeneous v.
        for (p, q) in [(3, 4), (4, 5)] {
            let m = MinimalModel::new(p, q).unwrap();
            let z = ZhuTable::build(&m, 8, 60).unwrap();
            let tau = C64::new(0.21, 1.17);
            let st = -C64::new(1.0, 0.0) / tau;
            let labels = m.labels().to_vec();
            for x in 0..z.vacuum.dim() {
                let wt = z.vacuum.level_of(x) as i32;
                let mut e = vec![0.0; z.vacuum.dim()];
                e[x] = 1.0;
                for (i, &li) in labels.iter().enumerate() {
                    let lhs = z.chiral(&e, i, st);
                    let rhs: C64 = labels
                        .iter()
                        .enumerate()
                        .map(|(j, &lj)| m.s_matrix(li, lj) * z.chiral(&e, j, tau))
                        .sum::<C64>()
                        * tau.powi(wt);
                    assert!(
                        (lhs - rhs).norm() < 1e-8 * (1.0 + rhs.norm()),
                        "M({p},{q}) x={x} i={i}: {lhs} {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn closed_channel_small_radius_limit() {
        let m = ising();
        let tau = TorusModulus::Hexagonal.tau();
        let z = torus_one_point(&m, &[], tau, 14).unwrap();
        let p = one_hole_closed(&m, tau, 1e-4, 14).unwrap();
        assert!((p.raw - z).abs() < 1e-6);
        assert!((p.with_anomaly * (1e-4f64).powf(1.0 / 12.0) - z).abs() < 1e-6);
    }

    #[test]
    fn closed_channel_truncation_converges() {
        let m = ising();
        let tau = TorusModulus::Hexagonal.tau();
        let a = one_hole_closed(&m, tau, 0.25, 14).unwrap().raw;
        let b = one_hole_closed(&m, tau, 0.25, 12).unwrap().raw;
        assert!((a - b).abs() < 0.005 * a.abs(), "{a} {b}");
    }

    #[test]
    fn open_channel_vacuum_limit() {
        let m = ising();
        let fs = FSymbols::get(&m);
        for t in [0.08, 0.05] {
            let v = open_sum(&fs, m.labels(), m.s11().powf(1.5), t, 7).unwrap();
            assert!((v - 1.5).abs() < 1e-8, "{t}: {v}");
        }
    }

    #[test]
    fn open_channel_only_boundary_preserving_terms() {
        // With a = b = c the only admissible field triples lie in H_aa.
        let m = ising();
        let (one, s, e) = (m.identity(), m.label(1, 2).unwrap(), m.label(1, 3).unwrap());
        let mut count = 0;
        for &i in m.labels() {
            for &j in m.labels() {
                for &k in m.labels() {
                    if admissible(&m, s, s, s, i, j, k) {
                        count += 1;
                        assert!(
                            m.fusion(s, i, s) == 1 && [i, j, k].iter().all(|&x| x == one || x == e)
                        );
                    }
                }
            }
        }
        assert_eq!(count, 4);
    }

    #[test]
    fn anomaly_factor_is_multiplicative() {
        let m = ising();
        let fs = FSymbols::get(&m);
        let p = one_hole_open(&fs, 1.0, 0.3, 3, None).unwrap();
        assert!((p.with_anomaly / p.raw - (2.0 * p.a).exp()).abs() < 1e-12 * (2.0 * p.a).exp());
    }

    #[test]
    fn q_power_fixtures_pass() {
        let m = ising();
        for case in [
            FixtureCase::TorusFromSphere,
            FixtureCase::CylinderClosed,
            FixtureCase::CylinderOpen,
            FixtureCase::BoundaryStateRadius,
        ] {
            let r = q_power_fixture(&m, case, 6.0, 14).unwrap();
            assert!(r.passed, "{case:?}: {r:?}");
        }
        let m = MinimalModel::new(5, 6).unwrap();
        assert!(
            q_power_fixture(&m, FixtureCase::CylinderOpen, 6.0, 14)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn trivial_prefactors_at_zero_central_charge() {
        // c → 0: the hole rescaling factor is 1.
        let r: f64 = 0.3;
        assert_eq!(r.powf(-0.0 / 6.0), 1.0);
        let g = geometry_of_t(0.5, 30).unwrap();
        let a = triangle_anomaly(&g, CutScheme::Analytic, 1e-8).unwrap();
        assert_eq!(a.a_at(0.0, 1.7), 0.0);
    }
}
