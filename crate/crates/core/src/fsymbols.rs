//! F-symbols of M(p,q) in the normalisation where they coincide with the
//! boundary OPE coefficients, F_{bk}[a c; i j] = [F^{i j c}_a]_{k b}.
//!
//! Entries whose first leg is a generator f = (1,2) or f' = (2,1) come from
//! the connection coefficients of the hypergeometric four-point blocks with
//! one degenerate insertion (both channels normalised to leading
//! coefficient 1). All other entries follow from the pentagon identity by
//! peeling a generator off the first leg. The quantum 6j symbols of the two
//! su(2) factors give an independent check of every gauge-invariant
//! combination.

use crate::error::{CloakError, Result};
use crate::minimal::{KacLabel, MinimalModel};
use crate::special::gamma_real;
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

/// Digits carried by the f64 evaluation, recorded in cache files.
pub const PRECISION_DIGITS: u32 = 16;

/// One F-symbol record in F_{bk}[a c; i j] index order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FSymbol {
    pub b: KacLabel,
    pub k: KacLabel,
    pub a: KacLabel,
    pub c: KacLabel,
    pub i: KacLabel,
    pub j: KacLabel,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Gen {
    S,
    R,
}

/// Dense table of [F^{ABC}_D]_{EF} for all labels of a model.
#[derive(Clone, Debug)]
pub struct FSymbols {
    model: MinimalModel,
    n: usize,
    data: Vec<f64>,
    /// Largest relative spread between alternative pentagon routes.
    pub route_spread: f64,
}

impl FSymbols {
    /// Compute (or fetch from the in-process cache) the F-symbols of a model.
    pub fn get(model: &MinimalModel) -> Arc<FSymbols> {
        static CACHE: OnceLock<Mutex<HashMap<(u32, u32), Arc<FSymbols>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(f) = cache.lock().unwrap().get(&(model.p, model.q)) {
            return f.clone();
        }
        let f = Arc::new(FSymbols::compute(model).expect("F-symbol bootstrap"));
        cache
            .lock()
            .unwrap()
            .entry((model.p, model.q))
            .or_insert(f)
            .clone()
    }

    /// Run the bootstrap.
    pub fn compute(model: &MinimalModel) -> Result<FSymbols> {
        let n = model.num_labels();
        let mut b = Builder::new(model);
        let labels = model.labels().to_vec();
        for &x in &labels {
            for &c in &labels {
                for &d in &labels {
                    for e in model.labels() {
                        for &g in &labels {
                            if model.fusion(x, c, g) == 0 || model.fusion(g, d, *e) == 0 {
                                continue;
                            }
                            for &l in &labels {
                                if model.fusion(c, d, l) == 0 || model.fusion(x, l, *e) == 0 {
                                    continue;
                                }
                                b.value(x, c, d, *e, g, l)?;
                            }
                        }
                    }
                }
            }
        }
        let route_spread = b.spread;
        if route_spread > 1e-7 {
            return Err(CloakError::FSymbol(format!(
                "pentagon routes disagree by {route_spread:e} for M({},{})",
                model.p, model.q
            )));
        }
        let mut data = vec![0.0; n.pow(6)];
        for (key, v) in b.memo {
            data[idx(n, key)] = v;
        }
        Ok(FSymbols {
            model: model.clone(),
            n,
            data,
            route_spread,
        })
    }

    pub fn model(&self) -> &MinimalModel {
        &self.model
    }

    /// Categorical entry [F^{ABC}_D]_{EF}.
    pub fn cat(
        &self,
        a: KacLabel,
        b: KacLabel,
        c: KacLabel,
        d: KacLabel,
        e: KacLabel,
        f: KacLabel,
    ) -> f64 {
        let m = &self.model;
        let key = [
            m.index(a),
            m.index(b),
            m.index(c),
            m.index(d),
            m.index(e),
            m.index(f),
        ];
        self.data[idx(self.n, key)]
    }

    /// Entry F_{bk}[a c; i j].
    pub fn f(
        &self,
        b: KacLabel,
        k: KacLabel,
        a: KacLabel,
        c: KacLabel,
        i: KacLabel,
        j: KacLabel,
    ) -> f64 {
        self.cat(i, j, c, a, k, b)
    }

    /// The F-matrix [F^{ABC}_D] with its admissible row and column labels.
    pub fn matrix(
        &self,
        a: KacLabel,
        b: KacLabel,
        c: KacLabel,
        d: KacLabel,
    ) -> (Vec<KacLabel>, Vec<KacLabel>, DMatrix<f64>) {
        let m = &self.model;
        let rows: Vec<KacLabel> = m
            .fuse(a, b)
            .into_iter()
            .filter(|&e| m.fusion(e, c, d) != 0)
            .collect();
        let cols: Vec<KacLabel> = m
            .fuse(b, c)
            .into_iter()
            .filter(|&f| m.fusion(a, f, d) != 0)
            .collect();
        let mat = DMatrix::from_fn(rows.len(), cols.len(), |r, s| {
            self.cat(a, b, c, d, rows[r], cols[s])
        });
        (rows, cols, mat)
    }

    /// All nonzero entries as records, sorted by key.
    pub fn records(&self) -> Vec<FSymbol> {
        let ls = self.model.labels();
        let mut out = Vec::new();
        for (ia, &a) in ls.iter().enumerate() {
            for (ib, &bb) in ls.iter().enumerate() {
                for (ic, &c) in ls.iter().enumerate() {
                    for (id, &d) in ls.iter().enumerate() {
                        for (ie, &e) in ls.iter().enumerate() {
                            for (iff, &f) in ls.iter().enumerate() {
                                let v = self.data[idx(self.n, [ia, ib, ic, id, ie, iff])];
                                if v != 0.0 {
                                    out.push(FSymbol {
                                        b: f,
                                        k: e,
                                        a: d,
                                        c,
                                        i: a,
                                        j: bb,
                                        value: v,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out.sort_by_key(key_of);
        out
    }

    /// Serialise to the line-oriented cache format.
    pub fn to_cache_string(&self) -> String {
        let mut s = String::new();
        for r in self.records() {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {} {} {:.17e} {}",
                self.model.p, self.model.q, r.b, r.k, r.a, r.c, r.i, r.j, r.value, PRECISION_DIGITS
            );
        }
        s
    }

    pub fn cache_path(dir: &Path, model: &MinimalModel) -> PathBuf {
        dir.join(format!(
            "fsym_p{}_q{}_d{}.txt",
            model.p, model.q, PRECISION_DIGITS
        ))
    }

    /// Load from a cache directory, computing and writing the file on a miss.
    /// Returns the table and whether the cache was hit.
    pub fn load_or_compute(dir: &Path, model: &MinimalModel) -> Result<(Arc<FSymbols>, bool)> {
        let path = Self::cache_path(dir, model);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(f) = Self::from_cache_string(model, &text) {
                return Ok((Arc::new(f), true));
            }
        }
        let f = Self::get(model);
        std::fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, f.to_cache_string())?;
        std::fs::rename(&tmp, &path)?;
        Ok((f, false))
    }

    pub fn from_cache_string(model: &MinimalModel, text: &str) -> Result<FSymbols> {
        let n = model.num_labels();
        let mut data = vec![0.0; n.pow(6)];
        let parse_label = |t: &str| -> Result<KacLabel> {
            let t = t.trim_start_matches('(').trim_end_matches(')');
            let mut it = t.split(',');
            let r = it.next().and_then(|x| x.parse().ok());
            let s = it.next().and_then(|x| x.parse().ok());
            match (r, s) {
                (Some(r), Some(s)) => model.label(r, s),
                _ => Err(CloakError::FSymbol(format!("bad label `{t}` in cache"))),
            }
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 10 || f[0] != model.p.to_string() || f[1] != model.q.to_string() {
                return Err(CloakError::FSymbol(format!("bad cache line `{line}`")));
            }
            let (b, k, a, c, i, j) = (
                parse_label(f[2])?,
                parse_label(f[3])?,
                parse_label(f[4])?,
                parse_label(f[5])?,
                parse_label(f[6])?,
                parse_label(f[7])?,
            );
            let v: f64 = f[8]
                .parse()
                .map_err(|_| CloakError::FSymbol(format!("bad value in `{line}`")))?;
            let key = [
                model.index(i),
                model.index(j),
                model.index(c),
                model.index(a),
                model.index(k),
                model.index(b),
            ];
            data[idx(n, key)] = v;
        }
        Ok(FSymbols {
            model: model.clone(),
            n,
            data,
            route_spread: 0.0,
        })
    }

    /// Pentagon residual over all admissible tuples, each measured relative to
    /// the largest product entering that identity (and at least 1).
    pub fn pentagon_residual(&self) -> f64 {
        use rayon::prelude::*;
        let m = &self.model;
        let ls = m.labels().to_vec();
        let mut quads = Vec::new();
        for &a in &ls {
            for &b in &ls {
                for &c in &ls {
                    for &d in &ls {
                        quads.push((a, b, c, d));
                    }
                }
            }
        }
        quads
            .par_iter()
            .map(|&(a, b, c, d)| {
                let mut worst: f64 = 0.0;
                for f in m.fuse(a, b) {
                    for g in m.fuse(f, c) {
                        for e in m.fuse(g, d) {
                            for l in m.fuse(c, d) {
                                for k in m.fuse(b, l) {
                                    if m.fusion(a, k, e) == 0 {
                                        continue;
                                    }
                                    let mut lhs = 0.0;
                                    let mut scale: f64 = 1.0;
                                    for h in m.fuse(b, c) {
                                        let term = self.cat(a, b, c, g, f, h)
                                            * self.cat(a, h, d, e, g, k)
                                            * self.cat(b, c, d, k, h, l);
                                        scale = scale.max(term.abs());
                                        lhs += term;
                                    }
                                    let rhs =
                                        self.cat(f, c, d, e, g, l) * self.cat(a, b, l, e, f, k);
                                    worst = worst.max((lhs - rhs).abs() / scale.max(rhs.abs()));
                                }
                            }
                        }
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Relative size below which a pentagon sum is treated as an exact cancellation.
const ZERO_TOL: f64 = 1e-11;

/// 1/Γ(x) vanishes: x within rounding of a non-positive integer.
fn at_pole(x: f64) -> bool {
    x < 0.5 && (x - x.round()).abs() < 1e-9
}

fn key_of(r: &FSymbol) -> (KacLabel, KacLabel, KacLabel, KacLabel, KacLabel, KacLabel) {
    (r.b, r.k, r.a, r.c, r.i, r.j)
}

fn idx(n: usize, k: [usize; 6]) -> usize {
    ((((k[0] * n + k[1]) * n + k[2]) * n + k[3]) * n + k[4]) * n + k[5]
}

struct Builder<'a> {
    m: &'a MinimalModel,
    beta: f64,
    p0: f64,
    memo: HashMap<[usize; 6], f64>,
    spread: f64,
}

impl<'a> Builder<'a> {
    fn new(m: &'a MinimalModel) -> Self {
        let t = m.p as f64 / m.q as f64;
        let beta = t.sqrt();
        Builder {
            m,
            beta,
            p0: 0.5 * (1.0 / beta - beta),
            memo: HashMap::new(),
            spread: 0.0,
        }
    }

    fn momentum(&self, r: i64, s: i64) -> f64 {
        0.5 * (r as f64 / self.beta - s as f64 * self.beta)
    }

    fn h(&self, p: f64) -> f64 {
        p * p - self.p0 * self.p0
    }

    fn sigma(&self, g: Gen) -> f64 {
        match g {
            Gen::S => 0.5 * self.beta,
            Gen::R => 0.5 / self.beta,
        }
    }

    fn gen_label(&self, g: Gen) -> KacLabel {
        match g {
            Gen::S => self.m.canonical(KacLabel::new(1, 2)),
            Gen::R => self.m.canonical(KacLabel::new(2, 1)),
        }
    }

    /// The child of x under fusion with g carrying momentum P_x + eps*sigma.
    fn child(&self, x: KacLabel, g: Gen, eps: i64) -> Option<KacLabel> {
        let (r, s) = (x.r as i64, x.s as i64);
        let (cr, cs) = match g {
            Gen::S => (r, s - eps),
            Gen::R => (r + eps, s),
        };
        if cr < 1 || cs < 1 || cr >= self.m.p as i64 || cs >= self.m.q as i64 {
            return None;
        }
        Some(self.m.canonical(KacLabel::new(cr as u32, cs as u32)))
    }

    fn eps_of(&self, x: KacLabel, g: Gen, target: KacLabel) -> Option<i64> {
        [1i64, -1]
            .into_iter()
            .find(|&e| self.child(x, g, e) == Some(target))
    }

    /// Seed [F^{gCD}_E]_{GL} from hypergeometric connection coefficients.
    fn seed(
        &self,
        g: Gen,
        c: KacLabel,
        d: KacLabel,
        e: KacLabel,
        gg: KacLabel,
        l: KacLabel,
    ) -> f64 {
        let sig = self.sigma(g);
        let pc = self.momentum(c.r as i64, c.s as i64);
        let pd = self.momentum(d.r as i64, d.s as i64);
        let pe = self.momentum(e.r as i64, e.s as i64);
        let hf = self.m.weight(self.gen_label(g));
        let (hc, hd, he) = (self.h(pc), self.h(pd), self.h(pe));
        let eg = match self.eps_of(c, g, gg) {
            Some(x) => x,
            None => return 0.0,
        };
        let el = match self.eps_of(e, g, l) {
            Some(x) => x,
            None => return 0.0,
        };
        let gamma_e = |eps: i64| self.h(pc + eps as f64 * sig) - hf - hc;
        let alpha_e = |eps: i64| self.h(pe + eps as f64 * sig) - hc - hd;
        let delta_e = |eps: i64| hc + self.h(pd + eps as f64 * sig) - he;
        let (gg_, gg2) = (gamma_e(eg), gamma_e(-eg));
        let (al, al2) = (alpha_e(el), alpha_e(-el));
        let (dm, dp) = (delta_e(-1), delta_e(1));
        let (x1, x2) = (1.0 - gg2 - al - dm, 1.0 - gg2 - al - dp);
        if at_pole(x1) || at_pole(x2) {
            return 0.0;
        }
        gamma_real(1.0 + gg_ - gg2) * gamma_real(al2 - al) / (gamma_real(x1) * gamma_real(x2))
    }

    fn admissible(
        &self,
        a: KacLabel,
        b: KacLabel,
        c: KacLabel,
        d: KacLabel,
        e: KacLabel,
        f: KacLabel,
    ) -> bool {
        let m = self.m;
        m.fusion(a, b, e) != 0
            && m.fusion(e, c, d) != 0
            && m.fusion(b, c, f) != 0
            && m.fusion(a, f, d) != 0
    }

    /// [F^{XCD}_E]_{GL} with X given by its representative (r,s).
    fn value(
        &mut self,
        x: KacLabel,
        c: KacLabel,
        d: KacLabel,
        e: KacLabel,
        g: KacLabel,
        l: KacLabel,
    ) -> Result<f64> {
        self.value_rep(x.r, x.s, c, d, e, g, l)
    }

    #[allow(clippy::too_many_arguments)]
    fn value_rep(
        &mut self,
        xr: u32,
        xs: u32,
        c: KacLabel,
        d: KacLabel,
        e: KacLabel,
        g: KacLabel,
        l: KacLabel,
    ) -> Result<f64> {
        let m = self.m;
        let x = m.canonical(KacLabel::new(xr, xs));
        if !self.admissible(x, c, d, e, g, l) {
            return Ok(0.0);
        }
        let key = [
            m.index(x),
            m.index(c),
            m.index(d),
            m.index(e),
            m.index(g),
            m.index(l),
        ];
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = if x == m.identity() {
            1.0
        } else if (xr, xs) == (1, 2) || x == self.gen_label(Gen::S) {
            self.seed(Gen::S, c, d, e, g, l)
        } else if (xr, xs) == (2, 1) || x == self.gen_label(Gen::R) {
            self.seed(Gen::R, c, d, e, g, l)
        } else {
            let (gen, pr, ps) = if xs >= 2 {
                (Gen::S, xr, xs - 1)
            } else {
                (Gen::R, xr - 1, xs)
            };
            let xp = m.canonical(KacLabel::new(pr, ps));
            let f = self.gen_label(gen);
            // F^{XCD}_{E;GL} F^{fX'L}_{E;XK} = Σ_H F^{fX'C}_{G;XH} F^{fHD}_{E;GK} F^{X'CD}_{K;HL}
            let mut results: Vec<(f64, f64)> = Vec::new();
            for k in m.labels().to_vec() {
                if m.fusion(f, k, e) == 0 || m.fusion(xp, l, k) == 0 {
                    continue;
                }
                let den = self.seed_any(gen, xp, l, e, x, k);
                if den.abs() < 1e-300 {
                    continue;
                }
                let mut sum = 0.0;
                let mut mag = 0.0;
                for h in m.fuse(xp, c) {
                    if m.fusion(f, h, g) == 0 || m.fusion(h, d, k) == 0 {
                        continue;
                    }
                    let t1 = self.seed_any(gen, xp, c, g, x, h);
                    if t1 == 0.0 {
                        continue;
                    }
                    let t2 = self.seed_any(gen, h, d, e, g, k);
                    if t2 == 0.0 {
                        continue;
                    }
                    let t3 = self.value_rep(pr, ps, c, d, k, h, l)?;
                    sum += t1 * t2 * t3;
                    mag += (t1 * t2 * t3).abs();
                }
                if sum.abs() <= ZERO_TOL * mag {
                    sum = 0.0;
                }
                results.push((den, sum / den));
            }
            if results.is_empty() {
                return Err(CloakError::FSymbol(format!(
                    "no pentagon route for X={x} C={c} D={d} E={e} G={g} L={l}"
                )));
            }
            results.sort_by(|a, b| b.0.abs().partial_cmp(&a.0.abs()).unwrap());
            let best = results[0].1;
            for &(den, v) in &results[1..] {
                if den.abs() > 1e-6 * results[0].0.abs() {
                    let rel = (v - best).abs() / best.abs().max(1e-3);
                    self.spread = self.spread.max(rel);
                }
            }
            best
        };
        self.memo.insert(key, v);
        Ok(v)
    }

    fn seed_any(
        &self,
        g: Gen,
        c: KacLabel,
        d: KacLabel,
        e: KacLabel,
        gg: KacLabel,
        l: KacLabel,
    ) -> f64 {
        let f = self.gen_label(g);
        if !self.admissible(f, c, d, e, gg, l) {
            return 0.0;
        }
        self.seed(g, c, d, e, gg, l)
    }
}

/// Gauge-invariant F_{EF} (F^{-1})_{FE} predicted by the quantum 6j symbols
/// of the two su(2) factors.
pub fn six_j_invariant(
    m: &MinimalModel,
    a: KacLabel,
    b: KacLabel,
    c: KacLabel,
    d: KacLabel,
    e: KacLabel,
    f: KacLabel,
) -> f64 {
    let pick = |l: KacLabel| -> (u32, u32) {
        let alt = (m.p - l.r, m.q - l.s);
        let use_first = if m.p % 2 == 1 {
            l.r % 2 == 1
        } else {
            l.s % 2 == 1
        };
        if use_first {
            (l.r, l.s)
        } else {
            alt
        }
    };
    let ls = [a, b, c, d, e, f].map(pick);
    let theta_r = m.q as f64 / m.p as f64;
    let theta_s = m.p as f64 / m.q as f64;
    let part = |theta: f64, sel: fn((u32, u32)) -> u32| -> f64 {
        let j: Vec<i64> = ls.iter().map(|&x| sel(x) as i64 - 1).collect(); // twice the spin
        let (j1, j2, j3, jj, j12, j23) = (j[0], j[1], j[2], j[3], j[4], j[5]);
        let sq = q_six_j_squared(theta, j1, j2, j12, j3, jj, j23);
        qnum(theta, j12 + 1) * qnum(theta, j23 + 1) * sq
    };
    part(theta_r, |x| x.0) * part(theta_s, |x| x.1)
}

fn qnum(theta: f64, n: i64) -> f64 {
    let pi = std::f64::consts::PI;
    (n as f64 * pi * theta).sin() / (pi * theta).sin()
}

fn qfact(theta: f64, n: i64) -> f64 {
    (1..=n).map(|k| qnum(theta, k)).product()
}

/// Δ(a,b,c)^2 with doubled spins.
fn delta2(theta: f64, a: i64, b: i64, c: i64) -> f64 {
    qfact(theta, (a + b - c) / 2) * qfact(theta, (a - b + c) / 2) * qfact(theta, (-a + b + c) / 2)
        / qfact(theta, (a + b + c) / 2 + 1)
}

/// Square of the quantum 6j symbol {j1 j2 j12; j3 j j23} (doubled spins).
fn q_six_j_squared(theta: f64, j1: i64, j2: i64, j12: i64, j3: i64, j: i64, j23: i64) -> f64 {
    let d = delta2(theta, j1, j2, j12)
        * delta2(theta, j12, j3, j)
        * delta2(theta, j2, j3, j23)
        * delta2(theta, j1, j23, j);
    let t1 = (j1 + j2 + j12) / 2;
    let t2 = (j12 + j3 + j) / 2;
    let t3 = (j2 + j3 + j23) / 2;
    let t4 = (j1 + j23 + j) / 2;
    let u1 = (j1 + j2 + j3 + j) / 2;
    let u2 = (j1 + j12 + j3 + j23) / 2;
    let u3 = (j2 + j12 + j + j23) / 2;
    let zmin = t1.max(t2).max(t3).max(t4);
    let zmax = u1.min(u2).min(u3);
    let mut s = 0.0;
    for z in zmin..=zmax {
        let sign = if z % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * qfact(theta, z + 1)
            / (qfact(theta, z - t1)
                * qfact(theta, z - t2)
                * qfact(theta, z - t3)
                * qfact(theta, z - t4)
                * qfact(theta, u1 - z)
                * qfact(theta, u2 - z)
                * qfact(theta, u3 - z));
    }
    d * s * s
}

/// Largest deviation between F_{EF}(F^{-1})_{FE} and the 6j prediction.
pub fn six_j_cross_check(fs: &FSymbols) -> f64 {
    let m = fs.model();
    let ls = m.labels().to_vec();
    let mut worst: f64 = 0.0;
    for &a in &ls {
        for &b in &ls {
            for &c in &ls {
                for &d in &ls {
                    let (rows, cols, mat) = fs.matrix(a, b, c, d);
                    if rows.is_empty() {
                        continue;
                    }
                    let inv = match mat.clone().try_inverse() {
                        Some(x) => x,
                        None => return f64::INFINITY,
                    };
                    for (ri, &e) in rows.iter().enumerate() {
                        for (ci, &f) in cols.iter().enumerate() {
                            let lhs = mat[(ri, ci)] * inv[(ci, ri)];
                            let rhs = six_j_invariant(m, a, b, c, d, e, f);
                            worst = worst.max((lhs - rhs).abs());
                        }
                    }
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ising() -> (MinimalModel, KacLabel, KacLabel, KacLabel) {
        let m = MinimalModel::ising();
        let one = m.identity();
        let s = m.label(1, 2).unwrap();
        let e = m.label(1, 3).unwrap();
        (m, one, s, e)
    }

    #[test]
    fn ising_listed_values() {
        let (m, one, s, e) = ising();
        let fs = FSymbols::get(&m);
        assert!((fs.f(one, one, one, one, one, one) - 1.0).abs() < 1e-14);
        assert!((fs.f(e, one, e, e, one, one) - 1.0).abs() < 1e-14);
        assert!((fs.f(s, one, s, s, one, one) - 1.0).abs() < 1e-14);
        assert!(
            (fs.f(s, one, s, s, e, e) - 0.5).abs() < 1e-14,
            "{}",
            fs.f(s, one, s, s, e, e)
        );
    }

    #[test]
    fn legs_with_identity_are_trivial() {
        for (p, q) in [(3, 4), (4, 5), (3, 5), (5, 7)] {
            let m = MinimalModel::new(p, q).unwrap();
            let fs = FSymbols::get(&m);
            let one = m.identity();
            for &a in m.labels() {
                for &c in m.labels() {
                    for d in m.fuse(a, c) {
                        assert!((fs.cat(a, one, c, d, a, c) - 1.0).abs() < 1e-10);
                        assert!((fs.cat(one, a, c, d, a, d) - 1.0).abs() < 1e-10);
                        assert!(
                            (fs.cat(a, c, one, d, d, c) - 1.0).abs() < 1e-10,
                            "M({p},{q}) a={a} c={c} d={d}: {}",
                            fs.cat(a, c, one, d, d, c)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn seed_exponents_satisfy_fuchs_relation() {
        let m = MinimalModel::new(4, 5).unwrap();
        let b = Builder::new(&m);
        let sig = b.sigma(Gen::S);
        let hf = m.weight(m.label(1, 2).unwrap());
        for &c in m.labels() {
            for &d in m.labels() {
                for &e in m.labels() {
                    let (pc, pd, pe) = (
                        b.momentum(c.r as i64, c.s as i64),
                        b.momentum(d.r as i64, d.s as i64),
                        b.momentum(e.r as i64, e.s as i64),
                    );
                    let (hc, hd, he) = (b.h(pc), b.h(pd), b.h(pe));
                    let mut sum = 0.0;
                    for eps in [-1.0, 1.0] {
                        sum += b.h(pe + eps * sig) - hc - hd;
                        sum += b.h(pc + eps * sig) - hf - hc;
                        sum += hc + b.h(pd + eps * sig) - he;
                    }
                    assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn six_j_agrees_for_small_models() {
        for (p, q) in [(3, 4), (4, 5), (3, 5), (5, 6)] {
            let m = MinimalModel::new(p, q).unwrap();
            let fs = FSymbols::get(&m);
            let d = six_j_cross_check(&fs);
            assert!(d < 1e-10, "M({p},{q}): 6j deviation {d}");
        }
    }

    #[test]
    fn s_relation_and_triple_identity() {
        for (p, q) in [(3, 4), (4, 5), (3, 5), (5, 7)] {
            let m = MinimalModel::new(p, q).unwrap();
            let fs = FSymbols::get(&m);
            let one = m.identity();
            let ls = m.labels().to_vec();
            for &a in &ls {
                for &b in &ls {
                    for i in m.fuse(a, b) {
                        let l = fs.f(b, one, a, a, i, i) * m.s_matrix(a, one);
                        let r = fs.f(a, one, b, b, i, i) * m.s_matrix(b, one);
                        assert!((l - r).abs() < 1e-12, "S-relation M({p},{q})");
                        for &c in &ls {
                            for j in m.fuse(b, c) {
                                for k in m.fuse(i, j) {
                                    if m.fusion(a, k, c) == 0 {
                                        continue;
                                    }
                                    let l = fs.f(b, k, c, a, j, i) * fs.f(c, one, a, a, k, k);
                                    let r = fs.f(c, i, a, b, k, j) * fs.f(b, one, a, a, i, i);
                                    assert!(
                                        (l - r).abs() < 1e-11 * l.abs().max(1.0),
                                        "triple M({p},{q})"
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn index_order_matches_inverse_of_reversed_move() {
        let m = MinimalModel::new(4, 5).unwrap();
        let fs = FSymbols::get(&m);
        let ls = m.labels().to_vec();
        for &a in &ls {
            for &i in &ls {
                for &j in &ls {
                    for &c in &ls {
                        let (rows, cols, mat) = fs.matrix(a, i, j, c);
                        if rows.is_empty() {
                            continue;
                        }
                        let inv = mat.try_inverse().unwrap();
                        for (ri, &b) in rows.iter().enumerate() {
                            for (ci, &k) in cols.iter().enumerate() {
                                assert!((fs.f(b, k, a, c, i, j) - inv[(ci, ri)]).abs() < 1e-11);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pentagon_holds() {
        for (p, q) in [(3, 4), (4, 5), (5, 6), (3, 7)] {
            let m = MinimalModel::new(p, q).unwrap();
            let r = FSymbols::get(&m).pentagon_residual();
            assert!(r < 1e-10, "M({p},{q}) pentagon residual {r}");
        }
    }

    #[test]
    fn cache_round_trip() {
        let m = MinimalModel::new(4, 5).unwrap();
        let fs = FSymbols::get(&m);
        let text = fs.to_cache_string();
        let back = FSymbols::from_cache_string(&m, &text).unwrap();
        assert_eq!(back.to_cache_string(), text);
        let dir = std::env::temp_dir().join(format!("cloak-fcache-{}", std::process::id()));
        let (_, hit) = FSymbols::load_or_compute(&dir, &m).unwrap();
        assert!(!hit);
        let (again, hit) = FSymbols::load_or_compute(&dir, &m).unwrap();
        assert!(hit);
        assert_eq!(again.to_cache_string(), text);
        let _ = std::fs::remove_dir_all(&dir);
    }
}
