//! Level-truncated irreducible Virasoro modules.
//!
//! States are handled in a PBW basis L_{-n1}...L_{-nk}|h> (n1 >= ... >= nk)
//! of the Verma module. Null vectors are removed by picking, level by level,
//! a set of PBW words whose Shapovalov Gram rows are independent; every other
//! word is reduced onto that set through the (exact) Gram matrix. Ranks are
//! computed over GF(2^61 - 1), Gram blocks and reduction matrices over the
//! rationals, and the mode matrices used downstream in f64.

use crate::error::{CloakError, Result};
use crate::minimal::{KacLabel, MinimalModel};
use crate::special::{cis, C64};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

/// Default level bound for module construction.
pub const DEFAULT_MAX_LEVEL: usize = 14;

/// Descending list of mode indices n1 >= n2 >= ... >= 1 for L_{-n1}...L_{-nk}.
pub type Word = Vec<u32>;

pub fn word_level(w: &[u32]) -> usize {
    w.iter().map(|&n| n as usize).sum()
}

/// Partitions of n in descending part order, largest first part first.
pub fn partitions(n: usize) -> Vec<Word> {
    fn rec(n: usize, max: usize, cur: &mut Word, out: &mut Vec<Word>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for k in (1..=n.min(max)).rev() {
            cur.push(k as u32);
            rec(n - k, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Coefficient ring for the Verma-module engine.
pub trait Coeff:
    Clone
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn ratio(n: i64, d: i64) -> Self;
    fn int(n: i64) -> Self {
        Self::ratio(n, 1)
    }
}

impl Coeff for f64 {
    fn ratio(n: i64, d: i64) -> Self {
        n as f64 / d as f64
    }
}

impl Coeff for BigRational {
    fn ratio(n: i64, d: i64) -> Self {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }
}

/// Element of GF(2^61 - 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fp(u64);

const FP_MOD: u64 = (1 << 61) - 1;

impl Fp {
    fn reduce(x: u128) -> u64 {
        let lo = (x as u64) & FP_MOD;
        let hi = (x >> 61) as u64;
        let mut s = lo + hi;
        while s >= FP_MOD {
            s -= FP_MOD;
        }
        s
    }
    fn from_i64(n: i64) -> Fp {
        let r = n.rem_euclid(FP_MOD as i64) as u64;
        Fp(r)
    }
    fn pow(self, mut e: u64) -> Fp {
        let mut base = self;
        let mut acc = Fp(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
    pub fn inv(self) -> Fp {
        self.pow(FP_MOD - 2)
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, o: Fp) -> Fp {
        let s = self.0 + o.0;
        Fp(if s >= FP_MOD { s - FP_MOD } else { s })
    }
}
impl Sub for Fp {
    type Output = Fp;
    fn sub(self, o: Fp) -> Fp {
        Fp(if self.0 >= o.0 {
            self.0 - o.0
        } else {
            self.0 + FP_MOD - o.0
        })
    }
}
impl Mul for Fp {
    type Output = Fp;
    fn mul(self, o: Fp) -> Fp {
        Fp(Fp::reduce(self.0 as u128 * o.0 as u128))
    }
}
impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        Fp(if self.0 == 0 { 0 } else { FP_MOD - self.0 })
    }
}
impl Zero for Fp {
    fn zero() -> Fp {
        Fp(0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
}
impl One for Fp {
    fn one() -> Fp {
        Fp(1)
    }
}
impl Coeff for Fp {
    fn ratio(n: i64, d: i64) -> Self {
        Fp::from_i64(n) * Fp::from_i64(d).inv()
    }
}

type Sparse<T> = Vec<(Word, T)>;

/// Virasoro action on the Verma module of weight h at central charge c.
pub struct Verma<T: Coeff> {
    h: T,
    c: T,
    memo: HashMap<(i32, Word), Sparse<T>>,
}

impl<T: Coeff> Verma<T> {
    pub fn new(h: T, c: T) -> Self {
        Verma {
            h,
            c,
            memo: HashMap::new(),
        }
    }

    /// L_m applied to a PBW word, as a sparse PBW state.
    pub fn apply(&mut self, m: i32, w: &[u32]) -> Sparse<T> {
        if m == 0 {
            let lvl = T::int(word_level(w) as i64);
            return vec![(w.to_vec(), self.h.clone() + lvl)];
        }
        if w.is_empty() {
            return if m > 0 {
                Vec::new()
            } else {
                vec![(vec![(-m) as u32], T::one())]
            };
        }
        if m < 0 && (-m) as u32 >= w[0] {
            let mut v = Vec::with_capacity(w.len() + 1);
            v.push((-m) as u32);
            v.extend_from_slice(w);
            return vec![(v, T::one())];
        }
        let key = (m, w.to_vec());
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        let n1 = w[0] as i32;
        let rest = &w[1..];
        let mut acc: BTreeMap<Word, T> = BTreeMap::new();
        for (v, a) in self.apply(m, rest) {
            for (u, b) in self.apply(-n1, &v) {
                let e = acc.entry(u).or_insert_with(T::zero);
                *e = e.clone() + a.clone() * b;
            }
        }
        let f = T::int((m + n1) as i64);
        for (u, b) in self.apply(m - n1, rest) {
            let e = acc.entry(u).or_insert_with(T::zero);
            *e = e.clone() + f.clone() * b;
        }
        if m == n1 {
            let mm = m as i64;
            let central = self.c.clone() * T::ratio(mm * mm * mm - mm, 12);
            let e = acc.entry(rest.to_vec()).or_insert_with(T::zero);
            *e = e.clone() + central;
        }
        let out: Sparse<T> = acc.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        self.memo.insert(key, out.clone());
        out
    }

    /// Apply L_m to a sparse state.
    pub fn apply_state(&mut self, m: i32, s: &[(Word, T)]) -> Sparse<T> {
        let mut acc: BTreeMap<Word, T> = BTreeMap::new();
        for (w, a) in s {
            for (u, b) in self.apply(m, w) {
                let e = acc.entry(u).or_insert_with(T::zero);
                *e = e.clone() + a.clone() * b;
            }
        }
        acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
    }

    /// Shapovalov product <lambda|mu> of two PBW words.
    pub fn shapovalov(&mut self, lambda: &[u32], mu: &[u32]) -> T {
        if word_level(lambda) != word_level(mu) {
            return T::zero();
        }
        let mut state: Sparse<T> = vec![(mu.to_vec(), T::one())];
        for &n in lambda {
            state = self.apply_state(n as i32, &state);
            if state.is_empty() {
                return T::zero();
            }
        }
        state
            .into_iter()
            .find(|(w, _)| w.is_empty())
            .map(|(_, v)| v)
            .unwrap_or_else(T::zero)
    }
}

fn big(r: Rational64) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn fp_of(r: Rational64) -> Fp {
    Fp::ratio(*r.numer(), *r.denom())
}

fn big_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Data of one level of the quotient module.
#[derive(Clone, Debug)]
pub struct LevelData {
    /// All PBW words at this level.
    pub words: Vec<Word>,
    /// Positions (in `words`) of the independent words spanning the quotient.
    pub basis_idx: Vec<usize>,
    /// Shapovalov Gram on the basis words.
    pub gram: DMatrix<f64>,
    /// Exact Shapovalov Gram on the basis words.
    pub gram_exact: Vec<Vec<BigRational>>,
    /// Reduction of PBW coordinates onto basis coordinates.
    pub reduce: DMatrix<f64>,
    /// Columns: twisted-ON vectors in basis coordinates.
    pub on: DMatrix<C64>,
}

impl LevelData {
    pub fn dim(&self) -> usize {
        self.basis_idx.len()
    }
    pub fn basis_words(&self) -> Vec<Word> {
        self.basis_idx
            .iter()
            .map(|&i| self.words[i].clone())
            .collect()
    }
}

/// Irreducible Virasoro module truncated at `max_level`.
#[derive(Clone, Debug)]
pub struct TruncatedModule {
    pub p: u32,
    pub q: u32,
    pub label: KacLabel,
    pub h: f64,
    pub c: f64,
    pub h_exact: Rational64,
    pub c_exact: Rational64,
    pub max_level: usize,
    pub levels: Vec<LevelData>,
    offsets: Vec<usize>,
    modes: HashMap<i32, DMatrix<f64>>,
}

/// Graded dimensions of the irreducible module from the Rocha-Caridi formula.
pub fn rocha_caridi_dims(p: u32, q: u32, l: KacLabel, max_level: usize) -> Vec<i64> {
    let (p, q, r, s) = (p as i64, q as i64, l.r as i64, l.s as i64);
    let n = max_level as i64;
    let mut num = vec![0i64; max_level + 1];
    let kmax = 2 + (n as f64).sqrt() as i64;
    for k in -kmax..=kmax {
        let a = k * (k * p * q + q * r - p * s);
        let b = (k * p + r) * (k * q + s);
        if (0..=n).contains(&a) {
            num[a as usize] += 1;
        }
        if (0..=n).contains(&b) {
            num[b as usize] -= 1;
        }
    }
    // divide by prod (1 - q^k)
    let mut part = vec![0i64; max_level + 1];
    part[0] = 1;
    for k in 1..=max_level {
        for j in k..=max_level {
            part[j] += part[j - k];
        }
    }
    (0..=max_level)
        .map(|m| (0..=m).map(|j| num[j] * part[m - j]).sum())
        .collect()
}

impl TruncatedModule {
    pub fn build(model: &MinimalModel, label: KacLabel, max_level: usize) -> Result<Self> {
        Self::build_bounded(model, label, max_level, DEFAULT_MAX_LEVEL)
    }

    pub fn build_bounded(
        model: &MinimalModel,
        label: KacLabel,
        max_level: usize,
        bound: usize,
    ) -> Result<Self> {
        if max_level > bound {
            return Err(CloakError::LevelOverflow {
                level: max_level,
                max: bound,
            });
        }
        let label = model.canonical(label);
        let h_exact = model.weight_exact(label);
        let c_exact = model.central_charge_exact();
        let expected = rocha_caridi_dims(model.p, model.q, label, max_level);

        let mut vp: Verma<Fp> = Verma::new(fp_of(h_exact), fp_of(c_exact));
        let mut vq: Verma<BigRational> = Verma::new(big(h_exact), big(c_exact));
        let mut levels = Vec::with_capacity(max_level + 1);
        for n in 0..=max_level {
            let words = partitions(n);
            let nw = words.len();
            // rank and independent rows over GF(p)
            let mut echelon: Vec<Vec<Fp>> = Vec::new();
            let mut pivots: Vec<usize> = Vec::new();
            let mut basis_idx = Vec::new();
            for (i, wi) in words.iter().enumerate() {
                let mut row: Vec<Fp> = words.iter().map(|wj| vp.shapovalov(wi, wj)).collect();
                for (er, &pc) in echelon.iter().zip(&pivots) {
                    let f = row[pc];
                    if !f.is_zero() {
                        for k in 0..nw {
                            row[k] = row[k] - f * er[k];
                        }
                    }
                }
                if let Some(pc) = row.iter().position(|x| !x.is_zero()) {
                    let inv = row[pc].inv();
                    for x in row.iter_mut() {
                        *x = *x * inv;
                    }
                    echelon.push(row);
                    pivots.push(pc);
                    basis_idx.push(i);
                }
            }
            if basis_idx.len() as i64 != expected[n] {
                return Err(CloakError::GramRank {
                    level: n,
                    found: basis_idx.len(),
                    expected: expected[n] as usize,
                });
            }
            let k = basis_idx.len();
            // exact Gram of basis rows against all words
            let gsw: Vec<Vec<BigRational>> = basis_idx
                .iter()
                .map(|&i| {
                    words
                        .iter()
                        .map(|wj| vq.shapovalov(&words[i], wj))
                        .collect()
                })
                .collect();
            let gss: Vec<Vec<BigRational>> = gsw
                .iter()
                .map(|row| basis_idx.iter().map(|&j| row[j].clone()).collect())
                .collect();
            let red = solve_rational(&gss, &gsw).ok_or_else(|| {
                CloakError::Numerical(format!("singular basis Gram at level {n}"))
            })?;
            let reduce = DMatrix::from_fn(k, nw, |a, b| big_to_f64(&red[a][b]));
            let gram = DMatrix::from_fn(k, k, |a, b| big_to_f64(&gss[a][b]));
            let on = twisted_on(&gss, n);
            levels.push(LevelData {
                words,
                basis_idx,
                gram,
                gram_exact: gss,
                reduce,
                on,
            });
        }
        let mut offsets = vec![0];
        for l in &levels {
            offsets.push(offsets.last().unwrap() + l.dim());
        }
        let mut module = TruncatedModule {
            p: model.p,
            q: model.q,
            label,
            h: crate::minimal::rat_f64(h_exact),
            c: crate::minimal::rat_f64(c_exact),
            h_exact,
            c_exact,
            max_level,
            levels,
            offsets,
            modes: HashMap::new(),
        };
        module.build_modes();
        Ok(module)
    }

    fn build_modes(&mut self) {
        let mut v: Verma<f64> = Verma::new(self.h, self.c);
        let dim = self.dim();
        let ml = self.max_level as i32;
        for m in -ml..=ml {
            let mut mat = DMatrix::zeros(dim, dim);
            for n in 0..=self.max_level {
                let target = n as i32 - m;
                if target < 0 || target > ml {
                    continue;
                }
                let tl = &self.levels[target as usize];
                let index: HashMap<&Word, usize> =
                    tl.words.iter().enumerate().map(|(i, w)| (w, i)).collect();
                for (col, &wi) in self.levels[n].basis_idx.iter().enumerate() {
                    let img = v.apply(m, &self.levels[n].words[wi]);
                    for (w, a) in img {
                        let j = index[&w];
                        for r in 0..tl.dim() {
                            mat[(self.offsets[target as usize] + r, self.offsets[n] + col)] +=
                                a * tl.reduce[(r, j)];
                        }
                    }
                }
            }
            self.modes.insert(m, mat);
        }
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn graded_dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.dim()).collect()
    }

    pub fn offset(&self, level: usize) -> usize {
        self.offsets[level]
    }

    /// Level of the basis vector at a flat index.
    pub fn level_of(&self, idx: usize) -> usize {
        self.offsets.partition_point(|&o| o <= idx) - 1
    }

    /// Matrix of L_m on the flat basis (truncated: components leaving the
    /// level range are dropped).
    pub fn mode(&self, m: i32) -> &DMatrix<f64> {
        &self.modes[&m]
    }

    /// L_m acting on a state, erroring if the result leaves the truncation.
    pub fn apply_mode(&self, m: i32, state: &[C64]) -> Result<Vec<C64>> {
        if m.unsigned_abs() as usize > self.max_level {
            return Err(CloakError::LevelOverflow {
                level: m.unsigned_abs() as usize,
                max: self.max_level,
            });
        }
        for (i, v) in state.iter().enumerate() {
            let lvl = self.level_of(i) as i32 - m;
            if v.norm() != 0.0 && (lvl > self.max_level as i32) {
                return Err(CloakError::LevelOverflow {
                    level: lvl as usize,
                    max: self.max_level,
                });
            }
        }
        let mat = self.mode(m);
        let dim = self.dim();
        Ok((0..dim)
            .map(|r| (0..dim).map(|c| state[c] * mat[(r, c)]).sum())
            .collect())
    }

    /// Flat coordinates of a PBW word (reduced onto the basis).
    pub fn word_state(&self, w: &[u32]) -> Result<Vec<C64>> {
        let n = word_level(w);
        if n > self.max_level {
            return Err(CloakError::LevelOverflow {
                level: n,
                max: self.max_level,
            });
        }
        let l = &self.levels[n];
        let j = l
            .words
            .iter()
            .position(|x| x == w)
            .ok_or_else(|| CloakError::Numerical(format!("{w:?} is not a PBW word")))?;
        let mut s = vec![C64::new(0.0, 0.0); self.dim()];
        for r in 0..l.dim() {
            s[self.offsets[n] + r] = C64::new(l.reduce[(r, j)], 0.0);
        }
        Ok(s)
    }

    /// Twisted pairing matrix <e_a|e_b> on the flat basis.
    pub fn pairing_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (n, l) in self.levels.iter().enumerate() {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            for a in 0..l.dim() {
                for b in 0..l.dim() {
                    m[(self.offsets[n] + a, self.offsets[n] + b)] = sign * l.gram[(a, b)];
                }
            }
        }
        m
    }

    /// Bilinear twisted pairing of two states.
    pub fn pairing(&self, u: &[C64], v: &[C64]) -> C64 {
        let g = self.pairing_matrix();
        let mut s = C64::new(0.0, 0.0);
        for a in 0..self.dim() {
            for b in 0..self.dim() {
                if g[(a, b)] != 0.0 {
                    s += u[a] * g[(a, b)] * v[b];
                }
            }
        }
        s
    }

    /// Twisted-ON basis as columns of a flat matrix, with their levels.
    pub fn on_basis(&self) -> (DMatrix<C64>, Vec<usize>) {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        let mut lv = Vec::with_capacity(dim);
        for (n, l) in self.levels.iter().enumerate() {
            let o = self.offsets[n];
            for a in 0..l.dim() {
                for b in 0..l.dim() {
                    m[(o + a, o + b)] = l.on[(a, b)];
                }
                lv.push(n);
            }
        }
        (m, lv)
    }

    /// Γ_G for G(z) = a1 z + a2 z^2 + ..., with `a[k]` = a_{k+1}.
    pub fn gamma_operator(&self, a: &[C64]) -> Result<DMatrix<C64>> {
        let need = self.max_level + 1;
        if a.len() < need.max(1) {
            return Err(CloakError::SeriesTooShort {
                need,
                have: a.len(),
            });
        }
        let v = flow_coefficients(a, self.max_level);
        let dim = self.dim();
        let a1 = a[0];
        let mut u = DMatrix::<C64>::zeros(dim, dim);
        for (n, vn) in v.iter().enumerate().skip(1) {
            if n > self.max_level {
                break;
            }
            let coef = *vn * a1.powi(-(n as i32));
            let mm = self.mode(n as i32);
            for r in 0..dim {
                for c in 0..dim {
                    if mm[(r, c)] != 0.0 {
                        u[(r, c)] += coef * mm[(r, c)];
                    }
                }
            }
        }
        // exp(U), U nilpotent of order <= max_level + 1
        let mut e = DMatrix::<C64>::identity(dim, dim);
        let mut term = DMatrix::<C64>::identity(dim, dim);
        for k in 1..=self.max_level {
            term = &term * &u / C64::new(k as f64, 0.0);
            e += &term;
        }
        let la = a1.ln();
        for c in 0..dim {
            let scale = ((self.h + self.level_of(c) as f64) * la).exp();
            for r in 0..dim {
                e[(r, c)] *= scale;
            }
        }
        Ok(e)
    }

    /// q^{h - c/24} Σ_n dim_n q^n with q = e^{2πiτ}.
    pub fn character_tau(&self, tau: C64) -> C64 {
        let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
        self.levels
            .iter()
            .enumerate()
            .map(|(n, l)| {
                l.dim() as f64 * (two_pi_i * tau * (self.h - self.c / 24.0 + n as f64)).exp()
            })
            .sum()
    }

    /// Character at a nome q (principal branch for the fractional power).
    pub fn graded_character(&self, nome: C64) -> C64 {
        let lq = nome.ln();
        self.levels
            .iter()
            .enumerate()
            .map(|(n, l)| l.dim() as f64 * (lq * (self.h - self.c / 24.0 + n as f64)).exp())
            .sum()
    }
}

/// v_1..v_K with exp(Σ v_n z^{n+1} d/dz) z = G(z)/a1.
pub fn flow_coefficients(a: &[C64], kmax: usize) -> Vec<C64> {
    let order = kmax + 2;
    let a1 = a[0];
    let b: Vec<C64> = (0..order)
        .map(|k| {
            if k < a.len() {
                a[k] / a1
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let mut v = vec![C64::new(0.0, 0.0); kmax + 1];
    for n in 1..=kmax {
        let s = flow_series(&v, order);
        v[n] = b[n] - s[n + 1];
    }
    v
}

/// Coefficients (index = power) of exp(V) z truncated below z^order.
fn flow_series(v: &[C64], order: usize) -> Vec<C64> {
    let zero = C64::new(0.0, 0.0);
    let mut total = vec![zero; order];
    let mut term = vec![zero; order];
    term[1] = C64::new(1.0, 0.0);
    total[1] = term[1];
    for k in 1..order {
        let mut next = vec![zero; order];
        for (j, &t) in term.iter().enumerate() {
            if t == zero || j == 0 {
                continue;
            }
            // z^{n+1} d/dz z^j = j z^{j+n}
            for (n, &vn) in v.iter().enumerate().skip(1) {
                if j + n < order {
                    next[j + n] += vn * t * j as f64;
                }
            }
        }
        for x in next.iter_mut() {
            *x /= k as f64;
        }
        for (t, x) in total.iter_mut().zip(&next) {
            *t += *x;
        }
        term = next;
        if term.iter().all(|x| *x == zero) {
            break;
        }
    }
    total
}

/// Exact solve G X = B for square G.
fn solve_rational(g: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = g.len();
    let m = b.first().map(|r| r.len()).unwrap_or(0);
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|i| g[i].iter().cloned().chain(b[i].iter().cloned()).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..n + m {
                    let t = &a[col][k] * &f;
                    a[r][k] = &a[r][k] - t;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Columns u with u^T ((-1)^N G) u = 1, from an exact LDL^T factorisation of G.
fn twisted_on(g: &[Vec<BigRational>], level: usize) -> DMatrix<C64> {
    let k = g.len();
    let phase = crate::special::i_pow(level as i64);
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    // LDL^T without pivoting; fall back to a symmetric eigendecomposition.
    let mut l = vec![vec![BigRational::zero(); k]; k];
    let mut d = vec![BigRational::zero(); k];
    let mut ok = true;
    for j in 0..k {
        let mut dj = g[j][j].clone();
        for s in 0..j {
            dj -= &l[j][s] * &l[j][s] * &d[s];
        }
        if dj.is_zero() {
            ok = false;
            break;
        }
        d[j] = dj;
        l[j][j] = BigRational::one();
        for i in j + 1..k {
            let mut v = g[i][j].clone();
            for s in 0..j {
                v -= &l[i][s] * &l[j][s] * &d[s];
            }
            l[i][j] = v / &d[j];
        }
    }
    if ok {
        let lf = DMatrix::from_fn(k, k, |a, b| big_to_f64(&l[a][b]));
        let lt_inv = lf.transpose().try_inverse().expect("unit triangular");
        let mut u = DMatrix::<C64>::zeros(k, k);
        for c in 0..k {
            let dc = big_to_f64(&d[c]);
            let s = if d[c].is_positive() {
                C64::new(1.0 / dc.sqrt(), 0.0)
            } else {
                C64::new(0.0, -1.0 / (-dc).sqrt())
            };
            for r in 0..k {
                u[(r, c)] = lt_inv[(r, c)] * s * phase;
            }
        }
        u
    } else {
        let gf = DMatrix::from_fn(k, k, |a, b| big_to_f64(&g[a][b]));
        let eig = gf.symmetric_eigen();
        let mut u = DMatrix::<C64>::zeros(k, k);
        for c in 0..k {
            let lam = eig.eigenvalues[c];
            let s = if lam > 0.0 {
                C64::new(1.0 / lam.sqrt(), 0.0)
            } else {
                C64::new(0.0, -1.0 / (-lam).sqrt())
            };
            for r in 0..k {
                u[(r, c)] = eig.eigenvectors[(r, c)] * s * phase;
            }
        }
        u
    }
}

/// Coefficients a_k of a scaling map λ z (helper for tests and callers).
pub fn scaling_series(lambda: C64, len: usize) -> Vec<C64> {
    let mut a = vec![C64::new(0.0, 0.0); len];
    a[0] = lambda;
    a
}

/// Rotation e^{iθ} z as a series.
pub fn rotation_series(theta: f64, len: usize) -> Vec<C64> {
    scaling_series(cis(theta), len)
}
