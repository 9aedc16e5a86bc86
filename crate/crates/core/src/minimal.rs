//! Chiral data of the A-series Virasoro minimal model M(p,q): Kac labels,
//! conformal weights, fusion rules, the modular S-matrix and quantum
//! dimensions.

use crate::error::{CloakError, Result};
use num_integer::Integer;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// A Kac label (r,s), stored in canonical form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KacLabel {
    pub r: u32,
    pub s: u32,
}

impl KacLabel {
    pub const fn new(r: u32, s: u32) -> Self {
        KacLabel { r, s }
    }
}

impl fmt::Display for KacLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.r, self.s)
    }
}

/// The minimal model M(p,q) with its canonical label set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimalModel {
    pub p: u32,
    pub q: u32,
    labels: Vec<KacLabel>,
}

impl PartialEq for MinimalModel {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q
    }
}

impl MinimalModel {
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if p < 3 || q < 3 {
            return Err(CloakError::InvalidModel(format!(
                "p={p}, q={q}: both must be >= 3"
            )));
        }
        if p.gcd(&q) != 1 {
            return Err(CloakError::InvalidModel(format!(
                "p={p}, q={q} are not coprime"
            )));
        }
        let mut labels = Vec::new();
        for r in 1..p {
            for s in 1..q {
                let l = canonical_pair(p, q, r, s);
                if l == KacLabel::new(r, s) {
                    labels.push(l);
                }
            }
        }
        labels.sort();
        Ok(MinimalModel { p, q, labels })
    }

    /// Shorthand for the Ising model M(3,4).
    pub fn ising() -> Self {
        Self::new(3, 4).expect("M(3,4) is valid")
    }

    pub fn is_unitary(&self) -> bool {
        self.p.abs_diff(self.q) == 1
    }

    /// t = p/q.
    pub fn t_ratio(&self) -> Rational64 {
        Rational64::new(self.p as i64, self.q as i64)
    }

    pub fn labels(&self) -> &[KacLabel] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// Position of a canonical label in `labels()`.
    pub fn index(&self, l: KacLabel) -> usize {
        self.labels
            .binary_search(&l)
            .expect("label is canonical and in range")
    }

    pub fn identity(&self) -> KacLabel {
        KacLabel::new(1, 1)
    }

    /// Canonical representative of (r,s), checking the range.
    pub fn label(&self, r: u32, s: u32) -> Result<KacLabel> {
        if r == 0 || s == 0 || r >= self.p || s >= self.q {
            return Err(CloakError::LabelOutOfRange {
                r,
                s,
                p: self.p,
                q: self.q,
            });
        }
        Ok(canonical_pair(self.p, self.q, r, s))
    }

    pub fn canonical(&self, l: KacLabel) -> KacLabel {
        canonical_pair(self.p, self.q, l.r, l.s)
    }

    /// Central charge c = 1 - 6 (p-q)^2 / (pq), exact.
    pub fn central_charge_exact(&self) -> Rational64 {
        let (p, q) = (self.p as i64, self.q as i64);
        Rational64::from_integer(1) - Rational64::new(6 * (p - q) * (p - q), p * q)
    }

    pub fn central_charge(&self) -> f64 {
        rat_f64(self.central_charge_exact())
    }

    /// h_{r,s} = ((qr - ps)^2 - (q-p)^2) / (4pq), exact.
    pub fn weight_exact(&self, l: KacLabel) -> Rational64 {
        let (p, q) = (self.p as i64, self.q as i64);
        let (r, s) = (l.r as i64, l.s as i64);
        Rational64::new((q * r - p * s).pow(2) - (q - p).pow(2), 4 * p * q)
    }

    pub fn weight(&self, l: KacLabel) -> f64 {
        rat_f64(self.weight_exact(l))
    }

    /// N_{ij}^k from the truncated su(2) x su(2) rule.
    pub fn fusion(&self, i: KacLabel, j: KacLabel, k: KacLabel) -> u32 {
        let (p, q) = (self.p, self.q);
        let direct = su2_fusion(p, i.r, j.r, k.r) * su2_fusion(q, i.s, j.s, k.s);
        let mirrored = su2_fusion(p, i.r, j.r, p - k.r) * su2_fusion(q, i.s, j.s, q - k.s);
        (direct + mirrored).min(1)
    }

    /// All k with N_{ij}^k != 0, in canonical order.
    pub fn fuse(&self, i: KacLabel, j: KacLabel) -> Vec<KacLabel> {
        self.labels
            .iter()
            .copied()
            .filter(|&k| self.fusion(i, j, k) != 0)
            .collect()
    }

    /// Modular S-matrix entry.
    pub fn s_matrix(&self, a: KacLabel, b: KacLabel) -> f64 {
        let (p, q) = (self.p as f64, self.q as f64);
        let sign = if (1 + a.s * b.r + a.r * b.s).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        2.0 * (2.0 / (p * q)).sqrt()
            * sign
            * (PI * (a.r * b.r) as f64 * q / p).sin()
            * (PI * (a.s * b.s) as f64 * p / q).sin()
    }

    pub fn s11(&self) -> f64 {
        let one = self.identity();
        self.s_matrix(one, one)
    }

    /// dim(a) = S_{a1} / S_{11}.
    pub fn quantum_dim(&self, a: KacLabel) -> f64 {
        self.s_matrix(a, self.identity()) / self.s11()
    }

    /// Total dimension Dim(J) = sum of dim(j)^2 over a label set.
    pub fn total_dim(&self, set: &[KacLabel]) -> f64 {
        set.iter().map(|&j| self.quantum_dim(j).powi(2)).sum()
    }

    /// Whether a label set closes under fusion; returns a violating product otherwise.
    pub fn fusion_closure_violation(
        &self,
        set: &[KacLabel],
    ) -> Option<(KacLabel, KacLabel, KacLabel)> {
        for &a in set {
            for &b in set {
                for k in self.fuse(a, b) {
                    if !set.contains(&k) {
                        return Some((a, b, k));
                    }
                }
            }
        }
        None
    }

    /// The generator labels f = (1,2) and f' = (2,1), when they exist.
    pub fn generator_s(&self) -> Option<KacLabel> {
        if self.q > 2 {
            Some(self.canonical(KacLabel::new(1, 2)))
        } else {
            None
        }
    }

    pub fn generator_r(&self) -> Option<KacLabel> {
        if self.p > 2 {
            Some(self.canonical(KacLabel::new(2, 1)))
        } else {
            None
        }
    }

    /// Labels of the first Kac-table row {(1,s)} with s counted along the
    /// longer side, i.e. the subcategory R used for the loop-model mapping.
    pub fn first_row(&self) -> Vec<KacLabel> {
        let mut v: Vec<KacLabel> = (1..self.q)
            .map(|s| self.canonical(KacLabel::new(1, s)))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Labels with Z2 fusion rules: 1 and (p-1,1) ~ (1,q-1).
    pub fn z2_set(&self) -> Vec<KacLabel> {
        let mut v = vec![
            self.identity(),
            self.canonical(KacLabel::new(1, self.q - 1)),
        ];
        v.sort();
        v
    }
}

fn canonical_pair(p: u32, q: u32, r: u32, s: u32) -> KacLabel {
    let a = KacLabel::new(r, s);
    let b = KacLabel::new(p - r, q - s);
    if (b.r, b.s) < (a.r, a.s) {
        b
    } else {
        a
    }
}

/// su(2) fusion at level k-2 with labels 1..k-1.
fn su2_fusion(k: u32, a: u32, b: u32, c: u32) -> u32 {
    if c == 0 || c >= k {
        return 0;
    }
    let (a, b, c) = (a as i64, b as i64, c as i64);
    let k = k as i64;
    let ok = (a - b).abs() < c && c < a + b && c < 2 * k - a - b && (a + b + c) % 2 == 1;
    ok as u32
}

pub fn rat_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
