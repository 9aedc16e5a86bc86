//! Lattice models on the doubly periodic hexagonal lattice: exact contraction
//! of the clipped-triangle amplitudes, the Ising map, the RSOS height model
//! and its loop-model rewrite.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{cloaking_triangle_table, TriangleAmplitudeTable, TriangleLabels};
use crate::error::{CloakError, Result};
use crate::fsymbols::FSymbols;
use crate::minimal::{KacLabel, MinimalModel};
use crate::special::brent;
use crate::uniformization::{
    ratio_of_t, t_of_ratio, x_of_t, TriangleGeometry, DEFAULT_SERIES_ORDER,
};
use crate::virasoro::rocha_caridi_dims;

/// Node budget for the brute-force enumeration.
pub const ENUMERATION_LIMIT: u64 = 2_000_000_000;
/// Largest cut space for the transfer matrix.
pub const TRANSFER_LIMIT: u64 = 5_000_000;

/// A trivalent vertex. `edges` are counter-clockwise; `faces[0]` lies between
/// edges 3 and 1, `faces[1]` between 1 and 2, `faces[2]` between 2 and 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub edges: [usize; 3],
    pub faces: [usize; 3],
    /// True for the sublattice at which every incident edge starts.
    pub tail: bool,
}

/// An edge oriented tail → head, with the hexagons on its left and right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub left: usize,
    pub right: usize,
    /// Cell displacement from tail to head in the universal cover.
    pub shift: [i32; 2],
}

/// Hexagonal lattice on an M×N torus (one hexagon and two vertices per cell).
///
/// Vertex A(i,j) sits at the cell origin and B(i,j) one unit above it, with
/// lattice vectors (√3, 0) and (√3/2, 3/2).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub m: usize,
    pub n: usize,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl LatticeSpec {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(CloakError::Config {
                field: "lattice".into(),
                msg: format!("torus {m}x{n} must be at least 2x2"),
            });
        }
        let cell =
            |i: i64, j: i64| (i.rem_euclid(m as i64) + m as i64 * j.rem_euclid(n as i64)) as usize;
        let a = |i: i64, j: i64| 2 * cell(i, j);
        let b = |i: i64, j: i64| 2 * cell(i, j) + 1;
        let up = |i: i64, j: i64| 3 * cell(i, j);
        let left = |i: i64, j: i64| 3 * cell(i, j) + 1;
        let right = |i: i64, j: i64| 3 * cell(i, j) + 2;
        let mut edges = vec![
            Edge {
                tail: 0,
                head: 0,
                left: 0,
                right: 0,
                shift: [0, 0]
            };
            3 * m * n
        ];
        let mut vertices = vec![
            Vertex {
                edges: [0; 3],
                faces: [0; 3],
                tail: true
            };
            2 * m * n
        ];
        for j in 0..n as i64 {
            for i in 0..m as i64 {
                edges[up(i, j)] = Edge {
                    tail: a(i, j),
                    head: b(i, j),
                    left: cell(i - 1, j),
                    right: cell(i, j),
                    shift: [0, 0],
                };
                edges[left(i, j)] = Edge {
                    tail: a(i, j),
                    head: b(i, j - 1),
                    left: cell(i, j - 1),
                    right: cell(i - 1, j),
                    shift: [0, -1],
                };
                edges[right(i, j)] = Edge {
                    tail: a(i, j),
                    head: b(i + 1, j - 1),
                    left: cell(i, j),
                    right: cell(i, j - 1),
                    shift: [1, -1],
                };
                vertices[a(i, j)] = Vertex {
                    edges: [up(i, j), left(i, j), right(i, j)],
                    faces: [cell(i, j), cell(i - 1, j), cell(i, j - 1)],
                    tail: true,
                };
                vertices[b(i, j)] = Vertex {
                    edges: [left(i, j + 1), right(i - 1, j + 1), up(i, j)],
                    faces: [cell(i, j), cell(i - 1, j + 1), cell(i - 1, j)],
                    tail: false,
                };
            }
        }
        Ok(LatticeSpec {
            m,
            n,
            vertices,
            edges,
        })
    }

    pub fn num_faces(&self) -> usize {
        self.m * self.n
    }

    /// Number of triangles of the dual lattice (= hexagonal vertices).
    pub fn num_triangles(&self) -> usize {
        self.vertices.len()
    }

    /// Label pair (first, second) of an edge as read from one of its endpoints.
    pub fn read_pair(&self, e: usize, tail: bool) -> (usize, usize) {
        let ed = &self.edges[e];
        if tail {
            (ed.left, ed.right)
        } else {
            (ed.right, ed.left)
        }
    }

    /// Edge pairs of hexagons that share an edge (the triangular-lattice bonds).
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.left, e.right)).collect()
    }
}

/// One normalised boundary field κ^{(ab)}_{iα}: `index` is its position in the
/// ON basis of the module of `field`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState {
    pub a: KacLabel,
    pub b: KacLabel,
    pub field: KacLabel,
    pub level: usize,
    pub index: usize,
}

/// All κ^{(ab)}_{iα} with a, b, i in the set, N_{ib}^a ≠ 0 and h_i + level ≤ h_max.
pub fn truncated_basis(
    model: &MinimalModel,
    set: &[KacLabel],
    h_max: f64,
) -> Result<Vec<BasisState>> {
    if let Some((x, y, z)) = model.fusion_closure_violation(set) {
        return Err(CloakError::NotFusionClosed(
            x.to_string(),
            y.to_string(),
            z.to_string(),
        ));
    }
    let mut out = Vec::new();
    for &a in set {
        for &b in set {
            for &i in set {
                if model.fusion(i, b, a) == 0 {
                    continue;
                }
                let h = model.weight(i);
                if h > h_max + 1e-12 {
                    continue;
                }
                let top = (h_max - h + 1e-12).floor() as usize;
                let dims = rocha_caridi_dims(model.p, model.q, i, top);
                let mut offset = 0;
                for (level, &d) in dims.iter().enumerate() {
                    for k in 0..d as usize {
                        out.push(BasisState {
                            a,
                            b,
                            field: i,
                            level,
                            index: offset + k,
                        });
                    }
                    offset += d as usize;
                }
            }
        }
    }
    Ok(out)
}

/// Triangle table sized for a truncated basis.
pub fn lattice_table(
    fs: &FSymbols,
    set: &[KacLabel],
    basis: &[BasisState],
    t: f64,
    d: f64,
    delta0: f64,
    anomaly: f64,
) -> Result<TriangleAmplitudeTable> {
    let level = basis.iter().map(|s| s.level).max().unwrap_or(0);
    let geom = TriangleGeometry::series_only(t, DEFAULT_SERIES_ORDER)?;
    cloaking_triangle_table(fs, set, delta0, level, &geom, d, anomaly)
}

/// Vertex weights W(s₁,s₂,s₃) for edge states read from a tail or a head vertex.
struct VertexWeights {
    n: usize,
    tail: Vec<f64>,
    head: Vec<f64>,
}

impl VertexWeights {
    fn new(table: &TriangleAmplitudeTable, basis: &[BasisState]) -> Self {
        let n = basis.len();
        let mut tail = vec![0.0; n * n * n];
        let mut head = vec![0.0; n * n * n];
        for (w, flip) in [(&mut tail, false), (&mut head, true)] {
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        let read = |s: &BasisState| if flip { (s.b, s.a) } else { (s.a, s.b) };
                        let (s1, s2, s3) = (read(&basis[x]), read(&basis[y]), read(&basis[z]));
                        // κ₁ ∈ H_{ba}, κ₂ ∈ H_{cb}, κ₃ ∈ H_{ac}.
                        let (b, a) = s1;
                        if s2.1 != b || s3.0 != a || s2.0 != s3.1 {
                            continue;
                        }
                        let l = TriangleLabels {
                            a,
                            b,
                            c: s2.0,
                            i: basis[x].field,
                            j: basis[y].field,
                            k: basis[z].field,
                        };
                        w[(x * n + y) * n + z] = table
                            .entry(l, [basis[x].index, basis[y].index, basis[z].index])
                            .re;
                    }
                }
            }
        }
        VertexWeights { n, tail, head }
    }

    fn get(&self, tail: bool, s: [usize; 3]) -> f64 {
        let i = (s[0] * self.n + s[1]) * self.n + s[2];
        if tail {
            self.tail[i]
        } else {
            self.head[i]
        }
    }
}

/// Contraction route for `lattice_z_exact`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZMethod {
    BruteForce,
    TransferMatrix,
}

/// Σ_α Π_v T(κ_{α(v₁)}, κ_{α(v₂)}, κ_{α(v₃)}) with the same basis vector read
/// from both ends of an edge.
pub fn lattice_z_exact(
    lattice: &LatticeSpec,
    table: &TriangleAmplitudeTable,
    basis: &[BasisState],
    method: ZMethod,
) -> Result<f64> {
    if basis.len() > u16::MAX as usize {
        return Err(CloakError::SizeOverflow(format!(
            "{} edge states",
            basis.len()
        )));
    }
    let w = VertexWeights::new(table, basis);
    match method {
        ZMethod::BruteForce => brute_force(lattice, basis, &w),
        ZMethod::TransferMatrix => transfer_matrix(lattice, &w),
    }
}

fn brute_force(lattice: &LatticeSpec, basis: &[BasisState], w: &VertexWeights) -> Result<f64> {
    let ne = lattice.edges.len();
    // Vertices completed by each edge.
    let mut last = vec![0usize; lattice.vertices.len()];
    for (v, vx) in lattice.vertices.iter().enumerate() {
        last[v] = *vx.edges.iter().max().unwrap();
    }
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); ne];
    for (v, &e) in last.iter().enumerate() {
        closes[e].push(v);
    }
    let first: Vec<usize> = (0..basis.len()).collect();
    let parts: Vec<(f64, u64)> = first
        .par_iter()
        .map(|&s0| {
            let mut st = Search {
                lattice,
                basis,
                w,
                closes: &closes,
                assign: vec![usize::MAX; ne],
                faces: vec![(None, 0); lattice.num_faces()],
                nodes: 0,
            };
            let z = if st.place(0, s0) {
                st.descend(1, 1.0)
            } else {
                Some(0.0)
            };
            (z.unwrap_or(f64::NAN), st.nodes)
        })
        .collect();
    if parts.iter().any(|(z, _)| z.is_nan()) {
        return Err(CloakError::SizeOverflow(format!(
            "brute-force enumeration exceeded {ENUMERATION_LIMIT} nodes on {}x{}; use the transfer matrix",
            lattice.m, lattice.n
        )));
    }
    Ok(parts.iter().map(|(z, _)| z).sum())
}

struct Search<'a> {
    lattice: &'a LatticeSpec,
    basis: &'a [BasisState],
    w: &'a VertexWeights,
    closes: &'a [Vec<usize>],
    assign: Vec<usize>,
    faces: Vec<(Option<KacLabel>, u32)>,
    nodes: u64,
}

impl Search<'_> {
    fn bind(&mut self, f: usize, l: KacLabel) -> bool {
        match self.faces[f] {
            (Some(x), _) if x != l => false,
            (_, c) => {
                self.faces[f] = (Some(l), c + 1);
                true
            }
        }
    }

    fn unbind(&mut self, f: usize) {
        let (l, c) = self.faces[f];
        self.faces[f] = if c == 1 { (None, 0) } else { (l, c - 1) };
    }

    /// Assign edge e, keeping the face labels consistent.
    fn place(&mut self, e: usize, s: usize) -> bool {
        let ed = self.lattice.edges[e];
        let st = self.basis[s];
        if !self.bind(ed.left, st.a) {
            return false;
        }
        if !self.bind(ed.right, st.b) {
            self.unbind(ed.left);
            return false;
        }
        self.assign[e] = s;
        true
    }

    fn remove(&mut self, e: usize) {
        let ed = self.lattice.edges[e];
        self.unbind(ed.left);
        self.unbind(ed.right);
        self.assign[e] = usize::MAX;
    }

    fn close(&self, e: usize) -> f64 {
        let mut p = 1.0;
        for &v in &self.closes[e] {
            let vx = &self.lattice.vertices[v];
            p *= self.w.get(vx.tail, vx.edges.map(|x| self.assign[x]));
            if p == 0.0 {
                break;
            }
        }
        p
    }

    fn descend(&mut self, e: usize, acc: f64) -> Option<f64> {
        let acc = acc * self.close(e - 1);
        if acc == 0.0 {
            return Some(0.0);
        }
        if e == self.lattice.edges.len() {
            return Some(acc);
        }
        self.nodes += 1;
        if self.nodes > ENUMERATION_LIMIT {
            return None;
        }
        let mut z = 0.0;
        for s in 0..self.basis.len() {
            if self.place(e, s) {
                let r = self.descend(e + 1, acc);
                self.remove(e);
                z += r?;
            }
        }
        Some(z)
    }
}

type Cut = Vec<u16>;

/// Row-to-row transfer matrix on the cut of slanted edges between rows.
fn transfer_matrix(lattice: &LatticeSpec, w: &VertexWeights) -> Result<f64> {
    let (m, n, s) = (lattice.m, lattice.n, w.n);
    let size = (s as u64).checked_pow(2 * m as u32).unwrap_or(u64::MAX);
    if size > TRANSFER_LIMIT {
        return Err(CloakError::SizeOverflow(format!(
            "transfer-matrix cut space {s}^{} exceeds {TRANSFER_LIMIT}",
            2 * m
        )));
    }
    // For each below pair (left, right) at A(i): map (u, w) above → Σ_s W_A W_B.
    let mut local: BTreeMap<(u16, u16), BTreeMap<(u16, u16), f64>> = BTreeMap::new();
    for l in 0..s {
        for r in 0..s {
            let mut opts: BTreeMap<(u16, u16), f64> = BTreeMap::new();
            for mid in 0..s {
                let wa = w.get(true, [mid, l, r]);
                if wa == 0.0 {
                    continue;
                }
                for u in 0..s {
                    for v in 0..s {
                        let wb = w.get(false, [u, v, mid]);
                        if wb != 0.0 {
                            *opts.entry((u as u16, v as u16)).or_default() += wa * wb;
                        }
                    }
                }
            }
            if !opts.is_empty() {
                local.insert((l as u16, r as u16), opts);
            }
        }
    }
    let row = |c: &Cut| -> Vec<(Cut, f64)> {
        let mut out: Vec<(Cut, f64)> = vec![(vec![0; 2 * m], 1.0)];
        for i in 0..m {
            let Some(opts) = local.get(&(c[2 * i], c[2 * i + 1])) else {
                return Vec::new();
            };
            let mut next = Vec::with_capacity(out.len() * opts.len());
            for (cut, wt) in &out {
                for (&(u, v), &x) in opts {
                    let mut c2 = cut.clone();
                    c2[2 * i] = u;
                    c2[2 * ((i + m - 1) % m) + 1] = v;
                    next.push((c2, wt * x));
                }
            }
            out = next;
        }
        out
    };
    let starts: Vec<Cut> = (0..size)
        .map(|mut k| {
            let mut c = vec![0u16; 2 * m];
            for x in c.iter_mut() {
                *x = (k % s as u64) as u16;
                k /= s as u64;
            }
            c
        })
        .filter(|c| (0..m).all(|i| local.contains_key(&(c[2 * i], c[2 * i + 1]))))
        .collect();
    let diag: Vec<f64> = starts
        .par_iter()
        .map(|c0| {
            let mut v: BTreeMap<Cut, f64> = BTreeMap::new();
            v.insert(c0.clone(), 1.0);
            for _ in 0..n {
                let mut nv: BTreeMap<Cut, f64> = BTreeMap::new();
                for (c, x) in &v {
                    for (c2, y) in row(c) {
                        *nv.entry(c2).or_default() += x * y;
                    }
                }
                v = nv;
            }
            v.get(c0).copied().unwrap_or(0.0)
        })
        .collect();
    Ok(diag.iter().sum())
}

/// Standard Ising partition function Σ_s Π_bonds e^{β s s'} with spins on
/// the hexagons (the triangular lattice).
pub fn ising_z(lattice: &LatticeSpec, beta: f64) -> Result<f64> {
    let nf = lattice.num_faces();
    if nf > 30 {
        return Err(CloakError::SizeOverflow(format!(
            "2^{nf} spin configurations"
        )));
    }
    let bonds = lattice.bonds();
    Ok((0..1u64 << nf)
        .map(|cfg| {
            let e: i64 = bonds
                .iter()
                .map(|&(x, y)| {
                    if (cfg >> x & 1) == (cfg >> y & 1) {
                        1
                    } else {
                        -1
                    }
                })
                .sum();
            (beta * e as f64).exp()
        })
        .sum())
}

/// x(R) = (4/(3√3 X))^{2h_f}.
pub fn x_of_r(h_f: f64, t: f64) -> f64 {
    (4.0 / (3.0 * 3f64.sqrt() * x_of_t(t))).powf(2.0 * h_f)
}

/// Small-hole limit of x(R), (16/27)^{h_f}.
pub fn x_max(h_f: f64) -> f64 {
    (16.0f64 / 27.0).powf(h_f)
}

/// F_{d,R} = e^A δ₀^{1/2} S₁₁^{−1/4}.
pub fn f_scale(model: &MinimalModel, anomaly: f64, delta0: f64) -> f64 {
    anomaly.exp() * delta0.sqrt() * model.s11().powf(-0.25)
}

/// Quantities of the map to the triangular-lattice Ising model.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IsingMap {
    pub p: u32,
    pub h_f: f64,
    pub r_over_d: f64,
    pub x: f64,
    pub beta: f64,
    pub x_max: f64,
    pub beta_min: f64,
    pub beta_star: f64,
    /// Whether the reachable range (β_min, ∞) contains β*.
    pub covers_critical: bool,
}

/// The Z₂ label set {1, f} and h_f for the two supported models.
pub fn ising_z2_set(model: &MinimalModel) -> Result<(Vec<KacLabel>, KacLabel)> {
    match (model.p, model.q) {
        (3, 4) | (4, 5) => {
            let f = model.label(1, model.p)?;
            Ok((vec![model.identity(), f], f))
        }
        (p, q) => Err(CloakError::Unsupported(format!(
            "Ising map is defined for M(3,4) and M(4,5), not M({p},{q})"
        ))),
    }
}

pub fn ising_map(model: &MinimalModel, r_over_d: f64) -> Result<IsingMap> {
    let (_, f) = ising_z2_set(model)?;
    let h_f = model.weight(f);
    let t = t_of_ratio(r_over_d)?;
    let x = x_of_r(h_f, t);
    let xm = x_max(h_f);
    let beta_min = -0.5 * xm.ln();
    let beta_star = 3f64.ln() / 4.0;
    Ok(IsingMap {
        p: model.p,
        h_f,
        r_over_d,
        x,
        beta: -0.5 * x.ln(),
        x_max: xm,
        beta_min,
        beta_star,
        covers_critical: beta_min < beta_star,
    })
}

/// Heights a = 1..p ↔ first-row labels (1,a); T_{abc} on faces of the dual lattice.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RsosWeights {
    pub p: u32,
    pub t: f64,
    pub f: f64,
    pub x: f64,
    /// dim(1,a) for a = 1..p (index a−1).
    pub dims: Vec<f64>,
}

impl RsosWeights {
    /// T_{abc} for heights 1..p, zero unless all three agree or two agree and
    /// the third is adjacent.
    pub fn t(&self, a: u32, b: u32, c: u32) -> f64 {
        let (x, y) = if a == b && b == c {
            return self.f;
        } else if a == b {
            (a, c)
        } else if b == c {
            (b, a)
        } else if c == a {
            (c, b)
        } else {
            return 0.0;
        };
        if x.abs_diff(y) != 1 {
            return 0.0;
        }
        self.f * self.x * (self.dims[y as usize - 1] / self.dims[x as usize - 1]).powf(1.0 / 6.0)
    }
}

/// RSOS weights of 𝓡 = {(1,s)} at cutoff h_(1,2) for M(p,p+1).
pub fn rsos_weights(
    model: &MinimalModel,
    t: f64,
    anomaly: f64,
    delta0: f64,
) -> Result<RsosWeights> {
    if !model.is_unitary() {
        return Err(CloakError::Unsupported(format!(
            "RSOS weights need a unitary model, got M({},{})",
            model.p, model.q
        )));
    }
    let f = model.label(1, 2)?;
    let dims = model
        .first_row()
        .iter()
        .map(|&a| model.quantum_dim(a))
        .collect();
    Ok(RsosWeights {
        p: model.p,
        t,
        f: f_scale(model, anomaly, delta0),
        x: x_of_r(model.weight(f), t),
        dims,
    })
}

/// Σ_φ Π_v T_{φ(v(1))φ(v(2))φ(v(3))} over heights φ : hexagons → {1..p}.
pub fn rsos_z(lattice: &LatticeSpec, w: &RsosWeights) -> Result<f64> {
    let nf = lattice.num_faces() as u32;
    let p = w.p as u64;
    let total = p
        .checked_pow(nf)
        .filter(|&x| x <= 1 << 32)
        .ok_or_else(|| CloakError::SizeOverflow(format!("{p}^{nf} height configurations")))?;
    let verts: Vec<[usize; 3]> = lattice.vertices.iter().map(|v| v.faces).collect();
    let parts: Vec<f64> = (0..p)
        .into_par_iter()
        .map(|h0| {
            let mut z = 0.0;
            let mut h = vec![0u32; nf as usize];
            for k in 0..total / p {
                h[0] = h0 as u32 + 1;
                let mut r = k;
                for x in h.iter_mut().skip(1) {
                    *x = (r % p) as u32 + 1;
                    r /= p;
                }
                let mut prod = 1.0;
                for f in &verts {
                    prod *= w.t(h[f[0]], h[f[1]], h[f[2]]);
                    if prod == 0.0 {
                        break;
                    }
                }
                z += prod;
            }
            z
        })
        .collect();
    Ok(parts.iter().sum())
}

/// A set of disjoint cycles on the hexagonal lattice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub edges: Vec<usize>,
    /// |L|.
    pub length: usize,
    /// d(L).
    pub contractible: usize,
    /// w(L).
    pub winding: usize,
    /// Homology class (in units of the torus periods) of each winding loop.
    pub classes: Vec<[i32; 2]>,
}

impl LoopConfig {
    /// Decompose an edge subset into loops; None unless every vertex has degree 0 or 2.
    pub fn from_edges(lattice: &LatticeSpec, edges: Vec<usize>) -> Option<Self> {
        let mut inc: Vec<Vec<usize>> = vec![Vec::new(); lattice.vertices.len()];
        for &e in &edges {
            inc[lattice.edges[e].tail].push(e);
            inc[lattice.edges[e].head].push(e);
        }
        if inc.iter().any(|v| !(v.is_empty() || v.len() == 2)) {
            return None;
        }
        let mut seen = vec![false; lattice.edges.len()];
        let (mut contractible, mut classes) = (0, Vec::new());
        for &e0 in &edges {
            if seen[e0] {
                continue;
            }
            // Walk the loop, accumulating the displacement in the cover.
            let mut disp = [0i32; 2];
            let (mut e, mut at) = (e0, lattice.edges[e0].tail);
            loop {
                seen[e] = true;
                let ed = lattice.edges[e];
                let sign = if at == ed.tail { 1 } else { -1 };
                disp[0] += sign * ed.shift[0];
                disp[1] += sign * ed.shift[1];
                at = if at == ed.tail { ed.head } else { ed.tail };
                e = if inc[at][0] == e {
                    inc[at][1]
                } else {
                    inc[at][0]
                };
                if e == e0 {
                    break;
                }
            }
            let class = [disp[0] / lattice.m as i32, disp[1] / lattice.n as i32];
            if class == [0, 0] {
                contractible += 1;
            } else {
                classes.push(class);
            }
        }
        Some(LoopConfig {
            length: edges.len(),
            edges,
            contractible,
            winding: classes.len(),
            classes,
        })
    }

    /// Domain walls of a height configuration.
    pub fn from_heights(lattice: &LatticeSpec, h: &[u32]) -> Option<Self> {
        let edges = (0..lattice.edges.len())
            .filter(|&e| h[lattice.edges[e].left] != h[lattice.edges[e].right])
            .collect();
        Self::from_edges(lattice, edges)
    }
}

/// All loop configurations on the lattice.
pub fn loop_configs(lattice: &LatticeSpec) -> Result<Vec<LoopConfig>> {
    let ne = lattice.edges.len();
    if ne > 60 {
        return Err(CloakError::SizeOverflow(format!(
            "loop enumeration on {ne} edges"
        )));
    }
    let mut last = vec![0usize; lattice.vertices.len()];
    for (v, vx) in lattice.vertices.iter().enumerate() {
        last[v] = *vx.edges.iter().max().unwrap();
    }
    let mut out = Vec::new();
    let mut deg = vec![0u8; lattice.vertices.len()];
    let mut chosen = Vec::new();
    fn rec(
        e: usize,
        lat: &LatticeSpec,
        last: &[usize],
        deg: &mut [u8],
        chosen: &mut Vec<usize>,
        out: &mut Vec<LoopConfig>,
    ) {
        if e == lat.edges.len() {
            if let Some(c) = LoopConfig::from_edges(lat, chosen.clone()) {
                out.push(c);
            }
            return;
        }
        let ed = lat.edges[e];
        for take in [false, true] {
            if take {
                deg[ed.tail] += 1;
                deg[ed.head] += 1;
                chosen.push(e);
            }
            let ok = [ed.tail, ed.head]
                .iter()
                .all(|&v| deg[v] <= 2 && (last[v] != e || deg[v].is_multiple_of(2)));
            if ok {
                rec(e + 1, lat, last, deg, chosen, out);
            }
            if take {
                deg[ed.tail] -= 1;
                deg[ed.head] -= 1;
                chosen.pop();
            }
        }
    }
    rec(0, lattice, &last, &mut deg, &mut chosen, &mut out);
    Ok(out)
}

/// Z = Σ_L x^{|L|} n^{d(L)} ñ^{w(L)}.
pub fn loop_z(lattice: &LatticeSpec, x: f64, n: f64, n_tilde: f64) -> Result<f64> {
    Ok(loop_configs(lattice)?
        .iter()
        .map(|c| {
            x.powi(c.length as i32) * n.powi(c.contractible as i32) * n_tilde.powi(c.winding as i32)
        })
        .sum())
}

/// ξ_a = cos(πa/(p+1))/cos(π/(p+1)) for a = 1..p.
pub fn xi(p: u32) -> Vec<f64> {
    let q = (p + 1) as f64;
    (1..=p)
        .map(|a| (PI * a as f64 / q).cos() / (PI / q).cos())
        .collect()
}

/// F^{|V|} Σ_a Σ_L x^{|L|} dim(f)^{d(L)} (dim(f) ξ_a)^{w(L)}.
pub fn rsos_loop_z(lattice: &LatticeSpec, w: &RsosWeights) -> Result<f64> {
    let n = 2.0 * (PI / (w.p + 1) as f64).cos();
    let configs = loop_configs(lattice)?;
    let mut z = 0.0;
    for xa in xi(w.p) {
        z += configs
            .iter()
            .map(|c| {
                w.x.powi(c.length as i32)
                    * n.powi(c.contractible as i32)
                    * (n * xa).powi(c.winding as i32)
            })
            .sum::<f64>();
    }
    Ok(w.f.powi(lattice.num_triangles() as i32) * z)
}

/// Outcome of comparing the height model with its loop rewrite.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LoopCheck {
    pub p: u32,
    pub m: usize,
    pub n: usize,
    pub x: f64,
    pub z_rsos: f64,
    pub z_loop: f64,
    pub residual: f64,
}

/// |Z_RSOS − Z_loop| / |Z_RSOS| for weights already fixed.
pub fn loop_equivalence(lattice: &LatticeSpec, w: &RsosWeights) -> Result<LoopCheck> {
    let z_rsos = rsos_z(lattice, w)?;
    let z_loop = rsos_loop_z(lattice, w)?;
    Ok(LoopCheck {
        p: w.p,
        m: lattice.m,
        n: lattice.n,
        x: w.x,
        z_rsos,
        z_loop,
        residual: (z_rsos - z_loop).abs() / z_rsos.abs(),
    })
}

/// Loop check at the x(R) of a given t, with A = 0 and δ₀ = S₁₁^{3/2}
/// (F enters both sides as the same power).
pub fn loop_equivalence_check(p: u32, t: f64, lattice: &LatticeSpec) -> Result<LoopCheck> {
    let model = MinimalModel::new(p, p + 1)?;
    loop_equivalence(
        lattice,
        &rsos_weights(&model, t, 0.0, model.s11().powf(1.5))?,
    )
}

/// Critical points of the loop model obtained from M(p,p+1).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhasePoints {
    pub p: u32,
    pub n: f64,
    pub x_c: f64,
    pub x_0: f64,
    pub x_max: f64,
    pub c_c: f64,
    pub c_0: f64,
    pub r_c_over_d: f64,
    pub r_0_over_d: f64,
}

/// R/d at which x(R) takes a given value.
pub fn ratio_for_x(h_f: f64, x: f64) -> Result<f64> {
    let (lo, hi) = (1e-3, 40.0);
    let g = |t: f64| x_of_r(h_f, t).ln() - x.ln();
    let t = brent(g, lo, hi, 1e-14).ok_or_else(|| {
        CloakError::Numerical(format!(
            "no root of x(R) = {x} for t in [{lo}, {hi}] (g = {:.3e}, {:.3e})",
            g(lo),
            g(hi)
        ))
    })?;
    Ok(ratio_of_t(t))
}

pub fn phase_points(p: u32) -> Result<PhasePoints> {
    if p < 3 {
        return Err(CloakError::InvalidModel(format!(
            "phase points need p >= 3, got {p}"
        )));
    }
    let model = MinimalModel::new(p, p + 1)?;
    let n = 2.0 * (PI / (p + 1) as f64).cos();
    let s = (2.0 - n).sqrt();
    let (x_c, x_0) = (1.0 / (2.0 + s).sqrt(), 1.0 / (2.0 - s).sqrt());
    let pf = p as f64;
    let h_f = model.weight(model.label(1, 2)?);
    Ok(PhasePoints {
        p,
        n,
        x_c,
        x_0,
        x_max: (2.0 / 3f64.powf(0.75)).powf((pf - 2.0) / (pf + 1.0)),
        c_c: 1.0 - 6.0 / ((pf + 1.0) * (pf + 2.0)),
        c_0: 1.0 - 6.0 / (pf * (pf + 1.0)),
        r_c_over_d: ratio_for_x(h_f, x_c)?,
        r_0_over_d: ratio_for_x(h_f, x_0)?,
    })
}

pub fn phase_points_csv(rows: &[PhasePoints]) -> String {
    let mut s = String::from("p,n,x_c,x_0,x_max,c_c,c_0,r_c_over_d,r_0_over_d\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.p, r.n, r.x_c, r.x_0, r.x_max, r.c_c, r.c_0, r.r_c_over_d, r.r_0_over_d
        ));
    }
    s
}
