//! Run configuration, on-disk caches and output helpers.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::anomaly::{triangle_anomaly, CutScheme, TriangleAnomaly};
use crate::channels::TorusModulus;
use crate::error::{CloakError, Result};
use crate::fsymbols::FSymbols;
use crate::minimal::{KacLabel, MinimalModel};
use crate::special::C64;
use crate::uniformization::TriangleGeometry;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "CLOAK_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".cloak-cache";
pub const SCHEMA_VERSION: u32 = 1;

fn cfg_err(field: &str, msg: impl Into<String>) -> CloakError {
    CloakError::Config {
        field: field.into(),
        msg: msg.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub p: u32,
    pub q: u32,
    /// `all`, `first-row`, `z2`, or an explicit list such as "(1,1) (1,3)".
    pub symmetry: String,
    /// `s11^3/2`, `1/dim`, or a number.
    pub delta0: Delta0,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            p: 3,
            q: 4,
            symmetry: "all".into(),
            delta0: Delta0::Preset("s11^3/2".into()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Delta0 {
    Value(f64),
    Preset(String),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CutoffSection {
    pub open_level: usize,
    pub closed_weight: usize,
    /// Lattice cutoff; the lowest non-trivial weight of the set when absent.
    pub h_max: Option<f64>,
}

impl Default for CutoffSection {
    fn default() -> Self {
        CutoffSection {
            open_level: crate::channels::DEFAULT_OPEN_LEVEL,
            closed_weight: crate::channels::DEFAULT_WEIGHT_CUTOFF,
            h_max: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RatioRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub ratios: Option<Vec<f64>>,
    pub range: Option<RatioRange>,
    /// `hexagonal` or `alt-periods`.
    pub torus: String,
    pub d: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            ratios: None,
            range: Some(RatioRange {
                start: 0.15,
                stop: 0.40,
                steps: 11,
            }),
            torus: "hexagonal".into(),
            d: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub precision_digits: usize,
    pub quad_tol: f64,
    pub series_order: usize,
    pub curve_points: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            precision_digits: 15,
            quad_tol: crate::channels::ANOMALY_TOL,
            series_order: crate::uniformization::DEFAULT_SERIES_ORDER,
            curve_points: crate::uniformization::DEFAULT_CURVE_POINTS,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

/// Complete run configuration (TOML).
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub cutoffs: CutoffSection,
    pub geometry: GeometrySection,
    pub numerics: NumericsSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| cfg_err("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Check every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        let model = self.minimal_model()?;
        let set = self.symmetry_set()?;
        self.delta0_value(&model, &set)?;
        let c = &self.cutoffs;
        if c.open_level > 12 {
            return Err(cfg_err(
                "cutoffs.open_level",
                format!("{} exceeds 12", c.open_level),
            ));
        }
        if c.closed_weight == 0 || c.closed_weight > 24 {
            return Err(cfg_err(
                "cutoffs.closed_weight",
                format!("{} must lie in 1..=24", c.closed_weight),
            ));
        }
        if let Some(h) = c.h_max {
            if !(h.is_finite() && h >= 0.0) {
                return Err(cfg_err(
                    "cutoffs.h_max",
                    format!("{h} must be a non-negative number"),
                ));
            }
        }
        let g = &self.geometry;
        if g.ratios.is_some() && g.range.is_some() {
            return Err(cfg_err(
                "geometry",
                "give either `ratios` or `range`, not both",
            ));
        }
        for &r in &self.grid()? {
            if !(r > 0.0 && r < 0.5) {
                return Err(cfg_err(
                    "geometry.ratios",
                    format!("R/d = {r} must lie in (0, 1/2)"),
                ));
            }
        }
        self.torus()?;
        if !(g.d.is_finite() && g.d > 0.0) {
            return Err(cfg_err("geometry.d", "edge length must be positive"));
        }
        let n = &self.numerics;
        if !(1..=17).contains(&n.precision_digits) {
            return Err(cfg_err("numerics.precision_digits", "must lie in 1..=17"));
        }
        if !(n.quad_tol > 0.0 && n.quad_tol < 1e-2) {
            return Err(cfg_err(
                "numerics.quad_tol",
                format!("{} must lie in (0, 1e-2)", n.quad_tol),
            ));
        }
        if !(4..=200).contains(&n.series_order) {
            return Err(cfg_err("numerics.series_order", "must lie in 4..=200"));
        }
        if n.curve_points < 16 {
            return Err(cfg_err("numerics.curve_points", "need at least 16 points"));
        }
        Ok(())
    }

    pub fn minimal_model(&self) -> Result<MinimalModel> {
        MinimalModel::new(self.model.p, self.model.q).map_err(|e| cfg_err("model", e.to_string()))
    }

    pub fn symmetry_set(&self) -> Result<Vec<KacLabel>> {
        let m = self.minimal_model()?;
        let set = match self.model.symmetry.trim() {
            "all" => m.labels().to_vec(),
            "first-row" => m.first_row(),
            "z2" => m.z2_set(),
            other => parse_label_list(&m, other)?,
        };
        if let Some((x, y, z)) = m.fusion_closure_violation(&set) {
            return Err(cfg_err(
                "model.symmetry",
                format!("not closed under fusion: {x} x {y} contains {z}"),
            ));
        }
        Ok(set)
    }

    pub fn delta0_value(&self, model: &MinimalModel, set: &[KacLabel]) -> Result<f64> {
        match &self.model.delta0 {
            Delta0::Value(v) if v.is_finite() && *v != 0.0 => Ok(*v),
            Delta0::Value(v) => Err(cfg_err(
                "model.delta0",
                format!("{v} must be finite and non-zero"),
            )),
            Delta0::Preset(s) if s == "s11^3/2" => Ok(model.s11().powf(1.5)),
            Delta0::Preset(s) if s == "1/dim" => Ok(1.0 / model.total_dim(set)),
            Delta0::Preset(s) => Err(cfg_err(
                "model.delta0",
                format!("unknown preset `{s}` (use s11^3/2, 1/dim or a number)"),
            )),
        }
    }

    /// h_max, defaulting to the smallest positive weight in the set.
    pub fn h_max(&self) -> Result<f64> {
        if let Some(h) = self.cutoffs.h_max {
            return Ok(h);
        }
        let m = self.minimal_model()?;
        Ok(self
            .symmetry_set()?
            .iter()
            .map(|&l| m.weight(l))
            .filter(|&h| h > 0.0)
            .reduce(f64::min)
            .unwrap_or(0.0))
    }

    /// R/d grid from `ratios` or `range` (may be empty).
    pub fn grid(&self) -> Result<Vec<f64>> {
        if let Some(r) = &self.geometry.ratios {
            if r.windows(2).any(|w| w[1] <= w[0]) {
                return Err(cfg_err("geometry.ratios", "must be strictly increasing"));
            }
            return Ok(r.clone());
        }
        match &self.geometry.range {
            None => Ok(Vec::new()),
            Some(RatioRange { steps: 0, .. }) => Ok(Vec::new()),
            Some(RatioRange {
                start,
                stop,
                steps: 1,
            }) if start == stop => Ok(vec![*start]),
            Some(RatioRange { start, stop, steps }) => {
                if !(stop > start) || *steps < 2 {
                    return Err(cfg_err(
                        "geometry.range",
                        "need start < stop and steps >= 2",
                    ));
                }
                Ok((0..*steps)
                    .map(|k| start + (stop - start) * k as f64 / (*steps - 1) as f64)
                    .collect())
            }
        }
    }

    pub fn torus(&self) -> Result<TorusModulus> {
        match self.geometry.torus.as_str() {
            "hexagonal" => Ok(TorusModulus::Hexagonal),
            "alt-periods" => Ok(TorusModulus::AltPeriods),
            other => Err(cfg_err(
                "geometry.torus",
                format!("unknown torus `{other}` (hexagonal or alt-periods)"),
            )),
        }
    }

    /// Cache directory: explicit override, then the environment, then the config.
    pub fn cache_dir(&self, flag: Option<&Path>) -> PathBuf {
        resolve_cache_dir(flag, self.output.cache_dir.as_deref())
    }
}

pub fn resolve_cache_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(f) = flag {
        return f.to_path_buf();
    }
    if let Some(e) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(e);
    }
    config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

/// Parse "(1,1) (1,3)" or "1,1; 1,3" into labels of the model.
pub fn parse_label_list(model: &MinimalModel, text: &str) -> Result<Vec<KacLabel>> {
    let cleaned: String = text
        .chars()
        .map(|c| {
            if c == '(' || c == ')' || c == ';' {
                ' '
            } else {
                c
            }
        })
        .collect();
    let mut out = Vec::new();
    for tok in cleaned.split_whitespace() {
        let parts: Vec<&str> = tok.split(',').filter(|s| !s.is_empty()).collect();
        let [r, s] = parts[..] else {
            return Err(cfg_err(
                "model.symmetry",
                format!("cannot parse label `{tok}`"),
            ));
        };
        let (r, s) = (
            r.parse::<u32>()
                .map_err(|_| cfg_err("model.symmetry", format!("bad r in `{tok}`")))?,
            s.parse::<u32>()
                .map_err(|_| cfg_err("model.symmetry", format!("bad s in `{tok}`")))?,
        );
        out.push(
            model
                .label(r, s)
                .map_err(|e| cfg_err("model.symmetry", e.to_string()))?,
        );
    }
    if out.is_empty() {
        return Err(cfg_err("model.symmetry", "empty label list"));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Hit/miss counters for the disk caches.
#[derive(Debug, Default)]
pub struct CacheStats {
    hits: AtomicU64,
    misses: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheCounts {
    pub hits: u64,
    pub misses: u64,
}

impl CacheStats {
    pub fn record(&self, hit: bool) {
        if hit {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn counts(&self) -> CacheCounts {
        CacheCounts {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }
}

/// Disk cache for F-symbols and triangle anomalies.
#[derive(Debug)]
pub struct DiskCache {
    pub dir: PathBuf,
    pub stats: Arc<CacheStats>,
}

impl DiskCache {
    pub fn new(dir: PathBuf) -> Self {
        DiskCache {
            dir,
            stats: Arc::default(),
        }
    }

    pub fn fsymbols(&self, model: &MinimalModel) -> Result<Arc<FSymbols>> {
        let (f, hit) = FSymbols::load_or_compute(&self.dir, model)?;
        self.stats.record(hit);
        Ok(f)
    }

    fn anomaly_path(&self, t: f64, order: usize, points: usize, tol: f64) -> PathBuf {
        self.dir.join(format!(
            "anomaly_t{:016x}_n{order}_c{points}_tol{:016x}.json",
            t.to_bits(),
            tol.to_bits()
        ))
    }

    /// Triangle anomaly at t (analytic cut), read from or written to disk.
    pub fn anomaly(
        &self,
        t: f64,
        order: usize,
        curve_points: usize,
        tol: f64,
    ) -> Result<TriangleAnomaly> {
        let path = self.anomaly_path(t, order, curve_points, tol);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(a) = serde_json::from_str::<TriangleAnomaly>(&text) {
                self.stats.record(true);
                return Ok(a);
            }
        }
        let geom = TriangleGeometry::new(t, order, curve_points)?;
        let a = triangle_anomaly(&geom, CutScheme::Analytic, tol)?;
        std::fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_string(&a).expect("anomaly serialises"))?;
        std::fs::rename(&tmp, &path)?;
        self.stats.record(false);
        Ok(a)
    }
}

/// Metadata block embedded in every JSON summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary<T: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub model: [u32; 2],
    pub cutoffs: serde_json::Value,
    pub precision: String,
    pub wall_time_s: f64,
    pub cache: CacheCounts,
    pub results: T,
}

impl<T: Serialize> Summary<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises") + "\n"
    }
}

/// Fixed-width scientific formatting with a digit count.
pub fn fmt_f(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), x)
}

/// Model tables as CSV: weights, fusion, S-matrix and quantum dimensions.
pub fn model_tables(model: &MinimalModel, digits: usize) -> Vec<(&'static str, String)> {
    let labels = model.labels();
    let mut weights = String::from("r,s,h,h_exact\n");
    let mut dims = String::from("r,s,dim\n");
    for &l in labels {
        weights.push_str(&format!(
            "{},{},{},{}\n",
            l.r,
            l.s,
            fmt_f(model.weight(l), digits),
            model.weight_exact(l)
        ));
        dims.push_str(&format!(
            "{},{},{}\n",
            l.r,
            l.s,
            fmt_f(model.quantum_dim(l), digits)
        ));
    }
    let mut fusion = String::from("i,j,k,N\n");
    for &i in labels {
        for &j in labels {
            for &k in labels {
                let n = model.fusion(i, j, k);
                if n != 0 {
                    fusion.push_str(&format!("\"{i}\",\"{j}\",\"{k}\",{n}\n"));
                }
            }
        }
    }
    let central = format!(
        "p,q,c,c_exact\n{},{},{},{}\n",
        model.p,
        model.q,
        fmt_f(model.central_charge(), digits),
        model.central_charge_exact()
    );
    vec![
        ("central_charge.csv", central),
        ("weights.csv", weights),
        ("fusion.csv", fusion),
        ("s_matrix.csv", s_rows(model, digits)),
        ("dims.csv", dims),
    ]
}

fn s_rows(model: &MinimalModel, digits: usize) -> String {
    let mut s = String::from("a,b,S\n");
    for &a in model.labels() {
        for &b in model.labels() {
            s.push_str(&format!(
                "\"{a}\",\"{b}\",{}\n",
                fmt_f(model.s_matrix(a, b), digits)
            ));
        }
    }
    s
}

/// τ as a complex number for the configured torus.
pub fn torus_tau(cfg: &RunConfig) -> Result<C64> {
    Ok(cfg.torus()?.tau())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.grid().unwrap().len(), 11);
        assert!(
            (c.delta0_value(&MinimalModel::ising(), &[]).unwrap() - 0.5f64.powf(1.5)).abs() < 1e-15
        );
    }

    #[test]
    fn errors_name_the_field() {
        for (text, field) in [
            ("[model]\np = 4\nq = 6\n", "model"),
            ("[model]\nsymmetry = \"(1,1) (1,2)\"\n", "model.symmetry"),
            ("[model]\ndelta0 = \"half\"\n", "model.delta0"),
            (
                "[geometry]\nratios = [0.2, 0.6]\nrange = { start = 0.1, stop = 0.2, steps = 2 }\n",
                "geometry",
            ),
            (
                "[geometry]\nrange = { start = 0.1, stop = 0.7, steps = 3 }\n",
                "geometry.ratios",
            ),
            ("[geometry]\ntorus = \"square\"\n", "geometry.torus"),
            ("[numerics]\nquad_tol = 0.5\n", "numerics.quad_tol"),
            ("[cutoffs]\nclosed_weight = 0\n", "cutoffs.closed_weight"),
            ("[model]\nbogus = 1\n", "config"),
        ] {
            match RunConfig::from_toml(text) {
                Err(CloakError::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn symmetry_presets() {
        let mut c = RunConfig::default();
        c.model.p = 4;
        c.model.q = 5;
        c.model.symmetry = "first-row".into();
        assert_eq!(c.symmetry_set().unwrap().len(), 4);
        assert!((c.h_max().unwrap() - 0.1).abs() < 1e-15);
        c.model.symmetry = "(1,1) (1,4)".into();
        assert_eq!(c.symmetry_set().unwrap().len(), 2);
        assert!((c.h_max().unwrap() - 1.5).abs() < 1e-15);
        c.model.delta0 = Delta0::Value(2.0);
        assert_eq!(
            c.delta0_value(&c.minimal_model().unwrap(), &[]).unwrap(),
            2.0
        );
    }

    #[test]
    fn cache_dir_precedence() {
        let cfg = Path::new("/from/config");
        assert_eq!(
            resolve_cache_dir(Some(Path::new("/flag")), Some(cfg)),
            PathBuf::from("/flag")
        );
        // The environment is process-global; only read it here.
        let expect = std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| cfg.to_path_buf());
        assert_eq!(resolve_cache_dir(None, Some(cfg)), expect);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(cfg_err("x", "y").exit_code(), 2);
        assert_eq!(CloakError::Numerical("n".into()).exit_code(), 3);
        assert_eq!(CloakError::SizeOverflow("s".into()).exit_code(), 4);
    }

    #[test]
    fn model_tables_for_ising() {
        let t = model_tables(&MinimalModel::ising(), 12);
        let central = &t
            .iter()
            .find(|(n, _)| *n == "central_charge.csv")
            .unwrap()
            .1;
        assert!(central.contains("1/2"));
        let fusion = &t.iter().find(|(n, _)| *n == "fusion.csv").unwrap().1;
        // σ×σ = 1 + ε gives two rows, and so on: 10 non-zero coefficients in total.
        assert_eq!(fusion.lines().count(), 1 + 10);
        let tri = model_tables(&MinimalModel::new(4, 5).unwrap(), 12);
        assert!(tri[0].1.contains("7/10"));
    }

    #[test]
    fn anomaly_cache_roundtrip() {
        let dir = std::env::temp_dir().join(format!("cloak-io-test-{}", std::process::id()));
        let cache = DiskCache::new(dir.clone());
        let a = cache.anomaly(0.7, 20, 64, 1e-7).unwrap();
        let b = cache.anomaly(0.7, 20, 64, 1e-7).unwrap();
        assert_eq!(a.a(0.5).to_bits(), b.a(0.5).to_bits());
        assert_eq!(cache.stats.counts(), CacheCounts { hits: 1, misses: 1 });
        let _ = std::fs::remove_dir_all(dir);
    }
}
