//! `cloak`: command-line front end for cloak-core.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cloak_core::channels::{channel_compare_with, TorusModulus};
use cloak_core::io::{fmt_f, model_tables, DiskCache, RunConfig, Summary, SCHEMA_VERSION};
use cloak_core::lattice::{
    f_scale, ising_map, ising_z, ising_z2_set, lattice_table, lattice_z_exact, loop_equivalence,
    phase_points, phase_points_csv, rsos_weights, truncated_basis, x_of_r, LatticeSpec, ZMethod,
};
use cloak_core::uniformization::t_of_ratio;
use cloak_core::{CloakError, FSymbols, MinimalModel, Result};

#[derive(Parser, Debug)]
#[command(
    name = "cloak",
    version,
    about = "Cloaking-boundary lattice models from minimal-model CFT data"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, short = 'j', global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cache directory (overrides CLOAK_CACHE_DIR and the config).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    q: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weights, fusion rules, S-matrix, quantum dimensions and the F-symbol cache.
    ModelData {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Open vs closed channel of the one-hole torus amplitude on an R/d grid.
    OneHole {
        #[command(flatten)]
        model: ModelArgs,
        /// Drop the anomaly factors from both channels.
        #[arg(long)]
        no_anomaly: bool,
        /// Comma-separated R/d values (replaces the config grid).
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        open_level: Option<usize>,
        #[arg(long)]
        closed_weight: Option<usize>,
        /// hexagonal or alt-periods.
        #[arg(long)]
        torus: Option<String>,
    },
    /// Map to the triangular-lattice Ising model (M(3,4) or M(4,5)).
    IsingMap {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.3")]
        ratio: Vec<f64>,
        /// Tori (e.g. 2x2,2x3) on which to verify the identity by enumeration.
        #[arg(long, value_delimiter = ',')]
        verify: Vec<String>,
    },
    /// T_abc of the RSOS model for M(p,p+1).
    RsosWeights {
        #[arg(long, default_value_t = 3)]
        p: u32,
        #[arg(long, default_value_t = 0.3)]
        ratio: f64,
        /// Set A = 0 in F.
        #[arg(long)]
        no_anomaly: bool,
    },
    /// RSOS height model vs its loop-model rewrite by exact enumeration.
    LoopCheck {
        #[arg(long, value_delimiter = ',', default_value = "3")]
        p: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "2x2")]
        lattice: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.4")]
        ratios: Vec<f64>,
    },
    /// x_c, x_0, x_max, central charges and critical radii.
    PhasePoints {
        /// A range such as 3..8 (inclusive) or a list 3,5,7.
        #[arg(long, default_value = "3..12")]
        p: String,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    cache: DiskCache,
    start: Instant,
}

impl Ctx {
    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        std::fs::write(&path, text)?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn summary<T: serde::Serialize>(
        &self,
        command: &str,
        cutoffs: serde_json::Value,
        results: T,
    ) -> Result<PathBuf> {
        let s = Summary {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            model: [self.cfg.model.p, self.cfg.model.q],
            cutoffs,
            precision: "f64".into(),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            cache: self.cache.stats.counts(),
            results,
        };
        self.write(&format!("{command}.json"), &s.to_json())
    }

    fn digits(&self) -> usize {
        self.cfg.numerics.precision_digits
    }
}

fn set_model(cfg: &mut RunConfig, p: Option<u32>, q: Option<u32>) -> Result<()> {
    if let Some(p) = p {
        cfg.model.p = p;
        cfg.model.q = q.unwrap_or(p + 1);
    } else if let Some(q) = q {
        cfg.model.q = q;
    }
    cfg.validate()
}

fn parse_lattice(s: &str) -> Result<LatticeSpec> {
    let bad = || CloakError::Config {
        field: "lattice".into(),
        msg: format!("expected MxN, got `{s}`"),
    };
    let (m, n) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    LatticeSpec::new(m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?)
}

fn parse_p_range(s: &str) -> Result<Vec<u32>> {
    let bad = || CloakError::Config {
        field: "p".into(),
        msg: format!("expected a..b or a list, got `{s}`"),
    };
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect()
}

fn anomaly_a(ctx: &Ctx, model: &MinimalModel, t: f64) -> Result<f64> {
    let n = &ctx.cfg.numerics;
    let an = ctx
        .cache
        .anomaly(t, n.series_order, n.curve_points, n.quad_tol)?;
    Ok(an.a_at(model.central_charge(), ctx.cfg.geometry.d))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CloakError::Config {
                field: "jobs".into(),
                msg: e.to_string(),
            })?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let cache = DiskCache::new(cfg.cache_dir(cli.cache_dir.as_deref()));
    match cli.cmd {
        Command::ModelData { model } => {
            set_model(&mut cfg, model.p, model.q)?;
            let ctx = Ctx {
                cfg,
                out,
                cache,
                start: Instant::now(),
            };
            model_data(&ctx)
        }
        Command::OneHole {
            model,
            no_anomaly,
            ratios,
            open_level,
            closed_weight,
            torus,
        } => {
            set_model(&mut cfg, model.p, model.q)?;
            if let Some(r) = ratios {
                cfg.geometry.ratios = Some(r);
                cfg.geometry.range = None;
            }
            if let Some(l) = open_level {
                cfg.cutoffs.open_level = l;
            }
            if let Some(w) = closed_weight {
                cfg.cutoffs.closed_weight = w;
            }
            if let Some(t) = torus {
                cfg.geometry.torus = t;
            }
            cfg.validate()?;
            let ctx = Ctx {
                cfg,
                out,
                cache,
                start: Instant::now(),
            };
            one_hole(&ctx, !no_anomaly)
        }
        Command::IsingMap {
            model,
            ratio,
            verify,
        } => {
            set_model(&mut cfg, model.p, model.q)?;
            let ctx = Ctx {
                cfg,
                out,
                cache,
                start: Instant::now(),
            };
            ising(&ctx, &ratio, &verify)
        }
        Command::RsosWeights {
            p,
            ratio,
            no_anomaly,
        } => {
            set_model(&mut cfg, Some(p), Some(p + 1))?;
            let ctx = Ctx {
                cfg,
                out,
                cache,
                start: Instant::now(),
            };
            rsos(&ctx, ratio, !no_anomaly)
        }
        Command::LoopCheck { p, lattice, ratios } => {
            let ctx = Ctx {
                cfg,
                out,
                cache,
                start: Instant::now(),
            };
            loop_check(&ctx, &p, &lattice, &ratios)
        }
        Command::PhasePoints { p } => {
            let ctx = Ctx {
                cfg,
                out,
                cache,
                start: Instant::now(),
            };
            phase(&ctx, &parse_p_range(&p)?)
        }
    }
}

fn model_data(ctx: &Ctx) -> Result<()> {
    let m = ctx.cfg.minimal_model()?;
    for (name, text) in model_tables(&m, ctx.digits()) {
        ctx.write(name, &text)?;
    }
    let fs = ctx.cache.fsymbols(&m)?;
    let fpath = FSymbols::cache_path(&ctx.cache.dir, &m);
    ctx.summary(
        "model-data",
        json!({}),
        json!({
            "central_charge": m.central_charge(),
            "central_charge_exact": m.central_charge_exact().to_string(),
            "num_labels": m.num_labels(),
            "unitary": m.is_unitary(),
            "pentagon_residual": fs.pentagon_residual(),
            "fsymbol_cache": fpath,
        }),
    )?;
    Ok(())
}

fn one_hole(ctx: &Ctx, with_anomaly: bool) -> Result<()> {
    let cfg = &ctx.cfg;
    let m = cfg.minimal_model()?;
    if cfg.symmetry_set()?.len() != m.num_labels() {
        return Err(CloakError::Unsupported(
            "one-hole compares channels for the full label set only (symmetry = all)".into(),
        ));
    }
    if !m.is_unitary() {
        return Err(CloakError::Unsupported(format!(
            "one-hole needs a unitary model, got M({},{})",
            m.p, m.q
        )));
    }
    let grid = cfg.grid()?;
    if grid.is_empty() {
        eprintln!("warning: empty R/d grid, nothing to do");
        return Ok(());
    }
    let fs = ctx.cache.fsymbols(&m)?;
    let n = &cfg.numerics;
    let provider = |t: f64| {
        ctx.cache
            .anomaly(t, n.series_order, n.curve_points, n.quad_tol)
    };
    let tau = cfg.torus()?.tau();
    let cmp = channel_compare_with(
        &fs,
        tau,
        &grid,
        cfg.cutoffs.open_level,
        cfg.cutoffs.closed_weight,
        if with_anomaly { Some(&provider) } else { None },
    )?;
    ctx.write("one-hole.csv", &cmp.to_csv())?;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let max_diff = cmp.max_rel_diff(lo, hi);
    ctx.summary(
        "one-hole",
        json!({ "open_level": cfg.cutoffs.open_level, "closed_weight": cfg.cutoffs.closed_weight, "series_order": n.series_order, "quad_tol": n.quad_tol }),
        json!({
            "anomaly": with_anomaly,
            "torus": match cfg.torus()? { TorusModulus::Hexagonal => "hexagonal", TorusModulus::AltPeriods => "alt-periods" },
            "points": cmp.rows.len(),
            "max_rel_diff": max_diff,
            "missing": cmp.missing,
        }),
    )?;
    println!("max |open - closed|/closed on [{lo}, {hi}]: {max_diff:.3e}");
    if !cmp.missing.is_empty() {
        return Err(CloakError::Numerical(format!(
            "{} grid points failed",
            cmp.missing.len()
        )));
    }
    Ok(())
}

fn ising(ctx: &Ctx, ratios: &[f64], verify: &[String]) -> Result<()> {
    let m = ctx.cfg.minimal_model()?;
    let (set, f) = ising_z2_set(&m)?;
    let lattices: Vec<LatticeSpec> = verify
        .iter()
        .map(|s| parse_lattice(s))
        .collect::<Result<_>>()?;
    let fs = if lattices.is_empty() {
        None
    } else {
        Some(ctx.cache.fsymbols(&m)?)
    };
    let delta0 = ctx.cfg.delta0_value(&m, &set)?;
    let mut csv = String::from("R_over_d,x,beta,beta_min,beta_star,covers_critical\n");
    let mut checks = Vec::new();
    let mut maps = Vec::new();
    for &r in ratios {
        let im = ising_map(&m, r)?;
        let d = ctx.digits();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r,
            fmt_f(im.x, d),
            fmt_f(im.beta, d),
            fmt_f(im.beta_min, d),
            fmt_f(im.beta_star, d),
            im.covers_critical
        ));
        maps.push(im);
        if let Some(fs) = &fs {
            // The identity is homogeneous in e^A, so A = 0 here.
            let t = t_of_ratio(r)?;
            let basis = truncated_basis(&m, &set, m.weight(f))?;
            let tab = lattice_table(fs, &set, &basis, t, ctx.cfg.geometry.d, delta0, 0.0)?;
            let (fv, x) = (f_scale(&m, 0.0, delta0), x_of_r(m.weight(f), t));
            for lat in &lattices {
                let z = lattice_z_exact(lat, &tab, &basis, ZMethod::BruteForce)?;
                let rhs = (x.powf(0.75) * fv).powi(lat.num_triangles() as i32)
                    * ising_z(lat, -0.5 * x.ln())?;
                checks.push(json!({ "R_over_d": r, "lattice": [lat.m, lat.n], "z_lattice": z, "z_ising_scaled": rhs, "residual": (z - rhs).abs() / rhs.abs() }));
            }
        }
    }
    ctx.write("ising-map.csv", &csv)?;
    ctx.summary(
        "ising-map",
        json!({ "h_max": m.weight(f) }),
        json!({ "maps": maps, "checks": checks }),
    )?;
    if checks
        .iter()
        .any(|c| c["residual"].as_f64().unwrap_or(1.0) > 1e-10)
    {
        return Err(CloakError::Numerical(
            "enumeration identity violated".into(),
        ));
    }
    Ok(())
}

fn rsos(ctx: &Ctx, ratio: f64, with_anomaly: bool) -> Result<()> {
    let m = ctx.cfg.minimal_model()?;
    let t = t_of_ratio(ratio)?;
    let a = if with_anomaly {
        anomaly_a(ctx, &m, t)?
    } else {
        0.0
    };
    let delta0 = ctx.cfg.delta0_value(&m, &m.first_row())?;
    let w = rsos_weights(&m, t, a, delta0)?;
    let mut csv = String::from("a,b,c,T\n");
    for x in 1..=m.p {
        for y in 1..=m.p {
            for z in 1..=m.p {
                let v = w.t(x, y, z);
                if v != 0.0 {
                    csv.push_str(&format!("{x},{y},{z},{}\n", fmt_f(v, ctx.digits())));
                }
            }
        }
    }
    ctx.write("rsos-weights.csv", &csv)?;
    ctx.summary(
        "rsos-weights",
        json!({ "h_max": m.weight(m.label(1, 2)?) }),
        json!({ "R_over_d": ratio, "t": t, "anomaly": a, "delta0": delta0, "F": w.f, "x": w.x, "dims": w.dims }),
    )?;
    Ok(())
}

fn loop_check(ctx: &Ctx, ps: &[u32], lattices: &[String], ratios: &[f64]) -> Result<()> {
    let lats: Vec<LatticeSpec> = lattices
        .iter()
        .map(|s| parse_lattice(s))
        .collect::<Result<_>>()?;
    let mut csv = String::from("p,M,N,R_over_d,x,z_rsos,z_loop,residual\n");
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for &p in ps {
        let m = MinimalModel::new(p, p + 1)?;
        for lat in &lats {
            for &r in ratios {
                let w = rsos_weights(&m, t_of_ratio(r)?, 0.0, m.s11().powf(1.5))?;
                let c = loop_equivalence(lat, &w)?;
                worst = worst.max(c.residual);
                csv.push_str(&format!(
                    "{p},{},{},{r},{},{:.17e},{:.17e},{:.3e}\n",
                    lat.m,
                    lat.n,
                    fmt_f(c.x, ctx.digits()),
                    c.z_rsos,
                    c.z_loop,
                    c.residual
                ));
                rows.push(c);
            }
        }
    }
    ctx.write("loop-check.csv", &csv)?;
    ctx.summary(
        "loop-check",
        json!({}),
        json!({ "max_residual": worst, "checks": rows }),
    )?;
    println!("max residual {worst:.3e}");
    if worst >= 1e-10 {
        return Err(CloakError::Numerical(format!(
            "loop rewrite residual {worst:.3e} >= 1e-10"
        )));
    }
    Ok(())
}

fn phase(ctx: &Ctx, ps: &[u32]) -> Result<()> {
    let rows = ps
        .iter()
        .map(|&p| phase_points(p))
        .collect::<Result<Vec<_>>>()?;
    ctx.write("phase-points.csv", &phase_points_csv(&rows))?;
    let ordered = rows.iter().all(|r| r.x_c < r.x_0 && r.x_0 < r.x_max);
    ctx.summary(
        "phase-points",
        json!({}),
        json!({ "ordered": ordered, "rows": rows }),
    )?;
    if !ordered {
        return Err(CloakError::Numerical("x_c < x_0 < x_max violated".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
