//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL` line.

use std::f64::consts::PI;

use cloak_core::anomaly::{
    cocycle_check, liouville_action, reference_anomaly, Constant, FnField, Holomorphic,
    ReferenceCase, Region,
};
use cloak_core::channels::{
    channel_compare, one_hole_closed, open_sum, q_power_fixture, stability_check, tilde_set,
    torus_one_point, FixtureCase, TorusModulus,
};
use cloak_core::lattice::{
    f_scale, ising_map, ising_z, ising_z2_set, lattice_table, lattice_z_exact,
    loop_equivalence_check, phase_points, truncated_basis, x_of_r, ZMethod,
};
use cloak_core::uniformization::t_of_ratio;
use cloak_core::{FSymbols, KacLabel, LatticeSpec, MinimalModel, C64};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, ok: bool, detail: String) {
    println!(
        "criterion {n}: {} {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_closed_channel_endpoint() {
    let m = MinimalModel::ising();
    let tau = TorusModulus::Hexagonal.tau();
    let r = 1e-4f64;
    let p = one_hole_closed(&m, tau, r, 14).unwrap();
    let v = p.with_anomaly * r.powf(1.0 / 12.0);
    let z = torus_one_point(&m, &[], tau, 14).unwrap();
    let ok = (v - 1.88).abs() < 0.01 * 1.88 && (v - z).abs() < 1e-6;
    report(
        1,
        ok,
        format!("R^(1/12) A at R = {r:e}: {v:.6} (Z(tau) = {z:.6})"),
    );
}

#[test]
fn criterion_02_open_channel_endpoint() {
    let m = MinimalModel::ising();
    let fs = FSymbols::get(&m);
    let t = 0.05;
    let v = open_sum(&fs, m.labels(), m.s11().powf(1.5), t, 7).unwrap();
    report(
        2,
        (v - 1.5).abs() < 1e-8,
        format!("t = {t}: {v:.12} vs 3/2"),
    );
}

#[test]
fn criterion_03_channel_agreement() {
    let m = MinimalModel::ising();
    let fs = FSymbols::get(&m);
    let grid: Vec<f64> = (0..11).map(|i| 0.15 + 0.025 * i as f64).collect();
    let cmp = channel_compare(&fs, TorusModulus::Hexagonal.tau(), &grid, 7, 14).unwrap();
    let with = cmp.max_rel_diff(0.15, 0.40);
    let raw = cmp.max_rel_diff_raw(0.15, 0.40);
    let ok = cmp.missing.is_empty() && cmp.rows.len() == 11 && with <= 0.02 && raw > 0.2;
    report(
        3,
        ok,
        format!(
            "max rel diff {with:.3e} with anomaly, {raw:.3e} without, {} missing",
            cmp.missing.len()
        ),
    );
}

fn mobius_disc(a: C64, phase: f64) -> impl Fn(C64) -> (C64, C64) + Sync + Copy {
    move |z: C64| {
        let den = C64::new(1.0, 0.0) - a.conj() * z;
        let k = C64::from_polar(1.0, phase) * (1.0 - a.norm_sqr());
        (k / (den * den), 2.0 * k * a.conj() / (den * den * den))
    }
}

#[test]
fn criterion_04_anomaly_golden_values() {
    let tol = 1e-6;
    let mut worst = 0.0f64;
    for r in [0.5f64, 2.0, 3.0] {
        let v = liouville_action(
            &Region::disc(C64::new(0.0, 0.0), 1.0),
            &Constant(2.0 * r.ln()),
            false,
            1e-10,
        )
        .unwrap()
        .total();
        let want = reference_anomaly(ReferenceCase::DiscScale { radius: r }).unwrap();
        worst = worst.max((v - want).abs()).max((want - 4.0 * r.ln()).abs());
    }
    let (rad, len) = (1.3f64, 0.8f64);
    let (rm, rp) = ((-len / (2.0 * rad)).exp(), (len / (2.0 * rad)).exp());
    let cyl = liouville_action(
        &Region::annulus(rm, rp),
        &Holomorphic(move |w: C64| (rad / w, -rad / (w * w))),
        false,
        1e-10,
    )
    .unwrap();
    let want = reference_anomaly(ReferenceCase::CylinderAnnulus {
        radius: rad,
        length: len,
    })
    .unwrap();
    worst = worst
        .max((cyl.total() - want).abs())
        .max((want + 2.0 * len / rad).abs());
    let half = liouville_action(
        &Region::upper_half_disc(),
        &Holomorphic(|z: C64| {
            let d = z + C64::new(0.0, 1.0);
            (
                C64::new(0.0, -2.0) / (d * d),
                C64::new(0.0, 4.0) / (d * d * d),
            )
        }),
        false,
        1e-10,
    )
    .unwrap();
    worst = worst.max(half.total().abs()).max(
        reference_anomaly(ReferenceCase::HalfDiscMobius)
            .unwrap()
            .abs(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let d = Region::disc(C64::new(0.0, 0.0), 1.0);
    let mut cocycle = 0.0f64;
    for _ in 0..4 {
        let a = C64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..2.0 * PI));
        let b = C64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..2.0 * PI));
        let ph = rng.gen_range(0.0..2.0 * PI);
        let f1 = Holomorphic(mobius_disc(a, ph));
        let f2 = FnField {
            omega: move |z: C64| (z * b.conj()).re + 0.3 * z.norm_sqr(),
            grad: move |z: C64| b + 0.6 * z,
        };
        cocycle = cocycle.max(cocycle_check(&d, &f1, &f2, 1e-10).unwrap());
        let g = Holomorphic(mobius_disc(b, -ph));
        cocycle = cocycle.max(cocycle_check(&d, &f1, &g, 1e-10).unwrap());
    }
    let ok = worst < tol && cocycle < 1e-8;
    report(
        4,
        ok,
        format!("golden max error {worst:.2e}, cocycle max residual {cocycle:.2e}"),
    );
}

#[test]
fn criterion_05_fsymbol_suite() {
    let mut pent = 0.0f64;
    let mut count = 0;
    for q in 3..=7u32 {
        for p in 3..q {
            if num_integer::gcd(p, q) != 1 {
                continue;
            }
            let fs = FSymbols::get(&MinimalModel::new(p, q).unwrap());
            pent = pent.max(fs.pentagon_residual());
            count += 1;
        }
    }
    let m = MinimalModel::ising();
    let fs = FSymbols::get(&m);
    let (one, s, e) = (m.identity(), m.label(1, 2).unwrap(), m.label(1, 3).unwrap());
    let listed = [
        fs.f(one, one, one, one, one, one) - 1.0,
        fs.f(e, one, e, e, one, one) - 1.0,
        fs.f(s, one, s, s, one, one) - 1.0,
        fs.f(s, one, s, s, e, e) - 0.5,
    ];
    let ising = listed.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut s_rel = 0.0f64;
    let mut triple = 0.0f64;
    for (p, q) in [(3, 4), (4, 5), (3, 5), (5, 6)] {
        let m = MinimalModel::new(p, q).unwrap();
        let fs = FSymbols::get(&m);
        let one = m.identity();
        let ls: Vec<KacLabel> = m.labels().to_vec();
        for &a in &ls {
            for &b in &ls {
                for i in m.fuse(a, b) {
                    let l = fs.f(b, one, a, a, i, i) * m.s_matrix(a, one);
                    let r = fs.f(a, one, b, b, i, i) * m.s_matrix(b, one);
                    s_rel = s_rel.max((l - r).abs());
                    for &c in &ls {
                        for j in m.fuse(b, c) {
                            for k in m.fuse(i, j) {
                                if m.fusion(a, k, c) == 0 {
                                    continue;
                                }
                                let l = fs.f(b, k, c, a, j, i) * fs.f(c, one, a, a, k, k);
                                let r = fs.f(c, i, a, b, k, j) * fs.f(b, one, a, a, i, i);
                                triple = triple.max((l - r).abs() / l.abs().max(1.0));
                            }
                        }
                    }
                }
            }
        }
    }
    let ok = pent < 1e-10 && ising < 1e-14 && s_rel < 1e-12 && triple < 1e-12;
    report(
        5,
        ok,
        format!("pentagon {pent:.2e} over {count} models, Ising values {ising:.1e}, S-relation {s_rel:.1e}, triple identity {triple:.1e}"),
    );
}

#[test]
fn criterion_06_q_power_fixtures() {
    let mut lines = Vec::new();
    let mut ok = true;
    for (p, q) in [(3, 4), (4, 5)] {
        let m = MinimalModel::new(p, q).unwrap();
        for case in [
            FixtureCase::TorusFromSphere,
            FixtureCase::CylinderClosed,
            FixtureCase::CylinderOpen,
            FixtureCase::BoundaryStateRadius,
        ] {
            let r = q_power_fixture(&m, case, 6.0, 14).unwrap();
            ok &= r.passed && r.residual < 1e-6;
            lines.push(format!("M({p},{q}) {case:?} {:.1e}", r.residual));
        }
    }
    report(6, ok, lines.join(", "));
}

#[test]
fn criterion_07_ising_lattice_map() {
    let mut worst = 0.0f64;
    for model in [MinimalModel::ising(), MinimalModel::new(4, 5).unwrap()] {
        let fs = FSymbols::get(&model);
        let (set, f) = ising_z2_set(&model).unwrap();
        let delta0 = model.total_dim(&set).recip();
        let basis = truncated_basis(&model, &set, model.weight(f)).unwrap();
        for ratio in [0.15, 0.3, 0.45] {
            let t = t_of_ratio(ratio).unwrap();
            let a = 0.2;
            let tab = lattice_table(&fs, &set, &basis, t, 1.0, delta0, a).unwrap();
            let (fv, x) = (f_scale(&model, a, delta0), x_of_r(model.weight(f), t));
            for (mm, nn) in [(2, 2), (2, 3)] {
                let lat = LatticeSpec::new(mm, nn).unwrap();
                let z = lattice_z_exact(&lat, &tab, &basis, ZMethod::BruteForce).unwrap();
                let rhs = (x.powf(0.75) * fv).powi(lat.num_triangles() as i32)
                    * ising_z(&lat, -0.5 * x.ln()).unwrap();
                worst = worst.max((z - rhs).abs() / rhs.abs());
            }
        }
    }
    let im = ising_map(&MinimalModel::ising(), 0.3).unwrap();
    let ok = worst < 1e-10
        && (0.13..0.14).contains(&im.beta_min)
        && (0.27..0.28).contains(&im.beta_star)
        && im.covers_critical;
    report(
        7,
        ok,
        format!(
            "identity residual {worst:.2e}, beta_min = {:.6}, beta_star = {:.6}",
            im.beta_min, im.beta_star
        ),
    );
}

#[test]
fn criterion_08_loop_equivalence() {
    let mut worst = 0.0f64;
    let mut n = 0;
    for p in [3, 4] {
        for (mm, nn) in [(2, 2), (3, 3)] {
            let lat = LatticeSpec::new(mm, nn).unwrap();
            for t in [0.1, 0.5, 1.5] {
                worst = worst.max(loop_equivalence_check(p, t, &lat).unwrap().residual);
                n += 1;
            }
        }
    }
    report(
        8,
        worst < 1e-10,
        format!("max residual {worst:.2e} over {n} cases"),
    );
}

#[test]
fn criterion_09_phase_diagram() {
    let mut ok = true;
    let mut root = 0.0f64;
    for p in 3..=12u32 {
        let pp = phase_points(p).unwrap();
        ok &= pp.x_c < pp.x_0 && pp.x_0 < pp.x_max;
        let here = MinimalModel::new(p, p + 1).unwrap();
        let next = MinimalModel::new(p + 1, p + 2).unwrap();
        // Exact in the rationals, and the f64 columns to rounding.
        let pr = i64::from(p);
        ok &= here.central_charge_exact()
            == Rational64::from_integer(1) - Rational64::new(6, pr * (pr + 1));
        ok &= next.central_charge_exact()
            == Rational64::from_integer(1) - Rational64::new(6, (pr + 1) * (pr + 2));
        ok &= (pp.c_0 - here.central_charge()).abs() <= 4.0 * f64::EPSILON
            && (pp.c_c - next.central_charge()).abs() <= 4.0 * f64::EPSILON;
        let h_f = here.weight(here.label(1, 2).unwrap());
        root = root.max((x_of_r(h_f, t_of_ratio(pp.r_c_over_d).unwrap()) - pp.x_c).abs());
    }
    ok &= root < 1e-10;
    report(
        9,
        ok,
        format!("ordering and central charges for p = 3..12, |x(R_C) - x_c| <= {root:.1e}"),
    );
}

#[test]
fn criterion_10_structural_counts() {
    let mut ok = true;
    for p in 3..=8u32 {
        let m = MinimalModel::new(p, p + 1).unwrap();
        let set = m.first_row();
        let basis = truncated_basis(&m, &set, m.weight(m.label(1, 2).unwrap())).unwrap();
        ok &= basis.len() == (3 * p - 2) as usize;
        let one = m.identity();
        ok &= tilde_set(&m, m.labels()).unwrap() == vec![one];
        let mut odd: Vec<KacLabel> = (1..p)
            .step_by(2)
            .map(|x| m.canonical(KacLabel::new(x, 1)))
            .collect();
        odd.sort();
        ok &= tilde_set(&m, &set).unwrap() == odd;
        let mut even: Vec<KacLabel> = m
            .labels()
            .iter()
            .copied()
            .filter(|l| ((p + 1) * (l.r - 1) + p * (l.s - 1)) % 2 == 0)
            .collect();
        even.sort();
        ok &= tilde_set(&m, &m.z2_set()).unwrap() == even;
        ok &= stability_check(&m, m.labels()).unwrap().satisfied;
        ok &= stability_check(&m, &set).unwrap().satisfied;
        ok &= !stability_check(&m, &m.z2_set()).unwrap().satisfied;
    }
    report(
        10,
        ok,
        "basis size 3p-2, tilde sets and stability verdicts for p = 3..8".into(),
    );
}
