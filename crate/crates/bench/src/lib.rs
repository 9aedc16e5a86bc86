//! Shared fixtures for the benchmarks.

use cloak_core::blocks::TriangleAmplitudeTable;
use cloak_core::lattice::{ising_z2_set, lattice_table, truncated_basis, BasisState};
use cloak_core::uniformization::t_of_ratio;
use cloak_core::{FSymbols, MinimalModel};

/// Z₂ lattice table of M(3,4) at a given R/d (A = 0, δ₀ = S₁₁^{3/2}).
pub fn ising_table(ratio: f64) -> (TriangleAmplitudeTable, Vec<BasisState>) {
    let m = MinimalModel::ising();
    let fs = FSymbols::get(&m);
    let (set, f) = ising_z2_set(&m).expect("Ising set");
    let basis = truncated_basis(&m, &set, m.weight(f)).expect("basis");
    let t = t_of_ratio(ratio).expect("ratio in range");
    let tab = lattice_table(&fs, &set, &basis, t, 1.0, m.s11().powf(1.5), 0.0).expect("table");
    (tab, basis)
}
