//! Cloaking-boundary construction for Virasoro minimal models: chiral data,
//! F-symbols, Virasoro module bases, the one-hole conformal map and its
//! anomaly, three-point block amplitudes, open/closed channel checks and the
//! lattice-model mappings built on top of them.

pub mod anomaly;
pub mod blocks;
pub mod channels;
pub mod error;
pub mod fsymbols;
pub mod io;
pub mod lattice;
pub mod minimal;
pub mod special;
pub mod uniformization;
pub mod virasoro;

pub use error::{CloakError, Result};
pub use fsymbols::FSymbols;
pub use io::RunConfig;
pub use lattice::{LatticeSpec, LoopConfig};
pub use minimal::{KacLabel, MinimalModel};
pub use special::C64;
pub use uniformization::TriangleGeometry;
pub use virasoro::TruncatedModule;
