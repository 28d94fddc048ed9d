//! Exact arithmetic engine for braided logarithmic vertex algebras.
//!
//! The crate is organised bottom-up:
//!
//! * [`scalar`]: Gaussian rationals extended by a nilpotent `ε` (`ε² = 0`).
//! * [`logseries`]: formal series in `z` and `ζ = log z`, the total derivative
//!   `D_z`, iota expansions of `z₁₂^{n+S}` and delta-function coefficients.
//! * [`braiding`]: braiding maps `S = Σ φᵢ⊗ψᵢ`, Jordan–Chevalley splitting and
//!   the action of `z^S`.
//! * [`logva`]: the generic engine (state-field map, products, axiom checks).
//! * [`nls`]: the non-linear Schrödinger algebra and its `ε`-deformation.
//! * [`pva`]: non-local Poisson vertex algebra calculus and the Poisson limit.

pub mod braiding;
pub mod commutative;
pub mod linalg;
pub mod logva;
pub mod logseries;
pub mod nls;
pub mod pva;
pub mod scalar;
pub mod state;
