//! Two-dimensional finite-element simulator of dynamic perfect plasticity
//! coupled with unidirectional gradient damage in a Kelvin-Voigt
//! viscoelastic solid.
//!
//! The solid occupies a rectangle meshed with P1 triangles. Per time step
//! the solver performs a staggered pair of incremental minimizations:
//!
//! 1. **Mechanical step** ([`mech_step`]): with the damage field frozen at
//!    the previous level, minimize the viscoelastic-inertial increment over
//!    displacement `u` and deviatoric plastic strain `π` by alternating an
//!    SPD displacement solve with a closed-form radial return.
//! 2. **Damage step** ([`damage_step`]): with the fresh elastic strain
//!    fixed, minimize the damage increment over the box `[0, α_prev]`
//!    (unidirectional, no healing) by projected gradient descent.
//!
//! Every step is certified by [`diagnostics`]: the discrete energy
//! inequality, yield admissibility `|dev σ| ≤ σ_yld`, flow-rule
//! complementarity `dev σ : Δπ = σ_yld |Δπ|`, damage monotonicity, and a
//! sampled variational inequality for the damage update. The certified
//! quantities are emitted as a per-step CSV ledger.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`tensor`] | symmetric / trace-free 2×2 tensor algebra |
//! | [`material`] | constitutive laws `C(α)`, `D(α)`, `σ_yld(α)`, `φ(α)` and their secants |
//! | [`fem`] | mesh, P1/P0 discretization, sparse assembly, CG, p-Laplacian |
//! | [`mech_step`] | first incremental minimization (alternating + radial return) |
//! | [`damage_step`] | second incremental minimization (projected gradient) |
//! | [`driver`] | time loop, two-level history, scenario configuration |
//! | [`diagnostics`] | energy ledger, residuals, a-priori norm monitors |
//! | [`io`] | config parsing, mesh text format, legacy VTK, ledger CSV |
//!
//! Worker threads for element loops are capped by the `PDS_THREADS`
//! environment variable (0 or unset = automatic). All parallel reductions
//! merge fixed-size chunks in a fixed order, so results are bitwise
//! reproducible regardless of thread count.

pub mod damage_step;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod fem;
pub mod io;
pub mod material;
pub mod mech_step;
pub mod parallel;
pub mod tensor;

pub use damage_step::DamageResult;
pub use diagnostics::EnergyLedger;
pub use driver::{ScenarioConfig, State};
pub use error::Error;
pub use fem::{Mesh, SparseSym};
pub use material::MaterialParams;
pub use mech_step::MechResult;
pub use tensor::{Dev2, Sym2};
