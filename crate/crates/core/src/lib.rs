//! Finite-element solver and verification harness for incompressible flow
//! with a tempered power-law memory term,
//!
//! ```text
//! u_t - mu Δu + (u·∇)u - rho (Q * Δu) + ∇p = f,   div u = 0,
//! Q(t) = t^{-beta} e^{-delta t}.
//! ```
//!
//! Space is discretized with the mini element (P1 + cubic bubble velocity,
//! P1 pressure); time with a semi-implicit Euler step whose memory term is
//! evaluated by a sum-of-exponentials history recurrence.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the element formulas.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod assembly;
pub mod benchmark;
pub mod cli;
pub mod error;
pub mod femspace;
pub mod memory_kernel;
pub mod mesh;
pub mod quadrature;
pub mod sparsela;
pub mod timestepper;
pub mod verification;
pub mod vtk;

pub use error::{Error, Result};

/// Convenient re-exports.
pub mod prelude {
    pub use crate::assembly::{assemble_convection, assemble_load, assemble_static, OperatorSet};
    pub use crate::benchmark::{ContractionParams, ContractionRun};
    pub use crate::femspace::{DiscreteField, FieldKind, MiniSpace, Norms};
    pub use crate::memory_kernel::{build_soe, convolve_direct, HistoryState, KernelSoe, RegimeParams, TemperedKernel};
    pub use crate::mesh::{BoundaryTag, TriMesh};
    pub use crate::sparsela::{LuFactorization, SaddleSystem, SolverKind, SparseMatrix};
    pub use crate::timestepper::{
        ConvectionMode, ExactFlow, FlowProblem, FlowState, LocalMemory, MemoryMode, SchemeConfig, Simulation,
    };
    pub use crate::verification::{ManufacturedCase, StudySettings};
}
