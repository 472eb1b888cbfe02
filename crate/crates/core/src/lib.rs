//! Parameter homotopy continuation with adaptive affine patches, adaptive
//! randomization of overdetermined systems, and early truncation of paths
//! heading to nonreal endpoints.

// Tolerance checks are written `!(x <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod engine;
pub mod error;
pub mod io;
pub mod linalg;
pub mod patch;
pub mod polysys;
pub mod problems;
pub mod randomize;
pub mod tracker;

pub use engine::{ab_initio, param_solve, AbInitio, AbInitioConfig, SolveConfig, SolveReport, StartSet};
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use patch::{PatchKind, PatchState, PatchStrategy};
pub use polysys::{GroupKind, ParamPolySystem, Poly, Term, VarGroup, VarStructure};
pub use problems::ProblemKind;
pub use randomize::{Randomizer, RandomizerKind};
pub use tracker::{FixedChoices, Homotopy, PathOutcome, PathResult, Strategies, TrackerConfig};
