//! Mixed-precision iterative refinement for dense linear systems.
//!
//! A matrix stored in a working precision (`f64` or `f32`) is copied to a
//! lower factorization precision and factored there. The cheap factors are
//! then used inside an iterative refinement loop, optionally with residuals
//! evaluated in a wider residual precision, or as a preconditioner for GMRES
//! and BiCGSTAB.
//!
//! ```
//! use mpir_core::{ir_solve, mp_lu, Matrix, MpOptions, Reason};
//!
//! let a = Matrix::from_rows(&[[4.0, 1.0], [1.0, 3.0]]);
//! let mut f = mp_lu(&a, &MpOptions::default()).unwrap();
//! let rep = ir_solve(&mut f, &[1.0, 2.0]).unwrap();
//! assert_eq!(rep.reason, Reason::SmallResidual);
//! ```

pub mod condest;
pub mod error;
pub mod greens;
pub mod ir;
pub mod krylov;
pub mod lu;
pub mod matrix;
pub mod mp;
pub mod precision;

pub use half::f16;

pub use error::{MpError, Result};
pub use ir::{ir_solve, ir_solve_buffered, ir_solve_with, residual_tr, update_parms, Reason, SolveReport, TermParams};
pub use krylov::{
    bicgstab_correction, direct_precond_solve, gmres_correction, krylov_ir_solve, krylov_ir_solve_with, KrylovMethod,
    KrylovOutcome,
};
pub use lu::{lu_factor, lu_factor_half, solve_lps, solve_mps, LuFactors};
pub use matrix::{matrix_inf_norm, matrix_one_norm, norm_inf, Matrix};
pub use mp::{mp_blu, mp_glu, mp_lu, mp_lu_owned, mp_refactor, KrylovWorkspace, MpFactorization, MpOptions, SolveBuffers};
pub use precision::{demote_matrix, promote_vector, Precision, PrecisionConfig, Real};
