//! Dense linear-algebra kernels: Householder QR, the discrete algebraic
//! Riccati equation, and the active-set engine behind the LP and QP solvers.

mod active_set;
mod dare;
mod lp;
mod qr;

pub use active_set::{minimize_from, ActiveSetOutcome, ConvexQp};
pub use dare::{dare_residual, solve_dare, DareResult};
pub use lp::{
    max_margin_point, minimize_linear, solve_lp, LpSolution, MarginPoint, FEASIBILITY_TOLERANCE,
};
pub use qr::{qr_factorize, QrFactorization, RANK_TOLERANCE};

pub(crate) use active_set::stack_rows;
