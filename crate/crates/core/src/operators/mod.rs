//! Operators on dyadic fields: maximal functions, sparse operators, their
//! convex-body versions, iteration operators, operator-norm estimates, and
//! the truncated Hilbert transform.

pub mod convex;
pub mod hilbert;
pub mod maximal;
pub mod opnorm;
pub mod rubio;
pub mod sparse;

pub use convex::{convex_average, convex_maximal, convex_sparse, lp_norm_bodyfield, SupportTable};
pub use hilbert::{hilbert_at, hilbert_maximal, hilbert_principal, hilbert_truncated};
pub use maximal::{christ_goldberg, christ_goldberg_aux, maximal_scalar, maximal_weighted_universal};
pub use opnorm::{operator_norm_estimate, NormEstimate, Operator};
pub use rubio::{rubio_iteration_convex, rubio_iteration_scalar, Iterated, DEFAULT_TRUNCATION};
pub use sparse::{find_witnesses, is_sparse, sparse_generate, sparse_scalar, SparseFamily, SparseStrategy};
