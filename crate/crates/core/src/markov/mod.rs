//! Random-walk machinery on a combinatorial graph: stationary distribution,
//! the Diglacian operators, the fundamental matrix, hitting and commute
//! times, and the spectral checks built on them.

pub mod chain;
pub mod commute;
pub mod fundamental;
pub mod lanczos;
pub mod operators;

pub use chain::{pagerank_transition, stationary_distribution, PfprChain, PowerIterationOptions, Stationary};
pub use commute::{
    commute_propagation, commute_propagation_unshifted, commute_times, drop_count, hitting_times, sparsify_commute,
    CommuteModel,
};
pub use fundamental::{
    fundamental_matrix, fundamental_matrix_dense, fundamental_matrix_sparse, pseudo_inverse_operator,
    simplified_operator, FundamentalMethod, SparseReport,
};
pub use lanczos::{truncated_svd, LinearOperator, SvdOptions, TruncatedSvd};
pub use operators::{
    augmented_propagation, diameter_bound_check, diglacian, normalized_diglacian, rayleigh_quotient, spectrum_box,
    DiameterBound, DiglacianOps, RayleighQuotient,
};
