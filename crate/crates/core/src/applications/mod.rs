//! Adapters that express an estimator as a sample mean of influence
//! contributions `X_i`, ready for the equality and inequality tests.
//!
//! Each adapter returns a one-column [`DataMatrix`](crate::numkernel::DataMatrix)
//! whose mean is the estimator minus the hypothesised value.

pub mod network;
pub mod ols;
pub mod powerlaw;
pub mod spillover;

pub use network::{avg_clustering, clustering_contrast, individual_clustering, parse_edge_list, Graph};
pub use ols::{influence_ols, RegressionData};
pub use powerlaw::{
    exponential_mle, normalized_llr, powerlaw_mle, powerlaw_test, vuong_contrast, PowerLawDecision,
    PowerLawOutcome, TailSample,
};
pub use spillover::{influence_spillover, spillover_contrast, Cell, SpilloverData};
