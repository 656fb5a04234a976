//! Independent references for checking the solvers: optimality certificates,
//! a transformed lasso formulation of the chain problem, accelerated
//! proximal gradient, and exact vertex enumeration for absolute loss.

mod kkt;
mod lad;
mod proximal;
mod transformed;


pub use kkt::{
    graph_residuals, kkt_check_chain, kkt_check_chain_gradient, kkt_check_graph, kkt_check_graph_gradient,
    kkt_check_regression, lasso_violation, Edge, Interval, KktCertificate, KktStatus, RegressionCertificate,
    SubgradientVars, Witness, KKT_TOL,
};
pub use lad::{lad_oracle, LadOracleResult};
pub use proximal::{
    chain_edges, fista, graph_objective, proximal_reference, CompositeObjective, FistaOptions, FistaResult,
    ReferenceOptions, ReferenceProblem, ReferenceResult,
};
pub use transformed::{flsa_oracle, flsa_oracle_transformed};
