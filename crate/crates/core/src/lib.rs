//! Numerical laboratory for the variable-exponent problem
//! `-div(|grad u|^{p(x)-2} grad u) = |u|^{q(x)-2} u` with zero Dirichlet data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod exponent;
pub mod fem;
pub mod field;
pub mod mesh;
pub mod modular;
pub mod pohozaev;
pub mod quadrature;
pub mod solvers;

pub use domain::{find_star_center, star_shape_report, Domain, StarShapeReport, TOL_GEOM};
pub use error::{Result, VexError};
pub use exponent::{bounds, embedding_gap, log_holder_estimate, ExponentField, ExponentSpec, SamplingPlan, TabulatedExponent};
pub use fem::{cutoff, gradient, integrate, mollify};
pub use field::{DiscreteField, GradientField};
pub use mesh::{build_mesh, Mesh};
pub use modular::{gradient_modular, holder_check, luxemburg_norm, modular, verify_modular_relations, ModularResult};
pub use quadrature::QuadratureRule;
pub use pohozaev::{
    boundary_term, pohozaev_terms, remainder_r, rhs_radial_identity_check, verdict, verify_pucci_serrin, PohozaevReport,
    RemainderReport, Verdict, VerdictCase,
};
pub use solvers::{
    apply_aeps, cascade, energy_f, energy_feps, epsilon_schedule, nehari_candidate, solve_limit_n, solve_regularized,
    CascadeResult, SolveConfig, SolveResult,
};
