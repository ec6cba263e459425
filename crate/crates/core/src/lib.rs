//! Hierarchical polynomial regression with constrained lasso.
//!
//! Divisibility between monomial terms gives a Hasse diagram, the diagram gives
//! linear inequalities on the absolute values of the coefficients, and those
//! inequalities are enforced along a lasso path either orthant by orthant or through
//! a convex relaxation in `(theta+, theta-)`.

pub mod constraints;
pub mod error;
pub mod estimator;
pub mod monomial;
pub mod qp;

pub use constraints::{
    build_h, build_relaxed_b, build_s, build_w, implication_samples, satisfies, ConstraintKind,
    ConstraintSystem, ImplicationReport, RelaxedConstraintMatrix, WeightScheme,
};
pub use error::{Error, Result};
pub use estimator::{
    constrained_lasso_path, default_delta, lambda_grid, least_squares, orthant_subproblem, plain_lasso_path,
    refit_least_squares, relaxed_lasso_path, select_by_validation, Dataset, LassoPath, PathMethod,
    PathOptions, PathPoint, PathStats, RelaxedParts, SignVector, Standardization,
};
pub use monomial::{
    build_hasse, directing_monomials, divides, full_model, full_quadratic_model,
    generate_relations, is_strong_hierarchical, is_weak_hierarchical,
    model_from_directing_monomials, Exponent, HasseDiagram, Model, Relation, RelationSet,
};
pub use qp::{
    solve_qp, solve_qp_warm, HessianFactor, KktResiduals, QpOptions, QpProblem, QpSolution,
    QpSolver, QpStatus,
};
