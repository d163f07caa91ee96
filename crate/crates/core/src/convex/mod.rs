//! Convex loss families over the unit ball and the learners that minimize them.

mod learners;
mod problem;

pub use learners::{
    excess_risk, hyperparam_schedule, make_erm_statistic, make_pgd_statistic, minimize_regularized,
    pgd, population_objective, reference_minimum, regularized_erm, regularized_erm_iterative,
    ErmStatistic, LearnerOutput, PgdStatistic, Schedule, Solution, REFERENCE_TOL,
};
pub use problem::{
    problem_from_id, verify_constants, ConstantsReport, ConvexProblem, QuadraticFamily,
    ScaledLogisticFamily, Term,
};
