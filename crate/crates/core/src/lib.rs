//! Uniformly stable learners, selection mechanisms and estimation-error bounds,
//! with the machinery to check the bounds empirically.
//!
//! * [`data`], [`statistic`], [`audit`]: datasets, data-dependent functions,
//!   estimation errors, the leave-one-out estimator and stability audits.
//! * [`convex`]: convex loss families, regularized ERM and projected gradient descent.
//! * [`mechanism`]: stable-max, the exponential mechanism and selection checks.
//! * [`bounds`]: closed-form estimation-error and excess-risk bounds.
//! * [`dp_predict`]: randomized-response private prediction.
//! * [`harness`]: Monte Carlo sweeps over datasets.

pub mod audit;
pub mod bounds;
pub mod convex;
pub mod data;
pub mod dp_predict;
pub mod error;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod mechanism;
pub mod rng;
pub mod statistic;
pub mod summary;

pub use error::{Error, Result};
