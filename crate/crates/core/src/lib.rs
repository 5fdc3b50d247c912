//! Estimation for semiparametric models defined by L-moment constraints.
//!
//! Parameters are estimated by minimizing a φ-divergence between the empirical
//! quantile measure (the sample spacings) and the set of quantile measures
//! satisfying the model's L-moment equations. The inner problem is solved in
//! its finite-dimensional Fenchel dual.

pub mod distribution;
pub mod divergence;
pub mod dualsolve;
pub mod estimator;
pub mod error;
pub mod linalg;
pub mod lmoments;
pub mod models;
pub mod poly;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};

pub use distribution::UnivariateDistribution;
pub use divergence::Divergence;
pub use dualsolve::{DualOptions, DualProblem, DualSolution, DualStatus};
pub use estimator::{
    attach_asymptotics, fit_classical, fit_divergence, fit_wasserstein, ClassicalMethod, FitOptions, FitReport,
    Plugin,
};
pub use lmoments::{LmomentVector, SortedSample};
pub use models::{Family, Gpd, Law, ModelKind, SplqModel, Weibull};
pub use poly::PolyBasis;
pub use sim::{run_scenario, ScenarioConfig, SimSummary};
