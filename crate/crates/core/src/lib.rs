//! Estimation and homogeneity testing for response proportions when paired
//! organs contribute a mixture of unilateral (one organ) and correlated
//! bilateral (two organs) binary observations, under the constant-R
//! dependence model, together with a seeded Monte Carlo harness for type I
//! error and power studies.

pub mod data;
pub mod error;
pub mod inference;
pub mod mle;
pub mod model;
pub mod poly;
pub mod sim;
pub mod special;

pub use data::{GroupCounts, StudyData};
pub use error::{Error, Result};
pub use inference::{
    anova_icc, donner_adjusted_test, information_inverse, information_matrix, lr_test,
    pairwise_wald, run_selected, score_test, wald_test, InfoMatrix, TestMethod, TestResult,
};
pub use mle::{
    constrained_mle, quartic_coefficients, score_gradient, solve_pi_given_r, unconstrained_mle,
    FitMethod, MleFit,
};
pub use model::{
    cell_probabilities, log_likelihood, pi_max, r_from, rho_from, CellProbabilities, ModelParams,
};
pub use sim::{
    all_methods, estimate_power, estimate_type_i_error, generate_study, replicate_rng,
    sweep_uniform, Dependence, MethodOutcome, SimConfig, SimReport, SweepConfig, SweepReport,
    SweepRow,
};
pub use special::chi_square_sf;
