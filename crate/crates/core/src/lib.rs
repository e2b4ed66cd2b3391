//! Asymptotic mutual information and MMSE for high-dimensional regression on
//! AR(1) time series, and the Monte Carlo machinery used to check them.
//!
//! The model is `Y = Phi beta0 / sqrt(p) + Z` where every column of `Phi` is a
//! stationary AR(1) sequence with its own coefficient `lambda_j`. The
//! analytic side ([`kms`], [`scalar_channel`], [`replica`]) is generic over
//! the scalar type through [`Real`]; the simulation side ([`synth`], [`vamp`])
//! runs in `f64` on dense linear algebra.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod kms;
pub mod plot;
pub mod quadrature;
pub mod real;
pub mod record;
pub mod replica;
pub mod scalar_channel;
pub mod synth;
pub mod vamp;

pub use error::{Error, Result};
pub use real::Real;

pub use kms::{generating_function, kms_matrix, r1_map, spectral_integral};
pub use plot::plot_from_csv;
pub use replica::{
    fixed_point_solve, mutual_info_limit, predicted_ymmse, rs_potential, solve_replica,
    solve_replica_continuous, ymmse_from_block_mmse, SolverOptions,
};
pub use scalar_channel::{posterior_mean_denoiser, scalar_mmse, scalar_mutual_info};
pub use synth::{
    empirical_block_mmse, empirical_ymmse, exact_gaussian_posterior, sample_instance, InstanceSpec,
    ProblemInstance,
};
pub use vamp::{rotate_gaussian_instance, stability_report, vamp_run, VampConfig, VampTrace};

pub type SpectrumSpec = kms::SpectrumSpec<f64>;
pub type SpectrumSpecF32 = kms::SpectrumSpec<f32>;
pub type DiscreteSpectrum = kms::DiscreteSpectrum<f64>;
pub type ContinuousSpectrum = kms::ContinuousSpectrum<f64>;
pub type KmsMatrix = kms::KmsMatrix<f64>;
pub type PriorSpec = scalar_channel::Prior<f64>;
pub type PriorSpecF32 = scalar_channel::Prior<f32>;
pub type ScalarChannel = scalar_channel::ScalarChannel<f64>;
pub type ReplicaProblem = replica::ReplicaProblem<f64>;
pub type ReplicaProblemF32 = replica::ReplicaProblem<f32>;
pub type ReplicaSolution = replica::ReplicaSolution<f64>;
pub type ReplicaOutcome = replica::ReplicaOutcome<f64>;
pub type PredictionReport = replica::PredictionReport<f64>;
pub type SolveError = replica::SolveError<f64>;
