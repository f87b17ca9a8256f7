//! Classifier-free guidance over conditioning histories, with closed-form
//! Gaussian rectified-flow fields to check it against.

pub mod context;
pub mod field;
pub mod paradigm;
pub mod sampler;
pub mod trainer;

pub use context::{ContextSet, Element};
pub use field::{monte_carlo_velocity, Gaussian, GaussianField, MixtureField, Scaled};
pub use paradigm::{
    build_spec, compose_velocity, two_stage_cfg, Guidance, GuidanceError, GuidanceSpec, GuidanceTerm, OracleError,
    Paradigm, VelocityOracle,
};
pub use sampler::{euler_sample, noise, predicted_mean, run_demo, terminal_mean, DemoReport, Gammas, DEFAULT_STEPS};
pub use trainer::{train_toy_velocity, Dropout, ToyVelocity, TrainConfig, TrainError, TrainReport};
