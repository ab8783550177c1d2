//! Learning decision policies under selective labels.
//!
//! A decision maker proposes individuals `(x, s)`, decides `d ∈ {0, 1}`
//! and observes the outcome `y` only when `d = 1`. This crate simulates
//! that loop and learns exploring stochastic policies by inverse-propensity
//! weighted stochastic gradient ascent on `u(π) − (λ/2)(b⁰(π) − b¹(π))²`,
//! alongside deterministic threshold baselines.
//!
//! ```
//! use conseq::environments::{make_synthetic_env, SyntheticSettingSpec};
//! use conseq::learning::{consequential_learning, ExperimentConfig, Initialization, RunSetup, Strategy};
//! use conseq::metrics::EvalSample;
//! use conseq::rng::Streams;
//!
//! let env = make_synthetic_env(SyntheticSettingSpec::setting1()).unwrap();
//! let config = ExperimentConfig {
//!     cost: 0.142,
//!     timesteps: 3,
//!     decisions: 512,
//!     iterations: 8,
//!     minibatch: 64,
//!     ..Default::default()
//! };
//! let setup = RunSetup {
//!     init: Initialization::Theta(vec![-1.0, 2.0]),
//!     ..Default::default()
//! };
//! let test = EvalSample::draw(&env, 2000, &mut Streams::new(0).test_set()).unwrap();
//! let run = consequential_learning(&env, Strategy::Logistic, &config, &setup, &test).unwrap();
//! assert_eq!(run.metrics.len(), 3);
//! ```

pub mod diagnostics;
pub mod environments;
pub mod error;
pub mod learning;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod policies;
pub mod predictors;
pub mod rng;

pub use diagnostics::{Diagnostic, Diagnostics, Fitted};
pub use error::{Error, Result};
