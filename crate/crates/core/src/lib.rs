//! Fairness-to-welfare interpolation.
//!
//! Given an ex-ante fair mechanism (only accessible by sampling), a
//! welfare-maximizing mechanism with approximation factor `lambda`, and a
//! fairness budget `alpha`, the algorithms in [`mix`] produce randomized
//! solutions whose output law stays within total-variation distance `alpha`
//! of the fair prior while recovering as much welfare as possible.
//!
//! * [`distribution`] and [`instance`] hold the abstract framework: sparse
//!   distributions, value functions, samplers and the instance contract.
//! * [`mix`] implements epsilon-Mix and Simple-Mix.
//! * [`oracle`] has exact constructions (the optimal fair distribution, bound
//!   formulas) and Monte Carlo guarantee checks for small explicit instances.
//! * [`assignment`] and [`sortition`] are concrete solution spaces.
//! * [`ingest`] parses bid files and demographic tables.

pub mod assignment;
pub mod distribution;
mod error;
pub mod ingest;
pub mod instance;
pub mod mix;
pub mod oracle;
pub mod seed;
pub mod sortition;

pub use distribution::{expected_value, is_alpha_fair, tv_distance, Distribution, SolutionId};
pub use error::{Error, Result};
pub use instance::{
    ExplicitPrior, FairPrior, FixedMechanism, FwiInstance, Solution, TabularValue, ValueFunction,
    WelfareMechanism,
};
pub use mix::{epsilon_mix, sample_size, simple_mix, simple_mix_distribution, trim_weights, Algorithm};

/// Tolerance used for normalization and fairness comparisons.
pub const TOLERANCE: f64 = 1e-9;
