//! Bi-level adaptive scalarization for repeated games with vector payoffs.
//!
//! - [`cones`]: preference cones, dual-cone membership, scalarization.
//! - [`games`]: vector-valued normal-form games and pure equilibrium checks.
//! - [`bandit`]: simplex sampling, IX estimates, entropy mirror steps.
//! - [`bilevel`]: the outer/inner block protocol and run logging.
//! - [`audit`]: offline regret recomputation and bound checks.
//! - [`harness`]: experiment configuration, execution and reporting.

pub mod audit;
pub mod bandit;
pub mod bilevel;
pub mod cones;
pub mod error;
pub mod games;
pub mod harness;

pub use bandit::{LearnerState, SimplexPoint};
pub use bilevel::{BilevelParams, BilevelState, BlockSchedule, Environment, Opponent, RunHistory};
pub use cones::{PolyhedralCone, WeightVector};
pub use error::{Error, Result};
pub use games::{ScalarGame, VectorGame};
