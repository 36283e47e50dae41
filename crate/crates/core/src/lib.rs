//! Feature highlighting: an algorithm reveals at most `k` of `d` features of a
//! decision instance to a bandwidth-constrained human, who then updates either
//! naively (on the revealed values only) or in a sophisticated way (also
//! conditioning on the fact that these particular features were chosen).
//!
//! The crate is organized around the pieces of that interaction:
//!
//! - [`belief`]: priors (discrete tables, independent Bernoulli, Gaussian) and
//!   their naive, sophisticated and empirical posteriors.
//! - [`loss`]: quadratic losses, Bayes actions and realized losses.
//! - [`naive`]: incremental naive-updating models shared by every policy.
//! - [`policies`]: the fixed (ex-ante) and contextual highlighting rules.
//! - [`risk`]: exact and Monte-Carlo risk, gap metrics and the private
//!   information comparison.
//! - [`asymptotics`]: limit risks for many independent binary features.
//! - [`hardness`]: the reduction from Euclidean 2-means and brute-force checks.
//! - [`gauss2d`]: the two-dimensional Gaussian best-response optimizer.

pub mod asymptotics;
pub mod belief;
mod error;
pub mod gauss2d;
pub mod hardness;
pub mod loss;
pub mod naive;
pub mod policies;
pub mod risk;
pub(crate) mod select;

pub use belief::{
    BernoulliBelief, DiscreteBelief, GaussianBelief, HighlightSet, PriorSampler, Snapper,
};
pub use error::{Error, Result};
pub use loss::{Action, LossSpec, OutcomeModel};
pub use naive::NaiveModel;
pub use policies::{Highlighter, PolicyKind, PolicySpec};
pub use risk::{AgentType, GapReport, RiskReport};

/// Absolute tolerance used when comparing scores for ties, early-stopping
/// decisions and discrete value matches.
pub const TOLERANCE: f64 = 1e-9;

/// Relative tolerance for declaring two heuristic scores tied.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

/// Deterministic random stream `stream` derived from `seed`.
///
/// Parallel loops give item `i` the stream `i`, so results do not depend on
/// how work is scheduled across threads.
pub fn seeded_stream(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
