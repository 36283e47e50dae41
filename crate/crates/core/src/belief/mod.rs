//! Priors over feature vectors and the posteriors they induce.
//!
//! Three families are supported: finite tables ([`DiscreteBelief`]),
//! independent binary features ([`BernoulliBelief`]) and multivariate normals
//! ([`GaussianBelief`]). A message shown to the human is a [`HighlightSet`].

mod bernoulli;
mod discrete;
mod empirical;
mod gaussian;
mod message;

pub use bernoulli::BernoulliBelief;
pub use discrete::{naive_posterior_discrete, sophisticated_posterior_discrete, DiscreteBelief};
pub use empirical::{
    empirical_sophisticated_posterior, CellStats, EmpiricalEstimate, EmpiricalSupport, Occupancy,
};
pub use gaussian::{condition_gaussian, GaussianBelief};
pub use message::{HighlightSet, Snapper};

use rand::Rng;

/// Something that can draw feature vectors from a prior.
pub trait PriorSampler: Sync {
    /// Dimension of the drawn vectors.
    fn dim(&self) -> usize;

    /// Draws one feature vector.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>;
}

/// Whether two real codes are equal up to the discrete matching tolerance.
pub(crate) fn values_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= crate::TOLERANCE
}
