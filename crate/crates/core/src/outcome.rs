use serde::{Deserialize, Serialize};

/// Unnormalized conditional state together with its trace, which is the
/// probability of the conditioning event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessOutcome<S, T = f64> {
    pub state: S,
    pub probability: T,
}

/// States that can be divided by a positive scalar.
pub trait Scalable<T> {
    fn scaled(&self, factor: T) -> Self;
}

impl<S: Scalable<T>, T: num_traits::Float> ProcessOutcome<S, T> {
    /// The conditional state normalized to unit trace, or `None` when the
    /// event has probability zero.
    pub fn normalize(&self) -> Option<S> {
        (self.probability > T::zero()).then(|| self.state.scaled(self.probability.recip()))
    }
}
