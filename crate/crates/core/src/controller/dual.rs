//! Projected subgradient updates of the per-node power multipliers.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Multipliers `theta[0]` (HPN) and `theta[1..=N]` (RRHs) with their step schedule.
///
/// The step of node `i` at iteration `n` is `xi0 * scale[i] / sqrt(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState<T> {
    pub theta: Vec<T>,
    pub xi0: T,
    pub scale: Vec<T>,
    pub iteration: usize,
    pub grad: Vec<T>,
}

impl<T: Scalar> DualState<T> {
    pub fn new(num_rrh: usize, xi0: T) -> Self {
        Self {
            theta: vec![T::zero(); num_rrh + 1],
            xi0,
            scale: vec![T::one(); num_rrh + 1],
            iteration: 0,
            grad: vec![T::zero(); num_rrh + 1],
        }
    }

    /// Step of node `i` for the next update.
    pub fn step(&self, i: usize) -> T {
        let n = T::from_count(self.iteration + 1);
        self.xi0 * self.scale[i] / n.sqrt()
    }

    /// Restarts the step schedule, keeping `theta` as a warm start.
    pub fn restart(&mut self) {
        self.iteration = 0;
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// `theta_i <- [theta_i + xi_i * grad_i]^+`, with `grad_0 = sum u - p_H^max`
/// and `grad_i = sum w + sum v - p_i^max` supplied by the caller.
/// Returns the change of every multiplier.
pub fn update_duals<T: Scalar>(ds: &mut DualState<T>, grad: &[T]) -> Vec<T> {
    debug_assert_eq!(grad.len(), ds.theta.len());
    let mut delta = vec![T::zero(); grad.len()];
    for i in 0..ds.theta.len() {
        let step = ds.step(i);
        let new = (ds.theta[i] + step * grad[i]).pos();
        delta[i] = new - ds.theta[i];
        ds.theta[i] = new;
        ds.grad[i] = grad[i];
    }
    ds.iteration += 1;
    delta
}
