use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Environment, Policy};
use crate::seed::Rng;

/// One episode: `H` state-action pairs plus the terminal state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    /// `H + 1` states, the last one is terminal.
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn steps(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.actions
            .iter()
            .enumerate()
            .map(move |(h, &a)| (self.states[h], a, self.states[h + 1]))
    }
}

/// Draws an index from a probability vector.
pub fn sample_categorical(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the accumulated mass
    last
}

/// Rolls out one episode. For a mixture the component is drawn once, before
/// the first step.
pub fn sample_trajectory<E, P>(env: &E, policy: &P, rng: &mut Rng) -> Trajectory
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    let comps = policy.components();
    let pi = if comps.len() == 1 { &comps[0] } else { &comps[rng.random_range(0..comps.len())] };
    let horizon = env.dims().horizon;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut s = env.initial_state();
    states.push(s);
    for h in 0..horizon {
        let a = sample_categorical(pi.row(h, s), rng);
        s = env.step(h, s, a, rng);
        actions.push(a);
        states.push(s);
    }
    Trajectory { states, actions }
}
