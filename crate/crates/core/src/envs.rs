//! Benchmark environments.
//!
//! Moves that would leave the chain or the grid keep the agent in place.

use rand_distr::{Distribution, Gamma};

use crate::mdp::{Dims, MarkovPolicy, TabularMdp};
use crate::seed::{self, Rng};
use crate::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const UP: usize = 2;
pub const DOWN: usize = 3;

fn check_slip(slip: f64, upper: f64) -> Result<()> {
    if !(slip >= 0.0 && slip < upper) {
        return Err(Error::param("slip", format!("{slip} outside [0, {upper})")));
    }
    Ok(())
}

fn chain_row(len: usize, s: usize, a: usize, slip: f64, row: &mut [f64]) {
    let left = s.saturating_sub(1);
    let right = (s + 1).min(len - 1);
    let (intended, opposite) = if a == RIGHT { (right, left) } else { (left, right) };
    row[intended] += 1.0 - slip;
    row[opposite] += slip;
}

/// Chain of `len` states with actions left/right. Each move goes the opposite
/// way with probability `slip`. The episode starts in the middle state.
pub fn double_chain(len: usize, slip: f64, horizon: usize) -> Result<TabularMdp> {
    if len < 3 || len.is_multiple_of(2) {
        return Err(Error::param("length", format!("{len} is not an odd integer >= 3")));
    }
    check_slip(slip, 0.5)?;
    let dims = Dims::new(len, 2, horizon)?;
    TabularMdp::from_fn(dims, (len - 1) / 2, |_, s, a, row| chain_row(len, s, a, slip, row))
}

/// Double Chain where any action taken in the left end state moves to a state
/// drawn uniformly from the whole chain.
pub fn double_chain_resampling(len: usize, slip: f64, horizon: usize) -> Result<TabularMdp> {
    if len < 3 || len.is_multiple_of(2) {
        return Err(Error::param("length", format!("{len} is not an odd integer >= 3")));
    }
    check_slip(slip, 0.5)?;
    let dims = Dims::new(len, 2, horizon)?;
    let uniform = 1.0 / len as f64;
    TabularMdp::from_fn(dims, (len - 1) / 2, |_, s, a, row| {
        if s == 0 {
            row.fill(uniform);
        } else {
            chain_row(len, s, a, slip, row);
        }
    })
}

/// `width × height` grid, state `y·width + x`, actions left/right/up/down with
/// up increasing `y`. With probability `slip` the move goes in one of the three
/// other directions, chosen uniformly. The episode starts at the middle cell.
pub fn grid_world(width: usize, height: usize, slip: f64, horizon: usize) -> Result<TabularMdp> {
    if width < 2 || height < 2 {
        return Err(Error::param("dims", format!("grid {width}x{height} must be at least 2x2")));
    }
    check_slip(slip, 1.0)?;
    let dims = Dims::new(width * height, 4, horizon)?;
    let start = (height / 2) * width + width / 2;
    let target = |s: usize, dir: usize| -> usize {
        let (x, y) = (s % width, s / width);
        let (x, y) = match dir {
            LEFT => (x.saturating_sub(1), y),
            RIGHT => ((x + 1).min(width - 1), y),
            UP => (x, (y + 1).min(height - 1)),
            _ => (x, y.saturating_sub(1)),
        };
        y * width + x
    };
    TabularMdp::from_fn(dims, start, |_, s, a, row| {
        for dir in 0..4 {
            row[target(s, dir)] += if dir == a { 1.0 - slip } else { slip / 3.0 };
        }
    })
}

/// Draws a point of the symmetric Dirichlet(α) simplex into `out`.
pub fn dirichlet_into(alpha: f64, rng: &mut Rng, out: &mut [f64]) {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha checked by callers");
    let mut sum = 0.0;
    for x in out.iter_mut() {
        *x = gamma.sample(rng);
        sum += *x;
    }
    if sum > 0.0 && sum.is_finite() {
        out.iter_mut().for_each(|x| *x /= sum);
    } else {
        // every draw underflowed: the limit of Dirichlet(α→0) is a vertex
        let i = crate::mdp::sample_categorical(&vec![1.0 / out.len() as f64; out.len()], rng);
        out.fill(0.0);
        out[i] = 1.0;
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("{alpha} is not a positive number")));
    }
    Ok(())
}

/// MDP with rows drawn from a symmetric Dirichlet(α); starts in state 0.
pub fn random_mdp(states: usize, actions: usize, horizon: usize, seed: u64, alpha: f64) -> Result<TabularMdp> {
    check_alpha(alpha)?;
    let dims = Dims::new(states, actions, horizon)?;
    let mut rng = seed::root(seed);
    let mut transitions = vec![0.0; dims.sa_len() * states];
    for row in transitions.chunks_mut(states) {
        dirichlet_into(alpha, &mut rng, row);
    }
    TabularMdp::from_parts(dims, 0, transitions)
}

/// Markov policy with rows drawn from a symmetric Dirichlet(α).
pub fn random_policy(dims: Dims, alpha: f64, rng: &mut Rng) -> Result<MarkovPolicy> {
    check_alpha(alpha)?;
    let mut probs = vec![0.0; dims.sa_len()];
    for row in probs.chunks_mut(dims.actions) {
        dirichlet_into(alpha, rng, row);
    }
    MarkovPolicy::from_parts(dims, probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_chain_instance() {
        let mdp = double_chain(31, 0.1, 20).unwrap();
        assert_eq!(mdp.dims(), Dims::new(31, 2, 20).unwrap());
        assert_eq!(mdp.initial_state(), 15);
        assert!(mdp.validate().is_ok());
    }

    #[test]
    fn chain_boundary_rows() {
        let mdp = double_chain(5, 0.1, 3).unwrap();
        assert_eq!(mdp.row(0, 0, LEFT), &[0.9, 0.1, 0.0, 0.0, 0.0]);
        assert_eq!(mdp.row(2, 4, RIGHT), &[0.0, 0.0, 0.0, 0.1, 0.9]);
        let det = double_chain(5, 0.0, 3).unwrap();
        assert_eq!(det.row(1, 2, RIGHT), &[0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(det.row(1, 4, RIGHT), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(det.is_deterministic());
    }

    #[test]
    fn chain_parameters_are_checked() {
        assert!(double_chain(2, 0.1, 3).is_err());
        assert!(double_chain(4, 0.1, 3).is_err());
        assert!(double_chain(5, 0.5, 3).is_err());
        assert!(double_chain(5, -0.1, 3).is_err());
        assert!(grid_world(1, 5, 0.1, 3).is_err());
        assert!(grid_world(3, 3, 1.0, 3).is_err());
    }

    #[test]
    fn resampling_variant() {
        let mdp = double_chain_resampling(5, 0.1, 2).unwrap();
        assert_eq!(mdp.row(0, 0, RIGHT), &[0.2; 5]);
        assert_eq!(mdp.row(0, 1, RIGHT), double_chain(5, 0.1, 2).unwrap().row(0, 1, RIGHT));
    }

    #[test]
    fn grid_rows() {
        let mdp = grid_world(21, 21, 0.05, 2).unwrap();
        assert_eq!(mdp.dims().states, 441);
        assert_eq!(mdp.initial_state(), 10 * 21 + 10);
        let s = 5 * 21 + 5;
        let row = mdp.row(0, s, UP);
        assert!((row[6 * 21 + 5] - 0.95).abs() < 1e-15);
        for other in [5 * 21 + 4, 5 * 21 + 6, 4 * 21 + 5] {
            assert!((row[other] - 0.05 / 3.0).abs() < 1e-15);
        }
        let det = grid_world(3, 3, 0.0, 1).unwrap();
        assert_eq!(det.row(0, 4, UP)[7], 1.0);
        assert_eq!(det.row(0, 0, LEFT)[0], 1.0);
        assert!(mdp.validate().is_ok());
    }

    #[test]
    fn random_mdp_properties() {
        let a = random_mdp(4, 2, 3, 9, 1.0).unwrap();
        assert_eq!(a, random_mdp(4, 2, 3, 9, 1.0).unwrap());
        assert!(a.validate().is_ok());
        let single = random_mdp(1, 3, 2, 0, 0.5).unwrap();
        assert!(single.transitions().iter().all(|&p| p == 1.0));
        let flat = random_mdp(4, 5, 5, 3, 1e4).unwrap();
        let dev = flat.transitions().iter().map(|p| (p - 0.25).abs()).fold(0.0, f64::max);
        assert!(dev < 0.05, "max deviation {dev}");
        let sparse = random_mdp(3, 2, 2, 4, 1e-3).unwrap();
        assert!(sparse.validate().is_ok());
        assert!(random_mdp(2, 2, 2, 0, 0.0).is_err());
    }
}
