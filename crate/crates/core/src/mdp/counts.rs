use serde::{Deserialize, Serialize};

use super::{ensure_dims, Dims, TabularMdp, Trajectory, Transitions};
use crate::Result;

/// Visit counts `n_h(s,a)` and transition counts `n_h(s'|s,a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTables {
    dims: Dims,
    visits: Vec<u64>,
    transitions: Vec<u64>,
    episodes: u64,
}

impl CountTables {
    pub fn new(dims: Dims) -> Self {
        CountTables {
            dims,
            visits: vec![0; dims.sa_len()],
            transitions: vec![0; dims.sa_len() * dims.states],
            episodes: 0,
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    #[inline]
    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.dims.sa(h, s, a)]
    }

    pub fn visit_table(&self) -> &[u64] {
        &self.visits
    }

    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[u64] {
        let start = self.dims.sa(h, s, a) * self.dims.states;
        &self.transitions[start..start + self.dims.states]
    }

    /// Adds one episode.
    pub fn record(&mut self, traj: &Trajectory) -> Result<()> {
        self.check(traj)?;
        let d = self.dims;
        for (h, (s, a, next)) in traj.steps().enumerate() {
            let i = d.sa(h, s, a);
            self.visits[i] += 1;
            self.transitions[i * d.states + next] += 1;
        }
        self.episodes += 1;
        Ok(())
    }

    /// Adds every transition of one episode at every step, keeping the tables
    /// equal to `pooled_over_steps` of the per-step counts.
    pub fn record_pooled(&mut self, traj: &Trajectory) -> Result<()> {
        self.check(traj)?;
        let d = self.dims;
        let n = d.pairs();
        for (s, a, next) in traj.steps() {
            let base = s * d.actions + a;
            for h in 0..d.horizon {
                let i = h * n + base;
                self.visits[i] += 1;
                self.transitions[i * d.states + next] += 1;
            }
        }
        self.episodes += d.horizon as u64;
        Ok(())
    }

    fn check(&self, traj: &Trajectory) -> Result<()> {
        if traj.horizon() != self.dims.horizon {
            return Err(crate::Error::ShapeMismatch(format!(
                "trajectory of length {} for horizon {}",
                traj.horizon(),
                self.dims.horizon
            )));
        }
        let d = self.dims;
        for (h, (s, a, next)) in traj.steps().enumerate() {
            if s >= d.states || a >= d.actions || next >= d.states {
                return Err(crate::Error::ShapeMismatch(format!(
                    "trajectory step {h} = ({s}, {a}, {next}) out of range for {d}"
                )));
            }
        }
        Ok(())
    }

    /// Visits of `(s, a)` summed over steps.
    pub fn pooled_visits(&self, s: usize, a: usize) -> u64 {
        (0..self.dims.horizon).map(|h| self.visits(h, s, a)).sum()
    }

    /// State visits `Σ_a n_h(s, a)`.
    pub fn state_visits(&self, h: usize, s: usize) -> u64 {
        (0..self.dims.actions).map(|a| self.visits(h, s, a)).sum()
    }

    /// Checks the table invariants.
    pub fn is_consistent(&self) -> bool {
        let d = self.dims;
        let rows_ok = (0..d.sa_len()).all(|i| {
            self.transitions[i * d.states..(i + 1) * d.states].iter().sum::<u64>() == self.visits[i]
        });
        let steps_ok = (0..d.horizon).all(|h| {
            self.visits[h * d.pairs()..(h + 1) * d.pairs()].iter().sum::<u64>() == self.episodes
        });
        rows_ok && steps_ok
    }

    /// Counts with every step's tables replaced by their sum over steps.
    pub fn pooled_over_steps(&self) -> CountTables {
        let d = self.dims;
        let mut out = CountTables::new(d);
        let n = d.pairs();
        for h in 0..d.horizon {
            for i in 0..n {
                let v = self.visits[h * n + i];
                for hh in 0..d.horizon {
                    out.visits[hh * n + i] += v;
                }
                for next in 0..d.states {
                    let c = self.transitions[(h * n + i) * d.states + next];
                    for hh in 0..d.horizon {
                        out.transitions[(hh * n + i) * d.states + next] += c;
                    }
                }
            }
        }
        out.episodes = self.episodes * d.horizon as u64;
        out
    }
}

/// Maximum-likelihood transition estimate; rows of unvisited `(h, s, a)` are
/// uniform over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalModel {
    mdp: TabularMdp,
}

impl EmpiricalModel {
    pub fn from_counts(counts: &CountTables, initial_state: usize) -> Self {
        let d = counts.dims();
        let uniform = 1.0 / d.states as f64;
        let mut transitions = vec![0.0; d.sa_len() * d.states];
        for h in 0..d.horizon {
            for s in 0..d.states {
                for a in 0..d.actions {
                    let n = counts.visits(h, s, a);
                    let row = &mut transitions[d.sa(h, s, a) * d.states..][..d.states];
                    if n == 0 {
                        row.fill(uniform);
                    } else {
                        let inv = 1.0 / n as f64;
                        for (p, &c) in row.iter_mut().zip(counts.transition_row(h, s, a)) {
                            *p = c as f64 * inv;
                        }
                    }
                }
            }
        }
        let mdp = TabularMdp::from_parts(d, initial_state, transitions)
            .expect("shape follows from the count tables");
        EmpiricalModel { mdp }
    }

    /// Wraps a known kernel, e.g. to plan on the true model.
    pub fn from_mdp(mdp: TabularMdp) -> Self {
        EmpiricalModel { mdp }
    }

    pub fn as_mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn dims(&self) -> Dims {
        self.mdp.dims()
    }

    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        self.mdp.row(h, s, a)
    }

    /// Largest L1 distance to `truth` over rows with at least `min_visits`.
    pub fn max_l1_error(&self, truth: &TabularMdp, counts: &CountTables, min_visits: u64) -> Result<f64> {
        let d = self.dims();
        ensure_dims(d, truth.dims(), "reference model")?;
        let mut worst: f64 = 0.0;
        for h in 0..d.horizon {
            for s in 0..d.states {
                for a in 0..d.actions {
                    if counts.visits(h, s, a) < min_visits.max(1) {
                        continue;
                    }
                    let l1: f64 = self
                        .row(h, s, a)
                        .iter()
                        .zip(truth.row(h, s, a))
                        .map(|(x, y)| (x - y).abs())
                        .sum();
                    worst = worst.max(l1);
                }
            }
        }
        Ok(worst)
    }
}

impl Transitions for EmpiricalModel {
    fn dims(&self) -> Dims {
        self.mdp.dims()
    }
    fn initial_state(&self) -> usize {
        self.mdp.initial_state()
    }
    fn next_state_dist(&self, h: usize, s: usize, a: usize) -> &[f64] {
        self.mdp.row(h, s, a)
    }
}
