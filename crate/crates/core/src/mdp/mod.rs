//! Tabular finite-horizon MDPs and the objects built on top of them.

mod counts;
mod diagnostics;
mod policy;
mod trajectory;
mod visitation;

pub use counts::{CountTables, EmpiricalModel};
pub use diagnostics::{DiagnosticRecord, DiagnosticsLog};
pub use policy::{MarkovPolicy, MixturePolicy, Policy};
pub use trajectory::{sample_categorical, sample_trajectory, Trajectory};
pub use visitation::{exact_visitation, visitation_entropy, VisitationProfile};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::seed::Rng;
use crate::{Error, Result};

/// Tolerance on transition and policy row sums.
pub const ROW_TOLERANCE: f64 = 1e-12;

/// Sizes of a finite-horizon problem. Steps are zero-based: `h ∈ 0..horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::param(
                "dims",
                format!("sizes must be positive, got S={states} A={actions} H={horizon}"),
            ));
        }
        Ok(Dims { states, actions, horizon })
    }

    /// Number of `(s, a)` pairs.
    #[inline]
    pub fn pairs(&self) -> usize {
        self.states * self.actions
    }

    /// Flat index of `(h, s, a)` in a `H × S × A` table.
    #[inline]
    pub fn sa(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    /// Flat index of `(h, s)` in a `H × S` table.
    #[inline]
    pub fn hs(&self, h: usize, s: usize) -> usize {
        h * self.states + s
    }

    /// Length of a `H × S × A` table.
    #[inline]
    pub fn sa_len(&self) -> usize {
        self.horizon * self.pairs()
    }

    fn check_same(&self, other: Dims, what: &str) -> Result<()> {
        if *self != other {
            return Err(Error::ShapeMismatch(format!("{what}: expected {self}, got {other}")));
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(S={}, A={}, H={})", self.states, self.actions, self.horizon)
    }
}

pub(crate) fn ensure_dims(expected: Dims, got: Dims, what: &str) -> Result<()> {
    expected.check_same(got, what)
}

/// Known transition kernel `p_h(·|s,a)`.
pub trait Transitions {
    fn dims(&self) -> Dims;
    fn initial_state(&self) -> usize;
    fn next_state_dist(&self, h: usize, s: usize, a: usize) -> &[f64];
}

/// Something an agent can interact with episode by episode. The kernel may be
/// hidden; only sampled next states are observable.
pub trait Environment {
    fn dims(&self) -> Dims;
    fn initial_state(&self) -> usize;
    fn step(&self, h: usize, s: usize, a: usize, rng: &mut Rng) -> usize;
}

/// A finite-horizon MDP with a step-dependent transition tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    dims: Dims,
    initial_state: usize,
    /// Flat `(h, s, a, s')` tensor.
    transitions: Vec<f64>,
}

impl TabularMdp {
    /// Builds and validates an MDP.
    pub fn new(dims: Dims, initial_state: usize, transitions: Vec<f64>) -> Result<Self> {
        let mdp = Self::from_parts(dims, initial_state, transitions)?;
        let report = mdp.validate();
        if !report.is_ok() {
            return Err(Error::InvalidDistribution(report.to_string()));
        }
        Ok(mdp)
    }

    /// Builds an MDP checking only the tensor shape. Use [`TabularMdp::validate`]
    /// to inspect the rows.
    pub fn from_parts(dims: Dims, initial_state: usize, transitions: Vec<f64>) -> Result<Self> {
        Dims::new(dims.states, dims.actions, dims.horizon)?;
        let expected = dims.sa_len() * dims.states;
        if transitions.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "transition tensor has {} entries, expected {expected} for {dims}",
                transitions.len()
            )));
        }
        Ok(TabularMdp { dims, initial_state, transitions })
    }

    /// Builds an MDP by filling each row with `fill(h, s, a, row)`. Rows start
    /// at zero.
    pub fn from_fn(
        dims: Dims,
        initial_state: usize,
        mut fill: impl FnMut(usize, usize, usize, &mut [f64]),
    ) -> Result<Self> {
        Dims::new(dims.states, dims.actions, dims.horizon)?;
        let s_count = dims.states;
        let mut transitions = vec![0.0; dims.sa_len() * s_count];
        for h in 0..dims.horizon {
            for s in 0..s_count {
                for a in 0..dims.actions {
                    let start = dims.sa(h, s, a) * s_count;
                    fill(h, s, a, &mut transitions[start..start + s_count]);
                }
            }
        }
        Self::new(dims, initial_state, transitions)
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = self.dims.sa(h, s, a) * self.dims.states;
        &self.transitions[start..start + self.dims.states]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// True when every row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.transitions.chunks(self.dims.states).all(|row| row.contains(&1.0))
    }

    /// Checks every invariant and lists the violations.
    pub fn validate(&self) -> ValidationReport {
        let d = self.dims;
        let mut violations = Vec::new();
        if self.initial_state >= d.states {
            violations.push(Violation::InitialState { state: self.initial_state, states: d.states });
        }
        for h in 0..d.horizon {
            for s in 0..d.states {
                for a in 0..d.actions {
                    let row = self.row(h, s, a);
                    let mut sum = 0.0;
                    for (next, &p) in row.iter().enumerate() {
                        if !p.is_finite() || p < 0.0 {
                            violations.push(Violation::BadEntry { h, s, a, next, value: p });
                        }
                        sum += p;
                    }
                    if !((sum - 1.0).abs() <= ROW_TOLERANCE) {
                        violations.push(Violation::RowSum { h, s, a, sum });
                    }
                }
            }
        }
        ValidationReport { violations }
    }
}

impl Transitions for TabularMdp {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn initial_state(&self) -> usize {
        self.initial_state
    }
    fn next_state_dist(&self, h: usize, s: usize, a: usize) -> &[f64] {
        self.row(h, s, a)
    }
}

impl Environment for TabularMdp {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn initial_state(&self) -> usize {
        self.initial_state
    }
    fn step(&self, h: usize, s: usize, a: usize, rng: &mut Rng) -> usize {
        sample_categorical(self.row(h, s, a), rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InitialState { state: usize, states: usize },
    BadEntry { h: usize, s: usize, a: usize, next: usize, value: f64 },
    RowSum { h: usize, s: usize, a: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InitialState { state, states } => {
                write!(f, "initial state {state} out of range (S={states})")
            }
            Violation::BadEntry { h, s, a, next, value } => {
                write!(f, "entry (h={h}, s={s}, a={a}, s'={next}) = {value} is not a probability")
            }
            Violation::RowSum { h, s, a, sum } => {
                write!(f, "row (h={h}, s={s}, a={a}) sums to {sum}")
            }
        }
    }
}

/// Outcome of [`TabularMdp::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
