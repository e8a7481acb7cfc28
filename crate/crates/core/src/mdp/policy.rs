use serde::{Deserialize, Serialize};

use super::{Dims, ROW_TOLERANCE};
use crate::{Error, Result};

/// Anything that behaves as a uniform mixture of Markov policies. A Markov
/// policy is the one-component mixture.
pub trait Policy {
    fn dims(&self) -> Dims;
    fn components(&self) -> &[MarkovPolicy];
}

/// Per-step action distributions `π_h(a|s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyTable", into = "PolicyTable")]
pub struct MarkovPolicy {
    dims: Dims,
    /// Flat `(h, s, a)` table.
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyTable {
    dims: Dims,
    probs: Vec<f64>,
}

impl TryFrom<PolicyTable> for MarkovPolicy {
    type Error = Error;

    fn try_from(t: PolicyTable) -> Result<Self> {
        MarkovPolicy::new(t.dims, t.probs)
    }
}

impl From<MarkovPolicy> for PolicyTable {
    fn from(p: MarkovPolicy) -> Self {
        PolicyTable { dims: p.dims, probs: p.probs }
    }
}

impl MarkovPolicy {
    pub fn new(dims: Dims, probs: Vec<f64>) -> Result<Self> {
        let policy = Self::from_parts(dims, probs)?;
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                let row = policy.row(h, s);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite())
                    || (sum - 1.0).abs() > ROW_TOLERANCE
                {
                    return Err(Error::InvalidDistribution(format!(
                        "policy row (h={h}, s={s}) = {row:?}"
                    )));
                }
            }
        }
        Ok(policy)
    }

    pub(crate) fn from_parts(dims: Dims, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != dims.sa_len() {
            return Err(Error::ShapeMismatch(format!(
                "policy table has {} entries, expected {} for {dims}",
                probs.len(),
                dims.sa_len()
            )));
        }
        Ok(MarkovPolicy { dims, probs })
    }

    pub fn uniform(dims: Dims) -> Self {
        let p = 1.0 / dims.actions as f64;
        MarkovPolicy { dims, probs: vec![p; dims.sa_len()] }
    }

    /// Deterministic policy from an action table indexed `(h, s)`.
    pub fn deterministic(dims: Dims, actions: &[usize]) -> Result<Self> {
        if actions.len() != dims.horizon * dims.states {
            return Err(Error::ShapeMismatch(format!(
                "action table has {} entries, expected {}",
                actions.len(),
                dims.horizon * dims.states
            )));
        }
        let mut probs = vec![0.0; dims.sa_len()];
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                let a = actions[dims.hs(h, s)];
                if a >= dims.actions {
                    return Err(Error::param("actions", format!("action {a} out of range")));
                }
                probs[dims.sa(h, s, a)] = 1.0;
            }
        }
        Ok(MarkovPolicy { dims, probs })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.dims.sa(h, s, 0);
        &self.probs[start..start + self.dims.actions]
    }

    #[inline]
    pub fn row_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        let start = self.dims.sa(h, s, 0);
        let a = self.dims.actions;
        &mut self.probs[start..start + a]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Sets `π_h(·|s)` to the uniform distribution.
    pub fn make_uniform_at(&mut self, h: usize, s: usize) {
        let p = 1.0 / self.dims.actions as f64;
        self.row_mut(h, s).fill(p);
    }
}

impl Policy for MarkovPolicy {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn components(&self) -> &[MarkovPolicy] {
        std::slice::from_ref(self)
    }
}

/// Uniform mixture of Markov policies. One component is drawn per episode and
/// followed for the whole episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MarkovPolicy>", into = "Vec<MarkovPolicy>")]
pub struct MixturePolicy {
    components: Vec<MarkovPolicy>,
}

impl TryFrom<Vec<MarkovPolicy>> for MixturePolicy {
    type Error = Error;

    fn try_from(components: Vec<MarkovPolicy>) -> Result<Self> {
        MixturePolicy::new(components)
    }
}

impl From<MixturePolicy> for Vec<MarkovPolicy> {
    fn from(m: MixturePolicy) -> Self {
        m.components
    }
}

impl MixturePolicy {
    pub fn new(components: Vec<MarkovPolicy>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::param("components", "mixture must be nonempty"));
        };
        let dims = first.dims();
        if let Some(bad) = components.iter().find(|c| c.dims() != dims) {
            return Err(Error::ShapeMismatch(format!(
                "mixture component has shape {}, expected {dims}",
                bad.dims()
            )));
        }
        Ok(MixturePolicy { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn into_components(self) -> Vec<MarkovPolicy> {
        self.components
    }
}

impl Policy for MixturePolicy {
    fn dims(&self) -> Dims {
        self.components[0].dims()
    }
    fn components(&self) -> &[MarkovPolicy] {
        &self.components
    }
}
