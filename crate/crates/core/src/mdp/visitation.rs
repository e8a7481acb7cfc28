use serde::{Deserialize, Serialize};

use super::{ensure_dims, Dims, MarkovPolicy, Policy, Transitions};
use crate::entropy::entropy;
use crate::Result;

/// Per-step state-action distributions `d_h(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitationProfile {
    dims: Dims,
    /// Flat `(h, s, a)` table.
    dist: Vec<f64>,
}

impl VisitationProfile {
    pub fn zeros(dims: Dims) -> Self {
        VisitationProfile { dims, dist: vec![0.0; dims.sa_len()] }
    }

    pub fn from_parts(dims: Dims, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != dims.sa_len() {
            return Err(crate::Error::ShapeMismatch(format!(
                "profile has {} entries, expected {}",
                dist.len(),
                dims.sa_len()
            )));
        }
        Ok(VisitationProfile { dims, dist })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.dist[self.dims.sa(h, s, a)]
    }

    /// The `S·A` slice of step `h`.
    #[inline]
    pub fn step(&self, h: usize) -> &[f64] {
        let n = self.dims.pairs();
        &self.dist[h * n..(h + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.dist
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.dist
    }

    /// `Σ_a d_h(s, a)`.
    pub fn state_marginal(&self, h: usize) -> Vec<f64> {
        self.step(h).chunks(self.dims.actions).map(|c| c.iter().sum()).collect()
    }

    /// Per-step state-action average `(1/H) Σ_h d_h`.
    pub fn averaged(&self) -> Vec<f64> {
        let n = self.dims.pairs();
        let mut avg = vec![0.0; n];
        for h in 0..self.dims.horizon {
            for (x, &d) in avg.iter_mut().zip(self.step(h)) {
                *x += d;
            }
        }
        let inv = 1.0 / self.dims.horizon as f64;
        avg.iter_mut().for_each(|x| *x *= inv);
        avg
    }

    /// Largest deviation of a step mass from 1.
    pub fn simplex_error(&self) -> f64 {
        (0..self.dims.horizon)
            .map(|h| (self.step(h).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of the flow constraints of `mdp`.
    pub fn flow_error<M: Transitions + ?Sized>(&self, mdp: &M) -> f64 {
        let d = self.dims;
        let s1 = mdp.initial_state();
        let mut worst: f64 = 0.0;
        let first = self.state_marginal(0);
        for (s, &m) in first.iter().enumerate() {
            let target = if s == s1 { 1.0 } else { 0.0 };
            worst = worst.max((m - target).abs());
        }
        for h in 0..d.horizon - 1 {
            let mut inflow = vec![0.0; d.states];
            push_forward(mdp, h, self.step(h), d, &mut inflow);
            for (m, f) in self.state_marginal(h + 1).iter().zip(&inflow) {
                worst = worst.max((m - f).abs());
            }
        }
        worst
    }

    /// `self ← (1 − w)·self + w·other`.
    pub fn blend(&mut self, other: &VisitationProfile, w: f64) {
        for (x, &y) in self.dist.iter_mut().zip(&other.dist) {
            *x += w * (y - *x);
        }
    }

    pub fn entropy(&self) -> f64 {
        visitation_entropy(self)
    }
}

/// Adds the next-state mass `Σ_{s,a} p_h(·|s,a) d_h(s,a)` into `out`.
pub(crate) fn push_forward<M: Transitions + ?Sized>(
    mdp: &M,
    h: usize,
    step: &[f64],
    d: Dims,
    out: &mut [f64],
) {
    for s in 0..d.states {
        for a in 0..d.actions {
            let mass = step[s * d.actions + a];
            if mass == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(mdp.next_state_dist(h, s, a)) {
                *o += mass * p;
            }
        }
    }
}

fn markov_visitation<M: Transitions + ?Sized>(mdp: &M, policy: &MarkovPolicy) -> VisitationProfile {
    let d = mdp.dims();
    let mut profile = VisitationProfile::zeros(d);
    let mut state_mass = vec![0.0; d.states];
    state_mass[mdp.initial_state()] = 1.0;
    for h in 0..d.horizon {
        let n = d.pairs();
        let step = &mut profile.dist[h * n..(h + 1) * n];
        for s in 0..d.states {
            if state_mass[s] == 0.0 {
                continue;
            }
            for (a, &pi) in policy.row(h, s).iter().enumerate() {
                step[s * d.actions + a] = state_mass[s] * pi;
            }
        }
        if h + 1 < d.horizon {
            state_mass.fill(0.0);
            push_forward(mdp, h, &profile.dist[h * n..(h + 1) * n], d, &mut state_mass);
        }
    }
    profile
}

/// Exact visitation distribution by forward recursion. Mixtures average the
/// profiles of their components.
pub fn exact_visitation<M, P>(mdp: &M, policy: &P) -> Result<VisitationProfile>
where
    M: Transitions + ?Sized,
    P: Policy + ?Sized,
{
    ensure_dims(mdp.dims(), policy.dims(), "policy")?;
    let comps = policy.components();
    if comps.len() == 1 {
        return Ok(markov_visitation(mdp, &comps[0]));
    }
    let mut total = VisitationProfile::zeros(mdp.dims());
    for c in comps {
        let p = markov_visitation(mdp, c);
        for (x, y) in total.dist.iter_mut().zip(p.dist) {
            *x += y;
        }
    }
    let inv = 1.0 / comps.len() as f64;
    total.dist.iter_mut().for_each(|x| *x *= inv);
    Ok(total)
}

/// `Σ_h H(d_h)` in nats.
pub fn visitation_entropy(profile: &VisitationProfile) -> f64 {
    (0..profile.dims.horizon).map(|h| entropy(profile.step(h))).sum()
}
