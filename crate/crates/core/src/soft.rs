//! Entropy-regularized Bellman equations.
//!
//! With rewards `r`, policy-entropy weight `λ` and transition-entropy weight
//! `κ`, the regularized values of a policy satisfy
//!
//! ```text
//! Q_h(s,a) = r_h(s,a) + κ·H(p_h(·|s,a)) + Σ_s' p_h(s'|s,a) V_{h+1}(s')
//! V_h(s)   = Σ_a π_h(a|s) Q_h(s,a) + λ·H(π_h(·|s))
//! ```
//!
//! and the optimal values replace the second line by the log-sum-exp
//! `λ·log Σ_a exp(Q_h(s,a)/λ)`, attained by the softmax policy.
//!
//! The transition-entropy term is only added for steps before the last one:
//! the next state after the final action is not part of a trajectory, so with
//! `r = 0` and `κ = λ = 1` the value at the initial state is exactly the
//! Shannon entropy of the distribution over length-`H` state-action paths.

use serde::{Deserialize, Serialize};

use crate::entropy::{entropy, mean_var};
use crate::mdp::{ensure_dims, Dims, MarkovPolicy, Transitions};
use crate::{Error, Result};

/// Mirror map used for the policy regularizer. Only Shannon entropy has a
/// closed-form conjugate here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Regularizer {
    #[default]
    Shannon,
}

/// Rewards and regularization weights of a planning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedSpec {
    dims: Dims,
    rewards: Vec<f64>,
    reward_max: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub regularizer: Regularizer,
}

impl RegularizedSpec {
    /// Rewards indexed `(h, s, a)`, all in `[0, ∞)`; the declared reward
    /// bound is their maximum.
    pub fn new(dims: Dims, rewards: Vec<f64>, lambda: f64, kappa: f64) -> Result<Self> {
        if rewards.len() != dims.sa_len() {
            return Err(Error::ShapeMismatch(format!(
                "reward table has {} entries, expected {}",
                rewards.len(),
                dims.sa_len()
            )));
        }
        if let Some(r) = rewards.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::param("rewards", format!("reward {r} outside [0, inf)")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::param("lambda", format!("{lambda} is not a nonnegative number")));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::param("kappa", format!("{kappa} is not a nonnegative number")));
        }
        let reward_max = rewards.iter().copied().fold(0.0, f64::max);
        Ok(RegularizedSpec { dims, rewards, reward_max, lambda, kappa, regularizer: Regularizer::Shannon })
    }

    /// Trajectory-entropy maximization: no reward, `κ = λ = 1`.
    pub fn mtee(dims: Dims) -> Self {
        Self::new(dims, vec![0.0; dims.sa_len()], 1.0, 1.0).expect("valid by construction")
    }

    /// Plain reward maximization.
    pub fn unregularized(dims: Dims, rewards: Vec<f64>) -> Result<Self> {
        Self::new(dims, rewards, 0.0, 0.0)
    }

    /// Raises the declared reward bound (it must dominate every reward).
    pub fn with_reward_max(mut self, reward_max: f64) -> Result<Self> {
        if !(reward_max >= self.reward_max) {
            return Err(Error::param(
                "reward_max",
                format!("{reward_max} below the largest reward {}", self.reward_max),
            ));
        }
        self.reward_max = reward_max;
        Ok(self)
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[self.dims.sa(h, s, a)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward_max(&self) -> f64 {
        self.reward_max
    }

    /// Per-step cap `r_max + κ·log S + λ·log A`.
    pub fn rmax(&self) -> f64 {
        self.reward_max
            + self.kappa * (self.dims.states as f64).ln()
            + self.lambda * (self.dims.actions as f64).ln()
    }
}

/// Optimal and evaluated value tables. `v` has `H + 1` steps, the last one
/// identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    dims: Dims,
    q: Vec<f64>,
    v: Vec<f64>,
    pub policy: MarkovPolicy,
}

impl ValueTables {
    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.dims.sa(h, s, a)]
    }

    #[inline]
    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.dims.sa(h, s, 0);
        &self.q[start..start + self.dims.actions]
    }

    /// `V_h(s)` for `h ∈ 0..=H`.
    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.dims.states + s]
    }

    /// `V_{h}(·)` as a slice of length `S`.
    #[inline]
    pub fn v_step(&self, h: usize) -> &[f64] {
        &self.v[h * self.dims.states..(h + 1) * self.dims.states]
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
}

/// Variances of the regularized return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTables {
    dims: Dims,
    qvar: Vec<f64>,
    vvar: Vec<f64>,
}

impl VarianceTables {
    pub fn qvar(&self, h: usize, s: usize, a: usize) -> f64 {
        self.qvar[self.dims.sa(h, s, a)]
    }

    /// `Vvar_h(s)` for `h ∈ 0..=H`.
    pub fn vvar(&self, h: usize, s: usize) -> f64 {
        self.vvar[h * self.dims.states + s]
    }
}

/// `F_λ(q) = λ·log Σ_a exp(q_a/λ)` and its maximizer `softmax(q/λ)`, written
/// into `policy`. At `λ = 0` this is the hard max with the lowest maximizing
/// index.
pub fn soft_conjugate_into(q: &[f64], lambda: f64, policy: &mut [f64]) -> f64 {
    let (best, m) = q
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) });
    if lambda == 0.0 {
        policy.fill(0.0);
        policy[best] = 1.0;
        return m;
    }
    let mut z = 0.0;
    for (p, &x) in policy.iter_mut().zip(q) {
        *p = ((x - m) / lambda).exp();
        z += *p;
    }
    let inv = 1.0 / z;
    policy.iter_mut().for_each(|p| *p *= inv);
    m + lambda * z.ln()
}

/// Allocating variant of [`soft_conjugate_into`].
pub fn soft_conjugate(q: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", format!("{lambda} is negative")));
    }
    if q.is_empty() || q.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("q", "row must be nonempty and finite"));
    }
    let mut policy = vec![0.0; q.len()];
    let value = soft_conjugate_into(q, lambda, &mut policy);
    Ok((value, policy))
}

/// `H(p_h(·|s,a))` for every `(h, s, a)`, zero at the last step.
pub fn transition_entropy_table<M: Transitions + ?Sized>(model: &M) -> Vec<f64> {
    let d = model.dims();
    let mut out = vec![0.0; d.sa_len()];
    for h in 0..d.horizon.saturating_sub(1) {
        for s in 0..d.states {
            for a in 0..d.actions {
                out[d.sa(h, s, a)] = entropy(model.next_state_dist(h, s, a));
            }
        }
    }
    out
}

#[inline]
pub(crate) fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn backward<M, F>(model: &M, spec: &RegularizedSpec, mut choose: F) -> ValueTables
where
    M: Transitions + ?Sized,
    F: FnMut(usize, usize, &[f64], &mut [f64]) -> f64,
{
    let d = model.dims();
    let ent = if spec.kappa > 0.0 { transition_entropy_table(model) } else { vec![0.0; d.sa_len()] };
    let mut q = vec![0.0; d.sa_len()];
    let mut v = vec![0.0; (d.horizon + 1) * d.states];
    let mut probs = vec![0.0; d.sa_len()];
    for h in (0..d.horizon).rev() {
        let (head, next) = v.split_at_mut((h + 1) * d.states);
        let next = &next[..d.states];
        for s in 0..d.states {
            for a in 0..d.actions {
                let i = d.sa(h, s, a);
                q[i] = spec.rewards[i]
                    + spec.kappa * ent[i]
                    + dot(model.next_state_dist(h, s, a), next);
            }
            let start = d.sa(h, s, 0);
            let row = &q[start..start + d.actions];
            head[h * d.states + s] = choose(h, s, row, &mut probs[start..start + d.actions]);
        }
    }
    let policy = MarkovPolicy::from_parts(d, probs).expect("shape follows from dims");
    ValueTables { dims: d, q, v, policy }
}

/// Optimal regularized values and the softmax (or greedy at `λ = 0`) policy,
/// by one backward pass.
pub fn solve_regularized<M: Transitions + ?Sized>(model: &M, spec: &RegularizedSpec) -> Result<ValueTables> {
    ensure_dims(model.dims(), spec.dims(), "spec")?;
    let lambda = spec.lambda;
    Ok(backward(model, spec, |_, _, row, out| soft_conjugate_into(row, lambda, out)))
}

/// Regularized values of a fixed policy.
pub fn evaluate_regularized<M: Transitions + ?Sized>(
    model: &M,
    spec: &RegularizedSpec,
    policy: &MarkovPolicy,
) -> Result<ValueTables> {
    ensure_dims(model.dims(), spec.dims(), "spec")?;
    ensure_dims(model.dims(), policy.dims(), "policy")?;
    let lambda = spec.lambda;
    Ok(backward(model, spec, |h, s, row, out| {
        let pi = policy.row(h, s);
        out.copy_from_slice(pi);
        let reg = if lambda > 0.0 { lambda * entropy(pi) } else { 0.0 };
        dot(pi, row) + reg
    }))
}

/// Variance of the regularized return `Σ_h r_h + κ·H(p_h) + λ·H(π_h)` by the
/// law of total variance.
pub fn variance_bellman<M: Transitions + ?Sized>(
    model: &M,
    spec: &RegularizedSpec,
    policy: &MarkovPolicy,
) -> Result<VarianceTables> {
    let values = evaluate_regularized(model, spec, policy)?;
    let d = model.dims();
    let mut qvar = vec![0.0; d.sa_len()];
    let mut vvar = vec![0.0; (d.horizon + 1) * d.states];
    for h in (0..d.horizon).rev() {
        for s in 0..d.states {
            for a in 0..d.actions {
                let p = model.next_state_dist(h, s, a);
                let (_, var_next) = mean_var(p, values.v_step(h + 1));
                let spread = dot(p, &vvar[(h + 1) * d.states..(h + 2) * d.states]);
                qvar[d.sa(h, s, a)] = var_next + spread;
            }
            let pi = policy.row(h, s);
            let (_, var_q) = mean_var(pi, values.q_row(h, s));
            let start = d.sa(h, s, 0);
            vvar[h * d.states + s] = var_q + dot(pi, &qvar[start..start + d.actions]);
        }
    }
    Ok(VarianceTables { dims: d, qvar, vvar })
}

/// Shannon entropy of the distribution over length-`H` state-action paths of a
/// Markov policy, computed by policy evaluation with entropy rewards.
pub fn trajectory_entropy<M: Transitions + ?Sized>(model: &M, policy: &MarkovPolicy) -> Result<f64> {
    let spec = RegularizedSpec::mtee(model.dims());
    let values = evaluate_regularized(model, &spec, policy)?;
    Ok(values.v(0, model.initial_state()))
}
