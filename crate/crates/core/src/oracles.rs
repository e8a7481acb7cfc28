//! Reference computations used to check the algorithms: exhaustive trajectory
//! enumeration, a Frank-Wolfe solver for the maximum visitation-entropy
//! policy, and Monte-Carlo return statistics.

use serde::{Deserialize, Serialize};

use crate::entropy::{entropy, neg_xlogx, smoothed_entropy_grad};
use crate::mdp::{
    ensure_dims, exact_visitation, sample_trajectory, Dims, MarkovPolicy, MixturePolicy, TabularMdp,
    Transitions, VisitationProfile,
};
use crate::seed;
use crate::soft::{solve_regularized, transition_entropy_table, RegularizedSpec};
use crate::{Error, Result};

/// Largest number of paths `(SA)^H` that [`enumerate_trajectories`] accepts.
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// One length-`H` state-action path and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProb {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub prob: f64,
}

/// Exact distribution over state-action paths of a Markov policy. Paths of
/// zero probability are omitted.
#[derive(Debug, Clone)]
pub struct TrajectoryTable {
    dims: Dims,
    paths: Vec<PathProb>,
}

impl TrajectoryTable {
    pub fn paths(&self) -> &[PathProb] {
        &self.paths
    }

    pub fn total_mass(&self) -> f64 {
        self.paths.iter().map(|p| p.prob).sum()
    }

    /// Shannon entropy of the path distribution.
    pub fn entropy(&self) -> f64 {
        self.paths.iter().map(|p| neg_xlogx(p.prob)).sum()
    }

    /// Per-step state-action marginals.
    pub fn marginals(&self) -> VisitationProfile {
        let d = self.dims;
        let mut profile = VisitationProfile::zeros(d);
        let dist = profile.as_mut_slice();
        for p in &self.paths {
            for h in 0..d.horizon {
                dist[d.sa(h, p.states[h], p.actions[h])] += p.prob;
            }
        }
        profile
    }

    /// `KL(q, ⊗_h d_h)` against the product of the given per-step marginals.
    pub fn kl_to_product(&self, profile: &VisitationProfile) -> f64 {
        let d = self.dims;
        self.paths
            .iter()
            .map(|p| {
                let log_prod: f64 =
                    (0..d.horizon).map(|h| profile.get(h, p.states[h], p.actions[h]).ln()).sum();
                p.prob * (p.prob.ln() - log_prod)
            })
            .sum()
    }

    /// Mean and variance of the regularized return
    /// `Σ_h r_h + κ·H(p_h) + λ·H(π_h)` along each path.
    pub fn return_moments<M: Transitions + ?Sized>(
        &self,
        model: &M,
        spec: &RegularizedSpec,
        policy: &MarkovPolicy,
    ) -> (f64, f64) {
        let ent = transition_entropy_table(model);
        let returns: Vec<(f64, f64)> = self
            .paths
            .iter()
            .map(|p| (p.prob, path_return(self.dims, spec, policy, &ent, &p.states, &p.actions)))
            .collect();
        let mean: f64 = returns.iter().map(|(q, g)| q * g).sum();
        let var: f64 = returns.iter().map(|(q, g)| q * (g - mean) * (g - mean)).sum();
        (mean, var)
    }
}

fn path_return(
    d: Dims,
    spec: &RegularizedSpec,
    policy: &MarkovPolicy,
    transition_entropy: &[f64],
    states: &[usize],
    actions: &[usize],
) -> f64 {
    (0..d.horizon)
        .map(|h| {
            let (s, a) = (states[h], actions[h]);
            let i = d.sa(h, s, a);
            let reg = if spec.lambda > 0.0 { spec.lambda * entropy(policy.row(h, s)) } else { 0.0 };
            spec.rewards()[i] + spec.kappa * transition_entropy[i] + reg
        })
        .sum()
}

/// Lists every path of positive probability under `policy`.
pub fn enumerate_trajectories<M: Transitions + ?Sized>(
    mdp: &M,
    policy: &MarkovPolicy,
) -> Result<TrajectoryTable> {
    let d = mdp.dims();
    ensure_dims(d, policy.dims(), "policy")?;
    let paths_bound = (d.pairs() as f64).powi(d.horizon as i32);
    if paths_bound > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { paths: paths_bound, limit: ENUMERATION_LIMIT });
    }
    let mut paths = Vec::new();
    let mut states = vec![0; d.horizon];
    let mut actions = vec![0; d.horizon];
    fn walk<M: Transitions + ?Sized>(
        mdp: &M,
        policy: &MarkovPolicy,
        h: usize,
        s: usize,
        prob: f64,
        states: &mut Vec<usize>,
        actions: &mut Vec<usize>,
        out: &mut Vec<PathProb>,
    ) {
        let d = mdp.dims();
        states[h] = s;
        for (a, &pa) in policy.row(h, s).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            actions[h] = a;
            let q = prob * pa;
            if h + 1 == d.horizon {
                out.push(PathProb { states: states.clone(), actions: actions.clone(), prob: q });
                continue;
            }
            for (next, &p) in mdp.next_state_dist(h, s, a).iter().enumerate() {
                if p > 0.0 {
                    walk(mdp, policy, h + 1, next, q * p, states, actions, out);
                }
            }
        }
    }
    walk(mdp, policy, 0, mdp.initial_state(), 1.0, &mut states, &mut actions, &mut paths);
    Ok(TrajectoryTable { dims: d, paths })
}

/// Objective maximized by [`optimal_mvee`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyObjective {
    /// `Σ_h H(d_h)`.
    PerStep,
    /// `H((1/H) Σ_h d_h)`, the entropy of the step-averaged distribution.
    Averaged,
}

impl EntropyObjective {
    pub fn value(self, profile: &VisitationProfile) -> f64 {
        match self {
            EntropyObjective::PerStep => profile.entropy(),
            EntropyObjective::Averaged => entropy(&profile.averaged()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrankWolfeConfig {
    pub iterations: usize,
    /// Smoothing `σ`; defaults to `1/(S·A·iterations)`.
    pub smoothing: Option<f64>,
    pub objective: EntropyObjective,
    /// Stop once the linearized duality gap falls below this value.
    pub gap_tolerance: f64,
}

impl Default for FrankWolfeConfig {
    fn default() -> Self {
        FrankWolfeConfig {
            iterations: 2000,
            smoothing: None,
            objective: EntropyObjective::PerStep,
            gap_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrankWolfeResult {
    pub profile: VisitationProfile,
    /// Distinct vertex policies with their multiplicity in the running average.
    pub vertices: Vec<(MarkovPolicy, usize)>,
    /// Markov policy with the same visitation profile.
    pub policy: MarkovPolicy,
    /// Unsmoothed objective after each iteration (index 0 is the start point).
    pub trace: Vec<f64>,
    /// Linearized duality gap of the smoothed objective at the last gradient.
    pub duality_gap: f64,
    pub iterations: usize,
}

impl FrankWolfeResult {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace holds the start point")
    }

    /// Uniform mixture of the vertex policies, each repeated by multiplicity.
    pub fn mixture(&self) -> MixturePolicy {
        let comps = self
            .vertices
            .iter()
            .flat_map(|(p, k)| std::iter::repeat_n(p.clone(), *k))
            .collect();
        MixturePolicy::new(comps).expect("at least the start vertex")
    }
}

/// Policy whose visitation matches `profile`: `π_h(a|s) ∝ d_h(s, a)`, uniform
/// where the state has no mass.
pub fn policy_from_profile(profile: &VisitationProfile) -> MarkovPolicy {
    let d = profile.dims();
    let mut probs = vec![0.0; d.sa_len()];
    for h in 0..d.horizon {
        for s in 0..d.states {
            let start = d.sa(h, s, 0);
            let row = &profile.as_slice()[start..start + d.actions];
            let mass: f64 = row.iter().sum();
            let out = &mut probs[start..start + d.actions];
            if mass > 0.0 {
                for (o, &x) in out.iter_mut().zip(row) {
                    *o = x / mass;
                }
            } else {
                out.fill(1.0 / d.actions as f64);
            }
        }
    }
    MarkovPolicy::from_parts(d, probs).expect("shape follows from dims")
}

fn gradient(profile: &VisitationProfile, objective: EntropyObjective, sigma: f64) -> Vec<f64> {
    let d = profile.dims();
    match objective {
        EntropyObjective::PerStep => {
            profile.as_slice().iter().map(|&x| smoothed_entropy_grad(x, sigma)).collect()
        }
        EntropyObjective::Averaged => {
            let inv_h = 1.0 / d.horizon as f64;
            let g: Vec<f64> =
                profile.averaged().iter().map(|&x| inv_h * smoothed_entropy_grad(x, sigma)).collect();
            g.repeat(d.horizon)
        }
    }
}

/// Greedy deterministic policy for per-step rewards that may be negative.
fn linear_maximizer(mdp: &TabularMdp, rewards: &[f64]) -> MarkovPolicy {
    let d = mdp.dims();
    let mut shifted = rewards.to_vec();
    let n = d.pairs();
    // a constant per step changes no argmax
    for step in shifted.chunks_mut(n) {
        let m = step.iter().copied().fold(f64::INFINITY, f64::min);
        step.iter_mut().for_each(|x| *x -= m);
    }
    let spec = RegularizedSpec::unregularized(d, shifted).expect("shifted rewards are nonnegative");
    solve_regularized(mdp, &spec).expect("shapes agree").policy
}

/// Frank-Wolfe on the smoothed entropy over the visitation polytope of `mdp`,
/// starting at the uniform policy, with step `1/(k+1)`.
pub fn optimal_mvee(mdp: &TabularMdp, config: &FrankWolfeConfig) -> Result<FrankWolfeResult> {
    let d = mdp.dims();
    if config.iterations == 0 {
        return Err(Error::param("iterations", "must be positive"));
    }
    let sigma = config.smoothing.unwrap_or(1.0 / (d.pairs() as f64 * config.iterations as f64));
    if !(sigma > 0.0 && sigma < (-1.0f64).exp()) {
        return Err(Error::param("smoothing", format!("{sigma} outside (0, 1/e)")));
    }
    let start = MarkovPolicy::uniform(d);
    let mut profile = exact_visitation(mdp, &start)?;
    let mut vertices: Vec<(MarkovPolicy, usize)> = vec![(start, 1)];
    let mut trace = vec![config.objective.value(&profile)];
    let mut duality_gap = f64::INFINITY;
    let mut iterations = 0;
    for k in 1..=config.iterations {
        let grad = gradient(&profile, config.objective, sigma);
        let vertex = linear_maximizer(mdp, &grad);
        let target = exact_visitation(mdp, &vertex)?;
        duality_gap = grad
            .iter()
            .zip(target.as_slice().iter().zip(profile.as_slice()))
            .map(|(g, (v, x))| g * (v - x))
            .sum();
        if duality_gap <= config.gap_tolerance {
            break;
        }
        profile.blend(&target, 1.0 / (k as f64 + 1.0));
        match vertices.iter_mut().find(|(p, _)| *p == vertex) {
            Some(entry) => entry.1 += 1,
            None => vertices.push((vertex, 1)),
        }
        trace.push(config.objective.value(&profile));
        iterations = k;
    }
    let policy = policy_from_profile(&profile);
    Ok(FrankWolfeResult { profile, vertices, policy, trace, duality_gap, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `variance`.
    pub std_error: f64,
}

/// Sample mean and unbiased variance of the regularized return over
/// `episodes` simulated episodes.
pub fn mc_return_variance(
    mdp: &TabularMdp,
    spec: &RegularizedSpec,
    policy: &MarkovPolicy,
    episodes: usize,
    seed: u64,
) -> Result<McEstimate> {
    let d = mdp.dims();
    ensure_dims(d, spec.dims(), "spec")?;
    ensure_dims(d, policy.dims(), "policy")?;
    if episodes < 100 {
        return Err(Error::param("episodes", format!("{episodes} < 100")));
    }
    let ent = transition_entropy_table(mdp);
    let mut rng = seed::child(seed, seed::streams::EVALUATION);
    let returns: Vec<f64> = (0..episodes)
        .map(|_| {
            let t = sample_trajectory(mdp, policy, &mut rng);
            path_return(d, spec, policy, &ent, &t.states, &t.actions)
        })
        .collect();
    let n = episodes as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let m2 = returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    let m4 = returns.iter().map(|g| (g - mean).powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0);
    let std_error = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    Ok(McEstimate { mean, variance, std_error })
}
