//! Two-phase reward-free exploration.
//!
//! Phase 1 learns, for every goal `(s', h')`, a batch of policies that try to
//! reach state `s'` at step `h'`, using a pluggable regret minimizer. The
//! union of all batches, each made uniform from the goal step on, forms a
//! uniform mixture. Phase 2 rolls the mixture for `N` fresh episodes and fits
//! the empirical model. Any number of regularized problems can then be solved
//! on that model without touching the environment again.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::entropy::mean_var;
use crate::mdp::{
    exact_visitation, sample_trajectory, CountTables, Dims, EmpiricalModel, Environment, MarkovPolicy,
    MixturePolicy, TabularMdp, VisitationProfile,
};
use crate::seed::{self, Rng};
use crate::soft::{solve_regularized, RegularizedSpec};
use crate::{Error, Result};

/// Reach state `state` at step `step` (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Goal {
    pub state: usize,
    pub step: usize,
}

/// Online learner for a sparse goal-reaching reward. It interacts with `env`
/// for `episodes` episodes and returns the policy it played in each one.
pub trait RegretMinimizer {
    fn run<E: Environment + ?Sized>(
        &self,
        env: &E,
        goal: Goal,
        episodes: usize,
        rng: &mut Rng,
    ) -> Result<Vec<MarkovPolicy>>;
}

/// Optimistic value iteration with Bernstein bonuses for the reward
/// `1{s = goal.state, h = goal.step}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimisticReacher {
    pub delta: f64,
    pub bonus_scale: f64,
}

impl Default for OptimisticReacher {
    fn default() -> Self {
        OptimisticReacher { delta: 0.1, bonus_scale: 1.0 }
    }
}

impl OptimisticReacher {
    /// Greedy optimistic policy given the goal's own counts; uniform from the
    /// goal step on, where no reward is left to collect.
    pub fn plan(&self, counts: &CountTables, goal: Goal) -> MarkovPolicy {
        let d = counts.dims();
        let model = EmpiricalModel::from_counts(counts, 0);
        let log_term = (6.0 * d.pairs() as f64 * d.horizon as f64 / self.delta).ln();
        let mut policy = MarkovPolicy::uniform(d);
        let mut v_next: Vec<f64> = (0..d.states).map(|s| f64::from(u8::from(s == goal.state))).collect();
        let mut v = vec![0.0; d.states];
        let mut q = vec![0.0; d.actions];
        for h in (0..goal.step).rev() {
            for s in 0..d.states {
                for (a, qa) in q.iter_mut().enumerate() {
                    let n = counts.visits(h, s, a);
                    *qa = if n == 0 {
                        1.0
                    } else {
                        let p = model.row(h, s, a);
                        let (mean, var) = mean_var(p, &v_next);
                        let n = n as f64;
                        let l = log_term + (1.0 + n).ln();
                        let bonus = (2.0 * var * l / n).sqrt() + 7.0 * l / (3.0 * n);
                        (mean + self.bonus_scale * bonus).min(1.0)
                    };
                }
                let best = argmax(&q);
                v[s] = q[best];
                let row = policy.row_mut(h, s);
                row.fill(0.0);
                row[best] = 1.0;
            }
            std::mem::swap(&mut v, &mut v_next);
        }
        policy
    }
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

impl RegretMinimizer for OptimisticReacher {
    fn run<E: Environment + ?Sized>(
        &self,
        env: &E,
        goal: Goal,
        episodes: usize,
        rng: &mut Rng,
    ) -> Result<Vec<MarkovPolicy>> {
        let d = env.dims();
        let mut counts = CountTables::new(d);
        let mut out = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let policy = self.plan(&counts, goal);
            let traj = sample_trajectory(env, &policy, rng);
            counts.record(&traj)?;
            out.push(policy);
        }
        Ok(out)
    }
}

fn check_goal(d: Dims, goal: Goal) -> Result<()> {
    if goal.state >= d.states || goal.step >= d.horizon {
        return Err(Error::param("goal", format!("{goal:?} out of range for {d}")));
    }
    Ok(())
}

/// `episodes` policies for one goal, each acting uniformly at the goal state
/// of the goal step.
pub fn goal_policies<E, R>(
    env: &E,
    minimizer: &R,
    goal: Goal,
    episodes: usize,
    rng: &mut Rng,
) -> Result<Vec<MarkovPolicy>>
where
    E: Environment + ?Sized,
    R: RegretMinimizer,
{
    check_goal(env.dims(), goal)?;
    if episodes == 0 {
        return Err(Error::param("episodes", "must be positive"));
    }
    let mut policies = minimizer.run(env, goal, episodes, rng)?;
    for p in &mut policies {
        p.make_uniform_at(goal.step, goal.state);
    }
    Ok(policies)
}

/// Uniform mixture over the goal policies of every `(state, step)` goal.
/// Goal `(s', h')` draws from its own child stream of `seed`.
pub fn build_mixture<E, R>(env: &E, minimizer: &R, episodes_per_goal: usize, seed: u64) -> Result<MixturePolicy>
where
    E: Environment + ?Sized,
    R: RegretMinimizer,
{
    let d = env.dims();
    let mut components = Vec::with_capacity(d.states * d.horizon * episodes_per_goal);
    for step in 0..d.horizon {
        for state in 0..d.states {
            let id = (step * d.states + state) as u64;
            let mut rng = seed::child(seed, seed::streams::GOALS + id);
            components.extend(goal_policies(env, minimizer, Goal { state, step }, episodes_per_goal, &mut rng)?);
        }
    }
    MixturePolicy::new(components)
}

/// Rolls `policy` for `episodes` episodes and fits the empirical model.
pub fn collect_and_estimate<E, P>(
    env: &E,
    policy: &P,
    episodes: usize,
    seed: u64,
) -> Result<(CountTables, EmpiricalModel)>
where
    E: Environment + ?Sized,
    P: crate::mdp::Policy + ?Sized,
{
    if episodes == 0 {
        return Err(Error::param("episodes", "must be positive"));
    }
    let mut rng = seed::child(seed, seed::streams::EXPLORATION_DATA);
    let mut counts = CountTables::new(env.dims());
    for _ in 0..episodes {
        counts.record(&sample_trajectory(env, policy, &mut rng))?;
    }
    let model = EmpiricalModel::from_counts(&counts, env.initial_state());
    Ok((counts, model))
}

/// Interaction totals, split by phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepAccount {
    pub exploration_episodes: u64,
    pub exploration_steps: u64,
    pub sampling_episodes: u64,
    pub sampling_steps: u64,
}

impl StepAccount {
    pub fn total_steps(&self) -> u64 {
        self.exploration_steps + self.sampling_steps
    }
}

#[derive(Debug, Clone)]
pub struct ExplorationPhaseResult {
    pub mixture: MixturePolicy,
    pub counts: CountTables,
    pub model: EmpiricalModel,
    /// Exact visitation of the mixture, when the true kernel is known.
    pub visitation: Option<VisitationProfile>,
    pub steps: StepAccount,
}

impl ExplorationPhaseResult {
    pub fn with_visitation(mut self, mdp: &TabularMdp) -> Result<Self> {
        self.visitation = Some(exact_visitation(mdp, &self.mixture)?);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub episodes_per_goal: usize,
    pub model_episodes: usize,
    pub reacher: OptimisticReacher,
}

/// Runs both data-collection phases.
pub fn explore<E: Environment + ?Sized>(env: &E, config: &ExplorationConfig, seed: u64) -> Result<ExplorationPhaseResult> {
    let d = env.dims();
    let mixture = build_mixture(env, &config.reacher, config.episodes_per_goal, seed)?;
    let (counts, model) = collect_and_estimate(env, &mixture, config.model_episodes, seed)?;
    let exploration_episodes = (d.states * d.horizon * config.episodes_per_goal) as u64;
    let sampling_episodes = config.model_episodes as u64;
    let steps = StepAccount {
        exploration_episodes,
        exploration_steps: exploration_episodes * d.horizon as u64,
        sampling_episodes,
        sampling_steps: sampling_episodes * d.horizon as u64,
    };
    Ok(ExplorationPhaseResult { mixture, counts, model, visitation: None, steps })
}

/// Solves each problem on the shared model. Every spec needs `λ > 0`.
pub fn plan_on_model(model: &EmpiricalModel, specs: &[RegularizedSpec]) -> Result<Vec<MarkovPolicy>> {
    specs
        .iter()
        .map(|spec| {
            if !(spec.lambda > 0.0) {
                return Err(Error::param("lambda", "planning on the learned model needs lambda > 0"));
            }
            Ok(solve_regularized(model, spec)?.policy)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RfOutcome {
    pub policies: Vec<MarkovPolicy>,
    pub exploration: ExplorationPhaseResult,
}

/// Explores, then returns one policy per spec planned on the learned model.
pub fn rf_explore_ent<E: Environment + ?Sized>(
    env: &E,
    specs: &[RegularizedSpec],
    config: &ExplorationConfig,
    seed: u64,
) -> Result<RfOutcome> {
    let d = env.dims();
    if let Some(bad) = specs.iter().find(|s| s.dims() != d) {
        return Err(Error::ShapeMismatch(format!("spec shape {} for environment {d}", bad.dims())));
    }
    let exploration = explore(env, config, seed)?;
    let policies = plan_on_model(&exploration.model, specs)?;
    Ok(RfOutcome { policies, exploration })
}

/// Environment wrapper counting interaction steps.
pub struct CountingEnv<'a, E: ?Sized> {
    inner: &'a E,
    steps: Cell<u64>,
}

impl<'a, E: Environment + ?Sized> CountingEnv<'a, E> {
    pub fn new(inner: &'a E) -> Self {
        CountingEnv { inner, steps: Cell::new(0) }
    }

    pub fn steps(&self) -> u64 {
        self.steps.get()
    }
}

impl<E: Environment + ?Sized> Environment for CountingEnv<'_, E> {
    fn dims(&self) -> Dims {
        self.inner.dims()
    }
    fn initial_state(&self) -> usize {
        self.inner.initial_state()
    }
    fn step(&self, h: usize, s: usize, a: usize, rng: &mut Rng) -> usize {
        self.steps.set(self.steps.get() + 1);
        self.inner.step(h, s, a, rng)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs;
    use crate::mdp::Policy;

    #[test]
    fn start_goal_is_trivial() {
        let env = envs::double_chain(5, 0.1, 3).unwrap();
        let goal = Goal { state: env.initial_state(), step: 0 };
        let pols = goal_policies(&env, &OptimisticReacher::default(), goal, 4, &mut seed::root(0)).unwrap();
        assert_eq!(pols.len(), 4);
        for p in &pols {
            assert_eq!(p.row(0, 2), &[0.5, 0.5]);
        }
        let one = goal_policies(&env, &OptimisticReacher::default(), goal, 1, &mut seed::root(0)).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn reacher_learns_deterministic_chain() {
        let env = envs::double_chain(5, 0.0, 4).unwrap();
        let goal = Goal { state: 4, step: 3 };
        let pols = goal_policies(&env, &OptimisticReacher::default(), goal, 400, &mut seed::root(3)).unwrap();
        for p in &pols[390..] {
            let d = exact_visitation(&env, p).unwrap();
            assert!(d.state_marginal(3)[4] >= 0.9);
        }
    }

    #[test]
    fn single_state_mixture_is_uniform() {
        let dims = Dims::new(1, 3, 1).unwrap();
        let env = TabularMdp::from_fn(dims, 0, |_, _, _, row| row[0] = 1.0).unwrap();
        let mix = build_mixture(&env, &OptimisticReacher::default(), 5, 1).unwrap();
        assert_eq!(mix.len(), 5);
        assert!(mix.components().iter().all(|p| *p == MarkovPolicy::uniform(dims)));
    }

    #[test]
    fn interaction_is_accounted_by_phase() {
        let env = envs::double_chain(5, 0.1, 3).unwrap();
        let counting = CountingEnv::new(&env);
        let config = ExplorationConfig { episodes_per_goal: 3, model_episodes: 17, reacher: OptimisticReacher::default() };
        let out = rf_explore_ent(&counting, &[RegularizedSpec::mtee(env.dims())], &config, 4).unwrap();
        assert_eq!(counting.steps(), 5 * 3 * 3 * 3 + 17 * 3);
        assert_eq!(counting.steps(), out.exploration.steps.total_steps());
        assert_eq!(out.exploration.counts.episodes(), 17);
        assert_eq!(out.exploration.mixture.len(), 5 * 3 * 3);
        assert!(out.policies[0].probs().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn planning_requires_regularization() {
        let env = envs::double_chain(5, 0.1, 3).unwrap();
        let model = EmpiricalModel::from_mdp(env.clone());
        let spec = RegularizedSpec::unregularized(env.dims(), vec![0.0; 30]).unwrap();
        assert!(plan_on_model(&model, &[spec]).is_err());
    }
}
