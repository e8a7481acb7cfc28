//! Visitation-entropy maximization as a repeated game.
//!
//! Each episode a forecaster predicts the state-action distribution of every
//! step from pseudo-counts, and a sampler picks the policy that is most
//! surprised by that prediction: it is rewarded `log(1/d̄_h(s,a))` for
//! visiting `(s, a)` at step `h`. The output is the uniform mixture of the
//! sampler's policies. The forecaster is the Laplace-style mixture
//! `d̄ = (n + n0) / (t + S·A·n0)` whose log-loss regret is logarithmic in `t`.
//!
//! [`run_entgame`] plans optimistically on the running empirical model with
//! Hoeffding bonuses. [`run_reg_entgame`] first learns a fixed model by
//! reward-free exploration and then plays entropy-regularized (softmax)
//! policies on it.

use serde::{Deserialize, Serialize};

use crate::entropy::entropy;
use crate::mdp::{
    exact_visitation, sample_trajectory, CountTables, DiagnosticsLog, Dims, EmpiricalModel,
    MarkovPolicy, MixturePolicy, TabularMdp, Trajectory, VisitationProfile,
};
use crate::rf_explore::{explore, ExplorationConfig, OptimisticReacher, StepAccount};
use crate::seed;
use crate::soft::{dot, solve_regularized, RegularizedSpec};
use crate::{Error, Result};

/// How visits at different steps are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Aggregation {
    /// Separate counts for each step.
    #[default]
    PerStep,
    /// Counts summed over steps, for stage-homogeneous environments.
    StageHomogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    Plain,
    /// Reward-free exploration with `episodes_per_goal` episodes for every
    /// `(state, step)` goal and `model_episodes` episodes from the resulting
    /// mixture, followed by regularized planning on the fixed model.
    Regularized { episodes_per_goal: usize, model_episodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntGameConfig {
    pub episodes: usize,
    pub prior: u64,
    pub delta: f64,
    pub bonus_scale: f64,
    pub aggregation: Aggregation,
    pub variant: Variant,
    /// Record diagnostics every this many episodes (and at the last one);
    /// 0 disables them.
    pub log_every: usize,
}

impl Default for EntGameConfig {
    fn default() -> Self {
        EntGameConfig {
            episodes: 1000,
            prior: 1,
            delta: 0.1,
            bonus_scale: 1.0,
            aggregation: Aggregation::PerStep,
            variant: Variant::Plain,
            log_every: 0,
        }
    }
}

impl EntGameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::param("episodes", "must be at least 1"));
        }
        if self.prior == 0 {
            return Err(Error::param("prior", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", format!("{} outside (0, 1)", self.delta)));
        }
        if !(self.bonus_scale >= 0.0 && self.bonus_scale.is_finite()) {
            return Err(Error::param("bonus_scale", format!("{} is negative", self.bonus_scale)));
        }
        if let Variant::Regularized { episodes_per_goal, model_episodes } = self.variant {
            if episodes_per_goal == 0 || model_episodes == 0 {
                return Err(Error::param("variant", "exploration budgets must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Pseudo-count forecaster.
#[derive(Debug, Clone)]
pub struct ForecasterState {
    counts: CountTables,
    prior: u64,
    aggregation: Aggregation,
}

impl ForecasterState {
    pub fn new(dims: Dims, prior: u64, aggregation: Aggregation) -> Self {
        ForecasterState { counts: CountTables::new(dims), prior, aggregation }
    }

    pub fn dims(&self) -> Dims {
        self.counts.dims()
    }

    /// Number of trajectories observed so far.
    pub fn observed(&self) -> u64 {
        self.counts.episodes()
    }

    pub fn counts(&self) -> &CountTables {
        &self.counts
    }

    /// Total prior mass `S·A·n0`.
    pub fn prior_mass(&self) -> u64 {
        self.dims().pairs() as u64 * self.prior
    }

    /// Prediction for the next episode. Every entry is at least
    /// `n0 / (t + S·A·n0)` and every step sums to one.
    pub fn forecast(&self) -> VisitationProfile {
        let d = self.dims();
        let n0 = self.prior as f64;
        let denom = (self.observed() + self.prior_mass()) as f64;
        let mut profile = VisitationProfile::zeros(d);
        let table = self.counts.visit_table();
        let out = profile.as_mut_slice();
        match self.aggregation {
            Aggregation::PerStep => {
                for (o, &n) in out.iter_mut().zip(table) {
                    *o = (n as f64 + n0) / denom;
                }
            }
            Aggregation::StageHomogeneous => {
                let pairs = d.pairs();
                let h = d.horizon as f64;
                let mut pooled = vec![0.0; pairs];
                for step in table.chunks(pairs) {
                    for (p, &n) in pooled.iter_mut().zip(step) {
                        *p += n as f64 + n0;
                    }
                }
                for step in out.chunks_mut(pairs) {
                    for (o, &p) in step.iter_mut().zip(&pooled) {
                        *o = p / (h * denom);
                    }
                }
            }
        }
        profile
    }

    pub fn observe(&mut self, traj: &Trajectory) -> Result<()> {
        self.counts.record(traj)
    }
}

/// Logarithmic loss `Σ_h log(1/d̄_h(s_h, a_h))` of a prediction on a trajectory.
pub fn log_loss(forecast: &VisitationProfile, traj: &Trajectory) -> f64 {
    traj.steps().enumerate().map(|(h, (s, a, _))| -forecast.get(h, s, a).ln()).sum()
}

/// Bonus parameters of the optimistic sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerParams {
    pub delta: f64,
    pub bonus_scale: f64,
    pub prior: u64,
}

/// Optimistic values and the greedy policy of the sampler.
#[derive(Debug, Clone)]
pub struct SamplerPlan {
    dims: Dims,
    q: Vec<f64>,
    v: Vec<f64>,
    pub policy: MarkovPolicy,
    /// Upper clip applied to the values.
    pub cap: f64,
}

impl SamplerPlan {
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.dims.sa(h, s, a)]
    }

    /// `V̄_h(s)` for `h ∈ 0..=H`.
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.dims.states + s]
    }
}

/// `log(2SAH/δ) + S·log(e(1 + n))`.
pub fn sampler_threshold(dims: Dims, delta: f64, n: u64) -> f64 {
    let sah = (dims.pairs() * dims.horizon) as f64;
    (2.0 * sah / delta).ln() + dims.states as f64 * (1.0 + (1.0 + n as f64).ln())
}

/// Hoeffding bonus `sqrt(2H²·log²(t + SA)·threshold(n)/n)`, capped at `cap`.
/// Unvisited pairs get the cap.
pub fn sampler_bonus(dims: Dims, params: &SamplerParams, episode: u64, n: u64, cap: f64) -> f64 {
    if n == 0 {
        return cap;
    }
    let h = dims.horizon as f64;
    let log_t = (episode as f64 + dims.pairs() as f64).ln();
    let b = (2.0 * h * h * log_t * log_t * sampler_threshold(dims, params.delta, n) / n as f64).sqrt();
    (params.bonus_scale * b).min(cap)
}

/// Optimistic planning for episode `episode` (one-based): rewards
/// `log(1/d̄)`, bonuses from `counts`, transitions from `model`, values
/// clipped to `[0, H·log(t/n0 + SA)]`, greedy policy with the lowest index
/// among ties.
pub fn sampler_plan(
    counts: &CountTables,
    model: &EmpiricalModel,
    forecast: &VisitationProfile,
    episode: u64,
    params: &SamplerParams,
) -> Result<SamplerPlan> {
    let d = counts.dims();
    crate::mdp::ensure_dims(d, model.dims(), "model")?;
    crate::mdp::ensure_dims(d, forecast.dims(), "forecast")?;
    if episode == 0 {
        return Err(Error::param("episode", "episodes are counted from 1"));
    }
    let cap = d.horizon as f64 * (episode as f64 / params.prior as f64 + d.pairs() as f64).ln();
    let mut q = vec![0.0; d.sa_len()];
    let mut v = vec![0.0; (d.horizon + 1) * d.states];
    let mut actions = vec![0usize; d.horizon * d.states];
    for h in (0..d.horizon).rev() {
        let (head, tail) = v.split_at_mut((h + 1) * d.states);
        let next = &tail[..d.states];
        for s in 0..d.states {
            let mut best = 0;
            for a in 0..d.actions {
                let i = d.sa(h, s, a);
                let bonus = sampler_bonus(d, params, episode, counts.visits(h, s, a), cap);
                q[i] = -forecast.get(h, s, a).ln() + dot(model.row(h, s, a), next) + bonus;
                if q[i] > q[d.sa(h, s, best)] {
                    best = a;
                }
            }
            head[h * d.states + s] = q[d.sa(h, s, best)].clamp(0.0, cap);
            actions[d.hs(h, s)] = best;
        }
    }
    let policy = MarkovPolicy::deterministic(d, &actions)?;
    Ok(SamplerPlan { dims: d, q, v, policy, cap })
}

/// Realized visits and forecaster losses of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecasterTrace {
    pub dims: Dims,
    pub prior: u64,
    pub aggregation: Aggregation,
    pub episodes: u64,
    /// Visit counts `n_h(s, a)` over the played episodes, indexed `(h, s, a)`.
    pub visits: Vec<u64>,
    /// `Σ_t Σ_h log(1/d̄^t_h(s^t_h, a^t_h))`.
    pub cumulative_log_loss: f64,
}

impl ForecasterTrace {
    /// Empirical average of the one-hot visits, `n_h / T`.
    pub fn empirical_average(&self) -> Result<VisitationProfile> {
        if self.episodes == 0 {
            return Err(Error::param("episodes", "no episode was played"));
        }
        let inv = 1.0 / self.episodes as f64;
        VisitationProfile::from_parts(self.dims, self.visits.iter().map(|&n| n as f64 * inv).collect())
    }
}

/// `Σ_t Σ_h [log(1/d̄^t_h) − log(1/comparator_h)]` at the realized pairs.
pub fn forecaster_regret(trace: &ForecasterTrace, comparator: &VisitationProfile) -> Result<f64> {
    crate::mdp::ensure_dims(trace.dims, comparator.dims(), "comparator")?;
    if comparator.simplex_error() > 1e-9 || comparator.as_slice().iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidDistribution("comparator is not a per-step distribution".into()));
    }
    let mut comparator_loss = 0.0;
    for (&n, &p) in trace.visits.iter().zip(comparator.as_slice()) {
        if n > 0 {
            comparator_loss -= n as f64 * p.ln();
        }
    }
    Ok(trace.cumulative_log_loss - comparator_loss)
}

/// Upper bound `H·S·A·log(e(T + 1))` on the regret against the empirical
/// average, valid for the per-step forecaster with prior 1.
pub fn forecaster_regret_bound(dims: Dims, episodes: u64) -> f64 {
    (dims.horizon * dims.pairs()) as f64 * (1.0 + (episodes as f64 + 1.0).ln())
}

#[derive(Debug, Clone)]
pub struct EntGameOutcome {
    pub mixture: MixturePolicy,
    /// Exact visitation of the mixture.
    pub profile: VisitationProfile,
    pub diagnostics: DiagnosticsLog,
    pub trace: ForecasterTrace,
    /// Per-step visit counts of the played episodes.
    pub counts: CountTables,
    /// Interaction spent before the game (regularized variant only).
    pub exploration: StepAccount,
}

struct GameRecorder {
    profile_sum: Vec<f64>,
    cumulative_loss: f64,
    diagnostics: DiagnosticsLog,
    log_every: usize,
    total: usize,
}

impl GameRecorder {
    fn new(d: Dims, log_every: usize, total: usize) -> Self {
        GameRecorder { profile_sum: vec![0.0; d.sa_len()], cumulative_loss: 0.0, diagnostics: DiagnosticsLog::new(), log_every, total }
    }

    fn record(
        &mut self,
        env: &TabularMdp,
        t: usize,
        policy: &MarkovPolicy,
        forecast: &VisitationProfile,
        traj: &Trajectory,
        sampler_value: f64,
    ) -> Result<()> {
        let loss = log_loss(forecast, traj);
        self.cumulative_loss += loss;
        let profile = exact_visitation(env, policy)?;
        for (x, &y) in self.profile_sum.iter_mut().zip(profile.as_slice()) {
            *x += y;
        }
        let due = self.log_every > 0 && (t.is_multiple_of(self.log_every) || t == self.total);
        if due {
            let d = env.dims();
            let inv = 1.0 / t as f64;
            let ve: f64 = self
                .profile_sum
                .chunks(d.pairs())
                .map(|step| entropy(&step.iter().map(|x| x * inv).collect::<Vec<_>>()))
                .sum();
            self.diagnostics.push(
                t as u64,
                vec![
                    ("ve_mixture".into(), ve),
                    ("log_loss".into(), loss),
                    ("cumulative_log_loss".into(), self.cumulative_loss),
                    ("sampler_value".into(), sampler_value),
                ],
            )?;
        }
        Ok(())
    }

    fn finish(
        self,
        env: &TabularMdp,
        components: Vec<MarkovPolicy>,
        forecaster: ForecasterState,
        exploration: StepAccount,
    ) -> Result<EntGameOutcome> {
        let d = env.dims();
        let t = components.len() as f64;
        let profile = VisitationProfile::from_parts(d, self.profile_sum.iter().map(|x| x / t).collect())?;
        let counts = forecaster.counts.clone();
        let trace = ForecasterTrace {
            dims: d,
            prior: forecaster.prior,
            aggregation: forecaster.aggregation,
            episodes: counts.episodes(),
            visits: counts.visit_table().to_vec(),
            cumulative_log_loss: self.cumulative_loss,
        };
        if trace.prior == 1 && trace.aggregation == Aggregation::PerStep {
            let regret = forecaster_regret(&trace, &trace.empirical_average()?)?;
            let bound = forecaster_regret_bound(d, trace.episodes);
            assert!(
                regret <= bound * (1.0 + 1e-12),
                "forecaster regret {regret} exceeds its deterministic bound {bound}"
            );
        }
        Ok(EntGameOutcome {
            mixture: MixturePolicy::new(components)?,
            profile,
            diagnostics: self.diagnostics,
            trace,
            counts,
            exploration,
        })
    }
}

/// EntGame with optimistic sampler planning on the running empirical model.
pub fn run_entgame(env: &TabularMdp, config: &EntGameConfig, seed: u64) -> Result<EntGameOutcome> {
    config.validate()?;
    let d = env.dims();
    let mut rng = seed::child(seed, seed::streams::EPISODES);
    let mut forecaster = ForecasterState::new(d, config.prior, config.aggregation);
    let params = SamplerParams { delta: config.delta, bonus_scale: config.bonus_scale, prior: config.prior };
    let mut recorder = GameRecorder::new(d, config.log_every, config.episodes);
    let mut components = Vec::with_capacity(config.episodes);
    let mut pooled = (config.aggregation == Aggregation::StageHomogeneous).then(|| CountTables::new(d));
    for t in 1..=config.episodes {
        let forecast = forecaster.forecast();
        let counts = pooled.as_ref().unwrap_or(&forecaster.counts);
        let model = EmpiricalModel::from_counts(counts, env.initial_state());
        let plan = sampler_plan(counts, &model, &forecast, t as u64, &params)?;
        let traj = sample_trajectory(env, &plan.policy, &mut rng);
        recorder.record(env, t, &plan.policy, &forecast, &traj, plan.v(0, env.initial_state()))?;
        forecaster.observe(&traj)?;
        if let Some(p) = pooled.as_mut() {
            p.record_pooled(&traj)?;
        }
        components.push(plan.policy);
    }
    recorder.finish(env, components, forecaster, StepAccount::default())
}

/// Softmax policy maximizing `Σ_h log(1/d̄_h(s_h)) + H(π_h(s_h))` on `model`,
/// with `d̄_h(s) = Σ_a d̄_h(s, a)`.
pub fn regularized_sampler_policy(model: &EmpiricalModel, forecast: &VisitationProfile) -> Result<MarkovPolicy> {
    let d = model.dims();
    let mut rewards = vec![0.0; d.sa_len()];
    for h in 0..d.horizon {
        for (s, mass) in forecast.state_marginal(h).into_iter().enumerate() {
            let r = -mass.ln();
            for a in 0..d.actions {
                rewards[d.sa(h, s, a)] = r;
            }
        }
    }
    let spec = RegularizedSpec::new(d, rewards, 1.0, 0.0)?;
    Ok(solve_regularized(model, &spec)?.policy)
}

/// The game phase of RegEntGame on a given model.
pub fn play_reg_entgame(
    env: &TabularMdp,
    model: &EmpiricalModel,
    config: &EntGameConfig,
    seed: u64,
    exploration: StepAccount,
) -> Result<EntGameOutcome> {
    config.validate()?;
    let d = env.dims();
    crate::mdp::ensure_dims(d, model.dims(), "model")?;
    let mut rng = seed::child(seed, seed::streams::EPISODES);
    let mut forecaster = ForecasterState::new(d, config.prior, config.aggregation);
    let mut recorder = GameRecorder::new(d, config.log_every, config.episodes);
    let mut components = Vec::with_capacity(config.episodes);
    for t in 1..=config.episodes {
        let forecast = forecaster.forecast();
        let policy = regularized_sampler_policy(model, &forecast)?;
        let traj = sample_trajectory(env, &policy, &mut rng);
        recorder.record(env, t, &policy, &forecast, &traj, f64::NAN)?;
        forecaster.observe(&traj)?;
        components.push(policy);
    }
    recorder.finish(env, components, forecaster, exploration)
}

/// RegEntGame: reward-free exploration for a fixed model, then the game with
/// regularized sampler planning on that model.
pub fn run_reg_entgame(env: &TabularMdp, config: &EntGameConfig, seed: u64) -> Result<EntGameOutcome> {
    config.validate()?;
    let Variant::Regularized { episodes_per_goal, model_episodes } = config.variant else {
        return Err(Error::param("variant", "RegEntGame needs the regularized variant"));
    };
    let exploration = explore(
        env,
        &ExplorationConfig {
            episodes_per_goal,
            model_episodes,
            reacher: OptimisticReacher { delta: config.delta, bonus_scale: 1.0 },
        },
        seed,
    )?;
    play_reg_entgame(env, &exploration.model, config, seed, exploration.steps)
}
