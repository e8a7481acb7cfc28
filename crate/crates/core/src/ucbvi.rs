//! Best policy identification in entropy-regularized MDPs.
//!
//! Each episode the agent computes upper and lower confidence bounds on the
//! optimal regularized Q-function from the empirical model, with Bernstein
//! bonuses on the transitions and a confidence bonus on the estimated
//! transition entropies. The softmax policy of the upper bound is played. A
//! second recursion turns the bonuses into a bound `G` on the optimality gap
//! of that policy, and the algorithm stops once `π_1 G_1(s_1) ≤ ε`.
//!
//! Pairs that were never visited get the value cap `H·Rmax` in every bound.

use serde::{Deserialize, Serialize};

use crate::entropy::{entropy, mean_var};
use crate::mdp::{
    ensure_dims, sample_trajectory, CountTables, DiagnosticsLog, Dims, EmpiricalModel, MarkovPolicy, TabularMdp,
    Transitions,
};
use crate::seed;
use crate::soft::{dot, evaluate_regularized, soft_conjugate_into, solve_regularized, RegularizedSpec, ValueTables};
use crate::{Error, Result};

/// Confidence thresholds evaluated at a visit count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `log(4SAH/δ) + S·log(e(1 + n))`.
    pub kl: f64,
    /// `log(4SAH/δ) + log(4e·n(2n + 1))`, with `n` floored at 1.
    pub conc: f64,
    /// `log(4SAH/δ)`.
    pub cnt: f64,
    /// `log²(n)·(log(4SAH/δ) + log(n(n + 1)))`, zero for `n ≤ 1`.
    pub entropy: f64,
}

pub fn thresholds(dims: Dims, delta: f64, n: u64) -> Result<Thresholds> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} outside (0, 1)")));
    }
    let base = (4.0 * (dims.pairs() * dims.horizon) as f64 / delta).ln();
    let nf = n as f64;
    let kl = base + dims.states as f64 * (1.0 + (1.0 + nf).ln());
    let m = nf.max(1.0);
    let conc = base + (4.0 * std::f64::consts::E * m * (2.0 * m + 1.0)).ln();
    let entropy = if n <= 1 { 0.0 } else { nf.ln().powi(2) * (base + (nf * (nf + 1.0)).ln()) };
    Ok(Thresholds { kl, conc, cnt: base, entropy })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcbviParams {
    pub delta: f64,
    /// Multiplies every bonus. Zero removes all bonuses, including the value
    /// cap of unvisited pairs, so that the bounds collapse to plain planning
    /// on the model.
    pub bonus_scale: f64,
}

impl Default for UcbviParams {
    fn default() -> Self {
        UcbviParams { delta: 0.1, bonus_scale: 1.0 }
    }
}

/// Upper and lower bounds, the played policy and the per-pair bonus terms.
#[derive(Debug, Clone)]
pub struct ConfidenceState {
    dims: Dims,
    cap: f64,
    pub q_upper: Vec<f64>,
    pub q_lower: Vec<f64>,
    /// `(H + 1) × S`.
    pub v_upper: Vec<f64>,
    pub v_lower: Vec<f64>,
    /// `Var_p̂(V̄_{h+1})` per pair.
    pub upper_variance: Vec<f64>,
    /// Bernstein transition bonus `b^B`.
    pub bernstein: Vec<f64>,
    /// Entropy bonus `b^H` (zero at the last step).
    pub entropy_bonus: Vec<f64>,
    /// `β^KL / n` per pair.
    pub kl_rate: Vec<f64>,
    /// Pairs treated as unvisited (value cap applies).
    pub unvisited: Vec<bool>,
    pub policy: MarkovPolicy,
    kappa: f64,
}

impl ConfidenceState {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// `H·Rmax`.
    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn v_upper_at(&self, h: usize, s: usize) -> f64 {
        self.v_upper[h * self.dims.states + s]
    }

    pub fn v_lower_at(&self, h: usize, s: usize) -> f64 {
        self.v_lower[h * self.dims.states + s]
    }
}

/// One backward pass computing both bounds and the softmax policy of the
/// upper bound.
pub fn compute_bounds(
    counts: &CountTables,
    model: &EmpiricalModel,
    spec: &RegularizedSpec,
    params: &UcbviParams,
) -> Result<ConfidenceState> {
    let d = counts.dims();
    ensure_dims(d, model.dims(), "model")?;
    ensure_dims(d, spec.dims(), "spec")?;
    if !(params.bonus_scale >= 0.0) {
        return Err(Error::param("bonus_scale", "must be nonnegative"));
    }
    let h_f = d.horizon as f64;
    let rmax = spec.rmax();
    let cap = h_f * rmax;
    let log_s = (d.states as f64).ln();
    let n_len = d.sa_len();
    let mut st = ConfidenceState {
        dims: d,
        cap,
        q_upper: vec![0.0; n_len],
        q_lower: vec![0.0; n_len],
        v_upper: vec![0.0; (d.horizon + 1) * d.states],
        v_lower: vec![0.0; (d.horizon + 1) * d.states],
        upper_variance: vec![0.0; n_len],
        bernstein: vec![0.0; n_len],
        entropy_bonus: vec![0.0; n_len],
        kl_rate: vec![0.0; n_len],
        unvisited: vec![false; n_len],
        policy: MarkovPolicy::uniform(d),
        kappa: spec.kappa,
    };
    let scale = params.bonus_scale;
    for h in (0..d.horizon).rev() {
        let next = h + 1;
        let (vu_next, vl_next) = (
            st.v_upper[next * d.states..(next + 1) * d.states].to_vec(),
            st.v_lower[next * d.states..(next + 1) * d.states].to_vec(),
        );
        for s in 0..d.states {
            for a in 0..d.actions {
                let i = d.sa(h, s, a);
                let n = counts.visits(h, s, a);
                let p = model.row(h, s, a);
                let (mean_u, var_u) = mean_var(p, &vu_next);
                let mean_l = dot(p, &vl_next);
                st.upper_variance[i] = var_u;
                let entropy_reward =
                    if next < d.horizon && spec.kappa > 0.0 { spec.kappa * entropy(p) } else { 0.0 };
                let r = spec.reward(h, s, a) + entropy_reward;
                if scale > 0.0 && n == 0 {
                    st.unvisited[i] = true;
                    st.q_upper[i] = cap;
                    st.q_lower[i] = 0.0;
                    continue;
                }
                let (b_bern, b_ent, kl_rate) = if scale == 0.0 {
                    (0.0, 0.0, 0.0)
                } else {
                    let th = thresholds(d, params.delta, n)?;
                    let nf = n as f64;
                    let kl_rate = th.kl / nf;
                    let b_bern = 3.0 * (var_u * th.conc / nf).sqrt() + 9.0 * h_f * h_f * rmax * kl_rate;
                    let b_ent = if next < d.horizon {
                        let raw = (2.0 * th.entropy / nf).sqrt() + kl_rate.min(log_s);
                        raw.max((2.0 * th.cnt / nf).sqrt())
                    } else {
                        0.0
                    };
                    (scale * b_bern, scale * b_ent, scale * kl_rate)
                };
                let b_corr = if scale == 0.0 { 0.0 } else { (mean_u - mean_l) / h_f };
                st.bernstein[i] = b_bern;
                st.entropy_bonus[i] = b_ent;
                st.kl_rate[i] = kl_rate;
                let width = b_bern + b_corr + spec.kappa * b_ent;
                st.q_upper[i] = (r + mean_u + width).clamp(0.0, cap);
                st.q_lower[i] = (r + mean_l - width).clamp(0.0, cap);
            }
            let start = d.sa(h, s, 0);
            let upper = soft_conjugate_into(
                &st.q_upper[start..start + d.actions],
                spec.lambda,
                st.policy.row_mut(h, s),
            );
            let mut scratch = vec![0.0; d.actions];
            let lower = soft_conjugate_into(&st.q_lower[start..start + d.actions], spec.lambda, &mut scratch);
            st.v_upper[h * d.states + s] = upper.clamp(0.0, cap);
            st.v_lower[h * d.states + s] = lower.clamp(0.0, cap);
        }
    }
    Ok(st)
}

/// Gap table `G_h(s, a)` and the certified gap `π_1 G_1(s_1)`.
#[derive(Debug, Clone)]
pub struct GapTable {
    dims: Dims,
    pub g: Vec<f64>,
    pub value: f64,
}

impl GapTable {
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.g[self.dims.sa(h, s, a)]
    }
}

/// `G_h = clip(2b^B + 2κb^H + 4H²Rmax·β^KL/n + (1 + 3/H)·p̂[π_{h+1}G_{h+1}], 0, H·Rmax)`.
pub fn gap_recursion(
    state: &ConfidenceState,
    model: &EmpiricalModel,
    policy: &MarkovPolicy,
    rmax: f64,
) -> Result<GapTable> {
    let d = state.dims;
    ensure_dims(d, model.dims(), "model")?;
    ensure_dims(d, policy.dims(), "policy")?;
    let h_f = d.horizon as f64;
    let growth = 1.0 + 3.0 / h_f;
    let mut g = vec![0.0; d.sa_len()];
    let mut pg_next = vec![0.0; d.states];
    let mut pg = vec![0.0; d.states];
    for h in (0..d.horizon).rev() {
        for s in 0..d.states {
            for a in 0..d.actions {
                let i = d.sa(h, s, a);
                g[i] = if state.unvisited[i] {
                    state.cap
                } else {
                    let local = 2.0 * state.bernstein[i]
                        + 2.0 * state.kappa * state.entropy_bonus[i]
                        + 4.0 * h_f * h_f * rmax * state.kl_rate[i];
                    let future = if h + 1 < d.horizon { growth * dot(model.row(h, s, a), &pg_next) } else { 0.0 };
                    (local + future).clamp(0.0, state.cap)
                };
            }
            let start = d.sa(h, s, 0);
            pg[s] = dot(policy.row(h, s), &g[start..start + d.actions]);
        }
        std::mem::swap(&mut pg, &mut pg_next);
    }
    let s1 = model.initial_state();
    Ok(GapTable { dims: d, value: pg_next[s1], g })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcbviConfig {
    pub epsilon: f64,
    pub max_episodes: u64,
    pub params: UcbviParams,
    /// Record diagnostics every this many episodes (0 disables them).
    pub log_every: u64,
    /// Compare the bounds with the exact values of the true model on every
    /// episode.
    pub track_true_gap: bool,
}

impl Default for UcbviConfig {
    fn default() -> Self {
        UcbviConfig {
            epsilon: 0.1,
            max_episodes: 100_000,
            params: UcbviParams::default(),
            log_every: 0,
            track_true_gap: false,
        }
    }
}

/// Checks of the bounds against the true model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub episodes_checked: u64,
    /// Episodes where the true gap exceeded the certified gap.
    pub gap_violations: u64,
    /// Episodes where `Q̲ ≤ Q* ≤ Q̄` failed somewhere.
    pub bracket_violations: u64,
}

#[derive(Debug, Clone)]
pub struct UcbviOutcome {
    pub policy: MarkovPolicy,
    /// Number of episodes played before stopping (or the budget).
    pub stopping_episode: u64,
    pub converged: bool,
    /// Certified gap of the returned policy.
    pub certified_gap: f64,
    pub diagnostics: DiagnosticsLog,
    pub soundness: Option<SoundnessReport>,
    /// `V*_1(s_1) − V^π_1(s_1)` for the returned policy, when tracked.
    pub true_gap: Option<f64>,
}

fn true_gap(env: &TabularMdp, spec: &RegularizedSpec, optimal: &ValueTables, policy: &MarkovPolicy) -> Result<f64> {
    let s1 = env.initial_state();
    Ok(optimal.v(0, s1) - evaluate_regularized(env, spec, policy)?.v(0, s1))
}

/// Plays the optimistic policy until the certified gap drops below `ε` or the
/// episode budget runs out.
pub fn run_ucbvi_ent(env: &TabularMdp, spec: &RegularizedSpec, config: &UcbviConfig, seed: u64) -> Result<UcbviOutcome> {
    let d = env.dims();
    ensure_dims(d, spec.dims(), "spec")?;
    if !(config.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if !(config.params.delta > 0.0 && config.params.delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    let optimal = if config.track_true_gap { Some(solve_regularized(env, spec)?) } else { None };
    let mut soundness = config.track_true_gap.then(SoundnessReport::default);
    let mut rng = seed::child(seed, seed::streams::EPISODES);
    let mut counts = CountTables::new(d);
    let mut diagnostics = DiagnosticsLog::new();
    let s1 = env.initial_state();
    let mut t: u64 = 0;
    loop {
        let model = EmpiricalModel::from_counts(&counts, s1);
        let state = compute_bounds(&counts, &model, spec, &config.params)?;
        let gap = gap_recursion(&state, &model, &state.policy, spec.rmax())?;
        let mut tg = None;
        if let (Some(opt), Some(report)) = (&optimal, soundness.as_mut()) {
            let g = true_gap(env, spec, opt, &state.policy)?;
            report.episodes_checked += 1;
            if g > gap.value + 1e-9 {
                report.gap_violations += 1;
            }
            let tol = 1e-9;
            let bracketed = (0..d.sa_len()).all(|i| {
                let q = opt_q(opt, d, i);
                state.q_lower[i] <= q + tol && q <= state.q_upper[i] + tol
            });
            if !bracketed {
                report.bracket_violations += 1;
            }
            tg = Some(g);
        }
        let stop = gap.value <= config.epsilon;
        let exhausted = t >= config.max_episodes;
        if config.log_every > 0 && (t.is_multiple_of(config.log_every) || stop || exhausted) {
            let mut metrics = vec![
                ("certified_gap".to_string(), gap.value),
                ("upper_value".to_string(), state.v_upper_at(0, s1)),
                ("lower_value".to_string(), state.v_lower_at(0, s1)),
            ];
            if let Some(g) = tg {
                metrics.push(("true_gap".to_string(), g));
            }
            diagnostics.push(t, metrics)?;
        }
        if stop || exhausted {
            return Ok(UcbviOutcome {
                policy: state.policy,
                stopping_episode: t,
                converged: stop,
                certified_gap: gap.value,
                diagnostics,
                soundness,
                true_gap: tg,
            });
        }
        let traj = sample_trajectory(env, &state.policy, &mut rng);
        counts.record(&traj)?;
        t += 1;
    }
}

fn opt_q(opt: &ValueTables, d: Dims, i: usize) -> f64 {
    let a = i % d.actions;
    let s = (i / d.actions) % d.states;
    let h = i / d.pairs();
    opt.q(h, s, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs;

    #[test]
    fn threshold_values() {
        let d = Dims::new(2, 2, 2).unwrap();
        let t0 = thresholds(d, 0.1, 0).unwrap();
        assert!((t0.kl - (320f64.ln() + 2.0)).abs() < 1e-12);
        assert!((t0.kl - 7.7683).abs() < 1e-4);
        assert_eq!(t0.entropy, 0.0);
        assert_eq!(thresholds(d, 0.1, 1).unwrap().entropy, 0.0);
        assert_eq!(t0.cnt, thresholds(d, 0.1, 1_000_000).unwrap().cnt);
        assert!(thresholds(d, 1.0, 3).is_err());
    }

    #[test]
    fn zero_counts_give_trivial_bounds() {
        let env = envs::double_chain(5, 0.1, 3).unwrap();
        let spec = RegularizedSpec::mtee(env.dims());
        let counts = CountTables::new(env.dims());
        let model = EmpiricalModel::from_counts(&counts, env.initial_state());
        let st = compute_bounds(&counts, &model, &spec, &UcbviParams::default()).unwrap();
        assert!(st.q_upper.iter().all(|&q| q == st.cap()));
        assert!(st.q_lower.iter().all(|&q| q == 0.0));
        let gap = gap_recursion(&st, &model, &st.policy, spec.rmax()).unwrap();
        assert!(gap.g.iter().all(|&g| g == st.cap()));
        assert_eq!(gap.value, st.cap());
    }

    #[test]
    fn vacuous_target_stops_immediately() {
        let env = envs::double_chain(5, 0.1, 3).unwrap();
        let spec = RegularizedSpec::mtee(env.dims());
        let config = UcbviConfig { epsilon: 100.0, ..Default::default() };
        let out = run_ucbvi_ent(&env, &spec, &config, 0).unwrap();
        assert_eq!(out.stopping_episode, 0);
        assert!(out.converged);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let env = envs::double_chain(5, 0.1, 3).unwrap();
        let spec = RegularizedSpec::mtee(env.dims());
        let config = UcbviConfig { epsilon: 1e-3, max_episodes: 10, ..Default::default() };
        let out = run_ucbvi_ent(&env, &spec, &config, 0).unwrap();
        assert!(!out.converged);
        assert_eq!(out.stopping_episode, 10);
    }
}
