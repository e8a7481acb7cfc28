use std::path::{Path, PathBuf};

use maxent_core::entgame::{run_entgame, run_reg_entgame, EntGameConfig, EntGameOutcome, Variant};
use maxent_core::mdp::{exact_visitation, sample_trajectory, visitation_entropy};
use maxent_core::oracles::{optimal_mvee, EntropyObjective, FrankWolfeConfig};
use maxent_core::rf_explore::{rf_explore_ent, ExplorationConfig, OptimisticReacher};
use maxent_core::seed::{self, streams};
use maxent_core::soft::{solve_regularized, trajectory_entropy, RegularizedSpec};
use maxent_core::ucbvi::{run_ucbvi_ent, UcbviConfig, UcbviParams};
use maxent_core::{entropy, CountTables, DiagnosticsLog, MarkovPolicy, TabularMdp};
use rayon::prelude::*;

use crate::config::{AggregationMode, AlgorithmConfig, AlgorithmKind, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::eval::StoredPolicy;
use crate::output::{
    csv_bytes, fmt_float, summary_cells, write_atomic, COUNTS_HEADER, CURVES_HEADER, METRICS_HEADER, SUMMARY_HEADER,
};

/// Output of one (algorithm, seed) pair.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub label: String,
    pub seed: u64,
    /// `(h, state, visits)` with `h` a step index or `"all"`.
    pub visits: Vec<(String, usize, u64)>,
    /// `(episode, metric, value)`.
    pub curves: Vec<(u64, String, f64)>,
    pub metrics: Vec<(String, f64)>,
    pub policy: Option<StoredPolicy>,
}

impl Replicate {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Visits of each state summed over steps.
    pub fn state_totals(&self, states: usize) -> Vec<u64> {
        let mut out = vec![0; states];
        for (_, s, n) in &self.visits {
            out[*s] += n;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: PathBuf,
    pub replicates: Vec<Replicate>,
}

impl RunReport {
    pub fn replicates_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Replicate> + 'a {
        self.replicates.iter().filter(move |r| r.label == label)
    }
}

/// Environment steps spent in each phase.
#[derive(Debug, Clone, Copy, Default)]
struct Steps {
    goal_phase: u64,
    model_phase: u64,
    play: u64,
    evaluation: u64,
}

impl Steps {
    fn push(self, metrics: &mut Vec<(String, f64)>) {
        let total = self.goal_phase + self.model_phase + self.play + self.evaluation;
        for (k, v) in [
            ("goal_phase_steps", self.goal_phase),
            ("model_phase_steps", self.model_phase),
            ("play_steps", self.play),
            ("evaluation_steps", self.evaluation),
            ("total_steps", total),
        ] {
            metrics.push((k.to_string(), v as f64));
        }
    }
}

fn rollout(env: &TabularMdp, policy: &MarkovPolicy, episodes: u64, seed: u64, stream: u64) -> Result<CountTables> {
    let mut rng = seed::child(seed, stream);
    let mut counts = CountTables::new(env.dims());
    for _ in 0..episodes {
        counts.record(&sample_trajectory(env, policy, &mut rng))?;
    }
    Ok(counts)
}

fn visit_rows(counts: &CountTables, mode: AggregationMode) -> Vec<(String, usize, u64)> {
    let d = counts.dims();
    match mode {
        AggregationMode::PerStep => (0..d.horizon)
            .flat_map(|h| (0..d.states).map(move |s| (h.to_string(), s, counts.state_visits(h, s))))
            .collect(),
        AggregationMode::StageHomogeneous => (0..d.states)
            .map(|s| ("all".to_string(), s, (0..d.horizon).map(|h| counts.state_visits(h, s)).sum()))
            .collect(),
    }
}

fn histogram_entropy(counts: &CountTables) -> f64 {
    let d = counts.dims();
    let totals: Vec<f64> =
        (0..d.states).map(|s| (0..d.horizon).map(|h| counts.state_visits(h, s)).sum::<u64>() as f64).collect();
    let n: f64 = totals.iter().sum();
    entropy::entropy(&totals.iter().map(|x| x / n).collect::<Vec<_>>())
}

fn curve_rows(log: &DiagnosticsLog) -> Vec<(u64, String, f64)> {
    log.records()
        .iter()
        .flat_map(|r| r.metrics.iter().filter(|(_, v)| v.is_finite()).map(move |(k, v)| (r.episode, k.clone(), *v)))
        .collect()
}

fn markov_metrics(env: &TabularMdp, policy: &MarkovPolicy, metrics: &mut Vec<(String, f64)>) -> Result<()> {
    let profile = exact_visitation(env, policy)?;
    metrics.push(("ve".into(), visitation_entropy(&profile)));
    metrics.push(("ve_averaged".into(), entropy::entropy(&profile.averaged())));
    metrics.push(("te".into(), trajectory_entropy(env, policy)?));
    Ok(())
}

fn game_metrics(out: &EntGameOutcome, metrics: &mut Vec<(String, f64)>) -> Result<()> {
    metrics.push(("ve".into(), visitation_entropy(&out.profile)));
    metrics.push(("ve_averaged".into(), entropy::entropy(&out.profile.averaged())));
    let avg = out.trace.empirical_average()?;
    metrics.push(("forecaster_regret".into(), maxent_core::entgame::forecaster_regret(&out.trace, &avg)?));
    Ok(())
}

/// Runs one algorithm on one seed.
pub fn run_replicate(config: &ExperimentConfig, env: &TabularMdp, algo: &AlgorithmConfig, seed: u64) -> Result<Replicate> {
    let d = env.dims();
    let h = d.horizon as u64;
    let episodes = config.episodes(d.horizon);
    let mtee = RegularizedSpec::mtee(d);
    let mut metrics = Vec::new();
    let mut curves = Vec::new();
    let mut steps = Steps::default();
    let (counts, policy) = match algo.kind {
        AlgorithmKind::Random {} => {
            let pi = MarkovPolicy::uniform(d);
            markov_metrics(env, &pi, &mut metrics)?;
            steps.play = episodes * h;
            (rollout(env, &pi, episodes, seed, streams::EPISODES)?, StoredPolicy::Markov { policy: pi })
        }
        AlgorithmKind::Entgame { prior, delta, bonus_scale, aggregation } => {
            let cfg = EntGameConfig {
                episodes: episodes as usize,
                prior,
                delta,
                bonus_scale,
                aggregation: aggregation.unwrap_or(config.aggregation).core(),
                variant: Variant::Plain,
                log_every: config.log_every as usize,
            };
            let out = run_entgame(env, &cfg, seed)?;
            game_metrics(&out, &mut metrics)?;
            curves = curve_rows(&out.diagnostics);
            steps.play = episodes * h;
            (out.counts, StoredPolicy::Mixture { mixture: out.mixture })
        }
        AlgorithmKind::RegEntgame { prior, delta, episodes_per_goal, model_episodes, aggregation } => {
            let game = episodes - (d.states * d.horizon * episodes_per_goal + model_episodes) as u64;
            let cfg = EntGameConfig {
                episodes: game as usize,
                prior,
                delta,
                bonus_scale: 1.0,
                aggregation: aggregation.unwrap_or(config.aggregation).core(),
                variant: Variant::Regularized { episodes_per_goal, model_episodes },
                log_every: config.log_every as usize,
            };
            let out = run_reg_entgame(env, &cfg, seed)?;
            game_metrics(&out, &mut metrics)?;
            curves = curve_rows(&out.diagnostics);
            steps.goal_phase = out.exploration.exploration_steps;
            steps.model_phase = out.exploration.sampling_steps;
            steps.play = game * h;
            (out.counts, StoredPolicy::Mixture { mixture: out.mixture })
        }
        AlgorithmKind::UcbviEnt { epsilon, delta, bonus_scale, max_episodes, track_true_gap } => {
            let cfg = UcbviConfig {
                epsilon,
                max_episodes: max_episodes.unwrap_or(episodes),
                params: UcbviParams { delta, bonus_scale },
                log_every: config.log_every,
                track_true_gap,
            };
            let out = run_ucbvi_ent(env, &mtee, &cfg, seed)?;
            curves = curve_rows(&out.diagnostics);
            let opt = solve_regularized(env, &mtee)?.v(0, env.initial_state());
            markov_metrics(env, &out.policy, &mut metrics)?;
            let te = trajectory_entropy(env, &out.policy)?;
            metrics.push(("oracle_gap".into(), opt - te));
            metrics.push(("stopping_episode".into(), out.stopping_episode as f64));
            metrics.push(("converged".into(), if out.converged { 1.0 } else { 0.0 }));
            metrics.push(("certified_gap".into(), out.certified_gap));
            if let Some(report) = out.soundness {
                metrics.push(("gap_violations".into(), report.gap_violations as f64));
                metrics.push(("bracket_violations".into(), report.bracket_violations as f64));
            }
            steps.play = out.stopping_episode * h;
            steps.evaluation = episodes * h;
            let counts = rollout(env, &out.policy, episodes, seed, streams::EVALUATION)?;
            (counts, StoredPolicy::Markov { policy: out.policy })
        }
        AlgorithmKind::RfExploreEnt { episodes_per_goal, model_episodes, delta, bonus_scale } => {
            let goal_episodes = (d.states * d.horizon * episodes_per_goal) as u64;
            let model_episodes = model_episodes.unwrap_or_else(|| (episodes - goal_episodes) as usize);
            let cfg = ExplorationConfig {
                episodes_per_goal,
                model_episodes,
                reacher: OptimisticReacher { delta, bonus_scale },
            };
            let out = rf_explore_ent(env, std::slice::from_ref(&mtee), &cfg, seed)?;
            let pi = out.policies.into_iter().next().expect("one spec in, one policy out");
            markov_metrics(env, &pi, &mut metrics)?;
            let opt = solve_regularized(env, &mtee)?.v(0, env.initial_state());
            metrics.push(("oracle_gap".into(), opt - trajectory_entropy(env, &pi)?));
            steps.goal_phase = out.exploration.steps.exploration_steps;
            steps.model_phase = out.exploration.steps.sampling_steps;
            steps.evaluation = episodes * h;
            (rollout(env, &pi, episodes, seed, streams::EVALUATION)?, StoredPolicy::Markov { policy: pi })
        }
        AlgorithmKind::OptimalMvee { iterations, gap_tolerance, aggregation } => {
            let objective = match aggregation.unwrap_or(config.aggregation) {
                AggregationMode::PerStep => EntropyObjective::PerStep,
                AggregationMode::StageHomogeneous => EntropyObjective::Averaged,
            };
            let fw = optimal_mvee(env, &FrankWolfeConfig { iterations, smoothing: None, objective, gap_tolerance })?;
            metrics.push(("objective".into(), fw.objective()));
            metrics.push(("duality_gap".into(), fw.duality_gap));
            metrics.push(("fw_iterations".into(), fw.iterations as f64));
            markov_metrics(env, &fw.policy, &mut metrics)?;
            steps.play = episodes * h;
            (rollout(env, &fw.policy, episodes, seed, streams::EPISODES)?, StoredPolicy::Markov { policy: fw.policy })
        }
        AlgorithmKind::OptimalMtee {} => {
            let pi = solve_regularized(env, &mtee)?.policy;
            markov_metrics(env, &pi, &mut metrics)?;
            steps.play = episodes * h;
            (rollout(env, &pi, episodes, seed, streams::EPISODES)?, StoredPolicy::Markov { policy: pi })
        }
    };
    metrics.push(("visit_entropy".into(), histogram_entropy(&counts)));
    steps.push(&mut metrics);
    Ok(Replicate {
        label: algo.label.clone(),
        seed,
        visits: visit_rows(&counts, config.aggregation),
        curves,
        metrics,
        policy: config.save_policies.then_some(policy),
    })
}

fn replicate_dir(output: &Path, label: &str, seed: u64) -> PathBuf {
    output.join("replicates").join(label).join(format!("seed-{seed}"))
}

fn counts_rows<'a>(r: &'a Replicate, env: &'a str) -> impl Iterator<Item = Vec<String>> + 'a {
    r.visits
        .iter()
        .map(move |(h, s, n)| vec![r.seed.to_string(), r.label.clone(), env.to_string(), h.clone(), s.to_string(), n.to_string()])
}

fn curves_rows(r: &Replicate) -> impl Iterator<Item = Vec<String>> + '_ {
    r.curves
        .iter()
        .map(move |(t, k, v)| vec![r.seed.to_string(), r.label.clone(), t.to_string(), k.clone(), fmt_float(*v)])
}

fn metrics_rows(r: &Replicate) -> impl Iterator<Item = Vec<String>> + '_ {
    r.metrics.iter().map(move |(k, v)| vec![r.seed.to_string(), r.label.clone(), k.clone(), fmt_float(*v)])
}

fn write_replicate(output: &Path, env: &str, r: &Replicate) -> Result<()> {
    let dir = replicate_dir(output, &r.label, r.seed);
    write_atomic(&dir.join("counts.csv"), &csv_bytes(&COUNTS_HEADER, counts_rows(r, env)))?;
    write_atomic(&dir.join("curves.csv"), &csv_bytes(&CURVES_HEADER, curves_rows(r)))?;
    write_atomic(&dir.join("metrics.csv"), &csv_bytes(&METRICS_HEADER, metrics_rows(r)))?;
    if let Some(p) = &r.policy {
        p.save(&dir.join("policy.json"))?;
    }
    Ok(())
}

/// Per-metric mean and interval over seeds, metrics in first-seen order.
pub fn summarize(replicates: &[Replicate], labels: &[&str]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for &label in labels {
        let mine: Vec<&Replicate> = replicates.iter().filter(|r| r.label == label).collect();
        let mut names: Vec<&str> = Vec::new();
        for r in &mine {
            for (k, _) in &r.metrics {
                if !names.contains(&k.as_str()) {
                    names.push(k);
                }
            }
        }
        for name in names {
            let xs: Vec<f64> = mine.iter().filter_map(|r| r.metric(name)).collect();
            let mut row = vec![label.to_string(), name.to_string()];
            row.extend(summary_cells(&xs));
            rows.push(row);
        }
    }
    rows
}

/// Runs every (algorithm, seed) pair on a pool of `config.workers` threads,
/// writes each replicate as it finishes, then writes the combined files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let env = config.env.build()?;
    let env_label = config.env.label();
    let jobs: Vec<(&AlgorithmConfig, u64)> =
        config.algorithms.iter().flat_map(|a| config.seeds.iter().map(move |&s| (a, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let out = &config.output;
    let results: Vec<Result<Replicate>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(algo, seed)| {
                let r = run_replicate(config, &env, algo, seed)?;
                write_replicate(out, env_label, &r)?;
                Ok(r)
            })
            .collect()
    });
    let replicates = results.into_iter().collect::<Result<Vec<_>>>()?;

    let counts = csv_bytes(&COUNTS_HEADER, replicates.iter().flat_map(|r| counts_rows(r, env_label)));
    write_atomic(&out.join("counts.csv"), &counts)?;
    write_atomic(&out.join("curves.csv"), &csv_bytes(&CURVES_HEADER, replicates.iter().flat_map(curves_rows)))?;
    write_atomic(&out.join("metrics.csv"), &csv_bytes(&METRICS_HEADER, replicates.iter().flat_map(metrics_rows)))?;
    let labels: Vec<&str> = config.algorithms.iter().map(|a| a.label.as_str()).collect();
    write_atomic(&out.join("summary.csv"), &csv_bytes(&SUMMARY_HEADER, summarize(&replicates, &labels)))?;
    let manifest = serde_json::json!({
        "config": config_manifest(config),
        "dims": { "states": env.dims().states, "actions": env.dims().actions, "horizon": env.dims().horizon },
        "episodes": config.episodes(env.dims().horizon),
    });
    write_atomic(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("json").as_bytes())?;
    Ok(RunReport { output: out.clone(), replicates })
}

/// The config without machine-specific fields, so manifests compare equal
/// across machines and output directories.
fn config_manifest(config: &ExperimentConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("output");
        obj.remove("workers");
    }
    v
}
