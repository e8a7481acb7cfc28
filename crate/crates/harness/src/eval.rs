use std::path::Path;
use std::str::FromStr;

use maxent_core::mdp::{exact_visitation, visitation_entropy};
use maxent_core::soft::{solve_regularized, trajectory_entropy, RegularizedSpec};
use maxent_core::{entropy, MarkovPolicy, MixturePolicy, TabularMdp};
use serde::{Deserialize, Serialize};

use crate::config::EnvConfig;
use crate::error::{HarnessError, Result};
use crate::output::write_atomic;

/// Policy file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StoredPolicy {
    Markov { policy: MarkovPolicy },
    Mixture { mixture: MixturePolicy },
}

impl StoredPolicy {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::data(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_vec(self).expect("policies serialize");
        write_atomic(path, &text)
    }

    fn as_markov(&self, metric: Metric) -> Result<&MarkovPolicy> {
        match self {
            StoredPolicy::Markov { policy } => Ok(policy),
            StoredPolicy::Mixture { .. } => {
                Err(HarnessError::Config(format!("metric {} needs a Markov policy", metric.name())))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Sum over steps of the state-action visitation entropy.
    Ve,
    /// Entropy of the step-averaged state-action visitation.
    VeAveraged,
    /// Trajectory entropy.
    Te,
    /// Largest trajectory entropy on `env` minus `te`.
    MteeGap,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Ve, Metric::VeAveraged, Metric::Te, Metric::MteeGap];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ve => "ve",
            Metric::VeAveraged => "ve_averaged",
            Metric::Te => "te",
            Metric::MteeGap => "mtee_gap",
        }
    }
}

impl FromStr for Metric {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown metric {s:?}")))
    }
}

/// Reads the `[env]` table of a config file. Other tables are ignored.
pub fn load_env(path: &Path) -> Result<EnvConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let env = table
        .remove("env")
        .ok_or_else(|| HarnessError::Config(format!("{}: no [env] table", path.display())))?;
    env.try_into()
        .map_err(|e: toml::de::Error| HarnessError::Config(format!("{}: env: {}", path.display(), e.message())))
}

/// Named scalar metrics of a stored policy on `env`.
pub fn eval_policy(env: &TabularMdp, policy: &StoredPolicy, metrics: &[Metric]) -> Result<Vec<(String, f64)>> {
    let d = env.dims();
    let pdims = match policy {
        StoredPolicy::Markov { policy } => policy.dims(),
        StoredPolicy::Mixture { mixture } => maxent_core::Policy::dims(mixture),
    };
    if pdims != d {
        return Err(maxent_core::Error::ShapeMismatch(format!("policy shape {pdims} for environment {d}")).into());
    }
    let profile = match policy {
        StoredPolicy::Markov { policy } => exact_visitation(env, policy)?,
        StoredPolicy::Mixture { mixture } => exact_visitation(env, mixture)?,
    };
    let mtee = RegularizedSpec::mtee(d);
    let s1 = env.initial_state();
    let mut out = Vec::with_capacity(metrics.len());
    for &m in metrics {
        let v = match m {
            Metric::Ve => visitation_entropy(&profile),
            Metric::VeAveraged => entropy::entropy(&profile.averaged()),
            Metric::Te => trajectory_entropy(env, policy.as_markov(m)?)?,
            Metric::MteeGap => {
                let value = trajectory_entropy(env, policy.as_markov(m)?)?;
                solve_regularized(env, &mtee)?.v(0, s1) - value
            }
        };
        out.push((m.name().to_string(), v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use maxent_core::envs;

    #[test]
    fn policies_round_trip_through_json() {
        let d = maxent_core::Dims::new(3, 2, 2).unwrap();
        let p = StoredPolicy::Markov { policy: MarkovPolicy::uniform(d) };
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<StoredPolicy>(&text).unwrap(), p);
        let bad = text.replace("0.5", "0.7");
        assert!(serde_json::from_str::<StoredPolicy>(&bad).is_err());
    }

    #[test]
    fn optimal_mtee_policy_has_zero_gap() {
        let env = envs::double_chain(5, 0.1, 3).unwrap();
        let spec = RegularizedSpec::mtee(env.dims());
        let opt = solve_regularized(&env, &spec).unwrap();
        let p = StoredPolicy::Markov { policy: opt.policy.clone() };
        let m = eval_policy(&env, &p, &[Metric::Te, Metric::MteeGap]).unwrap();
        assert!((m[0].1 - opt.v(0, 2)).abs() < 1e-10);
        assert!(m[1].1.abs() < 1e-12);
    }

    #[test]
    fn mixtures_reject_markov_only_metrics() {
        let env = envs::double_chain(5, 0.1, 3).unwrap();
        let mix = MixturePolicy::new(vec![MarkovPolicy::uniform(env.dims())]).unwrap();
        let p = StoredPolicy::Mixture { mixture: mix };
        assert!(eval_policy(&env, &p, &[Metric::Ve]).is_ok());
        assert!(eval_policy(&env, &p, &[Metric::Te]).is_err());
    }
}
