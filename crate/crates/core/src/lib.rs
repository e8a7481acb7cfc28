//! Maximum-entropy exploration for tabular finite-horizon MDPs.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: environments, policies, visitation distributions, counts and
//!   the empirical transition model.
//! - [`soft`]: entropy-regularized Bellman machinery (log-sum-exp backups,
//!   optimal and policy-evaluation recursions, variance recursion).
//! - [`envs`]: Double Chain, GridWorld and random benchmark MDPs.
//! - [`entgame`]: the forecaster/sampler game for visitation entropy and its
//!   regularized variant.
//! - [`ucbvi`]: optimistic/pessimistic planning with a certified gap and a
//!   stopping rule for regularized best policy identification.
//! - [`rf_explore`]: two-phase reward-free exploration followed by planning
//!   on the learned model.
//! - [`oracles`]: brute-force trajectory enumeration, a Frank-Wolfe solver for
//!   the optimal visitation-entropy policy and Monte-Carlo estimators.

pub mod entgame;
pub mod entropy;
pub mod envs;
mod error;
pub mod mdp;
pub mod oracles;
pub mod rf_explore;
pub mod seed;
pub mod soft;
pub mod ucbvi;

pub use error::{Error, Result};
pub use mdp::{
    CountTables, DiagnosticsLog, Dims, EmpiricalModel, Environment, MarkovPolicy, MixturePolicy,
    Policy, TabularMdp, Trajectory, Transitions, VisitationProfile,
};
