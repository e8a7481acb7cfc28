use maxent_core::entgame::{
    forecaster_regret, forecaster_regret_bound, log_loss, run_entgame, run_reg_entgame, sampler_plan,
    Aggregation, EntGameConfig, ForecasterState, SamplerParams, Variant,
};
use maxent_core::envs;
use maxent_core::mdp::{exact_visitation, sample_trajectory, visitation_entropy};
use maxent_core::oracles::{optimal_mvee, FrankWolfeConfig};
use maxent_core::seed;
use maxent_core::{CountTables, EmpiricalModel, MarkovPolicy, Policy, Transitions};

#[test]
fn forecaster_regret_stays_below_bound() {
    let mdp = envs::double_chain(7, 0.1, 4).unwrap();
    let d = mdp.dims();
    for s in 0..5 {
        let config = EntGameConfig { episodes: 400, ..Default::default() };
        let out = run_entgame(&mdp, &config, s).unwrap();
        let avg = out.trace.empirical_average().unwrap();
        let regret = forecaster_regret(&out.trace, &avg).unwrap();
        assert!(regret <= forecaster_regret_bound(d, 400), "seed {s}: {regret}");
    }
}

#[test]
fn forecaster_is_the_smoothed_empirical_frequency() {
    let mdp = envs::double_chain(5, 0.2, 3).unwrap();
    let d = mdp.dims();
    let pi = MarkovPolicy::uniform(d);
    let mut rng = seed::root(3);
    let mut f = ForecasterState::new(d, 2, Aggregation::PerStep);
    let mut counts = CountTables::new(d);
    let mut total = 0.0;
    for t in 0..100u64 {
        let traj = sample_trajectory(&mdp, &pi, &mut rng);
        let fc = f.forecast();
        let denom = t as f64 + 2.0 * d.pairs() as f64;
        let mut expected_loss = 0.0;
        for (h, (s, a, _)) in traj.steps().enumerate() {
            let p = (counts.visits(h, s, a) as f64 + 2.0) / denom;
            assert!((fc.get(h, s, a) - p).abs() < 1e-15);
            expected_loss -= p.ln();
        }
        let loss = log_loss(&fc, &traj);
        assert!((loss - expected_loss).abs() < 1e-12);
        total += loss;
        f.observe(&traj).unwrap();
        counts.record(&traj).unwrap();
    }
    assert_eq!(f.counts(), &counts);
    assert!(total > 0.0);
}

#[test]
fn mixture_profile_is_the_average_of_components() {
    let mdp = envs::double_chain(5, 0.1, 4).unwrap();
    let out = run_entgame(&mdp, &EntGameConfig { episodes: 60, ..Default::default() }, 2).unwrap();
    let comps = out.mixture.components();
    let mut avg = vec![0.0; mdp.dims().sa_len()];
    for c in comps {
        for (a, x) in avg.iter_mut().zip(exact_visitation(&mdp, c).unwrap().as_slice()) {
            *a += x / comps.len() as f64;
        }
    }
    for (x, y) in avg.iter().zip(out.profile.as_slice()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn entgame_covers_every_reachable_pair() {
    let mdp = envs::double_chain(5, 0.1, 4).unwrap();
    let d = mdp.dims();
    let uniform = exact_visitation(&mdp, &MarkovPolicy::uniform(d)).unwrap();
    let out = run_entgame(&mdp, &EntGameConfig { episodes: 2000, ..Default::default() }, 1).unwrap();
    for h in 0..d.horizon {
        for s in 0..d.states {
            for a in 0..d.actions {
                if uniform.get(h, s, a) > 0.0 {
                    assert!(out.counts.visits(h, s, a) > 0, "({h},{s},{a}) never visited");
                }
            }
        }
    }
}

#[test]
fn sampler_plan_matches_straight_line_recursion() {
    let mdp = envs::random_mdp(3, 2, 3, 5, 0.8).unwrap();
    let d = mdp.dims();
    let mut rng = seed::root(6);
    let pi = MarkovPolicy::uniform(d);
    let mut f = ForecasterState::new(d, 1, Aggregation::PerStep);
    for _ in 0..25 {
        f.observe(&sample_trajectory(&mdp, &pi, &mut rng)).unwrap();
    }
    let counts = f.counts().clone();
    let model = EmpiricalModel::from_counts(&counts, 0);
    let forecast = f.forecast();
    let params = SamplerParams { delta: 0.1, bonus_scale: 0.3, prior: 1 };
    let t = 26u64;
    let plan = sampler_plan(&counts, &model, &forecast, t, &params).unwrap();

    let (s_n, a_n, h_n) = (d.states as f64, d.actions as f64, d.horizon as f64);
    let sa = s_n * a_n;
    let cap = h_n * (t as f64 + sa).ln();
    let mut v_next = vec![0.0; d.states];
    for h in (0..d.horizon).rev() {
        let mut v = vec![0.0; d.states];
        for s in 0..d.states {
            let mut best = f64::NEG_INFINITY;
            for a in 0..d.actions {
                let n = counts.visits(h, s, a) as f64;
                let bonus = if n == 0.0 {
                    cap
                } else {
                    let alpha = (2.0 * sa * h_n / 0.1).ln() + s_n * (1.0 + (1.0 + n).ln());
                    let lt = (t as f64 + sa).ln();
                    (0.3 * (2.0 * h_n * h_n * lt * lt * alpha / n).sqrt()).min(cap)
                };
                let p = model.next_state_dist(h, s, a);
                let ev: f64 = p.iter().zip(&v_next).map(|(x, y)| x * y).sum();
                let q = (1.0 / forecast.get(h, s, a)).ln() + ev + bonus;
                assert!((q - plan.q(h, s, a)).abs() < 1e-10);
                best = best.max(q);
            }
            v[s] = best.clamp(0.0, cap);
            assert!((v[s] - plan.v(h, s)).abs() < 1e-10);
            let chosen = plan.policy.row(h, s).iter().position(|&p| p == 1.0).unwrap();
            assert!((plan.q(h, s, chosen) - best).abs() < 1e-12);
        }
        v_next = v;
    }
}

#[test]
fn stage_homogeneous_forecast_is_step_independent() {
    let mdp = envs::double_chain(5, 0.1, 4).unwrap();
    let config = EntGameConfig { episodes: 50, aggregation: Aggregation::StageHomogeneous, ..Default::default() };
    let out = run_entgame(&mdp, &config, 0).unwrap();
    assert_eq!(out.mixture.len(), 50);
    let d = mdp.dims();
    let mut f = ForecasterState::new(d, 1, Aggregation::StageHomogeneous);
    let mut rng = seed::root(1);
    f.observe(&sample_trajectory(&mdp, &MarkovPolicy::uniform(d), &mut rng)).unwrap();
    let fc = f.forecast();
    for h in 1..d.horizon {
        assert_eq!(fc.step(0), fc.step(h));
    }
}

#[test]
fn both_games_approach_the_optimum_on_a_short_chain() {
    let mdp = envs::double_chain(5, 0.1, 4).unwrap();
    let opt = optimal_mvee(&mdp, &FrankWolfeConfig::default()).unwrap().objective();
    let plain = run_entgame(&mdp, &EntGameConfig { episodes: 3000, ..Default::default() }, 0).unwrap();
    let reg_config = EntGameConfig {
        episodes: 1500,
        variant: Variant::Regularized { episodes_per_goal: 20, model_episodes: 1000 },
        ..Default::default()
    };
    let reg = run_reg_entgame(&mdp, &reg_config, 0).unwrap();
    assert!(visitation_entropy(&plain.profile) > opt - 0.3);
    assert!(visitation_entropy(&reg.profile) > opt - 0.3);
    assert!(reg.exploration.total_steps() > 0);
    assert_eq!(plain.exploration.total_steps(), 0);
}

#[test]
fn reg_entgame_rejects_plain_variant() {
    let mdp = envs::double_chain(5, 0.1, 4).unwrap();
    assert!(run_reg_entgame(&mdp, &EntGameConfig::default(), 0).is_err());
}
