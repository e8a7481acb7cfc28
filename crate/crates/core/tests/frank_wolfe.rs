use maxent_core::envs;
use maxent_core::mdp::{exact_visitation, visitation_entropy};
use maxent_core::oracles::{optimal_mvee, policy_from_profile, EntropyObjective, FrankWolfeConfig};
use maxent_core::seed;
use maxent_core::{Dims, MarkovPolicy, TabularMdp};

fn all_deterministic(d: Dims) -> Vec<MarkovPolicy> {
    let cells = d.horizon * d.states;
    let total = d.actions.pow(cells as u32);
    (0..total)
        .map(|mut code| {
            let actions: Vec<usize> = (0..cells)
                .map(|_| {
                    let a = code % d.actions;
                    code /= d.actions;
                    a
                })
                .collect();
            MarkovPolicy::deterministic(d, &actions).unwrap()
        })
        .collect()
}

#[test]
fn optimum_dominates_every_deterministic_and_random_policy() {
    let mdp = envs::random_mdp(2, 2, 3, 1, 0.5).unwrap();
    let d = mdp.dims();
    let fw = optimal_mvee(&mdp, &FrankWolfeConfig::default()).unwrap();
    let best = fw.objective();
    for pi in all_deterministic(d) {
        assert!(visitation_entropy(&exact_visitation(&mdp, &pi).unwrap()) <= best + 1e-6);
    }
    let mut rng = seed::root(0);
    for _ in 0..100 {
        let pi = envs::random_policy(d, 0.5, &mut rng).unwrap();
        assert!(visitation_entropy(&exact_visitation(&mdp, &pi).unwrap()) <= best + 1e-6);
    }
}

#[test]
fn iterate_is_feasible_and_realized_by_its_policy() {
    let mdp = envs::double_chain(5, 0.1, 4).unwrap();
    let fw = optimal_mvee(&mdp, &FrankWolfeConfig::default()).unwrap();
    assert!(fw.profile.simplex_error() < 1e-9);
    assert!(fw.profile.flow_error(&mdp) < 1e-9);
    let realized = exact_visitation(&mdp, &fw.policy).unwrap();
    for (x, y) in realized.as_slice().iter().zip(fw.profile.as_slice()) {
        assert!((x - y).abs() < 1e-9);
    }
    let via_mixture = exact_visitation(&mdp, &fw.mixture()).unwrap();
    for (x, y) in via_mixture.as_slice().iter().zip(fw.profile.as_slice()) {
        assert!((x - y).abs() < 1e-9);
    }
    assert_eq!(policy_from_profile(&fw.profile), fw.policy);
}

#[test]
fn duality_gap_bounds_suboptimality() {
    let mdp = envs::double_chain(5, 0.2, 3).unwrap();
    let short = optimal_mvee(&mdp, &FrankWolfeConfig { iterations: 20, gap_tolerance: 0.0, ..Default::default() }).unwrap();
    let long = optimal_mvee(&mdp, &FrankWolfeConfig { iterations: 5000, ..Default::default() }).unwrap();
    assert!(long.objective() >= short.objective() - 1e-9);
    assert!(long.objective() - short.objective() <= short.duality_gap + 1e-9);
    assert!(long.duality_gap <= 1e-3);
}

#[test]
fn deterministic_chain_spreads_over_reachable_states() {
    // On a bounce-free slip-free chain with H = 2 from the middle, the best
    // per-step split is uniform over the reachable pairs.
    let mdp = envs::double_chain(5, 0.0, 2).unwrap();
    let fw = optimal_mvee(&mdp, &FrankWolfeConfig { iterations: 10_000, ..Default::default() }).unwrap();
    let expected = 2f64.ln() + 4f64.ln();
    assert!((fw.objective() - expected).abs() < 1e-3, "{}", fw.objective());
}

#[test]
fn averaged_objective_flattens_the_state_histogram() {
    let mdp = envs::double_chain(9, 0.1, 8).unwrap();
    let per_step = optimal_mvee(&mdp, &FrankWolfeConfig::default()).unwrap();
    let config = FrankWolfeConfig { objective: EntropyObjective::Averaged, ..Default::default() };
    let averaged = optimal_mvee(&mdp, &config).unwrap();
    let avg_value = |p: &maxent_core::VisitationProfile| EntropyObjective::Averaged.value(p);
    assert!(avg_value(&averaged.profile) >= avg_value(&per_step.profile) - 1e-4);
    assert!(visitation_entropy(&per_step.profile) >= visitation_entropy(&averaged.profile) - 1e-4);
}

#[test]
fn single_action_problem_is_trivial() {
    let d = Dims::new(3, 1, 3).unwrap();
    let mdp = TabularMdp::from_fn(d, 0, |_, s, _, row| row[(s + 1) % 3] = 1.0).unwrap();
    let fw = optimal_mvee(&mdp, &FrankWolfeConfig::default()).unwrap();
    assert_eq!(fw.objective(), 0.0);
}
