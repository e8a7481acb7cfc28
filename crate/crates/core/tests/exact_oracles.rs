use maxent_core::entropy::entropy;
use maxent_core::envs;
use maxent_core::mdp::{exact_visitation, visitation_entropy};
use maxent_core::oracles::{enumerate_trajectories, mc_return_variance};
use maxent_core::seed;
use maxent_core::soft::{trajectory_entropy, variance_bellman, RegularizedSpec};
use maxent_core::{Dims, MarkovPolicy, TabularMdp, Transitions};

fn small_instances(count: u64) -> Vec<(TabularMdp, MarkovPolicy)> {
    (0..count)
        .map(|i| {
            let s = 1 + (i % 3) as usize;
            let a = 1 + (i / 3 % 2) as usize;
            let h = 1 + (i / 2 % 3) as usize;
            let mdp = envs::random_mdp(s, a, h, 100 + i, 0.7).unwrap();
            let mut rng = seed::root(900 + i);
            let pi = envs::random_policy(mdp.dims(), 0.7, &mut rng).unwrap();
            (mdp, pi)
        })
        .collect()
}

#[test]
fn enumeration_matches_forward_recursion() {
    for (mdp, pi) in small_instances(25) {
        let table = enumerate_trajectories(&mdp, &pi).unwrap();
        assert!((table.total_mass() - 1.0).abs() < 1e-12);
        let marg = table.marginals();
        let exact = exact_visitation(&mdp, &pi).unwrap();
        for (x, y) in marg.as_slice().iter().zip(exact.as_slice()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        let te = trajectory_entropy(&mdp, &pi).unwrap();
        assert!((te - table.entropy()).abs() < 1e-10, "{te} vs {}", table.entropy());
    }
}

#[test]
fn entropy_sandwich_and_kl_gap() {
    for (mdp, pi) in small_instances(25) {
        let h = mdp.dims().horizon as f64;
        let profile = exact_visitation(&mdp, &pi).unwrap();
        let ve = visitation_entropy(&profile);
        let table = enumerate_trajectories(&mdp, &pi).unwrap();
        let te = table.entropy();
        assert!(te <= ve + 1e-9);
        assert!(ve <= h * te + 1e-9);
        let kl = table.kl_to_product(&profile);
        assert!((ve - te - kl).abs() < 1e-9, "VE {ve} TE {te} KL {kl}");
    }
}

#[test]
fn visitation_is_a_flow() {
    for (mdp, pi) in small_instances(10) {
        let profile = exact_visitation(&mdp, &pi).unwrap();
        assert!(profile.simplex_error() < 1e-12);
        assert!(profile.flow_error(&mdp) < 1e-12);
    }
    let mdp = envs::grid_world(4, 3, 0.2, 6).unwrap();
    let profile = exact_visitation(&mdp, &MarkovPolicy::uniform(mdp.dims())).unwrap();
    assert!(profile.flow_error(&mdp) < 1e-12);
}

#[test]
fn visitation_entropy_is_invariant_under_state_relabeling() {
    let mdp = envs::random_mdp(4, 2, 3, 7, 0.5).unwrap();
    let d = mdp.dims();
    let mut rng = seed::root(3);
    let pi = envs::random_policy(d, 1.0, &mut rng).unwrap();
    let perm = [2usize, 0, 3, 1];
    let relabeled = TabularMdp::from_fn(d, perm[mdp.initial_state()], |h, s, a, row| {
        let orig = perm.iter().position(|&x| x == s).unwrap();
        for (next, &p) in mdp.next_state_dist(h, orig, a).iter().enumerate() {
            row[perm[next]] = p;
        }
    })
    .unwrap();
    let mut probs = vec![0.0; pi.probs().len()];
    for h in 0..d.horizon {
        for s in 0..d.states {
            let start = d.sa(h, perm[s], 0);
            probs[start..start + d.actions].copy_from_slice(pi.row(h, s));
        }
    }
    let pi2 = MarkovPolicy::new(d, probs).unwrap();
    let ve1 = visitation_entropy(&exact_visitation(&mdp, &pi).unwrap());
    let ve2 = visitation_entropy(&exact_visitation(&relabeled, &pi2).unwrap());
    assert!((ve1 - ve2).abs() < 1e-12);
    let te1 = trajectory_entropy(&mdp, &pi).unwrap();
    let te2 = trajectory_entropy(&relabeled, &pi2).unwrap();
    assert!((te1 - te2).abs() < 1e-12);
}

#[test]
fn per_step_entropy_of_a_product_chain() {
    // One state, independent actions: every step has entropy H(π_h).
    let d = Dims::new(1, 3, 4).unwrap();
    let mdp = TabularMdp::from_fn(d, 0, |_, _, _, row| row[0] = 1.0).unwrap();
    let mut rng = seed::root(5);
    let pi = envs::random_policy(d, 1.0, &mut rng).unwrap();
    let expected: f64 = (0..d.horizon).map(|h| entropy(pi.row(h, 0))).sum();
    let ve = visitation_entropy(&exact_visitation(&mdp, &pi).unwrap());
    assert!((ve - expected).abs() < 1e-12);
    assert!((trajectory_entropy(&mdp, &pi).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn return_variance_matches_enumeration() {
    for (i, (mdp, pi)) in small_instances(12).into_iter().enumerate() {
        let d = mdp.dims();
        let rewards: Vec<f64> = (0..d.sa_len()).map(|j| ((j * 7 + i) % 5) as f64 * 0.3).collect();
        let spec = RegularizedSpec::new(d, rewards, 0.4, 0.7).unwrap();
        let table = enumerate_trajectories(&mdp, &pi).unwrap();
        let (_, var) = table.return_moments(&mdp, &spec, &pi);
        let vt = variance_bellman(&mdp, &spec, &pi).unwrap();
        let got = vt.vvar(0, mdp.initial_state());
        assert!((got - var).abs() < 1e-10, "{got} vs {var}");
    }
}

#[test]
fn return_variance_matches_simulation() {
    let mdp = envs::double_chain(5, 0.1, 4).unwrap();
    let spec = RegularizedSpec::mtee(mdp.dims());
    let mut rng = seed::root(11);
    let pi = envs::random_policy(mdp.dims(), 1.0, &mut rng).unwrap();
    let exact = variance_bellman(&mdp, &spec, &pi).unwrap().vvar(0, mdp.initial_state());
    let mc = mc_return_variance(&mdp, &spec, &pi, 100_000, 4).unwrap();
    assert!((mc.variance - exact).abs() <= 4.0 * mc.std_error, "{} vs {exact} (se {})", mc.variance, mc.std_error);
}
