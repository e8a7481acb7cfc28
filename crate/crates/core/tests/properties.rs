use maxent_core::entgame::{Aggregation, ForecasterState};
use maxent_core::envs;
use maxent_core::mdp::{exact_visitation, sample_trajectory, visitation_entropy};
use maxent_core::seed;
use maxent_core::soft::{soft_conjugate, solve_regularized, trajectory_entropy, RegularizedSpec};
use maxent_core::ucbvi::{compute_bounds, gap_recursion, UcbviParams};
use maxent_core::{CountTables, EmpiricalModel, MarkovPolicy};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (usize, usize, usize, u64, f64)> {
    (1usize..5, 1usize..4, 1usize..5, any::<u64>(), 0.2f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn visitation_is_a_valid_flow((s, a, h, sd, alpha) in instance()) {
        let mdp = envs::random_mdp(s, a, h, sd, alpha).unwrap();
        let mut rng = seed::root(sd ^ 1);
        let pi = envs::random_policy(mdp.dims(), alpha, &mut rng).unwrap();
        let occ = exact_visitation(&mdp, &pi).unwrap();
        prop_assert!(occ.simplex_error() < 1e-12);
        prop_assert!(occ.flow_error(&mdp) < 1e-12);
        prop_assert!(occ.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn trajectory_entropy_never_exceeds_visitation_entropy((s, a, h, sd, alpha) in instance()) {
        let mdp = envs::random_mdp(s, a, h, sd, alpha).unwrap();
        let mut rng = seed::root(sd ^ 2);
        let pi = envs::random_policy(mdp.dims(), alpha, &mut rng).unwrap();
        let te = trajectory_entropy(&mdp, &pi).unwrap();
        let ve = visitation_entropy(&exact_visitation(&mdp, &pi).unwrap());
        prop_assert!(te >= -1e-12);
        prop_assert!(te <= ve + 1e-9);
        prop_assert!(ve <= h as f64 * te + 1e-9);
        prop_assert!(ve <= h as f64 * ((s * a) as f64).ln() + 1e-9);
    }

    #[test]
    fn conjugate_is_bounded_and_normalized(
        q in prop::collection::vec(-50.0f64..50.0, 1..6),
        lambda in 0.0f64..5.0,
    ) {
        let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (v, p) = soft_conjugate(&q, lambda).unwrap();
        prop_assert!(v >= m - 1e-9);
        prop_assert!(v <= m + lambda * (q.len() as f64).ln() + 1e-9);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn conjugate_shifts_with_constants(
        q in prop::collection::vec(-5.0f64..5.0, 1..6),
        c in -10.0f64..10.0,
        lambda in 0.01f64..3.0,
    ) {
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let (v, p) = soft_conjugate(&q, lambda).unwrap();
        let (v2, p2) = soft_conjugate(&shifted, lambda).unwrap();
        prop_assert!((v2 - v - c).abs() < 1e-9);
        for (x, y) in p.iter().zip(&p2) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn forecast_is_a_smoothed_distribution(
        (s, a, h, sd, alpha) in instance(),
        episodes in 0usize..30,
        prior in 1u64..4,
        pooled in any::<bool>(),
    ) {
        let mdp = envs::random_mdp(s, a, h, sd, alpha).unwrap();
        let d = mdp.dims();
        let agg = if pooled { Aggregation::StageHomogeneous } else { Aggregation::PerStep };
        let mut f = ForecasterState::new(d, prior, agg);
        let pi = MarkovPolicy::uniform(d);
        let mut rng = seed::root(sd);
        for _ in 0..episodes {
            f.observe(&sample_trajectory(&mdp, &pi, &mut rng)).unwrap();
        }
        let fc = f.forecast();
        prop_assert!(fc.simplex_error() < 1e-12);
        let floor = prior as f64 / (episodes as f64 + (d.pairs() as u64 * prior) as f64);
        prop_assert!(fc.as_slice().iter().all(|&x| x >= floor - 1e-15));
    }

    #[test]
    fn confidence_bounds_are_ordered((s, a, h, sd, alpha) in instance(), episodes in 0usize..60) {
        let mdp = envs::random_mdp(s, a, h, sd, alpha).unwrap();
        let d = mdp.dims();
        let spec = RegularizedSpec::mtee(d);
        let pi = MarkovPolicy::uniform(d);
        let mut rng = seed::root(sd);
        let mut counts = CountTables::new(d);
        for _ in 0..episodes {
            counts.record(&sample_trajectory(&mdp, &pi, &mut rng)).unwrap();
        }
        let model = EmpiricalModel::from_counts(&counts, 0);
        let st = compute_bounds(&counts, &model, &spec, &UcbviParams::default()).unwrap();
        for (lo, hi) in st.q_lower.iter().zip(&st.q_upper) {
            prop_assert!(0.0 <= *lo && lo <= hi && *hi <= st.cap());
        }
        let opt = solve_regularized(&mdp, &spec).unwrap();
        prop_assert!(st.v_lower_at(0, 0) <= opt.v(0, 0) + 1e-9);
        prop_assert!(opt.v(0, 0) <= st.v_upper_at(0, 0) + 1e-9);
        let gap = gap_recursion(&st, &model, &st.policy, spec.rmax()).unwrap();
        prop_assert!(gap.g.iter().all(|&g| (0.0..=st.cap()).contains(&g)));
    }
}
