//! Property tests over random small models and the epidemic family.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfmdp::model::{parse_model, serialize_model};
use rfmdp::planner_approx::{approx_value, plan_approx};
use rfmdp::rewards::basis_value;
use rfmdp::planner_exact::{exact_constraint_count, plan_exact, q_value, Alpha};
use rfmdp::queries::{conditional_action_query, Plan, RestrictionPredicate};
use rfmdp::{epidemic, LiftedModel};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_models_keep_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng);
        prop_assert_eq!(common::check_model_invariants(&model, &mut rng), Ok(()));
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng);
        let back = parse_model(&serialize_model(&model)).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn exact_values_are_bellman_tight(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng);
        let lm = LiftedModel::compile(&model).unwrap();
        let vf = plan_exact(&lm, &Alpha::Uniform).unwrap();
        for s in lm.states() {
            let best = lm.actions(&s).iter().map(|a| q_value(&lm, &vf.values, &s, a)).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((best - vf.value(&lm, &s)).abs() < 1e-6, "{} vs {}", best, vf.value(&lm, &s));
        }
    }

    #[test]
    fn approximate_values_bound_exact_values(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng);
        let lm = LiftedModel::compile(&model).unwrap();
        let vf = plan_exact(&lm, &Alpha::Uniform).unwrap();
        // state-relevance weights from a uniform distribution over lifted
        // states; unit weights can leave the LP unbounded for arbitrary bases
        let states = lm.num_states() as f64;
        let alpha: Vec<f64> = (0..lm.basis.len()).map(|i| lm.states().map(|s| basis_value(&lm, i, &s)).sum::<f64>() / states).collect();
        let w = plan_approx(&lm, &alpha).unwrap();
        for s in lm.states() {
            prop_assert!(approx_value(&lm, &w.weights, &s) >= vf.value(&lm, &s) - 1e-6);
        }
    }

    #[test]
    fn raising_thresholds_never_adds_actions(n in 1u64..6, t1 in -10.0f64..60.0, dt in 0.0f64..20.0, p1 in 0.0f64..1.0, dp in 0.0f64..0.5, pick in any::<usize>()) {
        let lm = LiftedModel::compile(&epidemic(n)).unwrap();
        let plan = Plan::Exact(plan_exact(&lm, &Alpha::Uniform).unwrap());
        let pred = RestrictionPredicate::parse(&lm, "count(Sick,false) >= half").unwrap();
        let s = lm.state_at(pick % lm.num_states() as usize);
        let loose = conditional_action_query(&lm, &plan, &s, t1, &pred, p1).unwrap();
        let tight = conditional_action_query(&lm, &plan, &s, t1 + dt, &pred, p1 + dp).unwrap();
        for qa in &tight.actions {
            prop_assert!(loose.actions.iter().any(|b| b.action == qa.action));
        }
        for w in loose.actions.windows(2) {
            prop_assert!(w[0].q >= w[1].q);
        }
    }

    #[test]
    fn state_documents_round_trip(n in 1u64..12, pick in any::<usize>()) {
        let lm = LiftedModel::compile(&epidemic(n)).unwrap();
        let s = lm.state_at(pick % lm.num_states() as usize);
        prop_assert_eq!(lm.state_from_json(&lm.state_to_json(&s)).unwrap(), s.clone());
        for a in lm.actions(&s) {
            prop_assert_eq!(lm.action_from_json(&lm.action_to_json(&a)).unwrap(), a);
        }
    }
}

#[test]
fn constraint_count_is_polynomial() {
    // sum over states of prod_b (x_b + 1) for the Travel histogram, times the
    // Sick histograms and the Epidemic bit
    for n in 2u64..=12 {
        let lm = LiftedModel::compile(&epidemic(n)).unwrap();
        let per_travel: u128 = (0..=n as u128).map(|f| (f + 1) * (n as u128 - f + 1)).sum();
        assert_eq!(exact_constraint_count(&lm), per_travel * (n as u128 + 1) * 2);
    }
}
