use parshare::posg::{
    apply_agent_indication, check_instance, merge_policies, pad_observation, pad_observation_with,
    random_posg, run_property_suite, PropertyReport, trim_action_vector, IdEncoding, Policy, Posg, PosgShape,
    PROPERTIES,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape() -> impl Strategy<Value = PosgShape> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(n, s)| {
        (
            Just(s),
            prop::collection::vec(1usize..=3, n),
            prop::collection::vec(1usize..=3, n),
        )
            .prop_map(|(n_states, action_sizes, obs_sizes)| PosgShape {
                n_states,
                action_sizes,
                obs_sizes,
            })
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

proptest! {
    #[test]
    fn random_games_pass_every_check(shape in shape(), disjoint in any::<bool>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_posg(&shape, disjoint, &mut rng);
        prop_assert!(g.validate().is_ok());
        let mut report = PropertyReport::new();
        check_instance(&g, 3, &mut rng, &mut report);
        prop_assert_eq!(report.total_failures(), 0);
    }

    #[test]
    fn padding_is_injective(
        a in prop::collection::vec(-5.0f64..5.0, 0..6),
        b in prop::collection::vec(-5.0f64..5.0, 0..6),
        ia in 0usize..4,
        ib in 0usize..4,
        one_hot in any::<bool>(),
    ) {
        let enc = if one_hot { IdEncoding::OneHot { n_agents: 4 } } else { IdEncoding::Scalar };
        let width = 6 + 4;
        let pa = pad_observation_with(&a, width, Some(ia), enc).unwrap();
        let pb = pad_observation_with(&b, width, Some(ib), enc).unwrap();
        prop_assert_eq!(pa.unpad(), a.as_slice());
        prop_assert_eq!(pa.decoded_id(), Some(ia));
        if ia != ib {
            prop_assert_ne!(&pa.data, &pb.data);
        }
        if pa.data == pb.data {
            prop_assert!(ia == ib);
        }
    }

    #[test]
    fn trim_keeps_the_head_argmax(v in prop::collection::vec(0.0f64..1.0, 1..8), cut in 0usize..8) {
        let len = 1 + cut % v.len();
        let t = trim_action_vector(&v, len).unwrap();
        prop_assert_eq!(t.len(), len);
        prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        if v[..len].iter().any(|&x| x > 0.0) {
            prop_assert_eq!(argmax(&t), argmax(&v[..len]));
        }
    }
}

#[test]
fn suite_covers_every_small_shape() {
    let shapes = PosgShape::enumerate(3, 3);
    assert_eq!(shapes.len(), 3 * 9 + 3 * 81 + 3 * 729);
    let report = run_property_suite(42, 3, 3, 3, 1000);
    assert_eq!(report.instances, shapes.len() as u64);
    assert_eq!(report.tallies.len(), PROPERTIES.len());
    assert!(report.tallies.iter().all(|t| t.checked > 0));
    assert_eq!(report.total_failures(), 0, "{:?}", report.tallies);
}

#[test]
fn json_round_trip_and_rejection() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shape = PosgShape { n_states: 2, action_sizes: vec![2, 3], obs_sizes: vec![3, 1] };
    let g = random_posg(&shape, false, &mut rng);
    assert_eq!(Posg::from_json(&g.to_json()).unwrap(), g);

    let mut broken = g.clone();
    broken.initial[0] += 0.5;
    assert!(Posg::from_json(&broken.to_json()).is_err());
    assert!(Posg::from_json("{\"n_states\": 1}").is_err());
}

#[test]
fn merging_overlapping_spaces_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let shape = PosgShape { n_states: 1, action_sizes: vec![1, 1], obs_sizes: vec![3, 3] };
    // Three labels drawn from a pool of four per agent always overlap.
    let g = random_posg(&shape, false, &mut rng);
    let policies: Vec<Policy> = (0..2).map(|i| Policy::random(&g, i, &mut rng)).collect();
    assert!(merge_policies(&g, &policies).is_err());
    let tagged = apply_agent_indication(&g);
    let lifted: Vec<Policy> = policies.iter().enumerate().map(|(i, p)| p.tagged(i)).collect();
    assert!(merge_policies(&tagged, &lifted).is_ok());
}

#[test]
fn padding_errors() {
    assert!(pad_observation(&[1.0, 2.0], 2, Some(0)).is_err());
    assert!(pad_observation(&[1.0, 2.0], 2, None).is_ok());
    assert!(pad_observation_with(&[1.0], 3, Some(2), IdEncoding::OneHot { n_agents: 2 }).is_err());
    assert!(trim_action_vector(&[0.5, 0.5], 0).is_err());
    assert!(trim_action_vector(&[0.5, 0.5], 3).is_err());
    assert!(trim_action_vector(&[-0.5, 0.5], 2).is_err());
}
