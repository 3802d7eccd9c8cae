use proptest::prelude::*;

use hyposel::entropy_player::{max_entropy_test, pythagorean_gap};
use hyposel::games::{
    replay_dual, replay_primal, run_dual_game, run_primal_game, GreedyDiameterAdversary, MaxEntropyDualPlayer,
    MaxEntropyPrimalPlayer, OracleAdversary, RandomDirectionAdversary,
};
use hyposel::geometry::{feasibility_round, margin, support_min, MarginQuery, SupportPool};
use hyposel::harness::{brute_force_opt, generate_instance, InstanceFile, InstanceKind};
use hyposel::model::{distance_vector, entropy, tv_distance, DistanceVector, Distribution, HypothesisClass, TestDirection};
use hyposel::sampling::{progress_step, SampleOracle};
use hyposel::selectors::{basic_select, yatracos_select, RefinedParams, refined_primal_run};

fn weights(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_map(|mut v| {
        v[0] += 1e-3;
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    })
}

fn kind() -> impl Strategy<Value = InstanceKind> {
    prop::sample::select(InstanceKind::ALL.to_vec())
}

fn instance() -> impl Strategy<Value = (HypothesisClass, Distribution)> {
    (any::<u64>(), 1usize..6, 2usize..9, kind()).prop_map(|(s, n, x, k)| generate_instance(s, n, x, k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn support_min_is_below_every_distance_vector((class, p) in instance(), seed in any::<u64>()) {
        let n = class.len();
        let h = TestDirection::normalized(
            (0..n).map(|i| ((seed >> (i % 60)) & 0xff) as f64 + 1.0).collect(),
        ).unwrap();
        let res = support_min(&h, &class, 1e-9).unwrap();
        let vp = distance_vector(&p, &class).unwrap();
        prop_assert!(res.value <= vp.dot(&h) + 1e-9);
        prop_assert!(res.duality_gap().abs() <= 1e-9);
        let vw = distance_vector(&res.witness, &class).unwrap();
        prop_assert!((vw.dot(&h) - res.value).abs() <= 1e-9);
    }

    #[test]
    fn margin_is_monotone_in_u((class, _p) in instance(), lift in 0.0f64..0.5) {
        let n = class.len();
        let h = TestDirection::uniform(n).unwrap();
        let low = MarginQuery::new(DistanceVector::zeros(n), 0.0).unwrap();
        let high = MarginQuery::new(DistanceVector::filled(n, lift).unwrap(), 0.0).unwrap();
        let g0 = margin(&h, &low, &class).unwrap();
        let g1 = margin(&h, &high, &class).unwrap();
        prop_assert!((g0 - g1 - lift).abs() <= 1e-9);
    }

    #[test]
    fn feasibility_round_of_a_distance_vector((class, p) in instance()) {
        let v = distance_vector(&p, &class).unwrap();
        let q = feasibility_round(&v, 1e-6, &class, 1e-9).unwrap();
        let vq = distance_vector(&q, &class).unwrap();
        prop_assert!(v.dominates(&vq, 1e-5));
    }

    #[test]
    fn max_margin_bounds_bracket_sampled_margins((class, p) in instance(), w in weights(5)) {
        let n = class.len();
        let u = distance_vector(&p, &class).unwrap();
        let lowered = DistanceVector::clamped(u.values().iter().map(|x| x * 0.5).collect());
        let mut pool = SupportPool::new(&class);
        let bounds = pool.max_margin(lowered.values(), 1e-9, None).unwrap();
        prop_assert!(bounds.lower <= bounds.upper + 1e-12);
        let h = TestDirection::normalized(w[..n.min(5)].iter().copied().chain(std::iter::repeat(0.1)).take(n).collect()).unwrap();
        let g = margin(&h, &MarginQuery::new(lowered, 0.0).unwrap(), &class).unwrap();
        prop_assert!(g <= bounds.upper + 1e-9);
    }

    #[test]
    fn max_entropy_test_is_violated((class, p) in instance()) {
        let n = class.len();
        let u = DistanceVector::zeros(n);
        let eps = 0.05;
        match max_entropy_test(&u, eps, &class, 1e-3) {
            Ok(sol) => {
                let g = margin(&sol.h, &MarginQuery::new(u, 0.0).unwrap(), &class).unwrap();
                prop_assert!(g >= eps + 5e-4 - 1e-9);
                prop_assert!((entropy(&sol.h) - sol.attained_entropy).abs() <= 1e-9);
            }
            Err(_) => {
                // Nothing to separate: zero must be nearly feasible.
                let q = feasibility_round(&u, eps + 2e-3, &class, 1e-9);
                prop_assert!(q.is_ok());
            }
        }
        let _ = p;
    }

    #[test]
    fn progress_step_is_sound_in_exact_mode((class, p) in instance(), alpha in 0.01f64..0.5) {
        let n = class.len();
        let h = TestDirection::uniform(n).unwrap();
        let mut oracle = SampleOracle::exact(p.clone());
        let out = progress_step(&DistanceVector::zeros(n), &h, alpha, 0.1, &mut oracle, &class).unwrap();
        let v = distance_vector(&p, &class).unwrap();
        prop_assert!(v.dominates(&out.z, 1e-12));
        prop_assert!(out.z.dot(&h) >= support_min(&h, &class, 1e-9).unwrap().value - alpha - 1e-12);
        prop_assert_eq!(out.used_samples, 0);
    }

    #[test]
    fn exact_selectors_meet_their_factors((class, p) in instance()) {
        let eps = 0.2;
        let opt = brute_force_opt(&p, &class).unwrap();
        let y = yatracos_select(&class, &mut SampleOracle::exact(p.clone()), eps, 0.1).unwrap();
        prop_assert!(tv_distance(&y, &p).unwrap() <= 3.0 * opt + eps + 1e-6);
        let b = basic_select(&class, &mut SampleOracle::exact(p.clone()), eps, 0.1).unwrap();
        prop_assert!(tv_distance(&b, &p).unwrap() <= 2.0 * opt + eps + 1e-6);
        let r = refined_primal_run(&class, &mut SampleOracle::exact(p.clone()), eps, 0.1, &RefinedParams::default()).unwrap();
        prop_assert!(tv_distance(&r, &p).unwrap() <= 2.0 * opt + eps + 1e-6);
    }

    #[test]
    fn instance_file_roundtrips((class, p) in instance()) {
        let text = InstanceFile::from_instance(&class, &p).to_text();
        let (c2, p2) = InstanceFile::parse(&text).unwrap().into_instance().unwrap();
        prop_assert_eq!(c2, class);
        prop_assert_eq!(p2, p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dual_games_replay_and_lose_entropy(n in 2usize..12, eps in 0.2f64..0.6, seed in any::<u64>()) {
        let mut player = MaxEntropyDualPlayer::new();
        let t = run_dual_game(n, eps, &mut player, &mut RandomDirectionAdversary::new(seed), 10_000).unwrap();
        prop_assert!(t.emptied);
        prop_assert_eq!(replay_dual(&t.to_text()).unwrap(), t.rounds);
        for w in t.picks.windows(2) {
            prop_assert!(entropy(&w[0]) - entropy(&w[1]) >= eps * eps / 2.0 - 1e-3);
        }
        let uniform = TestDirection::uniform(n).unwrap();
        for k in 0..t.picks.len() {
            for l in k + 1..t.picks.len() {
                prop_assert!(pythagorean_gap(&t.picks[l], &t.picks[k], &uniform) >= -1e-6);
            }
        }
        let g = run_dual_game(n, eps, &mut MaxEntropyDualPlayer::new(), &mut GreedyDiameterAdversary, 10_000).unwrap();
        prop_assert!(g.emptied);
    }

    #[test]
    fn primal_games_replay((class, p) in instance()) {
        let eps = 0.2;
        let mut player = MaxEntropyPrimalPlayer::new(&class, eps / 8.0);
        let mut adversary = OracleAdversary::new(SampleOracle::exact(p), 0.05);
        let t = run_primal_game(&class, eps, &mut player, &mut adversary, 10_000).unwrap();
        prop_assert!(t.finished);
        prop_assert_eq!(replay_primal(&t.to_text(), &class).unwrap(), t.rounds);
        for w in t.points.windows(2) {
            prop_assert!(w[1].dominates(&w[0], 0.0));
        }
    }
}
