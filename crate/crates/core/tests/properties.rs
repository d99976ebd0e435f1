mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vbspool::exact::{blocking_exact, enumerate_states, stationary_distribution, DEFAULT_ENUMERATION_CAP};
use vbspool::numeric::relative_difference;
use vbspool::recursive::{blocking_recursive, compute_c, occupancy_distribution};
use vbspool::scenarios::class_moments;
use vbspool::{ClassSpec, Discipline, PoolConfig, StateVector};

const SMALL: u128 = 20_000;

fn config_from_seed(seed: u64) -> PoolConfig {
    random_small_config(&mut ChaCha8Rng::seed_from_u64(seed), SMALL)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursive_matches_enumeration(seed in any::<u64>()) {
        let cfg = config_from_seed(seed);
        let e = blocking_exact(&cfg).unwrap();
        let r = blocking_recursive(&cfg);
        prop_assert!(relative_difference(e.computational, r.computational) <= 1e-10);
        for v in 0..cfg.num_classes() {
            prop_assert!(relative_difference(e.per_class_radio[v], r.per_class_radio[v]) <= 1e-10);
            prop_assert!(relative_difference(e.per_class_overall[v], r.per_class_overall[v]) <= 1e-10);
            prop_assert!(e.per_class_radio[v] + e.computational <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn enumeration_agrees_with_counting(seed in any::<u64>()) {
        let cfg = config_from_seed(seed);
        let count = enumerate_states(&cfg, DEFAULT_ENUMERATION_CAP).unwrap().count() as u128;
        prop_assert_eq!(count, cfg.state_space_size());
    }

    #[test]
    fn distribution_normalized_and_symmetric(seed in any::<u64>()) {
        let cfg = config_from_seed(seed);
        let dist = stationary_distribution(&cfg).unwrap();
        let total: f64 = dist.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for (state, p) in dist.iter() {
            // reverse the entries of every class
            let mut swapped = state.0.clone();
            for v in 0..cfg.num_classes() {
                let lo = cfg.class_offset(v);
                swapped[lo..lo + cfg.class(v).count].reverse();
            }
            prop_assert_eq!(dist.get(&StateVector(swapped)), Some(p));
        }
    }

    #[test]
    fn blocking_non_increasing_in_n(seed in any::<u64>()) {
        let base = config_from_seed(seed);
        let mut previous: Option<Vec<f64>> = None;
        for n in 1..=base.radio_capacity() + 1 {
            let cfg = base.with_compute_servers(n).unwrap();
            if cfg.state_space_size() > SMALL * 10 {
                break;
            }
            let p = blocking_exact(&cfg).unwrap().per_class_overall;
            if let Some(prev) = &previous {
                for (a, b) in p.iter().zip(prev) {
                    prop_assert!(*a <= b * (1.0 + 1e-12));
                }
            }
            previous = Some(p);
        }
    }

    #[test]
    fn peel_off_identity(seed in any::<u64>()) {
        let cfg = config_from_seed(seed);
        for v in 0..cfg.num_classes() {
            let weights = cfg.class(v).weights();
            for n in 0..=cfg.compute_servers() {
                let whole = compute_c(&cfg, n, None).unwrap().exp();
                let peeled: f64 = (0..=n.min(cfg.class(v).radio_servers))
                    .map(|j| weights.weight(j) * compute_c(&cfg, n - j, Some(v)).unwrap().exp())
                    .sum();
                prop_assert!(relative_difference(whole, peeled) <= 1e-12, "n={} v={} {} {}", n, v, whole, peeled);
            }
        }
    }

    #[test]
    fn exclusion_then_convolution(seed in any::<u64>()) {
        let cfg = config_from_seed(seed);
        let cap = cfg.compute_servers();
        let full = occupancy_distribution(&cfg, None, cap).unwrap();
        for v in 0..cfg.num_classes() {
            let rest = occupancy_distribution(&cfg, Some(v), cap).unwrap();
            let w = cfg.class(v).weights();
            for n in 0..full.len() {
                let rebuilt: f64 = (0..=n.min(cfg.class(v).radio_servers))
                    .filter(|&j| n - j < rest.len())
                    .map(|j| w.weight(j) * (rest.ln_exactly(n - j)).exp())
                    .sum();
                prop_assert!(relative_difference(rebuilt, full.ln_exactly(n).exp()) <= 1e-12);
            }
        }
    }

    #[test]
    fn scenario_moments_match_single_vbs_enumeration(
        a in 0.05f64..8.0,
        k in 1usize..25,
        shared_capacity in any::<bool>(),
    ) {
        let disc = if shared_capacity { Discipline::SharedCapacity } else { Discipline::PerSession };
        let class = ClassSpec::with_load(1, k, a, disc);
        let m = class_moments(&class).unwrap().exact;
        let cfg = PoolConfig::new(vec![class], k + 3).unwrap();
        let dist = stationary_distribution(&cfg).unwrap();
        let mean: f64 = dist.iter().map(|(s, p)| s.0[0] as f64 * p).sum();
        let second: f64 = dist.iter().map(|(s, p)| (s.0[0] as f64).powi(2) * p).sum();
        let full = dist.get(&StateVector(vec![k as u32])).unwrap();
        prop_assert!(relative_difference(m.mean, mean) <= 1e-12);
        prop_assert!(relative_difference(m.variance, second - mean * mean) <= 1e-10);
        prop_assert!(relative_difference(m.isolated_radio_blocking, full) <= 1e-12);
    }

    #[test]
    fn decoupled_blocking_is_isolated_blocking(seed in any::<u64>()) {
        let base = config_from_seed(seed);
        let cfg = base.with_compute_servers(base.radio_capacity() + 1).unwrap();
        let r = blocking_recursive(&cfg);
        prop_assert_eq!(r.computational, 0.0);
        for (v, class) in cfg.classes().iter().enumerate() {
            let expected = match class.discipline {
                Discipline::PerSession => erlang_b_direct(class.load(), class.radio_servers),
                Discipline::SharedCapacity => geometric_blocking_direct(class.load(), class.radio_servers),
            };
            prop_assert!(relative_difference(r.per_class_radio[v], expected) <= 1e-12);
        }
    }
}
