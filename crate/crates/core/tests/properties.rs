use catfour::basis::{BasisKind, BasisSpec, OneHotConvention};
use catfour::eco::EcoModel;
use catfour::mcts::{DesignSchema, Mcts};
use catfour::rna::{normalized_hamming, nussinov, pair_table};
use catfour::sa::{sa_minimize, softmax_probabilities, SaConfig};
use catfour::verify::structure_is_consistent;
use catfour::{CategoricalPoint, CategoricalSpace, RunTrace};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn binom(n: usize, r: usize) -> u128 {
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn space_and_point() -> impl Strategy<Value = (usize, usize, Vec<usize>)> {
    (1usize..7, 2usize..6)
        .prop_flat_map(|(n, k)| (Just(n), Just(k), proptest::collection::vec(0..k, n)))
}

/// Random balanced dot-bracket string of the given length.
fn structure(len: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(0u8..3, len).prop_map(|ops| {
        let mut s = String::new();
        let mut open = 0usize;
        let len = ops.len();
        for (i, op) in ops.into_iter().enumerate() {
            let remaining = len - i;
            if open == remaining {
                s.push(')');
                open -= 1;
            } else if op == 0 && remaining > open + 1 {
                s.push('(');
                open += 1;
            } else if op == 1 && open > 0 {
                s.push(')');
                open -= 1;
            } else {
                s.push('.');
            }
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn term_counts_follow_closed_form(n in 1usize..8, k in 2usize..6, m in 1usize..4) {
        let m = m.min(n);
        let expect: u128 = (0..=m).map(|i| binom(n, i) * ((k - 1) as u128).pow(i as u32)).sum();
        let space = CategoricalSpace::new(n, k).unwrap();
        prop_assert_eq!(BasisSpec::new(space, BasisKind::OneHotFourier, m).unwrap().d() as u128, expect);
        prop_assert_eq!(BasisSpec::new(space, BasisKind::GroupFourier, m).unwrap().d() as u128, 2 * expect - 1);
    }

    #[test]
    fn feature_ranges((n, k, x) in space_and_point()) {
        let space = CategoricalSpace::new(n, k).unwrap();
        let m = n.min(2);
        let pm = BasisSpec::new(space, BasisKind::OneHotFourier, m).unwrap();
        prop_assert!(pm.features(&x).iter().all(|v| *v == 1.0 || *v == -1.0));
        let zo = BasisSpec::with_options(space, BasisKind::OneHotFourier, m, OneHotConvention::ZeroOne, 1_000_000).unwrap();
        let fz = zo.features(&x);
        prop_assert!(fz.iter().all(|v| *v == 0.0 || *v == 1.0));
        prop_assert_eq!(fz[0], 1.0);
        let g = BasisSpec::new(space, BasisKind::GroupFourier, m).unwrap();
        let fg = g.features(&x);
        prop_assert!(fg.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        prop_assert_eq!(fg[0], 1.0);
    }

    #[test]
    fn level_deltas_agree_with_full_evaluation((n, k, x) in space_and_point(), var_seed in 0usize..100, seed in 0u64..1000) {
        let space = CategoricalSpace::new(n, k).unwrap();
        for kind in [BasisKind::OneHotFourier, BasisKind::GroupFourier] {
            let spec = BasisSpec::new(space, kind, n.min(2)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<f64> = (0..spec.d()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let var = var_seed % n;
            let mut out = vec![0.0; k];
            spec.level_deltas(&coeffs, &x, var, &mut out);
            let base = spec.dot(&coeffs, &x);
            for (l, v) in out.iter().enumerate() {
                let mut y = x.clone();
                y[var] = l;
                prop_assert!((base + v - spec.dot(&coeffs, &y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eco_weights_stay_on_the_scaled_simplex(
        ys in proptest::collection::vec(-1e4f64..1e4, 1..60),
        lambda in 0.01f64..50.0,
        seed in 0u64..1000,
    ) {
        let space = CategoricalSpace::new(4, 3).unwrap();
        let spec = BasisSpec::new(space, BasisKind::GroupFourier, 2).unwrap();
        let mut model = EcoModel::new(spec, lambda).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for y in ys {
            let p = space.random_point(&mut rng);
            model.update(&p, y).unwrap();
            let w: Vec<f64> = model.alpha_plus().iter().chain(model.alpha_minus()).cloned().collect();
            prop_assert!(w.iter().all(|v| v.is_finite() && *v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - lambda).abs() < 1e-9 * lambda.max(1.0));
        }
    }

    #[test]
    fn softmax_is_a_distribution(values in proptest::collection::vec(-100f64..100.0, 1..8), temp in 1e-6f64..10.0) {
        let p = softmax_probabilities(&values, temp);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn sa_returns_points_in_space((n, k, _x) in space_and_point(), seed in 0u64..1000) {
        let space = CategoricalSpace::new(n, k).unwrap();
        let f = |x: &[usize]| x.iter().map(|&v| v as f64).sum::<f64>();
        let p = sa_minimize(&f, space, &SaConfig::new(3.0, 3 * n).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(space.validate(p.values()).is_ok());
    }

    #[test]
    fn mcts_root_visits_equal_playouts(h in 1usize..5, k in 2usize..4, playouts in 1usize..80, seed in 0u64..1000) {
        let schema = DesignSchema::generic(h, k).unwrap();
        let f = |x: &[usize]| x.iter().map(|&v| (v * 5 % 3) as f64).sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = Mcts::new(&schema, &f, 0.5, &mut rng);
        for _ in 0..playouts {
            tree.playout(&mut rng).unwrap();
        }
        prop_assert_eq!(tree.root_visits() as usize, playouts);
        let (best, reward) = tree.best().unwrap();
        prop_assert_eq!(-reward, f(best.values()));
    }

    #[test]
    fn trace_best_is_running_minimum(values in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
        let mut trace = RunTrace::new();
        for (i, v) in values.iter().enumerate() {
            trace.push(CategoricalPoint::new_unchecked(vec![i % 3]), *v);
        }
        let best = trace.best_so_far();
        let mut running = f64::INFINITY;
        for (b, v) in best.iter().zip(&values) {
            running = running.min(*v);
            prop_assert_eq!(*b, running);
        }
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        prop_assert_eq!(RunTrace::read_csv(&buf[..]).unwrap(), trace);
    }

    #[test]
    fn pair_table_is_an_involution(s in (1usize..40).prop_flat_map(structure)) {
        let t = pair_table(&s).unwrap();
        for (i, p) in t.iter().enumerate() {
            if let Some(j) = *p {
                prop_assert_eq!(t[j], Some(i));
            }
        }
        prop_assert_eq!(normalized_hamming(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn folds_are_consistent(seq in proptest::collection::vec(0usize..4, 1..40)) {
        let fold = nussinov(&seq, 3);
        let pairs = -fold.energy as u32;
        prop_assert!(pairs as usize <= seq.len() / 2);
        prop_assert!(structure_is_consistent(&seq, &fold.structure, 3, pairs));
    }
}
