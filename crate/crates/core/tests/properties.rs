//! Randomized invariants.

use mlme::ctbn::{is_acyclic, TreeStructure};
use mlme::dataset::{fold_indices, holdout_indices, parse_csv, Dataset, WeightVector};
use mlme::eval::{exact_match_accuracy, hamming_accuracy, macro_f1, micro_f1};
use mlme::inference::{enumerate_map, heuristic_init, map_predict, AnnealConfig};
use mlme::logreg::{predict_prob, LinearModel};
use mlme::mixture::{e_step, GatingModel, MixtureModel};
use mlme::structlearn::{maximum_branching, WeightedDigraph};
use mlme::synthetic::{random_features, random_mixture, random_structure, sample_mixture};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bias(raw: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(raw.iter().copied()).collect()
}

fn label_matrix(rows: usize, d: usize, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows).map(|_| (0..d).map(|_| rng.gen()).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_instances(n in 2usize..200, k in 2usize..12, seed: u64) {
        prop_assume!(k <= n);
        let folds = fold_indices(n, k, seed).unwrap();
        let mut seen = vec![false; n];
        for f in &folds {
            for &i in f {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(folds, fold_indices(n, k, seed).unwrap());
    }

    #[test]
    fn holdout_sizes(n in 2usize..500, ratio in 0.01f64..0.99, seed: u64) {
        let (train, hold) = holdout_indices(n, ratio, seed).unwrap();
        prop_assert_eq!(train.len() + hold.len(), n);
        prop_assert!(!train.is_empty() && !hold.is_empty());
        let expected = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        prop_assert_eq!(hold.len(), expected);
    }

    #[test]
    fn normalization_preserves_ratios(w in prop::collection::vec(0.0f64..100.0, 1..50)) {
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let v = WeightVector::new(w.clone()).unwrap();
        let n = v.normalized().unwrap();
        prop_assert!((n.sum() - 1.0).abs() < 1e-12);
        for (i, j) in (0..w.len()).zip(1..w.len()) {
            if w[j] > 0.0 {
                let before = w[i] / w[j];
                let after = n.as_slice()[i] / n.as_slice()[j];
                prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
            }
        }
        let r = v.rescaled_to_mean_one();
        prop_assert!((r.sum() - w.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip(seed: u64, n in 1usize..30, m in 1usize..6, d in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.gen_range(-1e6..1e6) * rng.gen::<f64>().powi(8)).collect())
            .collect();
        let data = Dataset::from_rows(features, label_matrix(n, d, seed)).unwrap();
        let back = parse_csv(&data.to_csv_string(), d).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn probabilities_stay_inside_unit_interval(z in -1e6f64..1e6) {
        let model = LinearModel { params: vec![z], lambda: 0.0 };
        let p = predict_prob(&model, &[1.0]);
        prop_assert!((0.0..=1.0).contains(&p) && !p.is_nan());
        let (l0, l1) = model.log_probs(&[1.0]);
        prop_assert!(l0.is_finite() && l1.is_finite() && l0 <= 0.0 && l1 <= 0.0);
    }

    #[test]
    fn gate_is_a_distribution(seed: u64, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..k).map(|_| (0..3).map(|_| rng.gen_range(-50.0..50.0)).collect()).collect();
        let g = GatingModel { theta };
        let p = g.probs(&bias(&random_features(2, &mut rng)));
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_is_normalized(seed: u64, d in 1usize..9, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mixture(2, d, k, 2.0, &mut rng);
        let x = bias(&random_features(2, &mut rng));
        let total: f64 = (0u32..1 << d)
            .map(|mask| {
                let y: Vec<bool> = (0..d).map(|i| mask >> i & 1 == 1).collect();
                model.log_prob(&x, &y).exp()
            })
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn responsibilities_sum_to_one(seed: u64, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mixture(3, 4, k, 2.0, &mut rng);
        let data = sample_mixture(&model, 25, &mut rng);
        for row in e_step(&model, &data).h {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn expert_order_does_not_matter(seed: u64, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mixture(3, 5, k, 1.5, &mut rng);
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let permuted = MixtureModel::new(
            order.iter().map(|&i| model.experts[i].clone()).collect(),
            GatingModel { theta: order.iter().map(|&i| model.gating.theta[i].clone()).collect() },
            model.meta.clone(),
        )
        .unwrap();
        let x = bias(&random_features(3, &mut rng));
        for mask in 0u32..32 {
            let y: Vec<bool> = (0..5).map(|i| mask >> i & 1 == 1).collect();
            prop_assert!((model.log_prob(&x, &y) - permuted.log_prob(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn model_file_round_trip_is_exact(seed: u64, k in 1usize..4, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mixture(3, d, k, 3.0, &mut rng);
        prop_assert_eq!(MixtureModel::from_json(&model.to_json()).unwrap(), model);
    }

    #[test]
    fn annealing_is_bracketed(seed: u64, d in 1usize..9, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mixture(3, d, k, 2.0, &mut rng);
        let x = bias(&random_features(3, &mut rng));
        let cfg = AnnealConfig { seed, ..AnnealConfig::default() };
        let (y, lp) = map_predict(&model, &x, &cfg);
        prop_assert_eq!(model.log_prob(&x, &y), lp);
        prop_assert!(lp >= model.log_prob(&x, &heuristic_init(&model, &x)));
        prop_assert!(lp <= enumerate_map(&model, &x).unwrap().1 + 1e-12);
        prop_assert_eq!(map_predict(&model, &x, &cfg), (y, lp));
    }

    #[test]
    fn branching_beats_probes(seed: u64, d in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edge = (0..d).map(|_| (0..d).map(|_| rng.gen_range(-5.0..0.0)).collect()).collect();
        let own = (0..d).map(|_| rng.gen_range(-5.0..0.0)).collect();
        let g = WeightedDigraph::new(edge, own).unwrap();
        let t = maximum_branching(&g);
        prop_assert!(is_acyclic(t.parents()));
        let best = g.score(t.parents());
        prop_assert!(best >= g.score(TreeStructure::empty(d).parents()));
        for _ in 0..50 {
            let probe = random_structure(d, 0.7, &mut rng);
            prop_assert!(best >= g.score(probe.parents()));
        }
    }

    #[test]
    fn metrics_ignore_instance_order(seed: u64, n in 1usize..40, d in 1usize..6) {
        let truth = label_matrix(n, d, seed);
        let preds = label_matrix(n, d, seed.wrapping_add(1));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pt: Vec<_> = idx.iter().map(|&i| truth[i].clone()).collect();
        let pp: Vec<_> = idx.iter().map(|&i| preds[i].clone()).collect();
        for f in [exact_match_accuracy, hamming_accuracy, micro_f1, macro_f1] {
            prop_assert_eq!(f(&preds, &truth).unwrap(), f(&pp, &pt).unwrap());
        }
        let ema = exact_match_accuracy(&preds, &truth).unwrap();
        prop_assert!(ema <= hamming_accuracy(&preds, &truth).unwrap());
        for v in [ema, micro_f1(&preds, &truth).unwrap(), macro_f1(&preds, &truth).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
