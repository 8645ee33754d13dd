//! End-to-end behaviour of structure learning, EM, growth and evaluation.

use mlme::ctbn::{train_parameters, TreeStructure};
use mlme::dataset::{holdout_split, Dataset, WeightVector, WeightedDataset};
use mlme::eval::{
    binary_relevance_baseline, cll_loss, cross_validate, exact_match_accuracy, train_binary_relevance, Baselines,
};
use mlme::inference::{predict_all, AnnealConfig};
use mlme::logreg::{train_weighted, OptimizerConfig, Problem};
use mlme::mixture::{
    e_step, em_fit, grow_mixture, log_likelihood, m_step_experts, m_step_gate, EmConfig, GrowConfig, Responsibilities,
    StopReason, TrainConfig,
};
use mlme::structlearn::{build_graph, learn_structure, learn_structure_detailed};
use mlme::synthetic::{random_mixture, random_structure, sample_mixture, two_regime_mixture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn copy_data(n: usize, seed: u64) -> Dataset {
    // Y0 follows x; Y1 copies Y0; Y2 is noise.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let x: f64 = rng.gen_range(-2.0..2.0);
        let y0 = rng.gen_bool(1.0 / (1.0 + (-2.0 * x).exp()));
        feats.push(vec![x, rng.gen_range(-1.0..1.0)]);
        labels.push(vec![y0, y0, rng.gen()]);
    }
    Dataset::from_rows(feats, labels).unwrap()
}

#[test]
fn dependent_pair_gets_an_edge() {
    let data = copy_data(400, 1);
    let cfg = OptimizerConfig::default();
    let w = WeightVector::uniform(data.len());
    let fit = learn_structure_detailed(&data, &w, 1.0, 0.25, 3, &cfg).unwrap();
    let p = fit.structure.parents();
    assert!(p[1] == Some(0) || p[0] == Some(1), "{p:?}");
    assert!(fit.score > fit.graph.score(TreeStructure::empty(3).parents()));
    assert_eq!(learn_structure(&data, &w, 1.0, 0.25, 3, &cfg).unwrap(), fit.structure);
}

#[test]
fn graph_from_single_uninformative_holdout() {
    // Targets balanced on the training side, so every CPD predicts 0.5 at x = 0.
    let train = Dataset::from_rows(vec![vec![0.0]; 4], vec![vec![true, false], vec![false, true], vec![true, true], vec![false, false]])
        .unwrap();
    let hold = Dataset::from_rows(vec![vec![0.0]], vec![vec![true, true]]).unwrap();
    let g = build_graph(
        &WeightedDataset { data: train.clone(), weights: WeightVector::ones(4) },
        &WeightedDataset { data: hold.clone(), weights: WeightVector::ones(1) },
        1.0,
        &OptimizerConfig::default(),
    )
    .unwrap();
    let ln_half = 0.5f64.ln();
    assert!((g.self_weight[0] - ln_half).abs() < 1e-9);
    assert!((g.edge_weight[0][1] - ln_half).abs() < 1e-9);

    let zero = build_graph(
        &WeightedDataset { data: train, weights: WeightVector::ones(4) },
        &WeightedDataset { data: hold, weights: WeightVector::new(vec![0.0]).unwrap() },
        1.0,
        &OptimizerConfig::default(),
    )
    .unwrap();
    assert!(zero.self_weight.iter().all(|&v| v == 0.0));
    assert!(zero.edge_weight.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn holdout_split_keeps_weights() {
    let data = copy_data(100, 2);
    let (tr, ho) = holdout_split(&data, &WeightVector::uniform(100), 0.25, 9).unwrap();
    assert_eq!((tr.data.len(), ho.data.len()), (75, 25));
    assert!(tr.weights.as_slice().iter().all(|&w| w == 0.01));
    assert!(ho.weights.as_slice().iter().all(|&w| w == 0.01));
}

#[test]
fn single_expert_em_is_direct_training() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = random_mixture(3, 4, 1, 1.0, &mut rng);
    let data = sample_mixture(&truth, 200, &mut rng);
    let s = random_structure(4, 0.8, &mut rng);
    let cfg = EmConfig::default();
    let fit = em_fit(std::slice::from_ref(&s), &data, &cfg, None).unwrap();
    let direct = train_parameters(&s, &data, &vec![1.0; data.len()], cfg.lambda, &cfg.optimizer).unwrap();
    assert_eq!(fit.model.experts[0], direct);
    assert!(fit.trace.len() <= 3);
    assert!(e_step(&fit.model, &data).h.iter().all(|r| r == &vec![1.0]));
}

#[test]
fn expert_m_step_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let truth = random_mixture(2, 3, 2, 1.0, &mut rng);
    let data = sample_mixture(&truth, 80, &mut rng);
    let h = e_step(&truth, &data);
    let swapped = Responsibilities { h: h.h.iter().map(|r| vec![r[1], r[0]]).collect() };
    let s = [random_structure(3, 0.8, &mut rng), random_structure(3, 0.8, &mut rng)];
    let cfg = OptimizerConfig::default();
    let a = m_step_experts(&h, &data, &s, 1.0, &cfg, None).unwrap();
    let b = m_step_experts(&swapped, &data, &[s[1].clone(), s[0].clone()], 1.0, &cfg, None).unwrap();
    assert_eq!(a[0], b[1]);
    assert_eq!(a[1], b[0]);

    // An expert with no responsibility keeps only the penalty's pull to zero.
    let empty = Responsibilities { h: h.h.iter().map(|_| vec![1.0, 0.0]).collect() };
    let c = m_step_experts(&empty, &data, &s, 1.0, &cfg, None).unwrap();
    for cpd in &c[1].cpds {
        assert!(cpd.model(false).params.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn gate_is_stationary_after_m_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = random_mixture(3, 3, 3, 1.0, &mut rng);
    let data = sample_mixture(&truth, 150, &mut rng);
    let h = e_step(&truth, &data);
    let cfg = OptimizerConfig::default();
    let lambda = 0.5;
    let g = m_step_gate(&h, &data, lambda, &cfg, None).unwrap();
    for j in 0..3 {
        let mut grad = [0.0; 4];
        for (inst, hn) in data.iter().zip(&h.h) {
            let p = g.probs(&inst.features);
            for (gi, xi) in grad.iter_mut().zip(&inst.features) {
                *gi += (hn[j] - p[j]) * xi;
            }
        }
        let norm: f64 = grad
            .iter()
            .zip(&g.theta[j])
            .map(|(a, t)| (a - lambda * t).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(norm <= cfg.gradient_tolerance, "row {j}: {norm}");
    }
}

#[test]
fn em_beats_single_ctbn_on_two_regimes() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let truth = two_regime_mixture(3, 4, &mut rng);
    let data = sample_mixture(&truth, 500, &mut rng);
    let cfg = EmConfig::default();
    let structures = truth.structures();
    let mix = em_fit(&structures, &data, &cfg, None).unwrap();
    let best_single = structures
        .iter()
        .map(|s| em_fit(std::slice::from_ref(s), &data, &cfg, None).unwrap())
        .map(|f| log_likelihood(&f.model, &data))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(log_likelihood(&mix.model, &data) >= best_single);
}

#[test]
fn capped_growth_is_a_single_ctbn() {
    let data = copy_data(120, 7);
    let g = grow_mixture(&data, &GrowConfig { max_experts: 1, ..GrowConfig::default() }).unwrap();
    assert_eq!(g.model.k(), 1);
    assert_eq!(g.log.stop_reason, StopReason::MaxExperts);
    // The chain CPD here is separable, so parameters drift along a flat valley; compare fits instead.
    let direct = train_parameters(&g.model.experts[0].structure, &data, &vec![1.0; 120], g.log.lambda, &OptimizerConfig::default())
        .unwrap();
    let single = mlme::mixture::MixtureModel::new(vec![direct], g.model.gating.clone(), g.model.meta.clone()).unwrap();
    let prepared = g.model.prepare(&data).unwrap();
    let (a, b) = (log_likelihood(&g.model, &prepared), log_likelihood(&single, &prepared));
    assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn perfect_fit_stops_growth() {
    // Constant labels: a single expert drives every margin to zero.
    let data = Dataset::from_rows((0..40).map(|i| vec![i as f64]).collect(), vec![vec![true, false]; 40]).unwrap();
    let g = grow_mixture(&data, &GrowConfig { lambda_grid: vec![0.0], ..GrowConfig::default() }).unwrap();
    // Residuals only reach exactly zero once probabilities round to one; either way no second expert is kept.
    assert_eq!(g.model.k(), 1);
    assert!(matches!(g.log.stop_reason, StopReason::ZeroResidual | StopReason::ValidationWorse));
}

#[test]
fn em_traces_in_growth_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let truth = two_regime_mixture(2, 3, &mut rng);
    let data = sample_mixture(&truth, 300, &mut rng);
    let g = grow_mixture(&data, &GrowConfig::default()).unwrap();
    for trace in g.log.rounds.iter().map(|r| &r.em_trace).chain([&g.log.final_trace]) {
        assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-6));
    }
}

#[test]
fn two_fold_cv_on_ten_instances() {
    let data = copy_data(10, 9);
    let cfg = TrainConfig { grow: GrowConfig { max_experts: 2, ..GrowConfig::default() }, standardize: true };
    let run = || {
        cross_validate(&data, &cfg, 2, 4, &AnnealConfig::default(), Baselines { single_ctbn: true, binary_relevance: true })
            .unwrap()
    };
    let r = run();
    assert_eq!(r.methods.len(), 3);
    for m in &r.methods {
        assert_eq!(m.per_fold.iter().map(|f| f.test_size).collect::<Vec<_>>(), vec![5, 5]);
        assert!(m.aggregate.cll_loss.mean >= 0.0);
    }
    assert_eq!(r.without_timings(), run().without_timings());
    assert!(r.to_table().lines().count() == 4);
}

#[test]
fn single_label_br_is_thresholded_logistic_regression() {
    let data = Dataset::from_rows(
        (0..60).map(|i| vec![(i as f64 - 30.0) / 10.0]).collect(),
        (0..60).map(|i| vec![(i * 7) % 11 < i / 6]).collect(),
    )
    .unwrap();
    let preds = binary_relevance_baseline(&data, &data, Some(1.0)).unwrap();
    let model = train_binary_relevance(&data, &[1.0], true, &OptimizerConfig::default(), 0).unwrap();
    let prepared = model.prepare(&data).unwrap();
    let rows: Vec<&[f64]> = prepared.iter().map(|i| i.features.as_slice()).collect();
    let lr = train_weighted(
        &Problem::new(rows, prepared.label_column(0), vec![1.0; 60]).unwrap(),
        2,
        1.0,
        &OptimizerConfig::default(),
    )
    .unwrap();
    for (p, inst) in preds.iter().zip(&prepared) {
        assert_eq!(p[0], lr.predict_prob(&inst.features) > 0.5);
    }
}

#[test]
fn br_matches_mixture_on_independent_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let truth = random_mixture(3, 3, 1, 2.0, &mut rng);
    let independent = mlme::mixture::MixtureModel::new(
        vec![mlme::synthetic::random_expert(TreeStructure::empty(3), 3, 2.0, &mut rng)],
        truth.gating.clone(),
        truth.meta.clone(),
    )
    .unwrap();
    let train = sample_mixture(&independent, 400, &mut rng);
    let test = sample_mixture(&independent, 400, &mut rng);
    let br = binary_relevance_baseline(&train, &test, None).unwrap();
    let model = mlme::mixture::fit(&train, &TrainConfig::default()).unwrap().model;
    let mix: Vec<Vec<bool>> = predict_all(&model, &model.prepare(&test).unwrap(), &AnnealConfig::default())
        .unwrap()
        .into_iter()
        .map(|p| p.0)
        .collect();
    let truth_labels = test.label_matrix();
    let a = exact_match_accuracy(&br, &truth_labels).unwrap();
    let b = exact_match_accuracy(&mix, &truth_labels).unwrap();
    assert!((a - b).abs() < 0.05, "BR {a}, mixture {b}");
}

#[test]
fn cll_loss_prefers_true_labels() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let truth = random_mixture(3, 3, 1, 2.0, &mut rng);
        let data = sample_mixture(&truth, 100, &mut rng);
        let model = mlme::mixture::fit(&data, &TrainConfig { grow: GrowConfig { max_experts: 2, ..GrowConfig::default() }, standardize: false })
            .unwrap()
            .model;
        let mut labels = data.label_matrix();
        use rand::seq::SliceRandom;
        labels.shuffle(&mut rng);
        let shuffled = Dataset::from_rows(
            data.iter().map(|i| i.features[1..].to_vec()).collect(),
            labels,
        )
        .unwrap();
        assert!(cll_loss(&model, &data) <= cll_loss(&model, &shuffled), "seed {seed}");
    }
}

#[test]
fn uniform_model_cll_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = random_mixture(2, 4, 2, 0.0, &mut rng);
    let data = sample_mixture(&model, 30, &mut rng);
    let expected = 30.0 * 4.0 * 2f64.ln();
    assert!((cll_loss(&model, &data) - expected).abs() < 1e-9);
}
