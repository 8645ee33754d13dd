//! Random models and data generators for tests, examples and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ctbn::{Cpd, CtbnExpert, TreeStructure};
use crate::dataset::{Dataset, Instance};
use crate::logreg::LinearModel;
use crate::mixture::{GatingModel, MixtureModel, ModelMeta};

/// Random forest over `d` nodes: nodes are visited in a random order and
/// each attaches to an earlier node with probability `edge_prob`.
pub fn random_structure<R: Rng + ?Sized>(d: usize, edge_prob: f64, rng: &mut R) -> TreeStructure {
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let mut parent = vec![None; d];
    for (pos, &i) in order.iter().enumerate().skip(1) {
        if rng.gen_bool(edge_prob) {
            parent[i] = Some(order[rng.gen_range(0..pos)]);
        }
    }
    TreeStructure::new(parent).expect("earlier-node parents form a forest")
}

fn random_linear<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> LinearModel {
    LinearModel {
        params: (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect(),
        lambda: 0.0,
    }
}

/// Expert with `N(0, scale²)` parameters over `m` features.
pub fn random_expert<R: Rng + ?Sized>(structure: TreeStructure, m: usize, scale: f64, rng: &mut R) -> CtbnExpert {
    let dim = m + 1;
    let cpds = structure
        .parents()
        .iter()
        .map(|p| match p {
            None => Cpd::Root(random_linear(dim, scale, rng)),
            Some(_) => Cpd::Conditional {
                parent_zero: random_linear(dim, scale, rng),
                parent_one: random_linear(dim, scale, rng),
            },
        })
        .collect();
    CtbnExpert::new(structure, cpds).expect("shapes agree by construction")
}

/// Mixture of `k` random experts with a random gate.
pub fn random_mixture<R: Rng + ?Sized>(m: usize, d: usize, k: usize, scale: f64, rng: &mut R) -> MixtureModel {
    let experts = (0..k)
        .map(|_| {
            let s = random_structure(d, 0.7, rng);
            random_expert(s, m, scale, rng)
        })
        .collect();
    let theta = (0..k).map(|_| random_linear(m + 1, scale, rng).params).collect();
    MixtureModel::new(
        experts,
        GatingModel { theta },
        ModelMeta {
            m,
            d,
            lambda: 0.0,
            lambda_gate: 0.0,
            standardizer: None,
        },
    )
    .expect("shapes agree by construction")
}

/// Standard normal raw features (without the bias entry).
pub fn random_features<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    (0..m).map(|_| rng.sample(StandardNormal)).collect()
}

/// Ancestral sample of `y` given bias-augmented features `x`.
pub fn sample_labels<R: Rng + ?Sized>(expert: &CtbnExpert, x: &[f64], rng: &mut R) -> Vec<bool> {
    let mut y = vec![false; expert.d()];
    for i in expert.structure.topological_order() {
        let pv = expert.structure.parent(i).is_some_and(|p| y[p]);
        y[i] = rng.gen_bool(expert.cpds[i].model(pv).predict_prob(x));
    }
    y
}

/// Draws `n` instances from a mixture: Gaussian features, an expert from the
/// gate, then labels from that expert.
pub fn sample_mixture<R: Rng + ?Sized>(model: &MixtureModel, n: usize, rng: &mut R) -> Dataset {
    let instances = (0..n)
        .map(|_| {
            let raw = random_features(model.m(), rng);
            let mut inst = Instance::new(&raw, Vec::new());
            let g = model.gating.probs(&inst.features);
            let mut u: f64 = rng.gen();
            let mut k = g.len() - 1;
            for (j, p) in g.iter().enumerate() {
                if u < *p {
                    k = j;
                    break;
                }
                u -= p;
            }
            inst.labels = sample_labels(&model.experts[k], &inst.features, rng);
            inst
        })
        .collect();
    Dataset::new(instances).expect("sampled rows share a shape")
}

/// Two regimes split by the sign of the first feature. One regime is a
/// chain where every label copies its predecessor; in the other labels
/// alternate along the reverse chain. Each regime alone is a poor fit for
/// the other half of the input space.
pub fn two_regime_mixture<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> MixtureModel {
    assert!(m >= 1 && d >= 2);
    let dim = m + 1;
    let strength = 3.0;
    let noise = |rng: &mut R| -> Vec<f64> { (0..dim).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect() };
    let build = |parents: Vec<Option<usize>>, copy: bool, rng: &mut R| {
        let structure = TreeStructure::new(parents).expect("chain");
        let cpds = structure
            .parents()
            .iter()
            .map(|p| {
                let mut a = noise(rng);
                match p {
                    None => {
                        a[1] += strength;
                        Cpd::Root(LinearModel { params: a, lambda: 0.0 })
                    }
                    Some(_) => {
                        let mut b = noise(rng);
                        let s = if copy { strength } else { -strength };
                        a[0] -= s;
                        b[0] += s;
                        Cpd::Conditional {
                            parent_zero: LinearModel { params: a, lambda: 0.0 },
                            parent_one: LinearModel { params: b, lambda: 0.0 },
                        }
                    }
                }
            })
            .collect();
        CtbnExpert::new(structure, cpds).expect("shapes agree")
    };
    let forward: Vec<Option<usize>> = (0..d).map(|i| i.checked_sub(1)).collect();
    let backward: Vec<Option<usize>> = (0..d).map(|i| if i + 1 < d { Some(i + 1) } else { None }).collect();
    let e1 = build(forward, true, rng);
    let e2 = build(backward, false, rng);
    let mut g1 = vec![0.0; dim];
    g1[1] = 4.0;
    let mut g2 = vec![0.0; dim];
    g2[1] = -4.0;
    MixtureModel::new(
        vec![e1, e2],
        GatingModel { theta: vec![g1, g2] },
        ModelMeta {
            m,
            d,
            lambda: 0.0,
            lambda_gate: 0.0,
            standardizer: None,
        },
    )
    .expect("shapes agree")
}
