//! Recovers a label tree from data: scores every candidate CPD on a hold-out
//! split, then takes the maximum branching.
//!
//! Run with `cargo run --release --example learn_structure`.

use mlme::ctbn::TreeStructure;
use mlme::dataset::WeightVector;
use mlme::logreg::OptimizerConfig;
use mlme::mixture::{GatingModel, MixtureModel, ModelMeta};
use mlme::synthetic::{random_expert, sample_mixture};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mlme::Result<()> {
    let (m, d) = (3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tree = TreeStructure::new(vec![None, Some(0), Some(0), Some(2), Some(2), Some(4)])?;
    let expert = random_expert(tree.clone(), m, 3.0, &mut rng);
    let meta = ModelMeta { m, d, lambda: 0.0, lambda_gate: 0.0, standardizer: None };
    let truth = MixtureModel::new(vec![expert], GatingModel::zeros(1, m + 1), meta)?;
    let data = sample_mixture(&truth, 2000, &mut rng);

    let w = WeightVector::uniform(data.len());
    let fit = mlme::structlearn::learn_structure_detailed(&data, &w, 0.1, 0.25, 0, &OptimizerConfig::default())?;
    println!("generating tree {:?}", tree.parents());
    println!("learned tree    {:?}", fit.structure.parents());
    println!("hold-out score  {:.3} (empty graph {:.3})", fit.score, fit.graph.score(TreeStructure::empty(d).parents()));
    Ok(())
}
