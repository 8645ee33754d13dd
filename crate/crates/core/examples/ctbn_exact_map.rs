//! Trains one CTBN on a fixed chain and compares max-sum decoding with a
//! brute-force search over all label vectors.
//!
//! Run with `cargo run --release --example ctbn_exact_map`.

use mlme::ctbn::{train_parameters, TreeStructure};
use mlme::dataset::{Dataset, Instance};
use mlme::logreg::OptimizerConfig;
use mlme::synthetic::{random_expert, random_features, sample_labels};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mlme::Result<()> {
    let (m, d) = (3, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = random_expert(TreeStructure::chain(d), m, 2.0, &mut rng);
    let instances = (0..500)
        .map(|_| {
            let x = random_features(m, &mut rng);
            let with_bias: Vec<f64> = std::iter::once(1.0).chain(x.iter().copied()).collect();
            Instance::new(&x, sample_labels(&truth, &with_bias, &mut rng))
        })
        .collect();
    let data = Dataset::new(instances)?;

    let fitted = train_parameters(&truth.structure, &data, &vec![1.0; data.len()], 0.1, &OptimizerConfig::default())?;
    println!("{} parameters", fitted.parameter_count());

    for inst in data.iter().take(5) {
        let (map, lp) = fitted.exact_map(&inst.features);
        let brute = (0u32..1 << d)
            .map(|mask| (0..d).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
            .map(|y| fitted.joint_log_prob(&inst.features, &y))
            .fold(f64::NEG_INFINITY, f64::max);
        println!("true {:?}  map {:?}  log p {:.4}  brute force {:.4}", inst.labels, map, lp, brute);
    }
    Ok(())
}
