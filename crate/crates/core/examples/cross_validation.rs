//! Cross-validates the mixture against a single CTBN and binary relevance.
//!
//! Run with `cargo run --release --example cross_validation`.

use mlme::eval::{cross_validate, Baselines};
use mlme::inference::AnnealConfig;
use mlme::mixture::TrainConfig;
use mlme::synthetic::{sample_mixture, two_regime_mixture};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mlme::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = two_regime_mixture(4, 5, &mut rng);
    let data = sample_mixture(&truth, 600, &mut rng);

    let baselines = Baselines { single_ctbn: true, binary_relevance: true };
    let report = cross_validate(&data, &TrainConfig::default(), 5, 0, &AnnealConfig::default(), baselines)?;
    print!("{}", report.to_table());
    Ok(())
}
