//! Grows a mixture on data drawn from two gated regimes and compares its
//! held-out log-likelihood with a single CTBN.
//!
//! Run with `cargo run --release --example grow_mixture`.

use mlme::mixture::{grow_mixture, log_likelihood, GrowConfig};
use mlme::synthetic::{sample_mixture, two_regime_mixture};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mlme::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let truth = two_regime_mixture(4, 5, &mut rng);
    let train = sample_mixture(&truth, 600, &mut rng);
    let test = sample_mixture(&truth, 600, &mut rng);

    let cfg = GrowConfig::default();
    let grown = grow_mixture(&train, &cfg)?;
    println!("selected lambda {}", grown.log.lambda);
    for r in &grown.log.rounds {
        println!(
            "K = {} structure {:?} validation LL {:.2} accepted {} ({} EM iterations)",
            r.experts,
            r.structure,
            r.validation_log_likelihood,
            r.accepted,
            r.em_trace.len() - 1
        );
    }
    println!("stopped: {:?}", grown.log.stop_reason);

    let single = grow_mixture(&train, &GrowConfig { max_experts: 1, ..cfg })?;
    println!("test LL, mixture of {}: {:.2}", grown.model.k(), log_likelihood(&grown.model, &test));
    println!("test LL, single CTBN:   {:.2}", log_likelihood(&single.model, &test));
    println!("test LL, generator:     {:.2}", log_likelihood(&truth, &test));
    Ok(())
}
