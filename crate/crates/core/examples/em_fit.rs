//! Fits mixture parameters by EM for fixed expert structures and prints the
//! regularized log-likelihood trace.
//!
//! Run with `cargo run --release --example em_fit`.

use mlme::mixture::{e_step, em_fit, log_likelihood, EmConfig};
use mlme::synthetic::{sample_mixture, two_regime_mixture};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mlme::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = two_regime_mixture(3, 4, &mut rng);
    let data = sample_mixture(&truth, 800, &mut rng);

    let cfg = EmConfig { lambda: 0.1, ..EmConfig::default() };
    let fit = em_fit(&truth.structures(), &data, &cfg, None)?;
    for (t, v) in fit.trace.iter().enumerate() {
        println!("iteration {t:>3}: {v:.4}");
    }
    println!("fitted LL {:.2}, generator LL {:.2}", log_likelihood(&fit.model, &data), log_likelihood(&truth, &data));

    let h = e_step(&fit.model, &data);
    let share: Vec<f64> = (0..fit.model.k()).map(|j| h.column(j).iter().sum::<f64>() / data.len() as f64).collect();
    println!("average responsibility per expert {share:.3?}");
    Ok(())
}
