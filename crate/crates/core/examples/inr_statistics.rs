//! How often a random beam pair has residual SI below the noise floor.

use duplexforge::channels::{sample_inr_db, LogNormalInrModel};
use duplexforge::seed::derive_seed;

fn main() -> duplexforge::Result<()> {
    let model = LogNormalInrModel::default();
    let draws = sample_inr_db(&model, 1_000_000, derive_seed(42, "inr"))?;
    let below = draws.iter().filter(|&&v| v <= 0.0).count() as f64 / draws.len() as f64;
    println!(
        "mu = {} dB, sigma = {} dB: P(INR <= 0 dB) = {:.3}%",
        model.mu_db,
        model.sigma_db,
        100.0 * below
    );
    Ok(())
}
