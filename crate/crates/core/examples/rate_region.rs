//! TDD, FDD and full-duplex rate regions at 10 dB SNR on both links.

use duplexforge::link_math::{capacity_fd, rate_region_boundary, residual_si_inr, LinkBudget, LinkInrs, LinkSnrs, Strategy};
use duplexforge::units::db_to_lin;

fn main() -> duplexforge::Result<()> {
    let snrs = LinkSnrs::from_db(10.0, 10.0);

    // Residual SI at the noise floor: 20 dBm transmit, -90 dBm noise, 110 dB isolation.
    let budget = LinkBudget::new(20.0, -90.0, 110.0)?;
    let inr_db = residual_si_inr(&budget);
    let inr = db_to_lin(inr_db);
    println!("residual INR = {inr_db} dB");

    println!("full-duplex capacity sum = {:.9}", capacity_fd(snrs).sum());
    for (strategy, inrs) in [
        (Strategy::Tdd, LinkInrs::NONE),
        (Strategy::Fdd, LinkInrs::NONE),
        (Strategy::Fd, LinkInrs::new(inr, inr)?),
    ] {
        let b = rate_region_boundary(strategy, snrs, inrs, 11)?;
        let star = b.star_point();
        println!(
            "{:>3}: best sum {:.6} at alpha {:?} ({} boundary points)",
            strategy.as_str(),
            star.rate.sum(),
            star.alpha,
            b.points.len()
        );
    }
    Ok(())
}
