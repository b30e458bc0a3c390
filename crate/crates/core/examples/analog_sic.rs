//! Least-squares tap weights for an 8-tap analog canceller.

use duplexforge::analog_sic::{apply_sic, ideal_tap_matrix, ls_tap_weights, FirFilterSpec};
use nalgebra::DVector;
use num_complex::Complex64;

fn main() -> duplexforge::Result<()> {
    let spec = FirFilterSpec::new(8, 1.0)?;
    let a = ideal_tap_matrix(&spec, 1.0, 64)?;

    // SI impulse response inside the filter's span: cancels to the floor.
    let si = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.5, 0.2),
        Complex64::new(-0.25, 0.1),
        Complex64::new(0.1, -0.05),
    ];
    let y = DVector::from_fn(64, |n, _| si.get(n).copied().unwrap_or_default());
    let fit = ls_tap_weights(&y, &a)?;
    println!("in span:   cancellation {:.1} dB", fit.cancellation_db);

    // Only one tap: the rest of the response is left over.
    let one = ideal_tap_matrix(&FirFilterSpec::new(1, 1.0)?, 1.0, 64)?;
    let fit1 = ls_tap_weights(&y, &one)?;
    let residual = apply_sic(&y, &one, &fit1)?;
    println!(
        "one tap:   cancellation {:.3} dB, residual energy {:.4}",
        fit1.cancellation_db,
        residual.norm_squared()
    );

    // Half-sample tap spacing uses band-limited taps with a bulk latency.
    let frac = ideal_tap_matrix(&FirFilterSpec::new(8, 0.5)?, 1.0, 64)?;
    println!("fractional delay taps flagged: {}", frac.fractional_delay);
    Ok(())
}
