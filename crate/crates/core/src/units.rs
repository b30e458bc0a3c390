//! Decibel conversions.
//!
//! Every public API states whether it takes linear or dB values; the
//! conversions all live here so that nothing converts twice.

/// Floor used when a dB quantity would be `-inf` (for example a perfect null).
pub const DB_FLOOR: f64 = -300.0;

/// `10·log10(x)` for a power ratio. Returns `-inf` for zero.
#[inline]
pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Inverse of [`lin_to_db`]. `-inf` maps to exactly zero.
#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Amplitude factor for a gain given in dB (`10^(db/20)`).
#[inline]
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// [`lin_to_db`] clamped at [`DB_FLOOR`] so reports stay finite.
#[inline]
pub fn lin_to_db_floored(x: f64) -> f64 {
    let db = lin_to_db(x);
    if db.is_nan() || db < DB_FLOOR {
        DB_FLOOR
    } else {
        db
    }
}

/// `log2(1 + x)`, accurate for tiny `x`.
#[inline]
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for &x in &[1e-12, 0.5, 1.0, 10.0, 1e9] {
            assert!((db_to_lin(lin_to_db(x)) - x).abs() <= 1e-12 * x);
        }
        assert_eq!(db_to_lin(f64::NEG_INFINITY), 0.0);
        assert_eq!(lin_to_db_floored(0.0), DB_FLOOR);
        assert!((db_to_amplitude(-20.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn log2_1p_small_arguments() {
        let x = 1e-12;
        let expected = x / std::f64::consts::LN_2;
        assert!((log2_1p(x) - expected).abs() < 1e-24);
        assert_eq!(log2_1p(1.0), 1.0);
    }
}
