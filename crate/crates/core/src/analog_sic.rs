//! Analog self-interference cancellation with an N-tap FIR filter.
//!
//! Tap weights are fitted by least squares against measured SI samples `y`
//! and the measured per-tap impulse responses (columns of `A`), so that the
//! filter output `A x` reconstructs an inverted copy of the SI.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::units::{lin_to_db_floored, DB_FLOOR};

/// Condition number of `A^H A` above which the fit is ridge-regularized.
pub const MAX_CONDITION: f64 = 1e12;
/// Ridge weight relative to `trace(A^H A) / K`.
pub const RIDGE_SCALE: f64 = 1e-9;

/// Uniform-delay tapped delay line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirFilterSpec {
    pub n_taps: usize,
    /// Delay between consecutive taps, in seconds.
    pub tap_delay: f64,
}

impl FirFilterSpec {
    pub fn new(n_taps: usize, tap_delay: f64) -> Result<Self> {
        if n_taps == 0 {
            return Err(Error::Config("FIR filter needs at least one tap".into()));
        }
        if !(tap_delay.is_finite() && tap_delay > 0.0) {
            return Err(Error::Config(format!("tap delay must be positive, got {tap_delay}")));
        }
        Ok(Self { n_taps, tap_delay })
    }
}

/// `T x K` matrix whose column `i` is the impulse response of tap `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TapResponseMatrix {
    pub columns: DMatrix<Complex64>,
    pub sample_period: f64,
    /// Set when taps were synthesized with fractional-delay interpolation.
    pub fractional_delay: bool,
}

impl TapResponseMatrix {
    pub fn new(columns: DMatrix<Complex64>, sample_period: f64) -> Result<Self> {
        if columns.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Input("tap responses must be finite".into()));
        }
        Ok(Self {
            columns,
            sample_period,
            fractional_delay: false,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.columns.nrows()
    }

    pub fn n_taps(&self) -> usize {
        self.columns.ncols()
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Ideal tap responses: tap `i` is a unit impulse delayed by `i · τ`.
///
/// When `τ` is not a whole number of samples the impulses are band-limited
/// (sinc) and the whole filter is shifted by a bulk latency that centres
/// the taps in the `T`-sample window; the result is flagged.
pub fn ideal_tap_matrix(spec: &FirFilterSpec, sample_period: f64, n_samples: usize) -> Result<TapResponseMatrix> {
    if !(sample_period.is_finite() && sample_period > 0.0) {
        return Err(Error::Config(format!("sample period must be positive, got {sample_period}")));
    }
    if n_samples == 0 {
        return Err(Error::Config("tap responses need at least one sample".into()));
    }
    let d = spec.tap_delay / sample_period;
    let integer = (d - d.round()).abs() <= 1e-9 * d.max(1.0);
    let k = spec.n_taps;
    let columns = if integer {
        let step = d.round() as usize;
        DMatrix::from_fn(n_samples, k, |n, i| {
            if n == i * step {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    } else {
        let span = (k - 1) as f64 * d;
        let latency = ((n_samples as f64 - 1.0 - span) / 2.0).floor().max(0.0);
        DMatrix::from_fn(n_samples, k, |n, i| {
            Complex64::new(sinc(n as f64 - latency - i as f64 * d), 0.0)
        })
    };
    Ok(TapResponseMatrix {
        columns,
        sample_period,
        fractional_delay: !integer,
    })
}

/// Least-squares tap weights and the cancellation they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct SicFit {
    pub weights: DVector<Complex64>,
    /// Mean residual power per sample, dB (floored at −300).
    pub residual_power_db: f64,
    /// `10 log10(|y|^2 / |r|^2)`; +300 dB when the residual vanishes.
    pub cancellation_db: f64,
    /// True when `A^H A` was ill-conditioned and a ridge term was added.
    pub regularized: bool,
}

/// Fit `x* = -(A^H A)^{-1} A^H y`.
pub fn ls_tap_weights(y: &DVector<Complex64>, a: &TapResponseMatrix) -> Result<SicFit> {
    if y.is_empty() {
        return Err(Error::Input("no SI samples to fit".into()));
    }
    check_len("SI samples vs tap response length", a.n_samples(), y.len())?;
    let k = a.n_taps();
    if k == 0 {
        return Err(Error::Input("tap response matrix has no columns".into()));
    }
    let am = &a.columns;

    let svd = am.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = if k <= a.n_samples() { svd.singular_values.min() } else { 0.0 };
    let condition = if s_min > 0.0 { (s_max / s_min).powi(2) } else { f64::INFINITY };

    let (mut weights, regularized) = if condition <= MAX_CONDITION {
        let x = svd
            .solve(y, 0.0)
            .map_err(|e| Error::Numerical(format!("SVD solve failed: {e}")))?;
        (-x, false)
    } else {
        log::warn!("tap response Gram matrix ill-conditioned (cond {condition:.3e}); using ridge fit");
        let gram = am.adjoint() * am;
        let trace: f64 = gram.diagonal().iter().map(|z| z.re).sum();
        let eps = RIDGE_SCALE * trace.max(f64::MIN_POSITIVE) / k as f64;
        let reg = gram + DMatrix::identity(k, k) * Complex64::new(eps, 0.0);
        let rhs = -(am.adjoint() * y);
        let x = reg
            .cholesky()
            .ok_or_else(|| Error::Numerical("regularized Gram matrix not positive definite".into()))?
            .solve(&rhs);
        (x, true)
    };

    let y_energy = y.norm_squared();
    let mut residual = y + am * &weights;
    if residual.norm_squared() > y_energy {
        // Never worse than leaving the filter off.
        weights = DVector::zeros(k);
        residual = y.clone();
    }
    let r_energy = residual.norm_squared();
    let cancellation_db = if y_energy == 0.0 {
        0.0
    } else if r_energy == 0.0 {
        -DB_FLOOR
    } else {
        (10.0 * (y_energy / r_energy).log10()).min(-DB_FLOOR)
    };
    Ok(SicFit {
        weights,
        residual_power_db: lin_to_db_floored(r_energy / y.len() as f64),
        cancellation_db,
        regularized,
    })
}

/// Sum the received samples with the filter output: `y + A x`.
pub fn apply_sic(y: &DVector<Complex64>, a: &TapResponseMatrix, fit: &SicFit) -> Result<DVector<Complex64>> {
    check_len("received samples vs tap response length", a.n_samples(), y.len())?;
    check_len("tap weights vs filter taps", a.n_taps(), fit.weights.len())?;
    Ok(y + &a.columns * &fit.weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    /// Normal equations solved by Gaussian elimination with partial pivoting.
    fn normal_equations_oracle(a: &DMatrix<Complex64>, y: &DVector<Complex64>) -> Vec<Complex64> {
        let k = a.ncols();
        let mut m = vec![vec![c(0.0, 0.0); k + 1]; k];
        for i in 0..k {
            for j in 0..k {
                m[i][j] = (0..a.nrows()).map(|t| a[(t, i)].conj() * a[(t, j)]).sum();
            }
            m[i][k] = -(0..a.nrows()).map(|t| a[(t, i)].conj() * y[t]).sum::<Complex64>();
        }
        for col in 0..k {
            let piv = (col..k).max_by(|&p, &q| m[p][col].norm().total_cmp(&m[q][col].norm())).unwrap();
            m.swap(col, piv);
            for row in col + 1..k {
                let factor = m[row][col] / m[col][col];
                for j in col..=k {
                    let v = m[col][j];
                    m[row][j] -= factor * v;
                }
            }
        }
        let mut x = vec![c(0.0, 0.0); k];
        for i in (0..k).rev() {
            let s: Complex64 = (i + 1..k).map(|j| m[i][j] * x[j]).sum();
            x[i] = (m[i][k] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn ideal_tap_examples() {
        let a = ideal_tap_matrix(&FirFilterSpec::new(2, 1.0).unwrap(), 1.0, 3).unwrap();
        let expect = DMatrix::from_row_slice(3, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(a.columns, expect);
        assert!(!a.fractional_delay);

        let a = ideal_tap_matrix(&FirFilterSpec::new(1, 2e-9).unwrap(), 1e-9, 4).unwrap();
        assert_eq!(a.n_taps(), 1);
        assert_eq!(a.columns[(0, 0)], c(1.0, 0.0));
        assert_eq!(a.columns.column(0).norm_squared(), 1.0);

        let a = ideal_tap_matrix(&FirFilterSpec::new(2, 0.5).unwrap(), 1.0, 64).unwrap();
        assert!(a.fractional_delay);
        for col in a.columns.column_iter() {
            assert!((col.norm_squared() - 1.0).abs() < 0.01, "energy {}", col.norm_squared());
        }
        assert!(FirFilterSpec::new(0, 1.0).is_err());
        assert!(FirFilterSpec::new(2, 0.0).is_err());
    }

    #[test]
    fn ls_exact_inversion() {
        let a = TapResponseMatrix::new(DMatrix::identity(2, 2), 1.0).unwrap();
        let y = DVector::from_vec(vec![c(1.0, 1.0), c(2.0, 0.0)]);
        let fit = ls_tap_weights(&y, &a).unwrap();
        assert_abs_diff_eq!((fit.weights[0] - c(-1.0, -1.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((fit.weights[1] - c(-2.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert!(apply_sic(&y, &a, &fit).unwrap().norm() < 1e-12);
        assert!(fit.cancellation_db > 200.0);
    }

    #[test]
    fn ls_orthogonal_target() {
        let cols = DMatrix::from_row_slice(3, 1, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let a = TapResponseMatrix::new(cols, 1.0).unwrap();
        let y = DVector::from_vec(vec![c(0.0, 0.0), c(3.0, -1.0), c(0.5, 0.0)]);
        let fit = ls_tap_weights(&y, &a).unwrap();
        assert_eq!(fit.weights[0], c(0.0, 0.0));
        assert_abs_diff_eq!(fit.cancellation_db, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ls_recovers_taps_under_small_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let a = DMatrix::from_fn(64, 4, |_, _| cn(&mut rng));
        let x_true = DVector::from_fn(4, |_, _| cn(&mut rng));
        let noise = DVector::from_fn(64, |_, _| cn(&mut rng) * 1e-6 * std::f64::consts::FRAC_1_SQRT_2);
        let y = -(&a * &x_true) + noise;
        let tap = TapResponseMatrix::new(a.clone(), 1.0).unwrap();
        let fit = ls_tap_weights(&y, &tap).unwrap();
        let oracle = normal_equations_oracle(&a, &y);
        for i in 0..4 {
            assert!((fit.weights[i] - x_true[i]).norm() < 1e-4);
            assert!((fit.weights[i] - oracle[i]).norm() < 1e-9);
        }
        let r = apply_sic(&y, &tap, &fit).unwrap();
        assert!((a.adjoint() * r).norm() <= 1e-9 * y.norm());
    }

    #[test]
    fn apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = TapResponseMatrix::new(DMatrix::from_fn(16, 3, |_, _| cn(&mut rng)), 1.0).unwrap();
        let y1 = DVector::from_fn(16, |_, _| cn(&mut rng));
        let y2 = DVector::from_fn(16, |_, _| cn(&mut rng));
        let fit = ls_tap_weights(&y1, &a).unwrap();
        let zero = SicFit {
            weights: DVector::zeros(3),
            ..fit.clone()
        };
        assert_eq!(apply_sic(&y1, &a, &zero).unwrap(), y1);
        let r = apply_sic(&y1, &a, &fit).unwrap();
        assert_abs_diff_eq!(lin_to_db_floored(r.norm_squared() / 16.0), fit.residual_power_db, epsilon = 1e-12);
        // Linear in y for fixed weights: the filter output is counted once per call.
        let lhs = apply_sic(&(&y1 + &y2), &a, &fit).unwrap();
        let rhs = apply_sic(&y1, &a, &fit).unwrap() + apply_sic(&y2, &a, &fit).unwrap() - &a.columns * &fit.weights;
        assert!((lhs - rhs).norm() < 1e-12);
        assert!(apply_sic(&DVector::zeros(5), &a, &fit).is_err());
    }

    #[test]
    fn duplicate_column_uses_ridge_and_keeps_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base = DMatrix::from_fn(32, 3, |_, _| cn(&mut rng));
        let y = DVector::from_fn(32, |_, _| cn(&mut rng));
        let fit = ls_tap_weights(&y, &TapResponseMatrix::new(base.clone(), 1.0).unwrap()).unwrap();
        let mut dup = base.clone().insert_column(3, c(0.0, 0.0));
        dup.set_column(3, &base.column(1));
        let fit_dup = ls_tap_weights(&y, &TapResponseMatrix::new(dup, 1.0).unwrap()).unwrap();
        assert!(fit_dup.regularized);
        assert!(!fit.regularized);
        assert!((fit.residual_power_db - fit_dup.residual_power_db).abs() < 1e-6);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let a = TapResponseMatrix::new(DMatrix::identity(2, 2), 1.0).unwrap();
        assert!(matches!(ls_tap_weights(&DVector::zeros(0), &a), Err(Error::Input(_))));
        assert!(matches!(ls_tap_weights(&DVector::zeros(3), &a), Err(Error::Dimension { .. })));
    }
}
