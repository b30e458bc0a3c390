//! Scalar link-level formulas for comparing duplexing strategies.
//!
//! All ratios in this module are linear unless a name ends in `_db`.
//! Spectral efficiencies are in bits/s/Hz.

use crate::error::{Error, Result};
use crate::units::log2_1p;

/// Transmit power, noise power and total SI mitigation of a link, in dB units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub p_tx_dbm: f64,
    pub p_noise_dbm: f64,
    /// Total SI mitigation (cancellation) in dB.
    pub cancellation_db: f64,
}

impl LinkBudget {
    pub fn new(p_tx_dbm: f64, p_noise_dbm: f64, cancellation_db: f64) -> Result<Self> {
        if !(p_tx_dbm.is_finite() && p_noise_dbm.is_finite() && cancellation_db.is_finite()) {
            return Err(Error::Domain("link budget fields must be finite".into()));
        }
        if cancellation_db < 0.0 {
            return Err(Error::Domain(format!(
                "cancellation must be non-negative, got {cancellation_db} dB"
            )));
        }
        Ok(Self {
            p_tx_dbm,
            p_noise_dbm,
            cancellation_db,
        })
    }
}

fn check_ratio(name: &str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::Domain(format!("{name} must be a non-negative ratio, got {x}")))
    } else {
        Ok(())
    }
}

/// Maximum (interference-free) SNRs of the transmit and receive links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSnrs {
    pub snr_tx: f64,
    pub snr_rx: f64,
}

impl LinkSnrs {
    pub fn new(snr_tx: f64, snr_rx: f64) -> Result<Self> {
        check_ratio("snr_tx", snr_tx)?;
        check_ratio("snr_rx", snr_rx)?;
        Ok(Self { snr_tx, snr_rx })
    }

    pub fn from_db(snr_tx_db: f64, snr_rx_db: f64) -> Self {
        Self {
            snr_tx: crate::units::db_to_lin(snr_tx_db),
            snr_rx: crate::units::db_to_lin(snr_rx_db),
        }
    }
}

/// Cross-link interference on the transmit link and SI on the receive link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkInrs {
    pub inr_tx: f64,
    pub inr_rx: f64,
}

impl LinkInrs {
    pub const NONE: LinkInrs = LinkInrs {
        inr_tx: 0.0,
        inr_rx: 0.0,
    };

    pub fn new(inr_tx: f64, inr_rx: f64) -> Result<Self> {
        check_ratio("inr_tx", inr_tx)?;
        check_ratio("inr_rx", inr_rx)?;
        Ok(Self { inr_tx, inr_rx })
    }

    /// `-inf` dB maps to zero interference.
    pub fn from_db(inr_tx_db: f64, inr_rx_db: f64) -> Self {
        Self {
            inr_tx: crate::units::db_to_lin(inr_tx_db),
            inr_rx: crate::units::db_to_lin(inr_rx_db),
        }
    }
}

/// A simultaneously achievable (transmit, receive) spectral-efficiency pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub r_tx: f64,
    pub r_rx: f64,
}

impl RatePoint {
    pub fn sum(&self) -> f64 {
        self.r_tx + self.r_rx
    }
}

/// Fraction of time (TDD) or bandwidth (FDD) given to the transmit link.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DuplexShare(f64);

impl DuplexShare {
    pub fn new(alpha: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(Self(alpha))
        } else {
            Err(Error::Domain(format!("duplex share must lie in [0, 1], got {alpha}")))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

/// SINR of a link whose residual interference is treated as noise.
pub fn sinr(snr: f64, inr: f64) -> Result<f64> {
    check_ratio("snr", snr)?;
    check_ratio("inr", inr)?;
    Ok(sinr_unchecked(snr, inr))
}

#[inline]
pub(crate) fn sinr_unchecked(snr: f64, inr: f64) -> f64 {
    if inr.is_infinite() {
        0.0
    } else {
        snr / (1.0 + inr)
    }
}

/// INR of residual self-interference in dB: `P_tx - L - P_noise`.
pub fn residual_si_inr(budget: &LinkBudget) -> f64 {
    budget.p_tx_dbm - budget.cancellation_db - budget.p_noise_dbm
}

/// Full-duplex rates with residual interference treated as noise.
pub fn rate_fd(snrs: LinkSnrs, inrs: LinkInrs) -> RatePoint {
    RatePoint {
        r_tx: log2_1p(sinr_unchecked(snrs.snr_tx, inrs.inr_tx)),
        r_rx: log2_1p(sinr_unchecked(snrs.snr_rx, inrs.inr_rx)),
    }
}

/// Time-division duplexing: each link runs at full SNR for its time share.
pub fn rate_tdd(snrs: LinkSnrs, share: DuplexShare) -> RatePoint {
    let a = share.alpha();
    RatePoint {
        r_tx: a * log2_1p(snrs.snr_tx),
        r_rx: (1.0 - a) * log2_1p(snrs.snr_rx),
    }
}

/// Frequency-division duplexing under an instantaneous power constraint: a
/// link confined to a fraction `a` of the band sees its SNR boosted by `1/a`.
pub fn rate_fdd(snrs: LinkSnrs, share: DuplexShare) -> RatePoint {
    let a = share.alpha();
    RatePoint {
        r_tx: fdd_term(a, snrs.snr_tx),
        r_rx: fdd_term(1.0 - a, snrs.snr_rx),
    }
}

// a·log2(1 + snr/a), with the a -> 0 limit of zero.
fn fdd_term(a: f64, snr: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else {
        a * log2_1p(snr / a)
    }
}

/// Full-duplex capacity: both links at their interference-free rates.
pub fn capacity_fd(snrs: LinkSnrs) -> RatePoint {
    rate_fd(snrs, LinkInrs::NONE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Tdd,
    Fdd,
    Fd,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Tdd => "tdd",
            Strategy::Fdd => "fdd",
            Strategy::Fd => "fd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    /// Duplex share for tdd/fdd sweeps; `None` for full-duplex points.
    pub alpha: Option<f64>,
    pub rate: RatePoint,
}

/// Achievable boundary of a rate region plus its sum-rate maximizing point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionBoundary {
    pub strategy: Strategy,
    pub points: Vec<BoundaryPoint>,
    /// Index into `points` of the sum-rate maximizer.
    pub star: usize,
}

impl RegionBoundary {
    pub fn star_point(&self) -> &BoundaryPoint {
        &self.points[self.star]
    }
}

/// Relative slack under which two sum rates count as tied.
const SUM_TIE_TOL: f64 = 1e-12;

/// Sweep the boundary of a duplexing strategy's rate region.
///
/// TDD and FDD sweep `n_points` uniform shares in `[0, 1]`; the full-duplex
/// region is the rectangle with corner [`rate_fd`], returned as
/// `[(r_tx, 0), corner, (0, r_rx)]`. Sum-rate ties go to the smallest share.
pub fn rate_region_boundary(
    strategy: Strategy,
    snrs: LinkSnrs,
    inrs: LinkInrs,
    n_points: usize,
) -> Result<RegionBoundary> {
    if n_points < 2 {
        return Err(Error::Config(format!(
            "rate region needs at least 2 points, got {n_points}"
        )));
    }
    let points: Vec<BoundaryPoint> = match strategy {
        Strategy::Tdd | Strategy::Fdd => (0..n_points)
            .map(|i| {
                let alpha = i as f64 / (n_points - 1) as f64;
                let share = DuplexShare(alpha);
                let rate = if strategy == Strategy::Tdd {
                    rate_tdd(snrs, share)
                } else {
                    rate_fdd(snrs, share)
                };
                BoundaryPoint {
                    alpha: Some(alpha),
                    rate,
                }
            })
            .collect(),
        Strategy::Fd => {
            let corner = rate_fd(snrs, inrs);
            vec![
                BoundaryPoint {
                    alpha: None,
                    rate: RatePoint {
                        r_tx: corner.r_tx,
                        r_rx: 0.0,
                    },
                },
                BoundaryPoint {
                    alpha: None,
                    rate: corner,
                },
                BoundaryPoint {
                    alpha: None,
                    rate: RatePoint {
                        r_tx: 0.0,
                        r_rx: corner.r_rx,
                    },
                },
            ]
        }
    };
    let mut star = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        let best = points[star].rate.sum();
        if p.rate.sum() > best + SUM_TIE_TOL * best.abs().max(1.0) {
            star = i;
        }
    }
    Ok(RegionBoundary {
        strategy,
        points,
        star,
    })
}
