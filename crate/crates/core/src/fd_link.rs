//! Beamformed full-duplex link metrics.
//!
//! A base station transmits to a downlink user with beam `f` while receiving
//! from an uplink user with beam `w`. The downlink sees cross-link
//! interference from the uplink user; the uplink sees self-interference
//! through `H`. All metrics are computed linearly; `_db` helpers convert.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::arrays::BeamWeights;
use crate::channels::{CrossLinkChannel, SiChannel, UserChannel};
use crate::error::{check_len, Result};
use crate::link_math::{rate_fd, LinkInrs, LinkSnrs};
use crate::units::{db_to_lin, lin_to_db};

/// Transmit and noise powers of the base station and users, in dBm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPowers {
    pub p_bs_dbm: f64,
    pub p_ue_dbm: f64,
    pub n_bs_dbm: f64,
    pub n_ue_dbm: f64,
}

impl Default for LinkPowers {
    fn default() -> Self {
        Self {
            p_bs_dbm: 0.0,
            p_ue_dbm: 0.0,
            n_bs_dbm: 0.0,
            n_ue_dbm: 0.0,
        }
    }
}

/// Everything about a full-duplex link except the beams.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkContext {
    pub h_tx: UserChannel,
    pub h_rx: UserChannel,
    pub h_cl: CrossLinkChannel,
    pub si: SiChannel,
    pub powers: LinkPowers,
}

impl LinkContext {
    pub fn new(
        h_tx: UserChannel,
        h_rx: UserChannel,
        h_cl: CrossLinkChannel,
        si: SiChannel,
        powers: LinkPowers,
    ) -> Result<Self> {
        check_len("SI channel columns vs downlink channel", h_tx.coefficients.len(), si.n_tx())?;
        check_len("SI channel rows vs uplink channel", h_rx.coefficients.len(), si.n_rx())?;
        Ok(Self {
            h_tx,
            h_rx,
            h_cl,
            si,
            powers,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.si.n_tx()
    }

    pub fn n_rx(&self) -> usize {
        self.si.n_rx()
    }

    pub(crate) fn check_f(&self, f: &DVector<Complex64>) -> Result<()> {
        check_len("transmit beam length", self.n_tx(), f.len())
    }

    pub(crate) fn check_w(&self, w: &DVector<Complex64>) -> Result<()> {
        check_len("receive beam length", self.n_rx(), w.len())
    }

    /// `P_bs · |h_tx^H f|^2 / N_ue`.
    pub fn snr_tx(&self, f: &DVector<Complex64>) -> Result<f64> {
        self.check_f(f)?;
        Ok(self.snr_tx_unchecked(f))
    }

    /// `P_ue · |w^H h_rx|^2 / N_bs`.
    pub fn snr_rx(&self, w: &DVector<Complex64>) -> Result<f64> {
        self.check_w(w)?;
        Ok(self.snr_rx_unchecked(w))
    }

    /// `P_bs · |w^H H f|^2 / N_bs`.
    pub fn inr_rx(&self, f: &DVector<Complex64>, w: &DVector<Complex64>) -> Result<f64> {
        self.check_f(f)?;
        self.check_w(w)?;
        Ok(self.inr_rx_from_hf(&(&self.si.matrix * f), w))
    }

    /// `P_ue · |h_cl|^2 / N_ue`; independent of the beams.
    pub fn inr_tx(&self) -> f64 {
        db_to_lin(self.powers.p_ue_dbm - self.powers.n_ue_dbm) * self.h_cl.coefficient.norm_sqr()
    }

    pub(crate) fn snr_tx_unchecked(&self, f: &DVector<Complex64>) -> f64 {
        db_to_lin(self.powers.p_bs_dbm - self.powers.n_ue_dbm) * self.h_tx.coefficients.dotc(f).norm_sqr()
    }

    pub(crate) fn snr_rx_unchecked(&self, w: &DVector<Complex64>) -> f64 {
        db_to_lin(self.powers.p_ue_dbm - self.powers.n_bs_dbm) * w.dotc(&self.h_rx.coefficients).norm_sqr()
    }

    /// INR on the receive link given a precomputed `H f`.
    pub(crate) fn inr_rx_from_hf(&self, hf: &DVector<Complex64>, w: &DVector<Complex64>) -> f64 {
        db_to_lin(self.powers.p_bs_dbm - self.powers.n_bs_dbm) * w.dotc(hf).norm_sqr()
    }

    pub fn metrics(&self, f: &DVector<Complex64>, w: &DVector<Complex64>) -> Result<LinkMetrics> {
        self.check_f(f)?;
        self.check_w(w)?;
        Ok(self.metrics_unchecked(f, w))
    }

    pub(crate) fn metrics_unchecked(&self, f: &DVector<Complex64>, w: &DVector<Complex64>) -> LinkMetrics {
        LinkMetrics {
            snr_tx: self.snr_tx_unchecked(f),
            snr_rx: self.snr_rx_unchecked(w),
            inr_tx: self.inr_tx(),
            inr_rx: self.inr_rx_from_hf(&(&self.si.matrix * f), w),
        }
    }
}

/// The four linear link-quality ratios of a beam pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMetrics {
    pub snr_tx: f64,
    pub snr_rx: f64,
    pub inr_tx: f64,
    pub inr_rx: f64,
}

impl LinkMetrics {
    pub fn snrs(&self) -> LinkSnrs {
        LinkSnrs {
            snr_tx: self.snr_tx,
            snr_rx: self.snr_rx,
        }
    }

    pub fn inrs(&self) -> LinkInrs {
        LinkInrs {
            inr_tx: self.inr_tx,
            inr_rx: self.inr_rx,
        }
    }

    pub fn snr_tx_db(&self) -> f64 {
        lin_to_db(self.snr_tx)
    }

    pub fn snr_rx_db(&self) -> f64 {
        lin_to_db(self.snr_rx)
    }

    pub fn inr_tx_db(&self) -> f64 {
        lin_to_db(self.inr_tx)
    }

    pub fn inr_rx_db(&self) -> f64 {
        lin_to_db(self.inr_rx)
    }

    pub fn spectral_efficiency(&self) -> SpectralEfficiency {
        let p = rate_fd(self.snrs(), self.inrs());
        SpectralEfficiency {
            r_tx: p.r_tx,
            r_rx: p.r_rx,
            sum: p.r_tx + p.r_rx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEfficiency {
    pub r_tx: f64,
    pub r_rx: f64,
    pub sum: f64,
}

/// A concrete beam pair evaluated in a link context.
#[derive(Debug, Clone, PartialEq)]
pub struct FdScenarioLink {
    pub f: BeamWeights,
    pub w: BeamWeights,
    pub context: LinkContext,
}

impl FdScenarioLink {
    pub fn new(f: BeamWeights, w: BeamWeights, context: LinkContext) -> Result<Self> {
        context.check_f(f.as_vector())?;
        context.check_w(w.as_vector())?;
        Ok(Self { f, w, context })
    }
}

pub fn snr_tx(link: &FdScenarioLink) -> Result<f64> {
    link.context.snr_tx(link.f.as_vector())
}

pub fn snr_rx(link: &FdScenarioLink) -> Result<f64> {
    link.context.snr_rx(link.w.as_vector())
}

pub fn inr_rx(link: &FdScenarioLink) -> Result<f64> {
    link.context.inr_rx(link.f.as_vector(), link.w.as_vector())
}

pub fn inr_tx(link: &FdScenarioLink) -> f64 {
    link.context.inr_tx()
}

/// Achievable `(r_tx, r_rx, r_tx + r_rx)` treating interference as noise.
pub fn sum_spectral_efficiency(link: &FdScenarioLink) -> Result<SpectralEfficiency> {
    Ok(link
        .context
        .metrics(link.f.as_vector(), link.w.as_vector())?
        .spectral_efficiency())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::{steering_vector, ArrayGeometry, Direction};
    use crate::channels::{los_user_channel, rayleigh_si_channel};
    use crate::link_math::capacity_fd;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn no_cross_link() -> CrossLinkChannel {
        CrossLinkChannel {
            coefficient: c(0.0, 0.0),
        }
    }

    fn identity_context(n: usize) -> LinkContext {
        let user = UserChannel {
            coefficients: DVector::from_element(n, c(1.0, 0.0)),
            description: "flat".into(),
        };
        LinkContext::new(
            user.clone(),
            user,
            no_cross_link(),
            SiChannel::custom(DMatrix::identity(n, n)).unwrap(),
            LinkPowers::default(),
        )
        .unwrap()
    }

    fn los_context(n: usize, si_seed: u64) -> (LinkContext, Direction, Direction, ArrayGeometry) {
        let g = ArrayGeometry::ula(n, 0.5).unwrap();
        let dt = Direction::azimuth(20.0).unwrap();
        let dr = Direction::azimuth(-35.0).unwrap();
        let ctx = LinkContext::new(
            los_user_channel(&g, &dt, 0.0),
            los_user_channel(&g, &dr, 0.0),
            CrossLinkChannel { coefficient: c(0.1, 0.05) },
            rayleigh_si_channel(n, n, si_seed),
            LinkPowers::default(),
        )
        .unwrap();
        (ctx, dt, dr, g)
    }

    #[test]
    fn snr_examples() {
        let (ctx, dt, dr, g) = los_context(16, 1);
        let f = steering_vector(&g, &dt);
        assert_abs_diff_eq!(ctx.snr_tx(&f).unwrap(), 256.0, epsilon = 1e-9);
        assert_abs_diff_eq!(ctx.snr_rx(&steering_vector(&g, &dr)).unwrap(), 256.0, epsilon = 1e-9);

        // Orthogonal to the downlink channel: alternate signs on a broadside user.
        let flat = identity_context(4);
        let f_null = DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(flat.snr_tx(&f_null).unwrap(), 0.0);

        let mut half = ctx.clone();
        half.powers.p_bs_dbm -= 10.0 * 2f64.log10();
        assert_abs_diff_eq!(half.snr_tx(&f).unwrap(), 128.0, epsilon = 1e-9);
        assert!(ctx.snr_tx(&DVector::from_element(3, c(1.0, 0.0))).is_err());
    }

    #[test]
    fn inr_rx_examples() {
        let ctx = identity_context(2);
        let f = DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        let w = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(ctx.inr_rx(&f, &w).unwrap(), 0.0);
        assert_abs_diff_eq!(ctx.inr_rx(&w, &w).unwrap(), 4.0, epsilon = 1e-12);
        let loud = LinkContext {
            si: ctx.si.scaled_db(20.0),
            ..ctx.clone()
        };
        assert_abs_diff_eq!(loud.inr_rx(&w, &w).unwrap(), 400.0, epsilon = 1e-9);
    }

    #[test]
    fn inr_tx_examples() {
        let mut ctx = identity_context(2);
        assert_eq!(ctx.inr_tx(), 0.0);
        ctx.h_cl.coefficient = c(0.0, 1.0);
        assert_abs_diff_eq!(ctx.inr_tx(), 1.0, epsilon = 1e-15);
        ctx.h_cl.coefficient = c(0.1, 0.0);
        ctx.powers.p_ue_dbm = 20.0;
        assert_abs_diff_eq!(ctx.inr_tx(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sum_se_examples() {
        // Single-antenna link tuned to SNR 10 on both sides with no interference.
        let user = UserChannel {
            coefficients: DVector::from_element(1, c(1.0, 0.0)),
            description: String::new(),
        };
        let ctx = LinkContext::new(
            user.clone(),
            user,
            no_cross_link(),
            SiChannel::zeros(1, 1),
            LinkPowers {
                p_bs_dbm: 10.0,
                p_ue_dbm: 10.0,
                ..LinkPowers::default()
            },
        )
        .unwrap();
        let one = BeamWeights::from_slice(&[c(1.0, 0.0)]);
        let link = FdScenarioLink::new(one.clone(), one.clone(), ctx.clone()).unwrap();
        let se = sum_spectral_efficiency(&link).unwrap();
        assert_abs_diff_eq!(se.sum, 6.918863, epsilon = 1e-6);
        assert_abs_diff_eq!(se.sum, capacity_fd(LinkSnrs::new(10.0, 10.0).unwrap()).sum(), epsilon = 1e-12);

        let mut jammed = ctx;
        jammed.si = SiChannel::custom(DMatrix::from_element(1, 1, c(1e150, 0.0))).unwrap();
        let link = FdScenarioLink::new(one.clone(), one, jammed).unwrap();
        assert!(sum_spectral_efficiency(&link).unwrap().r_rx < 1e-200);
    }

    #[test]
    fn consistent_with_rate_fd() {
        let (ctx, dt, dr, g) = los_context(8, 4);
        let link = FdScenarioLink::new(
            BeamWeights::unconstrained(steering_vector(&g, &dt.offset(3.0, 0.0))),
            BeamWeights::unconstrained(steering_vector(&g, &dr)),
            ctx,
        )
        .unwrap();
        let se = sum_spectral_efficiency(&link).unwrap();
        let snrs = LinkSnrs::new(snr_tx(&link).unwrap(), snr_rx(&link).unwrap()).unwrap();
        let inrs = LinkInrs::new(inr_tx(&link), inr_rx(&link).unwrap()).unwrap();
        let p = rate_fd(snrs, inrs);
        assert_eq!((se.r_tx, se.r_rx), (p.r_tx, p.r_rx));
    }

    #[test]
    fn constructed_null_gives_zero_inr() {
        let (ctx, dt, _, g) = los_context(4, 9);
        let f = steering_vector(&g, &dt);
        let hf = &ctx.si.matrix * &f;
        // w = e1 - (hf_0 / hf_1)^* e2 makes w^H hf vanish.
        let w = DVector::from_vec(vec![c(1.0, 0.0), -(hf[0] / hf[1]).conj(), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(ctx.inr_rx(&f, &w).unwrap() < 1e-24);
    }

    #[test]
    fn power_shift_moves_snr_tx_and_inr_rx_by_same_db() {
        let (ctx, dt, dr, g) = los_context(6, 2);
        let f = steering_vector(&g, &dt.offset(4.0, 0.0));
        let w = steering_vector(&g, &dr.offset(-2.0, 0.0));
        let base = ctx.metrics(&f, &w).unwrap();
        let mut shifted = ctx.clone();
        shifted.powers.p_bs_dbm += 7.5;
        let m = shifted.metrics(&f, &w).unwrap();
        assert_abs_diff_eq!(m.snr_tx_db() - base.snr_tx_db(), 7.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.inr_rx_db() - base.inr_rx_db(), 7.5, epsilon = 1e-9);
        assert_eq!(m.snr_rx, base.snr_rx);
        assert_eq!(m.inr_tx, base.inr_tx);
    }

    proptest! {
        #[test]
        fn global_phase_invariance(pf in 0.0..6.28f64, pw in 0.0..6.28f64, seed in 0u64..50) {
            let (ctx, dt, dr, g) = los_context(4, seed);
            let f = steering_vector(&g, &dt.offset(5.0, 0.0));
            let w = steering_vector(&g, &dr.offset(-5.0, 0.0));
            let a = ctx.metrics(&f, &w).unwrap().spectral_efficiency();
            let f2 = &f * Complex64::from_polar(1.0, pf);
            let w2 = &w * Complex64::from_polar(1.0, pw);
            let b = ctx.metrics(&f2, &w2).unwrap().spectral_efficiency();
            prop_assert!((a.sum - b.sum).abs() < 1e-9);
        }

        #[test]
        fn r_tx_ignores_receive_beam(seed in 0u64..50, d in -30.0..30.0f64) {
            let (ctx, dt, dr, g) = los_context(4, seed);
            let f = steering_vector(&g, &dt);
            let a = ctx.metrics(&f, &steering_vector(&g, &dr)).unwrap().spectral_efficiency();
            let b = ctx.metrics(&f, &steering_vector(&g, &dr.offset(d, 0.0))).unwrap().spectral_efficiency();
            prop_assert_eq!(a.r_tx, b.r_tx);
        }
    }
}
