//! Joint selection of a transmit and receive analog beam from finite
//! candidate sets, maximizing the full-duplex sum spectral efficiency.
//!
//! [`exhaustive_beam_search`] is the global oracle. [`alternating_beam_search`]
//! is coordinate ascent starting from the SNR-greedy (beam alignment) pair.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::arrays::{BeamWeights, Codebook, PhaseShifterSpec, WeightSet};
use crate::error::{Error, Result};
use crate::fd_link::LinkContext;
use crate::link_math::sinr_unchecked;
use crate::units::log2_1p;

/// Default cap on `|F| · |W|` for exhaustive search.
pub const DEFAULT_PAIR_BUDGET: u128 = 10_000_000;

/// Candidate transmit and receive beams.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSearchSpace {
    tx: Vec<BeamWeights>,
    rx: Vec<BeamWeights>,
}

impl BeamSearchSpace {
    pub fn new(tx: Vec<BeamWeights>, rx: Vec<BeamWeights>) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() {
            return Err(Error::Input("beam candidate sets must be non-empty".into()));
        }
        for b in tx.iter().chain(&rx) {
            if !b.set().contains(b.as_vector()) {
                return Err(Error::Input("candidate beam is not realizable under its own set".into()));
            }
        }
        Ok(Self { tx, rx })
    }

    pub fn from_codebooks(tx: &Codebook, rx: &Codebook) -> Result<Self> {
        Self::new(tx.beams().to_vec(), rx.beams().to_vec())
    }

    pub fn tx(&self) -> &[BeamWeights] {
        &self.tx
    }

    pub fn rx(&self) -> &[BeamWeights] {
        &self.rx
    }

    pub fn n_pairs(&self) -> u128 {
        self.tx.len() as u128 * self.rx.len() as u128
    }
}

/// Every phase-only weight vector of length `n` realizable by `spec`, with
/// the first entry pinned to phase 0 (a common phase does not change any
/// link metric). Ordered lexicographically by phase index, last entry fastest.
pub fn enumerate_phase_only(n: usize, spec: &PhaseShifterSpec) -> Result<Vec<BeamWeights>> {
    if n == 0 {
        return Err(Error::Input("beam length must be positive".into()));
    }
    let levels = spec.n_phases();
    let count = (levels as u128).checked_pow((n - 1) as u32).filter(|&c| c <= 1 << 24).ok_or_else(|| {
        Error::Config(format!("{levels}^{} phase-only beams is too many to enumerate", n - 1))
    })? as usize;
    let set = WeightSet::Quantized(PhaseShifterSpec::phase_only(spec.phase_bits)?);
    let step = std::f64::consts::TAU / levels as f64;
    Ok((0..count)
        .map(|mut idx| {
            let mut w = DVector::from_element(n, Complex64::new(1.0, 0.0));
            for m in (1..n).rev() {
                w[m] = Complex64::from_polar(1.0, (idx % levels) as f64 * step);
                idx /= levels;
            }
            BeamWeights::with_set(w, set.clone()).expect("enumerated beams are realizable")
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamDesignResult {
    pub f: BeamWeights,
    pub w: BeamWeights,
    pub tx_index: usize,
    pub rx_index: usize,
    pub sum_se: f64,
    /// Number of (f, w) pair evaluations.
    pub evaluations: u64,
    /// Sum spectral efficiency after initialization and after each half-step
    /// (alternating search only).
    pub trace: Vec<f64>,
}

/// Per-candidate quantities shared by both searches.
struct Scored<'a> {
    ctx: &'a LinkContext,
    r_tx: Vec<f64>,
    snr_rx: Vec<f64>,
    hf: Vec<DVector<Complex64>>,
}

impl<'a> Scored<'a> {
    fn new(space: &BeamSearchSpace, ctx: &'a LinkContext) -> Result<Self> {
        for f in &space.tx {
            ctx.check_f(f.as_vector())?;
        }
        for w in &space.rx {
            ctx.check_w(w.as_vector())?;
        }
        let inr_tx = ctx.inr_tx();
        Ok(Self {
            ctx,
            r_tx: space
                .tx
                .iter()
                .map(|f| log2_1p(sinr_unchecked(ctx.snr_tx_unchecked(f.as_vector()), inr_tx)))
                .collect(),
            snr_rx: space.rx.iter().map(|w| ctx.snr_rx_unchecked(w.as_vector())).collect(),
            hf: space.tx.iter().map(|f| &ctx.si.matrix * f.as_vector()).collect(),
        })
    }

    fn sum_se(&self, space: &BeamSearchSpace, i: usize, j: usize) -> f64 {
        let inr_rx = self.ctx.inr_rx_from_hf(&self.hf[i], space.rx[j].as_vector());
        self.r_tx[i] + log2_1p(sinr_unchecked(self.snr_rx[j], inr_rx))
    }
}

#[derive(Clone, Copy)]
struct Best {
    sum: f64,
    i: usize,
    j: usize,
}

impl Best {
    // Larger sum wins; ties go to the lower (tx, rx) index pair.
    fn pick(self, other: Best) -> Best {
        if other.sum > self.sum || (other.sum == self.sum && (other.i, other.j) < (self.i, self.j)) {
            other
        } else {
            self
        }
    }
}

fn result(space: &BeamSearchSpace, best: Best, evaluations: u64, trace: Vec<f64>) -> BeamDesignResult {
    BeamDesignResult {
        f: space.tx[best.i].clone(),
        w: space.rx[best.j].clone(),
        tx_index: best.i,
        rx_index: best.j,
        sum_se: best.sum,
        evaluations,
        trace,
    }
}

/// Global optimum over `F x W` with the default pair budget.
pub fn exhaustive_beam_search(space: &BeamSearchSpace, ctx: &LinkContext) -> Result<BeamDesignResult> {
    exhaustive_beam_search_with_budget(space, ctx, DEFAULT_PAIR_BUDGET)
}

pub fn exhaustive_beam_search_with_budget(
    space: &BeamSearchSpace,
    ctx: &LinkContext,
    budget: u128,
) -> Result<BeamDesignResult> {
    if space.n_pairs() > budget {
        return Err(Error::BudgetExceeded {
            size: space.n_pairs(),
            budget,
        });
    }
    let scored = Scored::new(space, ctx)?;
    let n_rx = space.rx.len();
    let best = (0..space.tx.len())
        .into_par_iter()
        .map(|i| {
            (0..n_rx)
                .map(|j| Best {
                    sum: scored.sum_se(space, i, j),
                    i,
                    j,
                })
                .reduce(Best::pick)
                .expect("non-empty receive set")
        })
        .reduce_with(Best::pick)
        .expect("non-empty transmit set");
    Ok(result(space, best, space.n_pairs() as u64, Vec::new()))
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Coordinate ascent from the SNR-greedy pair: the transmit beam with the
/// highest downlink SNR and the receive beam with the highest uplink SNR.
pub fn alternating_beam_search(
    space: &BeamSearchSpace,
    ctx: &LinkContext,
    max_rounds: usize,
) -> Result<BeamDesignResult> {
    let snr_tx: Vec<f64> = space.tx.iter().map(|f| ctx.snr_tx(f.as_vector())).collect::<Result<_>>()?;
    let snr_rx: Vec<f64> = space.rx.iter().map(|w| ctx.snr_rx(w.as_vector())).collect::<Result<_>>()?;
    alternating_beam_search_from(space, ctx, (argmax_first(&snr_tx), argmax_first(&snr_rx)), max_rounds)
}

/// Coordinate ascent from a given `(tx_index, rx_index)` pair.
///
/// Each round first re-selects `w` for the current `f`, then `f` for the
/// current `w`. A beam is replaced only by a strictly better one, so the
/// trace never decreases; the search stops after a round with no change.
pub fn alternating_beam_search_from(
    space: &BeamSearchSpace,
    ctx: &LinkContext,
    start: (usize, usize),
    max_rounds: usize,
) -> Result<BeamDesignResult> {
    if max_rounds == 0 {
        return Err(Error::Config("alternating search needs at least one round".into()));
    }
    let (mut i, mut j) = start;
    if i >= space.tx.len() || j >= space.rx.len() {
        return Err(Error::Input(format!("start pair ({i}, {j}) outside the candidate sets")));
    }
    let scored = Scored::new(space, ctx)?;
    let mut current = scored.sum_se(space, i, j);
    let mut evaluations = 1u64;
    let mut trace = vec![current];

    for _ in 0..max_rounds {
        let mut changed = false;

        for jj in 0..space.rx.len() {
            let s = scored.sum_se(space, i, jj);
            evaluations += 1;
            if s > current {
                current = s;
                j = jj;
                changed = true;
            }
        }
        trace.push(current);

        for ii in 0..space.tx.len() {
            let s = scored.sum_se(space, ii, j);
            evaluations += 1;
            if s > current {
                current = s;
                i = ii;
                changed = true;
            }
        }
        trace.push(current);

        if !changed {
            break;
        }
    }
    Ok(result(space, Best { sum: current, i, j }, evaluations, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::{ArrayGeometry, Direction};
    use crate::channels::{los_user_channel, rayleigh_si_channel, CrossLinkChannel, SiChannel, UserChannel};
    use crate::fd_link::LinkPowers;
    use crate::link_math::{rate_fd, LinkInrs, LinkSnrs};
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_instance(seed: u64, n: usize) -> LinkContext {
        let g = ArrayGeometry::ula(n, 0.5).unwrap();
        let az_t = -50.0 + (seed % 7) as f64 * 15.0;
        let az_r = 40.0 - (seed % 5) as f64 * 20.0;
        LinkContext::new(
            los_user_channel(&g, &Direction::azimuth(az_t).unwrap(), 0.0),
            los_user_channel(&g, &Direction::azimuth(az_r).unwrap(), 0.0),
            CrossLinkChannel { coefficient: c(0.0, 0.0) },
            rayleigh_si_channel(n, n, seed).scaled_db(10.0),
            LinkPowers::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_pair_is_returned() {
        let ctx = random_instance(1, 4);
        let b = BeamWeights::from_slice(&[c(1.0, 0.0); 4]);
        let space = BeamSearchSpace::new(vec![b.clone()], vec![b.clone()]).unwrap();
        let r = exhaustive_beam_search(&space, &ctx).unwrap();
        assert_eq!((r.tx_index, r.rx_index, r.evaluations), (0, 0, 1));
        assert_eq!(r.f, b);
    }

    #[test]
    fn spatial_null_wins_when_si_dominates() {
        // H = 1000·I; downlink user broadside, uplink user with h_rx = [1, j].
        let user_tx = UserChannel {
            coefficients: DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]),
            description: String::new(),
        };
        let user_rx = UserChannel {
            coefficients: DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]),
            description: String::new(),
        };
        let ctx = LinkContext::new(
            user_tx,
            user_rx,
            CrossLinkChannel { coefficient: c(0.0, 0.0) },
            SiChannel::custom(DMatrix::identity(2, 2) * c(1000.0, 0.0)).unwrap(),
            LinkPowers::default(),
        )
        .unwrap();
        let plus = BeamWeights::from_slice(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let minus = BeamWeights::from_slice(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let space = BeamSearchSpace::new(vec![plus.clone(), minus.clone()], vec![plus, minus]).unwrap();

        // Hand enumeration: snr_tx(+) = 4, snr_tx(-) = 0; snr_rx = 2 for both w;
        // inr_rx = 4e6 when f = w, 0 otherwise.
        let table = [
            rate_fd(LinkSnrs { snr_tx: 4.0, snr_rx: 2.0 }, LinkInrs { inr_tx: 0.0, inr_rx: 4e6 }).sum(),
            rate_fd(LinkSnrs { snr_tx: 4.0, snr_rx: 2.0 }, LinkInrs::NONE).sum(),
            rate_fd(LinkSnrs { snr_tx: 0.0, snr_rx: 2.0 }, LinkInrs::NONE).sum(),
            rate_fd(LinkSnrs { snr_tx: 0.0, snr_rx: 2.0 }, LinkInrs { inr_tx: 0.0, inr_rx: 4e6 }).sum(),
        ];
        let best = argmax_first(&table);
        assert_eq!(best, 1);
        let r = exhaustive_beam_search(&space, &ctx).unwrap();
        assert_eq!((r.tx_index, r.rx_index), (0, 1));
        assert!((r.sum_se - table[1]).abs() < 1e-12);
        assert_eq!(r.evaluations, 4);
    }

    #[test]
    fn budget_is_enforced() {
        let ctx = random_instance(2, 4);
        let set = enumerate_phase_only(4, &PhaseShifterSpec::phase_only(2).unwrap()).unwrap();
        let space = BeamSearchSpace::new(set.clone(), set).unwrap();
        assert!(matches!(
            exhaustive_beam_search_with_budget(&space, &ctx, 100),
            Err(Error::BudgetExceeded { size: 4096, budget: 100 })
        ));
    }

    #[test]
    fn enumeration_is_complete_and_realizable() {
        let spec = PhaseShifterSpec::phase_only(2).unwrap();
        let set = enumerate_phase_only(4, &spec).unwrap();
        assert_eq!(set.len(), 64);
        let mut keys: Vec<Vec<i64>> = set
            .iter()
            .map(|b| b.as_vector().iter().map(|z| (z.arg() * 1e6).round() as i64).collect())
            .collect();
        keys.dedup();
        assert_eq!(keys.len(), 64);
    }

    #[test]
    fn alternating_fixed_point_at_optimum() {
        let ctx = random_instance(3, 4);
        let set = enumerate_phase_only(4, &PhaseShifterSpec::phase_only(2).unwrap()).unwrap();
        let space = BeamSearchSpace::new(set.clone(), set).unwrap();
        let opt = exhaustive_beam_search(&space, &ctx).unwrap();
        let alt = alternating_beam_search_from(&space, &ctx, (opt.tx_index, opt.rx_index), 10).unwrap();
        assert_eq!((alt.tx_index, alt.rx_index), (opt.tx_index, opt.rx_index));
        assert_eq!(alt.sum_se, opt.sum_se);
        assert_eq!(alt.trace.len(), 3);
    }

    #[test]
    fn alternating_bounded_and_monotone() {
        let spec = PhaseShifterSpec::phase_only(2).unwrap();
        let set = enumerate_phase_only(4, &spec).unwrap();
        let space = BeamSearchSpace::new(set.clone(), set).unwrap();
        for seed in 0..20 {
            let ctx = random_instance(seed, 4);
            let opt = exhaustive_beam_search(&space, &ctx).unwrap();
            let alt = alternating_beam_search(&space, &ctx, 50).unwrap();
            assert!(alt.sum_se <= opt.sum_se);
            assert!(alt.trace.windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(*alt.trace.last().unwrap(), alt.sum_se);
        }
    }

    #[test]
    fn deterministic() {
        let ctx = random_instance(4, 4);
        let set = enumerate_phase_only(4, &PhaseShifterSpec::phase_only(2).unwrap()).unwrap();
        let space = BeamSearchSpace::new(set.clone(), set).unwrap();
        assert_eq!(exhaustive_beam_search(&space, &ctx).unwrap(), exhaustive_beam_search(&space, &ctx).unwrap());
        assert_eq!(
            alternating_beam_search(&space, &ctx, 20).unwrap(),
            alternating_beam_search(&space, &ctx, 20).unwrap()
        );
        assert!(alternating_beam_search(&space, &ctx, 0).is_err());
    }
}
