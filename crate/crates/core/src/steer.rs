//! STEER: measurement-driven selection of a transmit/receive beam pair with
//! low self-interference near an initial (beam-alignment) selection.
//!
//! Candidates are the initial directions shifted by offsets on an
//! azimuth/elevation lattice. Among all pairs whose measured INR is at most
//! `max(target, minimum INR over the whole neighborhood)`, the pair with the
//! smallest sub-neighborhood radius `Δϑ² + Δφ²` wins; ties go to the
//! earliest transmit offset, then the earliest receive offset, in the order
//! of [`neighborhood_offsets`].

use std::collections::HashMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::arrays::{steering_vector, wrap_degrees, ArrayGeometry, Direction, WeightSet};
use crate::error::{Error, Result};
use crate::fd_link::LinkContext;
use crate::seed::{derive_seed, rng_from_seed};
use crate::units::lin_to_db_floored;

/// Size `(Δθ, Δφ)` and resolution `(δθ, δφ)` of a spatial neighborhood, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodSpec {
    pub delta_theta_deg: f64,
    pub delta_phi_deg: f64,
    pub res_theta_deg: f64,
    pub res_phi_deg: f64,
}

impl NeighborhoodSpec {
    pub fn new(delta_theta_deg: f64, delta_phi_deg: f64, res_theta_deg: f64, res_phi_deg: f64) -> Result<Self> {
        let spec = Self {
            delta_theta_deg,
            delta_phi_deg,
            res_theta_deg,
            res_phi_deg,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, size, res) in [
            ("azimuth", self.delta_theta_deg, self.res_theta_deg),
            ("elevation", self.delta_phi_deg, self.res_phi_deg),
        ] {
            if !(size.is_finite() && size >= 0.0) {
                return Err(Error::Config(format!("{name} neighborhood size must be ≥ 0, got {size}")));
            }
            if !(res.is_finite() && res > 0.0) {
                return Err(Error::Config(format!("{name} resolution must be > 0, got {res}")));
            }
            if size > 0.0 && res > size {
                return Err(Error::Config(format!(
                    "{name} resolution {res}° exceeds the neighborhood size {size}°"
                )));
            }
        }
        Ok(())
    }

    fn half_widths(&self) -> (i64, i64) {
        (
            (self.delta_theta_deg / self.res_theta_deg).floor() as i64,
            (self.delta_phi_deg / self.res_phi_deg).floor() as i64,
        )
    }

    pub fn n_offsets(&self) -> usize {
        let (a, e) = self.half_widths();
        ((2 * a + 1) * (2 * e + 1)) as usize
    }
}

/// A lattice offset `(m·δθ, n·δφ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offset {
    pub m: i64,
    pub n: i64,
    pub d_theta_deg: f64,
    pub d_phi_deg: f64,
}

/// The product neighborhood, sorted by `(dθ² + dφ², dθ, dφ)`; the first
/// entry is always `(0, 0)`.
pub fn neighborhood_offsets(spec: &NeighborhoodSpec) -> Vec<Offset> {
    let (a, e) = spec.half_widths();
    let mut offsets: Vec<Offset> = (-a..=a)
        .flat_map(|m| {
            (-e..=e).map(move |n| Offset {
                m,
                n,
                d_theta_deg: m as f64 * spec.res_theta_deg,
                d_phi_deg: n as f64 * spec.res_phi_deg,
            })
        })
        .collect();
    offsets.sort_by(|x, y| {
        let rx = x.d_theta_deg.powi(2) + x.d_phi_deg.powi(2);
        let ry = y.d_theta_deg.powi(2) + y.d_phi_deg.powi(2);
        rx.total_cmp(&ry)
            .then(x.d_theta_deg.total_cmp(&y.d_theta_deg))
            .then(x.d_phi_deg.total_cmp(&y.d_phi_deg))
    });
    offsets
}

/// Source of receive-link INR measurements, in dB.
pub trait InrMeasurer {
    fn measure(&mut self, tx: &Direction, rx: &Direction) -> std::result::Result<f64, String>;

    /// Number of `measure` calls served so far.
    fn calls(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteerResult {
    pub tx_dir: Direction,
    pub rx_dir: Direction,
    pub tx_offset: Offset,
    pub rx_offset: Offset,
    pub inr_db: f64,
    /// INR of the initial pair (always the first measurement).
    pub initial_inr_db: f64,
    /// Sub-neighborhood radius `(Δϑ, Δφ)` in degrees.
    pub deviation: (f64, f64),
    pub measurements_used: usize,
    pub met_target: bool,
}

impl SteerResult {
    pub fn deviation_norm(&self) -> f64 {
        self.deviation.0.hypot(self.deviation.1)
    }
}

struct Problem<'a> {
    initial_tx: Direction,
    initial_rx: Direction,
    spec: &'a NeighborhoodSpec,
    offsets: Vec<Offset>,
}

impl<'a> Problem<'a> {
    fn new(initial_tx: Direction, initial_rx: Direction, spec: &'a NeighborhoodSpec, target: f64) -> Result<Self> {
        spec.validate()?;
        if target.is_nan() {
            return Err(Error::Input("INR target must not be NaN".into()));
        }
        Ok(Self {
            initial_tx,
            initial_rx,
            spec,
            offsets: neighborhood_offsets(spec),
        })
    }

    fn radius(&self, t: usize, r: usize) -> (f64, f64) {
        let (ot, or) = (self.offsets[t], self.offsets[r]);
        (
            ot.m.abs().max(or.m.abs()) as f64 * self.spec.res_theta_deg,
            ot.n.abs().max(or.n.abs()) as f64 * self.spec.res_phi_deg,
        )
    }

    fn cost(&self, t: usize, r: usize) -> f64 {
        let (a, e) = self.radius(t, r);
        a * a + e * e
    }

    /// All pairs ordered by `(cost, tx index, rx index)`.
    fn ordered_pairs(&self) -> Vec<(usize, usize)> {
        let k = self.offsets.len();
        let mut pairs: Vec<(usize, usize)> = (0..k).flat_map(|t| (0..k).map(move |r| (t, r))).collect();
        pairs.sort_by(|&(t1, r1), &(t2, r2)| {
            self.cost(t1, r1).total_cmp(&self.cost(t2, r2)).then((t1, r1).cmp(&(t2, r2)))
        });
        pairs
    }

    fn dirs(&self, t: usize, r: usize) -> (Direction, Direction) {
        let (ot, or) = (self.offsets[t], self.offsets[r]);
        (
            self.initial_tx.offset(ot.d_theta_deg, ot.d_phi_deg),
            self.initial_rx.offset(or.d_theta_deg, or.d_phi_deg),
        )
    }

    fn measure(
        &self,
        measurer: &mut dyn InrMeasurer,
        cache: &mut HashMap<(usize, usize), f64>,
        t: usize,
        r: usize,
    ) -> Result<f64> {
        if let Some(&v) = cache.get(&(t, r)) {
            return Ok(v);
        }
        let (dt, dr) = self.dirs(t, r);
        let v = measurer.measure(&dt, &dr).map_err(|message| Error::Measurement {
            message,
            measurements_used: cache.len(),
        })?;
        if v.is_nan() {
            return Err(Error::Measurement {
                message: "measurer returned NaN".into(),
                measurements_used: cache.len() + 1,
            });
        }
        cache.insert((t, r), v);
        Ok(v)
    }

    fn result(&self, t: usize, r: usize, cache: &HashMap<(usize, usize), f64>, target: f64) -> SteerResult {
        let (tx_dir, rx_dir) = self.dirs(t, r);
        let inr_db = cache[&(t, r)];
        SteerResult {
            tx_dir,
            rx_dir,
            tx_offset: self.offsets[t],
            rx_offset: self.offsets[r],
            inr_db,
            initial_inr_db: cache[&(0, 0)],
            deviation: self.radius(t, r),
            measurements_used: cache.len(),
            met_target: inr_db <= target,
        }
    }
}

/// Expanding-radius search with early stop.
///
/// Pairs are measured in increasing sub-neighborhood radius (then by the
/// tie-break order) and the first pair meeting the target is returned. When
/// no pair meets it, the whole neighborhood has been measured and the
/// minimum-INR pair closest to the initial selection is returned.
pub fn steer_select(
    initial_tx: Direction,
    initial_rx: Direction,
    spec: &NeighborhoodSpec,
    target_inr_db: f64,
    measurer: &mut dyn InrMeasurer,
) -> Result<SteerResult> {
    let problem = Problem::new(initial_tx, initial_rx, spec, target_inr_db)?;
    let pairs = problem.ordered_pairs();
    let mut cache = HashMap::with_capacity(pairs.len());
    for &(t, r) in &pairs {
        if problem.measure(measurer, &mut cache, t, r)? <= target_inr_db {
            return Ok(problem.result(t, r, &cache, target_inr_db));
        }
    }
    let inr_min = cache.values().copied().fold(f64::INFINITY, f64::min);
    let &(t, r) = pairs
        .iter()
        .find(|p| cache[p] <= inr_min)
        .expect("the minimum is attained");
    Ok(problem.result(t, r, &cache, target_inr_db))
}

/// Exhaustive oracle: measure every pair, then solve the selection problem
/// by enumeration with the same tie-break.
pub fn brute_force_steer(
    initial_tx: Direction,
    initial_rx: Direction,
    spec: &NeighborhoodSpec,
    target_inr_db: f64,
    measurer: &mut dyn InrMeasurer,
) -> Result<SteerResult> {
    let problem = Problem::new(initial_tx, initial_rx, spec, target_inr_db)?;
    let k = problem.offsets.len();
    let mut cache = HashMap::with_capacity(k * k);
    for t in 0..k {
        for r in 0..k {
            problem.measure(measurer, &mut cache, t, r)?;
        }
    }
    let inr_min = cache.values().copied().fold(f64::INFINITY, f64::min);
    let threshold = target_inr_db.max(inr_min);
    let mut best: Option<(f64, usize, usize)> = None;
    for t in 0..k {
        for r in 0..k {
            if cache[&(t, r)] > threshold {
                continue;
            }
            let c = problem.cost(t, r);
            if best.is_none_or(|(bc, _, _)| c < bc) {
                best = Some((c, t, r));
            }
        }
    }
    let (_, t, r) = best.expect("the minimum-INR pair is always feasible");
    Ok(problem.result(t, r, &cache, target_inr_db))
}

/// Measured (or synthetic) INR values over a neighborhood, indexed by
/// `(tx offset, rx offset)` in [`neighborhood_offsets`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct InrMap {
    spec: NeighborhoodSpec,
    offsets: Vec<Offset>,
    values: Vec<f64>,
}

pub const INR_MAP_HEADER: &str = "tx_dtheta,tx_dphi,rx_dtheta,rx_dphi,inr_db";

impl InrMap {
    /// `values[t * K + r]` is the INR for tx offset `t` and rx offset `r`.
    pub fn new(spec: NeighborhoodSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let offsets = neighborhood_offsets(&spec);
        let k = offsets.len();
        if values.len() != k * k {
            return Err(Error::Dimension {
                context: "INR map entries vs neighborhood pairs",
                expected: k * k,
                actual: values.len(),
            });
        }
        Ok(Self { spec, offsets, values })
    }

    pub fn from_fn(spec: NeighborhoodSpec, mut f: impl FnMut(&Offset, &Offset) -> f64) -> Result<Self> {
        let offsets = neighborhood_offsets(&spec);
        let values = offsets
            .iter()
            .flat_map(|t| offsets.iter().map(move |r| (t, r)))
            .map(|(t, r)| f(t, r))
            .collect();
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &NeighborhoodSpec {
        &self.spec
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn get(&self, tx_offset: usize, rx_offset: usize) -> f64 {
        self.values[tx_offset * self.offsets.len() + rx_offset]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn index_of(&self, d_theta: f64, d_phi: f64) -> Option<usize> {
        let m = (d_theta / self.spec.res_theta_deg).round() as i64;
        let n = (d_phi / self.spec.res_phi_deg).round() as i64;
        let on_lattice = (m as f64 * self.spec.res_theta_deg - d_theta).abs() < 1e-6
            && (n as f64 * self.spec.res_phi_deg - d_phi).abs() < 1e-6;
        if !on_lattice {
            return None;
        }
        self.offsets.iter().position(|o| o.m == m && o.n == n)
    }

    /// CSV with [`INR_MAP_HEADER`], rows in tx-major offset order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(INR_MAP_HEADER);
        out.push('\n');
        for (t, ot) in self.offsets.iter().enumerate() {
            for (r, or) in self.offsets.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    crate::report::fmt_f64(ot.d_theta_deg),
                    crate::report::fmt_f64(ot.d_phi_deg),
                    crate::report::fmt_f64(or.d_theta_deg),
                    crate::report::fmt_f64(or.d_phi_deg),
                    crate::report::fmt_f64(self.get(t, r)),
                ));
            }
        }
        out
    }

    /// Parse a CSV grid; every pair of the neighborhood must appear once.
    pub fn from_csv(text: &str, spec: NeighborhoodSpec) -> Result<Self> {
        spec.validate()?;
        let offsets = neighborhood_offsets(&spec);
        let k = offsets.len();
        let mut values = vec![f64::NAN; k * k];
        let probe = Self {
            spec,
            offsets,
            values: Vec::new(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == INR_MAP_HEADER => {}
            _ => return Err(Error::Input(format!("INR map must start with header `{INR_MAP_HEADER}`"))),
        }
        for (lineno, line) in lines {
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| crate::report::parse_f64(s.trim()))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Input(format!("line {}: malformed number", lineno + 1)))?;
            if fields.len() != 5 {
                return Err(Error::Input(format!("line {}: expected 5 fields", lineno + 1)));
            }
            let (t, r) = match (probe.index_of(fields[0], fields[1]), probe.index_of(fields[2], fields[3])) {
                (Some(t), Some(r)) => (t, r),
                _ => return Err(Error::Input(format!("line {}: offset outside the neighborhood", lineno + 1))),
            };
            let slot = &mut values[t * k + r];
            if !slot.is_nan() {
                return Err(Error::Input(format!("line {}: duplicate pair", lineno + 1)));
            }
            *slot = fields[4];
        }
        if let Some(missing) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Input(format!(
                "INR map is missing pair ({}, {})",
                missing / k,
                missing % k
            )));
        }
        Self::new(spec, values)
    }
}

/// Serves an [`InrMap`] relative to fixed initial directions.
#[derive(Debug, Clone)]
pub struct MapMeasurer {
    initial_tx: Direction,
    initial_rx: Direction,
    map: InrMap,
    calls: usize,
}

impl MapMeasurer {
    pub fn new(initial_tx: Direction, initial_rx: Direction, map: InrMap) -> Self {
        Self {
            initial_tx,
            initial_rx,
            map,
            calls: 0,
        }
    }
}

fn relative(dir: &Direction, origin: &Direction) -> (f64, f64) {
    (
        wrap_degrees(dir.azimuth_deg - origin.azimuth_deg),
        dir.elevation_deg - origin.elevation_deg,
    )
}

impl InrMeasurer for MapMeasurer {
    fn measure(&mut self, tx: &Direction, rx: &Direction) -> std::result::Result<f64, String> {
        let (tt, tp) = relative(tx, &self.initial_tx);
        let (rt, rp) = relative(rx, &self.initial_rx);
        let t = self.map.index_of(tt, tp).ok_or_else(|| format!("tx offset ({tt}, {tp}) not in map"))?;
        let r = self.map.index_of(rt, rp).ok_or_else(|| format!("rx offset ({rt}, {rp}) not in map"))?;
        self.calls += 1;
        Ok(self.map.get(t, r))
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

/// Large-scale INR as a function of the steering directions.
pub enum InrSurface {
    /// Direction-independent INR in dB.
    Flat(f64),
    /// INR of the SI channel between matched beams toward the two directions.
    Beamformed(BeamformedSurface),
}

impl InrSurface {
    fn inr_db(&mut self, tx: &Direction, rx: &Direction) -> f64 {
        match self {
            InrSurface::Flat(v) => *v,
            InrSurface::Beamformed(s) => s.inr_db(tx, rx),
        }
    }
}

type DirKey = (i64, i64);

fn dir_key(d: &Direction) -> DirKey {
    ((d.azimuth_deg * 1e9).round() as i64, (d.elevation_deg * 1e9).round() as i64)
}

/// INR surface from a link context: the transmit beam is the matched beam
/// toward `tx` and the receive beam the matched beam toward `rx`, both
/// projected onto the realizable set.
pub struct BeamformedSurface {
    ctx: LinkContext,
    tx_geometry: ArrayGeometry,
    rx_geometry: ArrayGeometry,
    set: WeightSet,
    hf_cache: HashMap<DirKey, DVector<Complex64>>,
}

impl BeamformedSurface {
    pub fn new(ctx: LinkContext, tx_geometry: ArrayGeometry, rx_geometry: ArrayGeometry, set: WeightSet) -> Result<Self> {
        crate::error::check_len("tx geometry vs SI channel", ctx.n_tx(), tx_geometry.n_elements())?;
        crate::error::check_len("rx geometry vs SI channel", ctx.n_rx(), rx_geometry.n_elements())?;
        Ok(Self {
            ctx,
            tx_geometry,
            rx_geometry,
            set,
            hf_cache: HashMap::new(),
        })
    }

    pub fn tx_beam(&self, dir: &Direction) -> DVector<Complex64> {
        self.set.project(&steering_vector(&self.tx_geometry, dir)).weights.into_vector()
    }

    pub fn rx_beam(&self, dir: &Direction) -> DVector<Complex64> {
        self.set.project(&steering_vector(&self.rx_geometry, dir)).weights.into_vector()
    }

    pub fn context(&self) -> &LinkContext {
        &self.ctx
    }

    pub fn inr_db(&mut self, tx: &Direction, rx: &Direction) -> f64 {
        let key = dir_key(tx);
        if !self.hf_cache.contains_key(&key) {
            let hf = &self.ctx.si.matrix * self.tx_beam(tx);
            self.hf_cache.insert(key, hf);
        }
        let w = self.rx_beam(rx);
        lin_to_db_floored(self.ctx.inr_rx_from_hf(&self.hf_cache[&key], &w))
    }
}

/// Simulated measurements: a large-scale surface plus an i.i.d. Gaussian
/// (in dB) small-scale term per direction pair. The small-scale draw for a
/// pair depends only on the seed and the pair, and results are cached, so
/// the measurer is deterministic regardless of query order.
pub struct SimulatedMeasurer {
    surface: InrSurface,
    sigma_db: f64,
    seed: u64,
    cache: HashMap<(DirKey, DirKey), f64>,
    calls: usize,
}

pub fn simulated_measurer(surface: InrSurface, sigma_small_scale_db: f64, seed: u64) -> Result<SimulatedMeasurer> {
    if !(sigma_small_scale_db.is_finite() && sigma_small_scale_db >= 0.0) {
        return Err(Error::Config(format!(
            "small-scale sigma must be ≥ 0, got {sigma_small_scale_db}"
        )));
    }
    Ok(SimulatedMeasurer {
        surface,
        sigma_db: sigma_small_scale_db,
        seed,
        cache: HashMap::new(),
        calls: 0,
    })
}

impl SimulatedMeasurer {
    fn small_scale(&self, key: &(DirKey, DirKey)) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let label = format!("{}:{}:{}:{}", key.0 .0, key.0 .1, key.1 .0, key.1 .1);
        let z: f64 = rng_from_seed(derive_seed(self.seed, &label)).sample(StandardNormal);
        self.sigma_db * z
    }

    pub fn surface(&self) -> &InrSurface {
        &self.surface
    }
}

impl InrMeasurer for SimulatedMeasurer {
    fn measure(&mut self, tx: &Direction, rx: &Direction) -> std::result::Result<f64, String> {
        self.calls += 1;
        let key = (dir_key(tx), dir_key(rx));
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = self.surface.inr_db(tx, rx) + self.small_scale(&key);
        self.cache.insert(key, v);
        Ok(v)
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

/// Draw a fresh random `(tx, rx)` offset-pair INR map from a generator.
pub fn random_map<R: Rng>(spec: NeighborhoodSpec, rng: &mut R, mu_db: f64, sigma_db: f64) -> Result<InrMap> {
    InrMap::from_fn(spec, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        mu_db + sigma_db * z
    })
}
