//! Declarative experiment descriptions.
//!
//! Scenario files are TOML restricted to numbers, strings, booleans and
//! number arrays, normally written as one dotted `key = value` per line
//! (`arrays.tx.rows = 4`); `[table]` headers work too. `-inf` and `inf` are
//! accepted for gains. Angles are in degrees, powers in dBm and gains in dB.
//!
//! Unknown keys and inconsistent dimensions are rejected, and every such
//! problem in a file is reported at once. The optional blocks `region`,
//! `sic`, `codebook` and `steer` exist when at least one of their keys is
//! present; unspecified keys take the defaults of [`Scenario::default`] and
//! the block `Default` impls.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use toml::Value;

use crate::arrays::{ArrayGeometry, Direction, PhaseShifterSpec, WeightSet};
use crate::channels::{
    cross_link_channel, los_user_channel, rayleigh_si_channel, spherical_wave_si_channel, ArrayPose, SiChannel,
};
use crate::error::{Error, Result};
use crate::fd_link::{LinkContext, LinkPowers};
use crate::seed::derive_seed;
use crate::steer::NeighborhoodSpec;

fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other);
            }
        }
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(f) if !f.is_nan() => Some(*f),
        _ => None,
    }
}

struct Reader {
    entries: BTreeMap<String, Value>,
    errors: Vec<String>,
}

impl Reader {
    fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Scenario(vec![e.to_string().trim_end().to_string()]))?;
        let mut entries = BTreeMap::new();
        flatten("", table, &mut entries);
        Ok(Self {
            entries,
            errors: Vec::new(),
        })
    }

    fn has_block(&self, block: &str) -> bool {
        let prefix = format!("{block}.");
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    fn type_error(&mut self, key: &str, want: &str, got: &Value) {
        self.errors
            .push(format!("{key}: expected {want}, found {} `{got}`", got.type_str()));
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        let v = self.entries.remove(key)?;
        let n = as_number(&v);
        if n.is_none() {
            self.type_error(key, "a number", &v);
        }
        n
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        self.opt_f64(key).unwrap_or(default)
    }

    fn opt_u64(&mut self, key: &str) -> Option<u64> {
        match self.entries.remove(key)? {
            Value::Integer(i) if i >= 0 => Some(i as u64),
            other => {
                self.type_error(key, "a non-negative integer", &other);
                None
            }
        }
    }

    fn opt_usize(&mut self, key: &str) -> Option<usize> {
        self.opt_u64(key).map(|v| v as usize)
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.opt_usize(key).unwrap_or(default)
    }

    fn word<T: Copy>(&mut self, key: &str, default: T, choices: &[(&str, T)]) -> T {
        match self.entries.remove(key) {
            None => default,
            Some(Value::String(s)) => match choices.iter().find(|(name, _)| *name == s) {
                Some(&(_, v)) => v,
                None => {
                    let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
                    self.errors
                        .push(format!("{key}: \"{s}\" is not one of {}", names.join(", ")));
                    default
                }
            },
            Some(other) => {
                self.type_error(key, "a string", &other);
                default
            }
        }
    }

    fn list(&mut self, key: &str, default: Vec<f64>) -> Vec<f64> {
        match self.entries.remove(key) {
            None => default,
            Some(Value::Array(items)) => match items.iter().map(as_number).collect::<Option<Vec<_>>>() {
                Some(v) => v,
                None => {
                    self.errors.push(format!("{key}: every element must be a number"));
                    default
                }
            },
            Some(v) => match as_number(&v) {
                Some(x) => vec![x],
                None => {
                    self.type_error(key, "an array of numbers", &v);
                    default
                }
            },
        }
    }

    fn finish(mut self) -> Vec<String> {
        for key in std::mem::take(&mut self.entries).into_keys() {
            self.errors.push(format!("{key}: unknown key"));
        }
        self.errors
    }
}

/// Planar array with `rows × cols` elements (a ULA when `rows = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArraySpec {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            spacing: 0.5,
        }
    }
}

impl ArraySpec {
    pub fn n_elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::upa(self.rows, self.cols, self.spacing)
    }
}

/// Placement of the receive array relative to the transmit array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSpec {
    pub translation: [f64; 3],
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

impl Default for PoseSpec {
    fn default() -> Self {
        let t = ArrayPose::default().translation;
        Self {
            translation: [t.x, t.y, t.z],
            roll_deg: 0.0,
            pitch_deg: 0.0,
            yaw_deg: 0.0,
        }
    }
}

impl PoseSpec {
    pub fn pose(&self) -> ArrayPose {
        let [x, y, z] = self.translation;
        ArrayPose::from_euler_deg(Vector3::new(x, y, z), self.roll_deg, self.pitch_deg, self.yaw_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiModelKind {
    SphericalWave,
    Rayleigh,
    /// `min(N_rx, N_tx)` unit couplings on the diagonal.
    Identity,
    Zero,
}

const SI_MODELS: &[(&str, SiModelKind)] = &[
    ("spherical_wave", SiModelKind::SphericalWave),
    ("rayleigh", SiModelKind::Rayleigh),
    ("identity", SiModelKind::Identity),
    ("zero", SiModelKind::Zero),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiSpec {
    pub model: SiModelKind,
    /// Spherical-wave amplitude constant.
    pub rho: f64,
    /// Extra gain applied to the whole matrix.
    pub gain_db: f64,
}

impl Default for SiSpec {
    fn default() -> Self {
        Self {
            model: SiModelKind::SphericalWave,
            rho: 1.0,
            gain_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSpec {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub gain_db: f64,
}

impl Default for UserSpec {
    fn default() -> Self {
        Self {
            azimuth_deg: 0.0,
            elevation_deg: 0.0,
            gain_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub si: SiSpec,
    pub tx_user: UserSpec,
    pub rx_user: UserSpec,
    pub cross_link_gain_db: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            si: SiSpec::default(),
            tx_user: UserSpec::default(),
            rx_user: UserSpec::default(),
            cross_link_gain_db: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseShifterMode {
    UnitModulus,
    Quantized,
}

const PS_MODES: &[(&str, PhaseShifterMode)] = &[
    ("unit_modulus", PhaseShifterMode::UnitModulus),
    ("quantized", PhaseShifterMode::Quantized),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShifterConfig {
    pub mode: PhaseShifterMode,
    pub phase_bits: u32,
    pub amplitude_bits: u32,
}

impl Default for PhaseShifterConfig {
    fn default() -> Self {
        Self {
            mode: PhaseShifterMode::UnitModulus,
            phase_bits: 6,
            amplitude_bits: 0,
        }
    }
}

impl PhaseShifterConfig {
    pub fn weight_set(&self) -> WeightSet {
        match self.mode {
            PhaseShifterMode::UnitModulus => WeightSet::UnitModulus,
            PhaseShifterMode::Quantized => WeightSet::Quantized(PhaseShifterSpec {
                phase_bits: self.phase_bits,
                amplitude_bits: self.amplitude_bits,
                amplitude_levels_db: None,
            }),
        }
    }
}

/// Rate-region sweep: TDD and FDD boundaries plus one full-duplex corner
/// per `(inr_tx_db[i], inr_rx_db[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub snr_tx_db: f64,
    pub snr_rx_db: f64,
    pub inr_tx_db: Vec<f64>,
    pub inr_rx_db: Vec<f64>,
    pub n_points: usize,
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self {
            snr_tx_db: 10.0,
            snr_rx_db: 10.0,
            inr_tx_db: vec![f64::NEG_INFINITY, 0.0],
            inr_rx_db: vec![f64::NEG_INFINITY, 0.0],
            n_points: 101,
        }
    }
}

/// Analog SIC fit. The SI impulse response has tap `k` at sample `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SicSpec {
    pub n_taps: usize,
    pub tap_delay_samples: f64,
    pub samples: usize,
    pub noise_std: f64,
    pub channel_taps_re: Vec<f64>,
    pub channel_taps_im: Vec<f64>,
}

impl Default for SicSpec {
    fn default() -> Self {
        Self {
            n_taps: 8,
            tap_delay_samples: 1.0,
            samples: 64,
            noise_std: 0.0,
            channel_taps_re: vec![1.0, 0.5, -0.25, 0.1],
            channel_taps_im: vec![0.0, 0.2, 0.1, -0.05],
        }
    }
}

impl SicSpec {
    pub fn channel_taps(&self) -> Vec<Complex64> {
        self.channel_taps_re
            .iter()
            .zip(&self.channel_taps_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }
}

/// Joint codebook design over an azimuth grid at fixed elevation.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSpec {
    pub n_beams: usize,
    pub min_az_deg: f64,
    pub max_az_deg: f64,
    pub elevation_deg: f64,
    pub sigma2_tx: f64,
    pub sigma2_rx: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    /// Optional declared array sizes, checked against `arrays`.
    pub tx_n_elements: Option<usize>,
    pub rx_n_elements: Option<usize>,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        Self {
            n_beams: 8,
            min_az_deg: -60.0,
            max_az_deg: 60.0,
            elevation_deg: 0.0,
            sigma2_tx: 0.1,
            sigma2_rx: 0.1,
            max_iters: 200,
            tolerance: 1e-6,
            tx_n_elements: None,
            rx_n_elements: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteerSurfaceKind {
    /// Direction-independent mean INR (`flat_inr_db`).
    Flat,
    /// INR of the scenario's SI channel between matched beams.
    Beamformed,
}

const SURFACES: &[(&str, SteerSurfaceKind)] = &[
    ("flat", SteerSurfaceKind::Flat),
    ("beamformed", SteerSurfaceKind::Beamformed),
];

/// Monte-Carlo STEER trials. Each trial draws both initial directions
/// uniformly in azimuth from `[min_az_deg, max_az_deg]` at `elevation_deg`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteerSpec {
    pub delta_theta_deg: f64,
    pub delta_phi_deg: f64,
    pub res_theta_deg: f64,
    pub res_phi_deg: f64,
    /// `-inf` means pure minimization.
    pub target_inr_db: f64,
    pub small_scale_sigma_db: f64,
    pub trials: usize,
    pub surface: SteerSurfaceKind,
    pub flat_inr_db: f64,
    pub min_az_deg: f64,
    pub max_az_deg: f64,
    pub elevation_deg: f64,
    /// Draws for the order-statistic reference median (flat surface only).
    pub oracle_samples: usize,
}

impl Default for SteerSpec {
    fn default() -> Self {
        Self {
            delta_theta_deg: 2.0,
            delta_phi_deg: 2.0,
            res_theta_deg: 1.0,
            res_phi_deg: 1.0,
            target_inr_db: f64::NEG_INFINITY,
            small_scale_sigma_db: 10.0,
            trials: 100,
            surface: SteerSurfaceKind::Flat,
            flat_inr_db: 20.0,
            min_az_deg: -60.0,
            max_az_deg: 60.0,
            elevation_deg: 0.0,
            oracle_samples: 20_000,
        }
    }
}

impl SteerSpec {
    pub fn neighborhood(&self) -> Result<NeighborhoodSpec> {
        NeighborhoodSpec::new(self.delta_theta_deg, self.delta_phi_deg, self.res_theta_deg, self.res_phi_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub master_seed: Option<u64>,
    pub tx: ArraySpec,
    pub rx: ArraySpec,
    pub pose: PoseSpec,
    pub channel: ChannelSpec,
    pub budget: LinkPowers,
    pub phase_shifter: PhaseShifterConfig,
    pub region: Option<RegionSpec>,
    pub sic: Option<SicSpec>,
    pub codebook: Option<CodebookSpec>,
    pub steer: Option<SteerSpec>,
}

fn read_array(r: &mut Reader, side: &str, errors: &mut Vec<String>) -> ArraySpec {
    let d = ArraySpec::default();
    let rows = r.opt_usize(&format!("arrays.{side}.rows"));
    let cols = r.opt_usize(&format!("arrays.{side}.cols"));
    let n = r.opt_usize(&format!("arrays.{side}.n_elements"));
    let spacing = r.f64(&format!("arrays.{side}.spacing"), d.spacing);
    let (rows, cols) = match (rows, cols, n) {
        (None, None, Some(n)) => (1, n),
        (rows, cols, n) => {
            let (rows, cols) = (rows.unwrap_or(d.rows), cols.unwrap_or(d.cols));
            if let Some(n) = n.filter(|&n| n != rows * cols) {
                errors.push(format!(
                    "arrays.{side}.n_elements: declares {n} elements but rows × cols = {}",
                    rows * cols
                ));
            }
            (rows, cols)
        }
    };
    ArraySpec { rows, cols, spacing }
}

fn read_user(r: &mut Reader, side: &str) -> UserSpec {
    let d = UserSpec::default();
    UserSpec {
        azimuth_deg: r.f64(&format!("channel.{side}_user.azimuth_deg"), d.azimuth_deg),
        elevation_deg: r.f64(&format!("channel.{side}_user.elevation_deg"), d.elevation_deg),
        gain_db: r.f64(&format!("channel.{side}_user.gain_db"), d.gain_db),
    }
}

/// Parse and validate scenario text, reporting every problem found.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    load_scenario_with_seed(text, None)
}

/// [`load_scenario`] with the master seed replaced by `seed_override`.
pub fn load_scenario_with_seed(text: &str, seed_override: Option<u64>) -> Result<Scenario> {
    let mut r = Reader::parse(text)?;
    let mut errors = Vec::new();

    let master_seed = r.opt_u64("master_seed");
    let master_seed = seed_override.or(master_seed);
    let tx = read_array(&mut r, "tx", &mut errors);
    let rx = read_array(&mut r, "rx", &mut errors);

    let dp = PoseSpec::default();
    let t = r.list("arrays.pose.translation", dp.translation.to_vec());
    let translation = match <[f64; 3]>::try_from(t.as_slice()) {
        Ok(t) => t,
        Err(_) => {
            errors.push(format!("arrays.pose.translation: expected 3 coordinates, got {}", t.len()));
            dp.translation
        }
    };
    let pose = PoseSpec {
        translation,
        roll_deg: r.f64("arrays.pose.roll_deg", 0.0),
        pitch_deg: r.f64("arrays.pose.pitch_deg", 0.0),
        yaw_deg: r.f64("arrays.pose.yaw_deg", 0.0),
    };

    let ds = SiSpec::default();
    let channel = ChannelSpec {
        si: SiSpec {
            model: r.word("channel.si.model", ds.model, SI_MODELS),
            rho: r.f64("channel.si.rho", ds.rho),
            gain_db: r.f64("channel.si.gain_db", ds.gain_db),
        },
        tx_user: read_user(&mut r, "tx"),
        rx_user: read_user(&mut r, "rx"),
        cross_link_gain_db: r.f64("channel.cross_link_gain_db", f64::NEG_INFINITY),
    };

    let db = LinkPowers::default();
    let budget = LinkPowers {
        p_bs_dbm: r.f64("budget.p_bs_dbm", db.p_bs_dbm),
        p_ue_dbm: r.f64("budget.p_ue_dbm", db.p_ue_dbm),
        n_bs_dbm: r.f64("budget.n_bs_dbm", db.n_bs_dbm),
        n_ue_dbm: r.f64("budget.n_ue_dbm", db.n_ue_dbm),
    };

    let dps = PhaseShifterConfig::default();
    let phase_shifter = PhaseShifterConfig {
        mode: r.word("phase_shifter.mode", dps.mode, PS_MODES),
        phase_bits: r.opt_u64("phase_shifter.bits").map_or(dps.phase_bits, |b| b as u32),
        amplitude_bits: r
            .opt_u64("phase_shifter.amplitude_bits")
            .map_or(dps.amplitude_bits, |b| b as u32),
    };

    let region = r.has_block("region").then(|| {
        let d = RegionSpec::default();
        RegionSpec {
            snr_tx_db: r.f64("region.snr_tx_db", d.snr_tx_db),
            snr_rx_db: r.f64("region.snr_rx_db", d.snr_rx_db),
            inr_tx_db: r.list("region.inr_tx_db", d.inr_tx_db),
            inr_rx_db: r.list("region.inr_rx_db", d.inr_rx_db),
            n_points: r.usize("region.n_points", d.n_points),
        }
    });

    let sic = r.has_block("sic").then(|| {
        let d = SicSpec::default();
        SicSpec {
            n_taps: r.usize("sic.n_taps", d.n_taps),
            tap_delay_samples: r.f64("sic.tap_delay_samples", d.tap_delay_samples),
            samples: r.usize("sic.samples", d.samples),
            noise_std: r.f64("sic.noise_std", d.noise_std),
            channel_taps_re: r.list("sic.channel_taps_re", d.channel_taps_re),
            channel_taps_im: r.list("sic.channel_taps_im", d.channel_taps_im),
        }
    });

    let codebook = r.has_block("codebook").then(|| {
        let d = CodebookSpec::default();
        CodebookSpec {
            n_beams: r.usize("codebook.n_beams", d.n_beams),
            min_az_deg: r.f64("codebook.min_az_deg", d.min_az_deg),
            max_az_deg: r.f64("codebook.max_az_deg", d.max_az_deg),
            elevation_deg: r.f64("codebook.elevation_deg", d.elevation_deg),
            sigma2_tx: r.f64("codebook.sigma2_tx", d.sigma2_tx),
            sigma2_rx: r.f64("codebook.sigma2_rx", d.sigma2_rx),
            max_iters: r.usize("codebook.max_iters", d.max_iters),
            tolerance: r.f64("codebook.tolerance", d.tolerance),
            tx_n_elements: r.opt_usize("codebook.tx.n_elements"),
            rx_n_elements: r.opt_usize("codebook.rx.n_elements"),
        }
    });

    let steer = r.has_block("steer").then(|| {
        let d = SteerSpec::default();
        SteerSpec {
            delta_theta_deg: r.f64("steer.delta_theta_deg", d.delta_theta_deg),
            delta_phi_deg: r.f64("steer.delta_phi_deg", d.delta_phi_deg),
            res_theta_deg: r.f64("steer.res_theta_deg", d.res_theta_deg),
            res_phi_deg: r.f64("steer.res_phi_deg", d.res_phi_deg),
            target_inr_db: r.f64("steer.target_inr_db", d.target_inr_db),
            small_scale_sigma_db: r.f64("steer.small_scale_sigma_db", d.small_scale_sigma_db),
            trials: r.usize("steer.trials", d.trials),
            surface: r.word("steer.surface", d.surface, SURFACES),
            flat_inr_db: r.f64("steer.flat_inr_db", d.flat_inr_db),
            min_az_deg: r.f64("steer.min_az_deg", d.min_az_deg),
            max_az_deg: r.f64("steer.max_az_deg", d.max_az_deg),
            elevation_deg: r.f64("steer.elevation_deg", d.elevation_deg),
            oracle_samples: r.usize("steer.oracle_samples", d.oracle_samples),
        }
    });

    let mut all = r.finish();
    all.extend(errors);
    let scenario = Scenario {
        master_seed,
        tx,
        rx,
        pose,
        channel,
        budget,
        phase_shifter,
        region,
        sic,
        codebook,
        steer,
    };
    all.extend(scenario.validation_errors());
    if all.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::Scenario(all))
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:?}")
    }
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
    format!("[{}]", items.join(", "))
}

fn name_of<T: PartialEq + Copy>(choices: &[(&'static str, T)], v: T) -> String {
    let name = choices.iter().find(|(_, c)| *c == v).map(|(n, _)| *n).expect("every variant is named");
    format!("\"{name}\"")
}

impl Scenario {
    /// Every consistency problem, each prefixed by the offending key path.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut e = Vec::new();
        for (side, a) in [("tx", &self.tx), ("rx", &self.rx)] {
            if a.rows == 0 || a.cols == 0 {
                e.push(format!("arrays.{side}: array needs at least one element"));
            }
            if !(a.spacing.is_finite() && a.spacing > 0.0) {
                e.push(format!("arrays.{side}.spacing: must be positive"));
            }
        }
        if !self.pose.translation.iter().all(|c| c.is_finite()) {
            e.push("arrays.pose.translation: coordinates must be finite".into());
        }
        if !(self.channel.si.rho.is_finite() && self.channel.si.rho >= 0.0) {
            e.push("channel.si.rho: must be finite and ≥ 0".into());
        }
        if self.channel.si.gain_db == f64::INFINITY {
            e.push("channel.si.gain_db: must be finite or -inf".into());
        }
        if self.channel.cross_link_gain_db == f64::INFINITY {
            e.push("channel.cross_link_gain_db: must be finite or -inf".into());
        }
        for (side, u) in [("tx", &self.channel.tx_user), ("rx", &self.channel.rx_user)] {
            if let Err(err) = Direction::new(u.azimuth_deg, u.elevation_deg) {
                e.push(format!("channel.{side}_user: {err}"));
            }
        }
        for (key, v) in [
            ("budget.p_bs_dbm", self.budget.p_bs_dbm),
            ("budget.p_ue_dbm", self.budget.p_ue_dbm),
            ("budget.n_bs_dbm", self.budget.n_bs_dbm),
            ("budget.n_ue_dbm", self.budget.n_ue_dbm),
        ] {
            if !v.is_finite() {
                e.push(format!("{key}: must be finite"));
            }
        }
        if let WeightSet::Quantized(spec) = self.phase_shifter.weight_set() {
            if let Err(err) = spec.validate() {
                e.push(format!("phase_shifter: {err}"));
            }
        }

        if let Some(g) = &self.region {
            if g.inr_tx_db.len() != g.inr_rx_db.len() {
                e.push(format!(
                    "region.inr_rx_db: has {} levels but region.inr_tx_db has {}",
                    g.inr_rx_db.len(),
                    g.inr_tx_db.len()
                ));
            }
            if g.n_points < 2 {
                e.push("region.n_points: need at least 2".into());
            }
            if !(g.snr_tx_db.is_finite() && g.snr_rx_db.is_finite()) {
                e.push("region: SNRs must be finite".into());
            }
        }

        if let Some(s) = &self.sic {
            if s.n_taps == 0 {
                e.push("sic.n_taps: need at least one tap".into());
            }
            if !(s.tap_delay_samples.is_finite() && s.tap_delay_samples > 0.0) {
                e.push("sic.tap_delay_samples: must be positive".into());
            } else if s.n_taps > 0 && (s.n_taps - 1) as f64 * s.tap_delay_samples >= s.samples as f64 {
                e.push(format!(
                    "sic.n_taps: {} taps spaced {} samples do not fit in {} samples",
                    s.n_taps, s.tap_delay_samples, s.samples
                ));
            }
            if s.channel_taps_re.len() != s.channel_taps_im.len() {
                e.push("sic.channel_taps_im: length differs from sic.channel_taps_re".into());
            }
            if s.channel_taps_re.len() > s.samples {
                e.push("sic.channel_taps_re: longer than sic.samples".into());
            }
            if s.channel_taps_re.iter().chain(&s.channel_taps_im).any(|v| !v.is_finite()) {
                e.push("sic.channel_taps_re: taps must be finite".into());
            }
            if !(s.noise_std.is_finite() && s.noise_std >= 0.0) {
                e.push("sic.noise_std: must be finite and ≥ 0".into());
            }
        }

        if let Some(c) = &self.codebook {
            for (side, declared, actual) in [
                ("tx", c.tx_n_elements, self.tx.n_elements()),
                ("rx", c.rx_n_elements, self.rx.n_elements()),
            ] {
                if let Some(n) = declared.filter(|&n| n != actual) {
                    e.push(format!(
                        "codebook.{side}.n_elements: dimension mismatch, codebook declares {n} elements but arrays.{side} has {actual}"
                    ));
                }
            }
            if c.n_beams == 0 {
                e.push("codebook.n_beams: need at least one beam".into());
            }
            if !(c.min_az_deg <= c.max_az_deg) {
                e.push("codebook.max_az_deg: must be ≥ codebook.min_az_deg".into());
            }
            for (key, v) in [("codebook.sigma2_tx", c.sigma2_tx), ("codebook.sigma2_rx", c.sigma2_rx)] {
                if !(v.is_finite() && v >= 0.0) {
                    e.push(format!("{key}: must be finite and ≥ 0"));
                }
            }
            if !(c.tolerance.is_finite() && c.tolerance >= 0.0) {
                e.push("codebook.tolerance: must be finite and ≥ 0".into());
            }
        }

        if let Some(s) = &self.steer {
            if let Err(err) = s.neighborhood() {
                e.push(format!("steer: {err}"));
            }
            if s.trials == 0 {
                e.push("steer.trials: need at least one trial".into());
            }
            if !(s.small_scale_sigma_db.is_finite() && s.small_scale_sigma_db >= 0.0) {
                e.push("steer.small_scale_sigma_db: must be finite and ≥ 0".into());
            }
            if !(s.min_az_deg <= s.max_az_deg) {
                e.push("steer.max_az_deg: must be ≥ steer.min_az_deg".into());
            }
            if !s.flat_inr_db.is_finite() {
                e.push("steer.flat_inr_db: must be finite".into());
            }
            if s.target_inr_db == f64::INFINITY {
                e.push("steer.target_inr_db: must be finite or -inf".into());
            }
        }

        if self.master_seed.is_none() {
            let stochastic = [
                (self.channel.si.model == SiModelKind::Rayleigh, "channel.si.model = \"rayleigh\""),
                (self.sic.as_ref().is_some_and(|s| s.noise_std > 0.0), "sic.noise_std > 0"),
                (self.steer.is_some(), "the steer block"),
            ];
            for (_, what) in stochastic.iter().filter(|(on, _)| *on) {
                e.push(format!("master_seed: required by {what}"));
            }
        }
        e
    }

    /// Seed for a named random stream.
    pub fn seed(&self, label: &str) -> Result<u64> {
        self.master_seed
            .map(|m| derive_seed(m, label))
            .ok_or_else(|| Error::Config(format!("master_seed is required for the `{label}` stream")))
    }

    pub fn tx_geometry(&self) -> Result<ArrayGeometry> {
        self.tx.geometry()
    }

    pub fn rx_geometry(&self) -> Result<ArrayGeometry> {
        self.rx.geometry()
    }

    pub fn si_channel(&self) -> Result<SiChannel> {
        let (n_rx, n_tx) = (self.rx.n_elements(), self.tx.n_elements());
        let si = &self.channel.si;
        let base = match si.model {
            SiModelKind::SphericalWave => {
                spherical_wave_si_channel(&self.tx_geometry()?, &self.rx_geometry()?, &self.pose.pose(), si.rho)?
            }
            SiModelKind::Rayleigh => rayleigh_si_channel(n_rx, n_tx, self.seed("si")?),
            SiModelKind::Identity => SiChannel::custom(DMatrix::identity(n_rx, n_tx))?,
            SiModelKind::Zero => SiChannel::zeros(n_rx, n_tx),
        };
        Ok(base.scaled_db(si.gain_db))
    }

    /// Link context with line-of-sight users toward the given directions.
    pub fn link_context_toward(&self, si: SiChannel, tx_user: Direction, rx_user: Direction) -> Result<LinkContext> {
        let c = &self.channel;
        let cross_seed = if c.cross_link_gain_db == f64::NEG_INFINITY {
            0
        } else {
            self.seed("cross-link")?
        };
        LinkContext::new(
            los_user_channel(&self.tx_geometry()?, &tx_user, c.tx_user.gain_db),
            los_user_channel(&self.rx_geometry()?, &rx_user, c.rx_user.gain_db),
            cross_link_channel(c.cross_link_gain_db, cross_seed),
            si,
            self.budget,
        )
    }

    /// Link context with the configured user directions.
    pub fn link_context(&self) -> Result<LinkContext> {
        let c = &self.channel;
        self.link_context_toward(
            self.si_channel()?,
            Direction::new(c.tx_user.azimuth_deg, c.tx_user.elevation_deg)?,
            Direction::new(c.rx_user.azimuth_deg, c.rx_user.elevation_deg)?,
        )
    }

    /// Canonical text form; [`load_scenario`] reads it back to an equal value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(seed) = self.master_seed {
            kv("master_seed", seed.to_string());
        }
        for (side, a) in [("tx", &self.tx), ("rx", &self.rx)] {
            kv(&format!("arrays.{side}.rows"), a.rows.to_string());
            kv(&format!("arrays.{side}.cols"), a.cols.to_string());
            kv(&format!("arrays.{side}.spacing"), fmt_num(a.spacing));
        }
        kv("arrays.pose.translation", fmt_list(&self.pose.translation));
        kv("arrays.pose.roll_deg", fmt_num(self.pose.roll_deg));
        kv("arrays.pose.pitch_deg", fmt_num(self.pose.pitch_deg));
        kv("arrays.pose.yaw_deg", fmt_num(self.pose.yaw_deg));
        let c = &self.channel;
        kv("channel.si.model", name_of(SI_MODELS, c.si.model));
        kv("channel.si.rho", fmt_num(c.si.rho));
        kv("channel.si.gain_db", fmt_num(c.si.gain_db));
        for (side, u) in [("tx", &c.tx_user), ("rx", &c.rx_user)] {
            kv(&format!("channel.{side}_user.azimuth_deg"), fmt_num(u.azimuth_deg));
            kv(&format!("channel.{side}_user.elevation_deg"), fmt_num(u.elevation_deg));
            kv(&format!("channel.{side}_user.gain_db"), fmt_num(u.gain_db));
        }
        kv("channel.cross_link_gain_db", fmt_num(c.cross_link_gain_db));
        kv("budget.p_bs_dbm", fmt_num(self.budget.p_bs_dbm));
        kv("budget.p_ue_dbm", fmt_num(self.budget.p_ue_dbm));
        kv("budget.n_bs_dbm", fmt_num(self.budget.n_bs_dbm));
        kv("budget.n_ue_dbm", fmt_num(self.budget.n_ue_dbm));
        let ps = &self.phase_shifter;
        kv("phase_shifter.mode", name_of(PS_MODES, ps.mode));
        kv("phase_shifter.bits", ps.phase_bits.to_string());
        kv("phase_shifter.amplitude_bits", ps.amplitude_bits.to_string());
        if let Some(g) = &self.region {
            kv("region.snr_tx_db", fmt_num(g.snr_tx_db));
            kv("region.snr_rx_db", fmt_num(g.snr_rx_db));
            kv("region.inr_tx_db", fmt_list(&g.inr_tx_db));
            kv("region.inr_rx_db", fmt_list(&g.inr_rx_db));
            kv("region.n_points", g.n_points.to_string());
        }
        if let Some(s) = &self.sic {
            kv("sic.n_taps", s.n_taps.to_string());
            kv("sic.tap_delay_samples", fmt_num(s.tap_delay_samples));
            kv("sic.samples", s.samples.to_string());
            kv("sic.noise_std", fmt_num(s.noise_std));
            kv("sic.channel_taps_re", fmt_list(&s.channel_taps_re));
            kv("sic.channel_taps_im", fmt_list(&s.channel_taps_im));
        }
        if let Some(cb) = &self.codebook {
            kv("codebook.n_beams", cb.n_beams.to_string());
            kv("codebook.min_az_deg", fmt_num(cb.min_az_deg));
            kv("codebook.max_az_deg", fmt_num(cb.max_az_deg));
            kv("codebook.elevation_deg", fmt_num(cb.elevation_deg));
            kv("codebook.sigma2_tx", fmt_num(cb.sigma2_tx));
            kv("codebook.sigma2_rx", fmt_num(cb.sigma2_rx));
            kv("codebook.max_iters", cb.max_iters.to_string());
            kv("codebook.tolerance", fmt_num(cb.tolerance));
            if let Some(n) = cb.tx_n_elements {
                kv("codebook.tx.n_elements", n.to_string());
            }
            if let Some(n) = cb.rx_n_elements {
                kv("codebook.rx.n_elements", n.to_string());
            }
        }
        if let Some(s) = &self.steer {
            kv("steer.delta_theta_deg", fmt_num(s.delta_theta_deg));
            kv("steer.delta_phi_deg", fmt_num(s.delta_phi_deg));
            kv("steer.res_theta_deg", fmt_num(s.res_theta_deg));
            kv("steer.res_phi_deg", fmt_num(s.res_phi_deg));
            kv("steer.target_inr_db", fmt_num(s.target_inr_db));
            kv("steer.small_scale_sigma_db", fmt_num(s.small_scale_sigma_db));
            kv("steer.trials", s.trials.to_string());
            kv("steer.surface", name_of(SURFACES, s.surface));
            kv("steer.flat_inr_db", fmt_num(s.flat_inr_db));
            kv("steer.min_az_deg", fmt_num(s.min_az_deg));
            kv("steer.max_az_deg", fmt_num(s.max_az_deg));
            kv("steer.elevation_deg", fmt_num(s.elevation_deg));
            kv("steer.oracle_samples", s.oracle_samples.to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# two-element arrays, identity SI, one user per side
master_seed = 7
arrays.tx.n_elements = 2
arrays.rx.n_elements = 2
channel.si.model = \"identity\"
channel.tx_user.azimuth_deg = 20
channel.rx_user.azimuth_deg = -15   # uplink user
";

    fn issues(text: &str) -> Vec<String> {
        match load_scenario(text) {
            Err(Error::Scenario(v)) => v,
            other => panic!("expected scenario errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_scenario_loads() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!((s.tx.rows, s.tx.cols), (1, 2));
        assert_eq!(s.master_seed, Some(7));
        let ctx = s.link_context().unwrap();
        assert_eq!((ctx.n_tx(), ctx.n_rx()), (2, 2));
        assert_eq!(ctx.si.matrix, DMatrix::identity(2, 2));
        assert!(s.region.is_none());
    }

    #[test]
    fn misspelled_key_is_named() {
        let errs = issues("arrays.tx.antenas = 16\n");
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("arrays.tx.antenas"), "{errs:?}");
        assert!(errs[0].contains("unknown key"));
    }

    #[test]
    fn codebook_dimension_error_has_path() {
        let errs = issues("arrays.rx.n_elements = 8\ncodebook.rx.n_elements = 16\n");
        assert!(errs.iter().any(|e| e.starts_with("codebook.rx")), "{errs:?}");
    }

    #[test]
    fn all_errors_reported() {
        let errs = issues("bogus = 1\nsic.n_taps = 0\nregion.n_points = 1\narrays.tx.spacing = \"wide\"\nsteer.trials = 3\n");
        assert!(errs.len() >= 5, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("master_seed")));
    }

    #[test]
    fn syntax_and_type_errors() {
        let errs = issues("master_seed = 1\nmaster_seed = 2\n");
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("line 2"), "{errs:?}");
        let errs = issues("region.n_points = \"many\"\nchannel.si.model = \"planar\"\n");
        assert!(errs.iter().any(|e| e.starts_with("region.n_points")));
        assert!(errs.iter().any(|e| e.starts_with("channel.si.model")));
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{MINIMAL}region.inr_tx_db = [-inf, 0, 3.5]\nregion.inr_rx_db = [-inf, 0, 1e-3]\n\
             sic.noise_std = 0.01\ncodebook.sigma2_rx = 0.05\ncodebook.rx.n_elements = 2\n\
             steer.surface = \"beamformed\"\nsteer.target_inr_db = -2.5\nphase_shifter.mode = \"quantized\"\n\
             phase_shifter.bits = 3\narrays.pose.translation = [0, 0.25, 4]\narrays.pose.yaw_deg = 12.5\n"
        );
        let s = load_scenario(&text).unwrap();
        let again = load_scenario(&s.to_text()).unwrap();
        assert_eq!(s, again);
        assert_eq!(Scenario::default(), load_scenario(&Scenario::default().to_text()).unwrap());
    }

    #[test]
    fn large_seed_is_exact() {
        let s = load_scenario("master_seed = 9223372036854775807\n").unwrap();
        assert_eq!(s.master_seed, Some(i64::MAX as u64));
        assert!(load_scenario("master_seed = -1\n").is_err());
    }

    #[test]
    fn seeds_come_from_master() {
        let s = load_scenario("master_seed = 1\nchannel.si.model = \"rayleigh\"\n").unwrap();
        assert_eq!(s.seed("si").unwrap(), derive_seed(1, "si"));
        assert!(load_scenario("channel.si.model = \"rayleigh\"\n").is_err());
        let o = load_scenario_with_seed("channel.si.model = \"rayleigh\"\n", Some(3)).unwrap();
        assert_eq!(o.master_seed, Some(3));
        assert!(Scenario::default().seed("si").is_err());
    }

    #[test]
    fn table_headers_are_accepted() {
        let s = load_scenario("master_seed = 2\n[arrays.tx]\nrows = 2\ncols = 3\n").unwrap();
        assert_eq!(s.tx.n_elements(), 6);
    }
}
