//! Array geometry, steering vectors and phase-shifter realizability.
//!
//! Element positions are expressed in wavelengths. A direction's unit vector
//! is `(cos el · sin az, cos el · cos az, sin el)`, so the array boresight
//! is `+y`, azimuth rotates in the horizontal `x-y` plane and elevation tilts
//! toward `+z`. The default planar array lies in the `x-z` plane.
//!
//! A "conjugate" (matched) beam toward a direction is the steering vector
//! itself: its gain `|a^H f|^2` then equals `N^2`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::units::{db_to_amplitude, lin_to_db_floored};

/// Positions of the antenna elements, in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Vector3<f64>>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<Vector3<f64>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Geometry("array needs at least one element".into()));
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Geometry("element positions must be finite".into()));
        }
        Ok(Self { positions })
    }

    /// Uniform linear array along `x`, first element at the origin.
    pub fn ula(n: usize, spacing: f64) -> Result<Self> {
        Self::upa(1, n, spacing)
    }

    /// Uniform planar array in the `x-z` plane, row-major ordering:
    /// element `r * cols + c` sits at `(c·d, 0, r·d)`.
    pub fn upa(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Geometry(format!("spacing must be positive, got {spacing}")));
        }
        let positions = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| Vector3::new(c as f64 * spacing, 0.0, r as f64 * spacing)))
            .collect();
        Self::new(positions)
    }

    /// Half-wavelength planar array.
    pub fn half_wavelength_upa(rows: usize, cols: usize) -> Result<Self> {
        Self::upa(rows, cols, 0.5)
    }

    pub fn n_elements(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }
}

/// Azimuth/elevation pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Direction {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        if !(-180.0..180.0).contains(&azimuth_deg) || !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(Error::Domain(format!(
                "direction ({azimuth_deg}, {elevation_deg}) outside [-180,180) x [-90,90]"
            )));
        }
        Ok(Self {
            azimuth_deg,
            elevation_deg,
        })
    }

    /// Azimuth-only direction on the horizon.
    pub fn azimuth(azimuth_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg, 0.0)
    }

    /// Shift by an angular offset. Azimuth wraps into `[-180, 180)`; elevation
    /// saturates at the poles.
    pub fn offset(&self, d_az_deg: f64, d_el_deg: f64) -> Self {
        Self {
            azimuth_deg: wrap_degrees(self.azimuth_deg + d_az_deg),
            elevation_deg: (self.elevation_deg + d_el_deg).clamp(-90.0, 90.0),
        }
    }

    pub fn unit_vector(&self) -> Vector3<f64> {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        Vector3::new(el.cos() * az.sin(), el.cos() * az.cos(), el.sin())
    }
}

/// Wrap an angle in degrees into `[-180, 180)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        -180.0
    } else {
        w
    }
}

/// Array response toward `dir`: entry `m` is `exp(+j 2π <u, p_m>)`.
pub fn steering_vector(geometry: &ArrayGeometry, dir: &Direction) -> DVector<Complex64> {
    let u = dir.unit_vector();
    DVector::from_iterator(
        geometry.n_elements(),
        geometry
            .positions()
            .iter()
            .map(|p| Complex64::from_polar(1.0, TAU * u.dot(p))),
    )
}

/// Resolution of a phase shifter and (optional) attenuator per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShifterSpec {
    pub phase_bits: u32,
    /// Zero means phase-only (unit-modulus) control.
    pub amplitude_bits: u32,
    /// Explicit attenuation levels in dB (≤ 0); overrides `amplitude_bits`.
    pub amplitude_levels_db: Option<Vec<f64>>,
}

impl PhaseShifterSpec {
    pub fn phase_only(phase_bits: u32) -> Result<Self> {
        let spec = Self {
            phase_bits,
            amplitude_bits: 0,
            amplitude_levels_db: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=24).contains(&self.phase_bits) {
            return Err(Error::Config(format!(
                "phase resolution must be 1..=24 bits, got {}",
                self.phase_bits
            )));
        }
        if self.amplitude_bits > 16 {
            return Err(Error::Config("amplitude resolution above 16 bits".into()));
        }
        if let Some(levels) = &self.amplitude_levels_db {
            if levels.is_empty() || levels.iter().any(|l| !l.is_finite() || *l > 0.0) {
                return Err(Error::Config(
                    "amplitude levels must be a non-empty list of finite attenuations ≤ 0 dB".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_phases(&self) -> usize {
        1usize << self.phase_bits
    }

    fn phase_step(&self) -> f64 {
        TAU / self.n_phases() as f64
    }

    /// Realizable magnitudes, ascending. `[1.0]` for phase-only control.
    ///
    /// With `amplitude_bits = a > 0` and no explicit list the levels are
    /// `k / 2^a` for `k = 1..=2^a`.
    pub fn amplitude_levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = match (&self.amplitude_levels_db, self.amplitude_bits) {
            (Some(db), _) => db.iter().map(|&l| db_to_amplitude(l)).collect(),
            (None, 0) => vec![1.0],
            (None, a) => {
                let n = 1usize << a;
                (1..=n).map(|k| k as f64 / n as f64).collect()
            }
        };
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }

    fn phase_only_control(&self) -> bool {
        self.amplitude_levels_db.is_none() && self.amplitude_bits == 0
    }

    fn quantize_phase_index(&self, angle: f64) -> usize {
        let n = self.n_phases();
        ((angle.rem_euclid(TAU) / self.phase_step()).round() as usize) % n
    }

    fn phase_value(&self, index: usize) -> f64 {
        index as f64 * self.phase_step()
    }
}

/// Realizable phase settings `{ i · 2π / 2^b : i = 0..2^b }`.
pub fn phase_set(spec: &PhaseShifterSpec) -> Vec<f64> {
    (0..spec.n_phases()).map(|i| spec.phase_value(i)).collect()
}

/// Circular distance between two phases, in `[0, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// The set a beamforming weight vector must lie in.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum WeightSet {
    /// Arbitrary complex weights.
    #[default]
    Any,
    /// Unit-modulus entries with continuous phase (ideal analog shifters).
    UnitModulus,
    Quantized(PhaseShifterSpec),
}

impl WeightSet {
    pub fn contains(&self, weights: &DVector<Complex64>) -> bool {
        match self {
            WeightSet::Any => true,
            WeightSet::UnitModulus => weights.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-9),
            WeightSet::Quantized(spec) => {
                let levels = spec.amplitude_levels();
                let step = spec.phase_step();
                weights.iter().all(|z| {
                    let mag_ok = levels.iter().any(|l| (z.norm() - l).abs() <= 1e-9);
                    let k = spec.quantize_phase_index(z.arg());
                    mag_ok && phase_distance(z.arg(), spec.phase_value(k)) <= 1e-9 * step.max(1.0)
                })
            }
        }
    }

    /// Nearest point of the set, entry by entry.
    pub fn project(&self, raw: &DVector<Complex64>) -> Projection {
        let mut zero_magnitude = Vec::new();
        let weights = match self {
            WeightSet::Any => raw.clone(),
            WeightSet::UnitModulus => DVector::from_iterator(
                raw.len(),
                raw.iter().enumerate().map(|(i, z)| {
                    if z.norm() == 0.0 {
                        zero_magnitude.push(i);
                        Complex64::new(1.0, 0.0)
                    } else {
                        z / z.norm()
                    }
                }),
            ),
            WeightSet::Quantized(spec) => {
                let levels = spec.amplitude_levels();
                let phase_only = spec.phase_only_control();
                DVector::from_iterator(
                    raw.len(),
                    raw.iter().enumerate().map(|(i, z)| {
                        let mag = z.norm();
                        if mag == 0.0 && phase_only {
                            zero_magnitude.push(i);
                            return Complex64::new(1.0, 0.0);
                        }
                        let level = nearest(&levels, mag);
                        let phase = spec.phase_value(spec.quantize_phase_index(z.arg()));
                        Complex64::from_polar(level, phase)
                    }),
                )
            }
        };
        Projection {
            weights: BeamWeights {
                weights,
                set: self.clone(),
            },
            zero_magnitude,
        }
    }
}

fn nearest(levels: &[f64], x: f64) -> f64 {
    levels
        .iter()
        .copied()
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
        .expect("at least one amplitude level")
}

/// Output of a projection onto a [`WeightSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub weights: BeamWeights,
    /// Entries that had zero magnitude under phase-only control; they were
    /// mapped to phase 0 at unit magnitude.
    pub zero_magnitude: Vec<usize>,
}

/// Per-antenna complex weights of one analog beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    weights: DVector<Complex64>,
    set: WeightSet,
}

impl BeamWeights {
    /// Weights with no realizability constraint attached.
    pub fn unconstrained(weights: DVector<Complex64>) -> Self {
        Self {
            weights,
            set: WeightSet::Any,
        }
    }

    pub fn from_slice(weights: &[Complex64]) -> Self {
        Self::unconstrained(DVector::from_column_slice(weights))
    }

    /// Attach a set, failing if the weights are not in it.
    pub fn with_set(weights: DVector<Complex64>, set: WeightSet) -> Result<Self> {
        if !set.contains(&weights) {
            return Err(Error::Domain("weights are not realizable under the given set".into()));
        }
        Ok(Self { weights, set })
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.weights
    }

    pub fn into_vector(self) -> DVector<Complex64> {
        self.weights
    }

    pub fn set(&self) -> &WeightSet {
        &self.set
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Snap each entry to the nearest realizable phase and magnitude.
pub fn project_weights(raw: &DVector<Complex64>, spec: &PhaseShifterSpec) -> Projection {
    WeightSet::Quantized(spec.clone()).project(raw)
}

/// An ordered set of beams; beam `i` is column `i` of the codebook matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    beams: Vec<BeamWeights>,
    labels: Option<Vec<Direction>>,
}

impl Codebook {
    pub fn new(beams: Vec<BeamWeights>, labels: Option<Vec<Direction>>) -> Result<Self> {
        let Some(first) = beams.first() else {
            return Err(Error::Input("codebook needs at least one beam".into()));
        };
        let n = first.len();
        for b in &beams {
            check_len("codebook beam length", n, b.len())?;
        }
        if let Some(l) = &labels {
            check_len("codebook labels", beams.len(), l.len())?;
        }
        Ok(Self { beams, labels })
    }

    /// Columns of `matrix` as beams in `set`, without a realizability check.
    pub fn from_matrix(matrix: &DMatrix<Complex64>, set: WeightSet, labels: Option<Vec<Direction>>) -> Result<Self> {
        let beams = matrix
            .column_iter()
            .map(|c| BeamWeights {
                weights: c.into_owned(),
                set: set.clone(),
            })
            .collect();
        Self::new(beams, labels)
    }

    pub fn beams(&self) -> &[BeamWeights] {
        &self.beams
    }

    pub fn labels(&self) -> Option<&[Direction]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn n_elements(&self) -> usize {
        self.beams[0].len()
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_columns(&self.beams.iter().map(|b| b.weights.clone()).collect::<Vec<_>>())
    }
}

/// Matched beams toward each direction, projected onto `set`.
pub fn conjugate_codebook(geometry: &ArrayGeometry, directions: &[Direction], set: &WeightSet) -> Result<Codebook> {
    if directions.is_empty() {
        return Err(Error::Input("conjugate codebook needs at least one direction".into()));
    }
    let beams = directions
        .iter()
        .map(|d| set.project(&steering_vector(geometry, d)).weights)
        .collect();
    Codebook::new(beams, Some(directions.to_vec()))
}

/// `n` azimuths evenly spaced over `[lo, hi]` on the horizon.
pub fn azimuth_grid(lo_deg: f64, hi_deg: f64, n: usize) -> Result<Vec<Direction>> {
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Direction::azimuth(0.5 * (lo_deg + hi_deg))?]),
        _ => (0..n)
            .map(|i| Direction::azimuth(lo_deg + (hi_deg - lo_deg) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Linear gain `|a(dir)^H w|^2`.
pub fn beamforming_gain_linear(weights: &BeamWeights, geometry: &ArrayGeometry, dir: &Direction) -> Result<f64> {
    check_len("beam weights vs array", geometry.n_elements(), weights.len())?;
    Ok(steering_vector(geometry, dir).dotc(weights.as_vector()).norm_sqr())
}

/// Beamforming gain toward `dir` in dB, floored at −300 dB.
pub fn beamforming_gain(weights: &BeamWeights, geometry: &ArrayGeometry, dir: &Direction) -> Result<f64> {
    beamforming_gain_linear(weights, geometry, dir).map(lin_to_db_floored)
}
