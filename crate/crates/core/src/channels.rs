//! User channels, the cross-link scalar, MIMO self-interference channels and
//! a log-normal statistical INR model.

use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::arrays::{steering_vector, ArrayGeometry, Direction};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::units::db_to_amplitude;

/// Channel vector between an array and a single-antenna user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub coefficients: DVector<Complex64>,
    pub description: String,
}

/// Scalar channel from the uplink user to the downlink user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossLinkChannel {
    pub coefficient: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiModel {
    SphericalWave,
    Rayleigh,
    Custom,
}

/// `N_rx x N_tx` channel between the transmit and receive arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct SiChannel {
    pub matrix: DMatrix<Complex64>,
    pub model: SiModel,
}

impl SiChannel {
    /// Wrap a user-supplied matrix (for example a measured one).
    pub fn custom(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Input("SI channel entries must be finite".into()));
        }
        Ok(Self {
            matrix,
            model: SiModel::Custom,
        })
    }

    pub fn zeros(n_rx: usize, n_tx: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n_rx, n_tx),
            model: SiModel::Custom,
        }
    }

    pub fn n_rx(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.matrix.ncols()
    }

    /// Same channel with every entry scaled by `10^(gain_db/20)`.
    pub fn scaled_db(&self, gain_db: f64) -> Self {
        Self {
            matrix: &self.matrix * Complex64::new(db_to_amplitude(gain_db), 0.0),
            model: self.model,
        }
    }
}

/// Placement of the receive array frame relative to the transmit array frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayPose {
    /// Offset of the rx array origin, in wavelengths.
    pub translation: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl Default for ArrayPose {
    /// Coplanar receive panel 10 wavelengths along `+x`.
    fn default() -> Self {
        Self {
            translation: Vector3::new(10.0, 0.0, 0.0),
            rotation: Rotation3::identity(),
        }
    }
}

impl ArrayPose {
    /// Rotation from yaw (about `z`), pitch (about `y`) and roll (about `x`), in degrees.
    pub fn from_euler_deg(translation: Vector3<f64>, roll_deg: f64, pitch_deg: f64, yaw_deg: f64) -> Self {
        Self {
            translation,
            rotation: Rotation3::from_euler_angles(roll_deg.to_radians(), pitch_deg.to_radians(), yaw_deg.to_radians()),
        }
    }

    /// Pose of the tx frame seen from the rx frame.
    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self {
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }

    fn place(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.rotation * p
    }
}

/// Line-of-sight user channel: `10^(gain/20) · a(dir)`, so the matched beam
/// toward `dir` collects the full array gain.
pub fn los_user_channel(geometry: &ArrayGeometry, dir: &Direction, gain_db: f64) -> UserChannel {
    let amp = db_to_amplitude(gain_db);
    UserChannel {
        coefficients: steering_vector(geometry, dir) * Complex64::new(amp, 0.0),
        description: format!(
            "los az={} el={} gain_db={}",
            dir.azimuth_deg, dir.elevation_deg, gain_db
        ),
    }
}

/// Spherical-wave near-field model: `H[m,n] = (rho / r) · exp(-j 2π r)` with
/// `r` the distance in wavelengths between rx element `m` and tx element `n`.
pub fn spherical_wave_si_channel(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    pose: &ArrayPose,
    rho: f64,
) -> Result<SiChannel> {
    let rx_global: Vec<Vector3<f64>> = rx.positions().iter().map(|p| pose.place(p)).collect();
    let mut matrix = DMatrix::zeros(rx.n_elements(), tx.n_elements());
    for (m, pr) in rx_global.iter().enumerate() {
        for (n, pt) in tx.positions().iter().enumerate() {
            let r = (pr - pt).norm();
            if r <= 0.0 {
                return Err(Error::Geometry(format!(
                    "rx element {m} coincides with tx element {n}"
                )));
            }
            matrix[(m, n)] = Complex64::from_polar(rho / r, -std::f64::consts::TAU * r);
        }
    }
    Ok(SiChannel {
        matrix,
        model: SiModel::SphericalWave,
    })
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// I.i.d. unit-variance circularly-symmetric complex normal entries.
pub fn rayleigh_si_channel(n_rx: usize, n_tx: usize, seed: u64) -> SiChannel {
    let mut rng = rng_from_seed(seed);
    // Column-major fill order, matching nalgebra's storage.
    let matrix = DMatrix::from_fn(n_rx, n_tx, |_, _| complex_normal(&mut rng));
    SiChannel {
        matrix,
        model: SiModel::Rayleigh,
    }
}

/// INR in dB distributed as `N(mu_db, sigma_db^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalInrModel {
    pub mu_db: f64,
    pub sigma_db: f64,
}

impl Default for LogNormalInrModel {
    /// Calibrated stand-in: about 2.3 % of draws at or below 0 dB.
    fn default() -> Self {
        Self {
            mu_db: 20.0,
            sigma_db: 10.0,
        }
    }
}

impl LogNormalInrModel {
    pub fn new(mu_db: f64, sigma_db: f64) -> Result<Self> {
        if !mu_db.is_finite() || !(sigma_db.is_finite() && sigma_db >= 0.0) {
            return Err(Error::Domain(format!(
                "log-normal model needs finite mu and sigma ≥ 0, got ({mu_db}, {sigma_db})"
            )));
        }
        Ok(Self { mu_db, sigma_db })
    }
}

pub fn sample_inr_db(model: &LogNormalInrModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Input("need at least one INR sample".into()));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            model.mu_db + model.sigma_db * z
        })
        .collect())
}

/// Cross-link coefficient with magnitude `10^(gain/20)` and uniform phase.
/// A gain of `-inf` dB (full isolation) gives exactly zero.
pub fn cross_link_channel(distance_gain_db: f64, seed: u64) -> CrossLinkChannel {
    let mut rng = rng_from_seed(seed);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    CrossLinkChannel {
        coefficient: Complex64::from_polar(db_to_amplitude(distance_gain_db), phase),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single_at(x: f64) -> (ArrayGeometry, ArrayGeometry, ArrayPose) {
        let g = ArrayGeometry::new(vec![Vector3::zeros()]).unwrap();
        let pose = ArrayPose {
            translation: Vector3::new(x, 0.0, 0.0),
            rotation: Rotation3::identity(),
        };
        (g.clone(), g, pose)
    }

    #[test]
    fn los_examples() {
        let g = ArrayGeometry::ula(4, 0.5).unwrap();
        let d = Direction::new(20.0, 0.0).unwrap();
        let h = los_user_channel(&g, &d, 0.0);
        assert_abs_diff_eq!(h.coefficients.norm_squared(), 4.0, epsilon = 1e-12);
        let weak = los_user_channel(&g, &d, -10.0);
        for (a, b) in weak.coefficients.iter().zip(h.coefficients.iter()) {
            assert_abs_diff_eq!((a - b * 10f64.powf(-0.5)).norm(), 0.0, epsilon = 1e-15);
        }
        let gain = 7.0;
        let h = los_user_channel(&g, &d, gain);
        let f = steering_vector(&g, &d);
        assert_abs_diff_eq!(h.coefficients.dotc(&f).norm_sqr(), 16.0 * 10f64.powf(0.7), epsilon = 1e-9);
    }

    #[test]
    fn spherical_wave_examples() {
        let (t, r, pose) = single_at(1.0);
        let h = spherical_wave_si_channel(&t, &r, &pose, 1.0).unwrap();
        assert_abs_diff_eq!((h.matrix[(0, 0)] - Complex64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);

        let (t, r, pose) = single_at(2.5);
        let h = spherical_wave_si_channel(&t, &r, &pose, 1.0).unwrap();
        assert_abs_diff_eq!((h.matrix[(0, 0)] - Complex64::new(-0.4, 0.0)).norm(), 0.0, epsilon = 1e-12);

        let (t, r, pose) = single_at(0.0);
        assert!(matches!(spherical_wave_si_channel(&t, &r, &pose, 1.0), Err(Error::Geometry(_))));

        let tx = ArrayGeometry::half_wavelength_upa(2, 4).unwrap();
        let rx = ArrayGeometry::ula(6, 0.5).unwrap();
        let h1 = spherical_wave_si_channel(&tx, &rx, &ArrayPose::default(), 1.0).unwrap();
        let h2 = spherical_wave_si_channel(&tx, &rx, &ArrayPose::default(), 2.0).unwrap();
        assert_abs_diff_eq!(h2.matrix.norm(), 2.0 * h1.matrix.norm(), epsilon = 1e-12);
        assert_eq!((h1.n_rx(), h1.n_tx()), (6, 8));
    }

    #[test]
    fn spherical_wave_amplitude_times_distance_is_rho() {
        let tx = ArrayGeometry::half_wavelength_upa(3, 3).unwrap();
        let rx = ArrayGeometry::half_wavelength_upa(2, 3).unwrap();
        let pose = ArrayPose::from_euler_deg(Vector3::new(4.0, 1.0, -2.0), 10.0, -20.0, 35.0);
        let rho = 0.3;
        let h = spherical_wave_si_channel(&tx, &rx, &pose, rho).unwrap();
        for (m, pr) in rx.positions().iter().enumerate() {
            for (n, pt) in tx.positions().iter().enumerate() {
                let r = (pose.place(pr) - pt).norm();
                assert_abs_diff_eq!(h.matrix[(m, n)].norm() * r, rho, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn swapping_arrays_transposes() {
        let tx = ArrayGeometry::half_wavelength_upa(2, 3).unwrap();
        let rx = ArrayGeometry::ula(5, 0.5).unwrap();
        let pose = ArrayPose::from_euler_deg(Vector3::new(7.0, -3.0, 0.5), 5.0, 30.0, -60.0);
        let h = spherical_wave_si_channel(&tx, &rx, &pose, 1.0).unwrap();
        let back = spherical_wave_si_channel(&rx, &tx, &pose.inverse(), 1.0).unwrap();
        assert!((h.matrix.transpose() - back.matrix).norm() < 1e-9);
    }

    #[test]
    fn rayleigh_examples() {
        let a = rayleigh_si_channel(3, 4, 9);
        assert_eq!(a, rayleigh_si_channel(3, 4, 9));
        assert_ne!(rayleigh_si_channel(2, 2, 1).matrix, rayleigh_si_channel(2, 2, 2).matrix);
        let big = rayleigh_si_channel(1000, 1000, 5);
        let mean = big.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e6;
        assert!((mean - 1.0).abs() < 0.005, "mean |h|^2 = {mean}");
    }

    #[test]
    fn lognormal_examples() {
        let draws = sample_inr_db(&LogNormalInrModel::new(7.0, 0.0).unwrap(), 100, 1).unwrap();
        assert!(draws.iter().all(|&x| x == 7.0));
        assert!(sample_inr_db(&LogNormalInrModel::default(), 0, 1).is_err());
        assert!(LogNormalInrModel::new(0.0, -1.0).is_err());

        let mut draws = sample_inr_db(&LogNormalInrModel::default(), 1_000_000, 77).unwrap();
        draws.sort_by(f64::total_cmp);
        let median = 0.5 * (draws[499_999] + draws[500_000]);
        assert!((median - 20.0).abs() < 0.05, "median {median}");
    }

    #[test]
    fn cross_link_examples() {
        assert_eq!(cross_link_channel(f64::NEG_INFINITY, 3).coefficient.norm(), 0.0);
        assert_abs_diff_eq!(cross_link_channel(0.0, 3).coefficient.norm(), 1.0, epsilon = 1e-15);
        assert_eq!(cross_link_channel(-3.0, 8), cross_link_channel(-3.0, 8));
        assert_ne!(cross_link_channel(-3.0, 8), cross_link_channel(-3.0, 9));
    }
}
