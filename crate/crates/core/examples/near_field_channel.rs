//! Near-field SI channel between two planar arrays and its reciprocity.

use duplexforge::arrays::{steering_vector, ArrayGeometry, Direction};
use duplexforge::channels::{spherical_wave_si_channel, ArrayPose};
use nalgebra::Vector3;

fn main() -> duplexforge::Result<()> {
    let tx = ArrayGeometry::half_wavelength_upa(4, 4)?;
    let rx = ArrayGeometry::half_wavelength_upa(4, 4)?;
    let pose = ArrayPose::from_euler_deg(Vector3::new(0.0, 0.0, 4.0), 0.0, 0.0, 10.0);

    let h = spherical_wave_si_channel(&tx, &rx, &pose, 1.0)?;
    let back = spherical_wave_si_channel(&rx, &tx, &pose.inverse(), 1.0)?;
    println!("reciprocity error (Frobenius): {:.2e}", (&h.matrix - back.matrix.transpose()).norm());

    let mags: Vec<f64> = h.matrix.iter().map(|z| z.norm()).collect();
    let (lo, hi) = mags.iter().fold((f64::MAX, 0.0f64), |(l, u), &m| (l.min(m), u.max(m)));
    println!("|H| spans {lo:.4} .. {hi:.4}");

    for az in [-45.0, 0.0, 45.0] {
        let a = steering_vector(&tx, &Direction::azimuth(az)?);
        let w = steering_vector(&rx, &Direction::azimuth(az)?);
        println!("matched beams at {az:>5}°: |w^H H f|^2 = {:.2}", w.dotc(&(&h.matrix * &a)).norm_sqr());
    }
    Ok(())
}
