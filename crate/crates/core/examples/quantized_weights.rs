//! Projecting beams onto 3-bit phase shifters with 2-bit attenuators.

use duplexforge::arrays::{beamforming_gain, project_weights, steering_vector, ArrayGeometry, BeamWeights, Direction, PhaseShifterSpec};

fn main() -> duplexforge::Result<()> {
    let g = ArrayGeometry::ula(8, 0.5)?;
    let dir = Direction::azimuth(17.0)?;
    let ideal = steering_vector(&g, &dir);

    for bits in [1, 2, 3, 6] {
        let spec = PhaseShifterSpec::phase_only(bits)?;
        let p = project_weights(&ideal, &spec);
        println!("{bits}-bit phase: gain {:.3} dB", beamforming_gain(&p.weights, &g, &dir)?);
    }
    println!("ideal:       gain {:.3} dB", beamforming_gain(&BeamWeights::unconstrained(ideal.clone()), &g, &dir)?);

    let spec = PhaseShifterSpec {
        phase_bits: 3,
        amplitude_bits: 2,
        amplitude_levels_db: None,
    };
    let tapered = ideal.map(|z| z * 0.6);
    let p = project_weights(&tapered, &spec);
    println!("amplitude levels {:?}", spec.amplitude_levels());
    println!("first projected weight {:.3}", p.weights.as_vector()[0]);
    Ok(())
}
