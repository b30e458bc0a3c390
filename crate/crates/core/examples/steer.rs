//! STEER on a synthetic INR map, checked against exhaustive selection.

use duplexforge::arrays::Direction;
use duplexforge::seed::rng_from_seed;
use duplexforge::steer::{brute_force_steer, random_map, steer_select, InrMap, MapMeasurer, NeighborhoodSpec};

fn main() -> duplexforge::Result<()> {
    let spec = NeighborhoodSpec::new(2.0, 2.0, 1.0, 1.0)?;
    let (tx, rx) = (Direction::new(15.0, 0.0)?, Direction::new(-30.0, 0.0)?);
    let map = random_map(spec, &mut rng_from_seed(3), 15.0, 10.0)?;

    for target in [10.0, 0.0, -10.0, f64::NEG_INFINITY] {
        let fast = steer_select(tx, rx, &spec, target, &mut MapMeasurer::new(tx, rx, map.clone()))?;
        let full = brute_force_steer(tx, rx, &spec, target, &mut MapMeasurer::new(tx, rx, map.clone()))?;
        assert_eq!((fast.tx_dir, fast.rx_dir), (full.tx_dir, full.rx_dir));
        println!(
            "target {target:>5}: INR {:6.2} -> {:6.2} dB, deviation {:?}, {} of {} measurements, met {}",
            fast.initial_inr_db, fast.inr_db, fast.deviation, fast.measurements_used, full.measurements_used, fast.met_target
        );
    }

    // Maps round-trip through CSV so measured data can replace the simulator.
    let csv = map.to_csv();
    let back = InrMap::from_csv(&csv, spec)?;
    println!("CSV grid: {} rows, min {:.2} dB", csv.lines().count() - 1, back.min());
    Ok(())
}
