//! Loading a scenario, building its link and running STEER trials by hand.

use duplexforge::arrays::Direction;
use duplexforge::scenario::load_scenario;
use duplexforge::steer::{simulated_measurer, steer_select, BeamformedSurface, InrSurface};

const TEXT: &str = "
master_seed = 9
arrays.tx.rows = 4
arrays.tx.cols = 4
arrays.rx.rows = 4
arrays.rx.cols = 4
arrays.pose.translation = [0, 0, 3]
channel.si.gain_db = -110
channel.tx_user.azimuth_deg = 20
channel.rx_user.azimuth_deg = -35
budget.p_bs_dbm = 30
budget.n_bs_dbm = -90
steer.small_scale_sigma_db = 3
steer.target_inr_db = 0
";

fn main() -> duplexforge::Result<()> {
    let s = load_scenario(TEXT)?;
    let st = s.steer.clone().expect("steer block present");
    let ctx = s.link_context()?;
    let (tx, rx) = (Direction::new(20.0, 0.0)?, Direction::new(-35.0, 0.0)?);
    let surface = BeamformedSurface::new(ctx, s.tx_geometry()?, s.rx_geometry()?, s.phase_shifter.weight_set())?;
    let mut m = simulated_measurer(InrSurface::Beamformed(surface), st.small_scale_sigma_db, s.seed("demo")?)?;
    let r = steer_select(tx, rx, &st.neighborhood()?, st.target_inr_db, &mut m)?;
    println!(
        "INR {:.2} -> {:.2} dB moving tx to {:?} and rx to {:?} ({} measurements)",
        r.initial_inr_db, r.inr_db, r.tx_dir, r.rx_dir, r.measurements_used
    );

    match load_scenario("arrays.rx.n_elements = 8\ncodebook.rx.n_elements = 16\narrays.tx.antenas = 4\n") {
        Err(e) => println!("{e}"),
        Ok(_) => unreachable!(),
    }
    println!("--- canonical form ---\n{}", s.to_text());
    Ok(())
}
