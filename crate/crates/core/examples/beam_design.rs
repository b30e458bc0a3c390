//! Exhaustive versus alternating beam selection over 2-bit phase-only beams.

use duplexforge::arrays::{ArrayGeometry, Direction, PhaseShifterSpec};
use duplexforge::beam_design::{alternating_beam_search, enumerate_phase_only, exhaustive_beam_search, BeamSearchSpace};
use duplexforge::channels::{cross_link_channel, los_user_channel, rayleigh_si_channel};
use duplexforge::fd_link::{LinkContext, LinkPowers};
use duplexforge::seed::derive_seed;

fn main() -> duplexforge::Result<()> {
    let g = ArrayGeometry::ula(4, 0.5)?;
    let ctx = LinkContext::new(
        los_user_channel(&g, &Direction::azimuth(25.0)?, 0.0),
        los_user_channel(&g, &Direction::azimuth(-40.0)?, 0.0),
        cross_link_channel(-10.0, derive_seed(1, "cross-link")),
        rayleigh_si_channel(4, 4, derive_seed(1, "si")).scaled_db(-10.0),
        LinkPowers::default(),
    )?;
    let beams = enumerate_phase_only(4, &PhaseShifterSpec::phase_only(2)?)?;
    let space = BeamSearchSpace::new(beams.clone(), beams)?;

    let best = exhaustive_beam_search(&space, &ctx)?;
    let alt = alternating_beam_search(&space, &ctx, 20)?;
    println!("exhaustive:  {:.4} bps/Hz over {} pairs", best.sum_se, best.evaluations);
    println!("alternating: {:.4} bps/Hz after {} evaluations", alt.sum_se, alt.evaluations);
    println!("alternating trace: {:?}", alt.trace);
    Ok(())
}
