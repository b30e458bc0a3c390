//! Joint transmit/receive codebooks with low self-coupling for 16-element
//! arrays ten wavelengths apart.

use duplexforge::arrays::{azimuth_grid, conjugate_codebook, ArrayGeometry, WeightSet};
use duplexforge::channels::{spherical_wave_si_channel, ArrayPose};
use duplexforge::codebook_design::{average_coupling_db, design_codebooks, CodebookDesignConfig, CoverageSpec};

fn main() -> duplexforge::Result<()> {
    let g = ArrayGeometry::ula(16, 0.5)?;
    let h = spherical_wave_si_channel(&g, &g, &ArrayPose::default(), 1.0)?;
    let dirs = azimuth_grid(-60.0, 60.0, 8)?;
    let cov = CoverageSpec::new(&g, dirs.clone())?;

    let baseline = conjugate_codebook(&g, &dirs, &WeightSet::UnitModulus)?;
    println!(
        "conjugate codebooks: {:.2} dB average coupling",
        average_coupling_db(&baseline, &baseline, &h)?
    );

    for sigma2 in [0.05, 0.1, 0.2] {
        let config = CodebookDesignConfig {
            sigma2_tx: sigma2,
            sigma2_rx: sigma2,
            ..CodebookDesignConfig::default()
        };
        let r = design_codebooks(&h, &cov, &cov, &config)?;
        println!(
            "sigma2 = {sigma2}: {:.2} dB after {} iterations (coverage {:.3e} / {:.3e})",
            average_coupling_db(&r.f, &r.w, &h)?,
            r.iterations,
            r.coverage_tx,
            r.budget_tx
        );
    }
    Ok(())
}
