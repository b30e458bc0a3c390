//! Command-line experiments. Each subcommand reads a scenario file, writes
//! CSV tables, a `summary.txt` and a `manifest.json` into the output
//! directory, and prints the summary.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or usage error,
//! 3 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analog_sic::{ideal_tap_matrix, ls_tap_weights, FirFilterSpec};
use crate::arrays::{conjugate_codebook, Direction};
use crate::codebook_design::{average_coupling_db, coverage_variance, design_codebooks, CodebookDesignConfig, CoverageSpec};
use crate::error::Error;
use crate::link_math::{rate_region_boundary, LinkInrs, LinkSnrs, Strategy};
use crate::report::{codebook_to_csv, fmt_f64, median, quantile_sorted};
use crate::scenario::{load_scenario_with_seed, Scenario, SteerSurfaceKind};
use crate::seed::{derive_seed, rng_from_seed};
use crate::steer::{simulated_measurer, steer_select, BeamformedSurface, InrSurface};
use crate::units::lin_to_db_floored;

#[derive(Debug, Parser)]
#[command(name = "duplexforge", version, about = "Full-duplex mmWave experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// TDD, FDD and full-duplex rate-region boundaries.
    RateRegion(RunArgs),
    /// Least-squares analog SIC tap fit.
    SicFit(RunArgs),
    /// Joint transmit/receive codebook design.
    Codebook(RunArgs),
    /// Monte-Carlo STEER beam selection.
    Steer(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RateRegion(_) => "rate-region",
            Command::SicFit(_) => "sic-fit",
            Command::Codebook(_) => "codebook",
            Command::Steer(_) => "steer",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::RateRegion(a) | Command::SicFit(a) | Command::Codebook(a) | Command::Steer(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the scenario's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of Monte-Carlo trials (steer).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "DUPLEXFORGE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Core(Error::Numerical(_) | Error::Measurement { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario_sha256: String,
    pub master_seed: Option<u64>,
    pub toolkit_version: String,
    /// Elapsed seconds; the only field that varies between identical runs.
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub parameters: BTreeMap<String, String>,
}

/// What a command produced, before the manifest is written.
struct Outputs {
    files: Vec<(String, String)>,
    summary: String,
    parameters: BTreeMap<String, String>,
}

impl Outputs {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            summary: String::new(),
            parameters: BTreeMap::new(),
        }
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.summary, "{key}: {value}");
    }

    fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn require<'a, T>(block: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    block
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("scenario has no `{name}` block (set at least one `{name}.*` key)")))
}

/// Run a parsed command line; returns the manifest on success.
pub fn run(cli: &Cli) -> CliResult<RunManifest> {
    let args = cli.command.args();
    let text = std::fs::read_to_string(&args.scenario).map_err(|source| CliError::Io {
        path: args.scenario.clone(),
        source,
    })?;
    let mut scenario = load_scenario_with_seed(&text, args.seed)?;
    if let (Some(trials), Some(steer)) = (args.trials, scenario.steer.as_mut()) {
        if trials == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        steer.trials = trials;
    }
    if args.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }

    let start = Instant::now();
    let compute = || match &cli.command {
        Command::RateRegion(_) => cmd_rate_region(&scenario),
        Command::SicFit(_) => cmd_sic_fit(&scenario),
        Command::Codebook(_) => cmd_codebook(&scenario),
        Command::Steer(_) => cmd_steer(&scenario),
    };
    let outputs = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(compute)?,
        None => compute()?,
    };

    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.clone(),
        source,
    })?;
    let mut names = Vec::new();
    for (name, contents) in &outputs.files {
        write_file(&args.out.join(name), contents)?;
        names.push(name.clone());
    }
    write_file(&args.out.join("summary.txt"), &outputs.summary)?;
    names.push("summary.txt".into());

    let manifest = RunManifest {
        command: cli.command.name().into(),
        scenario_sha256: hex(&Sha256::digest(text.as_bytes())),
        master_seed: scenario.master_seed,
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs: names,
        parameters: outputs.parameters,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&args.out.join("manifest.json"), &(json + "\n"))?;
    print!("{}", outputs.summary);
    Ok(manifest)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse `std::env::args`, run, and return the process exit code.
pub fn main_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_rate_region(s: &Scenario) -> CliResult<Outputs> {
    let region = require(&s.region, "region")?;
    let snrs = LinkSnrs::from_db(region.snr_tx_db, region.snr_rx_db);
    let mut csv = String::from("strategy,alpha,r_tx,r_rx,is_star\n");
    let mut out = Outputs::new();
    let mut boundaries = vec![
        (
            "tdd".to_string(),
            rate_region_boundary(Strategy::Tdd, snrs, LinkInrs::NONE, region.n_points)?,
        ),
        (
            "fdd".to_string(),
            rate_region_boundary(Strategy::Fdd, snrs, LinkInrs::NONE, region.n_points)?,
        ),
    ];
    for (&it, &ir) in region.inr_tx_db.iter().zip(&region.inr_rx_db) {
        let label = format!("fd[{}/{}]", fmt_f64(it), fmt_f64(ir));
        let inrs = LinkInrs::from_db(it, ir);
        boundaries.push((label, rate_region_boundary(Strategy::Fd, snrs, inrs, region.n_points)?));
    }
    for (label, b) in &boundaries {
        for (i, p) in b.points.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{label},{},{},{},{}",
                p.alpha.map(fmt_f64).unwrap_or_default(),
                fmt_f64(p.rate.r_tx),
                fmt_f64(p.rate.r_rx),
                u8::from(i == b.star)
            );
        }
        let star = b.star_point();
        out.line(
            &format!("{label} star"),
            format_args!(
                "r_tx={} r_rx={} sum={}",
                fmt_f64(star.rate.r_tx),
                fmt_f64(star.rate.r_rx),
                fmt_f64(star.rate.sum())
            ),
        );
    }
    out.file("rate_region.csv", csv);
    out.param("n_points", region.n_points);
    out.param("fd_levels", region.inr_tx_db.len());
    Ok(out)
}

fn cmd_sic_fit(s: &Scenario) -> CliResult<Outputs> {
    let sic = require(&s.sic, "sic")?;
    let spec = FirFilterSpec::new(sic.n_taps, sic.tap_delay_samples)?;
    let a = ideal_tap_matrix(&spec, 1.0, sic.samples)?;
    let taps = sic.channel_taps();
    let mut y = DVector::from_fn(sic.samples, |n, _| taps.get(n).copied().unwrap_or_default());
    if sic.noise_std > 0.0 {
        let mut rng = rng_from_seed(s.seed("sic-noise")?);
        for v in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re, im) * (sic.noise_std * std::f64::consts::FRAC_1_SQRT_2);
        }
    }
    let fit = ls_tap_weights(&y, &a)?;

    let mut csv = String::from("tap,re,im\n");
    for (k, w) in fit.weights.iter().enumerate() {
        let _ = writeln!(csv, "{k},{},{}", fmt_f64(w.re), fmt_f64(w.im));
    }
    let mut out = Outputs::new();
    out.file("sic_fit.csv", csv);
    out.line("n_taps", sic.n_taps);
    out.line("input_power_db", fmt_f64(lin_to_db_floored(y.norm_squared() / y.len() as f64)));
    out.line("residual_power_db", fmt_f64(fit.residual_power_db));
    out.line("cancellation_db", fmt_f64(fit.cancellation_db));
    out.line("regularized", fit.regularized);
    out.line("fractional_delay", a.fractional_delay);
    out.param("n_taps", sic.n_taps);
    out.param("tap_delay_samples", fmt_f64(sic.tap_delay_samples));
    out.param("samples", sic.samples);
    Ok(out)
}

fn cmd_codebook(s: &Scenario) -> CliResult<Outputs> {
    let cb = require(&s.codebook, "codebook")?;
    let (gtx, grx) = (s.tx_geometry()?, s.rx_geometry()?);
    let dirs: Vec<Direction> = (0..cb.n_beams)
        .map(|i| {
            let az = if cb.n_beams == 1 {
                0.5 * (cb.min_az_deg + cb.max_az_deg)
            } else {
                cb.min_az_deg + (cb.max_az_deg - cb.min_az_deg) * i as f64 / (cb.n_beams - 1) as f64
            };
            Direction::new(az, cb.elevation_deg)
        })
        .collect::<crate::Result<_>>()?;
    let cov_tx = CoverageSpec::new(&gtx, dirs.clone())?;
    let cov_rx = CoverageSpec::new(&grx, dirs.clone())?;
    let h = s.si_channel()?;
    let config = CodebookDesignConfig {
        sigma2_tx: cb.sigma2_tx,
        sigma2_rx: cb.sigma2_rx,
        max_iters: cb.max_iters,
        tolerance: cb.tolerance,
        set: s.phase_shifter.weight_set(),
    };
    let set = config.set.clone();
    let result = design_codebooks(&h, &cov_tx, &cov_rx, &config)?;
    let base_f = conjugate_codebook(&gtx, &dirs, &set)?;
    let base_w = conjugate_codebook(&grx, &dirs, &set)?;

    let mut out = Outputs::new();
    out.file("F.csv", codebook_to_csv(&result.f.to_matrix()));
    out.file("W.csv", codebook_to_csv(&result.w.to_matrix()));
    let mut trace = String::from("iteration,objective\n");
    for (i, v) in result.objective_trace.iter().enumerate() {
        let _ = writeln!(trace, "{i},{}", fmt_f64(*v));
    }
    out.file("codebook_trace.csv", trace);

    let mut coupling =
        String::from("codebook,average_coupling_db,coverage_variance_tx,coverage_variance_rx,budget_tx,budget_rx\n");
    let rows = [
        ("conjugate", &base_f, &base_w),
        ("designed", &result.f, &result.w),
    ];
    for (name, f, w) in rows {
        let c = average_coupling_db(f, w, &h)?;
        let _ = writeln!(
            coupling,
            "{name},{},{},{},{},{}",
            fmt_f64(c),
            fmt_f64(coverage_variance(f, &cov_tx)?),
            fmt_f64(coverage_variance(w, &cov_rx)?),
            fmt_f64(result.budget_tx),
            fmt_f64(result.budget_rx)
        );
        out.line(&format!("{name}_coupling_db"), fmt_f64(c));
    }
    out.file("coupling.csv", coupling);
    out.line("iterations", result.iterations);
    out.line("feasible_tx", result.feasible_tx);
    out.line("feasible_rx", result.feasible_rx);
    out.param("n_beams", cb.n_beams);
    out.param("n_tx", gtx.n_elements());
    out.param("n_rx", grx.n_elements());
    Ok(out)
}

struct TrialRow {
    initial: f64,
    final_: f64,
    deviation: f64,
    measurements: usize,
    met_target: bool,
    snr_loss_db: Option<(f64, f64)>,
}

fn cmd_steer(s: &Scenario) -> CliResult<Outputs> {
    let st = require(&s.steer, "steer")?;
    let spec = st.neighborhood()?;
    let master = s.master_seed.ok_or_else(|| CliError::Usage("steer needs master_seed".into()))?;
    let si = match st.surface {
        SteerSurfaceKind::Flat => None,
        SteerSurfaceKind::Beamformed => Some(s.si_channel()?),
    };
    let set = s.phase_shifter.weight_set();

    let run_trial = |i: usize| -> crate::Result<TrialRow> {
        let trial_seed = derive_seed(master, &format!("trial-{i}"));
        let mut rng = rng_from_seed(trial_seed);
        let tx = Direction::new(rng.random_range(st.min_az_deg..=st.max_az_deg), st.elevation_deg)?;
        let rx = Direction::new(rng.random_range(st.min_az_deg..=st.max_az_deg), st.elevation_deg)?;
        let small_seed = derive_seed(trial_seed, "small-scale");
        let surface = match &si {
            None => InrSurface::Flat(st.flat_inr_db),
            Some(h) => {
                let ctx = s.link_context_toward(h.clone(), tx, rx)?;
                InrSurface::Beamformed(BeamformedSurface::new(ctx, s.tx_geometry()?, s.rx_geometry()?, set.clone())?)
            }
        };
        let mut measurer = simulated_measurer(surface, st.small_scale_sigma_db, small_seed)?;
        let res = steer_select(tx, rx, &spec, st.target_inr_db, &mut measurer)?;
        let snr_loss_db = match measurer.surface() {
            InrSurface::Beamformed(b) => {
                let ctx = b.context();
                let loss = |before: f64, after: f64| lin_to_db_floored(before) - lin_to_db_floored(after);
                Some((
                    loss(ctx.snr_tx(&b.tx_beam(&tx))?, ctx.snr_tx(&b.tx_beam(&res.tx_dir))?),
                    loss(ctx.snr_rx(&b.rx_beam(&rx))?, ctx.snr_rx(&b.rx_beam(&res.rx_dir))?),
                ))
            }
            InrSurface::Flat(_) => None,
        };
        Ok(TrialRow {
            initial: res.initial_inr_db,
            final_: res.inr_db,
            deviation: res.deviation_norm(),
            measurements: res.measurements_used,
            met_target: res.met_target,
            snr_loss_db,
        })
    };
    let rows: Vec<TrialRow> = (0..st.trials).into_par_iter().map(run_trial).collect::<crate::Result<_>>()?;

    let mut csv = String::from("trial,inr_initial_db,inr_final_db,deviation,measurements\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{}",
            fmt_f64(r.initial),
            fmt_f64(r.final_),
            fmt_f64(r.deviation),
            r.measurements
        );
    }
    let sorted = |f: &dyn Fn(&TrialRow) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let initial = sorted(&|r| r.initial);
    let final_ = sorted(&|r| r.final_);
    let reduction = sorted(&|r| r.initial - r.final_);
    let mut cdf = String::from("quantile,inr_initial_db,inr_final_db,reduction_db\n");
    for k in 0..=20 {
        let q = k as f64 / 20.0;
        let _ = writeln!(
            cdf,
            "{},{},{},{}",
            fmt_f64(q),
            fmt_f64(quantile_sorted(&initial, q)),
            fmt_f64(quantile_sorted(&final_, q)),
            fmt_f64(quantile_sorted(&reduction, q))
        );
    }

    let mut out = Outputs::new();
    out.file("steer_trials.csv", csv);
    out.file("steer_cdf.csv", cdf);
    let med = median(&reduction);
    out.line("trials", rows.len());
    out.line("median_reduction_db", fmt_f64(med));
    out.line("median_inr_initial_db", fmt_f64(median(&initial)));
    out.line("median_inr_final_db", fmt_f64(median(&final_)));
    let met = rows.iter().filter(|r| r.met_target).count();
    out.line("met_target_fraction", fmt_f64(met as f64 / rows.len() as f64));
    let meas: Vec<f64> = rows.iter().map(|r| r.measurements as f64).collect();
    out.line("median_measurements", fmt_f64(median(&meas)));
    let losses: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.snr_loss_db).collect();
    if !losses.is_empty() {
        let tx: Vec<f64> = losses.iter().map(|l| l.0).collect();
        let rx: Vec<f64> = losses.iter().map(|l| l.1).collect();
        out.line("median_snr_tx_loss_db", fmt_f64(median(&tx)));
        out.line("median_snr_rx_loss_db", fmt_f64(median(&rx)));
    }
    if st.surface == SteerSurfaceKind::Flat && st.target_inr_db == f64::NEG_INFINITY && st.oracle_samples > 0 {
        let oracle = order_statistic_median(spec.n_offsets().pow(2), st.small_scale_sigma_db, st.oracle_samples, s.seed("steer-oracle")?);
        out.line("oracle_median_reduction_db", fmt_f64(oracle));
        out.line("oracle_gap_db", fmt_f64(med - oracle));
    }
    out.param("trials", rows.len());
    out.param("neighborhood_pairs", spec.n_offsets().pow(2));
    Ok(out)
}

/// Median of `σ·(z_0 − min_k z_k)` over `samples` draws of `n` i.i.d.
/// standard normals: the reduction pure minimization achieves on a flat
/// surface, where `z_0` is the initial pair.
pub fn order_statistic_median(n: usize, sigma_db: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let draws: Vec<f64> = (0..samples)
        .map(|_| {
            let first: f64 = rng.sample(StandardNormal);
            let min = (1..n).fold(first, |m, _| m.min(rng.sample(StandardNormal)));
            sigma_db * (first - min)
        })
        .collect();
    median(&draws)
}
