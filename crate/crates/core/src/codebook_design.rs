//! Self-interference-aware design of transmit and receive beam codebooks.
//!
//! Minimizes the total coupling `‖W^H H F‖_F^2` between every transmit and
//! receive beam subject to a coverage-variance budget on each side,
//! `‖N·1 − diag(A^H X)‖^2 ≤ σ^2 N^2 M`, and per-entry realizability.
//!
//! The solver alternates between the two codebooks. With `W` fixed the
//! objective separates over the columns of `F` as `f_i^H Q f_i` with
//! `Q = H^H W W^H H`, and each column is improved independently:
//! coordinate descent over the realizable entries on the penalized cost
//! `f^H Q f + λ |N − a^H f|^2`, accepted only when it lowers `f^H Q f` and
//! keeps the column's coverage error within its share `σ^2 N^2` of the
//! budget. `λ` doubles on a coverage violation and halves after an accepted
//! step. Every iterate is realizable, so no final projection is needed and
//! the objective trace is non-increasing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::arrays::{steering_vector, ArrayGeometry, Codebook, Direction, WeightSet};
use crate::channels::SiChannel;
use crate::error::{check_len, Error, Result};
use crate::units::lin_to_db_floored;

/// Coverage directions and their steering vectors (columns of `A`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSpec {
    directions: Vec<Direction>,
    matrix: DMatrix<Complex64>,
}

impl CoverageSpec {
    pub fn new(geometry: &ArrayGeometry, directions: Vec<Direction>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::Input("coverage needs at least one direction".into()));
        }
        let cols: Vec<_> = directions.iter().map(|d| steering_vector(geometry, d)).collect();
        Ok(Self {
            matrix: DMatrix::from_columns(&cols),
            directions,
        })
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// `N x M` steering matrix.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn n_elements(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_beams(&self) -> usize {
        self.matrix.ncols()
    }

    /// Coverage-variance budget `σ^2 N^2 M`.
    pub fn budget(&self, sigma2: f64) -> f64 {
        let n = self.n_elements() as f64;
        sigma2 * n * n * self.n_beams() as f64
    }
}

fn column_coverage(a: &DVector<Complex64>, x: &DVector<Complex64>) -> f64 {
    (Complex64::new(a.len() as f64, 0.0) - a.dotc(x)).norm_sqr()
}

/// `‖N·1 − diag(A^H X)‖^2`.
pub fn coverage_variance(codebook: &Codebook, coverage: &CoverageSpec) -> Result<f64> {
    check_len("codebook size vs coverage directions", coverage.n_beams(), codebook.len())?;
    check_len("codebook beam length vs coverage array", coverage.n_elements(), codebook.n_elements())?;
    Ok(codebook
        .beams()
        .iter()
        .zip(coverage.matrix.column_iter())
        .map(|(b, a)| column_coverage(&a.into_owned(), b.as_vector()))
        .sum())
}

fn coupling(f: &DMatrix<Complex64>, w: &DMatrix<Complex64>, h: &DMatrix<Complex64>) -> f64 {
    (w.adjoint() * h * f).norm_squared()
}

/// Mean coupled SI per beam pair: `10 log10(‖W^H H F‖_F^2 / (M_tx M_rx))`,
/// floored at −300 dB.
pub fn average_coupling_db(f: &Codebook, w: &Codebook, h: &SiChannel) -> Result<f64> {
    check_len("transmit codebook vs SI channel columns", h.n_tx(), f.n_elements())?;
    check_len("receive codebook vs SI channel rows", h.n_rx(), w.n_elements())?;
    let total = coupling(&f.to_matrix(), &w.to_matrix(), &h.matrix);
    Ok(lin_to_db_floored(total / (f.len() * w.len()) as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookDesignConfig {
    pub sigma2_tx: f64,
    pub sigma2_rx: f64,
    pub max_iters: usize,
    /// Relative objective decrease below which the solver stops.
    pub tolerance: f64,
    /// Realizable weights: [`WeightSet::UnitModulus`] or quantized.
    pub set: WeightSet,
}

impl Default for CodebookDesignConfig {
    fn default() -> Self {
        Self {
            sigma2_tx: 0.1,
            sigma2_rx: 0.1,
            max_iters: 200,
            tolerance: 1e-6,
            set: WeightSet::UnitModulus,
        }
    }
}

impl CodebookDesignConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("sigma2_tx", self.sigma2_tx), ("sigma2_rx", self.sigma2_rx)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and ≥ 0, got {s}")));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::Config("tolerance must be finite and ≥ 0".into()));
        }
        match &self.set {
            WeightSet::Any => Err(Error::Config(
                "codebook design needs unit-modulus or quantized weights".into(),
            )),
            WeightSet::Quantized(spec) => spec.validate(),
            WeightSet::UnitModulus => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookDesignResult {
    pub f: Codebook,
    pub w: Codebook,
    /// `‖W^H H F‖_F^2` at initialization and after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub coverage_tx: f64,
    pub coverage_rx: f64,
    pub budget_tx: f64,
    pub budget_rx: f64,
    /// False when the coverage budget could not be met (best effort returned).
    pub feasible_tx: bool,
    pub feasible_rx: bool,
    pub iterations: usize,
}

impl CodebookDesignResult {
    pub fn initial_objective(&self) -> f64 {
        self.objective_trace[0]
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }
}

// Slack on the budget comparison so an exactly matched codebook with
// round-off still counts as σ² = 0 feasible.
fn budget_slack(coverage: &CoverageSpec) -> f64 {
    1e-18 * coverage.budget(1.0)
}

const MAX_PENALTY_DOUBLINGS: usize = 40;
const MAX_SWEEPS: usize = 50;

/// Optimize both codebooks starting from projected matched (conjugate) beams.
pub fn design_codebooks(
    h: &SiChannel,
    cov_tx: &CoverageSpec,
    cov_rx: &CoverageSpec,
    config: &CodebookDesignConfig,
) -> Result<CodebookDesignResult> {
    config.validate()?;
    check_len("SI channel columns vs transmit array", cov_tx.n_elements(), h.n_tx())?;
    check_len("SI channel rows vs receive array", cov_rx.n_elements(), h.n_rx())?;

    let project = |m: &DMatrix<Complex64>| {
        let cols: Vec<_> = m
            .column_iter()
            .map(|c| config.set.project(&c.into_owned()).weights.into_vector())
            .collect();
        DMatrix::from_columns(&cols)
    };
    let mut f = project(&cov_tx.matrix);
    let mut w = project(&cov_rx.matrix);

    let n_tx = cov_tx.n_elements() as f64;
    let n_rx = cov_rx.n_elements() as f64;
    let per_column_tx = config.sigma2_tx * n_tx * n_tx;
    let per_column_rx = config.sigma2_rx * n_rx * n_rx;
    let caps_tx = column_caps(&cov_tx.matrix, &f, per_column_tx);
    let caps_rx = column_caps(&cov_rx.matrix, &w, per_column_rx);
    let mut lambda_tx = vec![f64::NAN; f.ncols()];
    let mut lambda_rx = vec![f64::NAN; w.ncols()];

    let hm = &h.matrix;
    let mut objective = coupling(&f, &w, hm);
    let mut trace = vec![objective];
    let mut iterations = 0;

    while iterations < config.max_iters && objective > 0.0 {
        iterations += 1;
        let hw = hm.adjoint() * &w;
        let q_tx = &hw * hw.adjoint();
        improve_columns(&mut f, &mut lambda_tx, &q_tx, &cov_tx.matrix, &caps_tx, &config.set);

        let hf = hm * &f;
        let q_rx = &hf * hf.adjoint();
        improve_columns(&mut w, &mut lambda_rx, &q_rx, &cov_rx.matrix, &caps_rx, &config.set);

        let next = coupling(&f, &w, hm);
        // Guard against round-off in the recomputed objective.
        let next = next.min(objective);
        let rel = (objective - next) / objective;
        objective = next;
        trace.push(objective);
        if rel < config.tolerance {
            break;
        }
    }

    let f_cb = Codebook::from_matrix(&f, config.set.clone(), Some(cov_tx.directions.clone()))?;
    let w_cb = Codebook::from_matrix(&w, config.set.clone(), Some(cov_rx.directions.clone()))?;
    let coverage_tx = coverage_variance(&f_cb, cov_tx)?;
    let coverage_rx = coverage_variance(&w_cb, cov_rx)?;
    let budget_tx = cov_tx.budget(config.sigma2_tx);
    let budget_rx = cov_rx.budget(config.sigma2_rx);
    Ok(CodebookDesignResult {
        feasible_tx: coverage_tx <= budget_tx + budget_slack(cov_tx),
        feasible_rx: coverage_rx <= budget_rx + budget_slack(cov_rx),
        f: f_cb,
        w: w_cb,
        objective_trace: trace,
        coverage_tx,
        coverage_rx,
        budget_tx,
        budget_rx,
        iterations,
    })
}

// Per-column coverage cap. A column starting above its share keeps its
// initial error as the cap (best effort for infeasible budgets). With a zero
// share and an already matched column the only feasible beam is the matched
// one, so the column is frozen (`None`): the coverage error is quartic in
// small tangent perturbations and a numeric cap would not pin it down.
fn column_caps(a: &DMatrix<Complex64>, x: &DMatrix<Complex64>, share: f64) -> Vec<Option<f64>> {
    let n2 = (a.nrows() * a.nrows()) as f64;
    a.column_iter()
        .zip(x.column_iter())
        .map(|(ac, xc)| {
            let initial = column_coverage(&ac.into_owned(), &xc.into_owned());
            if share == 0.0 && initial <= 1e-24 * n2 {
                None
            } else {
                Some(initial.max(share))
            }
        })
        .collect()
}

fn improve_columns(
    x: &mut DMatrix<Complex64>,
    lambdas: &mut [f64],
    q: &DMatrix<Complex64>,
    a: &DMatrix<Complex64>,
    caps: &[Option<f64>],
    set: &WeightSet,
) {
    let n = x.nrows() as f64;
    let q_trace: f64 = q.diagonal().iter().map(|z| z.re).sum();
    if q_trace <= 0.0 {
        return;
    }
    let updates: Vec<(DVector<Complex64>, f64)> = (0..x.ncols())
        .into_par_iter()
        .map(|i| {
            let lambda = if lambdas[i].is_nan() { q_trace / (n * n) } else { lambdas[i] };
            let current = x.column(i).into_owned();
            match caps[i] {
                Some(cap) => improve_column(&current, q, &a.column(i).into_owned(), cap, lambda, set),
                None => (current, lambda),
            }
        })
        .collect();
    for (i, (col, lambda)) in updates.into_iter().enumerate() {
        x.set_column(i, &col);
        lambdas[i] = lambda;
    }
}

fn quad(q: &DMatrix<Complex64>, x: &DVector<Complex64>) -> f64 {
    x.dotc(&(q * x)).re
}

fn improve_column(
    current: &DVector<Complex64>,
    q: &DMatrix<Complex64>,
    a: &DVector<Complex64>,
    cap: f64,
    mut lambda: f64,
    set: &WeightSet,
) -> (DVector<Complex64>, f64) {
    let base = quad(q, current);
    for _ in 0..MAX_PENALTY_DOUBLINGS {
        let cand = penalized_descent(current, q, a, lambda, set);
        if column_coverage(a, &cand) > cap {
            lambda *= 2.0;
            continue;
        }
        if quad(q, &cand) < base {
            return (cand, lambda * 0.5);
        }
        // Feasible but no better: a larger penalty only pulls harder toward
        // the matched beam, so stop here.
        break;
    }
    (current.clone(), lambda)
}

/// Coordinate descent on `x^H Q x + λ |N − a^H x|^2` over realizable entries.
fn penalized_descent(
    start: &DVector<Complex64>,
    q: &DMatrix<Complex64>,
    a: &DVector<Complex64>,
    lambda: f64,
    set: &WeightSet,
) -> DVector<Complex64> {
    let n = start.len();
    // P = Q + λ a a^H, b = λ N a; cost = x^H P x − 2 Re(b^H x) + const.
    let p = q + a * a.adjoint() * Complex64::new(lambda, 0.0);
    let b = a * Complex64::new(lambda * n as f64, 0.0);
    let mut x = start.clone();
    let mut px = &p * &x;
    let levels = match set {
        WeightSet::Quantized(spec) => spec.amplitude_levels(),
        _ => vec![1.0],
    };

    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for m in 0..n {
            let pmm = p[(m, m)].re;
            // Gradient term excluding the entry's own contribution.
            let c = px[m] - p[(m, m)] * x[m] - b[m];
            let cost = |z: Complex64| pmm * z.norm_sqr() + 2.0 * (z.conj() * c).re;
            let target = -c;
            let mut best = x[m];
            let mut best_cost = cost(x[m]);
            for &rho in &levels {
                let z = match set {
                    WeightSet::Quantized(_) => {
                        let raw = DVector::from_element(1, Complex64::from_polar(rho, target.arg()));
                        let snapped = set.project(&raw).weights.into_vector()[0];
                        Complex64::from_polar(rho, snapped.arg())
                    }
                    _ => {
                        if target.norm() == 0.0 {
                            continue;
                        }
                        target / target.norm()
                    }
                };
                let zc = cost(z);
                if zc < best_cost - 1e-15 * best_cost.abs().max(1e-300) {
                    best = z;
                    best_cost = zc;
                }
            }
            if best != x[m] {
                let delta = best - x[m];
                px += p.column(m) * delta;
                x[m] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    match set {
        // Re-snap so the stored entries are bit-exact members of the set.
        WeightSet::Quantized(_) => set.project(&x).weights.into_vector(),
        _ => x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::{azimuth_grid, conjugate_codebook, PhaseShifterSpec};
    use crate::channels::{rayleigh_si_channel, spherical_wave_si_channel, ArrayPose};
    use approx::assert_abs_diff_eq;

    fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<Complex64, R, C>>(
        m: &nalgebra::Matrix<Complex64, R, C, S>,
    ) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn ula_setup(n: usize, m: usize) -> (ArrayGeometry, CoverageSpec) {
        let g = ArrayGeometry::ula(n, 0.5).unwrap();
        let cov = CoverageSpec::new(&g, azimuth_grid(-60.0, 60.0, m).unwrap()).unwrap();
        (g, cov)
    }

    #[test]
    fn coverage_variance_examples() {
        let (g, cov) = ula_setup(8, 5);
        let cb = conjugate_codebook(&g, cov.directions(), &WeightSet::Any).unwrap();
        assert!(coverage_variance(&cb, &cov).unwrap() < 1e-20);

        let zeros = Codebook::from_matrix(&DMatrix::zeros(8, 5), WeightSet::Any, None).unwrap();
        assert_abs_diff_eq!(coverage_variance(&zeros, &cov).unwrap(), 64.0 * 5.0, epsilon = 1e-9);

        // N = 2 broadside with a^H f = 1.
        let g2 = ArrayGeometry::ula(2, 0.5).unwrap();
        let cov2 = CoverageSpec::new(&g2, vec![Direction::azimuth(0.0).unwrap()]).unwrap();
        let f = Codebook::from_matrix(
            &DMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]),
            WeightSet::Any,
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(coverage_variance(&f, &cov2).unwrap(), 1.0, epsilon = 1e-15);
        assert!(coverage_variance(&zeros, &cov2).is_err());
    }

    #[test]
    fn average_coupling_examples() {
        let (g, cov) = ula_setup(4, 3);
        let cb = conjugate_codebook(&g, cov.directions(), &WeightSet::UnitModulus).unwrap();
        assert_eq!(average_coupling_db(&cb, &cb, &SiChannel::zeros(4, 4)).unwrap(), crate::units::DB_FLOOR);

        let h = rayleigh_si_channel(4, 4, 3);
        let f1 = Codebook::new(vec![cb.beams()[0].clone()], None).unwrap();
        let w1 = Codebook::new(vec![cb.beams()[2].clone()], None).unwrap();
        let pair = w1.beams()[0].as_vector().dotc(&(&h.matrix * f1.beams()[0].as_vector())).norm_sqr();
        assert_abs_diff_eq!(average_coupling_db(&f1, &w1, &h).unwrap(), 10.0 * pair.log10(), epsilon = 1e-12);

        let base = average_coupling_db(&cb, &cb, &h).unwrap();
        assert_abs_diff_eq!(average_coupling_db(&cb, &cb, &h.scaled_db(20.0)).unwrap(), base + 20.0, epsilon = 1e-9);
        assert!(average_coupling_db(&cb, &cb, &SiChannel::zeros(3, 4)).is_err());
    }

    #[test]
    fn zero_channel_returns_projected_conjugates() {
        let (g, cov) = ula_setup(8, 4);
        let spec = PhaseShifterSpec::phase_only(3).unwrap();
        let config = CodebookDesignConfig {
            set: WeightSet::Quantized(spec),
            ..CodebookDesignConfig::default()
        };
        let r = design_codebooks(&SiChannel::zeros(8, 8), &cov, &cov, &config).unwrap();
        let baseline = conjugate_codebook(&g, cov.directions(), &config.set).unwrap();
        assert_eq!(r.f.to_matrix(), baseline.to_matrix());
        assert_eq!(r.w.to_matrix(), baseline.to_matrix());
        assert_eq!(r.objective_trace, vec![0.0]);
    }

    #[test]
    fn zero_sigma_forces_matched_beams() {
        let (_, cov) = ula_setup(8, 4);
        let h = rayleigh_si_channel(8, 8, 17);
        let config = CodebookDesignConfig {
            sigma2_tx: 0.0,
            sigma2_rx: 0.0,
            ..CodebookDesignConfig::default()
        };
        let r = design_codebooks(&h, &cov, &cov, &config).unwrap();
        assert!(max_abs(&(r.f.to_matrix() - cov.matrix())) <= 1e-9);
        assert!(max_abs(&(r.w.to_matrix() - cov.matrix())) <= 1e-9);
        assert!(r.feasible_tx && r.feasible_rx);
    }

    #[test]
    fn design_reduces_coupling_and_respects_coverage() {
        let (g, cov) = ula_setup(8, 4);
        let h = spherical_wave_si_channel(&g, &g, &ArrayPose::default(), 1.0).unwrap();
        for set in [WeightSet::UnitModulus, WeightSet::Quantized(PhaseShifterSpec::phase_only(4).unwrap())] {
            let config = CodebookDesignConfig {
                set: set.clone(),
                ..CodebookDesignConfig::default()
            };
            let r = design_codebooks(&h, &cov, &cov, &config).unwrap();
            assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
            assert!(r.final_objective() < r.initial_objective());
            assert!(r.feasible_tx && r.feasible_rx);
            assert!(r.coverage_tx <= r.budget_tx && r.coverage_rx <= r.budget_rx);
            for b in r.f.beams().iter().chain(r.w.beams()) {
                assert!(set.contains(b.as_vector()));
            }
            let baseline = conjugate_codebook(&g, cov.directions(), &set).unwrap();
            assert!(
                average_coupling_db(&r.f, &r.w, &h).unwrap()
                    <= average_coupling_db(&baseline, &baseline, &h).unwrap() + 1e-9
            );
        }
    }

    #[test]
    fn quantized_zero_sigma_is_flagged() {
        let (_, cov) = ula_setup(8, 4);
        let h = rayleigh_si_channel(8, 8, 2);
        let config = CodebookDesignConfig {
            sigma2_tx: 0.0,
            sigma2_rx: 0.0,
            set: WeightSet::Quantized(PhaseShifterSpec::phase_only(1).unwrap()),
            ..CodebookDesignConfig::default()
        };
        let r = design_codebooks(&h, &cov, &cov, &config).unwrap();
        assert!(!r.feasible_tx || !r.feasible_rx);
    }

    #[test]
    fn permuting_directions_permutes_columns() {
        let g = ArrayGeometry::ula(6, 0.5).unwrap();
        let dirs = azimuth_grid(-60.0, 60.0, 4).unwrap();
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<_> = perm.iter().map(|&k| dirs[k]).collect();
        let h = rayleigh_si_channel(6, 6, 21);
        let config = CodebookDesignConfig::default();
        let cov = CoverageSpec::new(&g, dirs).unwrap();
        let cov_p = CoverageSpec::new(&g, permuted).unwrap();
        let a = design_codebooks(&h, &cov, &cov, &config).unwrap();
        let b = design_codebooks(&h, &cov_p, &cov_p, &config).unwrap();
        let (af, bf) = (a.f.to_matrix(), b.f.to_matrix());
        for (col, &k) in perm.iter().enumerate() {
            let d = max_abs(&(bf.column(col) - af.column(k)).into_owned());
            // Summation order inside W W^H differs, so only round-off separates them.
            assert!(d < 1e-6, "column {col} differs by {d:e}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (_, cov) = ula_setup(4, 2);
        let h = SiChannel::zeros(4, 4);
        let mut config = CodebookDesignConfig {
            set: WeightSet::Any,
            ..CodebookDesignConfig::default()
        };
        assert!(matches!(design_codebooks(&h, &cov, &cov, &config), Err(Error::Config(_))));
        config.set = WeightSet::UnitModulus;
        config.sigma2_rx = -1.0;
        assert!(design_codebooks(&h, &cov, &cov, &config).is_err());
        config.sigma2_rx = 0.1;
        assert!(design_codebooks(&SiChannel::zeros(3, 4), &cov, &cov, &config).is_err());
    }
}
