//! Simulated panels and the Monte Carlo driver.
//!
//! Factors are drawn from `U(-2.5, 2.5)`, loadings from `U(0, 6)`, regressors
//! as `N(0,1) + 0.5(|γ_i1| + |f_t1|)` and slopes as `β_ij = i/N`. Errors are
//! i.i.d. (`Dgp1`) or a cross-sectionally correlated AR(1) (`Dgp2`, `Dgp3`),
//! with normal innovations for the light-tail case and logistic innovations
//! for the heavy-tail case.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::FitConfig;
use crate::linalg::{projection_distance, sym_sqrt};
use crate::link::LinkFamily;
use crate::rng::{stream_rng, stream_seed};
use crate::selector::select_num_factors;
use crate::types::{PanelData, ParameterSet};

/// Periods simulated and discarded before an AR(1) error path is recorded.
pub const BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCase {
    /// Normal errors, probit link.
    LightTail,
    /// Logistic errors, logit link.
    HeavyTail,
}

impl TailCase {
    pub fn link(self) -> LinkFamily {
        match self {
            TailCase::LightTail => LinkFamily::Probit,
            TailCase::HeavyTail => LinkFamily::Logit,
        }
    }

    /// Case number used in reports (1 = light tail, 2 = heavy tail).
    pub fn number(self) -> u8 {
        match self {
            TailCase::LightTail => 1,
            TailCase::HeavyTail => 2,
        }
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(TailCase::LightTail),
            2 => Ok(TailCase::HeavyTail),
            _ => Err(Error::InvalidArgument(format!("case must be 1 or 2, got {k}"))),
        }
    }

    fn innovation<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            TailCase::LightTail => StandardNormal.sample(rng),
            TailCase::HeavyTail => {
                // Inverse CDF of the standard logistic; u is never exactly 0.
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                (u / (1.0 - u)).ln()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    /// Independent errors.
    Dgp1,
    /// AR(1) with coefficient 0.3 and innovation covariance `0.3^|i-j|`.
    Dgp2,
    /// As `Dgp2` with AR coefficient 0.7.
    Dgp3,
}

impl Dgp {
    pub fn ar_coefficient(self) -> f64 {
        match self {
            Dgp::Dgp1 => 0.0,
            Dgp::Dgp2 => 0.3,
            Dgp::Dgp3 => 0.7,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Dgp::Dgp1 => 1,
            Dgp::Dgp2 => 2,
            Dgp::Dgp3 => 3,
        }
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Dgp::Dgp1),
            2 => Ok(Dgp::Dgp2),
            3 => Ok(Dgp::Dgp3),
            _ => Err(Error::InvalidArgument(format!("dgp must be 1, 2 or 3, got {k}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub case: TailCase,
    pub dgp: Dgp,
    pub n: usize,
    pub t: usize,
    pub d_beta: usize,
    pub d_f: usize,
    pub seed: u64,
}

impl DgpSpec {
    /// Two regressors and two factors.
    pub fn new(case: TailCase, dgp: Dgp, n: usize, t: usize, seed: u64) -> Self {
        Self {
            case,
            dgp,
            n,
            t,
            d_beta: 2,
            d_f: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.t < 2 {
            return Err(Error::InvalidArgument(format!(
                "simulated panels need N, T >= 2, got {}×{}",
                self.n, self.t
            )));
        }
        Ok(())
    }
}

/// A simulated panel with the parameters and errors that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub data: PanelData,
    /// True slopes, loadings and (unnormalized) factors.
    pub truth: ParameterSet,
    /// Latent errors, N×T.
    pub errors: DMatrix<f64>,
}

// Stream tags for the independent pieces of a draw.
const TAG_FACTORS: u64 = 1;
const TAG_LOADINGS: u64 = 2;
const TAG_REGRESSORS: u64 = 3;
const TAG_ERRORS: u64 = 4;

pub fn gen_dgp(spec: &DgpSpec) -> Result<SimulatedPanel> {
    spec.validate()?;
    let DgpSpec { n, t, d_beta, d_f, .. } = *spec;

    let mut rng = stream_rng(&[spec.seed, TAG_FACTORS]);
    let f: DMatrix<f64> = DMatrix::from_fn(t, d_f, |_, _| rng.random_range(-2.5..2.5));
    let mut rng = stream_rng(&[spec.seed, TAG_LOADINGS]);
    let gamma: DMatrix<f64> = DMatrix::from_fn(n, d_f, |_, _| rng.random_range(0.0..6.0));
    let b = DMatrix::from_fn(n, d_beta, |i, _| (i + 1) as f64 / n as f64);

    let mut rng = stream_rng(&[spec.seed, TAG_REGRESSORS]);
    let mut x = Vec::with_capacity(n * t * d_beta);
    for i in 0..n {
        let g1 = if d_f > 0 { gamma[(i, 0)].abs() } else { 0.0 };
        for s in 0..t {
            let f1 = if d_f > 0 { f[(s, 0)].abs() } else { 0.0 };
            for _ in 0..d_beta {
                let e: f64 = StandardNormal.sample(&mut rng);
                x.push(e + 0.5 * (g1 + f1));
            }
        }
    }

    let errors = gen_errors(spec);
    let truth = ParameterSet::new(b, gamma, f)?;
    let mut y = Vec::with_capacity(n * t);
    for i in 0..n {
        for s in 0..t {
            let xs = &x[(i * t + s) * d_beta..(i * t + s + 1) * d_beta];
            let mut z: f64 = xs.iter().zip(truth.b.row(i).iter()).map(|(a, c)| a * c).sum();
            for k in 0..d_f {
                z += truth.gamma[(i, k)] * truth.f[(s, k)];
            }
            y.push(if z >= errors[(i, s)] { 1.0 } else { 0.0 });
        }
    }
    let data = PanelData::new(n, t, d_beta, y, x)?;
    Ok(SimulatedPanel { data, truth, errors })
}

fn gen_errors(spec: &DgpSpec) -> DMatrix<f64> {
    let (n, t) = (spec.n, spec.t);
    let mut rng = stream_rng(&[spec.seed, TAG_ERRORS]);
    let rho = spec.dgp.ar_coefficient();
    if spec.dgp == Dgp::Dgp1 {
        // Column-major fill: period by period, matching the AR paths below.
        return DMatrix::from_fn(n, t, |_, _| spec.case.innovation(&mut rng));
    }
    let cov = DMatrix::from_fn(n, n, |i, j| 0.3f64.powi(i.abs_diff(j) as i32));
    let root = sym_sqrt(&cov);
    let mut eps = DVector::zeros(n);
    let mut out = DMatrix::zeros(n, t);
    for step in 0..BURN_IN + t {
        let nu = DVector::from_fn(n, |_, _| spec.case.innovation(&mut rng));
        eps = &eps * rho + &root * nu;
        if step >= BURN_IN {
            out.set_column(step - BURN_IN, &eps);
        }
    }
    out
}

/// `‖P_{F̂} − P_{F₀}‖_F`, the distance between the column-space projections.
pub fn rmse_f(f_hat: &DMatrix<f64>, f_true: &DMatrix<f64>) -> Result<f64> {
    projection_distance(f_hat, f_true)
}

/// Share of selections that are correct, too small and too large. The three
/// always sum to exactly one.
pub fn selection_rates(d_hats: &[usize], d_f: usize) -> (f64, f64, f64) {
    if d_hats.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let m = d_hats.len() as f64;
    let correct = d_hats.iter().filter(|&&d| d == d_f).count() as f64 / m;
    let under = d_hats.iter().filter(|&&d| d < d_f).count() as f64 / m;
    let over = 1.0 - (correct + under);
    (correct, under, over)
}

/// Result of one Monte Carlo replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub d_hat: usize,
    pub b_hat: DMatrix<f64>,
    pub b_true: DMatrix<f64>,
    /// Squared projection distance of the factor estimate.
    pub f_dist_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub spec: DgpSpec,
    pub d_max: usize,
    pub pc: f64,
    pub pu: f64,
    pub po: f64,
    pub rmse_b: f64,
    pub rmse_f: f64,
    /// Per slope component.
    pub std_beta: Vec<f64>,
    /// Replications requested.
    pub m: usize,
    /// Replications that failed and were left out of the metrics.
    pub failures: usize,
    pub failure_messages: Vec<String>,
    /// Selected number of factors, in replication order (successful ones).
    pub d_hats: Vec<usize>,
}

/// Metrics over a set of successful replications.
pub fn summarize(spec: &DgpSpec, d_max: usize, m: usize, reps: &[Replication], failures: Vec<String>) -> McReport {
    let d_hats: Vec<usize> = reps.iter().map(|r| r.d_hat).collect();
    let (pc, pu, po) = selection_rates(&d_hats, spec.d_f);
    let ok = reps.len() as f64;
    let (rmse_b, rmse_f, std_beta) = if reps.is_empty() {
        (f64::NAN, f64::NAN, vec![f64::NAN; spec.d_beta])
    } else {
        let n = spec.n as f64;
        let b_sq: f64 = reps.iter().map(|r| (&r.b_hat - &r.b_true).norm_squared() / n).sum();
        let f_sq: f64 = reps.iter().map(|r| r.f_dist_sq).sum();
        let std_beta = (0..spec.d_beta)
            .map(|l| {
                (0..spec.n)
                    .map(|i| {
                        let ms: f64 = reps.iter().map(|r| (r.b_hat[(i, l)] - r.b_true[(i, l)]).powi(2)).sum();
                        (ms / ok).sqrt()
                    })
                    .sum::<f64>()
                    / n
            })
            .collect();
        ((b_sq / ok).sqrt(), (f_sq / ok).sqrt(), std_beta)
    };
    McReport {
        spec: *spec,
        d_max,
        pc,
        pu,
        po,
        rmse_b,
        rmse_f,
        std_beta,
        m,
        failures: failures.len(),
        failure_messages: failures,
        d_hats,
    }
}

/// Seed of replication `rep` under a base seed.
pub fn replication_seed(base: u64, rep: usize) -> u64 {
    stream_seed(&[base, rep as u64])
}

/// Simulates, selects the number of factors and records the metrics inputs.
pub fn run_replication(spec: &DgpSpec, rep: usize, cfg: &FitConfig, d_max: usize) -> Result<Replication> {
    let s = DgpSpec {
        seed: replication_seed(spec.seed, rep),
        ..*spec
    };
    let sim = gen_dgp(&s)?;
    let sel = select_num_factors(&sim.data, spec.case.link(), cfg, d_max)?;
    let fit = sel.chosen_fit();
    let dist = rmse_f(&fit.params.f, &sim.truth.f)?;
    Ok(Replication {
        d_hat: sel.chosen_d,
        b_hat: fit.params.b.clone(),
        b_true: sim.truth.b,
        f_dist_sq: dist * dist,
    })
}

/// Runs `m` replications in parallel. Fails if 5% or more of them fail.
pub fn run_monte_carlo(spec: &DgpSpec, m: usize, cfg: &FitConfig, d_max: usize) -> Result<McReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("at least one replication is required".into()));
    }
    spec.validate()?;
    let outcomes: Vec<Result<Replication>> = (0..m)
        .into_par_iter()
        .map(|rep| run_replication(spec, rep, cfg, d_max))
        .collect();
    let mut reps = Vec::with_capacity(m);
    let mut failures = Vec::new();
    for (rep, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(r) => reps.push(r),
            Err(e) => failures.push(format!("replication {rep}: {e}")),
        }
    }
    if failures.len() * 20 >= m {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: m,
        });
    }
    Ok(summarize(spec, d_max, m, &reps, failures))
}

/// Plain-text table with selection rates and estimation errors.
pub fn render_table(reports: &[McReport]) -> String {
    let d_beta = reports.iter().map(|r| r.std_beta.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = write!(
        out,
        "{:<6} {:<5} {:>5} {:>5} {:>5} | {:>6} {:>6} {:>6} | {:>8} {:>8}",
        "Case", "DGP", "N", "T", "M", "Pc", "Pu", "Po", "RMSE_B", "RMSE_F"
    );
    for l in 0..d_beta {
        let _ = write!(out, " {:>9}", format!("Std_b{}", l + 1));
    }
    out.push('\n');
    for r in reports {
        let _ = write!(
            out,
            "{:<6} {:<5} {:>5} {:>5} {:>5} | {:>6.3} {:>6.3} {:>6.3} | {:>8.4} {:>8.4}",
            r.spec.case.number(),
            r.spec.dgp.number(),
            r.spec.n,
            r.spec.t,
            r.m - r.failures,
            r.pc,
            r.pu,
            r.po,
            r.rmse_b,
            r.rmse_f
        );
        for s in &r.std_beta {
            let _ = write!(out, " {s:>9.4}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(dgp: Dgp, n: usize, t: usize) -> DgpSpec {
        DgpSpec::new(TailCase::LightTail, dgp, n, t, 11)
    }

    #[test]
    fn slopes_are_unit_rank_over_n() {
        let sim = gen_dgp(&spec(Dgp::Dgp1, 4, 5)).unwrap();
        for l in 0..2 {
            let col: Vec<f64> = sim.truth.b.column(l).iter().copied().collect();
            assert_eq!(col, vec![0.25, 0.5, 0.75, 1.0]);
        }
    }

    #[test]
    fn regressor_mean_matches_uniform_moments() {
        // Loadings and factors are shared within a panel, so pool many small
        // panels to get enough independent draws of both.
        let (mut sum, mut count) = (0.0, 0usize);
        for seed in 0..2000 {
            let s = DgpSpec {
                d_beta: 1,
                seed,
                ..spec(Dgp::Dgp1, 25, 25)
            };
            let sim = gen_dgp(&s).unwrap();
            sum += sim.data.x_raw().iter().sum::<f64>();
            count += sim.data.x_raw().len();
        }
        let mean = sum / count as f64;
        assert!((mean - 2.125).abs() < 0.01, "{mean}");
    }

    #[test]
    fn iid_errors_are_serially_uncorrelated() {
        let s = DgpSpec {
            d_beta: 1,
            d_f: 1,
            ..spec(Dgp::Dgp1, 2, 100_000)
        };
        let e = gen_dgp(&s).unwrap().errors;
        let row: Vec<f64> = e.row(0).iter().copied().collect();
        assert!(lag1_corr(&row).abs() < 0.01);
    }

    #[test]
    fn ar_errors_have_the_requested_persistence() {
        for (dgp, rho) in [(Dgp::Dgp2, 0.3f64), (Dgp::Dgp3, 0.7)] {
            let s = DgpSpec {
                d_beta: 1,
                d_f: 1,
                ..spec(dgp, 3, 50_000)
            };
            let e = gen_dgp(&s).unwrap().errors;
            let row: Vec<f64> = e.row(1).iter().copied().collect();
            assert!((lag1_corr(&row) - rho).abs() < 0.02);
            // Contemporaneous correlation of neighbours is 0.3 in the innovations
            // and survives the common AR filter.
            let a: Vec<f64> = e.row(0).iter().copied().collect();
            assert!((corr(&a, &row) - 0.3).abs() < 0.02);
        }
    }

    #[test]
    fn logistic_innovations_have_logistic_variance() {
        let s = DgpSpec {
            case: TailCase::HeavyTail,
            d_beta: 1,
            d_f: 1,
            ..spec(Dgp::Dgp1, 4, 50_000)
        };
        let e = gen_dgp(&s).unwrap().errors;
        let var = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
        let target = std::f64::consts::PI.powi(2) / 3.0;
        assert!((var - target).abs() < 0.05 * target);
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(Dgp::Dgp2, 6, 9);
        assert_eq!(gen_dgp(&s).unwrap(), gen_dgp(&s).unwrap());
        let other = DgpSpec { seed: 12, ..s };
        assert_ne!(gen_dgp(&s).unwrap().data, gen_dgp(&other).unwrap().data);
    }

    #[test]
    fn selection_rate_counting() {
        let (pc, pu, po) = selection_rates(&[2, 2, 1, 3], 2);
        assert_eq!((pc, pu, po), (0.5, 0.25, 0.25));
    }

    #[test]
    fn perfect_recovery_has_zero_errors() {
        let sim = gen_dgp(&spec(Dgp::Dgp1, 5, 6)).unwrap();
        let rep = Replication {
            d_hat: 2,
            b_hat: sim.truth.b.clone(),
            b_true: sim.truth.b.clone(),
            f_dist_sq: 0.0,
        };
        let r = summarize(&spec(Dgp::Dgp1, 5, 6), 3, 2, &[rep.clone(), rep], vec![]);
        assert_eq!(r.rmse_b, 0.0);
        assert_eq!(r.std_beta, vec![0.0, 0.0]);
        assert_eq!(r.pc, 1.0);
    }

    #[test]
    fn orthogonal_axes_distance() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((rmse_f(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn lag1_corr(v: &[f64]) -> f64 {
        corr(&v[1..], &v[..v.len() - 1])
    }

    proptest! {
        #[test]
        fn rates_sum_to_one(d_hats in proptest::collection::vec(0usize..6, 1..200), d_f in 0usize..5) {
            let (pc, pu, po) = selection_rates(&d_hats, d_f);
            prop_assert_eq!(pc + pu + po, 1.0);
            prop_assert!(pc >= 0.0 && pu >= 0.0 && po >= 0.0);
        }

        #[test]
        fn projection_distance_ignores_rotation(seed in 0u64..1000, d in 1usize..4) {
            let mut rng = stream_rng(&[seed]);
            let a = DMatrix::from_fn(20, d, |_, _| StandardNormal.sample(&mut rng));
            let b = DMatrix::from_fn(20, d, |_, _| StandardNormal.sample(&mut rng));
            let raw = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
            let o = raw.qr().q();
            let base = rmse_f(&a, &b).unwrap();
            prop_assert!((rmse_f(&(&a * &o), &b).unwrap() - base).abs() < 1e-10);
            prop_assert!((rmse_f(&a, &(&b * &o)).unwrap() - base).abs() < 1e-10);
        }
    }
}
