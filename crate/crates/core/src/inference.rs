//! Sandwich covariances, the mean-group slope estimator, half-panel
//! jackknife bias correction and average partial effects.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig, FitResult};
use crate::linalg::sym_inverse_or_pinv;
use crate::link::LinkFamily;
use crate::rng::stream_rng;
use crate::types::{cell_index, PanelData};

/// Per-unit and per-period covariance pieces and their sandwiches.
///
/// For unit `i`, with `û_it = (x_it, f̂_t)`:
/// `Σ_θ,i = (1/T) Σ_t 𝗀_it² û û'`, `Σ_u,i = (1/T) Σ_t 𝔤_it û û'` and
/// `Var(θ̂_i) = Σ_u,i⁻¹ Σ_θ,i Σ_u,i⁻¹ / T`. Periods are analogous with `γ̂_i`
/// in place of `û_it` and `N` in place of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub sigma_theta: Vec<DMatrix<f64>>,
    pub sigma_u: Vec<DMatrix<f64>>,
    pub sigma_f: Vec<DMatrix<f64>>,
    pub sigma_gamma: Vec<DMatrix<f64>>,
    pub var_theta: Vec<DMatrix<f64>>,
    pub var_f: Vec<DMatrix<f64>>,
    /// Units whose bread `Σ_u,i` was singular (pseudo-inverse used).
    pub singular_units: Vec<bool>,
    pub singular_periods: Vec<bool>,
}

impl CovarianceSet {
    /// Standard errors of `θ̂_i = (β̂_i, γ̂_i)`.
    pub fn se_theta(&self, i: usize) -> Vec<f64> {
        self.var_theta[i].diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn se_f(&self, t: usize) -> Vec<f64> {
        self.var_f[t].diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

fn u_hat(data: &PanelData, f: &DMatrix<f64>, i: usize, t: usize) -> DVector<f64> {
    let x = data.x(i, t);
    DVector::from_iterator(x.len() + f.ncols(), x.iter().copied().chain(f.row(t).iter().copied()))
}

fn sandwich(bread: &DMatrix<f64>, meat: &DMatrix<f64>, scale: f64) -> (DMatrix<f64>, bool) {
    let (inv, flagged) = sym_inverse_or_pinv(bread);
    let v = &inv * meat * &inv / scale;
    // Symmetrize away rounding.
    ((&v + v.transpose()) * 0.5, flagged)
}

pub fn covariances(data: &PanelData, fit: &FitResult) -> Result<CovarianceSet> {
    covariances_with(data, fit, &|i, s| data.y(i, s))
}

/// Outcomes come from `y` so tests can plug in fitted probabilities.
fn covariances_with(
    data: &PanelData,
    fit: &FitResult,
    y: &(dyn Fn(usize, usize) -> f64 + Sync),
) -> Result<CovarianceSet> {
    let params = &fit.params;
    params.check_against(data)?;
    let obj = &fit.objective;
    let (n, t) = (data.n(), data.t());
    let p = data.d_beta() + params.d_f();
    let d_f = params.d_f();

    let units: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s_theta = DMatrix::zeros(p, p);
            let mut s_u = DMatrix::zeros(p, p);
            for s in 0..t {
                let z = cell_index(data, params, i, s);
                let u = u_hat(data, &params.f, i, s);
                let outer = &u * u.transpose();
                let w = obj.residual_weight(y(i, s), z);
                s_theta += &outer * (w * w);
                s_u += outer * obj.info_weight(z);
            }
            s_theta /= t as f64;
            s_u /= t as f64;
            let (var, flagged) = sandwich(&s_u, &s_theta, t as f64);
            (s_theta, s_u, var, flagged)
        })
        .collect();

    let periods: Vec<_> = (0..t)
        .into_par_iter()
        .map(|s| {
            let mut s_f = DMatrix::zeros(d_f, d_f);
            let mut s_g = DMatrix::zeros(d_f, d_f);
            for i in 0..n {
                let z = cell_index(data, params, i, s);
                let g = params.gamma.row(i).transpose();
                let outer = &g * g.transpose();
                let w = obj.residual_weight(y(i, s), z);
                s_f += &outer * (w * w);
                s_g += outer * obj.info_weight(z);
            }
            s_f /= n as f64;
            s_g /= n as f64;
            let (var, flagged) = sandwich(&s_g, &s_f, n as f64);
            (s_f, s_g, var, flagged)
        })
        .collect();

    let mut out = CovarianceSet {
        sigma_theta: Vec::with_capacity(n),
        sigma_u: Vec::with_capacity(n),
        sigma_f: Vec::with_capacity(t),
        sigma_gamma: Vec::with_capacity(t),
        var_theta: Vec::with_capacity(n),
        var_f: Vec::with_capacity(t),
        singular_units: Vec::with_capacity(n),
        singular_periods: Vec::with_capacity(t),
    };
    for (a, b, v, flag) in units {
        out.sigma_theta.push(a);
        out.sigma_u.push(b);
        out.var_theta.push(v);
        out.singular_units.push(flag);
    }
    for (a, b, v, flag) in periods {
        out.sigma_f.push(a);
        out.sigma_gamma.push(b);
        out.var_f.push(v);
        out.singular_periods.push(flag);
    }
    Ok(out)
}

/// Column means of the slope matrix.
pub fn column_means(b: &DMatrix<f64>) -> Vec<f64> {
    let n = b.nrows() as f64;
    b.column_iter().map(|c| c.sum() / n).collect()
}

/// Mean-group slope estimate `(1/N) Σ_i β̂_i`.
pub fn mean_group(fit: &FitResult) -> Vec<f64> {
    column_means(&fit.params.b)
}

/// `Σ̂₁ = (1/NT) Σ_i Σ_t 𝗀_it² S_i û_it û_it' S_i'` where `S_i` holds the first
/// `d_beta` rows of `Σ_u,i⁻¹`. The flag reports whether any `Σ_u,i` needed
/// the pseudo-inverse.
pub fn sigma1_hat(data: &PanelData, fit: &FitResult) -> Result<(DMatrix<f64>, bool)> {
    sigma1_with(data, fit, &|i, s| data.y(i, s))
}

fn sigma1_with(
    data: &PanelData,
    fit: &FitResult,
    y: &(dyn Fn(usize, usize) -> f64 + Sync),
) -> Result<(DMatrix<f64>, bool)> {
    let params = &fit.params;
    params.check_against(data)?;
    let obj = &fit.objective;
    let (n, t, d_beta) = (data.n(), data.t(), data.d_beta());
    let p = d_beta + params.d_f();

    let parts: Vec<(DMatrix<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s_u = DMatrix::zeros(p, p);
            let mut cells = Vec::with_capacity(t);
            for s in 0..t {
                let z = cell_index(data, params, i, s);
                let u = u_hat(data, &params.f, i, s);
                s_u += &u * u.transpose() * obj.info_weight(z);
                cells.push((obj.residual_weight(y(i, s), z), u));
            }
            s_u /= t as f64;
            let (inv, flagged) = sym_inverse_or_pinv(&s_u);
            let sel = inv.rows(0, d_beta).into_owned();
            let mut acc = DMatrix::zeros(d_beta, d_beta);
            for (w, u) in cells {
                let v = &sel * u;
                acc += &v * v.transpose() * (w * w);
            }
            (acc, flagged)
        })
        .collect();

    let mut total = DMatrix::zeros(d_beta, d_beta);
    let mut any_flag = false;
    for (m, flag) in parts {
        total += m;
        any_flag |= flag;
    }
    total /= (n * t) as f64;
    Ok(((&total + total.transpose()) * 0.5, any_flag))
}

/// `3 β̂ − (β̂_S1 + β̂_S2 + β̂_odd + β̂_even) / 2`, componentwise.
///
/// Evaluated as `β̂ + Σ (β̂ − β̂_S) / 2` so that equal subsample estimates
/// return the full estimate bit for bit.
pub fn jackknife_combine(full: &[f64], subs: [&[f64]; 4]) -> Result<Vec<f64>> {
    if let Some(s) = subs.iter().find(|s| s.len() != full.len()) {
        return Err(Error::Dimension {
            axis: "jackknife subsample estimate",
            expected: full.len(),
            found: s.len(),
        });
    }
    Ok((0..full.len())
        .map(|k| full[k] + subs.iter().map(|s| full[k] - s[k]).sum::<f64>() / 2.0)
        .collect())
}

/// Names of the four half-panels, in the order they are combined.
pub const JACKKNIFE_SUBSAMPLES: [&str; 4] = ["units S1", "units S2", "odd periods", "even periods"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackknifeResult {
    /// Mean-group estimate on the full panel.
    pub full: Vec<f64>,
    /// Mean-group estimates on the four half-panels, in
    /// [`JACKKNIFE_SUBSAMPLES`] order.
    pub subsamples: Vec<Vec<f64>>,
    pub beta_bc: Vec<f64>,
    /// Unit halves, as indices into the full panel.
    pub units_s1: Vec<usize>,
    pub units_s2: Vec<usize>,
    /// Set when N is odd and the last unit was left out of both unit halves.
    pub dropped_last_unit: bool,
}

/// Half-panel jackknife bias correction of the mean-group slope estimate.
///
/// The units are split at random (seeded by `split_seed`) into two halves
/// that keep every period, and the periods are split into the 1st, 3rd, …
/// ("odd") and the 2nd, 4th, … ("even") with every unit. With N odd the last
/// unit sits out of both unit halves; the full-panel fit keeps it.
pub fn jackknife_bc(data: &PanelData, link: LinkFamily, cfg: &FitConfig, split_seed: u64) -> Result<JackknifeResult> {
    if data.t() < 4 {
        return Err(Error::InvalidArgument(format!(
            "jackknife needs at least 4 periods, got {}",
            data.t()
        )));
    }
    if data.d_beta() == 0 {
        return Err(Error::InvalidArgument("jackknife needs at least one regressor".into()));
    }
    let n_even = data.n() - data.n() % 2;
    if n_even < 2 {
        return Err(Error::InvalidArgument("jackknife needs at least two units".into()));
    }
    let mut order: Vec<usize> = (0..n_even).collect();
    order.shuffle(&mut stream_rng(&[split_seed]));
    let mut s1 = order[..n_even / 2].to_vec();
    let mut s2 = order[n_even / 2..].to_vec();
    s1.sort_unstable();
    s2.sort_unstable();
    let odd: Vec<usize> = (0..data.t()).step_by(2).collect();
    let even: Vec<usize> = (1..data.t()).step_by(2).collect();

    let panels = [
        ("full panel", data.clone()),
        (JACKKNIFE_SUBSAMPLES[0], data.select_units(&s1)?),
        (JACKKNIFE_SUBSAMPLES[1], data.select_units(&s2)?),
        (JACKKNIFE_SUBSAMPLES[2], data.select_times(&odd)?),
        (JACKKNIFE_SUBSAMPLES[3], data.select_times(&even)?),
    ];
    let estimates: Vec<Result<Vec<f64>>> = panels
        .par_iter()
        .map(|(name, panel)| {
            fit(panel, link, cfg)
                .map(|f| mean_group(&f))
                .map_err(|e| Error::Subsample {
                    subsample: name.to_string(),
                    source: Box::new(e),
                })
        })
        .collect();
    let mut estimates = estimates.into_iter().collect::<Result<Vec<_>>>()?;
    let full = estimates.remove(0);
    let beta_bc = jackknife_combine(&full, [&estimates[0], &estimates[1], &estimates[2], &estimates[3]])?;
    Ok(JackknifeResult {
        full,
        subsamples: estimates,
        beta_bc,
        units_s1: s1,
        units_s2: s2,
        dropped_last_unit: data.n() % 2 == 1,
    })
}

/// Mean-group summary with optional bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanGroupResult {
    pub beta_bar: Vec<f64>,
    pub sigma1_hat: Vec<Vec<f64>>,
    /// Set when some `Σ_u,i` was singular and its pseudo-inverse was used.
    pub sigma1_pinv: bool,
    pub beta_bc: Option<Vec<f64>>,
}

pub fn mean_group_result(
    data: &PanelData,
    fit: &FitResult,
    jackknife: Option<&JackknifeResult>,
) -> Result<MeanGroupResult> {
    let (s1, flagged) = sigma1_hat(data, fit)?;
    Ok(MeanGroupResult {
        beta_bar: mean_group(fit),
        sigma1_hat: crate::types::matrix_rows(&s1),
        sigma1_pinv: flagged,
        beta_bc: jackknife.map(|j| j.beta_bc.clone()),
    })
}

/// Average partial effects `Δ̂_i = (1/T) Σ_t g(ẑ_it) β̂_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApeResult {
    /// N×d_beta.
    pub delta: DMatrix<f64>,
    /// The per-unit factor `(1/T) Σ_t g(ẑ_it)`.
    pub mean_density: Vec<f64>,
}

pub fn ape(data: &PanelData, fit: &FitResult) -> Result<ApeResult> {
    let params = &fit.params;
    params.check_against(data)?;
    let obj = &fit.objective;
    let mean_density: Vec<f64> = (0..data.n())
        .map(|i| {
            (0..data.t())
                .map(|s| obj.density(cell_index(data, params, i, s)))
                .sum::<f64>()
                / data.t() as f64
        })
        .collect();
    let delta = DMatrix::from_fn(data.n(), data.d_beta(), |i, k| mean_density[i] * params.b[(i, k)]);
    Ok(ApeResult { delta, mean_density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::Objective;
    use crate::types::ParameterSet;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit_with(params: ParameterSet, link: LinkFamily) -> FitResult {
        FitResult {
            params,
            loglik: 0.0,
            outer_iters: 0,
            converged: true,
            loglik_trace: vec![],
            start_index: 0,
            start_logliks: vec![],
            separated: vec![],
            objective: Objective::new(link),
        }
    }

    fn random_case(seed: u64, n: usize, t: usize, d_beta: usize, d_f: usize) -> (PanelData, FitResult) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = PanelData::from_fn(
            n,
            t,
            d_beta,
            |_, _| if rng.random::<bool>() { 1.0 } else { 0.0 },
            |_, _, _| 0.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let x: Vec<f64> = (0..n * t * d_beta).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = PanelData::new(n, t, d_beta, data.y_raw().to_vec(), x).unwrap();
        let params = ParameterSet::new(
            DMatrix::from_fn(n, d_beta, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(n, d_f, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(t, d_f, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        (data, fit_with(params, LinkFamily::Probit))
    }

    #[test]
    fn info_weight_at_zero() {
        let w = Objective::new(LinkFamily::Probit).info_weight(0.0);
        assert!((w - std::f64::consts::FRAC_2_PI).abs() < 1e-6);
        assert!((w - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn single_period_bread_is_rank_one() {
        let (data, fit) = random_case(3, 2, 1, 1, 1);
        let cov = covariances(&data, &fit).unwrap();
        let z = cell_index(&data, &fit.params, 0, 0);
        let u = u_hat(&data, &fit.params.f, 0, 0);
        let expected = &u * u.transpose() * fit.objective.info_weight(z);
        assert!((&cov.sigma_u[0] - expected).amax() < 1e-15);
        assert_eq!(cov.sigma_u[0].clone().svd(false, false).rank(1e-12), 1);
        assert!(cov.singular_units[0]);
    }

    #[test]
    fn outcomes_equal_to_probabilities_give_zero_meat() {
        let (data, fit) = random_case(4, 4, 6, 1, 1);
        let z = crate::types::linear_index(&data, &fit.params).unwrap().z;
        let y = |i: usize, s: usize| fit.objective.prob(z[(i, s)]);
        let cov = covariances_with(&data, &fit, &y).unwrap();
        for m in cov.sigma_theta.iter().chain(&cov.sigma_f) {
            assert!(m.amax() < 1e-28);
        }
        let (s1, _) = sigma1_with(&data, &fit, &y).unwrap();
        assert!(s1.amax() < 1e-28);
    }

    #[test]
    fn sigma1_single_term_by_hand() {
        // N = T = 1, one regressor, no factors: Σ_u = 𝔤 x², S = 1/(𝔤 x²),
        // Σ̂₁ = 𝗀² S² x² = 𝗀² / (𝔤² x²).
        let data = PanelData::new(1, 1, 1, vec![1.0], vec![2.0]).unwrap();
        let params = ParameterSet::new(
            DMatrix::from_element(1, 1, 0.3),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(1, 0),
        )
        .unwrap();
        let fit = fit_with(params, LinkFamily::Probit);
        let obj = &fit.objective;
        let (s1, flagged) = sigma1_hat(&data, &fit).unwrap();
        let (w, info) = (obj.residual_weight(1.0, 0.6), obj.info_weight(0.6));
        let expected = w * w / (info * info * 4.0);
        assert!(!flagged);
        assert!((s1[(0, 0)] - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn sigma1_is_symmetric_psd() {
        let (data, fit) = random_case(8, 6, 12, 2, 1);
        let (s1, _) = sigma1_hat(&data, &fit).unwrap();
        assert!((&s1 - s1.transpose()).amax() < 1e-15);
        let eig = s1.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn sandwiches_symmetric_psd() {
        let (data, fit) = random_case(9, 5, 20, 2, 2);
        let cov = covariances(&data, &fit).unwrap();
        for v in cov.var_theta.iter().chain(&cov.var_f) {
            assert!((v - v.transpose()).amax() < 1e-12);
            assert!(v.clone().symmetric_eigen().eigenvalues.iter().all(|&e| e >= -1e-12));
        }
        for b in cov.sigma_u.iter().chain(&cov.sigma_gamma) {
            assert!(b.clone().symmetric_eigen().eigenvalues.iter().all(|&e| e >= -1e-12));
        }
        assert_eq!(cov.se_theta(0).len(), 4);
    }

    #[test]
    fn mean_group_examples() {
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 3.0]);
        assert_eq!(column_means(&b), vec![2.0]);
        let b = DMatrix::from_fn(4, 2, |_, k| [0.5, -1.5][k]);
        assert_eq!(column_means(&b), vec![0.5, -1.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-3.0..3.0));
        let means = column_means(&b);
        for k in 0..2 {
            let mut acc = 0.0;
            for i in 0..5 {
                acc += b[(i, k)];
            }
            assert!((means[k] - acc / 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn jackknife_arithmetic() {
        assert_eq!(
            jackknife_combine(&[1.0], [&[1.0], &[1.0], &[1.0], &[1.0]]).unwrap(),
            vec![1.0]
        );
        let v = jackknife_combine(&[1.0], [&[1.2], &[1.2], &[1.2], &[1.2]]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-12);
        let v = jackknife_combine(&[2.0], [&[1.8], &[2.2], &[1.9], &[2.1]]).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert!(jackknife_combine(&[1.0, 2.0], [&[1.0], &[1.0], &[1.0], &[1.0]]).is_err());
    }

    #[test]
    fn jackknife_splits_cover_the_panel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = PanelData::from_fn(
            7,
            12,
            1,
            |_, _| if rng.random::<bool>() { 1.0 } else { 0.0 },
            |i, s, _| ((i * 7 + s * 3) % 5) as f64 - 2.0,
        )
        .unwrap();
        let cfg = FitConfig::default();
        let j = jackknife_bc(&data, LinkFamily::Logit, &cfg, 3).unwrap();
        assert!(j.dropped_last_unit);
        let mut all: Vec<usize> = j.units_s1.iter().chain(&j.units_s2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
        assert_eq!(j.subsamples.len(), 4);
        let again = jackknife_bc(&data, LinkFamily::Logit, &cfg, 3).unwrap();
        assert_eq!(j, again);
    }

    #[test]
    fn jackknife_names_the_failing_subsample() {
        let data = PanelData::from_fn(4, 5, 1, |i, s| ((i + s) % 2) as f64, |_, s, _| s as f64).unwrap();
        // Three periods in the odd half are too few for three factors.
        let cfg = FitConfig::with_factors(2);
        let err = jackknife_bc(&data, LinkFamily::Probit, &cfg, 0).unwrap_err();
        match err {
            Error::Subsample { subsample, .. } => assert!(JACKKNIFE_SUBSAMPLES.contains(&subsample.as_str())),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn ape_examples() {
        let data = PanelData::from_fn(2, 3, 1, |_, _| 1.0, |_, _, _| 0.1).unwrap();
        let params = ParameterSet::new(
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(3, 0),
        )
        .unwrap();
        // Uniform link with every index inside the support.
        let a = ape(&data, &fit_with(params.clone(), LinkFamily::UNIFORM)).unwrap();
        assert_eq!(a.delta, params.b);
        // Probit with a zero slope, and with the index held at zero.
        let a = ape(&data, &fit_with(params, LinkFamily::Probit)).unwrap();
        assert_eq!(a.delta[(1, 0)], 0.0);
        let zero = PanelData::from_fn(1, 4, 1, |_, _| 0.0, |_, _, _| 0.0).unwrap();
        let p = ParameterSet::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(4, 0),
        )
        .unwrap();
        let a = ape(&zero, &fit_with(p, LinkFamily::Probit)).unwrap();
        assert!((a.delta[(0, 0)] - 0.398_942).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn jackknife_fixed_point(v in proptest::collection::vec(-10.0f64..10.0, 1..5)) {
            let out = jackknife_combine(&v, [&v, &v, &v, &v]).unwrap();
            prop_assert_eq!(out, v);
        }

        #[test]
        fn ape_rows_are_rank_one(seed in 0u64..200) {
            let (data, fit) = random_case(seed, 4, 5, 3, 1);
            let a = ape(&data, &fit).unwrap();
            for i in 0..4 {
                let ratios: Vec<f64> = (0..3)
                    .filter(|&k| fit.params.b[(i, k)] != 0.0)
                    .map(|k| a.delta[(i, k)] / fit.params.b[(i, k)])
                    .collect();
                for r in &ratios {
                    prop_assert!((r - ratios[0]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn mean_group_ignores_unit_order(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-2.0..2.0));
            let mut perm: Vec<usize> = (0..6).collect();
            perm.shuffle(&mut rng);
            let shuffled = DMatrix::from_fn(6, 2, |i, k| b[(perm[i], k)]);
            let (a, c) = (column_means(&b), column_means(&shuffled));
            for k in 0..2 {
                prop_assert!((a[k] - c[k]).abs() < 1e-14);
            }
        }
    }
}
