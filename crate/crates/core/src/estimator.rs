//! Alternating maximum-likelihood estimation of slopes, loadings and factors.
//!
//! Each outer iteration
//! 1. maximizes every unit's likelihood over `θ_i = (β_i, γ_i)` with `F` fixed,
//! 2. maximizes every period's likelihood over `f_t` with `(B, Γ)` fixed,
//! 3. re-normalizes `F` so that `(1/T) FᵀF = I`, counter-rotating `Γ` so the
//!    fitted index is unchanged.
//!
//! The subproblems are small concave-in-practice GLM fits solved by damped
//! Newton iterations with step halving, so the total log-likelihood never
//! decreases between half-steps.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{loglik, HessianKind, Objective};
use crate::link::LinkFamily;
use crate::rng::stream_rng;
use crate::types::{cell_index, IndexBounds, PanelData, ParameterSet};

/// Settings of the inner Newton solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_steps: usize,
    pub max_halvings: usize,
    pub grad_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_steps: 50,
            max_halvings: 30,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of latent factors.
    pub d_f: usize,
    /// Stop when `‖B⁽ʲ⁾ − B⁽ʲ⁻¹⁾‖ / √N` falls to this value.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub newton: NewtonConfig,
    /// Random initializations; the best final log-likelihood wins.
    pub n_starts: usize,
    pub rng_seed: u64,
    pub hessian: HessianKind,
    pub bounds: IndexBounds,
    /// Factor matrix used in place of the random draw for start 0.
    #[serde(skip)]
    pub initial_factors: Option<DMatrix<f64>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            d_f: 0,
            epsilon: 1e-6,
            max_outer_iters: 500,
            newton: NewtonConfig::default(),
            n_starts: 5,
            rng_seed: 0,
            hessian: HessianKind::Full,
            bounds: IndexBounds::default(),
            initial_factors: None,
        }
    }
}

impl FitConfig {
    pub fn with_factors(d_f: usize) -> Self {
        Self { d_f, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ParameterSet,
    pub loglik: f64,
    pub outer_iters: usize,
    pub converged: bool,
    /// Log-likelihood at the start and after every half-step of the winning run.
    pub loglik_trace: Vec<f64>,
    pub start_index: usize,
    /// Final log-likelihood of every start (`None` when the start failed).
    pub start_logliks: Vec<Option<f64>>,
    /// Units whose outcomes are perfectly separated by the fitted index.
    pub separated: Vec<bool>,
    pub objective: Objective,
}

impl FitResult {
    pub fn d_f(&self) -> usize {
        self.params.d_f()
    }

    pub fn link(&self) -> LinkFamily {
        self.objective.link
    }
}

/// Outcome of a single Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub loglik_before: f64,
    pub loglik_after: f64,
    pub steps: usize,
    pub converged: bool,
}

/// GLM-type subproblem: rows with index `offset_r + design_rᵀθ`.
struct Subproblem<'a> {
    y: std::borrow::Cow<'a, [f64]>,
    offset: Vec<f64>,
    design: Vec<f64>,
    p: usize,
}

impl Subproblem<'_> {
    #[inline]
    fn index(&self, r: usize, theta: &[f64]) -> f64 {
        let row = &self.design[r * self.p..(r + 1) * self.p];
        self.offset[r] + row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()
    }

    fn loglik(&self, theta: &[f64], obj: &Objective) -> f64 {
        (0..self.y.len())
            .map(|r| obj.loglik_cell(self.y[r], self.index(r, theta)))
            .sum()
    }

    /// Fills the gradient and the (upper triangle mirrored) Hessian.
    fn derivs(&self, theta: &[f64], obj: &Objective, kind: HessianKind, grad: &mut [f64], hess: &mut [f64]) {
        let p = self.p;
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        for r in 0..self.y.len() {
            let (s, h) = obj.slopes(self.y[r], self.index(r, theta), kind);
            if s == 0.0 && h == 0.0 {
                continue;
            }
            let row = &self.design[r * p..(r + 1) * p];
            for a in 0..p {
                grad[a] += s * row[a];
                let ha = h * row[a];
                for b in a..p {
                    hess[a * p + b] += ha * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[a * p + b] = hess[b * p + a];
            }
        }
    }
}

/// Largest step along `dir` keeping every row's index inside the bounds.
fn feasible_step(sub: &Subproblem<'_>, theta: &[f64], dir: &[f64], obj: &Objective) -> f64 {
    let (lo, hi) = (obj.bounds.lo, obj.bounds.hi);
    let mut alpha = 1.0f64;
    for r in 0..sub.y.len() {
        let row = &sub.design[r * sub.p..(r + 1) * sub.p];
        let dz: f64 = row.iter().zip(dir).map(|(a, b)| a * b).sum();
        if dz == 0.0 {
            continue;
        }
        let z = sub.index(r, theta);
        let room = if dz > 0.0 { (hi - z) / dz } else { (lo - z) / dz };
        alpha = alpha.min(room.max(0.0));
    }
    alpha
}

/// Damped Newton ascent with ridge fallback and step halving, restricted to
/// parameters whose index stays inside the trimming interval. `theta` is
/// updated in place and never moves to a point with lower likelihood
/// (beyond rounding of the objective).
///
/// The restriction caps coefficients of units whose outcomes are perfectly
/// separated, where the unconstrained likelihood has no maximizer.
fn newton_ascent(
    sub: &Subproblem<'_>,
    theta: &mut [f64],
    obj: &Objective,
    kind: HessianKind,
    cfg: &NewtonConfig,
) -> NewtonReport {
    let p = sub.p;
    let mut grad = vec![0.0; p];
    let mut hess = vec![0.0; p * p];
    let mut trial = vec![0.0; p];
    let mut ll = sub.loglik(theta, obj);
    sub.derivs(theta, obj, kind, &mut grad, &mut hess);
    let before = ll;
    let mut steps = 0;
    let mut converged = p == 0;
    while steps < cfg.max_steps && p > 0 {
        if grad.iter().all(|g| g.abs() <= cfg.grad_tol) {
            converged = true;
            break;
        }
        let slack = 1e-14 * (1.0 + ll.abs());
        let g = DVector::from_column_slice(&grad);
        let neg_h = -DMatrix::from_row_slice(p, p, &hess);
        let scale = neg_h.norm().max(f64::MIN_POSITIVE);
        let mut ridge = 0.0;
        let mut accepted = None;
        let mut blocked = false;
        for _ in 0..40 {
            let a = &neg_h + DMatrix::<f64>::identity(p, p) * ridge;
            let next_ridge = if ridge == 0.0 { 1e-8 * scale } else { 2.0 * ridge };
            let Some(chol) = a.cholesky() else {
                ridge = next_ridge;
                continue;
            };
            let delta = chol.solve(&g);
            if !delta.iter().all(|v| v.is_finite()) {
                ridge = next_ridge;
                continue;
            }
            let mut alpha = feasible_step(sub, theta, delta.as_slice(), obj);
            if alpha <= 1e-12 {
                blocked = true;
                break;
            }
            for _ in 0..=cfg.max_halvings {
                for k in 0..p {
                    trial[k] = theta[k] + alpha * delta[k];
                }
                let tl = sub.loglik(&trial, obj);
                if tl.is_finite() && tl >= ll - slack {
                    accepted = Some(tl);
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            ridge = next_ridge;
        }
        let Some(tl) = accepted else {
            // Either pinned against the trimming boundary or no ascent
            // direction is measurable at working precision.
            converged = !blocked;
            break;
        };
        theta.copy_from_slice(&trial);
        steps += 1;
        ll = tl;
        sub.derivs(theta, obj, kind, &mut grad, &mut hess);
    }
    NewtonReport {
        loglik_before: before,
        loglik_after: ll,
        steps,
        converged,
    }
}

fn unit_problem<'a>(data: &'a PanelData, params: &ParameterSet, i: usize) -> Subproblem<'a> {
    let d_beta = data.d_beta();
    let d_f = params.d_f();
    let p = d_beta + d_f;
    let mut design = Vec::with_capacity(data.t() * p);
    for t in 0..data.t() {
        design.extend_from_slice(data.x(i, t));
        design.extend(params.f.row(t).iter().copied());
    }
    Subproblem {
        y: std::borrow::Cow::Borrowed(data.y_unit(i)),
        offset: vec![0.0; data.t()],
        design,
        p,
    }
}

fn time_problem(data: &PanelData, params: &ParameterSet, t: usize) -> Subproblem<'static> {
    let d_f = params.d_f();
    let mut design = Vec::with_capacity(data.n() * d_f);
    let mut offset = Vec::with_capacity(data.n());
    let mut y = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        y.push(data.y(i, t));
        offset.push(
            data.x(i, t)
                .iter()
                .zip(params.b.row(i).iter())
                .map(|(a, b)| a * b)
                .sum(),
        );
        design.extend(params.gamma.row(i).iter().copied());
    }
    Subproblem {
        y: std::borrow::Cow::Owned(y),
        offset,
        design,
        p: d_f,
    }
}

/// Maximizes unit `i`'s likelihood over `θ_i` with the factors held fixed.
/// Returns the new `θ_i = (β_i, γ_i)`.
pub fn unit_update(
    data: &PanelData,
    params: &ParameterSet,
    obj: &Objective,
    i: usize,
    kind: HessianKind,
    cfg: &NewtonConfig,
) -> (Vec<f64>, NewtonReport) {
    let sub = unit_problem(data, params, i);
    let mut theta = params.theta(i);
    let report = newton_ascent(&sub, &mut theta, obj, kind, cfg);
    (theta, report)
}

/// Maximizes period `t`'s likelihood over `f_t` with slopes and loadings fixed.
pub fn time_update(
    data: &PanelData,
    params: &ParameterSet,
    obj: &Objective,
    t: usize,
    kind: HessianKind,
    cfg: &NewtonConfig,
) -> (Vec<f64>, NewtonReport) {
    let sub = time_problem(data, params, t);
    let mut f_t: Vec<f64> = params.f.row(t).iter().copied().collect();
    let report = newton_ascent(&sub, &mut f_t, obj, kind, cfg);
    (f_t, report)
}

/// Rescales `F` so that `(1/T) FᵀF = I` while keeping its column space.
///
/// Returns `(F R, R)`. The transform is the symmetric one, `R = √T (FᵀF)^{-1/2}`
/// computed from the SVD of `F`, followed by column sign flips that make the
/// largest-magnitude entry of every column positive. An already normalized
/// `F` with that sign convention is returned unchanged with `R = I`.
pub fn normalize_factors(f: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (t, d) = f.shape();
    if d == 0 {
        return Ok((f.clone(), DMatrix::zeros(0, 0)));
    }
    if t < d {
        return Err(Error::RankDeficient { column: t });
    }
    // Identify the first column that adds no new direction.
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let col = f.column(j).into_owned();
        let norm0 = col.norm();
        let mut r = col.clone();
        for q in &basis {
            let c = q.dot(&r);
            r -= q * c;
        }
        let rn = r.norm();
        if !(norm0 > 0.0) || !(rn > 1e-10 * norm0) || !rn.is_finite() {
            return Err(Error::RankDeficient { column: j });
        }
        basis.push(r / rn);
    }
    let svd = f.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let sqrt_t = (t as f64).sqrt();
    let mut f_norm = u * v_t * sqrt_t;
    let s_inv = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    let mut r = v_t.transpose() * s_inv * v_t * sqrt_t;
    for k in 0..d {
        let col = f_norm.column(k);
        let idx = col.iamax();
        if col[idx] < 0.0 {
            f_norm.column_mut(k).neg_mut();
            r.column_mut(k).neg_mut();
        }
    }
    Ok((f_norm, r))
}

struct RunOutcome {
    params: ParameterSet,
    loglik: f64,
    trace: Vec<f64>,
    outer_iters: usize,
    converged: bool,
}

/// Start 0 may be supplied by the caller; every other start draws standard
/// normal factors from its own RNG stream.
fn initial_factors(data: &PanelData, cfg: &FitConfig, start: usize) -> Result<DMatrix<f64>> {
    if start == 0 {
        if let Some(f0) = &cfg.initial_factors {
            if f0.shape() != (data.t(), cfg.d_f) {
                return Err(Error::Dimension {
                    axis: "initial factors (T×d_f)",
                    expected: data.t() * cfg.d_f,
                    found: f0.len(),
                });
            }
            return Ok(f0.clone());
        }
    }
    let mut rng = stream_rng(&[cfg.rng_seed, start as u64]);
    Ok(DMatrix::from_fn(data.t(), cfg.d_f, |_, _| {
        StandardNormal.sample(&mut rng)
    }))
}

fn run_start(data: &PanelData, obj: &Objective, cfg: &FitConfig, start: usize) -> Result<RunOutcome> {
    let (n, t, d_beta, d_f) = (data.n(), data.t(), data.d_beta(), cfg.d_f);
    let (f0, _) = normalize_factors(&initial_factors(data, cfg, start)?)?;
    let mut params = ParameterSet::zeros(n, t, d_beta, d_f);
    params.f = f0;
    let mut trace = vec![loglik(data, &params, obj)?];
    if d_beta + d_f == 0 {
        return Ok(RunOutcome {
            loglik: trace[0],
            params,
            trace,
            outer_iters: 0,
            converged: true,
        });
    }
    let sqrt_n = (n as f64).sqrt();
    let mut converged = false;
    let mut iters = 0;
    while iters < cfg.max_outer_iters {
        iters += 1;
        let tracked = if d_beta > 0 {
            params.b.clone()
        } else {
            params.gamma.clone()
        };

        let thetas: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .with_min_len(4)
            .map(|i| unit_update(data, &params, obj, i, cfg.hessian, &cfg.newton).0)
            .collect();
        for (i, th) in thetas.iter().enumerate() {
            for k in 0..d_beta {
                params.b[(i, k)] = th[k];
            }
            for k in 0..d_f {
                params.gamma[(i, k)] = th[d_beta + k];
            }
        }
        trace.push(loglik(data, &params, obj)?);

        if d_f > 0 {
            let fs: Vec<Vec<f64>> = (0..t)
                .into_par_iter()
                .with_min_len(4)
                .map(|s| time_update(data, &params, obj, s, cfg.hessian, &cfg.newton).0)
                .collect();
            for (s, f_s) in fs.iter().enumerate() {
                for k in 0..d_f {
                    params.f[(s, k)] = f_s[k];
                }
            }
            trace.push(loglik(data, &params, obj)?);

            let (f_norm, r) = normalize_factors(&params.f)?;
            let r_inv_t = r
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Singular("factor normalization transform".into()))?
                .transpose();
            params.f = f_norm;
            params.gamma = &params.gamma * r_inv_t;
            trace.push(loglik(data, &params, obj)?);
        }

        let current = if d_beta > 0 { &params.b } else { &params.gamma };
        let dist = (current - tracked).norm() / sqrt_n;
        if dist <= cfg.epsilon {
            converged = true;
            break;
        }
    }
    Ok(RunOutcome {
        loglik: *trace.last().expect("trace is non-empty"),
        params,
        trace,
        outer_iters: iters,
        converged,
    })
}

/// Flags units with constant outcomes, and units whose fitted index
/// classifies every period correctly while pressing against the trimming
/// boundary (the likelihood keeps rising towards infinite coefficients).
fn separation_flags(data: &PanelData, params: &ParameterSet, bounds: &IndexBounds) -> Vec<bool> {
    let edge = 1e-6 * (bounds.hi - bounds.lo);
    (0..data.n())
        .map(|i| {
            let ys = data.y_unit(i);
            let constant = ys.iter().all(|&v| v == ys[0]);
            let zs: Vec<f64> = (0..data.t()).map(|t| cell_index(data, params, i, t)).collect();
            let classified = zs.iter().zip(ys).all(|(&z, &y)| (z > 0.0) == (y == 1.0));
            let pinned = zs.iter().any(|&z| z >= bounds.hi - edge || z <= bounds.lo + edge);
            constant || (classified && pinned)
        })
        .collect()
}

/// Fits the model with `cfg.d_f` factors, keeping the best of `cfg.n_starts`
/// initializations (ties go to the lowest start index).
pub fn fit(data: &PanelData, link: LinkFamily, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if cfg.d_f > 0 && (data.t() <= cfg.d_f || data.n() <= cfg.d_f) {
        return Err(Error::InvalidArgument(format!(
            "{} factors need N and T above {}, panel is {}×{}",
            cfg.d_f,
            cfg.d_f,
            data.n(),
            data.t()
        )));
    }
    if data.n() == 0 || data.t() == 0 {
        return Err(Error::InvalidPanel("empty panel".into()));
    }
    let obj = Objective::new(link).with_bounds(cfg.bounds);
    // Without factors every start is the same deterministic problem.
    let starts = if cfg.d_f == 0 { 1 } else { cfg.n_starts };
    let runs: Vec<Result<RunOutcome>> = (0..starts)
        .into_par_iter()
        .map(|s| run_start(data, &obj, cfg, s))
        .collect();

    let start_logliks: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().ok().map(|o| o.loglik)).collect();
    let mut best: Option<usize> = None;
    for (s, ll) in start_logliks.iter().enumerate() {
        if let Some(ll) = ll {
            if best.is_none_or(|b| *ll > start_logliks[b].unwrap()) {
                best = Some(s);
            }
        }
    }
    let Some(best) = best else {
        return Err(runs.into_iter().find_map(|r| r.err()).expect("all starts failed"));
    };
    let winner = runs
        .into_iter()
        .nth(best)
        .expect("index in range")
        .expect("winner succeeded");
    let separated = separation_flags(data, &winner.params, &obj.bounds);
    Ok(FitResult {
        params: winner.params,
        loglik: winner.loglik,
        outer_iters: winner.outer_iters,
        converged: winner.converged,
        loglik_trace: winner.trace,
        start_index: best,
        start_logliks,
        separated,
        objective: obj,
    })
}
