//! Information criterion for the number of factors.
//!
//! `IC(d) = (1/NT) Σ (y_it − G(ẑ_it^d))² + d · ξ_NT / √(NT)`, minimized over
//! `0 ≤ d ≤ d_max`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig, FitResult};
use crate::link::LinkFamily;
use crate::types::{cell_index, PanelData};

/// Default penalty scale `ξ_NT = log √(N + T)`.
pub fn default_xi(n: usize, t: usize) -> f64 {
    0.5 * ((n + t) as f64).ln()
}

/// IC from its parts: mean squared residual plus `d ξ / √(NT)`.
pub fn ic_from_parts(mean_sq_residual: f64, d: usize, n: usize, t: usize, xi: f64) -> f64 {
    mean_sq_residual + d as f64 * xi / ((n * t) as f64).sqrt()
}

/// Mean of `(y_it − G(ẑ_it))²` under a fit.
pub fn mean_squared_residual(data: &PanelData, fit: &FitResult) -> f64 {
    let obj = &fit.objective;
    let mut acc = 0.0;
    for i in 0..data.n() {
        for t in 0..data.t() {
            let r = data.y(i, t) - obj.prob(cell_index(data, &fit.params, i, t));
            acc += r * r;
        }
    }
    acc / (data.n() * data.t()) as f64
}

pub fn ic_value(data: &PanelData, fit: &FitResult, d: usize, penalty_xi: f64) -> f64 {
    ic_from_parts(mean_squared_residual(data, fit), d, data.n(), data.t(), penalty_xi)
}

/// Smallest-IC candidate; exact ties go to the smaller `d`.
pub fn argmin_ic(ic_values: &BTreeMap<usize, f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&d, &v) in ic_values {
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((d, v));
        }
    }
    best.map(|(d, _)| d)
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub ic_values: BTreeMap<usize, f64>,
    pub chosen_d: usize,
    pub fits: BTreeMap<usize, FitResult>,
    /// Candidates that could not be fitted, with the reason.
    pub failures: BTreeMap<usize, String>,
    pub xi: f64,
}

impl SelectionResult {
    pub fn chosen_fit(&self) -> &FitResult {
        &self.fits[&self.chosen_d]
    }
}

/// Fits every `d ∈ {0, …, d_max}` and returns the IC minimizer, with
/// `ξ_NT = log √(N + T)`.
pub fn select_num_factors(
    data: &PanelData,
    link: LinkFamily,
    cfg: &FitConfig,
    d_max: usize,
) -> Result<SelectionResult> {
    select_with_penalty(data, link, cfg, d_max, default_xi(data.n(), data.t()))
}

pub fn select_with_penalty(
    data: &PanelData,
    link: LinkFamily,
    cfg: &FitConfig,
    d_max: usize,
    xi: f64,
) -> Result<SelectionResult> {
    if d_max >= data.n().min(data.t()) {
        return Err(Error::InvalidArgument(format!(
            "d_max = {d_max} must be below min(N, T) = {}",
            data.n().min(data.t())
        )));
    }
    if !(xi > 0.0) {
        return Err(Error::InvalidArgument("penalty xi must be positive".into()));
    }
    // Every candidate uses the same seed ladder, so IC differences reflect d.
    let outcomes: Vec<(usize, Result<FitResult>)> = (0..=d_max)
        .into_par_iter()
        .map(|d| {
            let c = FitConfig {
                d_f: d,
                initial_factors: cfg.initial_factors.as_ref().filter(|f| f.ncols() == d).cloned(),
                ..cfg.clone()
            };
            (d, fit(data, link, &c))
        })
        .collect();

    let mut ic_values = BTreeMap::new();
    let mut fits = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for (d, out) in outcomes {
        match out {
            Ok(f) => {
                let ic = ic_value(data, &f, d, xi);
                if ic.is_finite() {
                    ic_values.insert(d, ic);
                    fits.insert(d, f);
                } else {
                    failures.insert(d, "non-finite information criterion".to_string());
                }
            }
            Err(e) => {
                failures.insert(d, e.to_string());
            }
        }
    }
    let chosen_d = argmin_ic(&ic_values).ok_or_else(|| {
        Error::AllCandidatesFailed(
            failures
                .iter()
                .map(|(d, e)| format!("d={d}: {e}"))
                .collect::<Vec<_>>()
                .join("; "),
        )
    })?;
    Ok(SelectionResult {
        ic_values,
        chosen_d,
        fits,
        failures,
        xi,
    })
}
