//! Log-likelihood of the binary panel model with its score vectors and
//! diagonal Hessian blocks.
//!
//! Every link evaluation goes through [`Objective`], which clamps the index
//! to its trimming interval and floors log arguments at [`LOG_FLOOR`]. The
//! likelihood is therefore the likelihood of the *clamped* index and its
//! derivative vanishes for cells whose index lies outside the interval.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkFamily;
use crate::types::{cell_index, IndexBounds, PanelData, ParameterSet};

/// Floor applied to `G` and `1 - G` before taking logs or dividing.
pub const LOG_FLOOR: f64 = 1e-300;

/// Which second-derivative form the Newton solvers use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianKind {
    /// Exact second derivative, including the residual-weighted term.
    #[default]
    Full,
    /// Expected information only (Fisher scoring).
    Expected,
}

/// A link together with the trimming interval for its index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub link: LinkFamily,
    pub bounds: IndexBounds,
}

impl From<LinkFamily> for Objective {
    fn from(link: LinkFamily) -> Self {
        Self::new(link)
    }
}

/// Per-cell log-likelihood and its derivatives with respect to the index.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellTerms {
    pub loglik: f64,
    /// `dℓ/dz = (y - G) g / ((1 - G) G)`.
    pub score: f64,
    /// `d²ℓ/dz²`.
    pub curvature: f64,
    /// `g² / ((1 - G) G)`.
    pub info: f64,
}

impl CellTerms {
    #[inline]
    pub fn second(&self, kind: HessianKind) -> f64 {
        match kind {
            HessianKind::Full => self.curvature,
            HessianKind::Expected => -self.info,
        }
    }
}

impl Objective {
    pub fn new(link: LinkFamily) -> Self {
        Self {
            link,
            bounds: IndexBounds::default(),
        }
    }

    pub fn with_bounds(mut self, bounds: IndexBounds) -> Self {
        self.bounds = bounds;
        self
    }

    #[inline]
    fn tails(&self, zc: f64) -> (f64, f64) {
        let (c, s) = self.link.tails(zc);
        (c.max(LOG_FLOOR), s.max(LOG_FLOOR))
    }

    /// Cell log-likelihood `(1-y) log(1-G) + y log G`. `y` may be fractional.
    #[inline]
    pub fn loglik_cell(&self, y: f64, z: f64) -> f64 {
        let (g_cdf, g_sf) = self.tails(self.bounds.clamp(z));
        Self::loglik_from_tails(y, g_cdf, g_sf)
    }

    /// The log of the larger tail goes through `ln_1p` of the smaller one.
    #[inline]
    fn loglik_from_tails(y: f64, g_cdf: f64, g_sf: f64) -> f64 {
        let log_cdf = || if g_cdf >= g_sf { (-g_sf).ln_1p() } else { g_cdf.ln() };
        let log_sf = || if g_cdf >= g_sf { g_sf.ln() } else { (-g_cdf).ln_1p() };
        if y == 1.0 {
            log_cdf()
        } else if y == 0.0 {
            log_sf()
        } else {
            y * log_cdf() + (1.0 - y) * log_sf()
        }
    }

    /// Score and second derivative of one cell, without the log-likelihood.
    #[inline]
    pub(crate) fn slopes(&self, y: f64, z: f64, kind: HessianKind) -> (f64, f64) {
        if !self.bounds.contains(z) {
            return (0.0, 0.0);
        }
        let (g_cdf, g_sf) = self.tails(z);
        let g = self.link.pdf(z);
        let over_cdf = g / g_cdf;
        let over_sf = g / g_sf;
        let score = y * over_cdf - (1.0 - y) * over_sf;
        let second = match kind {
            HessianKind::Full => {
                let g1 = self.link.pdf_deriv(z);
                y * (g1 / g_cdf - over_cdf * over_cdf) - (1.0 - y) * (g1 / g_sf + over_sf * over_sf)
            }
            HessianKind::Expected => -g * g / (g_cdf * g_sf),
        };
        (score, second)
    }

    /// Log-likelihood and derivatives of one cell.
    #[inline]
    pub fn cell(&self, y: f64, z: f64) -> CellTerms {
        let zc = self.bounds.clamp(z);
        let (g_cdf, g_sf) = self.tails(zc);
        let loglik = Self::loglik_from_tails(y, g_cdf, g_sf);
        if !self.bounds.contains(z) {
            return CellTerms {
                loglik,
                ..CellTerms::default()
            };
        }
        let g = self.link.pdf(z);
        let g1 = self.link.pdf_deriv(z);
        let over_cdf = g / g_cdf;
        let over_sf = g / g_sf;
        // Written per outcome so that neither branch subtracts nearly equal
        // probabilities; algebraically equal to the pooled residual form.
        let score = y * over_cdf - (1.0 - y) * over_sf;
        let curvature = y * (g1 / g_cdf - over_cdf * over_cdf) - (1.0 - y) * (g1 / g_sf + over_sf * over_sf);
        let info = g * g / (g_cdf * g_sf);
        CellTerms {
            loglik,
            score,
            curvature,
            info,
        }
    }

    /// Residual weight `𝗀_it(w) = (y - G(w)) g(w) / ((1 - G(w)) G(w))` at the
    /// clamped index, used by the covariance estimators.
    #[inline]
    pub fn residual_weight(&self, y: f64, z: f64) -> f64 {
        let zc = self.bounds.clamp(z);
        let (g_cdf, g_sf) = self.tails(zc);
        let g = self.link.pdf(zc);
        y * g / g_cdf - (1.0 - y) * g / g_sf
    }

    /// Information weight `𝔤(w) = g(w)² / ((1 - G(w)) G(w))` at the clamped index.
    #[inline]
    pub fn info_weight(&self, z: f64) -> f64 {
        let zc = self.bounds.clamp(z);
        let (g_cdf, g_sf) = self.tails(zc);
        let g = self.link.pdf(zc);
        g * g / (g_cdf * g_sf)
    }

    /// Fitted probability `G(z)` at the clamped index.
    #[inline]
    pub fn prob(&self, z: f64) -> f64 {
        self.link.cdf(self.bounds.clamp(z))
    }

    /// Density `g(z)` at the clamped index.
    #[inline]
    pub fn density(&self, z: f64) -> f64 {
        self.link.pdf(self.bounds.clamp(z))
    }
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Total log-likelihood `Σ_i Σ_t (1-y) log(1-G(z)) + y log G(z)`.
pub fn loglik(data: &PanelData, params: &ParameterSet, obj: &Objective) -> Result<f64> {
    params.check_against(data)?;
    let mut acc = NeumaierSum::default();
    for i in 0..data.n() {
        for t in 0..data.t() {
            let ll = obj.loglik_cell(data.y(i, t), cell_index(data, params, i, t));
            if !ll.is_finite() {
                return Err(Error::NonFinite { unit: i, period: t });
            }
            acc.add(ll);
        }
    }
    Ok(acc.value())
}

fn cell_grid(data: &PanelData, params: &ParameterSet, obj: &Objective) -> Result<Vec<CellTerms>> {
    params.check_against(data)?;
    let mut cells = Vec::with_capacity(data.n() * data.t());
    for i in 0..data.n() {
        for t in 0..data.t() {
            let c = obj.cell(data.y(i, t), cell_index(data, params, i, t));
            if !(c.loglik.is_finite() && c.score.is_finite() && c.curvature.is_finite()) {
                return Err(Error::NonFinite { unit: i, period: t });
            }
            cells.push(c);
        }
    }
    Ok(cells)
}

/// `u_it = (x_itᵀ, f_tᵀ)ᵀ`.
pub(crate) fn unit_regressor(data: &PanelData, params: &ParameterSet, i: usize, t: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(data.x(i, t));
    out.extend(params.f.row(t).iter().copied());
}

/// Per-unit and per-period score blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBlocks {
    /// N×(d_beta+d_f); row i is `∂ log L / ∂θ_i`.
    pub d_theta: DMatrix<f64>,
    /// T×d_f; row t is `∂ log L / ∂f_t`.
    pub d_f_t: DMatrix<f64>,
}

/// Diagonal Hessian blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    pub theta_blocks: Vec<DMatrix<f64>>,
    pub f_blocks: Vec<DMatrix<f64>>,
}

pub fn score_theta(data: &PanelData, params: &ParameterSet, obj: &Objective) -> Result<DMatrix<f64>> {
    let cells = cell_grid(data, params, obj)?;
    let p = data.d_beta() + params.d_f();
    let mut out = DMatrix::zeros(data.n(), p);
    let mut u = Vec::with_capacity(p);
    for i in 0..data.n() {
        for t in 0..data.t() {
            let w = cells[i * data.t() + t].score;
            unit_regressor(data, params, i, t, &mut u);
            for (k, uk) in u.iter().enumerate() {
                out[(i, k)] += w * uk;
            }
        }
    }
    Ok(out)
}

pub fn score_f(data: &PanelData, params: &ParameterSet, obj: &Objective) -> Result<DMatrix<f64>> {
    let cells = cell_grid(data, params, obj)?;
    let d_f = params.d_f();
    let mut out = DMatrix::zeros(data.t(), d_f);
    for i in 0..data.n() {
        for t in 0..data.t() {
            let w = cells[i * data.t() + t].score;
            for k in 0..d_f {
                out[(t, k)] += w * params.gamma[(i, k)];
            }
        }
    }
    Ok(out)
}

pub fn scores(data: &PanelData, params: &ParameterSet, obj: &Objective) -> Result<ScoreBlocks> {
    Ok(ScoreBlocks {
        d_theta: score_theta(data, params, obj)?,
        d_f_t: score_f(data, params, obj)?,
    })
}

/// `∂² log L / ∂θ_i ∂θ_iᵀ` for every unit.
pub fn hessian_theta(
    data: &PanelData,
    params: &ParameterSet,
    obj: &Objective,
    kind: HessianKind,
) -> Result<Vec<DMatrix<f64>>> {
    let cells = cell_grid(data, params, obj)?;
    let p = data.d_beta() + params.d_f();
    let mut u = Vec::with_capacity(p);
    let mut blocks = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let mut h = DMatrix::zeros(p, p);
        for t in 0..data.t() {
            let c = cells[i * data.t() + t].second(kind);
            unit_regressor(data, params, i, t, &mut u);
            for a in 0..p {
                for b in 0..p {
                    h[(a, b)] += c * u[a] * u[b];
                }
            }
        }
        blocks.push(h);
    }
    Ok(blocks)
}

/// `∂² log L / ∂f_t ∂f_tᵀ` for every period.
pub fn hessian_f(
    data: &PanelData,
    params: &ParameterSet,
    obj: &Objective,
    kind: HessianKind,
) -> Result<Vec<DMatrix<f64>>> {
    let cells = cell_grid(data, params, obj)?;
    let d_f = params.d_f();
    let mut blocks = vec![DMatrix::zeros(d_f, d_f); data.t()];
    for i in 0..data.n() {
        for (t, h) in blocks.iter_mut().enumerate() {
            let c = cells[i * data.t() + t].second(kind);
            for a in 0..d_f {
                for b in 0..d_f {
                    h[(a, b)] += c * params.gamma[(i, a)] * params.gamma[(i, b)];
                }
            }
        }
    }
    Ok(blocks)
}

pub fn hessians(data: &PanelData, params: &ParameterSet, obj: &Objective, kind: HessianKind) -> Result<HessianBlocks> {
    Ok(HessianBlocks {
        theta_blocks: hessian_theta(data, params, obj, kind)?,
        f_blocks: hessian_f(data, params, obj, kind)?,
    })
}
