//! Rolling-window sign forecasts and minimum-variance portfolios.
//!
//! Each window covers 506 consecutive days `s, …, s+505`. The model is fitted
//! on the pairs `(x_τ, y_{τ+1})`, `τ = 0, …, 503`, where `x_τ` is the
//! standardized log VIX of day `s+τ` and `y_{τ+1}` the sign of a stock's
//! return on the following day. The probability of a positive return on day
//! `s+505` uses `x_504` and the last factor estimate `f̂_503`. Stocks with a
//! probability of at least one half enter a minimum-variance portfolio built
//! from their covariance over the training returns.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig, FitResult};
use crate::link::LinkFamily;
use crate::rng::stream_rng;
use crate::selector::select_num_factors;
use crate::types::PanelData;

/// Days of estimation data per window (504 training pairs plus the forecast
/// regressor day).
pub const WINDOW: usize = 505;
pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    pub dates: Vec<String>,
    pub tickers: Vec<String>,
    /// Simple daily returns, stocks × days.
    pub returns: DMatrix<f64>,
    /// Natural log of the volatility index, one value per day.
    pub log_vix: Vec<f64>,
    /// Daily risk-free rate as a decimal.
    pub rfi: Vec<f64>,
}

impl MarketData {
    pub fn new(
        dates: Vec<String>,
        tickers: Vec<String>,
        returns: DMatrix<f64>,
        log_vix: Vec<f64>,
        rfi: Vec<f64>,
    ) -> Result<Self> {
        let days = dates.len();
        if returns.ncols() != days {
            return Err(Error::Dimension {
                axis: "return days",
                expected: days,
                found: returns.ncols(),
            });
        }
        if returns.nrows() != tickers.len() {
            return Err(Error::Dimension {
                axis: "return stocks",
                expected: tickers.len(),
                found: returns.nrows(),
            });
        }
        if log_vix.len() != days {
            return Err(Error::Dimension {
                axis: "vix days",
                expected: days,
                found: log_vix.len(),
            });
        }
        if rfi.len() != days {
            return Err(Error::Dimension {
                axis: "risk-free days",
                expected: days,
                found: rfi.len(),
            });
        }
        if returns.iter().chain(&log_vix).chain(&rfi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("market data must be finite".into()));
        }
        Ok(Self {
            dates,
            tickers,
            returns,
            log_vix,
            rfi,
        })
    }

    pub fn n_stocks(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// Number of out-of-sample days a rolling backtest produces.
    pub fn n_forecast_days(&self) -> usize {
        self.n_days().saturating_sub(WINDOW)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorChoice {
    Fixed(usize),
    /// Information-criterion choice in every window.
    Optimal {
        d_max: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Interactive fixed effects model with the standardized log VIX as regressor.
    Ife(FactorChoice),
    /// Unit intercept and VIX slope, no factors.
    Fe,
    /// Equal weights on every stock.
    Ew,
    /// Minimum variance over every stock using the correlation matrix.
    Cm,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Ife(FactorChoice::Fixed(d)) => write!(f, "ife:{d}"),
            Strategy::Ife(FactorChoice::Optimal { d_max }) => write!(f, "ife:optimal:{d_max}"),
            Strategy::Fe => write!(f, "fe"),
            Strategy::Ew => write!(f, "ew"),
            Strategy::Cm => write!(f, "cm"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// `ife:<d>`, `ife:optimal[:<d_max>]` (default `d_max` 5), `fe`, `ew`, `cm`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = lower.split(':').collect();
        let bad = || Error::InvalidArgument(format!("unknown strategy {s:?}"));
        match parts.as_slice() {
            ["fe"] => Ok(Strategy::Fe),
            ["ew"] => Ok(Strategy::Ew),
            ["cm"] => Ok(Strategy::Cm),
            ["ife", "optimal"] => Ok(Strategy::Ife(FactorChoice::Optimal { d_max: 5 })),
            ["ife", "optimal", d] => Ok(Strategy::Ife(FactorChoice::Optimal {
                d_max: d.parse().map_err(|_| bad())?,
            })),
            ["ife", d] => Ok(Strategy::Ife(FactorChoice::Fixed(d.parse().map_err(|_| bad())?))),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub fit: FitConfig,
    pub link: LinkFamily,
    /// Ridge `ε · tr(Σ)/k` added to covariance matrices before inversion.
    pub ridge: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            link: LinkFamily::Probit,
            ridge: 1e-6,
        }
    }
}

/// `p_i = G(x_iᵀβ̂_i + γ̂_iᵀ f̂_last)` where `f̂_last` is the final row of `F̂`.
/// `x_next` is N×d_beta.
pub fn forecast_probs(fit: &FitResult, x_next: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = &fit.params;
    if x_next.shape() != (p.n(), p.d_beta()) {
        return Err(Error::Dimension {
            axis: "forecast regressors (N×d_beta)",
            expected: p.n() * p.d_beta(),
            found: x_next.len(),
        });
    }
    let last = p
        .t()
        .checked_sub(1)
        .ok_or_else(|| Error::InvalidArgument("fit has no periods".into()))?;
    Ok((0..p.n())
        .map(|i| {
            let mut z: f64 = x_next.row(i).dot(&p.b.row(i));
            for k in 0..p.d_f() {
                z += p.gamma[(i, k)] * p.f[(last, k)];
            }
            fit.objective.prob(z)
        })
        .collect())
}

/// Stocks whose probability of a positive return is at least one half.
pub fn select_stocks(probs: &[f64]) -> Vec<usize> {
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= 0.5)
        .map(|(i, _)| i)
        .collect()
}

/// Global minimum-variance weights `Σ⁻¹1 / (1ᵀΣ⁻¹1)`. Short positions are allowed.
pub fn min_var_weights(sigma: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = sigma.nrows();
    if k == 0 || sigma.ncols() != k {
        return Err(Error::InvalidArgument(
            "covariance must be a non-empty square matrix".into(),
        ));
    }
    let ones = DVector::from_element(k, 1.0);
    let solved = match sigma.clone().cholesky() {
        Some(ch) => ch.solve(&ones),
        None => sigma
            .clone()
            .lu()
            .solve(&ones)
            .ok_or_else(|| Error::Singular("covariance matrix".into()))?,
    };
    let total = solved.sum();
    if !(total > 1e-12) || !solved.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular(format!("1ᵀΣ⁻¹1 = {total:e}")));
    }
    Ok(solved / total)
}

fn add_ridge(sigma: &mut DMatrix<f64>, eps: f64) {
    let k = sigma.nrows();
    let bump = eps * sigma.trace() / k as f64;
    for j in 0..k {
        sigma[(j, j)] += bump;
    }
}

/// Sample covariance (divisor `n-1`) of the rows of `returns` (variables ×
/// observations).
pub fn sample_covariance(returns: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, n) = returns.shape();
    let means = returns.column_mean();
    let centered = DMatrix::from_fn(k, n, |i, t| returns[(i, t)] - means[i]);
    &centered * centered.transpose() / (n as f64 - 1.0).max(1.0)
}

fn correlation(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sd: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| {
        if i == j {
            1.0
        } else if sd[i] > 0.0 && sd[j] > 0.0 {
            cov[(i, j)] / (sd[i] * sd[j])
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressors {
    /// Standardized log VIX only.
    Vix,
    /// Intercept and standardized log VIX.
    InterceptVix,
}

/// Training panel of the window starting at day `start`, and the forecast
/// regressors (from day `start + 504`).
pub fn window_panel(market: &MarketData, start: usize, regs: Regressors) -> Result<(PanelData, DMatrix<f64>)> {
    let t = WINDOW - 1;
    if start + WINDOW > market.n_days() {
        return Err(Error::InvalidArgument(format!(
            "window at day {start} needs {} days, market has {}",
            start + WINDOW,
            market.n_days()
        )));
    }
    let train = &market.log_vix[start..start + t];
    let mean = train.iter().sum::<f64>() / t as f64;
    let sd = (train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t as f64 - 1.0)).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let vix = |day: usize| (market.log_vix[day] - mean) / scale;
    let d_beta = match regs {
        Regressors::Vix => 1,
        Regressors::InterceptVix => 2,
    };
    let x_row = |day: usize| -> Vec<f64> {
        match regs {
            Regressors::Vix => vec![vix(day)],
            Regressors::InterceptVix => vec![1.0, vix(day)],
        }
    };
    let panel = PanelData::from_fn(
        market.n_stocks(),
        t,
        d_beta,
        |i, tau| {
            if market.returns[(i, start + tau + 1)] > 0.0 {
                1.0
            } else {
                0.0
            }
        },
        |_, tau, k| x_row(start + tau)[k],
    )?;
    let next = x_row(start + t);
    let x_next = DMatrix::from_fn(market.n_stocks(), d_beta, |_, k| next[k]);
    Ok((panel, x_next))
}

/// Portfolio held on one out-of-sample day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayDecision {
    /// Weight per stock (zero for stocks not held).
    pub weights: DVector<f64>,
    pub selected: Vec<usize>,
    pub chosen_d: Option<usize>,
    pub no_trade: bool,
}

/// Weights for day `start + 505`, computed only from days `start` through
/// `start + 504`.
pub fn day_weights(market: &MarketData, strategy: Strategy, cfg: &BacktestConfig, start: usize) -> Result<DayDecision> {
    let n = market.n_stocks();
    let train_returns = || market.returns.columns(start + 1, WINDOW - 1).into_owned();
    let all: Vec<usize> = (0..n).collect();
    let (selected, chosen_d, use_correlation) = match strategy {
        Strategy::Ew => {
            let w = DVector::from_element(n, 1.0 / n as f64);
            return Ok(DayDecision {
                weights: w,
                selected: all,
                chosen_d: None,
                no_trade: false,
            });
        }
        Strategy::Cm => (all, None, true),
        Strategy::Fe | Strategy::Ife(_) => {
            let regs = if strategy == Strategy::Fe {
                Regressors::InterceptVix
            } else {
                Regressors::Vix
            };
            let (panel, x_next) = window_panel(market, start, regs)?;
            let (fitted, d) = match strategy {
                Strategy::Ife(FactorChoice::Optimal { d_max }) => {
                    let sel = select_num_factors(&panel, cfg.link, &cfg.fit, d_max)?;
                    let d = sel.chosen_d;
                    (sel.fits.get(&d).cloned().expect("chosen fit present"), Some(d))
                }
                Strategy::Ife(FactorChoice::Fixed(d)) => {
                    let c = FitConfig {
                        d_f: d,
                        ..cfg.fit.clone()
                    };
                    (fit(&panel, cfg.link, &c)?, Some(d))
                }
                _ => {
                    let c = FitConfig {
                        d_f: 0,
                        ..cfg.fit.clone()
                    };
                    (fit(&panel, cfg.link, &c)?, None)
                }
            };
            let probs = forecast_probs(&fitted, &x_next)?;
            (select_stocks(&probs), d, false)
        }
    };
    if selected.len() < 2 {
        return Ok(DayDecision {
            weights: DVector::zeros(n),
            selected,
            chosen_d,
            no_trade: true,
        });
    }
    let rets = train_returns();
    let sub = DMatrix::from_fn(selected.len(), rets.ncols(), |a, t| rets[(selected[a], t)]);
    let cov = sample_covariance(&sub);
    let mut sigma = if use_correlation { correlation(&cov) } else { cov };
    add_ridge(&mut sigma, cfg.ridge);
    let w_sel = min_var_weights(&sigma)?;
    let mut weights = DVector::zeros(n);
    for (a, &i) in selected.iter().enumerate() {
        weights[i] = w_sel[a];
    }
    Ok(DayDecision {
        weights,
        selected,
        chosen_d,
        no_trade: false,
    })
}

/// Annualized summary of a daily return series, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceStats {
    /// `252 · mean(r)`, percent.
    pub mean: f64,
    /// `√252 · sd(r)`, percent, sample standard deviation.
    pub std: f64,
    pub ir: f64,
    pub sr: f64,
}

pub fn annualized_mean(daily: &[f64]) -> f64 {
    100.0 * TRADING_DAYS * daily.iter().sum::<f64>() / daily.len() as f64
}

pub fn information_ratio(mean: f64, std: f64) -> f64 {
    mean / std
}

pub fn performance_stats(daily: &[f64], daily_rfi: &[f64]) -> Result<PerformanceStats> {
    if daily.len() < 2 {
        return Err(Error::InvalidArgument("performance needs at least two returns".into()));
    }
    if daily_rfi.len() != daily.len() {
        return Err(Error::Dimension {
            axis: "risk-free days",
            expected: daily.len(),
            found: daily_rfi.len(),
        });
    }
    let n = daily.len() as f64;
    let m = daily.iter().sum::<f64>() / n;
    let var = daily.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1.0);
    let std = 100.0 * (TRADING_DAYS * var).sqrt();
    if !(std > 0.0) {
        return Err(Error::InvalidArgument("returns have zero standard deviation".into()));
    }
    let mean = annualized_mean(daily);
    let rf = daily_rfi.iter().sum::<f64>() / n;
    Ok(PerformanceStats {
        mean,
        std,
        ir: information_ratio(mean, std),
        sr: 100.0 * TRADING_DAYS * (m - rf) / std,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub dates: Vec<String>,
    pub daily_returns: Vec<f64>,
    /// Number of factors used per day (IFE only).
    pub chosen_d: Vec<Option<usize>>,
    pub n_no_trade_days: usize,
    pub stats: Option<PerformanceStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub window: usize,
    pub n_stocks: usize,
    pub strategies: Vec<StrategyReport>,
    /// Both Mean and Std are annualized percentages.
    pub note: String,
}

/// Runs every strategy over all window positions (in parallel; results keep
/// date order).
pub fn rolling_backtest(market: &MarketData, strategies: &[Strategy], cfg: &BacktestConfig) -> Result<BacktestReport> {
    if market.n_days() < WINDOW + 1 {
        return Err(Error::InvalidArgument(format!(
            "backtest needs at least {} days, got {}",
            WINDOW + 1,
            market.n_days()
        )));
    }
    let starts: Vec<usize> = (0..market.n_forecast_days()).collect();
    let mut reports = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let decisions: Vec<Result<DayDecision>> = starts
            .par_iter()
            .map(|&s| day_weights(market, strategy, cfg, s))
            .collect();
        let mut daily = Vec::with_capacity(starts.len());
        let mut chosen = Vec::with_capacity(starts.len());
        let mut no_trade = 0;
        for (&s, dec) in starts.iter().zip(decisions) {
            let dec = dec?;
            let day = s + WINDOW;
            daily.push(dec.weights.dot(&market.returns.column(day)));
            chosen.push(dec.chosen_d);
            no_trade += dec.no_trade as usize;
        }
        let rfi: Vec<f64> = starts.iter().map(|&s| market.rfi[s + WINDOW]).collect();
        reports.push(StrategyReport {
            strategy,
            dates: starts.iter().map(|&s| market.dates[s + WINDOW].clone()).collect(),
            stats: performance_stats(&daily, &rfi).ok(),
            daily_returns: daily,
            chosen_d: chosen,
            n_no_trade_days: no_trade,
        });
    }
    Ok(BacktestReport {
        window: WINDOW,
        n_stocks: market.n_stocks(),
        strategies: reports,
        note: "Mean and Std are annualized and in percent".into(),
    })
}

/// Plain-text summary table, one row per strategy.
pub fn render_table(report: &BacktestReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>10} {:>10} {:>10} {:>7} {:>7} {:>9}",
        "Model", "Factors", "Mean (%)", "Std (%)", "IR", "SR", "No-trade"
    );
    for r in &report.strategies {
        let (model, factors) = match r.strategy {
            Strategy::Ife(FactorChoice::Fixed(d)) => ("IFE", d.to_string()),
            Strategy::Ife(FactorChoice::Optimal { .. }) => ("IFE", "Optimal".to_string()),
            Strategy::Fe => ("FE", String::new()),
            Strategy::Ew => ("EW", String::new()),
            Strategy::Cm => ("CM", String::new()),
        };
        match r.stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{model:<6} {factors:>10} {:>10.2} {:>10.2} {:>7.2} {:>7.2} {:>9}",
                    s.mean, s.std, s.ir, s.sr, r.n_no_trade_days
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{model:<6} {factors:>10} {:>10} {:>10} {:>7} {:>7} {:>9}",
                    "-", "-", "-", "-", r.n_no_trade_days
                );
            }
        }
    }
    out
}

/// Synthetic market whose return signs follow a one-factor probit model.
///
/// A persistent AR(1) factor `f_t` with loadings of both signs drives
/// `P(r_{i,t+1} > 0) = Φ(γ_i f_t + β_i x_t)`, so a model that tracks the
/// factor can pick tomorrow's winners while the equal-weighted market has
/// no drift.
pub fn planted_signal_market(n_stocks: usize, n_days: usize, seed: u64) -> Result<MarketData> {
    let mut rng = stream_rng(&[seed, 101]);
    let rho: f64 = 0.97;
    let mut f = vec![0.0; n_days];
    let mut lv = vec![0.0; n_days];
    let f0: f64 = StandardNormal.sample(&mut rng);
    f[0] = 1.5 * f0;
    for t in 1..n_days {
        let e: f64 = StandardNormal.sample(&mut rng);
        f[t] = rho * f[t - 1] + 1.5 * (1.0 - rho * rho).sqrt() * e;
        let v: f64 = StandardNormal.sample(&mut rng);
        lv[t] = 0.9 * lv[t - 1] + 0.1 * v;
    }
    let log_vix: Vec<f64> = lv.iter().map(|v| 3.0 + v).collect();
    // Loadings and slopes come in mirrored pairs, so up and down moves
    // cancel in expectation across the market.
    let mut gamma = Vec::with_capacity(n_stocks);
    let mut beta = Vec::with_capacity(n_stocks);
    for i in 0..n_stocks {
        if i % 2 == 0 {
            gamma.push(rng.random_range(-1.5..1.5));
            beta.push(rng.random_range(-0.3..0.3));
        } else {
            gamma.push(-gamma[i - 1]);
            beta.push(-beta[i - 1]);
        }
    }
    let mut returns = DMatrix::zeros(n_stocks, n_days);
    for i in 0..n_stocks {
        for t in 0..n_days {
            let e: f64 = StandardNormal.sample(&mut rng);
            let size: f64 = StandardNormal.sample(&mut rng);
            let up = if t == 0 {
                e >= 0.0
            } else {
                gamma[i] * f[t - 1] + beta[i] * (log_vix[t - 1] - 3.0) * 10.0 >= e
            };
            let mag = 0.005 + 0.01 * size.abs();
            returns[(i, t)] = if up { mag } else { -mag };
        }
    }
    MarketData::new(
        (0..n_days).map(|t| format!("d{t:05}")).collect(),
        (0..n_stocks).map(|i| format!("S{i:03}")).collect(),
        returns,
        log_vix,
        vec![1e-4; n_days],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::Objective;
    use crate::types::ParameterSet;
    use proptest::prelude::{prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fit_with(params: ParameterSet) -> FitResult {
        FitResult {
            params,
            loglik: 0.0,
            outer_iters: 0,
            converged: true,
            loglik_trace: vec![],
            start_index: 0,
            start_logliks: vec![],
            separated: vec![],
            objective: Objective::new(LinkFamily::Probit),
        }
    }

    fn random_psd(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(k, k + 2, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(k, k) * 1e-3
    }

    #[test]
    fn min_var_examples() {
        let w = min_var_weights(&DMatrix::identity(3, 3)).unwrap();
        for v in w.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = min_var_weights(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        assert!((w[0] - 0.8).abs() < 1e-15 && (w[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn min_var_matches_kkt_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 5;
        let s = random_psd(&mut rng, k);
        // [2Σ 1; 1ᵀ 0] [w; λ] = [0; 1]
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        kkt.view_mut((0, 0), (k, k)).copy_from(&(&s * 2.0));
        for i in 0..k {
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let sol = kkt.lu().solve(&rhs).unwrap();
        let w = min_var_weights(&s).unwrap();
        for i in 0..k {
            assert!((w[i] - sol[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn min_var_rejects_degenerate() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(min_var_weights(&s).is_err());
    }

    #[test]
    fn selection_threshold_is_inclusive() {
        assert_eq!(select_stocks(&[0.6, 0.4, 0.5]), vec![0, 2]);
        assert!(select_stocks(&[0.49; 4]).is_empty());
        assert_eq!(select_stocks(&[0.5; 3]), vec![0, 1, 2]);
    }

    #[test]
    fn forecast_examples() {
        let zero = ParameterSet::new(
            DMatrix::zeros(3, 1),
            DMatrix::zeros(3, 1),
            DMatrix::from_element(4, 1, 1.0),
        )
        .unwrap();
        let probs = forecast_probs(&fit_with(zero), &DMatrix::from_element(3, 1, 2.0)).unwrap();
        assert_eq!(probs, vec![0.5; 3]);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = ParameterSet::new(
            DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let x = DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let probs = forecast_probs(&fit_with(p.clone()), &x).unwrap();
        for i in 0..4 {
            let z = x[(i, 0)] * p.b[(i, 0)]
                + x[(i, 1)] * p.b[(i, 1)]
                + p.gamma[(i, 0)] * p.f[(5, 0)]
                + p.gamma[(i, 1)] * p.f[(5, 1)];
            assert!((probs[i] - LinkFamily::Probit.cdf(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn table_ratios() {
        assert_eq!(format!("{:.2}", information_ratio(16.11, 12.33)), "1.31");
        assert_eq!(format!("{:.2}", information_ratio(13.35, 15.36)), "0.87");
        assert!((annualized_mean(&[0.000639; 10]) - 16.10).abs() < 0.005);
    }

    #[test]
    fn performance_rules() {
        let r = [0.01, -0.005, 0.002, 0.004];
        let s = performance_stats(&r, &r).unwrap();
        assert_eq!(s.sr, 0.0);
        assert!((s.ir - s.mean / s.std).abs() < 1e-12);
        assert!(performance_stats(&[0.001; 5], &[0.0; 5]).is_err());
    }

    #[test]
    fn equal_weights_average_returns() {
        let mut m = planted_signal_market(3, WINDOW + 1, 1).unwrap();
        m.returns.set_column(WINDOW, &DVector::from_vec(vec![0.01, 0.02, 0.03]));
        let rep = rolling_backtest(&m, &[Strategy::Ew], &BacktestConfig::default()).unwrap();
        assert!((rep.strategies[0].daily_returns[0] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn all_low_probabilities_mean_no_trade() {
        // Every stock falls every day, so every forecast is below one half.
        let mut m = planted_signal_market(4, WINDOW + 3, 2).unwrap();
        m.returns.iter_mut().for_each(|r| *r = -r.abs());
        let cfg = BacktestConfig {
            fit: FitConfig {
                n_starts: 1,
                ..FitConfig::default()
            },
            ..BacktestConfig::default()
        };
        let rep = rolling_backtest(&m, &[Strategy::Fe], &cfg).unwrap();
        let s = &rep.strategies[0];
        assert_eq!(s.n_no_trade_days, 3);
        assert!(s.daily_returns.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn strategy_strings_round_trip() {
        for s in [
            Strategy::Ife(FactorChoice::Fixed(2)),
            Strategy::Ife(FactorChoice::Optimal { d_max: 4 }),
            Strategy::Fe,
            Strategy::Ew,
            Strategy::Cm,
        ] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!(
            "ife:optimal".parse::<Strategy>().unwrap(),
            Strategy::Ife(FactorChoice::Optimal { d_max: 5 })
        );
        assert!("ife:x".parse::<Strategy>().is_err());
    }

    #[test]
    fn window_regressors_are_standardized_in_sample() {
        let m = planted_signal_market(2, WINDOW + 5, 3).unwrap();
        let (panel, _) = window_panel(&m, 2, Regressors::Vix).unwrap();
        let xs: Vec<f64> = (0..panel.t()).map(|t| panel.x(0, t)[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert_eq!(panel.y(1, 0), if m.returns[(1, 3)] > 0.0 { 1.0 } else { 0.0 });
    }

    proptest! {
        #[test]
        fn min_var_is_optimal(seed in 0u64..500, k in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_psd(&mut rng, k);
            let w = min_var_weights(&s).unwrap();
            prop_assert!((w.sum() - 1.0).abs() < 1e-10);
            let best = (w.transpose() * &s * &w)[(0, 0)];
            for _ in 0..50 {
                let mut v = DVector::from_fn(k, |_, _| rng.random_range(-2.0..2.0));
                let shift = (v.sum() - 1.0) / k as f64;
                v.add_scalar_mut(-shift);
                prop_assert!(best <= (v.transpose() * &s * &v)[(0, 0)] + 1e-12);
            }
        }

        #[test]
        fn uniform_weights_for_scaled_identity(c in 1e-6f64..1e6, k in 1usize..8) {
            let w = min_var_weights(&(DMatrix::identity(k, k) * c)).unwrap();
            for v in w.iter() {
                prop_assert!((v - 1.0 / k as f64).abs() < 1e-12);
            }
        }
    }
}
