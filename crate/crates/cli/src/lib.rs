//! Command-line front end: `simulate`, `estimate`, `select` and `backtest`.
//!
//! Every command writes a JSON report (to `--output`, or stdout) and a
//! plain-text table (to `--table`, or stdout when the JSON went to a file).
//! Diagnostics go to stderr as one JSON object per line. Usage errors exit
//! with 2, runtime failures with 1.

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use binife::estimator::{fit, FitConfig, FitResult};
use binife::inference::{ape, covariances, jackknife_bc, mean_group_result, JackknifeResult, MeanGroupResult};
use binife::io::{load_market_csv, load_panel_csv, to_json_report, MarketLoadReport};
use binife::link::LinkFamily;
use binife::portfolio::{self, planted_signal_market, rolling_backtest, BacktestConfig, BacktestReport};
use binife::selector::{select_num_factors, select_with_penalty, SelectionResult};
use binife::simulation::{self, run_monte_carlo, McReport};
use binife::types::{matrix_rows, PanelData};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{CommandConfig, MarketSource, RunConfig};

/// A problem with the invocation itself (flags, config file).
#[derive(Debug)]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(
    name = "binife",
    version,
    about = "Binary panel models with interactive fixed effects"
)]
pub struct Cli {
    /// Config file of `key = value` lines with `[section]` headers; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true, env = "BINIFE_WORKERS")]
    pub workers: Option<usize>,
    /// JSON report path [default: stdout].
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Text table path [default: stdout when --output is set, otherwise not written].
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo study of factor-number selection and estimation error.
    Simulate(SimulateArgs),
    /// Fit a panel file and report estimates, standard errors and partial effects.
    Estimate(EstimateArgs),
    /// Information criterion for every candidate number of factors.
    Select(SelectArgs),
    /// Rolling-window portfolio backtest.
    Backtest(BacktestArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Error tails: 1 normal (probit), 2 logistic (logit) [default: 1].
    #[arg(long)]
    pub case: Option<u8>,
    /// Error dependence: 1 iid, 2 AR(0.3), 3 AR(0.7) [default: 1].
    #[arg(long)]
    pub dgp: Option<u8>,
    /// Units [default: 100].
    #[arg(long)]
    pub n: Option<usize>,
    /// Periods [default: 100].
    #[arg(long)]
    pub t: Option<usize>,
    /// Replications [default: 100].
    #[arg(long)]
    pub m: Option<usize>,
    /// Largest number of factors tried [default: 4].
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Base seed.
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Panel CSV with header unit,time,y,x1..xk.
    #[arg(long)]
    pub input: PathBuf,
    /// probit, logit or uniform:lo:hi [default: probit].
    #[arg(long)]
    pub link: Option<String>,
    /// Number of factors when not selecting [default: 1].
    #[arg(long)]
    pub d_f: Option<usize>,
    /// Choose the number of factors by the information criterion.
    #[arg(long)]
    pub select_d: bool,
    /// Largest number of factors tried by --select-d [default: 5].
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Add the half-panel jackknife bias-corrected mean-group slope.
    #[arg(long)]
    pub jackknife: bool,
    /// Seed for random starts and the jackknife split [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Panel CSV with header unit,time,y,x1..xk.
    #[arg(long)]
    pub input: PathBuf,
    /// probit, logit or uniform:lo:hi [default: probit].
    #[arg(long)]
    pub link: Option<String>,
    /// Largest number of factors tried [default: 5].
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Penalty scale [default: log sqrt(N+T)].
    #[arg(long)]
    pub xi: Option<f64>,
    /// Seed for random starts [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Wide price CSV: date,<ticker>,... (empty cell for a missing price).
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Volatility index CSV: date,vix.
    #[arg(long)]
    pub vix: Option<PathBuf>,
    /// Daily risk-free rate CSV: date,rfi.
    #[arg(long)]
    pub rfi: Option<PathBuf>,
    /// Use a synthetic one-factor market with this many stocks instead of files.
    #[arg(long)]
    pub synthetic_stocks: Option<usize>,
    /// Days in the synthetic market.
    #[arg(long)]
    pub synthetic_days: Option<usize>,
    /// Comma-separated list of ife:<d>, ife:optimal[:<d_max>], fe, ew, cm
    /// [default: ife:1..ife:5, ife:optimal, fe, ew, cm].
    #[arg(long)]
    pub strategies: Option<String>,
    /// probit, logit or uniform:lo:hi [default: probit].
    #[arg(long)]
    pub link: Option<String>,
    /// Covariance ridge as a fraction of the average variance [default: 1e-6].
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Seed for random starts (and the synthetic market).
    #[arg(long)]
    pub seed: u64,
}

fn diag(level: &str, message: &str, extra: serde_json::Value) {
    let mut obj = serde_json::json!({ "level": level, "message": message });
    if let (Some(o), serde_json::Value::Object(e)) = (obj.as_object_mut(), extra) {
        o.extend(e);
    }
    let _ = writeln!(std::io::stderr().lock(), "{obj}");
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code.clamp(0, 255) as u8;
        }
    };
    let cfg = match RunConfig::resolve(&cli) {
        Ok(c) => c,
        Err(UsageError(msg)) => {
            diag("error", &msg, serde_json::json!({ "kind": "usage" }));
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            diag("error", &e.to_string(), serde_json::json!({ "kind": "runtime" }));
            return 1;
        }
    };
    match pool.install(|| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            diag(
                "error",
                &e.to_string(),
                serde_json::json!({ "kind": "runtime", "causes": causes }),
            );
            1
        }
    }
}

fn emit(cfg: &RunConfig, json: &str, table: &str) -> anyhow::Result<()> {
    match &cfg.output {
        Some(p) => std::fs::write(p, json).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().lock().write_all(json.as_bytes())?,
    }
    match (&cfg.table, &cfg.output) {
        (Some(p), _) => std::fs::write(p, table).with_context(|| format!("writing {}", p.display()))?,
        (None, Some(_)) => std::io::stdout().lock().write_all(table.as_bytes())?,
        (None, None) => {}
    }
    Ok(())
}

fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let (json, table) = match &cfg.command {
        CommandConfig::Simulate { spec, m, d_max } => {
            let report = run_monte_carlo(spec, *m, &cfg.fit, *d_max).context("Monte Carlo run failed")?;
            for msg in &report.failure_messages {
                diag("warn", msg, serde_json::json!({ "kind": "replication" }));
            }
            let table = simulation::render_table(std::slice::from_ref(&report));
            (to_json_report(&SimulateReport { config: cfg, report })?, table)
        }
        CommandConfig::Estimate {
            input,
            link,
            d_f,
            select_d,
            d_max,
            jackknife,
        } => {
            let data = load_panel_csv(input).with_context(|| format!("loading {}", input.display()))?;
            let report = estimate(cfg, &data, *link, *d_f, select_d.then_some(*d_max), *jackknife)?;
            let table = estimate_table(&report);
            (to_json_report(&report)?, table)
        }
        CommandConfig::Select { input, link, d_max, xi } => {
            let data = load_panel_csv(input).with_context(|| format!("loading {}", input.display()))?;
            let sel = match xi {
                Some(x) => select_with_penalty(&data, *link, &cfg.fit, *d_max, *x),
                None => select_num_factors(&data, *link, &cfg.fit, *d_max),
            }
            .context("factor-number selection failed")?;
            let report = SelectReport {
                config: cfg,
                n: data.n(),
                t: data.t(),
                selection: SelectionSummary::from(&sel),
            };
            let table = selection_table(&report.selection);
            (to_json_report(&report)?, table)
        }
        CommandConfig::Backtest {
            source,
            link,
            strategies,
            ridge,
        } => {
            let (market, load) = match source {
                MarketSource::Files { prices, vix, rfi } => {
                    let (m, rep) = load_market_csv(prices, vix, rfi).context("loading market data")?;
                    if !rep.dropped_stocks.is_empty() {
                        diag(
                            "info",
                            "stocks with missing prices removed",
                            serde_json::json!({ "count": rep.dropped_stocks.len(), "tickers": rep.dropped_stocks }),
                        );
                    }
                    diag(
                        "info",
                        "dates joined",
                        serde_json::json!({
                            "price_dates": rep.price_dates,
                            "vix_dates": rep.vix_dates,
                            "rfi_dates": rep.rfi_dates,
                            "joined_dates": rep.joined_dates,
                        }),
                    );
                    (m, Some(rep))
                }
                MarketSource::Synthetic { stocks, days } => (planted_signal_market(*stocks, *days, cfg.seed)?, None),
            };
            let bcfg = BacktestConfig {
                fit: cfg.fit.clone(),
                link: *link,
                ridge: *ridge,
            };
            let report = rolling_backtest(&market, strategies, &bcfg).context("backtest failed")?;
            let table = portfolio::render_table(&report);
            (
                to_json_report(&BacktestOutput {
                    config: cfg,
                    load,
                    report,
                })?,
                table,
            )
        }
    };
    emit(cfg, &json, &table)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    report: McReport,
}

#[derive(Serialize)]
struct BacktestOutput<'a> {
    config: &'a RunConfig,
    load: Option<MarketLoadReport>,
    #[serde(flatten)]
    report: BacktestReport,
}

#[derive(Serialize)]
struct SelectionSummary {
    chosen_d: usize,
    xi: f64,
    ic_values: BTreeMap<usize, f64>,
    failures: BTreeMap<usize, String>,
}

impl From<&SelectionResult> for SelectionSummary {
    fn from(s: &SelectionResult) -> Self {
        Self {
            chosen_d: s.chosen_d,
            xi: s.xi,
            ic_values: s.ic_values.clone(),
            failures: s.failures.clone(),
        }
    }
}

#[derive(Serialize)]
struct SelectReport<'a> {
    config: &'a RunConfig,
    n: usize,
    t: usize,
    #[serde(flatten)]
    selection: SelectionSummary,
}

#[derive(Serialize)]
struct UnitEstimate {
    id: String,
    beta: Vec<f64>,
    se_beta: Vec<f64>,
    gamma: Vec<f64>,
    se_gamma: Vec<f64>,
    ape: Vec<f64>,
    separated: bool,
    singular_bread: bool,
}

#[derive(Serialize)]
struct PeriodEstimate {
    id: String,
    f: Vec<f64>,
    se_f: Vec<f64>,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    config: &'a RunConfig,
    n: usize,
    t: usize,
    d_beta: usize,
    chosen_d: usize,
    selection: Option<SelectionSummary>,
    loglik: f64,
    converged: bool,
    outer_iters: usize,
    start_index: usize,
    mean_group: MeanGroupResult,
    mean_ape: Vec<f64>,
    jackknife: Option<JackknifeResult>,
    units: Vec<UnitEstimate>,
    periods: Vec<PeriodEstimate>,
}

fn estimate<'a>(
    cfg: &'a RunConfig,
    data: &PanelData,
    link: LinkFamily,
    d_f: usize,
    select_up_to: Option<usize>,
    with_jackknife: bool,
) -> anyhow::Result<EstimateReport<'a>> {
    let (fitted, selection): (FitResult, Option<SelectionSummary>) = match select_up_to {
        Some(d_max) => {
            let sel = select_num_factors(data, link, &cfg.fit, d_max).context("factor-number selection failed")?;
            let summary = SelectionSummary::from(&sel);
            (sel.chosen_fit().clone(), Some(summary))
        }
        None => {
            let c = FitConfig { d_f, ..cfg.fit.clone() };
            (fit(data, link, &c).context("estimation failed")?, None)
        }
    };
    if !fitted.converged {
        diag(
            "warn",
            "estimator reached the iteration limit before converging",
            serde_json::json!({ "outer_iters": fitted.outer_iters }),
        );
    }
    let d = fitted.d_f();
    let cov = covariances(data, &fitted).context("covariance estimation failed")?;
    let jk = if with_jackknife {
        let c = FitConfig {
            d_f: d,
            ..cfg.fit.clone()
        };
        Some(jackknife_bc(data, link, &c, cfg.seed).context("jackknife failed")?)
    } else {
        None
    };
    let mg = mean_group_result(data, &fitted, jk.as_ref())?;
    let partial = ape(data, &fitted)?;
    let ape_rows = matrix_rows(&partial.delta);
    let k = data.d_beta();
    let mean_ape = (0..k)
        .map(|j| ape_rows.iter().map(|r| r[j]).sum::<f64>() / data.n() as f64)
        .collect();
    let b_rows = matrix_rows(&fitted.params.b);
    let g_rows = matrix_rows(&fitted.params.gamma);
    let f_rows = matrix_rows(&fitted.params.f);
    let units = (0..data.n())
        .map(|i| {
            let se = cov.se_theta(i);
            UnitEstimate {
                id: data.unit_ids()[i].clone(),
                beta: b_rows[i].clone(),
                se_beta: se[..k].to_vec(),
                gamma: g_rows[i].clone(),
                se_gamma: se[k..].to_vec(),
                ape: ape_rows[i].clone(),
                separated: fitted.separated[i],
                singular_bread: cov.singular_units[i],
            }
        })
        .collect();
    let periods = (0..data.t())
        .map(|t| PeriodEstimate {
            id: data.time_ids()[t].clone(),
            f: f_rows[t].clone(),
            se_f: cov.se_f(t),
        })
        .collect();
    Ok(EstimateReport {
        config: cfg,
        n: data.n(),
        t: data.t(),
        d_beta: k,
        chosen_d: d,
        selection,
        loglik: fitted.loglik,
        converged: fitted.converged,
        outer_iters: fitted.outer_iters,
        start_index: fitted.start_index,
        mean_group: mg,
        mean_ape,
        jackknife: jk,
        units,
        periods,
    })
}

fn selection_table(s: &SelectionSummary) -> String {
    let mut out = format!("{:>3} {:>12}\n", "d", "IC");
    for (d, v) in &s.ic_values {
        let mark = if *d == s.chosen_d { "  <" } else { "" };
        let _ = writeln!(out, "{d:>3} {v:>12.6}{mark}");
    }
    for (d, e) in &s.failures {
        let _ = writeln!(out, "{d:>3} {:>12}  {e}", "failed");
    }
    let _ = writeln!(out, "xi = {:.6}", s.xi);
    out
}

fn estimate_table(r: &EstimateReport) -> String {
    let mut out = String::new();
    if let Some(s) = &r.selection {
        out.push_str(&selection_table(s));
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "N = {}, T = {}, factors = {}, log-likelihood = {:.4}, converged = {}",
        r.n, r.t, r.chosen_d, r.loglik, r.converged
    );
    let _ = write!(out, "{:<12}", "unit");
    for k in 0..r.d_beta {
        let _ = write!(out, " {:>12} {:>10}", format!("beta{}", k + 1), "(se)");
    }
    out.push('\n');
    for u in &r.units {
        let _ = write!(out, "{:<12}", u.id);
        for k in 0..r.d_beta {
            let _ = write!(out, " {:>12.4} {:>10}", u.beta[k], format!("({:.4})", u.se_beta[k]));
        }
        if u.separated {
            out.push_str("  separated");
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<12}", "mean group");
    for k in 0..r.d_beta {
        let _ = write!(out, " {:>12.4} {:>10}", r.mean_group.beta_bar[k], "");
    }
    out.push('\n');
    if let Some(bc) = &r.mean_group.beta_bc {
        let _ = write!(out, "{:<12}", "jackknife");
        for v in bc {
            let _ = write!(out, " {v:>12.4} {:>10}", "");
        }
        out.push('\n');
    }
    out
}
