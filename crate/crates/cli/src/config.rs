//! Run configuration: config-file values overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use binife::estimator::FitConfig;
use binife::io::parse_config;
use binife::likelihood::HessianKind;
use binife::link::LinkFamily;
use binife::portfolio::Strategy;
use binife::simulation::{Dgp, DgpSpec, TailCase};
use binife::types::IndexBounds;
use serde::Serialize;

use crate::{Command, UsageError};

/// Every key a config file may set. Section headers map to the prefix.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "workers",
    "fit.epsilon",
    "fit.max_outer_iters",
    "fit.n_starts",
    "fit.newton_max_steps",
    "fit.newton_max_halvings",
    "fit.newton_grad_tol",
    "fit.hessian",
    "fit.bound",
    "simulate.case",
    "simulate.dgp",
    "simulate.n",
    "simulate.t",
    "simulate.m",
    "simulate.d_max",
    "estimate.link",
    "estimate.d_f",
    "estimate.select_d",
    "estimate.d_max",
    "estimate.jackknife",
    "select.link",
    "select.d_max",
    "select.xi",
    "backtest.link",
    "backtest.strategies",
    "backtest.ridge",
];

pub const DEFAULT_D_MAX: usize = 5;
pub const DEFAULT_STRATEGIES: &str = "ife:1,ife:2,ife:3,ife:4,ife:5,ife:optimal,fe,ew,cm";

/// Values read from a config file, checked against [`KNOWN_KEYS`].
#[derive(Debug, Default)]
pub struct FileValues(BTreeMap<String, String>);

impl FileValues {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| UsageError(format!("config file {}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let map = parse_config(text).map_err(|e| UsageError(e.to_string()))?;
        if let Some(k) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(UsageError(format!("unknown config key {k:?}")));
        }
        Ok(Self(map))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| UsageError(format!("config key {key}: cannot parse {v:?}: {e}")))
            })
            .transpose()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum CommandConfig {
    Simulate {
        spec: DgpSpec,
        m: usize,
        d_max: usize,
    },
    Estimate {
        input: PathBuf,
        link: LinkFamily,
        d_f: usize,
        select_d: bool,
        d_max: usize,
        jackknife: bool,
    },
    Select {
        input: PathBuf,
        link: LinkFamily,
        d_max: usize,
        xi: Option<f64>,
    },
    Backtest {
        source: MarketSource,
        link: LinkFamily,
        strategies: Vec<Strategy>,
        ridge: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MarketSource {
    Files {
        prices: PathBuf,
        vix: PathBuf,
        rfi: PathBuf,
    },
    Synthetic {
        stocks: usize,
        days: usize,
    },
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub table: Option<PathBuf>,
    pub fit: FitConfig,
    #[serde(flatten)]
    pub command: CommandConfig,
}

fn parse_flag<T: FromStr>(what: &str, v: &str) -> Result<T, UsageError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| UsageError(format!("{what}: cannot parse {v:?}: {e}")))
}

fn parse_strategies(list: &str) -> Result<Vec<Strategy>, UsageError> {
    let out = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_flag::<Strategy>("strategy", s))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(UsageError("no strategies given".into()));
    }
    Ok(out)
}

fn fit_config(file: &FileValues, seed: u64) -> Result<FitConfig, UsageError> {
    let mut c = FitConfig {
        rng_seed: seed,
        ..FitConfig::default()
    };
    if let Some(v) = file.get("fit.epsilon")? {
        c.epsilon = v;
    }
    if let Some(v) = file.get("fit.max_outer_iters")? {
        c.max_outer_iters = v;
    }
    if let Some(v) = file.get("fit.n_starts")? {
        c.n_starts = v;
    }
    if let Some(v) = file.get("fit.newton_max_steps")? {
        c.newton.max_steps = v;
    }
    if let Some(v) = file.get("fit.newton_max_halvings")? {
        c.newton.max_halvings = v;
    }
    if let Some(v) = file.get("fit.newton_grad_tol")? {
        c.newton.grad_tol = v;
    }
    if let Some(v) = file.get::<String>("fit.hessian")? {
        c.hessian = match v.as_str() {
            "full" => HessianKind::Full,
            "expected" => HessianKind::Expected,
            other => {
                return Err(UsageError(format!(
                    "fit.hessian must be full or expected, got {other:?}"
                )))
            }
        };
    }
    if let Some(b) = file.get::<f64>("fit.bound")? {
        c.bounds = IndexBounds::new(-b, b).map_err(|e| UsageError(e.to_string()))?;
    }
    c.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(c)
}

impl RunConfig {
    pub fn resolve(cli: &crate::Cli) -> Result<Self, UsageError> {
        let file = match &cli.config {
            Some(p) => FileValues::load(p)?,
            None => FileValues::default(),
        };
        let seed_flag = match &cli.command {
            Command::Simulate(a) => Some(a.seed),
            Command::Backtest(a) => Some(a.seed),
            Command::Estimate(a) => a.seed,
            Command::Select(a) => a.seed,
        };
        let seed = seed_flag.or(file.get("seed")?).unwrap_or(0);
        let workers = cli.workers.or(file.get("workers")?);
        if workers == Some(0) {
            return Err(UsageError("workers must be at least 1".into()));
        }
        let fit = fit_config(&file, seed)?;
        let link_of = |flag: &Option<String>, key: &str| -> Result<LinkFamily, UsageError> {
            match flag {
                Some(s) => parse_flag("--link", s),
                None => Ok(file.get(key)?.unwrap_or(LinkFamily::Probit)),
            }
        };

        let command = match &cli.command {
            Command::Simulate(a) => {
                let case = a.case.or(file.get("simulate.case")?).unwrap_or(1);
                let dgp = a.dgp.or(file.get("simulate.dgp")?).unwrap_or(1);
                let spec = DgpSpec::new(
                    TailCase::from_number(case).map_err(|e| UsageError(e.to_string()))?,
                    Dgp::from_number(dgp).map_err(|e| UsageError(e.to_string()))?,
                    a.n.or(file.get("simulate.n")?).unwrap_or(100),
                    a.t.or(file.get("simulate.t")?).unwrap_or(100),
                    seed,
                );
                spec.validate().map_err(|e| UsageError(e.to_string()))?;
                let m = a.m.or(file.get("simulate.m")?).unwrap_or(100);
                if m == 0 {
                    return Err(UsageError("--m must be at least 1".into()));
                }
                CommandConfig::Simulate {
                    spec,
                    m,
                    d_max: a.d_max.or(file.get("simulate.d_max")?).unwrap_or(4),
                }
            }
            Command::Estimate(a) => CommandConfig::Estimate {
                input: a.input.clone(),
                link: link_of(&a.link, "estimate.link")?,
                d_f: a.d_f.or(file.get("estimate.d_f")?).unwrap_or(1),
                select_d: a.select_d || file.get("estimate.select_d")?.unwrap_or(false),
                d_max: a.d_max.or(file.get("estimate.d_max")?).unwrap_or(DEFAULT_D_MAX),
                jackknife: a.jackknife || file.get("estimate.jackknife")?.unwrap_or(false),
            },
            Command::Select(a) => CommandConfig::Select {
                input: a.input.clone(),
                link: link_of(&a.link, "select.link")?,
                d_max: a.d_max.or(file.get("select.d_max")?).unwrap_or(DEFAULT_D_MAX),
                xi: a.xi.or(file.get("select.xi")?),
            },
            Command::Backtest(a) => {
                let source = match (&a.prices, &a.vix, &a.rfi, a.synthetic_stocks, a.synthetic_days) {
                    (Some(p), Some(v), Some(r), None, None) => MarketSource::Files {
                        prices: p.clone(),
                        vix: v.clone(),
                        rfi: r.clone(),
                    },
                    (None, None, None, Some(stocks), Some(days)) => MarketSource::Synthetic { stocks, days },
                    _ => return Err(UsageError(
                        "backtest needs either --prices, --vix and --rfi, or --synthetic-stocks and --synthetic-days"
                            .into(),
                    )),
                };
                let list = match &a.strategies {
                    Some(s) => s.clone(),
                    None => file
                        .get::<String>("backtest.strategies")?
                        .unwrap_or_else(|| DEFAULT_STRATEGIES.to_string()),
                };
                CommandConfig::Backtest {
                    source,
                    link: link_of(&a.link, "backtest.link")?,
                    strategies: parse_strategies(&list)?,
                    ridge: a.ridge.or(file.get("backtest.ridge")?).unwrap_or(1e-6),
                }
            }
        };
        Ok(Self {
            seed,
            workers,
            output: cli.output.clone(),
            table: cli.table.clone(),
            fit,
            command,
        })
    }
}
