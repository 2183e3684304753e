//! CSV loaders, JSON report helpers and the flat `key = value` config format.
//!
//! Panel files are long format with header `unit,time,y,x1,…,xk`. Market
//! data comes in three date-keyed files: a wide price table
//! (`date,<ticker>,…`, empty cell for a missing price), the volatility
//! index (`date,vix`) and the daily risk-free rate (`date,rfi`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::portfolio::MarketData;
use crate::types::{label_cmp, PanelData};
use crate::SCHEMA_VERSION;

fn parse_f64(s: &str, row: usize, col: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("column {col}: cannot parse {s:?} as a number"),
    })
}

fn sorted_labels(set: BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = set.into_iter().collect();
    v.sort_by(|a, b| label_cmp(a, b));
    v
}

/// Reads a long-format panel. Rows are numbered from 1, header excluded.
pub fn read_panel_csv<R: Read>(reader: R) -> Result<PanelData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "unit" || &header[1] != "time" || &header[2] != "y" {
        return Err(Error::Parse {
            row: 0,
            message: "header must start with unit,time,y".into(),
        });
    }
    let k = header.len() - 3;
    let x_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();

    let mut cells: HashMap<(String, String), (f64, Vec<f64>)> = HashMap::new();
    let mut units = BTreeSet::new();
    let mut times = BTreeSet::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let y = parse_f64(&rec[2], row, "y")?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::Parse {
                row,
                message: format!("y must be 0 or 1, found {}", &rec[2]),
            });
        }
        let x = (0..k)
            .map(|j| parse_f64(&rec[3 + j], row, &x_names[j]))
            .collect::<Result<Vec<_>>>()?;
        let key = (rec[0].to_string(), rec[1].to_string());
        units.insert(key.0.clone());
        times.insert(key.1.clone());
        if cells.insert(key.clone(), (y, x)).is_some() {
            return Err(Error::Parse {
                row,
                message: format!("duplicate observation for unit {:?}, time {:?}", key.0, key.1),
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidPanel("panel file has no observations".into()));
    }
    let units = sorted_labels(units);
    let times = sorted_labels(times);

    let mut missing = Vec::new();
    for u in &units {
        for t in &times {
            if !cells.contains_key(&(u.clone(), t.clone())) {
                missing.push(format!("({u}, {t})"));
            }
        }
    }
    if !missing.is_empty() {
        const SHOWN: usize = 20;
        let more = missing.len().saturating_sub(SHOWN);
        let mut msg = format!(
            "unbalanced panel, {} missing (unit, time) pairs: {}",
            missing.len(),
            missing[..missing.len().min(SHOWN)].join(", ")
        );
        if more > 0 {
            msg.push_str(&format!(" and {more} more"));
        }
        return Err(Error::InvalidPanel(msg));
    }

    let (n, t) = (units.len(), times.len());
    let mut y = Vec::with_capacity(n * t);
    let mut x = Vec::with_capacity(n * t * k);
    for u in &units {
        for s in &times {
            let (yv, xv) = &cells[&(u.clone(), s.clone())];
            y.push(*yv);
            x.extend_from_slice(xv);
        }
    }
    PanelData::with_ids(n, t, k, y, x, units, times)
}

pub fn load_panel_csv(path: impl AsRef<Path>) -> Result<PanelData> {
    read_panel_csv(File::open(path)?)
}

pub fn write_panel<W: Write>(data: &PanelData, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit".to_string(), "time".to_string(), "y".to_string()];
    header.extend((1..=data.d_beta()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        for t in 0..data.t() {
            let mut rec = vec![
                data.unit_ids()[i].clone(),
                data.time_ids()[t].clone(),
                data.y(i, t).to_string(),
            ];
            rec.extend(data.x(i, t).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_panel_csv(data: &PanelData, path: impl AsRef<Path>) -> Result<()> {
    write_panel(data, File::create(path)?)
}

/// `date → row` map of a two-column `date,<value>` file.
fn read_series<R: Read>(reader: R, what: &str) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "date" {
        return Err(Error::Parse {
            row: 0,
            message: format!("{what} file header must be date,<value>"),
        });
    }
    let mut out = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v = parse_f64(&rec[1], idx + 1, &header[1])?;
        if out.insert(rec[0].to_string(), v).is_some() {
            return Err(Error::Parse {
                row: idx + 1,
                message: format!("duplicate date {:?} in {what} file", &rec[0]),
            });
        }
    }
    Ok(out)
}

/// What the market loader discarded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarketLoadReport {
    pub price_dates: usize,
    pub vix_dates: usize,
    pub rfi_dates: usize,
    /// Dates present in all three files.
    pub joined_dates: usize,
    /// Stocks removed because a price was missing on a joined date.
    pub dropped_stocks: Vec<String>,
}

/// Joins the three files on their common dates, keeps stocks with a price
/// on every joined date, and converts prices to simple returns. The first
/// joined date only serves as the base price, so the result starts on the
/// second one.
pub fn read_market<P: Read, V: Read, F: Read>(prices: P, vix: V, rfi: F) -> Result<(MarketData, MarketLoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(prices);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "date" {
        return Err(Error::Parse {
            row: 0,
            message: "price file header must be date,<ticker>,…".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut price_rows: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let vals = (0..tickers.len())
            .map(|j| {
                let s = &rec[j + 1];
                if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
                    Ok(None)
                } else {
                    let p = parse_f64(s, row, &tickers[j])?;
                    Ok((p > 0.0 && p.is_finite()).then_some(p))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if price_rows.insert(rec[0].to_string(), vals).is_some() {
            return Err(Error::Parse {
                row,
                message: format!("duplicate date {:?} in price file", &rec[0]),
            });
        }
    }
    let vix = read_series(vix, "vix")?;
    let rfi = read_series(rfi, "rfi")?;

    let mut dates: Vec<String> = price_rows
        .keys()
        .filter(|d| vix.contains_key(*d) && rfi.contains_key(*d))
        .cloned()
        .collect();
    dates.sort_by(|a, b| label_cmp(a, b));
    if dates.is_empty() {
        return Err(Error::InvalidArgument("price, vix and rfi files share no dates".into()));
    }
    if dates.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two common dates to form returns".into(),
        ));
    }
    if let Some(d) = dates.iter().find(|d| !(vix[*d] > 0.0)) {
        return Err(Error::InvalidArgument(format!("vix on {d} is not positive")));
    }

    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..tickers.len()).partition(|&j| dates.iter().all(|d| price_rows[d][j].is_some()));
    if kept.is_empty() {
        return Err(Error::InvalidArgument("every stock has a missing price".into()));
    }
    let n_days = dates.len() - 1;
    let returns = DMatrix::from_fn(kept.len(), n_days, |a, t| {
        let j = kept[a];
        let p0 = price_rows[&dates[t]][j].expect("kept stock");
        let p1 = price_rows[&dates[t + 1]][j].expect("kept stock");
        p1 / p0 - 1.0
    });
    let out_dates: Vec<String> = dates[1..].to_vec();
    let report = MarketLoadReport {
        price_dates: price_rows.len(),
        vix_dates: vix.len(),
        rfi_dates: rfi.len(),
        joined_dates: dates.len(),
        dropped_stocks: dropped.iter().map(|&j| tickers[j].clone()).collect(),
    };
    let market = MarketData::new(
        out_dates.clone(),
        kept.iter().map(|&j| tickers[j].clone()).collect(),
        returns,
        out_dates.iter().map(|d| vix[d].ln()).collect(),
        out_dates.iter().map(|d| rfi[d]).collect(),
    )?;
    Ok((market, report))
}

pub fn load_market_csv(
    prices_path: impl AsRef<Path>,
    vix_path: impl AsRef<Path>,
    rfi_path: impl AsRef<Path>,
) -> Result<(MarketData, MarketLoadReport)> {
    read_market(File::open(prices_path)?, File::open(vix_path)?, File::open(rfi_path)?)
}

/// Serializes `value` (which must be a JSON object) with a leading
/// `schema_version` key. Keys come out sorted, so equal inputs give
/// byte-identical text.
pub fn to_json_report<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(map) => {
            map.insert("schema_version".into(), SCHEMA_VERSION.into());
        }
        None => return Err(Error::InvalidArgument("report must serialize to a JSON object".into())),
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Flat config: `key = value` lines, `#` comments, and `[section]` headers
/// that prefix later keys as `section.key`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let row = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                row,
                message: format!("unterminated section header {line:?}"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            row,
            message: format!("expected key = value, found {line:?}"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty key".into(),
            });
        }
        let key = if section.is_empty() {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse {
                row,
                message: format!("key {key:?} set twice"),
            });
        }
    }
    Ok(out)
}
