//! Intraday price bars, log returns, daily realized variance, direction
//! labels, and the daily/weekly/monthly lagged-RV benchmark features.
//!
//! Realized variance for a day is the sum of squared intraday log returns
//! sampled on a fixed minute grid (5 minutes by default). Returns are
//! computed within a calendar day only; overnight gaps never enter the
//! estimator.

use std::io::Read;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One intraday observation: minute-resolution timestamp and close price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub timestamp: NaiveDateTime,
    pub price: f64,
}

/// Bars sorted by strictly increasing timestamp, prices all positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BarSeries {
    bars: Vec<Bar>,
}

impl BarSeries {
    /// Builds a series from unordered bars, enforcing the invariants.
    pub fn new(mut bars: Vec<Bar>) -> Result<Self> {
        for bar in &bars {
            if !(bar.price > 0.0) {
                return Err(Error::Validation(format!(
                    "non-positive price {} at {}",
                    bar.price, bar.timestamp
                )));
            }
        }
        bars.sort_by_key(|b| b.timestamp);
        for pair in bars.windows(2) {
            if pair[0].timestamp == pair[1].timestamp {
                return Err(Error::Validation(format!(
                    "duplicate timestamp {}",
                    pair[0].timestamp
                )));
            }
        }
        Ok(Self { bars })
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }
}

/// Intraday log returns for one calendar day on a fixed minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub day: NaiveDate,
    pub returns: Vec<f64>,
    pub interval_minutes: u32,
}

/// Per-day realized variance entries in ascending date order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RvEntry {
    pub day: NaiveDate,
    pub rv: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RvSeries {
    entries: Vec<RvEntry>,
}

impl RvSeries {
    pub fn new(entries: Vec<RvEntry>) -> Result<Self> {
        for pair in entries.windows(2) {
            if pair[0].day >= pair[1].day {
                return Err(Error::Validation(format!(
                    "days not strictly increasing: {} then {}",
                    pair[0].day, pair[1].day
                )));
            }
        }
        if let Some(e) = entries.iter().find(|e| e.rv < 0.0) {
            return Err(Error::Validation(format!(
                "negative realized variance {} on {}",
                e.rv, e.day
            )));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[RvEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The trading calendar implied by the series.
    pub fn days(&self) -> Vec<NaiveDate> {
        self.entries.iter().map(|e| e.day).collect()
    }

    /// Writes the `date,rv` CSV representation.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "date,rv")?;
        for e in &self.entries {
            writeln!(w, "{},{}", e.day, e.rv)?;
        }
        Ok(())
    }
}

/// Binary next-vs-previous-day direction labels: 1 iff RV rose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub day: NaiveDate,
    pub label: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSeries {
    pub entries: Vec<LabelEntry>,
}

/// Lagged realized-variance features for one day: previous day's RV and the
/// means over the prior week (5 rows) and month (22 rows) of the trading
/// calendar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarFeatureRow {
    pub day: NaiveDate,
    pub rv_daily: f64,
    pub rv_weekly: f64,
    pub rv_monthly: f64,
}

/// Output of [`log_returns`]: per-day return series plus the days skipped
/// for having fewer than two usable observations.
#[derive(Debug, Clone, Default)]
pub struct LogReturns {
    pub series: Vec<ReturnSeries>,
    pub skipped_days: Vec<NaiveDate>,
}

const TIMESTAMP_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let trimmed = raw.trim();
    // UTC is assumed; a trailing Z or explicit +00:00 offset is tolerated.
    let trimmed = trimmed.strip_suffix('Z').unwrap_or(trimmed);
    let trimmed = trimmed.strip_suffix("+00:00").unwrap_or(trimmed);
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(trimmed, fmt).ok())
}

/// Parses the `timestamp,price` CSV format into a validated [`BarSeries`].
///
/// Rows must be ISO-8601 minute-resolution timestamps with positive prices;
/// duplicate timestamps are rejected. An empty file yields an empty series.
pub fn parse_bars<R: Read>(reader: R) -> Result<BarSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let mut bars = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2; // 1-based, counting the header line
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let timestamp = parse_timestamp(&record[0]).ok_or_else(|| Error::Parse {
            line,
            message: format!("unparseable timestamp {:?}", &record[0]),
        })?;
        let price: f64 = record[1].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("unparseable price {:?}", &record[1]),
        })?;
        if !(price > 0.0) || !price.is_finite() {
            return Err(Error::Validation(format!(
                "line {line}: price must be positive, got {price}"
            )));
        }
        bars.push(Bar { timestamp, price });
    }
    BarSeries::new(bars)
}

/// Computes within-day log returns on a fixed `interval_minutes` grid.
///
/// Bars are snapped to grid points (multiples of the interval from midnight)
/// by taking the last observation at or before each grid point; returns are
/// then log ratios of consecutive grid prices. Days with fewer than two bars
/// or fewer than two covered grid points are skipped, not errors.
pub fn log_returns(bars: &BarSeries, interval_minutes: u32) -> Result<LogReturns> {
    if interval_minutes == 0 {
        return Err(Error::Config("interval_minutes must be positive".into()));
    }
    let step = i64::from(interval_minutes) * 60;
    let mut out = LogReturns::default();

    let mut day_start = 0usize;
    let all = bars.bars();
    while day_start < all.len() {
        let day = all[day_start].timestamp.date();
        let mut day_end = day_start;
        while day_end < all.len() && all[day_end].timestamp.date() == day {
            day_end += 1;
        }
        let day_bars = &all[day_start..day_end];
        day_start = day_end;

        if day_bars.len() < 2 {
            out.skipped_days.push(day);
            continue;
        }

        let secs = |b: &Bar| i64::from(b.timestamp.time().num_seconds_from_midnight());
        let first_grid = (secs(&day_bars[0]) + step - 1) / step * step;
        let last_grid = secs(day_bars.last().unwrap()) / step * step;
        if last_grid < first_grid + step {
            out.skipped_days.push(day);
            continue;
        }

        let mut prices = Vec::with_capacity(((last_grid - first_grid) / step + 1) as usize);
        let mut cursor = 0usize;
        let mut grid = first_grid;
        while grid <= last_grid {
            while cursor + 1 < day_bars.len() && secs(&day_bars[cursor + 1]) <= grid {
                cursor += 1;
            }
            prices.push(day_bars[cursor].price);
            grid += step;
        }

        let returns: Vec<f64> = prices.windows(2).map(|p| (p[1] / p[0]).ln()).collect();
        out.series.push(ReturnSeries {
            day,
            returns,
            interval_minutes,
        });
    }
    Ok(out)
}

/// Realized variance per day: the sum of squared intraday returns.
pub fn realized_variance(series: &[ReturnSeries]) -> RvSeries {
    let entries = series
        .iter()
        .filter(|s| !s.returns.is_empty())
        .map(|s| RvEntry {
            day: s.day,
            rv: s.returns.iter().map(|r| r * r).sum(),
        })
        .collect();
    // log_returns emits days in ascending order, so the invariant holds.
    RvSeries { entries }
}

/// Direction labels: 1 iff RV rose versus the previous trading day; ties
/// count as a decrease. The first day has no label.
pub fn direction_labels(rv: &RvSeries) -> Result<LabelSeries> {
    if rv.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "direction labels need at least 2 RV entries, got {}",
            rv.len()
        )));
    }
    let entries = rv
        .entries()
        .windows(2)
        .map(|pair| LabelEntry {
            day: pair[1].day,
            label: u8::from(pair[1].rv > pair[0].rv),
        })
        .collect();
    Ok(LabelSeries { entries })
}

/// Lagged-RV rows for every day with at least 22 prior trading days.
///
/// For the day at calendar index `t`: `rv_daily` is the previous day's RV,
/// `rv_weekly` the mean over the 5 prior days, `rv_monthly` the mean over
/// the 22 prior days. Early days simply produce no row.
pub fn har_features(rv: &RvSeries) -> Vec<HarFeatureRow> {
    let entries = rv.entries();
    let mut rows = Vec::new();
    for t in 22..entries.len() {
        let mean = |lags: usize| -> f64 {
            entries[t - lags..t].iter().map(|e| e.rv).sum::<f64>() / lags as f64
        };
        rows.push(HarFeatureRow {
            day: entries[t].day,
            rv_daily: entries[t - 1].rv,
            rv_weekly: mean(5),
            rv_monthly: mean(22),
        });
    }
    rows
}
