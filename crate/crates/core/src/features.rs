//! Aligned per-day feature matrices: lag stacking, standardization, and the
//! join of feature rows with next-day direction labels.

use std::io::{BufRead, BufReader, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::LabelSeries;

/// Which feature family a frame carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Count,
    Sentiment,
    Embedding,
    Har,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Count => "count",
            Channel::Sentiment => "sentiment",
            Channel::Embedding => "embedding",
            Channel::Har => "har",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "count" => Ok(Channel::Count),
            "sentiment" => Ok(Channel::Sentiment),
            "embedding" => Ok(Channel::Embedding),
            "har" => Ok(Channel::Har),
            other => Err(Error::Format(format!("unknown channel {other:?}"))),
        }
    }
}

/// Dense per-day feature matrix with named columns; no missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub channel: Channel,
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureFrame {
    pub fn new(
        channel: Channel,
        dates: Vec<NaiveDate>,
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if dates.len() != rows.len() {
            return Err(Error::Contract(format!(
                "{} dates but {} rows",
                dates.len(),
                rows.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::Contract(format!(
                "row width {} does not match {} columns",
                bad.len(),
                columns.len()
            )));
        }
        for pair in dates.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Contract(format!(
                    "dates not strictly increasing: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self {
            channel,
            dates,
            columns,
            rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Writes the CSV form: a `# channel:` line, a header, then one row per
    /// day. Extra leading `#` lines may be prepended by callers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# channel: {}", self.channel.name())?;
        writeln!(w, "date,{}", self.columns.join(","))?;
        for (date, row) in self.dates.iter().zip(&self.rows) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{date},{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Reads the CSV form written by [`FeatureFrame::write_csv`], skipping
    /// any other leading `#` lines.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut channel: Option<Channel> = None;
        let mut columns: Option<Vec<String>> = None;
        let mut dates = Vec::new();
        let mut rows = Vec::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some(name) = rest.trim().strip_prefix("channel:") {
                    channel = Some(Channel::from_name(name.trim())?);
                }
                continue;
            }
            let mut fields = trimmed.split(',');
            if columns.is_none() {
                let first = fields.next();
                if first != Some("date") {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: "expected header starting with 'date'".into(),
                    });
                }
                columns = Some(fields.map(str::to_string).collect());
                continue;
            }
            let date_field = fields.next().ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "missing date".into(),
            })?;
            let date: NaiveDate = date_field.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("unparseable date {date_field:?}"),
            })?;
            let row: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line: idx + 1,
                        message: format!("unparseable value {f:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            dates.push(date);
            rows.push(row);
        }
        let channel = channel.ok_or_else(|| Error::Format("missing '# channel:' line".into()))?;
        let columns = columns.ok_or_else(|| Error::Format("missing header line".into()))?;
        Self::new(channel, dates, columns, rows)
    }
}

/// A frame whose row for day t concatenates the base rows t, t-1, ..., t-p.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedFrame {
    pub channel: Channel,
    pub p: usize,
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Stacks `p` lags onto each row: lag-0 block first, then lag-1, and so on.
/// Column names gain a `_lag{k}` suffix.
pub fn build_lagged(frame: &FeatureFrame, p: usize) -> Result<LaggedFrame> {
    if frame.n_rows() <= p {
        return Err(Error::InsufficientData(format!(
            "lag order {} needs more than {} rows",
            p,
            frame.n_rows()
        )));
    }
    let mut columns = Vec::with_capacity(frame.columns.len() * (p + 1));
    for lag in 0..=p {
        for col in &frame.columns {
            columns.push(format!("{col}_lag{lag}"));
        }
    }
    let mut dates = Vec::with_capacity(frame.n_rows() - p);
    let mut rows = Vec::with_capacity(frame.n_rows() - p);
    for t in p..frame.n_rows() {
        let mut row = Vec::with_capacity(columns.len());
        for lag in 0..=p {
            row.extend_from_slice(&frame.rows[t - lag]);
        }
        dates.push(frame.dates[t]);
        rows.push(row);
    }
    Ok(LaggedFrame {
        channel: frame.channel,
        p,
        dates,
        columns,
        rows,
    })
}

/// Per-column means and population standard deviations fitted on training
/// rows only; zero-spread columns get std 1 so they standardize to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "standardizer needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let width = rows[0].len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; width];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; width];
        for row in rows {
            for ((s, v), m) in stds.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Ok(Self { means, stds })
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

/// Model-ready rows: features of day t paired with the direction label of
/// the next trading day. `x` is unstandardized here; the rolling evaluator
/// fits a standardizer per training window to avoid leakage.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channel: Channel,
    pub columns: Vec<String>,
    pub feature_dates: Vec<NaiveDate>,
    pub label_dates: Vec<NaiveDate>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Rows dropped on each side during alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignReport {
    pub dropped_feature_rows: usize,
    pub dropped_labels: usize,
}

/// Pairs each feature row with the label of the next trading day (the
/// earliest label dated strictly after the feature date). Feature days with
/// no following label, and labels no feature row points at, are dropped and
/// counted. An empty pairing is an alignment error.
pub fn align(features: &LaggedFrame, labels: &LabelSeries) -> Result<(Dataset, AlignReport)> {
    let label_days: Vec<NaiveDate> = labels.entries.iter().map(|e| e.day).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new(); // (feature row, label row)
    for (fi, fdate) in features.dates.iter().enumerate() {
        let li = label_days.partition_point(|d| d <= fdate);
        if li < label_days.len() {
            pairs.push((fi, li));
        }
    }
    // If multiple feature days map to the same label (possible only when a
    // calendar day's label is missing), keep the closest feature date.
    pairs.dedup_by(|later, earlier| {
        if earlier.1 == later.1 {
            *earlier = *later;
            true
        } else {
            false
        }
    });
    if pairs.is_empty() {
        return Err(Error::Alignment(
            "no feature day precedes any labeled day".into(),
        ));
    }
    let report = AlignReport {
        dropped_feature_rows: features.dates.len() - pairs.len(),
        dropped_labels: labels.entries.len() - pairs.len(),
    };
    let dataset = Dataset {
        channel: features.channel,
        columns: features.columns.clone(),
        feature_dates: pairs.iter().map(|&(fi, _)| features.dates[fi]).collect(),
        label_dates: pairs.iter().map(|&(_, li)| label_days[li]).collect(),
        x: pairs.iter().map(|&(fi, _)| features.rows[fi].clone()).collect(),
        y: pairs
            .iter()
            .map(|&(_, li)| labels.entries[li].label)
            .collect(),
    };
    Ok((dataset, report))
}
