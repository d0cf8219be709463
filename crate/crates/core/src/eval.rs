//! Rolling-window out-of-sample evaluation, classification metrics in the
//! support-weighted form, and the McNemar paired significance test.

use std::io::{BufRead, BufReader, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::classify::{fit_ensemble, EnsembleSpec};
use crate::error::{Error, Result};
use crate::features::Dataset;

/// Whether the training window keeps a fixed length or grows from the start
/// of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    #[default]
    Sliding,
    Expanding,
}

/// Rolling evaluation protocol: train on the trailing `train_fraction` of
/// rows, predict the single next day, advance by `step`, refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingConfig {
    pub train_fraction: f64,
    pub step: usize,
    pub window_mode: WindowMode,
    /// Smallest admissible training window; production runs keep the
    /// default of 30 rows.
    pub min_window: usize,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            step: 1,
            window_mode: WindowMode::Sliding,
            min_window: 30,
        }
    }
}

/// One out-of-sample prediction: the evaluated (label) day, predicted and
/// actual directions, and the aggregated class-1 probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub date: NaiveDate,
    pub predicted: u8,
    pub actual: u8,
    pub proba1: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionLog {
    pub entries: Vec<PredictionEntry>,
}

impl PredictionLog {
    pub fn accuracy(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let correct = self
            .entries
            .iter()
            .filter(|e| e.predicted == e.actual)
            .count();
        correct as f64 / self.entries.len() as f64
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.entries.iter().map(|e| e.date).collect()
    }

    /// Writes `date,predicted,actual,proba1` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "date,predicted,actual,proba1")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{}", e.date, e.predicted, e.actual, e.proba1)?;
        }
        Ok(())
    }

    /// Reads the CSV form, skipping leading `#` comment lines.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        let mut saw_header = false;
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if !saw_header {
                if trimmed != "date,predicted,actual,proba1" {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: "expected prediction log header".into(),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse_err = |what: &str| Error::Parse {
                line: idx + 1,
                message: format!("unparseable {what}"),
            };
            entries.push(PredictionEntry {
                date: fields[0].parse().map_err(|_| parse_err("date"))?,
                predicted: fields[1].parse().map_err(|_| parse_err("predicted"))?,
                actual: fields[2].parse().map_err(|_| parse_err("actual"))?,
                proba1: fields[3].parse().map_err(|_| parse_err("proba1"))?,
            });
        }
        if !saw_header {
            return Err(Error::Format("prediction log has no header".into()));
        }
        Ok(Self { entries })
    }
}

/// Runs the rolling protocol over an aligned dataset: every evaluation day
/// gets a standardizer and ensemble refit on the window ending the previous
/// row, so no evaluation-day information reaches training.
pub fn rolling_eval(
    dataset: &Dataset,
    spec: &EnsembleSpec,
    config: &RollingConfig,
) -> Result<PredictionLog> {
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {}",
            config.train_fraction
        )));
    }
    if config.step == 0 {
        return Err(Error::Config("step must be positive".into()));
    }
    let n = dataset.len();
    let window = (config.train_fraction * n as f64).floor() as usize;
    if window < config.min_window.max(2) {
        return Err(Error::InsufficientData(format!(
            "training window of {window} rows is below the minimum of {}",
            config.min_window.max(2)
        )));
    }
    if n < window + 1 {
        return Err(Error::InsufficientData(format!(
            "dataset of {n} rows cannot host a {window}-row window plus one evaluation day"
        )));
    }

    let mut entries = Vec::new();
    let mut i = window;
    while i < n {
        let start = match config.window_mode {
            WindowMode::Sliding => i - window,
            WindowMode::Expanding => 0,
        };
        let x_train = &dataset.x[start..i];
        let y_train = &dataset.y[start..i];
        let model = fit_ensemble(x_train, y_train, spec)?;
        let (predicted, proba) = model.predict(&dataset.x[i])?;
        entries.push(PredictionEntry {
            date: dataset.label_dates[i],
            predicted: predicted as u8,
            actual: dataset.y[i],
            proba1: proba[1],
        });
        i += config.step;
    }
    Ok(PredictionLog { entries })
}

/// Accuracy plus support-weighted precision/recall/F1, the averaging used by
/// the reference result tables (their recall always equals accuracy, which
/// is the weighted-averaging identity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: [usize; 2],
    pub averaging: String,
}

pub fn classification_metrics(log: &PredictionLog) -> Result<MetricsReport> {
    if log.entries.is_empty() {
        return Err(Error::InsufficientData("empty prediction log".into()));
    }
    let mut confusion = [[0usize; 2]; 2]; // [actual][predicted]
    for e in &log.entries {
        confusion[e.actual as usize][e.predicted as usize] += 1;
    }
    let total = log.entries.len() as f64;
    let correct = (confusion[0][0] + confusion[1][1]) as f64;

    let mut weighted_precision = 0.0;
    let mut weighted_recall = 0.0;
    let mut weighted_f1 = 0.0;
    let mut support = [0usize; 2];
    for c in 0..2 {
        let tp = confusion[c][c] as f64;
        support[c] = confusion[c][0] + confusion[c][1];
        let predicted_c = (confusion[0][c] + confusion[1][c]) as f64;
        let precision = if predicted_c > 0.0 { tp / predicted_c } else { 0.0 };
        let recall = if support[c] > 0 {
            tp / support[c] as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let weight = support[c] as f64 / total;
        weighted_precision += weight * precision;
        weighted_recall += weight * recall;
        weighted_f1 += weight * f1;
    }

    Ok(MetricsReport {
        accuracy: correct / total,
        precision: weighted_precision,
        recall: weighted_recall,
        f1: weighted_f1,
        support,
        averaging: "weighted".into(),
    })
}

/// Which p-value route the discordant-pair count selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMode {
    Exact,
    Chi2Cc,
}

/// Discordant-pair counts and the paired-test p-value. Both the exact
/// binomial and the continuity-corrected chi-square values are carried so
/// reports can show either variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// First log correct, second log wrong.
    pub b: usize,
    /// First log wrong, second log correct.
    pub c: usize,
    pub statistic: Option<f64>,
    pub p_value: f64,
    pub mode: McNemarMode,
    pub p_exact: Option<f64>,
    pub p_chi2_cc: Option<f64>,
    /// True when there were no discordant pairs at all.
    pub degenerate: bool,
}

/// Two-sided exact binomial tail: min(1, 2 * P[X <= min(b,c)]) for
/// X ~ Binomial(b + c, 1/2), evaluated in log space.
fn exact_binomial_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    let m = b.min(c);
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut tail = 0.0;
    let mut ln_choose = 0.0; // ln C(n, 0)
    for k in 0..=m {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        tail += (ln_choose + ln_half_n).exp();
    }
    (2.0 * tail).min(1.0)
}

/// Threshold on b + c below which the exact binomial p-value is reported.
pub const MCNEMAR_EXACT_LIMIT: usize = 25;

/// McNemar paired test over two prediction logs for the same dates.
///
/// Discordant pairs are counted, then the p-value comes from the exact
/// binomial when `b + c < 25` and otherwise from the continuity-corrected
/// chi-square statistic `(|b - c| - 1)^2 / (b + c)` with one degree of
/// freedom.
pub fn mcnemar(log_a: &PredictionLog, log_b: &PredictionLog) -> Result<McNemarResult> {
    if log_a.dates() != log_b.dates() {
        return Err(Error::Contract(
            "prediction logs cover different date sets".into(),
        ));
    }
    let mut b = 0usize;
    let mut c = 0usize;
    for (ea, eb) in log_a.entries.iter().zip(&log_b.entries) {
        let a_correct = ea.predicted == ea.actual;
        let b_correct = eb.predicted == eb.actual;
        match (a_correct, b_correct) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    if b + c == 0 {
        return Ok(McNemarResult {
            b,
            c,
            statistic: None,
            p_value: 1.0,
            mode: McNemarMode::Exact,
            p_exact: Some(1.0),
            p_chi2_cc: None,
            degenerate: true,
        });
    }

    let p_exact = exact_binomial_p(b, c);
    let diff = (b as f64 - c as f64).abs();
    let statistic = (diff - 1.0).powi(2) / (b + c) as f64;
    let chi2 = ChiSquared::new(1.0).expect("1 degree of freedom is valid");
    let p_chi2_cc = chi2.sf(statistic);

    let (mode, p_value, reported_statistic) = if b + c < MCNEMAR_EXACT_LIMIT {
        (McNemarMode::Exact, p_exact, None)
    } else {
        (McNemarMode::Chi2Cc, p_chi2_cc, Some(statistic))
    };
    Ok(McNemarResult {
        b,
        c,
        statistic: reported_statistic,
        p_value,
        mode,
        p_exact: Some(p_exact),
        p_chi2_cc: Some(p_chi2_cc),
        degenerate: false,
    })
}
