//! KernelSHAP attribution over daily feature vectors, redistribution of
//! feature attributions to articles and words, and period-segmented
//! top-word reporting.
//!
//! Attributions are Shapley values of the coalition game whose value
//! function masks absent features to the background mean. Dimensions up to
//! [`EXACT_DIM_LIMIT`] are solved by full coalition enumeration; above that,
//! coalitions are sampled from the Shapley kernel and solved by weighted
//! least squares under the efficiency constraint.

use std::collections::{BTreeMap, HashSet};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::DailyEmbedding;
use crate::error::{Error, Result};
use crate::news::CleanHeadline;

/// Largest dimension solved by full coalition enumeration.
pub const EXACT_DIM_LIMIT: usize = 12;

/// Per-feature Shapley values for one prediction. Efficiency holds by
/// construction: `base_value + values.sum() == model_output` (1e-9 in exact
/// mode, 1e-3 in sampled mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    /// Model output with every feature masked to the background reference.
    pub base_value: f64,
    pub values: Vec<f64>,
    pub model_output: f64,
    pub exact: bool,
}

/// Shapley kernel weight for a proper coalition of size `s` out of `m`.
fn kernel_weight(s: usize, m: usize) -> f64 {
    let choose = |n: usize, k: usize| -> f64 {
        let k = k.min(n - k);
        let mut acc = 1.0;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    };
    (m - 1) as f64 / (choose(m, s) * (s * (m - s)) as f64)
}

/// Gaussian elimination with partial pivoting; `None` on a singular system.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Solves the kernel regression under the constraint `sum(phi) = excess` by
/// eliminating the last feature. `masks` holds one 0/1 row per coalition.
fn constrained_wls(
    m: usize,
    masks: &[Vec<f64>],
    outputs: &[f64],
    weights: &[f64],
    base: f64,
    excess: f64,
) -> Result<Vec<f64>> {
    if m == 1 {
        // no proper coalitions exist; efficiency pins the single value
        return Ok(vec![excess]);
    }
    let reduced = m - 1;
    // design: a_i = z_i - z_last; target: v - base - z_last * excess
    let mut normal = vec![vec![0.0; reduced]; reduced];
    let mut rhs = vec![0.0; reduced];
    for ((mask, &v), &w) in masks.iter().zip(outputs).zip(weights) {
        let z_last = mask[m - 1];
        let target = v - base - z_last * excess;
        for i in 0..reduced {
            let ai = mask[i] - z_last;
            if ai == 0.0 {
                continue;
            }
            rhs[i] += w * ai * target;
            for j in 0..reduced {
                let aj = mask[j] - z_last;
                if aj != 0.0 {
                    normal[i][j] += w * ai * aj;
                }
            }
        }
    }
    let mut phi = solve_linear(normal, rhs)
        .ok_or_else(|| Error::Config("singular kernel regression; increase n_samples".into()))?;
    let allocated: f64 = phi.iter().sum();
    phi.push(excess - allocated);
    Ok(phi)
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows[0].len();
    let mut means = vec![0.0; dim];
    for row in rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= rows.len() as f64;
    }
    means
}

/// KernelSHAP for a scalar prediction function (probability of class 1).
///
/// `background` supplies the masking reference (its column means). Exact
/// mode enumerates all coalitions when `x.len() <= EXACT_DIM_LIMIT`;
/// otherwise `n_samples` coalitions (at least twice the dimension) are drawn
/// from the Shapley-kernel size distribution with `seed`.
pub fn kernel_shap<F: Fn(&[f64]) -> f64>(
    model: F,
    x: &[f64],
    background: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<ShapExplanation> {
    if background.is_empty() {
        return Err(Error::Contract("background set must be non-empty".into()));
    }
    let m = x.len();
    if m == 0 {
        return Err(Error::Contract("cannot explain a zero-dimensional input".into()));
    }
    if background.iter().any(|row| row.len() != m) {
        return Err(Error::Contract(
            "background rows must match the explained dimension".into(),
        ));
    }
    let reference = column_means(background);
    let base = model(&reference);
    let fx = model(x);
    let excess = fx - base;

    let eval_mask = |mask: &[f64]| -> f64 {
        let z: Vec<f64> = mask
            .iter()
            .zip(x)
            .zip(&reference)
            .map(|((&on, &xi), &ri)| if on == 1.0 { xi } else { ri })
            .collect();
        model(&z)
    };

    let exact = m <= EXACT_DIM_LIMIT;
    let (masks, outputs, weights) = if exact {
        let total = 1usize << m;
        let mut masks = Vec::with_capacity(total - 2);
        let mut outputs = Vec::with_capacity(total - 2);
        let mut weights = Vec::with_capacity(total - 2);
        for bits in 1..total - 1 {
            let mask: Vec<f64> = (0..m)
                .map(|i| f64::from((bits >> i) & 1 == 1))
                .collect();
            let size = bits.count_ones() as usize;
            outputs.push(eval_mask(&mask));
            weights.push(kernel_weight(size, m));
            masks.push(mask);
        }
        (masks, outputs, weights)
    } else {
        if n_samples < 2 * m {
            return Err(Error::Config(format!(
                "sampled mode needs n_samples >= {}, got {n_samples}",
                2 * m
            )));
        }
        // size distribution proportional to the kernel mass per size
        let size_mass: Vec<f64> = (1..m)
            .map(|s| 1.0 / (s * (m - s)) as f64)
            .collect();
        let mass_total: f64 = size_mass.iter().sum();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut indices: Vec<usize> = (0..m).collect();
        let mut masks = Vec::with_capacity(n_samples);
        let mut outputs = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let mut draw = rng.gen_range(0.0..mass_total);
            let mut size = 1;
            for (s, mass) in size_mass.iter().enumerate() {
                if draw < *mass {
                    size = s + 1;
                    break;
                }
                draw -= mass;
            }
            // partial Fisher-Yates for a uniform subset of the chosen size
            for i in 0..size {
                let j = rng.gen_range(i..m);
                indices.swap(i, j);
            }
            let mut mask = vec![0.0; m];
            for &idx in &indices[..size] {
                mask[idx] = 1.0;
            }
            outputs.push(eval_mask(&mask));
            masks.push(mask);
        }
        // sampling already followed the kernel, so coalitions weigh equally
        let weights = vec![1.0; n_samples];
        (masks, outputs, weights)
    };

    let values = constrained_wls(m, &masks, &outputs, &weights, base, excess)?;
    Ok(ShapExplanation {
        base_value: base,
        values,
        model_output: fx,
        exact,
    })
}

/// Splits a day's feature attributions across its articles in proportion to
/// each article's per-dimension share of the pooled mean; dimensions where
/// the pooled value is exactly zero are split uniformly. The impacts sum to
/// the day's total attribution.
pub fn article_attribution(
    explanation: &ShapExplanation,
    day: &DailyEmbedding,
) -> Result<Vec<f64>> {
    let n = day.article_vectors.len();
    if n == 0 {
        return Err(Error::Contract("day has no article vectors".into()));
    }
    if explanation.values.len() != day.vector.len() {
        return Err(Error::Contract(format!(
            "explanation has {} values but the day vector has {} dimensions",
            explanation.values.len(),
            day.vector.len()
        )));
    }
    let n_f = n as f64;
    let mut impacts = vec![0.0; n];
    for (d, &value) in explanation.values.iter().enumerate() {
        let pooled = day.vector[d];
        if pooled == 0.0 {
            for impact in &mut impacts {
                *impact += value / n_f;
            }
        } else {
            for (impact, article) in impacts.iter_mut().zip(&day.article_vectors) {
                *impact += value * article[d] / (n_f * pooled);
            }
        }
    }
    Ok(impacts)
}

/// One word's share of an article's absolute impact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordShare {
    pub word: String,
    pub share: f64,
}

/// All word shares attributed on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayWordShares {
    pub date: NaiveDate,
    pub shares: Vec<WordShare>,
}

/// Meaningful tokens: non-stopword tokens of length >= 2.
fn meaningful<'a>(tokens: &'a [String], stopwords: &HashSet<String>) -> Vec<&'a String> {
    tokens
        .iter()
        .filter(|t| t.chars().count() >= 2 && !stopwords.contains(t.as_str()))
        .collect()
}

/// Divides each article's absolute impact equally among its meaningful
/// tokens. Articles with no meaningful token contribute nothing.
/// `headlines[i]` must be the article behind `article_impacts[i]`.
pub fn word_attribution(
    article_impacts: &[f64],
    headlines: &[&CleanHeadline],
    stopwords: &HashSet<String>,
) -> Result<Vec<WordShare>> {
    if article_impacts.len() != headlines.len() {
        return Err(Error::Contract(format!(
            "{} impacts but {} headlines",
            article_impacts.len(),
            headlines.len()
        )));
    }
    let mut shares = Vec::new();
    for (&impact, headline) in article_impacts.iter().zip(headlines) {
        let words = meaningful(&headline.tokens, stopwords);
        if words.is_empty() {
            continue;
        }
        let share = impact.abs() / words.len() as f64;
        for word in words {
            shares.push(WordShare {
                word: word.clone(),
                share,
            });
        }
    }
    Ok(shares)
}

/// A named, inclusive date range for regime segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl PeriodSpec {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

fn validate_periods(periods: &[PeriodSpec]) -> Result<()> {
    if periods.is_empty() {
        return Err(Error::Config("at least one period is required".into()));
    }
    for p in periods {
        if p.start > p.end {
            return Err(Error::Config(format!(
                "period {:?} starts after it ends",
                p.name
            )));
        }
    }
    for pair in periods.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(Error::Config(format!(
                "periods {:?} and {:?} overlap or are out of order",
                pair[0].name, pair[1].name
            )));
        }
    }
    Ok(())
}

/// Per-word aggregate over a period: mean received share and the number of
/// shares received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordImpact {
    pub word: String,
    pub mean_abs_impact: f64,
    pub occurrence_count: usize,
}

/// Ranked words for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRanking {
    pub period: PeriodSpec,
    pub words: Vec<WordImpact>,
}

/// The full per-period report plus the count of days falling outside every
/// period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub periods: Vec<PeriodRanking>,
    pub unassigned_days: usize,
}

/// Ranks words per period by mean absolute impact (descending), breaking
/// ties by occurrence count (descending) and then lexicographically.
pub fn period_report(
    daily: &[DayWordShares],
    periods: &[PeriodSpec],
    top_k: usize,
) -> Result<PeriodReport> {
    validate_periods(periods)?;
    let mut accums: Vec<BTreeMap<&str, (f64, usize)>> = vec![BTreeMap::new(); periods.len()];
    let mut unassigned = 0usize;
    for day in daily {
        match periods.iter().position(|p| p.contains(day.date)) {
            Some(idx) => {
                for share in &day.shares {
                    let slot = accums[idx].entry(share.word.as_str()).or_insert((0.0, 0));
                    slot.0 += share.share;
                    slot.1 += 1;
                }
            }
            None => unassigned += 1,
        }
    }

    let rankings = periods
        .iter()
        .zip(accums)
        .map(|(period, accum)| {
            let mut words: Vec<WordImpact> = accum
                .into_iter()
                .map(|(word, (total, count))| WordImpact {
                    word: word.to_string(),
                    mean_abs_impact: total / count as f64,
                    occurrence_count: count,
                })
                .collect();
            words.sort_by(|a, b| {
                b.mean_abs_impact
                    .partial_cmp(&a.mean_abs_impact)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.occurrence_count.cmp(&a.occurrence_count))
                    .then(a.word.cmp(&b.word))
            });
            words.truncate(top_k);
            PeriodRanking {
                period: period.clone(),
                words,
            }
        })
        .collect();
    Ok(PeriodReport {
        periods: rankings,
        unassigned_days: unassigned,
    })
}

/// Uniformly samples `size` background rows without replacement (all rows
/// when the pool is smaller), deterministically from `seed`.
pub fn sample_background(rows: &[Vec<f64>], size: usize, seed: u64) -> Vec<Vec<f64>> {
    if rows.len() <= size {
        return rows.to_vec();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..rows.len()).collect();
    for i in 0..size {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    indices[..size].iter().map(|&i| rows[i].clone()).collect()
}

/// Derives a per-day RNG seed from the global seed so per-day work can run
/// in any order and still reproduce bit-identically.
pub fn day_seed(global_seed: u64, date: NaiveDate) -> u64 {
    // SplitMix64 over the date offset
    let mut z = global_seed
        ^ (date.num_days_from_ce() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Common English function words; config may extend this set.
pub fn builtin_stopwords() -> HashSet<String> {
    const WORDS: &[&str] = &[
        "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any",
        "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
        "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during",
        "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
        "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its",
        "just", "more", "most", "my", "no", "nor", "not", "now", "of", "off", "on", "once",
        "only", "or", "other", "our", "out", "over", "own", "per", "said", "same", "she",
        "should", "so", "some", "such", "than", "that", "the", "their", "them", "then",
        "there", "these", "they", "this", "those", "through", "to", "too", "under", "until",
        "up", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
        "whom", "why", "will", "with", "would", "you", "your",
    ];
    WORDS.iter().map(|w| w.to_string()).collect()
}
