//! Synthetic end-to-end corpus: intraday bars with controlled realized
//! variance, headlines with a planted token that leaks the next day's
//! direction, toy word vectors, and a matching run configuration.
//!
//! Construction: daily RV targets are drawn i.i.d., so direction labels are
//! fair coin flips; each day's bars realize the target exactly (alternating
//! equal-magnitude returns). The planted token appears on day t with
//! probability `p_plant_given_up` when the label of day t+1 is 1 and
//! `p_plant_given_down` otherwise, while headline counts stay independent of
//! the labels so the count channel carries no signal.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use newsvol_core::explain::PeriodSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::config::{
    CleaningConfig, EmbeddingsConfig, FeaturesConfig, PathsConfig, RunConfig, ShapConfig,
};
use crate::error::CliResult;

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub trading_days: usize,
    pub start: NaiveDate,
    pub dim: usize,
    pub planted_token: String,
    pub p_plant_given_up: f64,
    pub p_plant_given_down: f64,
    pub returns_per_day: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            trading_days: 600,
            start: NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
            dim: 10,
            planted_token: "surge".into(),
            p_plant_given_up: 0.9,
            p_plant_given_down: 0.1,
            returns_per_day: 36,
            seed: 20240601,
        }
    }
}

const FILLER_WORDS: &[&str] = &[
    "barrel", "refinery", "pipeline", "tanker", "cargo", "benchmark", "futures", "contract",
    "inventory", "stockpile", "output", "producer", "exporter", "importer", "shipment",
    "terminal", "drilling", "platform", "basin", "shale", "grade", "blend", "spread",
    "margin", "settlement", "session", "traders", "analysts", "ministry", "quota",
    "compliance", "meeting", "report", "survey", "estimate", "forecast", "guidance",
    "maintenance", "turnaround", "utilization", "throughput", "loading", "freight",
    "charter", "storage", "hub", "gauge", "barge", "diesel", "kerosene",
];

#[derive(Debug, Clone)]
pub struct Fixture {
    pub calendar: Vec<NaiveDate>,
    pub rv: Vec<f64>,
    /// Direction label per calendar index (index 0 has none).
    pub labels: Vec<u8>,
    pub planted: Vec<bool>,
    pub bars_csv: String,
    pub news_csv: String,
    pub vectors_txt: String,
    pub lexicon_tsv: String,
}

pub fn generate(spec: &FixtureSpec) -> Fixture {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let calendar = trading_calendar(spec.start, spec.trading_days);

    // i.i.d. log-uniform RV targets: direction labels are fair coins
    let rv: Vec<f64> = (0..spec.trading_days)
        .map(|_| (-10.0 + 3.0 * rng.gen::<f64>()).exp())
        .collect();
    let labels: Vec<u8> = std::iter::once(0)
        .chain(rv.windows(2).map(|p| u8::from(p[1] > p[0])))
        .collect();

    let bars_csv = render_bars(&calendar, &rv, spec.returns_per_day);

    // word vectors: positive components keep pooled means away from zero;
    // the planted token points far from the filler cloud so its article
    // dominates the day's attribution
    let mut vectors_txt = String::new();
    let planted_vec: Vec<f64> = (0..spec.dim)
        .map(|d| if d < spec.dim / 2 { 4.0 } else { 0.2 })
        .collect();
    push_vector_row(&mut vectors_txt, &spec.planted_token, &planted_vec);
    for word in FILLER_WORDS {
        let v: Vec<f64> = (0..spec.dim)
            .map(|_| 0.1 + 0.6 * rng.gen::<f64>())
            .collect();
        push_vector_row(&mut vectors_txt, word, &v);
    }

    // headlines: counts independent of labels; the planted token leaks the
    // next day's label
    let mut news_rows: Vec<(NaiveDate, String)> = Vec::new();
    let mut planted = vec![false; spec.trading_days];
    for (t, day) in calendar.iter().enumerate() {
        let plant_probability = match labels.get(t + 1) {
            Some(&1) => spec.p_plant_given_up,
            Some(_) => spec.p_plant_given_down,
            None => 0.5,
        };
        planted[t] = rng.gen::<f64>() < plant_probability;
        let n_headlines = rng.gen_range(3..=5);
        for h in 0..n_headlines {
            // the planted headline stays short so the token keeps a large
            // share of its article's attribution
            let n_words = if planted[t] && h == 0 {
                2
            } else {
                rng.gen_range(5..=7)
            };
            let mut words: Vec<String> = (0..n_words)
                .map(|_| FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())].to_string())
                .collect();
            if planted[t] && h == 0 {
                let pos = rng.gen_range(0..=words.len());
                words.insert(pos, spec.planted_token.clone());
            }
            news_rows.push((*day, capitalize(&words.join(" "))));
        }
    }
    // weekend chatter that merges into the following trading day
    for pair in calendar.windows(2) {
        let mut d = pair[0] + Days::new(1);
        while d < pair[1] {
            if rng.gen::<f64>() < 0.4 {
                let words: Vec<String> = (0..rng.gen_range(5..=7))
                    .map(|_| FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())].to_string())
                    .collect();
                news_rows.push((d, capitalize(&words.join(" "))));
            }
            d = d + Days::new(1);
        }
    }
    news_rows.sort_by_key(|(d, _)| *d);
    let mut news_csv = String::from("date,headline\n");
    for (date, text) in &news_rows {
        news_csv.push_str(&format!("{date},\"{text}\"\n"));
    }

    let lexicon_tsv = "\
# toy fixture lexicon
surge\t0.8
rally\t0.7
plunge\t-0.8
slump\t-0.7
steady\t0.2
"
    .to_string();

    Fixture {
        calendar,
        rv,
        labels,
        planted,
        bars_csv,
        news_csv,
        vectors_txt,
        lexicon_tsv,
    }
}

fn trading_calendar(start: NaiveDate, days: usize) -> Vec<NaiveDate> {
    let mut calendar = Vec::with_capacity(days);
    let mut d = start;
    while calendar.len() < days {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            calendar.push(d);
        }
        d = d + Days::new(1);
    }
    calendar
}

/// Bars realizing each day's RV target exactly: `k` returns of magnitude
/// sqrt(rv/k) with alternating signs on the 5-minute grid from 09:00.
fn render_bars(calendar: &[NaiveDate], rv: &[f64], returns_per_day: usize) -> String {
    let mut out = String::from("timestamp,price\n");
    for (day, &target) in calendar.iter().zip(rv) {
        let magnitude = (target / returns_per_day as f64).sqrt();
        let mut price = 60.0f64;
        let mut t = day.and_hms_opt(9, 0, 0).unwrap();
        out.push_str(&format!("{},{}\n", t.format("%Y-%m-%dT%H:%M"), price));
        for i in 0..returns_per_day {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            price *= (sign * magnitude).exp();
            t += chrono::Duration::minutes(5);
            out.push_str(&format!("{},{}\n", t.format("%Y-%m-%dT%H:%M"), price));
        }
    }
    out
}

fn push_vector_row(out: &mut String, word: &str, vector: &[f64]) {
    out.push_str(word);
    for v in vector {
        out.push_str(&format!(" {v}"));
    }
    out.push('\n');
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Quarters the rolling-evaluation span of the fixture calendar into four
/// named periods so per-period reports all receive explained days.
pub fn eval_quarters(
    calendar: &[NaiveDate],
    p: usize,
    train_fraction: f64,
) -> Vec<PeriodSpec> {
    let n = calendar.len();
    let dataset_rows = n - p - 1; // lagged rows minus the unlabeled last day
    let window = (train_fraction * dataset_rows as f64).floor() as usize;
    let eval_dates = &calendar[p + window..n - 1];
    let quarter = eval_dates.len().div_ceil(4);
    eval_dates
        .chunks(quarter)
        .enumerate()
        .map(|(i, chunk)| PeriodSpec {
            name: format!("q{}", i + 1),
            start: chunk[0],
            end: *chunk.last().unwrap(),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub config: PathBuf,
    pub bars: PathBuf,
    pub news: PathBuf,
    pub vectors: PathBuf,
    pub lexicon: PathBuf,
    pub output_dir: PathBuf,
}

/// Writes the fixture corpus and a ready-to-run `config.toml` into `dir`.
pub fn write_fixture(spec: &FixtureSpec, dir: &Path) -> CliResult<(Fixture, FixturePaths)> {
    fs::create_dir_all(dir)?;
    let fixture = generate(spec);
    let paths = FixturePaths {
        config: dir.join("config.toml"),
        bars: dir.join("bars.csv"),
        news: dir.join("news.csv"),
        vectors: dir.join("vectors.txt"),
        lexicon: dir.join("lexicon.tsv"),
        output_dir: dir.join("out"),
    };
    fs::write(&paths.bars, &fixture.bars_csv)?;
    fs::write(&paths.news, &fixture.news_csv)?;
    fs::write(&paths.vectors, &fixture.vectors_txt)?;
    fs::write(&paths.lexicon, &fixture.lexicon_tsv)?;

    let config = fixture_config(spec, &fixture, &paths);
    let text = toml::to_string_pretty(&config)
        .map_err(|e| crate::error::CliError::Data(format!("render config: {e}")))?;
    fs::write(&paths.config, text)?;
    Ok((fixture, paths))
}

/// The RunConfig matching a generated fixture (usable directly, without
/// reparsing the written TOML).
pub fn fixture_config(spec: &FixtureSpec, fixture: &Fixture, paths: &FixturePaths) -> RunConfig {
    let features = FeaturesConfig::default();
    let rolling = newsvol_core::eval::RollingConfig::default();
    RunConfig {
        seed: spec.seed,
        paths: PathsConfig {
            bars: paths.bars.clone(),
            news: paths.news.clone(),
            vectors: Some(paths.vectors.clone()),
            lexicon: Some(paths.lexicon.clone()),
            cache: None,
            output_dir: paths.output_dir.clone(),
        },
        cleaning: CleaningConfig::default(),
        periods: eval_quarters(&fixture.calendar, features.p, rolling.train_fraction),
        features,
        ensemble: newsvol_core::classify::EnsembleSpec::default(),
        rolling,
        shap: ShapConfig::default(),
        embeddings: EmbeddingsConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_deterministic() {
        let spec = FixtureSpec {
            trading_days: 40,
            ..FixtureSpec::default()
        };
        let a = generate(&spec);
        let b = generate(&spec);
        assert_eq!(a.bars_csv, b.bars_csv);
        assert_eq!(a.news_csv, b.news_csv);
        assert_eq!(a.vectors_txt, b.vectors_txt);
    }

    #[test]
    fn labels_match_rv_comparisons() {
        let spec = FixtureSpec {
            trading_days: 50,
            ..FixtureSpec::default()
        };
        let f = generate(&spec);
        for t in 1..f.rv.len() {
            assert_eq!(f.labels[t], u8::from(f.rv[t] > f.rv[t - 1]));
        }
    }

    #[test]
    fn planting_tracks_next_day_label() {
        let spec = FixtureSpec::default();
        let f = generate(&spec);
        let mut up_planted = 0usize;
        let mut up_total = 0usize;
        let mut down_planted = 0usize;
        let mut down_total = 0usize;
        for t in 0..f.calendar.len() - 1 {
            if f.labels[t + 1] == 1 {
                up_total += 1;
                up_planted += usize::from(f.planted[t]);
            } else {
                down_total += 1;
                down_planted += usize::from(f.planted[t]);
            }
        }
        let up_rate = up_planted as f64 / up_total as f64;
        let down_rate = down_planted as f64 / down_total as f64;
        assert!((up_rate - 0.9).abs() < 0.06, "up rate {up_rate}");
        assert!((down_rate - 0.1).abs() < 0.06, "down rate {down_rate}");
    }

    #[test]
    fn quarters_partition_eval_span() {
        let calendar = trading_calendar(NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), 600);
        let quarters = eval_quarters(&calendar, 5, 0.8);
        assert_eq!(quarters.len(), 4);
        // 594 dataset rows, window 475: eval dates are calendar[480..599)
        assert_eq!(quarters[0].start, calendar[480]);
        assert_eq!(quarters[3].end, calendar[598]);
        for pair in quarters.windows(2) {
            assert!(pair[0].end < pair[1].start);
        }
    }
}
