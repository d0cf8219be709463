//! Headline ingestion: regex cleaning, tokenization, per-day grouping, and
//! the news-count feature.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A headline as ingested: date plus raw text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeadline {
    pub date: NaiveDate,
    pub text: String,
}

/// A headline that survived cleaning: lowercase tokens plus the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanHeadline {
    pub date: NaiveDate,
    pub tokens: Vec<String>,
    pub original: String,
}

/// All surviving headlines of one calendar day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyNews {
    pub day: NaiveDate,
    pub headlines: Vec<CleanHeadline>,
}

impl DailyNews {
    pub fn count(&self) -> usize {
        self.headlines.len()
    }
}

/// Why a headline was dropped during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    UrlOnly,
    TooShort,
    Boilerplate,
}

/// Outcome of cleaning one headline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanOutcome {
    Clean(CleanHeadline),
    Dropped { date: NaiveDate, reason: DropReason },
}

/// Cleaning configuration: built-in URL/email/date patterns, a boilerplate
/// phrase list, optional extra removal patterns, and the minimum surviving
/// token count.
#[derive(Debug, Clone)]
pub struct CleaningRules {
    url: Regex,
    email: Regex,
    dates: Vec<Regex>,
    boilerplate: Vec<Regex>,
    extra: Vec<Regex>,
    pub min_tokens: usize,
}

impl Default for CleaningRules {
    fn default() -> Self {
        Self::new(Vec::new(), Vec::new(), 3).unwrap()
    }
}

impl CleaningRules {
    /// Builds rules from boilerplate phrases (matched case-insensitively) and
    /// extra removal regexes on top of the built-in URL/email/date patterns.
    pub fn new(
        boilerplate: Vec<String>,
        extra_patterns: Vec<String>,
        min_tokens: usize,
    ) -> Result<Self> {
        let compile = |p: &str| {
            Regex::new(p).map_err(|e| Error::Config(format!("bad cleaning pattern {p:?}: {e}")))
        };
        let extra = extra_patterns
            .iter()
            .map(|p| compile(p))
            .collect::<Result<Vec<_>>>()?;
        let boilerplate = boilerplate
            .iter()
            .map(|phrase| compile(&format!("(?i){}", regex::escape(phrase))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            url: compile(r"(?i)\b(?:[a-z][a-z0-9+.-]*://|www\.)\S+")?,
            email: compile(r"(?i)\b[a-z0-9._%+-]+@[a-z0-9.-]+\.[a-z]{2,}\b")?,
            dates: vec![
                // ISO dates
                compile(r"\b\d{4}-\d{2}-\d{2}\b")?,
                // `dd Month yyyy`
                compile(r"(?i)\b\d{1,2}\s+(?:january|february|march|april|may|june|july|august|september|october|november|december)\s+\d{4}\b")?,
                // `Month dd, yyyy`
                compile(r"(?i)\b(?:january|february|march|april|may|june|july|august|september|october|november|december)\s+\d{1,2},?\s+\d{4}\b")?,
            ],
            boilerplate,
            extra,
            min_tokens,
        })
    }
}

/// Lowercases, splits on whitespace, and strips non-alphanumeric edges from
/// each token ('+' is kept so tickers like "opec+" survive). Tokens without
/// any alphanumeric character are discarded.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let token = raw
                .trim_matches(|c: char| !(c.is_alphanumeric() || c == '+'))
                .to_lowercase();
            if token.chars().any(char::is_alphanumeric) {
                Some(token)
            } else {
                None
            }
        })
        .collect()
}

/// Removes URLs, email addresses, date strings, and boilerplate phrases, then
/// tokenizes. Headlines with fewer than `min_tokens` surviving tokens are
/// dropped with a reason code rather than erroring.
pub fn clean_headline(raw: &RawHeadline, rules: &CleaningRules) -> CleanOutcome {
    let mut text = raw.text.clone();
    let url_matched = rules.url.is_match(&text);
    text = rules.url.replace_all(&text, " ").into_owned();
    text = rules.email.replace_all(&text, " ").into_owned();
    for pattern in &rules.dates {
        text = pattern.replace_all(&text, " ").into_owned();
    }
    for pattern in &rules.extra {
        text = pattern.replace_all(&text, " ").into_owned();
    }
    let mut boilerplate_matched = false;
    for phrase in &rules.boilerplate {
        if phrase.is_match(&text) {
            boilerplate_matched = true;
            text = phrase.replace_all(&text, " ").into_owned();
        }
    }

    let tokens = tokenize(&text);
    if tokens.len() >= rules.min_tokens {
        return CleanOutcome::Clean(CleanHeadline {
            date: raw.date,
            tokens,
            original: raw.text.clone(),
        });
    }
    let reason = if tokens.is_empty() && url_matched {
        DropReason::UrlOnly
    } else if boilerplate_matched {
        DropReason::Boilerplate
    } else {
        DropReason::TooShort
    };
    CleanOutcome::Dropped {
        date: raw.date,
        reason,
    }
}

/// Groups surviving headlines by calendar day, dates ascending; within a day
/// the input order is preserved. Identical headlines are retained.
pub fn group_by_day(headlines: Vec<CleanHeadline>) -> Vec<DailyNews> {
    let mut by_day: BTreeMap<NaiveDate, Vec<CleanHeadline>> = BTreeMap::new();
    for h in headlines {
        by_day.entry(h.date).or_default().push(h);
    }
    by_day
        .into_iter()
        .map(|(day, headlines)| DailyNews { day, headlines })
        .collect()
}

/// The news-count feature: one real value per day.
pub fn news_count_feature(days: &[DailyNews]) -> Vec<(NaiveDate, f64)> {
    days.iter().map(|d| (d.day, d.count() as f64)).collect()
}

/// Merges news dated on non-trading days into the next trading day so
/// weekend headlines inform Monday's prediction. News after the last trading
/// day is discarded.
pub fn align_to_trading_days(days: Vec<DailyNews>, calendar: &[NaiveDate]) -> Vec<DailyNews> {
    let mut by_day: BTreeMap<NaiveDate, Vec<CleanHeadline>> = BTreeMap::new();
    for group in days {
        let target = match calendar.binary_search(&group.day) {
            Ok(_) => Some(group.day),
            Err(pos) => calendar.get(pos).copied(),
        };
        if let Some(day) = target {
            let slot = by_day.entry(day).or_default();
            for mut h in group.headlines {
                h.date = day;
                slot.push(h);
            }
        }
    }
    by_day
        .into_iter()
        .map(|(day, headlines)| DailyNews { day, headlines })
        .collect()
}

/// Parses the `date,headline` CSV format (RFC-4180 quoting). Headlines blank
/// after trimming are rejected.
pub fn parse_headlines<R: Read>(reader: R) -> Result<Vec<RawHeadline>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
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
        let date = record[0].trim().parse::<NaiveDate>().map_err(|_| Error::Parse {
            line,
            message: format!("unparseable date {:?}", &record[0]),
        })?;
        let text = record[1].to_string();
        if text.trim().is_empty() {
            return Err(Error::Validation(format!("line {line}: empty headline")));
        }
        out.push(RawHeadline { date, text });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn raw(text: &str) -> RawHeadline {
        RawHeadline {
            date: date(2020, 3, 9),
            text: text.to_string(),
        }
    }

    fn expect_clean(outcome: CleanOutcome) -> CleanHeadline {
        match outcome {
            CleanOutcome::Clean(h) => h,
            CleanOutcome::Dropped { reason, .. } => panic!("dropped: {reason:?}"),
        }
    }

    #[test]
    fn url_is_removed() {
        let rules = CleaningRules::default();
        let h = expect_clean(clean_headline(&raw("Oil up http://x.co amid OPEC talks"), &rules));
        assert_eq!(h.tokens, vec!["oil", "up", "amid", "opec", "talks"]);
    }

    #[test]
    fn short_headline_dropped() {
        let rules = CleaningRules::default();
        match clean_headline(&raw("Oil up"), &rules) {
            CleanOutcome::Dropped { reason, .. } => assert_eq!(reason, DropReason::TooShort),
            other => panic!("expected drop, got {other:?}"),
        }
    }

    #[test]
    fn email_is_removed() {
        let rules = CleaningRules::default();
        let h = expect_clean(clean_headline(
            &raw("Contact news@reuters.com for details on crude supply"),
            &rules,
        ));
        assert_eq!(
            h.tokens,
            vec!["contact", "for", "details", "on", "crude", "supply"]
        );
    }

    #[test]
    fn url_only_headline_gets_reason_code() {
        let rules = CleaningRules::default();
        match clean_headline(&raw("https://example.com/x www.example.org"), &rules) {
            CleanOutcome::Dropped { reason, .. } => assert_eq!(reason, DropReason::UrlOnly),
            other => panic!("expected drop, got {other:?}"),
        }
    }

    #[test]
    fn boilerplate_phrase_removed_and_flagged() {
        let rules =
            CleaningRules::new(vec!["click here to subscribe".into()], vec![], 3).unwrap();
        match clean_headline(&raw("Click here to subscribe now"), &rules) {
            CleanOutcome::Dropped { reason, .. } => assert_eq!(reason, DropReason::Boilerplate),
            other => panic!("expected drop, got {other:?}"),
        }
        let h = expect_clean(clean_headline(
            &raw("Oil rallies on supply cuts. Click here to subscribe"),
            &rules,
        ));
        assert_eq!(h.tokens, vec!["oil", "rallies", "on", "supply", "cuts"]);
    }

    #[test]
    fn date_strings_removed() {
        let rules = CleaningRules::default();
        let h = expect_clean(clean_headline(
            &raw("Oil settles higher 2020-03-09 after March 9, 2020 rout on 9 March 2020"),
            &rules,
        ));
        assert_eq!(h.tokens, vec!["oil", "settles", "higher", "after", "rout", "on"]);
    }

    #[test]
    fn tokenize_matches_whitespace_word_style() {
        assert_eq!(
            tokenize("New Trump administration plan could boost oil drilling on remote Alaska reserve"),
            vec![
                "new", "trump", "administration", "plan", "could", "boost", "oil", "drilling",
                "on", "remote", "alaska", "reserve"
            ]
        );
    }

    #[test]
    fn tokenize_empty_and_punctuation() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("OPEC+ meeting!"), vec!["opec+", "meeting"]);
        assert!(tokenize("--- ... !!").is_empty());
    }

    #[test]
    fn grouping_counts_per_day() {
        let mk = |d: NaiveDate, text: &str| CleanHeadline {
            date: d,
            tokens: tokenize(text),
            original: text.to_string(),
        };
        let groups = group_by_day(vec![
            mk(date(2020, 3, 9), "oil falls on demand fears"),
            mk(date(2020, 3, 10), "opec weighs output cut"),
            mk(date(2020, 3, 9), "crude slides again today"),
            mk(date(2020, 3, 9), "producers meet in vienna"),
        ]);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].day, date(2020, 3, 9));
        assert_eq!(groups[0].count(), 3);
        assert_eq!(groups[1].count(), 1);
    }

    #[test]
    fn grouping_empty_input() {
        assert!(group_by_day(vec![]).is_empty());
    }

    #[test]
    fn duplicates_are_retained() {
        let h = CleanHeadline {
            date: date(2020, 3, 9),
            tokens: tokenize("oil up on opec news"),
            original: "oil up on opec news".into(),
        };
        let groups = group_by_day(vec![h.clone(), h]);
        assert_eq!(groups[0].count(), 2);
    }

    #[test]
    fn count_feature_values() {
        let day = |d, n: usize| DailyNews {
            day: d,
            headlines: vec![
                CleanHeadline {
                    date: d,
                    tokens: vec!["oil".into()],
                    original: "oil".into()
                };
                n
            ],
        };
        let series = news_count_feature(&[
            day(date(2020, 3, 9), 5),
            day(date(2020, 3, 10), 12),
            day(date(2020, 3, 11), 7),
        ]);
        let counts: Vec<f64> = series.iter().map(|(_, c)| *c).collect();
        assert_eq!(counts, vec![5.0, 12.0, 7.0]);
        assert_eq!(news_count_feature(&[day(date(2020, 3, 12), 0)])[0].1, 0.0);
    }

    #[test]
    fn weekend_news_merges_into_next_trading_day() {
        let calendar = vec![date(2020, 3, 6), date(2020, 3, 9)]; // Fri, Mon
        let mk = |d: NaiveDate| DailyNews {
            day: d,
            headlines: vec![CleanHeadline {
                date: d,
                tokens: vec!["oil".into(), "news".into(), "item".into()],
                original: "x".into(),
            }],
        };
        let merged = align_to_trading_days(
            vec![mk(date(2020, 3, 7)), mk(date(2020, 3, 9))], // Sat + Mon
            &calendar,
        );
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].day, date(2020, 3, 9));
        assert_eq!(merged[0].count(), 2);
        assert!(merged[0].headlines.iter().all(|h| h.date == date(2020, 3, 9)));
    }

    #[test]
    fn parse_headlines_rfc4180() {
        let csv = "date,headline\n2020-03-09,\"Oil falls, stocks follow\"\n2020-03-10,OPEC meets\n";
        let rows = parse_headlines(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].text, "Oil falls, stocks follow");
    }

    proptest! {
        // Cleaning a survivor again yields the same tokens.
        #[test]
        fn cleaning_idempotence(words in proptest::collection::vec("[a-z]{1,8}", 3..12)) {
            let rules = CleaningRules::default();
            let first = clean_headline(&raw(&words.join(" ")), &rules);
            if let CleanOutcome::Clean(h) = first {
                let again = expect_clean(clean_headline(
                    &RawHeadline { date: h.date, text: h.tokens.join(" ") },
                    &rules,
                ));
                prop_assert_eq!(again.tokens, h.tokens);
            }
        }

        // group_by_day dates/counts are invariant under input permutation,
        // and counts conserve the number of surviving headlines.
        #[test]
        fn grouping_order_independence(
            assignments in proptest::collection::vec((0u8..5, "[a-z]{2,6}"), 1..40),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let headlines: Vec<CleanHeadline> = assignments
                .iter()
                .map(|(offset, word)| CleanHeadline {
                    date: date(2020, 3, 2) + chrono::Days::new(u64::from(*offset)),
                    tokens: vec![word.clone()],
                    original: word.clone(),
                })
                .collect();
            let baseline = group_by_day(headlines.clone());
            let mut shuffled = headlines.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let permuted = group_by_day(shuffled);

            let summary = |groups: &[DailyNews]| -> Vec<(NaiveDate, usize)> {
                groups.iter().map(|g| (g.day, g.count())).collect()
            };
            prop_assert_eq!(summary(&baseline), summary(&permuted));
            let total: usize = baseline.iter().map(DailyNews::count).sum();
            prop_assert_eq!(total, headlines.len());
        }
    }
}
