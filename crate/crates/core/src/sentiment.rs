//! Lexicon-based sentiment scoring with single-token negation handling.
//!
//! A headline's score is the mean polarity of its lexicon-matched tokens; a
//! matched token's polarity is sign-flipped when the immediately preceding
//! token is a negator. A day's score is the mean over its headlines.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::news::DailyNews;

/// Token polarities in [-1, 1] plus the negator token set.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
    negators: HashSet<String>,
}

const DEFAULT_NEGATORS: &[&str] = &["not", "no", "never", "n't"];

impl Lexicon {
    pub fn new(entries: HashMap<String, f64>) -> Result<Self> {
        Self::with_negators(
            entries,
            DEFAULT_NEGATORS.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn with_negators(entries: HashMap<String, f64>, negators: HashSet<String>) -> Result<Self> {
        if negators.is_empty() {
            return Err(Error::Validation("negator set must be non-empty".into()));
        }
        for (token, polarity) in &entries {
            if !(-1.0..=1.0).contains(polarity) {
                return Err(Error::Validation(format!(
                    "polarity {polarity} for {token:?} outside [-1, 1]"
                )));
            }
        }
        Ok(Self { entries, negators })
    }

    /// Parses the `token<TAB>polarity` file format; `#` starts a comment.
    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut entries = HashMap::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (token, polarity) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "expected token<TAB>polarity".into(),
            })?;
            let polarity: f64 = polarity.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("unparseable polarity {polarity:?}"),
            })?;
            entries.insert(token.trim().to_lowercase(), polarity);
        }
        if entries.is_empty() {
            return Err(Error::Format("lexicon contains no entries".into()));
        }
        Self::new(entries)
    }

    /// The small financial lexicon bundled with the crate.
    pub fn builtin_financial() -> Self {
        Self::parse(include_bytes!("../data/financial_lexicon.tsv").as_slice())
            .expect("bundled lexicon is well-formed")
    }

    pub fn polarity(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-day sentiment scores, dates ascending, all in [-1, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentSeries {
    pub entries: Vec<(NaiveDate, f64)>,
}

/// Mean polarity over matched tokens with negation flips; 0.0 when nothing
/// matches. Unmatched tokens do not enter the denominator.
pub fn lexicon_score(tokens: &[String], lexicon: &Lexicon) -> f64 {
    let mut sum = 0.0;
    let mut matched = 0usize;
    for (i, token) in tokens.iter().enumerate() {
        if let Some(polarity) = lexicon.polarity(token) {
            let negated = i > 0 && lexicon.is_negator(&tokens[i - 1]);
            sum += if negated { -polarity } else { polarity };
            matched += 1;
        }
    }
    if matched == 0 {
        0.0
    } else {
        sum / matched as f64
    }
}

/// Daily score = arithmetic mean of per-headline scores; an empty day scores 0.0.
pub fn daily_sentiment(days: &[DailyNews], lexicon: &Lexicon) -> SentimentSeries {
    let entries = days
        .iter()
        .map(|day| {
            let score = if day.headlines.is_empty() {
                0.0
            } else {
                day.headlines
                    .iter()
                    .map(|h| lexicon_score(&h.tokens, lexicon))
                    .sum::<f64>()
                    / day.count() as f64
            };
            (day.day, score)
        })
        .collect();
    SentimentSeries { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::news::CleanHeadline;
    use proptest::prelude::*;

    fn lexicon(pairs: &[(&str, f64)]) -> Lexicon {
        Lexicon::new(
            pairs
                .iter()
                .map(|(t, p)| (t.to_string(), *p))
                .collect(),
        )
        .unwrap()
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn single_match_scores_its_polarity() {
        let lex = lexicon(&[("good", 1.0)]);
        assert_eq!(lexicon_score(&toks(&["good"]), &lex), 1.0);
    }

    #[test]
    fn negation_flips_polarity() {
        let lex = lexicon(&[("good", 1.0)]);
        assert_eq!(lexicon_score(&toks(&["not", "good"]), &lex), -1.0);
    }

    #[test]
    fn opposite_polarities_cancel() {
        let lex = lexicon(&[("good", 1.0), ("bad", -1.0)]);
        assert_eq!(lexicon_score(&toks(&["good", "bad"]), &lex), 0.0);
    }

    #[test]
    fn unmatched_tokens_score_zero() {
        let lex = lexicon(&[("good", 1.0)]);
        assert_eq!(lexicon_score(&toks(&["oil", "rises"]), &lex), 0.0);
    }

    #[test]
    fn negation_window_is_one_token() {
        let lex = lexicon(&[("good", 1.0)]);
        // negator two tokens back has no effect
        assert_eq!(lexicon_score(&toks(&["not", "very", "good"]), &lex), 1.0);
    }

    fn day(scores: &[&[&str]]) -> DailyNews {
        let d = NaiveDate::from_ymd_opt(2020, 3, 9).unwrap();
        DailyNews {
            day: d,
            headlines: scores
                .iter()
                .map(|words| CleanHeadline {
                    date: d,
                    tokens: toks(words),
                    original: words.join(" "),
                })
                .collect(),
        }
    }

    #[test]
    fn daily_mean_of_headline_scores() {
        let lex = lexicon(&[("good", 1.0)]);
        let series = daily_sentiment(&[day(&[&["good"], &["oil", "flat"]])], &lex);
        assert_eq!(series.entries[0].1, 0.5);
    }

    #[test]
    fn empty_day_scores_zero() {
        let lex = lexicon(&[("good", 1.0)]);
        let series = daily_sentiment(&[day(&[])], &lex);
        assert_eq!(series.entries[0].1, 0.0);
    }

    #[test]
    fn single_headline_identity() {
        let lex = lexicon(&[("weak", -0.4)]);
        let series = daily_sentiment(&[day(&[&["weak", "demand"]])], &lex);
        approx::assert_abs_diff_eq!(series.entries[0].1, -0.4, epsilon = 1e-15);
    }

    #[test]
    fn builtin_lexicon_loads() {
        let lex = Lexicon::builtin_financial();
        assert!(lex.len() >= 40);
        assert!(lex.is_negator("not"));
    }

    #[test]
    fn parse_rejects_out_of_range_polarity() {
        let err = Lexicon::parse("good\t1.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn parse_skips_comments() {
        let lex = Lexicon::parse("# header\ngood\t0.8\nbad\t-0.6 # inline\n".as_bytes()).unwrap();
        assert_eq!(lex.polarity("bad"), Some(-0.6));
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z]{2,8}"
    }

    proptest! {
        // Scores stay inside [-1, 1].
        #[test]
        fn boundedness(
            vocab in proptest::collection::hash_map(word(), -1.0f64..=1.0, 1..20),
            tokens in proptest::collection::vec(word(), 0..30),
        ) {
            let lex = Lexicon::new(vocab).unwrap();
            let score = lexicon_score(&tokens, &lex);
            prop_assert!((-1.0..=1.0).contains(&score));
        }

        // Negating every polarity negates every headline score exactly.
        #[test]
        fn polarity_antisymmetry(
            vocab in proptest::collection::hash_map(word(), -1.0f64..=1.0, 1..20),
            tokens in proptest::collection::vec(word(), 1..30),
        ) {
            let flipped: HashMap<String, f64> =
                vocab.iter().map(|(t, p)| (t.clone(), -p)).collect();
            let lex = Lexicon::new(vocab).unwrap();
            let lex_flipped = Lexicon::new(flipped).unwrap();
            prop_assert_eq!(
                lexicon_score(&tokens, &lex),
                -lexicon_score(&tokens, &lex_flipped)
            );
        }

        // Appending a fully positive matched token (not preceded by a
        // negator) to a headline scoring below +1 never lowers the score.
        // The mean over matched tokens makes this true only for tokens at
        // least as positive as the current score, hence polarity +1 here.
        #[test]
        fn match_monotonicity(
            vocab in proptest::collection::hash_map(word(), -1.0f64..=1.0, 1..20),
            tokens in proptest::collection::vec(word(), 1..20),
        ) {
            let mut vocab = vocab;
            vocab.insert("zzgain".into(), 1.0);
            let lex = Lexicon::new(vocab).unwrap();
            let before = lexicon_score(&tokens, &lex);
            prop_assume!(before < 1.0);
            prop_assume!(!lex.is_negator(tokens.last().unwrap()));
            let mut extended = tokens.clone();
            extended.push("zzgain".into());
            prop_assert!(lexicon_score(&extended, &lex) >= before - 1e-12);
        }
    }
}
