//! Word vectors and mean pooling: local word2vec/GloVe text files or a
//! remote embedding provider, pooled to one vector per headline and per day.

pub mod provider;

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::news::DailyNews;

pub use provider::{remote_embed, EmbeddingProvider};

/// In-memory token → vector map with a fixed dimension.
#[derive(Debug, Clone)]
pub struct VectorStore {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
    /// Maps lowercased forms to the stored (cased) key, for lookups of
    /// lowercase tokens against cased vector files.
    case_fallback: HashMap<String, String>,
    pub source_name: String,
}

impl VectorStore {
    pub fn new(dimension: usize, source_name: impl Into<String>) -> Self {
        Self {
            dimension,
            vectors: HashMap::new(),
            case_fallback: HashMap::new(),
            source_name: source_name.into(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Inserts a vector; the first occurrence of a token wins.
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::Format(format!(
                "vector for {token:?} has length {}, store dimension is {}",
                vector.len(),
                self.dimension
            )));
        }
        if self.vectors.contains_key(token) {
            return Ok(());
        }
        let lower = token.to_lowercase();
        if lower != token {
            self.case_fallback.entry(lower).or_insert_with(|| token.to_string());
        }
        self.vectors.insert(token.to_string(), vector);
        Ok(())
    }

    /// Exact lookup, falling back to a cased entry whose lowercase form
    /// matches when the token itself is absent.
    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        if let Some(v) = self.vectors.get(token) {
            return Some(v);
        }
        self.case_fallback
            .get(token)
            .and_then(|cased| self.vectors.get(cased))
            .map(Vec::as_slice)
    }
}

/// Loads word2vec text format (optional `count dim` header line) or
/// headerless GloVe text format. Duplicate tokens keep the first occurrence;
/// an inconsistent row length is a format error naming the token.
pub fn load_vectors<R: Read>(reader: R, source_name: impl Into<String>) -> Result<VectorStore> {
    let mut lines = BufReader::new(reader).lines();
    let first = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(Error::Format("empty vector file".into())),
        }
    };

    let mut store: Option<VectorStore> = None;
    let source_name = source_name.into();
    let header: Vec<&str> = first.split_whitespace().collect();
    let is_header = header.len() == 2
        && header.iter().all(|f| f.parse::<usize>().is_ok());
    if is_header {
        let dim: usize = header[1].parse().unwrap();
        if dim == 0 {
            return Err(Error::Format("header declares dimension 0".into()));
        }
        store = Some(VectorStore::new(dim, source_name.clone()));
    } else {
        parse_vector_row(&first, &mut store, &source_name)?;
    }

    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        parse_vector_row(&line, &mut store, &source_name)?;
    }
    store.ok_or_else(|| Error::Format("vector file has a header but no rows".into()))
}

fn parse_vector_row(
    line: &str,
    store: &mut Option<VectorStore>,
    source_name: &str,
) -> Result<()> {
    let mut fields = line.split_whitespace();
    let token = fields
        .next()
        .ok_or_else(|| Error::Format("blank vector row".into()))?;
    let values: Vec<f64> = fields
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::Format(format!("non-numeric component {f:?} for token {token:?}")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Format(format!("token {token:?} has no components")));
    }
    let store = store.get_or_insert_with(|| VectorStore::new(values.len(), source_name));
    store.insert(token, values)
}

/// Mean of in-vocabulary token vectors; `None` (no coverage) when no token
/// is in vocabulary. Uncovered headlines are excluded from daily pooling.
pub fn embed_headline(tokens: &[String], store: &VectorStore) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; store.dimension()];
    let mut hits = 0usize;
    for token in tokens {
        if let Some(v) = store.lookup(token) {
            for (acc, x) in sum.iter_mut().zip(v) {
                *acc += x;
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return None;
    }
    for acc in &mut sum {
        *acc /= hits as f64;
    }
    Some(sum)
}

/// One pooled vector per day plus the per-article vectors retained for
/// attribution. `article_indices[i]` is the position of `article_vectors[i]`
/// within the day's headline list (uncovered headlines are absent).
#[derive(Debug, Clone, PartialEq)]
pub struct DailyEmbedding {
    pub day: NaiveDate,
    pub vector: Vec<f64>,
    pub article_vectors: Vec<Vec<f64>>,
    pub article_indices: Vec<usize>,
}

/// Pools covered headline vectors into the day vector (arithmetic mean).
/// Returns `None` when the day has zero coverage, which the features module
/// treats as a missing day.
pub fn pool_daily(
    day: &DailyNews,
    headline_vectors: Vec<(usize, Vec<f64>)>,
) -> Option<DailyEmbedding> {
    if headline_vectors.is_empty() {
        return None;
    }
    let dim = headline_vectors[0].1.len();
    let n = headline_vectors.len() as f64;
    let mut vector = vec![0.0; dim];
    let mut article_vectors = Vec::with_capacity(headline_vectors.len());
    let mut article_indices = Vec::with_capacity(headline_vectors.len());
    for (idx, v) in headline_vectors {
        for (acc, x) in vector.iter_mut().zip(&v) {
            *acc += x;
        }
        article_indices.push(idx);
        article_vectors.push(v);
    }
    for acc in &mut vector {
        *acc /= n;
    }
    Some(DailyEmbedding {
        day: day.day,
        vector,
        article_vectors,
        article_indices,
    })
}

/// Embeds every headline of the day against the store and pools the covered
/// ones. `None` when no headline has vocabulary coverage.
pub fn embed_daily(day: &DailyNews, store: &VectorStore) -> Option<DailyEmbedding> {
    let covered: Vec<(usize, Vec<f64>)> = day
        .headlines
        .iter()
        .enumerate()
        .filter_map(|(i, h)| embed_headline(&h.tokens, store).map(|v| (i, v)))
        .collect();
    pool_daily(day, covered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::news::CleanHeadline;
    use proptest::prelude::*;

    fn store2() -> VectorStore {
        let mut s = VectorStore::new(2, "test");
        s.insert("oil", vec![0.1, 0.2]).unwrap();
        s.insert("opec", vec![0.3, 0.4]).unwrap();
        s
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn load_headerless_glove_format() {
        let store = load_vectors("oil 0.1 0.2\nopec 0.3 0.4\n".as_bytes(), "glove").unwrap();
        assert_eq!(store.dimension(), 2);
        assert_eq!(store.lookup("oil"), Some(&[0.1, 0.2][..]));
    }

    #[test]
    fn load_word2vec_header_format() {
        let store = load_vectors("2 2\noil 0.1 0.2\nopec 0.3 0.4\n".as_bytes(), "w2v").unwrap();
        assert_eq!(store.dimension(), 2);
        assert_eq!(store.len(), 2);
        assert_eq!(store.lookup("opec"), Some(&[0.3, 0.4][..]));
    }

    #[test]
    fn inconsistent_row_length_names_token() {
        let err = load_vectors("oil 0.1 0.2\ngas 0.1\n".as_bytes(), "bad").unwrap_err();
        match err {
            Error::Format(msg) => assert!(msg.contains("gas"), "{msg}"),
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn empty_file_is_format_error() {
        assert!(matches!(
            load_vectors("".as_bytes(), "empty").unwrap_err(),
            Error::Format(_)
        ));
    }

    #[test]
    fn duplicate_tokens_keep_first() {
        let store = load_vectors("oil 1 2\noil 9 9\n".as_bytes(), "dup").unwrap();
        assert_eq!(store.lookup("oil"), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn lowercase_lookup_falls_back_to_cased_entry() {
        let store = load_vectors("Alaska 1 2\n".as_bytes(), "cased").unwrap();
        assert_eq!(store.lookup("alaska"), Some(&[1.0, 2.0][..]));
        assert_eq!(store.lookup("Alaska"), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn headline_embedding_is_token_mean() {
        let v = embed_headline(&toks(&["oil", "opec"]), &store2()).unwrap();
        approx::assert_abs_diff_eq!(v[0], 0.2, epsilon = 1e-15);
        approx::assert_abs_diff_eq!(v[1], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn out_of_vocabulary_headline_has_no_coverage() {
        assert_eq!(embed_headline(&toks(&["zzz"]), &store2()), None);
    }

    #[test]
    fn single_token_headline_is_identity() {
        assert_eq!(
            embed_headline(&toks(&["oil"]), &store2()).unwrap(),
            vec![0.1, 0.2]
        );
    }

    fn news_day(n: usize) -> DailyNews {
        let d = NaiveDate::from_ymd_opt(2020, 3, 9).unwrap();
        DailyNews {
            day: d,
            headlines: (0..n)
                .map(|i| CleanHeadline {
                    date: d,
                    tokens: toks(&["oil"]),
                    original: format!("headline {i}"),
                })
                .collect(),
        }
    }

    #[test]
    fn pooling_is_mean() {
        let day = news_day(2);
        let pooled = pool_daily(&day, vec![(0, vec![1.0, 2.0]), (1, vec![3.0, 4.0])]).unwrap();
        assert_eq!(pooled.vector, vec![2.0, 3.0]);
        assert_eq!(pooled.article_vectors.len(), 2);
    }

    #[test]
    fn pooling_single_vector_identity() {
        let day = news_day(1);
        let pooled = pool_daily(&day, vec![(0, vec![0.5, -0.5])]).unwrap();
        assert_eq!(pooled.vector, vec![0.5, -0.5]);
    }

    #[test]
    fn pooling_equal_vectors_idempotent() {
        let day = news_day(3);
        let v = vec![0.7, 0.1];
        let pooled = pool_daily(
            &day,
            vec![(0, v.clone()), (1, v.clone()), (2, v.clone())],
        )
        .unwrap();
        for (a, b) in pooled.vector.iter().zip(&v) {
            approx::assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_coverage_day_is_missing() {
        assert_eq!(pool_daily(&news_day(1), vec![]), None);
    }

    proptest! {
        // pool(k·v_i) = k · pool(v_i)
        #[test]
        fn pooling_linearity(
            vectors in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 3),
                1..8,
            ),
            k in -4.0f64..4.0,
        ) {
            let day = news_day(vectors.len());
            let indexed: Vec<(usize, Vec<f64>)> =
                vectors.iter().cloned().enumerate().collect();
            let scaled: Vec<(usize, Vec<f64>)> = vectors
                .iter()
                .map(|v| v.iter().map(|x| x * k).collect())
                .enumerate()
                .collect();
            let base = pool_daily(&day, indexed).unwrap();
            let scaled = pool_daily(&day, scaled).unwrap();
            for (a, b) in base.vector.iter().zip(&scaled.vector) {
                prop_assert!((a * k - b).abs() < 1e-12);
            }
        }

        // Daily vector does not depend on headline order.
        #[test]
        fn pooling_permutation_invariance(
            vectors in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 3),
                2..8,
            ),
            seed in 0u64..500,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let day = news_day(vectors.len());
            let indexed: Vec<(usize, Vec<f64>)> =
                vectors.iter().cloned().enumerate().collect();
            let mut shuffled = indexed.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = pool_daily(&day, indexed).unwrap();
            let b = pool_daily(&day, shuffled).unwrap();
            for (x, y) in a.vector.iter().zip(&b.vector) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        // Every vector leaving the module has the store dimension.
        #[test]
        fn dimension_conservation(tokens in proptest::collection::vec("[a-z]{1,4}", 1..12)) {
            let store = store2();
            if let Some(v) = embed_headline(&tokens, &store) {
                prop_assert_eq!(v.len(), store.dimension());
            }
        }
    }
}
