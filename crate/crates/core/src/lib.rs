//! Core library for predicting the next-day direction of realized oil-price
//! volatility from news-derived features.
//!
//! The pipeline stages map onto the modules below:
//!
//! * [`market_data`] — intraday bars, 5-minute log returns, daily realized
//!   variance, direction labels, and the daily/weekly/monthly lagged-RV
//!   benchmark features.
//! * [`news`] — headline cleaning, tokenization, and per-day grouping.
//! * [`sentiment`] — lexicon scoring with negation handling.
//! * [`embeddings`] — word-vector lookup (local files or a remote provider)
//!   and mean pooling to one vector per headline and per day.
//! * [`features`] — lagged feature matrices, standardization, and label
//!   alignment into model-ready datasets.
//! * [`classify`] — KNN, Gaussian naive Bayes, and logistic regression
//!   combined by soft voting.
//! * [`eval`] — rolling-window evaluation, classification metrics, and the
//!   McNemar paired test.
//! * [`explain`] — KernelSHAP attribution redistributed to articles and
//!   words, reported per market-regime period.

pub mod classify;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod market_data;
pub mod news;
pub mod sentiment;

pub use error::{Error, Result};
