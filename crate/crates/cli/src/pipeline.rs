//! Stage orchestration: ingest, features, evaluate, mcnemar, explain, and
//! the chained `all` command. Every stage writes its artifacts plus a
//! manifest under the output directory; reruns with identical inputs and
//! seed are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use newsvol_core::classify::fit_ensemble;
use newsvol_core::embeddings::{self, DailyEmbedding, EmbeddingProvider, VectorStore};
use newsvol_core::eval::{
    classification_metrics, mcnemar, rolling_eval, McNemarResult, MetricsReport, PredictionLog,
    WindowMode,
};
use newsvol_core::explain::{
    article_attribution, builtin_stopwords, day_seed, kernel_shap, period_report,
    sample_background, word_attribution, DayWordShares, PeriodReport,
};
use newsvol_core::features::{align, build_lagged, Channel, FeatureFrame};
use newsvol_core::market_data::{
    direction_labels, har_features, log_returns, parse_bars, realized_variance, LabelEntry,
    LabelSeries, RvSeries,
};
use newsvol_core::news::{
    align_to_trading_days, clean_headline, group_by_day, parse_headlines, CleanHeadline,
    CleanOutcome, CleaningRules, DailyNews,
};
use newsvol_core::sentiment::{daily_sentiment, Lexicon};

use crate::config::{EmbeddingSource, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{Manifest, OutputLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Features,
    Evaluate,
    Mcnemar,
    Explain,
    All,
}

/// Runs one command (or the whole chain) under the output-directory lock.
pub fn run(config: &RunConfig, command: Command) -> CliResult<()> {
    fs::create_dir_all(&config.paths.output_dir)?;
    let _lock = OutputLock::acquire(&config.paths.output_dir)?;
    let pipeline = Pipeline { config };
    match command {
        Command::Ingest => pipeline.ingest(),
        Command::Features => pipeline.features(),
        Command::Evaluate => pipeline.evaluate(),
        Command::Mcnemar => pipeline.mcnemar_stage(),
        Command::Explain => pipeline.explain_stage(),
        Command::All => {
            pipeline.ingest()?;
            pipeline.features()?;
            pipeline.evaluate()?;
            pipeline.mcnemar_stage()?;
            pipeline.explain_stage()
        }
    }
}

struct Pipeline<'a> {
    config: &'a RunConfig,
}

impl<'a> Pipeline<'a> {
    fn out(&self) -> &Path {
        &self.config.paths.output_dir
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out().join(name)
    }

    /// Upstream artifact lookup; a miss is a dependency error naming the file.
    fn require(&self, name: &str) -> CliResult<PathBuf> {
        let path = self.artifact(name);
        if !path.exists() {
            return Err(CliError::Dependency(format!(
                "missing upstream artifact {} (run the producing stage first)",
                path.display()
            )));
        }
        Ok(path)
    }

    fn write_with_header<F>(&self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> CliResult<()>,
    {
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.config.run_header())?;
        body(&mut buf)?;
        fs::write(self.artifact(name), buf)?;
        Ok(())
    }

    // -- ingest -------------------------------------------------------------

    fn ingest(&self) -> CliResult<()> {
        let mut manifest = Manifest::new("ingest", self.config);
        manifest.record_input("bars", &self.config.paths.bars)?;
        manifest.record_input("news", &self.config.paths.news)?;

        let bars_file = fs::File::open(&self.config.paths.bars)
            .map_err(|e| CliError::Data(format!("open bars: {e}")))?;
        let bars = parse_bars(bars_file)?;
        let returns = log_returns(&bars, self.config.features.interval_minutes)?;
        let rv = realized_variance(&returns.series);
        if rv.len() < 2 {
            return Err(CliError::Data(format!(
                "only {} trading days with usable bars; need at least 2",
                rv.len()
            )));
        }
        let labels = direction_labels(&rv)?;
        let har_rows = har_features(&rv);

        let news_file = fs::File::open(&self.config.paths.news)
            .map_err(|e| CliError::Data(format!("open news: {e}")))?;
        let raw_headlines = parse_headlines(news_file)?;
        let rules = CleaningRules::new(
            self.config.cleaning.boilerplate.clone(),
            self.config.cleaning.extra_patterns.clone(),
            self.config.cleaning.min_tokens,
        )?;
        let mut clean = Vec::new();
        let mut drops: Vec<(NaiveDate, &'static str)> = Vec::new();
        for raw in &raw_headlines {
            match clean_headline(raw, &rules) {
                CleanOutcome::Clean(h) => clean.push(h),
                CleanOutcome::Dropped { date, reason } => {
                    let code = match reason {
                        newsvol_core::news::DropReason::UrlOnly => "url_only",
                        newsvol_core::news::DropReason::TooShort => "too_short",
                        newsvol_core::news::DropReason::Boilerplate => "boilerplate",
                    };
                    drops.push((date, code));
                }
            }
        }

        self.write_with_header("rv.csv", |buf| Ok(rv.write_csv(buf)?))?;
        self.write_with_header("labels.csv", |buf| {
            writeln!(buf, "date,label")?;
            for e in &labels.entries {
                writeln!(buf, "{},{}", e.day, e.label)?;
            }
            Ok(())
        })?;

        let har_frame = FeatureFrame::new(
            Channel::Har,
            har_rows.iter().map(|r| r.day).collect(),
            vec!["rv_daily".into(), "rv_weekly".into(), "rv_monthly".into()],
            har_rows
                .iter()
                .map(|r| vec![r.rv_daily, r.rv_weekly, r.rv_monthly])
                .collect(),
        )?;
        self.write_with_header("har.csv", |buf| Ok(har_frame.write_csv(buf)?))?;

        self.write_with_header("news_clean.csv", |buf| {
            let mut writer = csv::Writer::from_writer(buf);
            writer
                .write_record(["date", "tokens", "original"])
                .map_err(|e| CliError::Data(e.to_string()))?;
            for h in &clean {
                writer
                    .write_record([
                        h.date.to_string().as_str(),
                        h.tokens.join(" ").as_str(),
                        h.original.as_str(),
                    ])
                    .map_err(|e| CliError::Data(e.to_string()))?;
            }
            writer.flush()?;
            Ok(())
        })?;

        self.write_with_header("drops.csv", |buf| {
            writeln!(buf, "date,reason")?;
            for (date, reason) in &drops {
                writeln!(buf, "{date},{reason}")?;
            }
            Ok(())
        })?;

        manifest.note(
            "skipped_bar_days",
            serde_json::json!(returns
                .skipped_days
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()),
        );
        manifest.note("headlines_in", serde_json::json!(raw_headlines.len()));
        manifest.note("headlines_kept", serde_json::json!(clean.len()));
        manifest.note("trading_days", serde_json::json!(rv.len()));
        for name in ["rv.csv", "labels.csv", "har.csv", "news_clean.csv", "drops.csv"] {
            manifest.record_output(self.out(), name)?;
        }
        manifest.write(self.out())?;
        Ok(())
    }

    // -- features -----------------------------------------------------------

    fn features(&self) -> CliResult<()> {
        let mut manifest = Manifest::new("features", self.config);
        let rv_path = self.require("rv.csv")?;
        let news_path = self.require("news_clean.csv")?;
        manifest.record_input("rv.csv", &rv_path)?;
        manifest.record_input("news_clean.csv", &news_path)?;

        let calendar: Vec<NaiveDate> = read_rv_csv(&rv_path)?.days();
        let days = self.load_daily_news(&calendar)?;
        let day_index: BTreeMap<NaiveDate, usize> =
            days.iter().enumerate().map(|(i, d)| (d.day, i)).collect();

        for &channel in &self.config.features.channels {
            let frame = match channel {
                Channel::Count => {
                    // zero-news trading days stay in the count channel
                    let rows: Vec<Vec<f64>> = calendar
                        .iter()
                        .map(|d| {
                            let count = day_index
                                .get(d)
                                .map(|&i| days[i].count() as f64)
                                .unwrap_or(0.0);
                            vec![count]
                        })
                        .collect();
                    FeatureFrame::new(channel, calendar.clone(), vec!["count".into()], rows)?
                }
                Channel::Sentiment => {
                    let lexicon = self.load_lexicon()?;
                    let series = daily_sentiment(&days, &lexicon);
                    let (dates, rows): (Vec<_>, Vec<_>) = series
                        .entries
                        .iter()
                        .map(|&(d, s)| (d, vec![s]))
                        .unzip();
                    FeatureFrame::new(channel, dates, vec!["sentiment".into()], rows)?
                }
                Channel::Embedding => {
                    let daily = self.daily_embeddings(&days, &mut manifest)?;
                    let dim = daily
                        .values()
                        .next()
                        .map(|e| e.vector.len())
                        .ok_or_else(|| {
                            CliError::Data("no day has embedding coverage".into())
                        })?;
                    let columns = (0..dim).map(|i| format!("e{i}")).collect();
                    let (dates, rows): (Vec<_>, Vec<_>) = daily
                        .iter()
                        .map(|(d, e)| (*d, e.vector.clone()))
                        .unzip();
                    FeatureFrame::new(channel, dates, columns, rows)?
                }
                Channel::Har => {
                    let har_path = self.require("har.csv")?;
                    let file = fs::File::open(&har_path)?;
                    FeatureFrame::read_csv(file)?
                }
            };
            let name = format!("features_{}.csv", channel.name());
            self.write_with_header(&name, |buf| Ok(frame.write_csv(buf)?))?;
            manifest.record_output(self.out(), &name)?;
        }
        manifest.write(self.out())?;
        Ok(())
    }

    fn load_lexicon(&self) -> CliResult<Lexicon> {
        match &self.config.paths.lexicon {
            Some(path) => {
                let file = fs::File::open(path)
                    .map_err(|e| CliError::Data(format!("open lexicon: {e}")))?;
                Ok(Lexicon::parse(file)?)
            }
            None => Ok(Lexicon::builtin_financial()),
        }
    }

    fn load_daily_news(&self, calendar: &[NaiveDate]) -> CliResult<Vec<DailyNews>> {
        let path = self.require("news_clean.csv")?;
        let headlines = read_news_clean_csv(&path)?;
        Ok(align_to_trading_days(group_by_day(headlines), calendar))
    }

    /// One pooled embedding per covered day, from the local store or the
    /// remote provider.
    fn daily_embeddings(
        &self,
        days: &[DailyNews],
        manifest: &mut Manifest,
    ) -> CliResult<BTreeMap<NaiveDate, DailyEmbedding>> {
        let mut out = BTreeMap::new();
        match self.config.embeddings.source {
            EmbeddingSource::File => {
                let store = self.load_vector_store(manifest)?;
                for day in days {
                    if let Some(e) = embeddings::embed_daily(day, &store) {
                        out.insert(day.day, e);
                    }
                }
            }
            EmbeddingSource::Remote => {
                let provider = self.provider()?;
                for day in days {
                    if day.headlines.is_empty() {
                        continue;
                    }
                    let texts: Vec<String> =
                        day.headlines.iter().map(|h| h.original.clone()).collect();
                    let vectors = embeddings::remote_embed(&texts, &provider)?;
                    let indexed: Vec<(usize, Vec<f64>)> =
                        vectors.into_iter().enumerate().collect();
                    if let Some(e) = embeddings::pool_daily(day, indexed) {
                        out.insert(day.day, e);
                    }
                }
            }
        }
        Ok(out)
    }

    fn load_vector_store(&self, manifest: &mut Manifest) -> CliResult<VectorStore> {
        let path = self.config.paths.vectors.as_ref().ok_or_else(|| {
            CliError::Config(vec!["paths.vectors required for file embeddings".into()])
        })?;
        manifest.record_input("vectors", path)?;
        let file =
            fs::File::open(path).map_err(|e| CliError::Data(format!("open vectors: {e}")))?;
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "vectors".into());
        Ok(embeddings::load_vectors(file, name)?)
    }

    fn provider(&self) -> CliResult<EmbeddingProvider> {
        Ok(EmbeddingProvider {
            endpoint: self
                .config
                .embeddings
                .endpoint
                .clone()
                .ok_or_else(|| CliError::Config(vec!["embeddings.endpoint missing".into()]))?,
            model_name: self
                .config
                .embeddings
                .model_name
                .clone()
                .ok_or_else(|| CliError::Config(vec!["embeddings.model_name missing".into()]))?,
            batch_size: self.config.embeddings.batch_size.max(1),
            cache_path: self
                .config
                .paths
                .cache
                .clone()
                .ok_or_else(|| CliError::Config(vec!["paths.cache missing".into()]))?,
        })
    }

    /// Lag order per channel: the lagged-RV benchmark already spans its own
    /// history, news channels get the configured lag stack.
    fn lag_order(&self, channel: Channel) -> usize {
        match channel {
            Channel::Har => 0,
            _ => self.config.features.p,
        }
    }

    fn load_channel_dataset(
        &self,
        channel: Channel,
        labels: &LabelSeries,
    ) -> CliResult<(newsvol_core::features::Dataset, newsvol_core::features::AlignReport)> {
        let path = self.require(&format!("features_{}.csv", channel.name()))?;
        let frame = FeatureFrame::read_csv(fs::File::open(&path)?)?;
        let lagged = build_lagged(&frame, self.lag_order(channel))?;
        Ok(align(&lagged, labels)?)
    }

    // -- evaluate -----------------------------------------------------------

    fn evaluate(&self) -> CliResult<()> {
        let mut manifest = Manifest::new("evaluate", self.config);
        let labels_path = self.require("labels.csv")?;
        manifest.record_input("labels.csv", &labels_path)?;
        let labels = read_labels_csv(&labels_path)?;

        let mut metrics: BTreeMap<String, MetricsReport> = BTreeMap::new();
        for &channel in &self.config.features.channels {
            let feature_file = format!("features_{}.csv", channel.name());
            manifest.record_input(&feature_file, &self.require(&feature_file)?)?;
            let (dataset, report) = self.load_channel_dataset(channel, &labels)?;
            let log = rolling_eval(&dataset, &self.config.ensemble, &self.config.rolling)?;
            let name = format!("predictions_{}.csv", channel.name());
            self.write_with_header(&name, |buf| Ok(log.write_csv(buf)?))?;
            manifest.record_output(self.out(), &name)?;
            manifest.note(
                &format!("align_{}", channel.name()),
                serde_json::json!({
                    "rows": dataset.len(),
                    "dropped_feature_rows": report.dropped_feature_rows,
                    "dropped_labels": report.dropped_labels,
                }),
            );
            metrics.insert(channel.name().to_string(), classification_metrics(&log)?);
        }

        self.write_with_header("metrics.csv", |buf| {
            writeln!(buf, "model,accuracy,precision,recall,f1")?;
            for &channel in &self.config.features.channels {
                let name = channel.name();
                if let Some(m) = metrics.get(name) {
                    writeln!(
                        buf,
                        "{name},{:.4},{:.4},{:.4},{:.4}",
                        m.accuracy, m.precision, m.recall, m.f1
                    )?;
                }
            }
            Ok(())
        })?;
        let mut metrics_json = serde_json::to_string_pretty(&metrics)
            .map_err(|e| CliError::Data(e.to_string()))?;
        metrics_json.push('\n');
        fs::write(self.artifact("metrics.json"), metrics_json)?;
        manifest.record_output(self.out(), "metrics.csv")?;
        manifest.record_output(self.out(), "metrics.json")?;
        manifest.write(self.out())?;
        Ok(())
    }

    // -- mcnemar ------------------------------------------------------------

    fn mcnemar_stage(&self) -> CliResult<()> {
        let mut manifest = Manifest::new("mcnemar", self.config);
        let mut logs: Vec<(String, PredictionLog)> = Vec::new();
        for &channel in &self.config.features.channels {
            let name = format!("predictions_{}.csv", channel.name());
            let path = self.require(&name)?;
            manifest.record_input(&name, &path)?;
            logs.push((
                channel.name().to_string(),
                PredictionLog::read_csv(fs::File::open(&path)?)?,
            ));
        }
        if logs.len() < 2 {
            return Err(CliError::Config(vec![
                "mcnemar needs at least two evaluated channels".into(),
            ]));
        }

        let mut results: BTreeMap<String, serde_json::Value> = BTreeMap::new();
        let mut rows: Vec<(String, String, usize, McNemarResult)> = Vec::new();
        for i in 0..logs.len() {
            for j in i + 1..logs.len() {
                let (restricted_a, restricted_b) =
                    intersect_logs(&logs[i].1, &logs[j].1);
                if restricted_a.entries.is_empty() {
                    return Err(CliError::Data(format!(
                        "{} and {} share no evaluation dates",
                        logs[i].0, logs[j].0
                    )));
                }
                let result = mcnemar(&restricted_a, &restricted_b)?;
                let key = format!("{}_vs_{}", logs[i].0, logs[j].0);
                results.insert(
                    key,
                    serde_json::json!({
                        "common_days": restricted_a.entries.len(),
                        "result": result,
                    }),
                );
                rows.push((
                    logs[i].0.clone(),
                    logs[j].0.clone(),
                    restricted_a.entries.len(),
                    result,
                ));
            }
        }

        self.write_with_header("mcnemar.csv", |buf| {
            writeln!(
                buf,
                "model_a,model_b,common_days,b,c,mode,statistic,p_value,p_exact,p_chi2_cc"
            )?;
            for (a, b, days, r) in &rows {
                let mode = match r.mode {
                    newsvol_core::eval::McNemarMode::Exact => "exact",
                    newsvol_core::eval::McNemarMode::Chi2Cc => "chi2_cc",
                };
                let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                writeln!(
                    buf,
                    "{a},{b},{days},{},{},{mode},{},{},{},{}",
                    r.b,
                    r.c,
                    fmt_opt(r.statistic),
                    r.p_value,
                    fmt_opt(r.p_exact),
                    fmt_opt(r.p_chi2_cc),
                )?;
            }
            Ok(())
        })?;

        // lower-triangle matrix mirroring the pairwise p-value tables
        self.write_with_header("mcnemar_matrix.csv", |buf| {
            let names: Vec<&str> = logs.iter().map(|(n, _)| n.as_str()).collect();
            writeln!(buf, "model,{}", names.join(","))?;
            for (i, name) in names.iter().enumerate() {
                let mut cells = Vec::with_capacity(names.len());
                for j in 0..names.len() {
                    if j < i {
                        let r = rows
                            .iter()
                            .find(|(a, b, _, _)| a == names[j] && b == *name)
                            .map(|(_, _, _, r)| format!("{:.4}", r.p_value))
                            .unwrap_or_default();
                        cells.push(r);
                    } else {
                        cells.push(String::new());
                    }
                }
                writeln!(buf, "{name},{}", cells.join(","))?;
            }
            Ok(())
        })?;

        let mut json = serde_json::to_string_pretty(&results)
            .map_err(|e| CliError::Data(e.to_string()))?;
        json.push('\n');
        fs::write(self.artifact("mcnemar.json"), json)?;
        for name in ["mcnemar.csv", "mcnemar_matrix.csv", "mcnemar.json"] {
            manifest.record_output(self.out(), name)?;
        }
        manifest.write(self.out())?;
        Ok(())
    }

    // -- explain ------------------------------------------------------------

    /// Re-runs the rolling protocol over the embedding dataset and explains
    /// each evaluation day's pooled vector: the lag blocks are frozen at
    /// their observed values, KernelSHAP attributes the day's dimensions,
    /// and the attribution is redistributed to articles and words.
    fn explain_stage(&self) -> CliResult<()> {
        if !self.config.features.channels.contains(&Channel::Embedding) {
            return Err(CliError::Config(vec![
                "explain requires the embedding channel".into(),
            ]));
        }
        let mut manifest = Manifest::new("explain", self.config);
        let labels = read_labels_csv(&self.require("labels.csv")?)?;
        let calendar: Vec<NaiveDate> = read_rv_csv(&self.require("rv.csv")?)?.days();
        let days = self.load_daily_news(&calendar)?;
        let day_by_date: BTreeMap<NaiveDate, &DailyNews> =
            days.iter().map(|d| (d.day, d)).collect();
        let daily_embeddings = self.daily_embeddings(&days, &mut manifest)?;

        let (dataset, _) = self.load_channel_dataset(Channel::Embedding, &labels)?;
        let dim = daily_embeddings
            .values()
            .next()
            .map(|e| e.vector.len())
            .ok_or_else(|| CliError::Data("no day has embedding coverage".into()))?;

        let rolling = &self.config.rolling;
        let n = dataset.len();
        let window = (rolling.train_fraction * n as f64).floor() as usize;
        if window < rolling.min_window.max(2) || n < window + 1 {
            return Err(CliError::Data(format!(
                "dataset of {n} rows is too short for explanation at train_fraction {}",
                rolling.train_fraction
            )));
        }

        let stopwords = {
            let mut set = builtin_stopwords();
            for w in &self.config.shap.extra_stopwords {
                set.insert(w.to_lowercase());
            }
            set
        };

        let mut daily_shares: Vec<DayWordShares> = Vec::new();
        let mut i = window;
        while i < n {
            let start = match rolling.window_mode {
                WindowMode::Sliding => i - window,
                WindowMode::Expanding => 0,
            };
            let model = fit_ensemble(&dataset.x[start..i], &dataset.y[start..i], &self.config.ensemble)?;
            let row = &dataset.x[i];
            let feature_date = dataset.feature_dates[i];
            let (day_vector, frozen_lags) = row.split_at(dim);

            let predict = |v: &[f64]| {
                let mut input = Vec::with_capacity(row.len());
                input.extend_from_slice(v);
                input.extend_from_slice(frozen_lags);
                model.predict_proba1(&input)
            };
            let pool: Vec<Vec<f64>> = dataset.x[start..i]
                .iter()
                .map(|r| r[..dim].to_vec())
                .collect();
            let seed = day_seed(self.config.seed, feature_date);
            let background =
                sample_background(&pool, self.config.shap.background_size, seed);
            let explanation = kernel_shap(
                predict,
                day_vector,
                &background,
                self.config.shap.n_samples,
                seed,
            )?;

            let embedding = daily_embeddings.get(&feature_date).ok_or_else(|| {
                CliError::Data(format!("no embedding for evaluated day {feature_date}"))
            })?;
            let news = day_by_date.get(&feature_date).ok_or_else(|| {
                CliError::Data(format!("no news group for evaluated day {feature_date}"))
            })?;
            let impacts = article_attribution(&explanation, embedding)?;
            let covered: Vec<&CleanHeadline> = embedding
                .article_indices
                .iter()
                .map(|&idx| &news.headlines[idx])
                .collect();
            let shares = word_attribution(&impacts, &covered, &stopwords)?;
            daily_shares.push(DayWordShares {
                date: feature_date,
                shares,
            });
            i += rolling.step;
        }

        let report = period_report(&daily_shares, &self.config.periods, self.config.shap.top_k)?;
        self.write_period_report(&report, &mut manifest)?;
        manifest.note("explained_days", serde_json::json!(daily_shares.len()));
        manifest.note("unassigned_days", serde_json::json!(report.unassigned_days));
        manifest.write(self.out())?;
        Ok(())
    }

    fn write_period_report(
        &self,
        report: &PeriodReport,
        manifest: &mut Manifest,
    ) -> CliResult<()> {
        for ranking in &report.periods {
            let name = format!("shap_words_{}.csv", ranking.period.name);
            self.write_with_header(&name, |buf| {
                writeln!(buf, "rank,word,mean_abs_impact,count")?;
                for (rank, w) in ranking.words.iter().enumerate() {
                    writeln!(
                        buf,
                        "{},{},{},{}",
                        rank + 1,
                        w.word,
                        w.mean_abs_impact,
                        w.occurrence_count
                    )?;
                }
                Ok(())
            })?;
            manifest.record_output(self.out(), &name)?;
        }
        let mut json = serde_json::to_string_pretty(report)
            .map_err(|e| CliError::Data(e.to_string()))?;
        json.push('\n');
        fs::write(self.artifact("shap_report.json"), json)?;
        manifest.record_output(self.out(), "shap_report.json")?;
        Ok(())
    }
}

/// Restricts both logs to their common dates, preserving order.
fn intersect_logs(a: &PredictionLog, b: &PredictionLog) -> (PredictionLog, PredictionLog) {
    let dates_a: std::collections::BTreeSet<NaiveDate> = a.dates().into_iter().collect();
    let dates_b: std::collections::BTreeSet<NaiveDate> = b.dates().into_iter().collect();
    let common: std::collections::BTreeSet<NaiveDate> =
        dates_a.intersection(&dates_b).copied().collect();
    let filter = |log: &PredictionLog| PredictionLog {
        entries: log
            .entries
            .iter()
            .filter(|e| common.contains(&e.date))
            .copied()
            .collect(),
    };
    (filter(a), filter(b))
}

// -- artifact readers ------------------------------------------------------

pub fn read_rv_csv(path: &Path) -> CliResult<RvSeries> {
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if trimmed != "date,rv" {
                return Err(CliError::Data(format!(
                    "{}: line {}: expected 'date,rv' header",
                    path.display(),
                    idx + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let (date, rv) = trimmed
            .split_once(',')
            .ok_or_else(|| CliError::Data(format!("{}: malformed row", path.display())))?;
        entries.push(newsvol_core::market_data::RvEntry {
            day: date
                .parse()
                .map_err(|_| CliError::Data(format!("bad date {date:?}")))?,
            rv: rv
                .parse()
                .map_err(|_| CliError::Data(format!("bad rv {rv:?}")))?,
        });
    }
    Ok(RvSeries::new(entries)?)
}

pub fn read_labels_csv(path: &Path) -> CliResult<LabelSeries> {
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    let mut saw_header = false;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if trimmed != "date,label" {
                return Err(CliError::Data(format!(
                    "{}: expected 'date,label' header",
                    path.display()
                )));
            }
            saw_header = true;
            continue;
        }
        let (date, label) = trimmed
            .split_once(',')
            .ok_or_else(|| CliError::Data(format!("{}: malformed row", path.display())))?;
        entries.push(LabelEntry {
            day: date
                .parse()
                .map_err(|_| CliError::Data(format!("bad date {date:?}")))?,
            label: label
                .parse()
                .map_err(|_| CliError::Data(format!("bad label {label:?}")))?,
        });
    }
    Ok(LabelSeries { entries })
}

pub fn read_news_clean_csv(path: &Path) -> CliResult<Vec<CleanHeadline>> {
    let text = fs::read_to_string(path)?;
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        if record.len() != 3 {
            return Err(CliError::Data(format!(
                "{}: expected 3 fields per row",
                path.display()
            )));
        }
        out.push(CleanHeadline {
            date: record[0]
                .parse()
                .map_err(|_| CliError::Data(format!("bad date {:?}", &record[0])))?,
            tokens: record[1].split_whitespace().map(str::to_string).collect(),
            original: record[2].to_string(),
        });
    }
    Ok(out)
}
