//! The four-stage refinement cascade plus the per-category size threshold.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CoreError, Result};
use crate::llmgate::{classify_informative, Gateway, InformativeOutcome, Informativeness, PromptTemplate};
use crate::model::{Corpus, DateFlag, Review, Stage};
pub use crate::text::{clean_text, token_count};

/// Reviews with fewer than this many whitespace tokens are dropped in stage 2.
pub const MIN_TOKENS: usize = 4;
pub const DEFAULT_MIN_CATEGORY_REVIEWS: usize = 1000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Option<Stage>,
    pub input_count: usize,
    pub output_count: usize,
    pub removed_count: usize,
    pub per_category_counts: BTreeMap<String, usize>,
    /// Stage 1: reviews whose app is missing from the app table.
    #[serde(skip_serializing_if = "is_zero")]
    pub unknown_app: usize,
    /// Stage 1: reviews of apps excluded from temporal analysis.
    #[serde(skip_serializing_if = "is_zero")]
    pub excluded_app: usize,
    /// Stage 3: reviews kept because the gateway never settled them.
    #[serde(skip_serializing_if = "is_zero")]
    pub undecided: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dropped_categories: Vec<String>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl StageReport {
    fn new(stage: Stage, input: usize, out: &Corpus) -> Self {
        Self {
            stage: Some(stage),
            input_count: input,
            output_count: out.reviews.len(),
            removed_count: input - out.reviews.len(),
            per_category_counts: out.counts_by_category(),
            ..Self::default()
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(io_err(path))
    }
}

fn expect_stage(corpus: &Corpus, expected: Stage) -> Result<()> {
    if corpus.stage != expected {
        return Err(CoreError::StageOrder {
            expected,
            found: corpus.stage,
        });
    }
    Ok(())
}

fn advance(mut corpus: Corpus, reviews: Vec<Review>, to: Stage) -> Corpus {
    corpus.reviews = reviews;
    corpus.stage = to;
    corpus
}

/// Cleans every review and drops the ones that clean to nothing.
pub fn stage0(corpus: Corpus) -> Result<(Corpus, StageReport)> {
    expect_stage(&corpus, Stage::Raw)?;
    let input = corpus.reviews.len();
    let kept: Vec<Review> = corpus
        .reviews
        .par_iter()
        .filter_map(|r| {
            let content = clean_text(&r.content);
            (!content.is_empty()).then(|| Review { content, ..r.clone() })
        })
        .collect();
    let out = advance(corpus, kept, Stage::S0);
    let report = StageReport::new(Stage::S0, input, &out);
    Ok((out, report))
}

/// Keeps reviews written on or after their app's integration day (UTC).
pub fn stage1_temporal(corpus: Corpus) -> Result<(Corpus, StageReport)> {
    expect_stage(&corpus, Stage::S0)?;
    let input = corpus.reviews.len();
    let (mut unknown, mut excluded) = (0, 0);
    let mut kept = Vec::with_capacity(input);
    for r in &corpus.reviews {
        let Some(app) = corpus.apps.get(&r.app_id) else {
            unknown += 1;
            continue;
        };
        match (app.date_flag, app.integration_date) {
            (DateFlag::Excluded, _) | (_, None) => excluded += 1,
            (_, Some(day)) => {
                if r.at.date_naive() >= day {
                    kept.push(r.clone());
                }
            }
        }
    }
    if unknown > 0 {
        log::warn!("stage 1: {unknown} reviews reference unknown apps");
    }
    let out = advance(corpus, kept, Stage::S1);
    let mut report = StageReport::new(Stage::S1, input, &out);
    report.unknown_app = unknown;
    report.excluded_app = excluded;
    Ok((out, report))
}

/// Drops reviews of three words or fewer.
pub fn stage2_short(corpus: Corpus) -> Result<(Corpus, StageReport)> {
    expect_stage(&corpus, Stage::S1)?;
    let input = corpus.reviews.len();
    let kept: Vec<Review> = corpus
        .reviews
        .iter()
        .filter(|r| token_count(&r.content) >= MIN_TOKENS)
        .cloned()
        .collect();
    let out = advance(corpus, kept, Stage::S2);
    let report = StageReport::new(Stage::S2, input, &out);
    Ok((out, report))
}

/// LLM informativeness filter. Undecided reviews are kept and counted.
pub fn stage3_informative(corpus: Corpus, gate: &Gateway, template: &PromptTemplate) -> Result<(Corpus, StageReport, InformativeOutcome)> {
    expect_stage(&corpus, Stage::S2)?;
    let input = corpus.reviews.len();
    let items: Vec<(String, String)> = corpus
        .reviews
        .iter()
        .map(|r| (r.review_id.clone(), r.content.clone()))
        .collect();
    let outcome = classify_informative(&items, gate, template)?;
    let kept: Vec<Review> = corpus
        .reviews
        .iter()
        .filter(|r| outcome.labels.get(&r.review_id) != Some(&Informativeness::NonInformative))
        .cloned()
        .collect();
    let undecided = outcome.undecided();
    if undecided > 0 {
        log::warn!("stage 3: {undecided} reviews left undecided and retained");
    }
    let out = advance(corpus, kept, Stage::S3);
    let mut report = StageReport::new(Stage::S3, input, &out);
    report.undecided = undecided;
    Ok((out, report, outcome))
}

/// Drops every category with strictly fewer than `min_reviews` reviews.
pub fn category_threshold_filter(corpus: Corpus, min_reviews: usize) -> Result<(Corpus, StageReport)> {
    expect_stage(&corpus, Stage::S3)?;
    let input = corpus.reviews.len();
    let counts = corpus.counts_by_category();
    let dropped: Vec<String> = counts
        .iter()
        .filter(|(_, n)| **n < min_reviews)
        .map(|(c, _)| c.clone())
        .collect();
    let kept: Vec<Review> = corpus
        .reviews
        .iter()
        .filter(|r| !dropped.iter().any(|c| c == corpus.category_of(&r.app_id)))
        .cloned()
        .collect();
    let out = advance(corpus, kept, Stage::S3);
    let mut report = StageReport::new(Stage::S3, input, &out);
    report.dropped_categories = dropped;
    Ok((out, report))
}

/// Writes `review_id,label` rows in id order.
pub fn write_informative_labels(path: &Path, labels: &BTreeMap<String, Informativeness>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["review_id", "label"])?;
    for (id, label) in labels {
        w.write_record([id.as_str(), label.as_str()])?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    pub corpus: Corpus,
    pub reports: Vec<StageReport>,
    pub informative: Option<InformativeOutcome>,
}

/// Runs stages from the corpus's current stage up to and including `to`.
pub fn run_cascade(mut corpus: Corpus, to: Stage, gate: Option<&Gateway>, filter: Option<&PromptTemplate>) -> Result<CascadeResult> {
    let mut reports = Vec::new();
    let mut informative = None;
    while corpus.stage < to {
        let (next, report) = match corpus.stage {
            Stage::Raw => stage0(corpus)?,
            Stage::S0 => stage1_temporal(corpus)?,
            Stage::S1 => stage2_short(corpus)?,
            Stage::S2 => {
                let (Some(gate), Some(tpl)) = (gate, filter) else {
                    return Err(CoreError::Invalid("stage 3 needs a gateway and a filter prompt".into()));
                };
                let (c, r, o) = stage3_informative(corpus, gate, tpl)?;
                informative = Some(o);
                (c, r)
            }
            Stage::S3 => unreachable!("loop stops at s3"),
        };
        corpus = next;
        reports.push(report);
    }
    Ok(CascadeResult {
        corpus,
        reports,
        informative,
    })
}
