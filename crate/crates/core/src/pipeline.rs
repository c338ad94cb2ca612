//! End-to-end run: refinement, per-category topics, metrics and trends.
//!
//! Each step reads what earlier steps produced and writes its artifacts
//! under one run directory, so the CLI can run them one at a time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_reviews, partition_by_category, write_reviews};
use crate::error::{io_err, CoreError, Result};
use crate::io::{ensure_dir, write_csv, write_json, write_jsonl};
use crate::llmgate::{Example, GateStats, Gateway, PromptKind, PromptTemplate};
use crate::metrics::{
    category_summary, compare_agr_anr, per_app_agr_anr, per_app_reply_rates, reply_items_by_category,
    reply_items_by_topic_category, reply_rate_comparison, reply_stats, summary_average_row, topic_category_summary,
    AggregationMode,
};
use crate::model::{AppTable, Corpus, Platform, Stage, UNCATEGORIZED};
use crate::refine::{category_threshold_filter, run_cascade, write_informative_labels};
use crate::sampling::{derive_seed, draw_for_spec, Sample, SampleSpec};
use crate::topics::{
    assign_topics, classify_assignments, extract_topics, join_classified, write_assignments_csv, ClassMap,
    ClassifiedReview, TopicAssignment, TopicClass, TopicSet, ASSIGN_EXAMPLES,
};
use crate::trends::{
    build_time_series, clustering_input, elbow_curve, kmeans_cluster, yearly_class_means, yearly_paired_wilcoxon, SeriesKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub stage: Stage,
    pub shots: u8,
    /// Restrict topic work to these app categories; empty means all.
    pub categories: Vec<String>,
    pub min_category_reviews: usize,
    pub large_confidence: f64,
    pub large_margin: f64,
    pub small_confidence: f64,
    pub small_margin: f64,
    pub aggregation: AggregationMode,
    pub k: usize,
    pub k_max: usize,
    pub normalize: bool,
    pub series: SeriesKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            stage: Stage::S3,
            shots: 3,
            categories: Vec::new(),
            min_category_reviews: crate::refine::DEFAULT_MIN_CATEGORY_REVIEWS,
            large_confidence: 0.95,
            large_margin: 0.02,
            small_confidence: 0.95,
            small_margin: 0.10,
            aggregation: AggregationMode::AppLevelMean,
            k: 3,
            k_max: 8,
            normalize: false,
            series: SeriesKind::Avg,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.shots, 0 | 3 | 5) {
            return Err(CoreError::Invalid(format!("shots must be 0, 3 or 5, got {}", self.shots)));
        }
        SampleSpec::new(1, self.large_confidence, self.large_margin).validate()?;
        SampleSpec::new(1, self.small_confidence, self.small_margin).validate()?;
        if self.k == 0 || self.k_max == 0 {
            return Err(CoreError::Invalid("k and k_max must be at least 1".into()));
        }
        if self.stage == Stage::Raw {
            return Err(CoreError::Invalid("target stage must be s0 or later".into()));
        }
        Ok(())
    }
}

/// Collects artifact paths relative to the run directory.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Artifacts {
    pub fn new(root: &Path) -> Result<Self> {
        ensure_dir(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `rel`, creating parents and recording it as written.
    pub fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(d) = p.parent() {
            ensure_dir(d)?;
        }
        self.written.push(PathBuf::from(rel));
        Ok(p)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn soft<T>(&mut self, r: Result<T>, what: &str) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.warnings.push(format!("{what}: {e}"));
                None
            }
        }
    }
}

pub fn slug(s: &str) -> String {
    let raw: String = s.to_lowercase().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    raw.split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

/// Where the analysis corpus (after the category threshold) is stored.
pub const ANALYSIS_CORPUS: &str = "stages/analysis.jsonl";
pub const ANALYSIS_META: &str = "stages/analysis.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AnalysisMeta {
    stage: Stage,
    reviews: usize,
}

/// Reloads the corpus a previous refine step left in `run_dir`.
pub fn load_analysis_corpus(run_dir: &Path, apps: AppTable, platform: Platform) -> Result<Corpus> {
    let meta_path = run_dir.join(ANALYSIS_META);
    let body = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: AnalysisMeta = serde_json::from_str(&body)?;
    let (mut corpus, report) = load_reviews(&run_dir.join(ANALYSIS_CORPUS), platform)?;
    if !report.rejects.is_empty() || corpus.reviews.len() != meta.reviews {
        return Err(CoreError::Invalid(format!("{} does not match {}", ANALYSIS_CORPUS, ANALYSIS_META)));
    }
    corpus.apps = apps;
    corpus.stage = meta.stage;
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub corpus: Corpus,
    pub stage_counts: Vec<(Stage, usize)>,
    pub dropped_categories: Vec<String>,
    pub undecided_informative: usize,
}

/// Runs the cascade to `cfg.stage`. At stage 3 small categories are then dropped.
pub fn refine_step(corpus: Corpus, gate: Option<&Gateway>, prompts_dir: Option<&Path>, cfg: &PipelineConfig, art: &mut Artifacts) -> Result<RefineOutcome> {
    let filter = PromptTemplate::load(prompts_dir, PromptKind::Filter, 0)?;
    let mut stage_counts = vec![(corpus.stage, corpus.reviews.len())];
    let cascade = run_cascade(corpus, cfg.stage, gate, Some(&filter))?;
    for r in &cascade.reports {
        let stage = r.stage.expect("cascade reports carry their stage");
        stage_counts.push((stage, r.output_count));
        r.write_json(&art.path(&format!("stages/report_{stage}.json"))?)?;
    }
    let undecided_informative = cascade.informative.as_ref().map_or(0, |o| o.undecided());
    if let Some(o) = &cascade.informative {
        write_informative_labels(&art.path("stages/informative_labels.csv")?, &o.labels)?;
        if undecided_informative > 0 {
            art.warnings.push(format!("{undecided_informative} reviews left undecided by the informativeness filter"));
        }
    }
    let mut corpus = cascade.corpus;
    write_reviews(&art.path(&format!("stages/{}.jsonl", corpus.stage))?, &corpus.reviews)?;
    let mut dropped_categories = Vec::new();
    if corpus.stage == Stage::S3 {
        let (c, report) = category_threshold_filter(corpus, cfg.min_category_reviews)?;
        report.write_json(&art.path("stages/report_threshold.json")?)?;
        dropped_categories = report.dropped_categories;
        corpus = c;
    }
    write_reviews(&art.path(ANALYSIS_CORPUS)?, &corpus.reviews)?;
    write_json(
        &art.path(ANALYSIS_META)?,
        &AnalysisMeta {
            stage: corpus.stage,
            reviews: corpus.reviews.len(),
        },
    )?;
    Ok(RefineOutcome {
        corpus,
        stage_counts,
        dropped_categories,
        undecided_informative,
    })
}

/// App categories to analyze, honoring the category filter.
pub fn selected_categories(corpus: &Corpus, cfg: &PipelineConfig) -> Vec<String> {
    corpus
        .counts_by_category()
        .into_keys()
        .filter(|c| c != UNCATEGORIZED)
        .filter(|c| cfg.categories.is_empty() || cfg.categories.contains(c))
        .collect()
}

fn items_by_category(corpus: &Corpus) -> BTreeMap<String, Vec<(String, String)>> {
    partition_by_category(corpus)
        .into_iter()
        .map(|(c, rs)| (c, rs.iter().map(|r| (r.review_id.clone(), r.content.clone())).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategorySamples {
    pub large: Sample,
    pub small: Sample,
}

/// Draws the large (extraction) and small (evaluation) sample of each category.
pub fn sample_step(corpus: &Corpus, cfg: &PipelineConfig, art: &mut Artifacts) -> Result<BTreeMap<String, CategorySamples>> {
    let items = items_by_category(corpus);
    let mut out = BTreeMap::new();
    for cat in selected_categories(corpus, cfg) {
        let ids: Vec<String> = items[&cat].iter().map(|(id, _)| id.clone()).collect();
        let n = ids.len() as u64;
        let large = draw_for_spec(&ids, SampleSpec::new(n, cfg.large_confidence, cfg.large_margin), derive_seed(cfg.seed, &format!("large:{cat}")))?;
        let small = draw_for_spec(&ids, SampleSpec::new(n, cfg.small_confidence, cfg.small_margin), derive_seed(cfg.seed, &format!("small:{cat}")))?;
        large.write_json(&art.path(&format!("samples/{}_large.json", slug(&cat)))?)?;
        small.write_json(&art.path(&format!("samples/{}_small.json", slug(&cat)))?)?;
        out.insert(cat, CategorySamples { large, small });
    }
    Ok(out)
}

/// Extracts ten topics per category from its large sample.
pub fn extract_step(
    corpus: &Corpus,
    samples: &BTreeMap<String, Sample>,
    gate: &Gateway,
    prompts_dir: Option<&Path>,
    cfg: &PipelineConfig,
    art: &mut Artifacts,
) -> Result<BTreeMap<String, TopicSet>> {
    let template = PromptTemplate::load(prompts_dir, PromptKind::Extract, cfg.shots)?;
    let text: BTreeMap<&str, &str> = corpus.reviews.iter().map(|r| (r.review_id.as_str(), r.content.as_str())).collect();
    let mut out = BTreeMap::new();
    for (cat, sample) in samples {
        let items = sample
            .review_ids
            .iter()
            .map(|id| {
                let t = text.get(id.as_str()).ok_or_else(|| CoreError::IdMismatch(format!("sampled review {id} not in corpus")))?;
                Ok((id.clone(), t.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let set = extract_topics(cat, corpus.stage, &items, &template, gate)?;
        set.write_json(&art.path(&format!("topics/{}.json", slug(cat)))?)?;
        out.insert(cat.clone(), set);
    }
    Ok(out)
}

/// Stand-in assignment examples: one short line per topic. Used only when
/// the analyst supplies none for a category.
pub fn placeholder_examples(set: &TopicSet) -> Vec<Example> {
    set.topics
        .iter()
        .take(ASSIGN_EXAMPLES)
        .map(|t| Example {
            text: format!("a review about {}", t.to_lowercase()),
            label: t.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignStep {
    pub assignments: Vec<TopicAssignment>,
    pub undecided: usize,
    pub hallucinated: usize,
    pub placeholder_examples: Vec<String>,
}

/// Assigns every review of each category to one of its topics or "Other".
pub fn assign_step(
    corpus: &Corpus,
    sets: &BTreeMap<String, TopicSet>,
    examples: &BTreeMap<String, Vec<Example>>,
    gate: &Gateway,
    prompts_dir: Option<&Path>,
    art: &mut Artifacts,
) -> Result<AssignStep> {
    let template = PromptTemplate::load(prompts_dir, PromptKind::Assign, 0)?;
    let items = items_by_category(corpus);
    let mut step = AssignStep {
        assignments: Vec::new(),
        undecided: 0,
        hallucinated: 0,
        placeholder_examples: Vec::new(),
    };
    for (cat, set) in sets {
        let Some(reviews) = items.get(cat) else {
            art.warnings.push(format!("no reviews for category {cat}"));
            continue;
        };
        let ex = match examples.get(cat) {
            Some(e) => e.clone(),
            None => {
                step.placeholder_examples.push(cat.clone());
                placeholder_examples(set)
            }
        };
        let outcome = assign_topics(reviews, set, &ex, &template, gate)?;
        step.undecided += outcome.undecided();
        step.hallucinated += outcome.hallucination_count;
        step.assignments.extend(outcome.assignments);
    }
    if !step.placeholder_examples.is_empty() {
        art.warnings
            .push(format!("placeholder assignment examples used for: {}", step.placeholder_examples.join(", ")));
    }
    if step.undecided > 0 {
        art.warnings.push(format!("{} reviews left undecided by topic assignment", step.undecided));
    }
    write_assignments_csv(&art.path("assignments.csv")?, &step.assignments)?;
    Ok(step)
}

pub fn classify_step(corpus: &Corpus, assignments: &[TopicAssignment], class_map: &ClassMap, art: &mut Artifacts) -> Result<Vec<ClassifiedReview>> {
    let classified = classify_assignments(assignments, class_map)?;
    let rows = join_classified(corpus, &classified)?;
    write_jsonl(&art.path("classified.jsonl")?, &rows)?;
    Ok(rows)
}

/// Category table, topic-category table, reply statistics and their tests.
pub fn metrics_step(rows: &[ClassifiedReview], corpus: &Corpus, cfg: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let summary = category_summary(rows, cfg.aggregation);
    write_csv(&art.path("metrics/category_summary.csv")?, &summary)?;
    if let Some(avg) = art.soft(summary_average_row(&summary), "average row") {
        write_json(&art.path("metrics/average_row.json")?, &serde_json::json!({"values": avg, "display": avg.display()}))?;
    }
    if let Some(t) = art.soft(compare_agr_anr(&per_app_agr_anr(rows)), "AGR vs ANR test") {
        write_json(&art.path("metrics/agr_anr_test.json")?, &t)?;
    }
    write_csv(&art.path("metrics/topic_categories.csv")?, &topic_category_summary(rows))?;
    if let Some(r) = art.soft(reply_stats(&reply_items_by_category(corpus)), "replies by app category") {
        write_json(&art.path("metrics/replies_by_category.json")?, &r)?;
    }
    let by_topic = reply_items_by_topic_category(rows, Some(TopicClass::Genai));
    if let Some(r) = art.soft(reply_stats(&by_topic), "replies by topic category") {
        write_json(&art.path("metrics/replies_by_topic_category.json")?, &r)?;
    }
    if let Some(r) = art.soft(reply_rate_comparison(&per_app_reply_rates(rows)), "reply rate comparison") {
        write_json(&art.path("metrics/reply_rate_comparison.json")?, &r)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ElbowRow {
    k: usize,
    inertia: f64,
}

/// Yearly series, the yearly paired test, the elbow curve and the clustering.
pub fn trends_step(rows: &[ClassifiedReview], cfg: &PipelineConfig, art: &mut Artifacts) -> Result<()> {
    let series = build_time_series(rows);
    write_json(&art.path("trends/trends.json")?, &series)?;
    let yearly = yearly_class_means(rows, cfg.aggregation);
    write_json(&art.path("trends/yearly_means.json")?, &yearly)?;
    if let Some(t) = art.soft(yearly_paired_wilcoxon(&yearly.genai, &yearly.non_genai), "yearly paired test") {
        write_json(&art.path("trends/yearly_test.json")?, &t)?;
    }
    if series.is_empty() {
        art.warnings.push("no Gen-AI topic categories to cluster".into());
        return Ok(());
    }
    let Some(input) = art.soft(clustering_input(&series, cfg.series, cfg.normalize), "clustering input") else {
        return Ok(());
    };
    let n = input.vectors.len();
    let seed = derive_seed(cfg.seed, "clustering");
    let elbow = elbow_curve(&input.vectors, cfg.k_max.min(n), seed)?;
    let elbow_rows: Vec<ElbowRow> = elbow.points.iter().map(|p| ElbowRow { k: p.k, inertia: p.inertia }).collect();
    write_csv(&art.path("trends/elbow.csv")?, &elbow_rows)?;
    let k = cfg.k.min(n);
    if k < cfg.k {
        art.warnings.push(format!("k lowered from {} to {k}: only {n} series", cfg.k));
    }
    let clusters = kmeans_cluster(&input.vectors, k, seed)?;
    write_json(
        &art.path("trends/clusters.json")?,
        &serde_json::json!({
            "series": cfg.series,
            "normalized": input.normalized,
            "window": input.window,
            "k": clusters.k,
            "method": clusters.method,
            "inertia": clusters.inertia,
            "assignment": clusters.named(&input.names),
            "knee": elbow.knee,
        }),
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub stage_counts: Vec<(Stage, usize)>,
    pub categories: Vec<String>,
    pub dropped_categories: Vec<String>,
    pub assignments: usize,
    pub undecided_informative: usize,
    pub undecided_assignments: usize,
    pub placeholder_examples: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub gate: GateStats,
}

/// Runs every step and writes the artifacts under `out_dir`.
pub fn run_pipeline(
    corpus: Corpus,
    gate: &Gateway,
    class_map: &ClassMap,
    examples: &BTreeMap<String, Vec<Example>>,
    prompts_dir: Option<&Path>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<PipelineSummary> {
    cfg.validate()?;
    let mut art = Artifacts::new(out_dir)?;
    let refined = refine_step(corpus, Some(gate), prompts_dir, cfg, &mut art)?;
    let corpus = refined.corpus;
    let samples = sample_step(&corpus, cfg, &mut art)?;
    let large: BTreeMap<String, Sample> = samples.into_iter().map(|(c, s)| (c, s.large)).collect();
    let sets = extract_step(&corpus, &large, gate, prompts_dir, cfg, &mut art)?;
    let assigned = assign_step(&corpus, &sets, examples, gate, prompts_dir, &mut art)?;
    let rows = classify_step(&corpus, &assigned.assignments, class_map, &mut art)?;
    metrics_step(&rows, &corpus, cfg, &mut art)?;
    trends_step(&rows, cfg, &mut art)?;
    Ok(PipelineSummary {
        stage_counts: refined.stage_counts,
        categories: sets.into_keys().collect(),
        dropped_categories: refined.dropped_categories,
        assignments: assigned.assignments.len(),
        undecided_informative: refined.undecided_informative,
        undecided_assignments: assigned.undecided,
        placeholder_examples: assigned.placeholder_examples,
        outputs: art.written,
        warnings: art.warnings,
        gate: gate.stats(),
    })
}
