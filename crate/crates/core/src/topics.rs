//! Topic extraction, closed-set assignment, Gen-AI classification and accuracy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Utc};
use sara_stats::{bonferroni, kruskal_wallis, mann_whitney_u, one_way_anova, Mode, StatTestResult};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CoreError, Result};
use crate::llmgate::{render_prompt, Example, Gateway, LabelingOutcome, PromptInputs, PromptKind, PromptTemplate, OTHER};
use crate::model::{Corpus, Platform, Stage};

pub const TOPICS_PER_CATEGORY: usize = 10;
pub const ASSIGN_EXAMPLES: usize = 5;

const REASK: &str = "\nReminder: the previous answer was rejected. Reply with exactly ten distinct topics, one per line, and nothing else.\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSet {
    pub category: String,
    pub stage: Stage,
    pub shots: u8,
    pub topics: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<Example>,
}

impl TopicSet {
    pub fn new(category: impl Into<String>, stage: Stage, shots: u8, topics: Vec<String>) -> Result<Self> {
        let category = category.into();
        check_topics(&topics).map_err(|reason| CoreError::Extraction {
            category: category.clone(),
            shots,
            reason,
        })?;
        Ok(Self {
            category,
            stage,
            shots,
            topics,
            examples: Vec::new(),
        })
    }

    /// The topics plus "Other".
    pub fn allowed_labels(&self) -> Vec<String> {
        let mut v = self.topics.clone();
        v.push(OTHER.into());
        v
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(io_err(path))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(io_err(path))?;
        let set: TopicSet = serde_json::from_str(&body)?;
        Self::new(set.category, set.stage, set.shots, set.topics).map(|s| TopicSet {
            examples: set.examples,
            ..s
        })
    }
}

fn check_topics(topics: &[String]) -> std::result::Result<(), String> {
    if topics.len() != TOPICS_PER_CATEGORY {
        return Err(format!("expected {TOPICS_PER_CATEGORY} topics, got {}", topics.len()));
    }
    let mut seen = BTreeSet::new();
    for t in topics {
        if t.trim().is_empty() {
            return Err("empty topic".into());
        }
        if t.eq_ignore_ascii_case(OTHER) {
            return Err("\"Other\" is reserved".into());
        }
        if !seen.insert(t.to_lowercase()) {
            return Err(format!("duplicate topic {t:?}"));
        }
    }
    Ok(())
}

/// One topic per non-empty line, with list markers and numbering stripped.
pub fn parse_topic_lines(raw: &str) -> Vec<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("```"))
        .map(|l| {
            let l = l.trim_start_matches(['-', '*', '•']).trim_start();
            let digits = l.bytes().take_while(u8::is_ascii_digit).count();
            let l = if digits > 0 { l[digits..].trim_start_matches(['.', ')', ':']).trim_start() } else { l };
            l.trim_matches('"').trim().to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

/// Asks for the top ten topics of a category. A malformed answer is re-asked once.
pub fn extract_topics(
    category: &str,
    stage: Stage,
    sample: &[(String, String)],
    template: &PromptTemplate,
    gate: &Gateway,
) -> Result<TopicSet> {
    if template.kind != PromptKind::Extract {
        return Err(CoreError::Prompt(format!("expected an extract template, got {}", template.kind)));
    }
    let fail = |reason: String| CoreError::Extraction {
        category: category.to_string(),
        shots: template.shots,
        reason,
    };
    let prompt = render_prompt(
        template,
        &PromptInputs {
            category_name: Some(category),
            reviews: sample,
            ..Default::default()
        },
    )?;
    let mut last = String::new();
    for attempt in [prompt.clone(), prompt + REASK] {
        let raw = gate.complete(&attempt).map_err(|e| fail(e.to_string()))?;
        let topics = parse_topic_lines(&raw);
        match check_topics(&topics) {
            Ok(()) => return TopicSet::new(category, stage, template.shots, topics),
            Err(reason) => {
                log::warn!("{category} ({}-shot): {reason}", template.shots);
                last = reason;
            }
        }
    }
    Err(fail(format!("malformed after re-ask: {last}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Llm,
    Gold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub review_id: String,
    pub topic: String,
    pub source: Source,
    /// Gateway gave up on this review and it defaulted to "Other".
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub undecided: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignOutcome {
    pub assignments: Vec<TopicAssignment>,
    pub hallucination_count: usize,
    pub labeling: LabelingOutcome,
}

impl AssignOutcome {
    pub fn undecided(&self) -> usize {
        self.assignments.iter().filter(|a| a.undecided).count()
    }
}

/// Labels each review with one topic of `set` or "Other", in input order.
pub fn assign_topics(
    reviews: &[(String, String)],
    set: &TopicSet,
    examples: &[Example],
    template: &PromptTemplate,
    gate: &Gateway,
) -> Result<AssignOutcome> {
    if template.kind != PromptKind::Assign {
        return Err(CoreError::Prompt(format!("expected an assign template, got {}", template.kind)));
    }
    if examples.len() != ASSIGN_EXAMPLES {
        return Err(CoreError::Invalid(format!("need {ASSIGN_EXAMPLES} few-shot examples, got {}", examples.len())));
    }
    if let Some(e) = examples.iter().find(|e| !set.topics.contains(&e.label)) {
        return Err(CoreError::UnknownTopic(e.label.clone()));
    }
    let allowed = set.allowed_labels();
    let render = |batch: &[(String, String)]| {
        render_prompt(
            template,
            &PromptInputs {
                reviews: batch,
                topics: &set.topics,
                examples,
                ..Default::default()
            },
        )
    };
    let labeling = gate.label(reviews, &allowed, &render)?;
    let assignments = reviews
        .iter()
        .map(|(id, _)| match labeling.labels.get(id) {
            Some(t) => TopicAssignment {
                review_id: id.clone(),
                topic: t.clone(),
                source: Source::Llm,
                undecided: false,
            },
            None => TopicAssignment {
                review_id: id.clone(),
                topic: OTHER.into(),
                source: Source::Llm,
                undecided: !labeling.hallucinated.contains(id),
            },
        })
        .collect();
    Ok(AssignOutcome {
        assignments,
        hallucination_count: labeling.hallucinated.len(),
        labeling,
    })
}

#[derive(Debug, Deserialize, Serialize)]
struct AssignmentRow {
    review_id: String,
    topic: String,
}

pub fn read_assignments_csv(path: &Path, source: Source) -> Result<Vec<TopicAssignment>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<AssignmentRow>()
        .map(|row| {
            let row = row?;
            Ok(TopicAssignment {
                review_id: row.review_id,
                topic: row.topic,
                source,
                undecided: false,
            })
        })
        .collect()
}

pub fn write_assignments_csv(path: &Path, assignments: &[TopicAssignment]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for a in assignments {
        w.serialize(AssignmentRow {
            review_id: a.review_id.clone(),
            topic: a.topic.clone(),
        })?;
    }
    w.flush().map_err(io_err(path))
}

fn is_other(t: &str) -> bool {
    t.eq_ignore_ascii_case(OTHER)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n: usize,
    pub correct: usize,
    pub overall: f64,
    pub n_informative: usize,
    /// `None` when no item is flagged informative.
    pub informative_only: Option<f64>,
    pub wrong_topic: f64,
    pub missed: f64,
    pub over_assigned: f64,
    pub wrong_topic_count: usize,
    pub missed_count: usize,
    pub over_assigned_count: usize,
}

/// Scores assignments against gold labels. Every assignment id must have a gold label.
pub fn evaluate_accuracy(
    assignments: &[TopicAssignment],
    gold: &[TopicAssignment],
    informative: Option<&BTreeMap<String, bool>>,
) -> Result<AccuracyReport> {
    if assignments.is_empty() {
        return Err(CoreError::Invalid("no assignments to evaluate".into()));
    }
    let mut gold_by_id: HashMap<&str, &str> = HashMap::with_capacity(gold.len());
    for g in gold {
        if gold_by_id.insert(&g.review_id, &g.topic).is_some() {
            return Err(CoreError::IdMismatch(format!("gold labels {} twice", g.review_id)));
        }
    }
    let mut seen = BTreeSet::new();
    let (mut correct, mut wrong, mut missed, mut over) = (0, 0, 0, 0);
    let (mut n_inf, mut correct_inf) = (0, 0);
    for a in assignments {
        if !seen.insert(a.review_id.as_str()) {
            return Err(CoreError::IdMismatch(format!("{} assigned twice", a.review_id)));
        }
        let g = gold_by_id
            .get(a.review_id.as_str())
            .ok_or_else(|| CoreError::IdMismatch(format!("{} has no gold label", a.review_id)))?;
        let ok = match (is_other(g), is_other(&a.topic)) {
            (true, true) => true,
            (false, false) if *g == a.topic => true,
            (false, false) => {
                wrong += 1;
                false
            }
            (false, true) => {
                missed += 1;
                false
            }
            (true, false) => {
                over += 1;
                false
            }
        };
        correct += ok as usize;
        if informative.and_then(|f| f.get(&a.review_id)).copied().unwrap_or(false) {
            n_inf += 1;
            correct_inf += ok as usize;
        }
    }
    let n = assignments.len();
    let frac = |k: usize| k as f64 / n as f64;
    Ok(AccuracyReport {
        n,
        correct,
        overall: frac(correct),
        n_informative: n_inf,
        informative_only: (n_inf > 0).then(|| correct_inf as f64 / n_inf as f64),
        wrong_topic: frac(wrong),
        missed: frac(missed),
        over_assigned: frac(over),
        wrong_topic_count: wrong,
        missed_count: missed,
        over_assigned_count: over,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicClass {
    Genai,
    NonGenai,
}

impl TopicClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TopicClass::Genai => "genai",
            TopicClass::NonGenai => "non_genai",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicInfo {
    pub class: TopicClass,
    pub topic_category: String,
}

/// Analyst-authored map from extracted topic to class and topic category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassMap(pub BTreeMap<String, TopicInfo>);

impl ClassMap {
    pub fn read_json(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&body)?)
    }

    /// "Other" always maps to the non-Gen-AI "Other" bucket.
    pub fn lookup(&self, topic: &str) -> Result<TopicInfo> {
        if is_other(topic) {
            return Ok(TopicInfo {
                class: TopicClass::NonGenai,
                topic_category: OTHER.into(),
            });
        }
        self.0.get(topic).cloned().ok_or_else(|| CoreError::UnknownTopic(topic.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedAssignment {
    pub review_id: String,
    pub topic: String,
    pub class: TopicClass,
    pub topic_category: String,
}

pub fn classify_assignments(assignments: &[TopicAssignment], map: &ClassMap) -> Result<Vec<ClassifiedAssignment>> {
    assignments
        .iter()
        .map(|a| {
            let info = map.lookup(&a.topic)?;
            Ok(ClassifiedAssignment {
                review_id: a.review_id.clone(),
                topic: a.topic.clone(),
                class: info.class,
                topic_category: info.topic_category,
            })
        })
        .collect()
}

/// A classified review joined with the review and app fields the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedReview {
    pub review_id: String,
    pub app_id: String,
    pub app_category: String,
    pub platform: Platform,
    pub score: u8,
    pub at: DateTime<Utc>,
    pub replied_at: Option<DateTime<Utc>>,
    pub has_reply: bool,
    pub topic: String,
    pub class: TopicClass,
    pub topic_category: String,
}

impl ClassifiedReview {
    pub fn is_genai(&self) -> bool {
        self.class == TopicClass::Genai
    }

    pub fn reply_delay_days(&self) -> Option<f64> {
        let replied = self.replied_at?;
        Some(((replied - self.at).num_seconds() as f64 / 86_400.0).max(0.0))
    }
}

/// Joins classified assignments with their reviews. Every assignment must match a review.
pub fn join_classified(corpus: &Corpus, classified: &[ClassifiedAssignment]) -> Result<Vec<ClassifiedReview>> {
    let by_id: HashMap<&str, &crate::model::Review> = corpus.reviews.iter().map(|r| (r.review_id.as_str(), r)).collect();
    classified
        .iter()
        .map(|c| {
            let r = by_id
                .get(c.review_id.as_str())
                .ok_or_else(|| CoreError::IdMismatch(format!("{} not in corpus", c.review_id)))?;
            Ok(ClassifiedReview {
                review_id: r.review_id.clone(),
                app_id: r.app_id.clone(),
                app_category: corpus.category_of(&r.app_id).to_string(),
                platform: r.platform,
                score: r.score,
                at: r.at,
                replied_at: r.replied_at,
                has_reply: r.has_reply(),
                topic: c.topic.clone(),
                class: c.class,
                topic_category: c.topic_category.clone(),
            })
        })
        .collect()
}

/// One (stage, category, shots) experiment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub stage: Stage,
    pub category: String,
    pub shots: u8,
}

pub fn experiment_grid(stages: &[Stage], categories: &[&str], shots: &[u8]) -> Vec<ExperimentCell> {
    let mut out = Vec::with_capacity(stages.len() * categories.len() * shots.len());
    for &stage in stages {
        for &category in categories {
            for &s in shots {
                out.push(ExperimentCell {
                    stage,
                    category: category.into(),
                    shots: s,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Shots,
    Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: String,
    pub b: String,
    pub test: StatTestResult,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group_by: GroupBy,
    pub groups: Vec<String>,
    pub kruskal: StatTestResult,
    pub pairwise: Vec<PairwiseComparison>,
    pub anova: StatTestResult,
}

/// Kruskal-Wallis, Bonferroni-adjusted pairwise Mann-Whitney and one-way ANOVA
/// over per-cell accuracies grouped by shots or stage.
pub fn compare_experiments(cells: &[(ExperimentCell, f64)], group_by: GroupBy) -> Result<GroupComparison> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (cell, acc) in cells {
        let key = match group_by {
            GroupBy::Shots => format!("{}-shot", cell.shots),
            GroupBy::Stage => cell.stage.name().to_string(),
        };
        groups.entry(key).or_default().push(*acc);
    }
    if groups.len() < 2 {
        return Err(CoreError::Invalid("need at least two groups".into()));
    }
    let names: Vec<String> = groups.keys().cloned().collect();
    let slices: Vec<&[f64]> = groups.values().map(Vec::as_slice).collect();
    let kruskal = kruskal_wallis(&slices)?;
    let anova = one_way_anova(&slices)?;
    let mut tests = Vec::new();
    for i in 0..slices.len() {
        for j in i + 1..slices.len() {
            tests.push((i, j, mann_whitney_u(slices[i], slices[j], Mode::Auto)?));
        }
    }
    let adjusted = bonferroni(&tests.iter().map(|t| t.2.p()).collect::<Vec<_>>());
    let pairwise = tests
        .into_iter()
        .zip(adjusted)
        .map(|((i, j, test), p_adjusted)| PairwiseComparison {
            a: names[i].clone(),
            b: names[j].clone(),
            test,
            p_adjusted,
        })
        .collect();
    Ok(GroupComparison {
        group_by,
        groups: names,
        kruskal,
        pairwise,
        anova,
    })
}
