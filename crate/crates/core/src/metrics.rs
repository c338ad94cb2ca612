//! Rating buckets, per-category Gen-AI summaries, platform comparison and
//! developer-reply analytics.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use sara_stats::wilcoxon::EXACT_MAX_N;
use sara_stats::{mann_whitney_u, wilcoxon_signed_rank, Mode, StatTestResult};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::Corpus;
use crate::topics::{ClassifiedReview, TopicClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingBucket {
    Negative,
    Neutral,
    Positive,
}

pub fn rating_bucket(score: u8) -> Result<RatingBucket> {
    match score {
        1 | 2 => Ok(RatingBucket::Negative),
        3 => Ok(RatingBucket::Neutral),
        4 | 5 => Ok(RatingBucket::Positive),
        _ => Err(CoreError::Invalid(format!("score {score} outside 1-5"))),
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Paired signed-rank test; small samples use the exact null even when |d| ties.
pub fn paired_wilcoxon(x: &[f64], y: &[f64]) -> Result<StatTestResult> {
    let nonzero = x.iter().zip(y).filter(|(a, b)| a != b).count();
    let mode = if nonzero <= EXACT_MAX_N { Mode::Exact } else { Mode::Auto };
    Ok(wilcoxon_signed_rank(x, y, mode)?)
}

/// Half-up rounding to `decimals` places. A tiny nudge absorbs binary
/// representation error so 4.25 shows as 4.3.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let m = 10f64.powi(decimals as i32);
    ((x * m) + 0.5 + 1e-9).floor() / m
}

pub fn fmt_fixed(x: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, round_half_up(x, decimals))
}

pub fn fmt_thousands(x: f64) -> String {
    let n = round_half_up(x, 0) as i64;
    let digits = n.unsigned_abs().to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    if n < 0 {
        out.insert(0, '-');
    }
    out
}

/// Fraction shown as a whole percentage.
pub fn fmt_percent(frac: f64, decimals: u32) -> String {
    format!("{}%", fmt_fixed(frac * 100.0, decimals))
}

fn fmt_opt(x: Option<f64>, decimals: u32) -> String {
    x.map(|v| fmt_fixed(v, decimals)).unwrap_or_else(|| "null".into())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    #[default]
    ReviewLevel,
    AppLevelMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: String,
    /// `None` when the category has no Gen-AI reviews.
    pub agr: Option<f64>,
    pub anr: Option<f64>,
    pub grc: u64,
    pub nrc: u64,
    pub grp: f64,
    pub nrp: f64,
    pub n_genai_topics: usize,
    pub mode: AggregationMode,
}

fn app_level(rows: &[&ClassifiedReview], class: TopicClass) -> Option<f64> {
    let mut per_app: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.class == class) {
        per_app.entry(&r.app_id).or_default().push(r.score as f64);
    }
    let means: Vec<f64> = per_app.values().filter_map(|v| mean(v)).collect();
    mean(&means)
}

fn class_mean(rows: &[&ClassifiedReview], class: TopicClass) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter(|r| r.class == class).map(|r| r.score as f64).collect();
    mean(&v)
}

/// AGR, ANR, GRC, NRC, GRP and the distinct Gen-AI topic count per app category.
pub fn category_summary(rows: &[ClassifiedReview], mode: AggregationMode) -> Vec<CategorySummary> {
    let mut by_cat: BTreeMap<&str, Vec<&ClassifiedReview>> = BTreeMap::new();
    for r in rows {
        by_cat.entry(&r.app_category).or_default().push(r);
    }
    by_cat
        .into_iter()
        .map(|(cat, rs)| {
            let grc = rs.iter().filter(|r| r.is_genai()).count() as u64;
            let nrc = rs.len() as u64 - grc;
            let avg = |class| match mode {
                AggregationMode::ReviewLevel => class_mean(&rs, class),
                AggregationMode::AppLevelMean => app_level(&rs, class),
            };
            let topics: BTreeSet<&str> = rs.iter().filter(|r| r.is_genai()).map(|r| r.topic.as_str()).collect();
            let grp = grc as f64 / (grc + nrc) as f64;
            CategorySummary {
                category: cat.to_string(),
                agr: avg(TopicClass::Genai),
                anr: avg(TopicClass::NonGenai),
                grc,
                nrc,
                grp,
                nrp: 1.0 - grp,
                n_genai_topics: topics.len(),
                mode,
            }
        })
        .collect()
}

/// Unweighted column means across category rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub agr: Option<f64>,
    pub anr: Option<f64>,
    pub grc: f64,
    pub nrc: f64,
    pub grp: f64,
    pub nrp: f64,
    pub n_genai_topics: f64,
    pub n_categories: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AverageDisplay {
    pub agr: String,
    pub anr: String,
    pub grc: String,
    pub grp: String,
    pub n_genai_topics: String,
}

impl AverageRow {
    pub fn display(&self) -> AverageDisplay {
        AverageDisplay {
            agr: fmt_opt(self.agr, 1),
            anr: fmt_opt(self.anr, 1),
            grc: fmt_thousands(self.grc),
            grp: fmt_percent(self.grp, 0),
            n_genai_topics: fmt_fixed(self.n_genai_topics, 0),
        }
    }
}

pub fn summary_average_row(rows: &[CategorySummary]) -> Result<AverageRow> {
    if rows.is_empty() {
        return Err(CoreError::Invalid("no category rows to average".into()));
    }
    let col = |f: &dyn Fn(&CategorySummary) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>()).unwrap_or(0.0);
    let defined = |f: &dyn Fn(&CategorySummary) -> Option<f64>| mean(&rows.iter().filter_map(f).collect::<Vec<_>>());
    Ok(AverageRow {
        agr: defined(&|r| r.agr),
        anr: defined(&|r| r.anr),
        grc: col(&|r| r.grc as f64),
        nrc: col(&|r| r.nrc as f64),
        grp: col(&|r| r.grp),
        nrp: col(&|r| r.nrp),
        n_genai_topics: col(&|r| r.n_genai_topics as f64),
        n_categories: rows.len(),
    })
}

#[derive(Debug, Deserialize)]
struct PublishedCategoryRow {
    category: String,
    agr: f64,
    anr: f64,
    grc: u64,
    grp_percent: f64,
    n_genai_topics: usize,
    total_reviews: u64,
}

/// Reads `category,agr,anr,grc,grp_percent,n_genai_topics,total_reviews` rows.
/// GRP is taken as printed, so it can differ from grc/total by rounding.
pub fn parse_category_table(csv_text: &str) -> Result<Vec<CategorySummary>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    r.deserialize::<PublishedCategoryRow>()
        .map(|row| {
            let row = row?;
            if row.grc > row.total_reviews {
                return Err(CoreError::Invalid(format!("{}: grc exceeds total", row.category)));
            }
            let grp = row.grp_percent / 100.0;
            Ok(CategorySummary {
                category: row.category,
                agr: Some(row.agr),
                anr: Some(row.anr),
                grc: row.grc,
                nrc: row.total_reviews - row.grc,
                grp,
                nrp: 1.0 - grp,
                n_genai_topics: row.n_genai_topics,
                mode: AggregationMode::ReviewLevel,
            })
        })
        .collect()
}

pub const TABLE2_FIXTURE: &str = include_str!("../fixtures/table2.csv");
pub const TABLE9_FIXTURE: &str = include_str!("../fixtures/table9.csv");
pub const TABLE10_FIXTURE: &str = include_str!("../fixtures/table10.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppRatingPair {
    pub app_id: String,
    pub agr: f64,
    pub anr: f64,
}

/// Per-app AGR and ANR, for apps with both classes present.
pub fn per_app_agr_anr(rows: &[ClassifiedReview]) -> Vec<AppRatingPair> {
    let mut by_app: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let e = by_app.entry(&r.app_id).or_default();
        if r.is_genai() { &mut e.0 } else { &mut e.1 }.push(r.score as f64);
    }
    by_app
        .into_iter()
        .filter_map(|(app, (g, n))| {
            Some(AppRatingPair {
                app_id: app.to_string(),
                agr: mean(&g)?,
                anr: mean(&n)?,
            })
        })
        .collect()
}

pub fn compare_agr_anr(pairs: &[AppRatingPair]) -> Result<StatTestResult> {
    if pairs.is_empty() {
        return Err(CoreError::Invalid("no app has both Gen-AI and non-Gen-AI reviews".into()));
    }
    let agr: Vec<f64> = pairs.iter().map(|p| p.agr).collect();
    let anr: Vec<f64> = pairs.iter().map(|p| p.anr).collect();
    paired_wilcoxon(&agr, &anr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCategoryRow {
    pub class: TopicClass,
    pub topic_category: String,
    pub review_count: u64,
    /// Share of all classified reviews passed in.
    pub share: f64,
    pub avg_rating: f64,
    pub n_apps: usize,
    pub n_app_categories: usize,
}

/// Per topic category counts and ratings, ordered by count then name.
pub fn topic_category_summary(rows: &[ClassifiedReview]) -> Vec<TopicCategoryRow> {
    type Acc<'a> = (u64, f64, BTreeSet<&'a str>, BTreeSet<&'a str>);
    let mut acc: BTreeMap<(TopicClass, &str), Acc<'_>> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.class, r.topic_category.as_str())).or_default();
        e.0 += 1;
        e.1 += r.score as f64;
        e.2.insert(&r.app_id);
        e.3.insert(&r.app_category);
    }
    let total = rows.len() as f64;
    let mut out: Vec<TopicCategoryRow> = acc
        .into_iter()
        .map(|((class, tc), (n, sum, apps, cats))| TopicCategoryRow {
            class,
            topic_category: tc.to_string(),
            review_count: n,
            share: n as f64 / total,
            avg_rating: sum / n as f64,
            n_apps: apps.len(),
            n_app_categories: cats.len(),
        })
        .collect();
    out.sort_by(|a, b| b.review_count.cmp(&a.review_count).then_with(|| a.topic_category.cmp(&b.topic_category)));
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareDenominator {
    /// Every classified review on the platform.
    #[default]
    AllClassified,
    /// Only the platform's Gen-AI reviews.
    Genai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSide {
    pub count: u64,
    pub share: f64,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformRow {
    pub topic_category: String,
    pub gps: Option<PlatformSide>,
    pub astore: Option<PlatformSide>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryOverlap {
    pub app_category: String,
    pub shared: usize,
    pub gps_topic_categories: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformComparison {
    pub denominator: ShareDenominator,
    pub gps_denominator: u64,
    pub astore_denominator: u64,
    pub rows: Vec<PlatformRow>,
    pub overlap: Vec<CategoryOverlap>,
    pub overlap_mean: Option<f64>,
    pub overlap_min: Option<f64>,
    pub overlap_max: Option<f64>,
}

/// One platform's Gen-AI topic-category counts and ratings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlatformTally {
    pub denominator: u64,
    /// topic_category -> (count, mean rating)
    pub topic_categories: BTreeMap<String, (u64, f64)>,
    /// app category -> Gen-AI topic categories seen there
    pub by_app_category: BTreeMap<String, BTreeSet<String>>,
}

pub fn platform_tally(rows: &[ClassifiedReview], denominator: ShareDenominator) -> PlatformTally {
    let mut t = PlatformTally::default();
    let mut sums: BTreeMap<&str, (u64, f64)> = BTreeMap::new();
    for r in rows {
        if !r.is_genai() {
            continue;
        }
        let e = sums.entry(&r.topic_category).or_default();
        e.0 += 1;
        e.1 += r.score as f64;
        t.by_app_category
            .entry(r.app_category.clone())
            .or_default()
            .insert(r.topic_category.clone());
    }
    let genai: u64 = sums.values().map(|v| v.0).sum();
    t.denominator = match denominator {
        ShareDenominator::AllClassified => rows.len() as u64,
        ShareDenominator::Genai => genai,
    };
    t.topic_categories = sums.into_iter().map(|(k, (n, s))| (k.to_string(), (n, s / n as f64))).collect();
    t
}

/// Aligns Gen-AI topic categories across platforms. Overlap for an app
/// category is |shared| / |GPS topic categories|.
pub fn platform_comparison(gps: &PlatformTally, astore: &PlatformTally, denominator: ShareDenominator) -> PlatformComparison {
    let side = |t: &PlatformTally, tc: &str| {
        t.topic_categories.get(tc).map(|&(count, rating)| PlatformSide {
            count,
            share: if t.denominator == 0 { 0.0 } else { count as f64 / t.denominator as f64 },
            rating,
        })
    };
    let names: BTreeSet<&String> = gps.topic_categories.keys().chain(astore.topic_categories.keys()).collect();
    let mut rows: Vec<PlatformRow> = names
        .into_iter()
        .map(|tc| PlatformRow {
            topic_category: tc.clone(),
            gps: side(gps, tc),
            astore: side(astore, tc),
        })
        .collect();
    let key = |r: &PlatformRow| r.astore.as_ref().map_or(0, |s| s.count).max(r.gps.as_ref().map_or(0, |s| s.count));
    rows.sort_by(|a, b| key(b).cmp(&key(a)).then_with(|| a.topic_category.cmp(&b.topic_category)));

    let overlap: Vec<CategoryOverlap> = gps
        .by_app_category
        .iter()
        .filter(|(_, g)| !g.is_empty())
        .map(|(cat, g)| {
            let a = astore.by_app_category.get(cat);
            let shared = a.map_or(0, |a| g.intersection(a).count());
            CategoryOverlap {
                app_category: cat.clone(),
                shared,
                gps_topic_categories: g.len(),
                overlap: shared as f64 / g.len() as f64,
            }
        })
        .collect();
    let fr: Vec<f64> = overlap.iter().map(|o| o.overlap).collect();
    PlatformComparison {
        denominator,
        gps_denominator: gps.denominator,
        astore_denominator: astore.denominator,
        rows,
        overlap_mean: mean(&fr),
        overlap_min: fr.iter().copied().reduce(f64::min),
        overlap_max: fr.iter().copied().reduce(f64::max),
        overlap,
    }
}

/// Minimal review view for reply statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplyItem {
    pub group: String,
    pub at: DateTime<Utc>,
    pub replied_at: Option<DateTime<Utc>>,
    pub has_reply: bool,
}

impl ReplyItem {
    fn delay_days(&self) -> Option<f64> {
        let r = self.replied_at.filter(|_| self.has_reply)?;
        Some(((r - self.at).num_seconds() as f64 / 86_400.0).max(0.0))
    }
}

pub fn reply_items_by_category(corpus: &Corpus) -> Vec<ReplyItem> {
    corpus
        .reviews
        .iter()
        .map(|r| ReplyItem {
            group: corpus.category_of(&r.app_id).to_string(),
            at: r.at,
            replied_at: r.replied_at,
            has_reply: r.has_reply(),
        })
        .collect()
}

pub fn reply_items_by_topic_category(rows: &[ClassifiedReview], class: Option<TopicClass>) -> Vec<ReplyItem> {
    rows.iter()
        .filter(|r| class.is_none_or(|c| r.class == c))
        .map(|r| ReplyItem {
            group: r.topic_category.clone(),
            at: r.at,
            replied_at: r.replied_at,
            has_reply: r.has_reply,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplySummary {
    pub scope: String,
    pub total_reviews: u64,
    pub total_replies: u64,
    pub reply_ratio: f64,
    /// `None` when the group has no dated replies.
    pub avg_delay_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplyAggregate {
    pub total_reviews: u64,
    pub total_replies: u64,
    /// total_replies / total_reviews
    pub pooled_ratio: f64,
    /// Unweighted mean of the group ratios.
    pub mean_ratio: f64,
    /// Unweighted mean of the group delays that are defined.
    pub mean_delay_days: Option<f64>,
}

impl ReplyAggregate {
    pub fn display(&self) -> (String, String, String) {
        (
            fmt_percent(self.mean_ratio, 0),
            fmt_percent(self.pooled_ratio, 0),
            fmt_opt(self.mean_delay_days, 1),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplyReport {
    pub rows: Vec<ReplySummary>,
    pub aggregate: ReplyAggregate,
}

pub fn aggregate_reply_rows(rows: &[ReplySummary]) -> Result<ReplyAggregate> {
    if rows.is_empty() {
        return Err(CoreError::Invalid("no reply rows to aggregate".into()));
    }
    let total_reviews: u64 = rows.iter().map(|r| r.total_reviews).sum();
    let total_replies: u64 = rows.iter().map(|r| r.total_replies).sum();
    let ratios: Vec<f64> = rows.iter().map(|r| r.reply_ratio).collect();
    let delays: Vec<f64> = rows.iter().filter_map(|r| r.avg_delay_days).collect();
    Ok(ReplyAggregate {
        total_reviews,
        total_replies,
        pooled_ratio: if total_reviews == 0 { 0.0 } else { total_replies as f64 / total_reviews as f64 },
        mean_ratio: mean(&ratios).unwrap_or(0.0),
        mean_delay_days: mean(&delays),
    })
}

pub fn reply_stats(items: &[ReplyItem]) -> Result<ReplyReport> {
    let mut groups: BTreeMap<&str, (u64, u64, Vec<f64>)> = BTreeMap::new();
    for it in items {
        let g = groups.entry(&it.group).or_default();
        g.0 += 1;
        if it.has_reply {
            g.1 += 1;
        }
        if let Some(d) = it.delay_days() {
            g.2.push(d);
        }
    }
    let rows: Vec<ReplySummary> = groups
        .into_iter()
        .map(|(scope, (n, replies, delays))| ReplySummary {
            scope: scope.to_string(),
            total_reviews: n,
            total_replies: replies,
            reply_ratio: replies as f64 / n as f64,
            avg_delay_days: mean(&delays),
        })
        .collect();
    let aggregate = aggregate_reply_rows(&rows)?;
    Ok(ReplyReport { rows, aggregate })
}

#[derive(Debug, Deserialize)]
struct PublishedReplyRow {
    scope: String,
    total_reviews: u64,
    total_replies: u64,
    avg_delay_days: Option<f64>,
}

/// Reads `scope,total_reviews,total_replies,avg_delay_days` rows.
pub fn parse_reply_table(csv_text: &str) -> Result<Vec<ReplySummary>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    r.deserialize::<PublishedReplyRow>()
        .map(|row| {
            let row = row?;
            if row.total_reviews == 0 || row.total_replies > row.total_reviews {
                return Err(CoreError::Invalid(format!("{}: bad reply counts", row.scope)));
            }
            Ok(ReplySummary {
                reply_ratio: row.total_replies as f64 / row.total_reviews as f64,
                scope: row.scope,
                total_reviews: row.total_reviews,
                total_replies: row.total_replies,
                avg_delay_days: row.avg_delay_days,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppReplyRates {
    pub app_id: String,
    pub genai_rate: f64,
    pub non_genai_rate: f64,
    pub genai_delay: Option<f64>,
    pub non_genai_delay: Option<f64>,
}

/// Per-app reply rates for Gen-AI and non-Gen-AI reviews, apps with both classes only.
pub fn per_app_reply_rates(rows: &[ClassifiedReview]) -> Vec<AppReplyRates> {
    #[derive(Default)]
    struct Side {
        n: u64,
        replies: u64,
        delays: Vec<f64>,
    }
    let mut by_app: BTreeMap<&str, (Side, Side)> = BTreeMap::new();
    for r in rows {
        let e = by_app.entry(&r.app_id).or_default();
        let s = if r.is_genai() { &mut e.0 } else { &mut e.1 };
        s.n += 1;
        if r.has_reply {
            s.replies += 1;
            if let Some(d) = r.reply_delay_days() {
                s.delays.push(d);
            }
        }
    }
    by_app
        .into_iter()
        .filter(|(_, (g, n))| g.n > 0 && n.n > 0)
        .map(|(app, (g, n))| AppReplyRates {
            app_id: app.to_string(),
            genai_rate: g.replies as f64 / g.n as f64,
            non_genai_rate: n.replies as f64 / n.n as f64,
            genai_delay: mean(&g.delays),
            non_genai_delay: mean(&n.delays),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplyRateComparison {
    pub n_apps: usize,
    pub median_genai_rate: f64,
    pub median_non_genai_rate: f64,
    pub median_difference: f64,
    /// genai_rate / non_genai_rate per app; `None` when the denominator is 0.
    pub ratios: Vec<Option<f64>>,
    pub median_ratio: Option<f64>,
    pub wilcoxon: StatTestResult,
    /// Mann-Whitney on per-app mean delays, when both sides have any.
    pub delay_test: Option<StatTestResult>,
}

pub fn reply_rate_comparison(apps: &[AppReplyRates]) -> Result<ReplyRateComparison> {
    if apps.is_empty() {
        return Err(CoreError::Invalid("no app has both Gen-AI and non-Gen-AI reviews".into()));
    }
    let g: Vec<f64> = apps.iter().map(|a| a.genai_rate).collect();
    let n: Vec<f64> = apps.iter().map(|a| a.non_genai_rate).collect();
    let diffs: Vec<f64> = g.iter().zip(&n).map(|(a, b)| a - b).collect();
    let ratios: Vec<Option<f64>> = apps
        .iter()
        .map(|a| (a.non_genai_rate > 0.0).then(|| a.genai_rate / a.non_genai_rate))
        .collect();
    let defined: Vec<f64> = ratios.iter().flatten().copied().collect();
    let gd: Vec<f64> = apps.iter().filter_map(|a| a.genai_delay).collect();
    let nd: Vec<f64> = apps.iter().filter_map(|a| a.non_genai_delay).collect();
    let delay_test = if gd.is_empty() || nd.is_empty() {
        None
    } else {
        Some(mann_whitney_u(&gd, &nd, Mode::Auto)?)
    };
    Ok(ReplyRateComparison {
        n_apps: apps.len(),
        median_genai_rate: median(&g).unwrap_or(0.0),
        median_non_genai_rate: median(&n).unwrap_or(0.0),
        median_difference: median(&diffs).unwrap_or(0.0),
        median_ratio: median(&defined),
        ratios,
        wilcoxon: paired_wilcoxon(&g, &n)?,
        delay_test,
    })
}
