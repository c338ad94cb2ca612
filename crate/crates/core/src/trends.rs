//! Yearly topic-category series, trajectory clustering and the elbow curve.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sara_stats::StatTestResult;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::metrics::{paired_wilcoxon, AggregationMode};
use crate::topics::{ClassifiedReview, TopicClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTimeSeries {
    pub topic_category: String,
    pub periods: Vec<i32>,
    /// Mean over apps of each app's mean rating for this topic category.
    pub avg_series: Vec<Option<f64>>,
    /// Mean over apps of this category's share of the app's Gen-AI reviews.
    pub pr_series: Vec<Option<f64>>,
    /// Apps with reviews of this topic category, per period.
    pub support: Vec<usize>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn contiguous_years(years: impl Iterator<Item = i32>) -> Vec<i32> {
    let set: BTreeSet<i32> = years.collect();
    match (set.first(), set.last()) {
        (Some(&a), Some(&b)) => (a..=b).collect(),
        _ => Vec::new(),
    }
}

/// Builds yearly series for every Gen-AI topic category. Years run from the
/// first to the last year with Gen-AI reviews; gaps are `None`.
pub fn build_time_series(rows: &[ClassifiedReview]) -> Vec<TopicTimeSeries> {
    let genai: Vec<&ClassifiedReview> = rows.iter().filter(|r| r.is_genai()).collect();
    let periods = contiguous_years(genai.iter().map(|r| r.at.year()));
    // (app, year) -> Gen-AI total; (topic_category, year, app) -> scores
    let mut app_totals: BTreeMap<(i32, &str), usize> = BTreeMap::new();
    let mut cells: BTreeMap<&str, BTreeMap<i32, BTreeMap<&str, Vec<f64>>>> = BTreeMap::new();
    for r in &genai {
        let y = r.at.year();
        *app_totals.entry((y, &r.app_id)).or_default() += 1;
        cells
            .entry(&r.topic_category)
            .or_default()
            .entry(y)
            .or_default()
            .entry(&r.app_id)
            .or_default()
            .push(r.score as f64);
    }
    let mut apps_by_year: BTreeMap<i32, Vec<(&str, usize)>> = BTreeMap::new();
    for (&(y, app), &n) in &app_totals {
        apps_by_year.entry(y).or_default().push((app, n));
    }
    cells
        .into_iter()
        .map(|(tc, by_year)| {
            let mut avg_series = Vec::with_capacity(periods.len());
            let mut pr_series = Vec::with_capacity(periods.len());
            let mut support = Vec::with_capacity(periods.len());
            for y in &periods {
                let per_app = by_year.get(y);
                let avgs: Vec<f64> = per_app.map(|m| m.values().filter_map(|v| mean(v)).collect()).unwrap_or_default();
                avg_series.push(mean(&avgs));
                support.push(avgs.len());
                let shares: Vec<f64> = apps_by_year
                    .get(y)
                    .map(|apps| {
                        apps.iter()
                            .map(|(app, total)| {
                                let n = per_app.and_then(|m| m.get(app)).map_or(0, Vec::len);
                                n as f64 / *total as f64
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                pr_series.push(mean(&shares));
            }
            TopicTimeSeries {
                topic_category: tc.to_string(),
                periods: periods.clone(),
                avg_series,
                pr_series,
                support,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyClassMeans {
    pub periods: Vec<i32>,
    pub genai: Vec<Option<f64>>,
    pub non_genai: Vec<Option<f64>>,
    pub mode: AggregationMode,
}

/// Yearly mean rating of Gen-AI and non-Gen-AI reviews.
pub fn yearly_class_means(rows: &[ClassifiedReview], mode: AggregationMode) -> YearlyClassMeans {
    let periods = contiguous_years(rows.iter().map(|r| r.at.year()));
    let mut acc: BTreeMap<(TopicClass, i32), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        acc.entry((r.class, r.at.year()))
            .or_default()
            .entry(&r.app_id)
            .or_default()
            .push(r.score as f64);
    }
    let series = |class| {
        periods
            .iter()
            .map(|y| {
                let apps = acc.get(&(class, *y))?;
                match mode {
                    AggregationMode::ReviewLevel => mean(&apps.values().flatten().copied().collect::<Vec<_>>()),
                    AggregationMode::AppLevelMean => mean(&apps.values().filter_map(|v| mean(v)).collect::<Vec<_>>()),
                }
            })
            .collect()
    };
    YearlyClassMeans {
        genai: series(TopicClass::Genai),
        non_genai: series(TopicClass::NonGenai),
        periods,
        mode,
    }
}

/// Signed-rank test on yearly pairs; years missing either side are dropped.
pub fn yearly_paired_wilcoxon(genai: &[Option<f64>], non_genai: &[Option<f64>]) -> Result<StatTestResult> {
    if genai.len() != non_genai.len() {
        return Err(CoreError::Invalid("yearly series differ in length".into()));
    }
    let (g, n): (Vec<f64>, Vec<f64>) = genai
        .iter()
        .zip(non_genai)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip();
    if g.is_empty() {
        return Err(CoreError::Invalid("no year has both Gen-AI and non-Gen-AI ratings".into()));
    }
    paired_wilcoxon(&g, &n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Avg,
    Pr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInput {
    pub names: Vec<String>,
    /// Periods every series has data for.
    pub window: Vec<i32>,
    pub vectors: Vec<Vec<f64>>,
    pub normalized: bool,
}

/// Restricts every series to the periods where all of them are defined and
/// optionally z-normalizes each one.
pub fn clustering_input(series: &[TopicTimeSeries], kind: SeriesKind, normalize: bool) -> Result<ClusterInput> {
    let Some(first) = series.first() else {
        return Err(CoreError::Invalid("no series to cluster".into()));
    };
    if series.iter().any(|s| s.periods != first.periods) {
        return Err(CoreError::Invalid("series have different periods".into()));
    }
    let pick = |s: &TopicTimeSeries| match kind {
        SeriesKind::Avg => s.avg_series.clone(),
        SeriesKind::Pr => s.pr_series.clone(),
    };
    let all: Vec<Vec<Option<f64>>> = series.iter().map(pick).collect();
    let keep: Vec<usize> = (0..first.periods.len()).filter(|&i| all.iter().all(|v| v[i].is_some())).collect();
    if keep.is_empty() {
        return Err(CoreError::Invalid("no period is shared by every series".into()));
    }
    let mut vectors: Vec<Vec<f64>> = all
        .iter()
        .map(|v| keep.iter().map(|&i| v[i].expect("filtered to defined periods")).collect())
        .collect();
    if normalize {
        vectors.iter_mut().for_each(|v| z_normalize(v));
    }
    Ok(ClusterInput {
        names: series.iter().map(|s| s.topic_category.clone()).collect(),
        window: keep.iter().map(|&i| first.periods[i]).collect(),
        vectors,
        normalized: normalize,
    })
}

/// (x - mean) / population sd; a flat series becomes all zeros.
pub fn z_normalize(v: &mut [f64]) {
    let Some(m) = mean(v) else { return };
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    for x in v.iter_mut() {
        *x = if sd > 0.0 { (*x - m) / sd } else { 0.0 };
    }
}

/// At or below this many vectors clustering enumerates every partition.
pub const EXACT_MAX_VECTORS: usize = 12;
pub const RESTARTS: usize = 32;
pub const MAX_ITER: usize = 500;
pub const SHIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    ExactEnumeration,
    SeededHeuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    /// Cluster id per input vector, numbered in order of first appearance.
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub method: ClusterMethod,
    /// Partitions into at most k blocks (exact mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_space: Option<u128>,
}

impl ClusterResult {
    pub fn named(&self, names: &[String]) -> BTreeMap<String, usize> {
        names.iter().cloned().zip(self.labels.iter().copied()).collect()
    }

    /// Blocks as sorted index lists, for label-free comparison.
    pub fn partition(&self) -> BTreeSet<Vec<usize>> {
        canonical_partition(&self.labels)
    }
}

pub fn canonical_partition(labels: &[usize]) -> BTreeSet<Vec<usize>> {
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        blocks.entry(l).or_default().push(i);
    }
    blocks.into_values().collect()
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroids(vectors: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = vectors[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (v, &l) in vectors.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(v) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    sums
}

/// Sum of squared distances to cluster centroids. Depends only on the
/// partition, not on how clusters are numbered.
pub fn inertia(vectors: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let c = centroids(vectors, labels, k);
    vectors.iter().zip(labels).map(|(v, &l)| dist2(v, &c[l])).sum()
}

/// Σ_{j=1..k} S(n, j).
pub fn partitions_up_to(n: usize, k: usize) -> u128 {
    // s[j] = S(i, j) for the current i
    let mut s = vec![0u128; k + 1];
    s[0] = 1;
    for _ in 0..n {
        for j in (1..=k).rev() {
            s[j] = j as u128 * s[j] + s[j - 1];
        }
        s[0] = 0;
    }
    s[1..].iter().sum()
}

fn validate(vectors: &[Vec<f64>], k: usize) -> Result<()> {
    if vectors.is_empty() || k == 0 {
        return Err(CoreError::Invalid("clustering needs at least one vector and k >= 1".into()));
    }
    if k > vectors.len() {
        return Err(CoreError::Invalid(format!("k = {k} exceeds {} vectors", vectors.len())));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) || vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(CoreError::Invalid("vectors must share one length and be finite".into()));
    }
    Ok(())
}

/// K-means: exact over all partitions for small inputs, otherwise
/// k-means++ restarts from `seed`.
pub fn kmeans_cluster(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterResult> {
    validate(vectors, k)?;
    if vectors.len() <= EXACT_MAX_VECTORS {
        Ok(exact_cluster(vectors, k))
    } else {
        Ok(heuristic_cluster(vectors, k, seed, None))
    }
}

struct Search<'a> {
    vectors: &'a [Vec<f64>],
    k: usize,
    labels: Vec<usize>,
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
    best: f64,
    candidates: Vec<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn slack(&self) -> f64 {
        self.best * (1.0 + 1e-9) + 1e-12
    }

    fn dfs(&mut self, i: usize, used: usize, sse: f64) {
        if sse > self.slack() {
            return;
        }
        if i == self.vectors.len() {
            if sse < self.best {
                self.best = sse;
                let cut = self.slack();
                self.candidates.retain(|(s, _)| *s <= cut);
            }
            self.candidates.push((sse, self.labels.clone()));
            return;
        }
        let x = &self.vectors[i];
        for b in 0..(used + 1).min(self.k) {
            let c = self.counts[b];
            // adding x to a block with sum S and count c raises SSE by c/(c+1)·|x - S/c|²
            let add = if c == 0 {
                0.0
            } else {
                let cf = c as f64;
                let d: f64 = x.iter().zip(&self.sums[b]).map(|(xi, si)| (xi - si / cf).powi(2)).sum();
                d * cf / (cf + 1.0)
            };
            self.labels[i] = b;
            self.counts[b] += 1;
            for (s, xi) in self.sums[b].iter_mut().zip(x) {
                *s += xi;
            }
            self.dfs(i + 1, used.max(b + 1), sse + add);
            self.counts[b] -= 1;
            for (s, xi) in self.sums[b].iter_mut().zip(x) {
                *s -= xi;
            }
        }
    }
}

fn exact_cluster(vectors: &[Vec<f64>], k: usize) -> ClusterResult {
    let dim = vectors[0].len();
    let mut s = Search {
        vectors,
        k,
        labels: vec![0; vectors.len()],
        sums: vec![vec![0.0; dim]; k],
        counts: vec![0; k],
        best: f64::INFINITY,
        candidates: Vec::new(),
    };
    s.dfs(0, 0, 0.0);
    // incremental sums carry rounding; settle near-ties with the direct formula
    let (labels, inertia) = s
        .candidates
        .into_iter()
        .map(|(_, l)| {
            let v = inertia(vectors, &l);
            (l, v)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
        .expect("at least one partition");
    ClusterResult {
        k,
        labels,
        inertia,
        method: ClusterMethod::ExactEnumeration,
        search_space: Some(partitions_up_to(vectors.len(), k)),
    }
}

fn nearest(v: &[f64], cents: &[Vec<f64>]) -> (usize, f64) {
    cents
        .iter()
        .enumerate()
        .map(|(j, c)| (j, dist2(v, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn kmeanspp(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cents = vec![vectors[rng.gen_range(0..vectors.len())].clone()];
    while cents.len() < k {
        let d: Vec<f64> = vectors.iter().map(|v| nearest(v, &cents).1).collect();
        let total: f64 = d.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..vectors.len())
        } else {
            let mut t = rng.gen::<f64>() * total;
            let mut pick = d.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if t < *di {
                    pick = i;
                    break;
                }
                t -= di;
            }
            pick
        };
        cents.push(vectors[idx].clone());
    }
    cents
}

/// Lloyd iterations; returns the best labeling seen.
fn lloyd(vectors: &[Vec<f64>], mut cents: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let k = cents.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..MAX_ITER {
        let labels: Vec<usize> = vectors.iter().map(|v| nearest(v, &cents).0).collect();
        let mut next = centroids(vectors, &labels, k);
        // an empty cluster takes the point farthest from its centroid
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = (0..vectors.len())
                .max_by(|&a, &b| dist2(&vectors[a], &next[labels[a]]).total_cmp(&dist2(&vectors[b], &next[labels[b]])))
                .expect("non-empty input");
            next[j] = vectors[far].clone();
        }
        let shift = cents.iter().zip(&next).map(|(a, b)| dist2(a, b).sqrt()).fold(0.0, f64::max);
        let compact = relabel(&labels);
        let value = inertia(vectors, &compact);
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((compact, value));
        }
        cents = next;
        if shift < SHIFT_TOL {
            break;
        }
    }
    best.expect("at least one iteration")
}

fn heuristic_cluster(vectors: &[Vec<f64>], k: usize, seed: u64, warm: Option<&ClusterResult>) -> ClusterResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut runs: Vec<(Vec<usize>, f64)> = (0..RESTARTS).map(|_| lloyd(vectors, kmeanspp(vectors, k, &mut rng))).collect();
    if let Some(prev) = warm {
        // previous centroids plus the worst-fit point cannot be worse than the previous solution
        let pk = prev.labels.iter().max().map_or(0, |m| m + 1);
        let mut cents = centroids(vectors, &prev.labels, pk);
        let far = (0..vectors.len())
            .max_by(|&a, &b| dist2(&vectors[a], &cents[prev.labels[a]]).total_cmp(&dist2(&vectors[b], &cents[prev.labels[b]])))
            .expect("non-empty input");
        while cents.len() < k {
            cents.push(vectors[far].clone());
        }
        runs.push(lloyd(vectors, cents));
        runs.push((prev.labels.clone(), prev.inertia));
    }
    let (labels, inertia) = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
        .expect("at least one restart");
    ClusterResult {
        k,
        labels,
        inertia,
        method: ClusterMethod::SeededHeuristic,
        search_space: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowPoint {
    pub k: usize,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowCurve {
    pub points: Vec<ElbowPoint>,
    pub clusters: Vec<ClusterResult>,
    /// k with the largest second difference; advisory.
    pub knee: Option<usize>,
}

/// Inertia for k = 1..=k_max.
pub fn elbow_curve(vectors: &[Vec<f64>], k_max: usize, seed: u64) -> Result<ElbowCurve> {
    validate(vectors, k_max)?;
    let exact = vectors.len() <= EXACT_MAX_VECTORS;
    let mut clusters: Vec<ClusterResult> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let r = if exact {
            exact_cluster(vectors, k)
        } else {
            heuristic_cluster(vectors, k, seed.wrapping_add(k as u64), clusters.last())
        };
        clusters.push(r);
    }
    let points: Vec<ElbowPoint> = clusters.iter().map(|c| ElbowPoint { k: c.k, inertia: c.inertia }).collect();
    Ok(ElbowCurve {
        knee: knee(&points),
        points,
        clusters,
    })
}

pub fn knee(points: &[ElbowPoint]) -> Option<usize> {
    points
        .windows(3)
        .map(|w| (w[1].k, w[0].inertia - 2.0 * w[1].inertia + w[2].inertia))
        .fold(None, |best: Option<(usize, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|(k, _)| k)
}
