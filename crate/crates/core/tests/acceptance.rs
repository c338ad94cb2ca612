//! Acceptance run: one PASS/FAIL line per criterion, diagnostics as INFO lines.
//! Exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sara_core::corpus::{load_apps, load_reviews};
use sara_core::llmgate::{DropRows, GateConfig, Gateway, MockBackend, PromptKind, PromptTemplate};
use sara_core::metrics::{aggregate_reply_rows, parse_category_table, parse_reply_table, summary_average_row, TABLE2_FIXTURE, TABLE9_FIXTURE};
use sara_core::model::{Corpus, Platform, Stage};
use sara_core::pipeline::{run_pipeline, PipelineConfig, PipelineSummary};
use sara_core::refine::{run_cascade, stage3_informative};
use sara_core::sampling::{sample_size, SampleSpec};
use sara_core::text::clean_text;
use sara_core::topics::{compare_experiments, evaluate_accuracy, experiment_grid, ClassMap, GroupBy, Source, TopicAssignment};
use sara_core::trends::{elbow_curve, kmeans_cluster};
use sara_stats::{bonferroni_one, mann_whitney_u, one_way_anova, wilcoxon_signed_rank, Df, Mode, TestOptions};

const CATS: [&str; 5] = ["Photography", "Productivity", "Art & Design", "Entertainment", "Video Players & Editors"];
const STAGES: [Stage; 3] = [Stage::S1, Stage::S2, Stage::S3];
const SHOTS: [u8; 3] = [0, 3, 5];

// rows: experiment; columns: stage 1..3 x (Photo, Pro, Art, Ent, Video)
const OVERALL: [[f64; 15]; 3] = [
    [86., 77., 91., 69., 95., 84., 85., 85., 80., 90., 72., 86., 77., 86., 89.],
    [91., 86., 80., 66., 95., 91., 80., 86., 82., 95., 76., 83., 88., 92., 90.],
    [93., 81., 94., 90., 92., 90., 84., 92., 88., 93., 95., 86., 86., 95., 91.],
];
const INFORMATIVE: [[f64; 15]; 3] = [
    [83., 76., 90., 88., 76., 84., 83., 89., 74., 82., 81., 91., 81., 86., 89.],
    [87., 91., 87., 86., 76., 93., 78., 89., 89., 94., 81., 88., 89., 91., 90.],
    [87., 85., 94., 82., 76., 80., 79., 90., 82., 89., 94., 92., 90., 95., 97.],
];

struct Report {
    passed: usize,
    failed: Vec<u32>,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        println!("[{}] {id:>2}. {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if pass {
            self.passed += 1;
        } else {
            self.failed.push(id);
        }
    }
}

fn info(msg: String) {
    println!("       info: {msg}");
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Table values as (cell, accuracy), the cell carrying stage, category and shots.
fn cells(table: &[[f64; 15]; 3]) -> Vec<(sara_core::topics::ExperimentCell, f64)> {
    experiment_grid(&STAGES, &CATS, &SHOTS)
        .into_iter()
        .map(|c| {
            let e = SHOTS.iter().position(|s| *s == c.shots).unwrap();
            let st = STAGES.iter().position(|s| *s == c.stage).unwrap();
            let cat = CATS.iter().position(|k| *k == c.category).unwrap();
            let v = table[e][st * 5 + cat];
            (c, v)
        })
        .collect()
}

fn pair<'a>(cmp: &'a sara_core::topics::GroupComparison, a: &str, b: &str) -> &'a sara_core::topics::PairwiseComparison {
    cmp.pairwise
        .iter()
        .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
        .expect("pair present")
}

fn criteria_1_to_3(r: &mut Report) {
    let t = Instant::now();
    let overall = compare_experiments(&cells(&OVERALL), GroupBy::Shots).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let (h, p) = (overall.kruskal.statistic, overall.kruskal.p());
    r.line(
        1,
        "Kruskal-Wallis on overall accuracy by experiment",
        within(h, 7.778, 0.05) && within(p, 0.0205, 0.003) && elapsed < 1.0,
        format!("H = {h:.4} (target 7.778 ± 0.05), p = {p:.4} (target 0.0205 ± 0.003), {elapsed:.4} s; {}", overall.kruskal.variant_notes),
    );

    let e13 = pair(&overall, "0-shot", "5-shot").p_adjusted;
    let e12 = pair(&overall, "0-shot", "3-shot").p_adjusted;
    let e23 = pair(&overall, "3-shot", "5-shot").p_adjusted;
    r.line(
        2,
        "Bonferroni-adjusted Mann-Whitney pairs",
        within(e13, 0.0181, 0.002) && e12 == 1.0 && within(e23, 0.2519, 0.01),
        format!("E1-E3 = {e13:.4} (target 0.0181 ± 0.002), E1-E2 = {e12:.4} (target 1.000), E2-E3 = {e23:.4} (target 0.2519 ± 0.01)"),
    );
    // the printed table is rounded; one cell one point lower reproduces the reported values
    let mut e1 = OVERALL[0];
    e1[0] = 85.0;
    let h2 = sara_stats::kruskal_wallis(&[&e1, &OVERALL[1], &OVERALL[2]]).unwrap();
    let p13 = mann_whitney_u(&e1, &OVERALL[2], TestOptions { mode: Mode::Approx, continuity: true }).unwrap().p();
    info(format!(
        "with E1 Stage-1 Photo at 85 instead of 86: H = {:.4}, p = {:.4}, E1-E3 = {:.4}",
        h2.statistic,
        h2.p(),
        bonferroni_one(p13, 3)
    ));

    let by_shots = compare_experiments(&cells(&INFORMATIVE), GroupBy::Shots).unwrap();
    let a = &by_shots.anova;
    let df_ok = a.df == Some(Df::Two(2, 42));
    r.line(
        3,
        "one-way ANOVA on informative accuracy",
        within(a.statistic, 2.25, 0.10) && df_ok && within(a.p(), 0.118, 0.015),
        format!("F = {:.4} (target 2.25 ± 0.10), df {:?} (target (2, 42)), p = {:.4} (target 0.118 ± 0.015); grouped by experiment", a.statistic, a.df, a.p()),
    );
    let by_stage = compare_experiments(&cells(&INFORMATIVE), GroupBy::Stage).unwrap();
    info(format!("grouped by cleaning stage instead: F = {:.4}, p = {:.4}", by_stage.anova.statistic, by_stage.anova.p()));
    let direct = one_way_anova(&[&INFORMATIVE[0], &INFORMATIVE[1], &INFORMATIVE[2]]).unwrap();
    assert_eq!(direct.statistic.to_bits(), a.statistic.to_bits());
}

fn wilcoxon_enumerated(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let total = n * (n + 1) / 2;
    let wp: usize = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| rank[i]).sum();
    let w = wp.min(total - wp);
    let extreme = (0u64..1 << n)
        .filter(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum::<usize>() <= w)
        .count();
    (2.0 * extreme as f64 / (1u64 << n) as f64).min(1.0)
}

fn mann_whitney_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let na = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let base = na * (na + 1) / 2;
    let ua = rank[..na].iter().sum::<usize>() - base;
    let u = ua.min(na * b.len() - ua);
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != na {
            continue;
        }
        total += 1;
        let s: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        if s - base <= u {
            extreme += 1;
        }
    }
    (2.0 * extreme as f64 / total as f64).min(1.0)
}

fn criterion_4(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let approx = TestOptions { mode: Mode::Approx, continuity: true };
    let (mut worst, mut worst_case) = (0.0f64, String::new());
    let mut exact_ok = true;
    for i in 0..500 {
        let (gap, exact_match, label) = if i % 2 == 0 {
            let n = rng.gen_range(4..=8);
            let mut mags: Vec<u32> = (1..=40).collect();
            mags.shuffle(&mut rng);
            let d: Vec<f64> = mags[..n].iter().map(|&m| if rng.gen_bool(0.5) { m as f64 } else { -(m as f64) }).collect();
            let zeros = vec![0.0; n];
            let ap = wilcoxon_signed_rank(&d, &zeros, approx).unwrap().p();
            let ex1 = wilcoxon_signed_rank(&d, &zeros, Mode::Exact).unwrap().p();
            let ex2 = wilcoxon_signed_rank(&d, &zeros, Mode::Exact).unwrap().p();
            let oracle = wilcoxon_enumerated(&d);
            ((ap - oracle).abs(), ex1.to_bits() == oracle.to_bits() && ex1.to_bits() == ex2.to_bits(), format!("wilcoxon n={n}"))
        } else {
            let (na, nb) = loop {
                let (x, y) = (rng.gen_range(2..=8), rng.gen_range(2..=8));
                if x + y >= 6 {
                    break (x, y);
                }
            };
            let mut vals: Vec<u32> = (1..=60).collect();
            vals.shuffle(&mut rng);
            let a: Vec<f64> = vals[..na].iter().map(|&v| v as f64).collect();
            let b: Vec<f64> = vals[na..na + nb].iter().map(|&v| v as f64).collect();
            let ap = mann_whitney_u(&a, &b, approx).unwrap().p();
            let ex1 = mann_whitney_u(&a, &b, Mode::Exact).unwrap().p();
            let ex2 = mann_whitney_u(&a, &b, Mode::Exact).unwrap().p();
            let oracle = mann_whitney_enumerated(&a, &b);
            ((ap - oracle).abs(), ex1.to_bits() == oracle.to_bits() && ex1.to_bits() == ex2.to_bits(), format!("mann-whitney {na}x{nb}"))
        };
        exact_ok &= exact_match;
        if gap > worst {
            worst = gap;
            worst_case = label;
        }
    }
    r.line(
        4,
        "approximate vs enumerated p-values, 500 tie-free instances",
        worst <= 0.05 && exact_ok,
        format!("max |approx - exact| = {worst:.4} ({worst_case}), limit 0.05; exact path bit-identical to enumeration: {exact_ok}"),
    );
    info("instances: wilcoxon n in 4..=8, mann-whitney group sizes 2..=8 with pooled n >= 6".into());
}

fn criterion_5(r: &mut Report) {
    let small = sample_size(&SampleSpec::new(100_000, 0.95, 0.10)).unwrap();
    let large = sample_size(&SampleSpec::new(170_446, 0.95, 0.02)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..5_000_000u64);
        let m = rng.gen_range(0.005..0.5);
        let base = sample_size(&SampleSpec::new(n, 0.95, m)).unwrap();
        let bigger_n = sample_size(&SampleSpec::new(n + rng.gen_range(0..1_000_000), 0.95, m)).unwrap();
        let wider = sample_size(&SampleSpec::new(n, 0.95, (m + rng.gen_range(0.0..0.3)).min(0.99))).unwrap();
        if bigger_n < base || wider > base {
            violations += 1;
        }
    }
    r.line(
        5,
        "sample sizes",
        small == 96 && large == 2368 && violations == 0,
        format!("n(100000, 0.95, 0.10) = {small} (target 96), n(170446, 0.95, 0.02) = {large} (target 2368), monotonicity violations over 1000 specs = {violations}"),
    );
}

fn criteria_6_7(r: &mut Report) {
    let avg = summary_average_row(&parse_category_table(TABLE2_FIXTURE).unwrap()).unwrap();
    let d = avg.display();
    let got = [d.agr.as_str(), &d.anr, &d.grc, &d.grp, &d.n_genai_topics];
    let want = ["4.2", "2.8", "59,647", "48%", "5"];
    r.line(6, "category table average row", got == want, format!("{} (target {})", got.join(" / "), want.join(" / ")));

    let agg = aggregate_reply_rows(&parse_reply_table(TABLE9_FIXTURE).unwrap()).unwrap();
    let (mean_ratio, pooled, delay) = agg.display();
    r.line(
        7,
        "reply table dual aggregation",
        mean_ratio == "20%" && delay == "10.2" && pooled == "17%",
        format!("unweighted ratio {mean_ratio} (target 20%), delay {delay} days (target 10.2), pooled ratio {pooled} (reported, 17%)"),
    );
}

fn brute_force_inertia(vs: &[Vec<f64>], k: usize) -> f64 {
    let (n, dim) = (vs.len(), vs[0].len());
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut c = vec![vec![0.0; dim]; k];
        let mut cnt = vec![0usize; k];
        for (v, &l) in vs.iter().zip(&labels) {
            cnt[l] += 1;
            for d in 0..dim {
                c[l][d] += v[d];
            }
        }
        if cnt.iter().all(|&x| x > 0) {
            for (ci, &m) in c.iter_mut().zip(&cnt) {
                ci.iter_mut().for_each(|x| *x /= m as f64);
            }
            let mut sse = 0.0;
            for (v, &l) in vs.iter().zip(&labels) {
                let mut d2 = 0.0;
                for d in 0..dim {
                    d2 += (v[d] - c[l][d]) * (v[d] - c[l][d]);
                }
                sse += d2;
            }
            best = best.min(sse);
        }
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

fn random_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect()
}

fn criterion_8(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..60 {
        let n = rng.gen_range(3..=10);
        let dim = rng.gen_range(1..=4);
        let vs = random_vectors(&mut rng, n, dim);
        let got = kmeans_cluster(&vs, 3, rng.gen()).unwrap().inertia;
        if got.to_bits() != brute_force_inertia(&vs, 3).to_bits() {
            mismatches += 1;
        }
    }
    let mut rises = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=30);
        let dim = rng.gen_range(1..=5);
        let vs = random_vectors(&mut rng, n, dim);
        let curve = elbow_curve(&vs, n.min(8), rng.gen()).unwrap();
        rises += curve.points.windows(2).filter(|w| w[1].inertia > w[0].inertia).count();
    }
    r.line(
        8,
        "clustering",
        mismatches == 0 && rises == 0,
        format!("inertia differs from brute force on {mismatches}/60 fixtures (n <= 10, k = 3); elbow increases over 100 fixtures: {rises}"),
    );
}

fn synthetic_corpus(root: &Path) -> Corpus {
    let (apps, _) = load_apps(&root.join("apps.jsonl")).unwrap();
    let (mut corpus, _) = load_reviews(&root.join("reviews.jsonl"), Platform::Gps).unwrap();
    corpus.apps = apps;
    corpus
}

fn outputs_equal(a: &Path, b: &Path, outputs: &[std::path::PathBuf]) -> bool {
    outputs.iter().all(|rel| std::fs::read(a.join(rel)).ok() == std::fs::read(b.join(rel)).ok())
}

fn criterion_9(r: &mut Report) {
    let t = Instant::now();
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let fixture = root.join("fixtures/synthetic");
    let corpus = synthetic_corpus(&fixture);
    let idempotent = corpus.reviews.iter().all(|rv| {
        let once = clean_text(&rv.content);
        clean_text(&once) == once
    });
    let class_map = ClassMap::read_json(&root.join("data/class_map_mock.json")).unwrap();
    let cfg = PipelineConfig {
        min_category_reviews: 100,
        ..PipelineConfig::default()
    };
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, cache: &str| -> (PipelineSummary, std::path::PathBuf) {
        let gate = Gateway::new(
            GateConfig {
                cache_dir: Some(tmp.path().join(cache)),
                ..GateConfig::default()
            },
            Box::new(MockBackend::new()),
        )
        .unwrap();
        let out = tmp.path().join(name);
        let s = run_pipeline(corpus.clone(), &gate, &class_map, &BTreeMap::new(), None, &cfg, &out).unwrap();
        (s, out)
    };
    let (a, dir_a) = run("cold_a", "cache_a");
    let (b, dir_b) = run("cold_b", "cache_b");
    let (w, dir_w) = run("warm", "cache_a");
    let elapsed = t.elapsed().as_secs_f64();
    let monotone = a.stage_counts.windows(2).all(|p| p[1].1 <= p[0].1);
    let deterministic = a.outputs == b.outputs && outputs_equal(&dir_a, &dir_b, &a.outputs);
    let warm_identical = a.outputs == w.outputs && outputs_equal(&dir_a, &dir_w, &a.outputs);
    let counts: Vec<String> = a.stage_counts.iter().map(|(s, n)| format!("{s}={n}")).collect();
    r.line(
        9,
        "pipeline on the 5,000-review synthetic corpus",
        idempotent && monotone && deterministic && w.gate.backend_calls == 0 && warm_identical && elapsed < 60.0,
        format!(
            "counts {} (monotone: {monotone}); clean_text idempotent: {idempotent}; cold runs identical: {deterministic} over {} files; warm rerun calls {} (cold {}), identical: {warm_identical}; {elapsed:.2} s for three runs",
            counts.join(" "),
            a.outputs.len(),
            w.gate.backend_calls,
            a.gate.backend_calls
        ),
    );
}

fn criterion_10(r: &mut Report) {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let mut corpus = synthetic_corpus(&root);
    corpus = run_cascade(corpus, Stage::S2, None, None).unwrap().corpus;
    corpus.reviews.truncate(250);
    let n = corpus.reviews.len();
    let gate = Gateway::new(GateConfig::default(), Box::new(DropRows::tenth(MockBackend::new()))).unwrap();
    let template = PromptTemplate::builtin(PromptKind::Filter, 0).unwrap();
    let (_, report, outcome) = stage3_informative(corpus, &gate, &template).unwrap();
    let rounds = &outcome.labeling.rounds;
    let conserved = rounds.iter().all(|x| x.conserved && x.labeled + x.unreturned == x.requested);
    let per_round: Vec<String> = rounds.iter().map(|x| format!("{}/{}", x.labeled, x.requested)).collect();
    r.line(
        10,
        "batched labeling with 10% dropped rows",
        n == 250 && outcome.undecided() == 0 && report.undecided == 0 && outcome.labeling.resend_rounds() <= 3 && conserved,
        format!(
            "{n} reviews, undecided {}, resend rounds {} (limit 3), labeled/requested per round {}, conservation holds: {conserved}",
            outcome.undecided(),
            outcome.labeling.resend_rounds(),
            per_round.join(", ")
        ),
    );
}

fn criterion_11(r: &mut Report) {
    let n = 1000;
    let mut llm = Vec::with_capacity(n);
    let mut gold = Vec::with_capacity(n);
    for i in 0..n {
        let (g, a) = match i % 100 {
            0..=1 => ("Content Quality", "AI Performance"),
            2..=4 => ("Content Quality", "Other"),
            5..=8 => ("Other", "Creative Potential"),
            9..=60 => ("AI Performance", "AI Performance"),
            _ => ("Other", "Other"),
        };
        let id = format!("g{i:04}");
        gold.push(TopicAssignment { review_id: id.clone(), topic: g.into(), source: Source::Gold, undecided: false });
        llm.push(TopicAssignment { review_id: id, topic: a.into(), source: Source::Llm, undecided: false });
    }
    let rep = evaluate_accuracy(&llm, &gold, None).unwrap();
    let exact = rep.correct == 910 && rep.wrong_topic_count == 20 && rep.missed_count == 30 && rep.over_assigned_count == 40;
    r.line(
        11,
        "accuracy harness error split",
        exact && within(rep.overall, 0.91, 1e-12) && within(rep.wrong_topic, 0.02, 1e-12) && within(rep.missed, 0.03, 1e-12) && within(rep.over_assigned, 0.04, 1e-12),
        format!(
            "overall {:.2}%, wrong topic {:.2}%, missed {:.2}%, over-assigned {:.2}% over {} items",
            rep.overall * 100.0,
            rep.wrong_topic * 100.0,
            rep.missed * 100.0,
            rep.over_assigned * 100.0,
            rep.n
        ),
    );
}

fn main() {
    let mut r = Report { passed: 0, failed: Vec::new() };
    criteria_1_to_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criteria_6_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    criterion_10(&mut r);
    criterion_11(&mut r);
    println!("acceptance: {} passed, {} failed {:?}", r.passed, r.failed.len(), r.failed);
    if !r.failed.is_empty() {
        std::process::exit(1);
    }
}
