use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use sara_core::corpus::{load_apps, load_reviews, write_apps, write_reviews};
use sara_core::io::{sha256_file, write_json};
use sara_core::llmgate::{Example, GateConfig, Gateway, MockBackend};
use sara_core::metrics::{
    aggregate_reply_rows, parse_category_table, parse_reply_table, per_app_reply_rates, platform_comparison, platform_tally,
    reply_items_by_category, reply_items_by_topic_category, reply_rate_comparison, reply_stats, summary_average_row,
    ShareDenominator, TABLE10_FIXTURE, TABLE2_FIXTURE, TABLE9_FIXTURE,
};
use sara_core::model::{AppTable, Corpus, Stage};
use sara_core::pipeline::{
    assign_step, classify_step, extract_step, load_analysis_corpus, metrics_step, refine_step, run_pipeline, sample_step,
    selected_categories, slug, trends_step, Artifacts, ANALYSIS_CORPUS, ANALYSIS_META,
};
use sara_core::sampling::{derive_seed, Sample};
use sara_core::synth::{generate, SynthSpec};
use sara_core::topics::{evaluate_accuracy, read_assignments_csv, ClassMap, ClassifiedReview, Source, TopicClass, TopicSet};
use sara_core::CoreError;

use crate::config::RunConfig;
use crate::manifest::{FileHash, RunManifest};
use crate::{CliError, Cli, Command, Denominator};

const MOCK_CLASS_MAP: &str = include_str!("../../core/data/class_map_mock.json");

pub(crate) struct Outcome {
    pub message: String,
    pub warnings: Vec<String>,
}

type Failure = (CliError, Option<PathBuf>);

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn resolve_config(cli: &Cli) -> Result<(RunConfig, Vec<String>), CliError> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let overrides = cli.global.apply(&mut cfg);
    cfg.validate()?;
    cfg.run_dir = absolute(&cfg.run_dir);
    for p in [
        &mut cfg.prompts_dir,
        &mut cfg.inputs.reviews,
        &mut cfg.inputs.apps,
        &mut cfg.inputs.class_map,
        &mut cfg.inputs.examples,
        &mut cfg.inputs.gold,
        &mut cfg.inputs.informative,
        &mut cfg.gate.cache_dir,
    ] {
        if let Some(path) = p {
            *path = absolute(path);
        }
    }
    if cfg.gate.cache_dir.is_none() {
        cfg.gate.cache_dir = Some(cfg.cache_dir());
    }
    Ok((cfg, overrides))
}

pub(crate) fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    if let Command::Synth {
        out,
        n_reviews,
        apps_per_category,
        synth_seed,
        synth_platform,
    } = &cli.command
    {
        let spec = SynthSpec {
            reviews: *n_reviews,
            apps_per_category: *apps_per_category,
            seed: *synth_seed,
            platform: *synth_platform,
            ..SynthSpec::default()
        };
        return synth(out, &spec).map_err(|e| (e, None));
    }
    let (cfg, overrides, command, config_file, replayed) = match &cli.command {
        Command::Replay { manifest } => {
            let m = RunManifest::read(manifest).map_err(|e| (e, None))?;
            if matches!(m.command, Command::Replay { .. }) {
                return Err((CliError::Config("cannot replay a replay manifest".into()), None));
            }
            m.config.validate().map_err(|e| (e, Some(m.config.run_dir.clone())))?;
            (m.config.clone(), Vec::new(), m.command.clone(), None, Some((absolute(manifest), m)))
        }
        other => {
            let (cfg, overrides) = resolve_config(cli).map_err(|e| (e, cli.global.run_dir.clone()))?;
            (cfg, overrides, other.clone(), cli.global.config.as_deref().map(absolute), None)
        }
    };
    let run_dir = cfg.run_dir.clone();
    execute(cfg, overrides, command, config_file, replayed).map_err(|e| (e, Some(run_dir)))
}

fn configure_workers(cfg: &mut RunConfig) {
    if let Some(w) = cfg.workers {
        // fails harmlessly if the global pool is already up
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
        cfg.gate.in_flight_limit = cfg.gate.in_flight_limit.min(w);
    }
}

/// Everything one subcommand did, for the manifest.
struct Run {
    message: String,
    inputs: Vec<PathBuf>,
    art: Artifacts,
    seeds: BTreeMap<String, u64>,
    gate: Option<Gateway>,
}

impl Run {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let mut seeds = BTreeMap::new();
        seeds.insert("master".to_string(), cfg.pipeline.seed);
        Ok(Self {
            message: String::new(),
            inputs: Vec::new(),
            art: Artifacts::new(&cfg.run_dir)?,
            seeds,
            gate: None,
        })
    }

    fn input(&mut self, p: &Path) -> Result<PathBuf, CliError> {
        if !p.is_file() {
            return Err(CliError::MissingInput(p.display().to_string()));
        }
        self.inputs.push(p.to_path_buf());
        Ok(p.to_path_buf())
    }

    fn gate(&mut self, cfg: &RunConfig) -> Result<&Gateway, CliError> {
        if self.gate.is_none() {
            self.gate = Some(build_gateway(cfg)?);
        }
        Ok(self.gate.as_ref().expect("just set"))
    }
}

fn build_gateway(cfg: &RunConfig) -> Result<Gateway, CliError> {
    let gate_cfg: GateConfig = cfg.gate.clone();
    if cfg.mock_llm {
        return Ok(Gateway::new(gate_cfg, Box::new(MockBackend::new()))?);
    }
    let backend = gate_cfg.http_backend().map_err(|e| CliError::Config(format!("{e}; pass --mock-llm to run offline")))?;
    Ok(Gateway::new(gate_cfg, Box::new(backend))?)
}

fn hashes(paths: &[PathBuf], shown_relative_to: Option<&Path>) -> Result<Vec<FileHash>, CliError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in paths {
        if !seen.insert(p.clone()) {
            continue;
        }
        let shown = match shown_relative_to {
            Some(root) => p.strip_prefix(root).map(Path::to_path_buf).unwrap_or_else(|_| p.clone()),
            None => p.clone(),
        };
        out.push(FileHash::of(p, shown)?);
    }
    Ok(out)
}

fn execute(
    mut cfg: RunConfig,
    overrides: Vec<String>,
    command: Command,
    config_file: Option<PathBuf>,
    replayed: Option<(PathBuf, RunManifest)>,
) -> Result<Outcome, CliError> {
    configure_workers(&mut cfg);
    let started_at = chrono::Utc::now().to_rfc3339();
    let mut run = Run::new(&cfg)?;
    if let Some((path, _)) = &replayed {
        run.input(path)?;
    }
    if let Some(path) = &config_file {
        run.input(path)?;
    }
    let before = run_command(&cfg, &command, &mut run)?;
    let after = hashes(&run.inputs, None)?;
    for (b, a) in before.iter().zip(&after) {
        if b.sha256 != a.sha256 {
            return Err(CliError::InputMutated(a.path.display().to_string()));
        }
    }
    let mut written: Vec<PathBuf> = run.art.written().iter().map(|r| cfg.run_dir.join(r)).collect();
    written.sort();
    let outputs = hashes(&written, Some(&cfg.run_dir))?;
    let warnings = std::mem::take(&mut run.art.warnings);
    if let Some((_, original)) = &replayed {
        let now: BTreeMap<&Path, &str> = outputs.iter().map(|f| (f.path.as_path(), f.sha256.as_str())).collect();
        let diverged: Vec<String> = original
            .outputs
            .iter()
            .filter(|f| now.get(f.path.as_path()) != Some(&f.sha256.as_str()))
            .map(|f| f.path.display().to_string())
            .collect();
        if !diverged.is_empty() {
            return Err(CliError::Diverged(diverged.join(", ")));
        }
        run.message = format!("replayed {}: {} outputs byte-identical", command.name(), original.outputs.len());
    }
    let manifest = RunManifest {
        tool: "sara".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: match &replayed {
            Some((path, _)) => Command::Replay { manifest: path.clone() },
            None => command.clone(),
        },
        config: cfg.clone(),
        config_file,
        flag_overrides: overrides,
        seeds: run.seeds.clone(),
        inputs: before,
        outputs,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        backend: run.gate.as_ref().map(|g| g.backend_name().to_string()),
        gate: run.gate.as_ref().map(Gateway::stats),
        warnings: warnings.clone(),
    };
    let path = manifest.write(&cfg.run_dir)?;
    if replayed.is_none() && run.message.is_empty() {
        run.message = format!("{}: wrote {} files, manifest {}", command.name(), manifest.outputs.len(), path.display());
    }
    if let Some(g) = &manifest.gate {
        log::info!("gateway: {} backend calls, {} cache hits", g.backend_calls, g.cache_hits);
    }
    Ok(Outcome {
        message: run.message,
        warnings,
    })
}

fn require(p: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    p.clone().ok_or_else(|| CliError::MissingInput(format!("no {what} given")))
}

fn load_app_table(cfg: &RunConfig, run: &mut Run) -> Result<AppTable, CliError> {
    let path = run.input(&require(&cfg.inputs.apps, "app table (--apps)")?)?;
    let (apps, report) = load_apps(&path)?;
    if !report.rejects.is_empty() {
        run.art.warnings.push(format!("{} app records rejected", report.rejects.len()));
    }
    Ok(apps)
}

fn load_raw(cfg: &RunConfig, run: &mut Run) -> Result<Corpus, CliError> {
    let apps = load_app_table(cfg, run)?;
    let path = run.input(&require(&cfg.inputs.reviews, "review dump (--reviews)")?)?;
    let (mut corpus, report) = load_reviews(&path, cfg.inputs.platform)?;
    if !report.rejects.is_empty() {
        run.art.warnings.push(format!("{} review records rejected", report.rejects.len()));
    }
    corpus.apps = apps;
    Ok(corpus)
}

fn load_analysis(cfg: &RunConfig, run: &mut Run) -> Result<Corpus, CliError> {
    let apps = load_app_table(cfg, run)?;
    let meta = cfg.run_dir.join(ANALYSIS_META);
    if !meta.is_file() {
        return Err(CliError::MissingInput(format!("{}: run `refine` first", meta.display())));
    }
    run.input(&meta)?;
    run.input(&cfg.run_dir.join(ANALYSIS_CORPUS))?;
    Ok(load_analysis_corpus(&cfg.run_dir, apps, cfg.inputs.platform)?)
}

fn load_class_map(cfg: &RunConfig, run: &mut Run) -> Result<ClassMap, CliError> {
    match &cfg.inputs.class_map {
        Some(p) => {
            run.input(p)?;
            Ok(ClassMap::read_json(p)?)
        }
        None if cfg.mock_llm => {
            run.art.warnings.push("no class map given: using the bundled map for mock topics".into());
            Ok(serde_json::from_str(MOCK_CLASS_MAP).map_err(CoreError::from)?)
        }
        None => Err(CliError::MissingInput("no class map given (--class-map)".into())),
    }
}

fn load_examples(cfg: &RunConfig, run: &mut Run) -> Result<BTreeMap<String, Vec<Example>>, CliError> {
    let Some(p) = &cfg.inputs.examples else {
        return Ok(BTreeMap::new());
    };
    run.input(p)?;
    let text = std::fs::read_to_string(p).map_err(|e| CliError::MissingInput(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
}

fn read_classified(path: &Path) -> Result<Vec<ClassifiedReview>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Core(CoreError::from(e))))
        .collect()
}

fn read_informative(path: &Path) -> Result<BTreeMap<String, bool>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let Some((id, label)) = line.split_once(',') else { continue };
        let label = label.trim().to_ascii_lowercase();
        if i == 0 && id.trim() == "review_id" {
            continue;
        }
        out.insert(id.trim().to_string(), matches!(label.as_str(), "informative" | "true" | "1" | "yes"));
    }
    Ok(out)
}

fn strict_check(cfg: &RunConfig, undecided: usize, what: &str) -> Result<(), CliError> {
    if cfg.strict && undecided > 0 {
        return Err(CliError::Strict(format!("{undecided} reviews left undecided by {what}")));
    }
    Ok(())
}

/// Assignments and the classified rows built from them.
fn classified_rows(cfg: &RunConfig, run: &mut Run, corpus: &Corpus) -> Result<Vec<ClassifiedReview>, CliError> {
    let path = cfg.run_dir.join("assignments.csv");
    if !path.is_file() {
        return Err(CliError::MissingInput(format!("{}: run `assign-topics` first", path.display())));
    }
    run.input(&path)?;
    let assignments = read_assignments_csv(&path, Source::Llm)?;
    let class_map = load_class_map(cfg, run)?;
    Ok(classify_step(corpus, &assignments, &class_map, &mut run.art)?)
}

fn run_command(cfg: &RunConfig, command: &Command, run: &mut Run) -> Result<Vec<FileHash>, CliError> {
    let p = &cfg.pipeline;
    let prompts = cfg.prompts_dir.as_deref();
    match command {
        Command::Ingest => {
            let apps_path = run.input(&require(&cfg.inputs.apps, "app table (--apps)")?)?;
            let reviews_path = run.input(&require(&cfg.inputs.reviews, "review dump (--reviews)")?)?;
            let before = hashes(&run.inputs, None)?;
            let (apps, app_report) = load_apps(&apps_path)?;
            let (mut corpus, review_report) = load_reviews(&reviews_path, cfg.inputs.platform)?;
            corpus.apps = apps;
            write_reviews(&run.art.path("ingest/reviews.jsonl")?, &corpus.reviews)?;
            write_apps(&run.art.path("ingest/apps.jsonl")?, &corpus.apps)?;
            review_report.write_rejects(&run.art.path("ingest/review_rejects.jsonl")?)?;
            app_report.write_rejects(&run.art.path("ingest/app_rejects.jsonl")?)?;
            let unresolved = corpus.unresolved_app_ids();
            if !unresolved.is_empty() {
                run.art.warnings.push(format!("{} app ids have no app record", unresolved.len()));
            }
            write_json(
                &run.art.path("ingest/report.json")?,
                &serde_json::json!({
                    "reviews": review_report,
                    "apps": app_report,
                    "unresolved_app_ids": unresolved,
                    "by_category": corpus.counts_by_category(),
                }),
            )?;
            run.message = format!(
                "ingested {} reviews ({} rejected) and {} apps ({} rejected)",
                review_report.accepted,
                review_report.rejects.len(),
                app_report.accepted,
                app_report.rejects.len()
            );
            Ok(before)
        }
        Command::Refine { to } => {
            let corpus = load_raw(cfg, run)?;
            let before = hashes(&run.inputs, None)?;
            let mut pcfg = p.clone();
            if let Some(stage) = to {
                pcfg.stage = *stage;
            }
            pcfg.validate()?;
            if pcfg.stage == Stage::S3 {
                run.gate(cfg)?;
            }
            let out = refine_step(corpus, run.gate.as_ref(), prompts, &pcfg, &mut run.art)?;
            strict_check(cfg, out.undecided_informative, "the informativeness filter")?;
            let counts: Vec<String> = out.stage_counts.iter().map(|(s, n)| format!("{s}={n}")).collect();
            run.message = format!("refined to {}: {}", out.corpus.stage, counts.join(" "));
            if !out.dropped_categories.is_empty() {
                run.message.push_str(&format!("; dropped {}", out.dropped_categories.join(", ")));
            }
            Ok(before)
        }
        Command::Sample => {
            let corpus = load_analysis(cfg, run)?;
            let before = hashes(&run.inputs, None)?;
            for cat in selected_categories(&corpus, p) {
                run.seeds.insert(format!("large:{cat}"), derive_seed(p.seed, &format!("large:{cat}")));
                run.seeds.insert(format!("small:{cat}"), derive_seed(p.seed, &format!("small:{cat}")));
            }
            let samples = sample_step(&corpus, p, &mut run.art)?;
            let sizes: Vec<String> = samples
                .iter()
                .map(|(c, s)| format!("{c}: {}/{}", s.large.review_ids.len(), s.small.review_ids.len()))
                .collect();
            run.message = format!("samples (large/small) {}", sizes.join("; "));
            Ok(before)
        }
        Command::ExtractTopics => {
            let corpus = load_analysis(cfg, run)?;
            let mut samples = BTreeMap::new();
            for cat in selected_categories(&corpus, p) {
                let path = cfg.run_dir.join(format!("samples/{}_large.json", slug(&cat)));
                if !path.is_file() {
                    return Err(CliError::MissingInput(format!("{}: run `sample` first", path.display())));
                }
                run.input(&path)?;
                samples.insert(cat, Sample::read_json(&path)?);
            }
            let before = hashes(&run.inputs, None)?;
            run.gate(cfg)?;
            let gate = run.gate.as_ref().expect("built above");
            let sets = extract_step(&corpus, &samples, gate, prompts, p, &mut run.art)?;
            run.message = format!("extracted topics for {} categories ({}-shot)", sets.len(), p.shots);
            Ok(before)
        }
        Command::AssignTopics => {
            let corpus = load_analysis(cfg, run)?;
            let mut sets = BTreeMap::new();
            for cat in selected_categories(&corpus, p) {
                let path = cfg.run_dir.join(format!("topics/{}.json", slug(&cat)));
                if !path.is_file() {
                    return Err(CliError::MissingInput(format!("{}: run `extract-topics` first", path.display())));
                }
                run.input(&path)?;
                sets.insert(cat, TopicSet::read_json(&path)?);
            }
            let examples = load_examples(cfg, run)?;
            let before = hashes(&run.inputs, None)?;
            run.gate(cfg)?;
            let gate = run.gate.as_ref().expect("built above");
            let step = assign_step(&corpus, &sets, &examples, gate, prompts, &mut run.art)?;
            strict_check(cfg, step.undecided, "topic assignment")?;
            run.message = format!("assigned {} reviews ({} undecided)", step.assignments.len(), step.undecided);
            Ok(before)
        }
        Command::Evaluate { assignments } => {
            let path = assignments.clone().unwrap_or_else(|| cfg.run_dir.join("assignments.csv"));
            let path = run.input(&path)?;
            let gold_path = run.input(&require(&cfg.inputs.gold, "gold labels (--gold)")?)?;
            let informative = match &cfg.inputs.informative {
                Some(p) => Some(read_informative(&run.input(p)?)?),
                None => None,
            };
            let before = hashes(&run.inputs, None)?;
            let gold = read_assignments_csv(&gold_path, Source::Gold)?;
            let gold_ids: BTreeSet<&str> = gold.iter().map(|g| g.review_id.as_str()).collect();
            let all = read_assignments_csv(&path, Source::Llm)?;
            let scored: Vec<_> = all.into_iter().filter(|a| gold_ids.contains(a.review_id.as_str())).collect();
            if scored.len() < gold.len() {
                run.art
                    .warnings
                    .push(format!("{} gold items have no assignment", gold.len() - scored.len()));
            }
            let report = evaluate_accuracy(&scored, &gold, informative.as_ref())?;
            write_json(&run.art.path("evaluation/accuracy.json")?, &report)?;
            run.message = format!(
                "accuracy {:.1}% over {} items (wrong topic {:.1}%, missed {:.1}%, over-assigned {:.1}%)",
                report.overall * 100.0,
                report.n,
                report.wrong_topic * 100.0,
                report.missed * 100.0,
                report.over_assigned * 100.0
            );
            Ok(before)
        }
        Command::Metrics { table, table_file } => {
            if table.is_some() || table_file.is_some() {
                let text = match (table, table_file) {
                    (_, Some(f)) => {
                        run.input(f)?;
                        std::fs::read_to_string(f).map_err(|e| CliError::MissingInput(format!("{}: {e}", f.display())))?
                    }
                    (Some(2), None) => TABLE2_FIXTURE.to_string(),
                    (Some(t), None) => return Err(CliError::Config(format!("no bundled category table {t}; expected 2"))),
                    (None, None) => unreachable!(),
                };
                let before = hashes(&run.inputs, None)?;
                let rows = parse_category_table(&text)?;
                let avg = summary_average_row(&rows)?;
                let d = avg.display();
                write_json(&run.art.path("metrics/table_average.json")?, &serde_json::json!({"values": avg, "display": d}))?;
                run.message = format!("Average {}/{}/{}/{}/{}", d.agr, d.anr, d.grc, d.grp, d.n_genai_topics);
                return Ok(before);
            }
            let corpus = load_analysis(cfg, run)?;
            let rows = classified_rows(cfg, run, &corpus)?;
            let before = hashes(&run.inputs, None)?;
            metrics_step(&rows, &corpus, p, &mut run.art)?;
            run.message = format!("metrics over {} classified reviews", rows.len());
            Ok(before)
        }
        Command::Trends => {
            let corpus = load_analysis(cfg, run)?;
            let rows = classified_rows(cfg, run, &corpus)?;
            let before = hashes(&run.inputs, None)?;
            run.seeds.insert("clustering".into(), derive_seed(p.seed, "clustering"));
            trends_step(&rows, p, &mut run.art)?;
            run.message = format!("trends over {} classified reviews", rows.len());
            Ok(before)
        }
        Command::Replies { table, table_file } => {
            if table.is_some() || table_file.is_some() {
                let text = match (table, table_file) {
                    (_, Some(f)) => {
                        run.input(f)?;
                        std::fs::read_to_string(f).map_err(|e| CliError::MissingInput(format!("{}: {e}", f.display())))?
                    }
                    (Some(9), None) => TABLE9_FIXTURE.to_string(),
                    (Some(10), None) => TABLE10_FIXTURE.to_string(),
                    (Some(t), None) => return Err(CliError::Config(format!("no bundled reply table {t}; expected 9 or 10"))),
                    (None, None) => unreachable!(),
                };
                let before = hashes(&run.inputs, None)?;
                let agg = aggregate_reply_rows(&parse_reply_table(&text)?)?;
                let (mean_ratio, pooled, delay) = agg.display();
                write_json(
                    &run.art.path("replies/table_aggregate.json")?,
                    &serde_json::json!({"values": agg, "display": {"mean_ratio": mean_ratio, "pooled_ratio": pooled, "mean_delay_days": delay}}),
                )?;
                run.message = format!("reply ratio {mean_ratio} (pooled {pooled}), delay {delay} days");
                return Ok(before);
            }
            let corpus = load_analysis(cfg, run)?;
            let has_assignments = cfg.run_dir.join("assignments.csv").is_file();
            let rows = if has_assignments { Some(classified_rows(cfg, run, &corpus)?) } else { None };
            let before = hashes(&run.inputs, None)?;
            let by_cat = reply_stats(&reply_items_by_category(&corpus))?;
            write_json(&run.art.path("replies/by_category.json")?, &by_cat)?;
            let (mean_ratio, pooled, delay) = by_cat.aggregate.display();
            run.message = format!("reply ratio {mean_ratio} (pooled {pooled}), delay {delay} days");
            match rows {
                Some(rows) => {
                    let by_topic = reply_stats(&reply_items_by_topic_category(&rows, Some(TopicClass::Genai)));
                    match by_topic {
                        Ok(r) => write_json(&run.art.path("replies/by_topic_category.json")?, &r)?,
                        Err(e) => run.art.warnings.push(format!("replies by topic category: {e}")),
                    }
                    match reply_rate_comparison(&per_app_reply_rates(&rows)) {
                        Ok(r) => write_json(&run.art.path("replies/rate_comparison.json")?, &r)?,
                        Err(e) => run.art.warnings.push(format!("reply rate comparison: {e}")),
                    }
                }
                None => run.art.warnings.push("no assignments yet: topic-level reply tables skipped".into()),
            }
            Ok(before)
        }
        Command::ComparePlatforms { gps, astore, denominator } => {
            let gps = run.input(gps)?;
            let astore = run.input(astore)?;
            let before = hashes(&run.inputs, None)?;
            let denom = match denominator {
                Denominator::All => ShareDenominator::AllClassified,
                Denominator::Genai => ShareDenominator::Genai,
            };
            let g = platform_tally(&read_classified(&gps)?, denom);
            let a = platform_tally(&read_classified(&astore)?, denom);
            let cmp = platform_comparison(&g, &a, denom);
            write_json(&run.art.path("compare/platforms.json")?, &cmp)?;
            run.message = format!("{} topic categories compared", cmp.rows.len());
            Ok(before)
        }
        Command::Report => {
            let corpus = load_raw(cfg, run)?;
            let class_map = load_class_map(cfg, run)?;
            let examples = load_examples(cfg, run)?;
            let before = hashes(&run.inputs, None)?;
            run.seeds.insert("clustering".into(), derive_seed(p.seed, "clustering"));
            run.gate(cfg)?;
            let gate = run.gate.as_ref().expect("built above");
            let summary = run_pipeline(corpus, gate, &class_map, &examples, prompts, p, &cfg.run_dir)?;
            strict_check(cfg, summary.undecided_informative, "the informativeness filter")?;
            strict_check(cfg, summary.undecided_assignments, "topic assignment")?;
            for rel in &summary.outputs {
                run.art.path(&rel.to_string_lossy())?;
            }
            run.art.warnings.extend(summary.warnings.iter().cloned());
            // call counts differ between cold and warm runs; they live in the manifest
            let mut body = serde_json::to_value(&summary).map_err(CoreError::from)?;
            if let Some(obj) = body.as_object_mut() {
                obj.remove("gate");
            }
            write_json(&run.art.path("report.json")?, &body)?;
            let counts: Vec<String> = summary.stage_counts.iter().map(|(s, n)| format!("{s}={n}")).collect();
            run.message = format!(
                "report: {} | {} categories, {} assignments",
                counts.join(" "),
                summary.categories.len(),
                summary.assignments
            );
            Ok(before)
        }
        Command::Synth { .. } | Command::Replay { .. } => unreachable!("handled before dispatch"),
    }
}

fn synth(out: &Path, spec: &SynthSpec) -> Result<Outcome, CliError> {
    let (apps, reviews) = generate(spec);
    sara_core::io::ensure_dir(out)?;
    write_apps(&out.join("apps.jsonl"), &apps)?;
    write_reviews(&out.join("reviews.jsonl"), &reviews)?;
    write_json(&out.join("synth.json"), spec)?;
    let digest = sha256_file(&out.join("reviews.jsonl"))?;
    Ok(Outcome {
        message: format!("wrote {} apps and {} reviews to {} (reviews sha256 {digest})", apps.len(), reviews.len(), out.display()),
        warnings: Vec::new(),
    })
}
