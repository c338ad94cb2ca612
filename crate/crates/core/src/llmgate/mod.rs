//! LLM gateway: prompts, backends, caching, batching and resends.

pub mod backend;
pub mod cache;
pub mod mock;
pub mod parse;
pub mod prompt;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use backend::{BackendError, ChatBackend, ChatRequest, DropRows, HttpBackend, API_KEY_ENV};
pub use cache::{cache_key, ResponseCache};
pub use mock::MockBackend;
pub use parse::{parse_csv_labels, GateResponse};
pub use prompt::{render_prompt, Example, PromptInputs, PromptKind, PromptTemplate, OTHER};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    pub batch_size: usize,
    pub max_resend_rounds: usize,
    pub in_flight_limit: usize,
    pub cache_dir: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-4o-mini".into(),
            temperature: 0.0,
            batch_size: 100,
            max_resend_rounds: 5,
            in_flight_limit: 4,
            cache_dir: None,
            timeout_secs: 120,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CoreError::Invalid("batch_size must be at least 1".into()));
        }
        if self.in_flight_limit == 0 {
            return Err(CoreError::Invalid("in_flight_limit must be at least 1".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(CoreError::Invalid(format!("temperature {} is invalid", self.temperature)));
        }
        if self.temperature != 0.0 {
            log::warn!("temperature {} is not reproducible", self.temperature);
        }
        Ok(())
    }

    pub fn http_backend(&self) -> std::result::Result<HttpBackend, BackendError> {
        HttpBackend::from_env(&self.endpoint_url, Duration::from_secs(self.timeout_secs))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateStats {
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub transport_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub batches: usize,
    pub requested: usize,
    pub labeled: usize,
    pub unreturned: usize,
    pub hallucinated: usize,
    pub transport_failures: usize,
    /// labels ∪ unreturned = requested, disjoint, for every batch of the round.
    pub conserved: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingOutcome {
    pub labels: BTreeMap<String, String>,
    /// Still unlabeled when the resend rounds ran out.
    pub exhausted: Vec<String>,
    /// Returned an out-of-set label twice.
    pub hallucinated: Vec<String>,
    pub hallucination_events: usize,
    pub rounds: Vec<RoundLog>,
}

impl LabelingOutcome {
    pub fn requests(&self) -> usize {
        self.rounds.iter().map(|r| r.batches).sum()
    }

    pub fn resend_rounds(&self) -> usize {
        self.rounds.len().saturating_sub(1)
    }
}

pub type Renderer<'a> = dyn Fn(&[(String, String)]) -> Result<String> + Sync + 'a;

pub struct Gateway {
    config: GateConfig,
    backend: Box<dyn ChatBackend>,
    cache: ResponseCache,
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
    transport_failures: AtomicUsize,
}

impl Gateway {
    pub fn new(config: GateConfig, backend: Box<dyn ChatBackend>) -> Result<Self> {
        config.validate()?;
        let cache = match &config.cache_dir {
            Some(dir) => ResponseCache::on_disk(dir)?,
            None => ResponseCache::in_memory(),
        };
        Ok(Self::with_cache(config, backend, cache))
    }

    pub fn with_cache(config: GateConfig, backend: Box<dyn ChatBackend>, cache: ResponseCache) -> Self {
        Self {
            config,
            backend,
            cache,
            backend_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
            transport_failures: AtomicUsize::new(0),
        }
    }

    pub fn mock(config: GateConfig) -> Result<Self> {
        Self::new(config, Box::new(MockBackend::new()))
    }

    pub fn config(&self) -> &GateConfig {
        &self.config
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn stats(&self) -> GateStats {
        GateStats {
            backend_calls: self.backend_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
            transport_failures: self.transport_failures.load(Ordering::SeqCst),
        }
    }

    /// One completion, served from cache when possible. Failures are not cached.
    pub fn complete(&self, prompt: &str) -> std::result::Result<String, BackendError> {
        let key = cache_key(&self.config.model_id, self.config.temperature, prompt);
        if let Some(hit) = self.cache.get(&key) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit);
        }
        self.backend_calls.fetch_add(1, Ordering::SeqCst);
        let req = ChatRequest {
            model: &self.config.model_id,
            temperature: self.config.temperature,
            prompt,
        };
        match self.backend.complete(&req) {
            Ok(text) => {
                if let Err(e) = self.cache.put(&key, &text) {
                    log::warn!("cache write failed: {e}");
                }
                Ok(text)
            }
            Err(e) => {
                self.transport_failures.fetch_add(1, Ordering::SeqCst);
                Err(e)
            }
        }
    }

    fn run_batch(&self, batch: &[(String, String)], allowed: &[String], render: &Renderer<'_>) -> Result<Option<GateResponse>> {
        let prompt = render(batch)?;
        let ids: Vec<String> = batch.iter().map(|(id, _)| id.clone()).collect();
        match self.complete(&prompt) {
            Ok(raw) => Ok(Some(parse_csv_labels(&raw, &ids, allowed))),
            Err(e) => {
                log::warn!("batch of {} failed: {e}", ids.len());
                Ok(None)
            }
        }
    }

    /// Labels `items` in batches, resending unreturned ids until everything is
    /// labeled or `max_resend_rounds` resends have been made. An id whose label
    /// falls outside `allowed` twice is given up on.
    pub fn label(&self, items: &[(String, String)], allowed: &[String], render: &Renderer<'_>) -> Result<LabelingOutcome> {
        let mut out = LabelingOutcome::default();
        let mut strikes: HashMap<String, u8> = HashMap::new();
        let mut pending: Vec<(String, String)> = items.to_vec();
        for round in 0..=self.config.max_resend_rounds {
            if pending.is_empty() {
                break;
            }
            let batches: Vec<&[(String, String)]> = pending.chunks(self.config.batch_size).collect();
            let mut results = Vec::with_capacity(batches.len());
            for group in batches.chunks(self.config.in_flight_limit) {
                if group.len() == 1 {
                    results.push(self.run_batch(group[0], allowed, render)?);
                    continue;
                }
                let got: Vec<Result<Option<GateResponse>>> = std::thread::scope(|s| {
                    let handles: Vec<_> = group
                        .iter()
                        .map(|b| s.spawn(move || self.run_batch(b, allowed, render)))
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("batch worker panicked")).collect()
                });
                for g in got {
                    results.push(g?);
                }
            }

            let mut log = RoundLog {
                round,
                batches: batches.len(),
                requested: pending.len(),
                labeled: 0,
                unreturned: 0,
                hallucinated: 0,
                transport_failures: 0,
                conserved: true,
            };
            let mut next = Vec::new();
            for (batch, result) in batches.iter().zip(results) {
                let Some(resp) = result else {
                    log.transport_failures += 1;
                    log.unreturned += batch.len();
                    next.extend(batch.iter().cloned());
                    continue;
                };
                let requested: Vec<&String> = batch.iter().map(|(id, _)| id).collect();
                let conserved = resp.labels.len() + resp.unreturned.len() == requested.len()
                    && requested
                        .iter()
                        .all(|id| resp.labels.contains_key(*id) != resp.unreturned.contains(id));
                log.conserved &= conserved;
                log.labeled += resp.labels.len();
                log.unreturned += resp.unreturned.len();
                log.hallucinated += resp.hallucinated.len();
                out.hallucination_events += resp.hallucinated.len();
                for id in &resp.hallucinated {
                    *strikes.entry(id.clone()).or_default() += 1;
                }
                out.labels.extend(resp.labels);
                for (id, text) in batch.iter() {
                    if out.labels.contains_key(id) {
                        continue;
                    }
                    if strikes.get(id).copied().unwrap_or(0) >= 2 {
                        out.hallucinated.push(id.clone());
                    } else {
                        next.push((id.clone(), text.clone()));
                    }
                }
            }
            out.rounds.push(log);
            pending = next;
        }
        out.exhausted = pending.into_iter().map(|(id, _)| id).collect();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Informativeness {
    #[serde(rename = "informative")]
    Informative,
    #[serde(rename = "non-informative")]
    NonInformative,
    #[serde(rename = "undecided")]
    Undecided,
}

impl Informativeness {
    pub fn as_str(self) -> &'static str {
        match self {
            Informativeness::Informative => "informative",
            Informativeness::NonInformative => "non-informative",
            Informativeness::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InformativeOutcome {
    pub labels: BTreeMap<String, Informativeness>,
    pub labeling: LabelingOutcome,
}

impl InformativeOutcome {
    pub fn undecided(&self) -> usize {
        self.labels.values().filter(|l| **l == Informativeness::Undecided).count()
    }
}

/// Labels (id, text) pairs as informative or not. Anything the gateway could
/// not settle is `Undecided`.
pub fn classify_informative(items: &[(String, String)], gate: &Gateway, template: &PromptTemplate) -> Result<InformativeOutcome> {
    if template.kind != PromptKind::Filter {
        return Err(CoreError::Prompt(format!("expected a filter template, got {}", template.kind)));
    }
    let allowed = vec!["informative".to_string(), "non-informative".to_string()];
    let render = |batch: &[(String, String)]| {
        render_prompt(
            template,
            &PromptInputs {
                reviews: batch,
                ..Default::default()
            },
        )
    };
    let labeling = gate.label(items, &allowed, &render)?;
    let labels = items
        .iter()
        .map(|(id, _)| {
            let l = match labeling.labels.get(id).map(String::as_str) {
                Some("informative") => Informativeness::Informative,
                Some(_) => Informativeness::NonInformative,
                None => Informativeness::Undecided,
            };
            (id.clone(), l)
        })
        .collect();
    Ok(InformativeOutcome { labels, labeling })
}
