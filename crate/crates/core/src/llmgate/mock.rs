//! Deterministic offline backend.
//!
//! The rules are deliberately crude; they exist to exercise pipeline
//! mechanics (batching, caching, closed label sets) without a network.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use super::backend::{BackendError, ChatBackend, ChatRequest};
use super::prompt::{fenced_block, prompt_kind, PromptKind, OTHER};

pub const FILTER_KEYWORDS: &[&str] = &[
    "ai", "prompt", "prompts", "crash", "crashes", "crashing", "subscription", "subscriptions", "bug", "bugs",
    "error", "update", "premium", "ads", "login", "generate", "generated", "generator", "image", "images",
    "chatbot", "feature", "features",
];

/// Topic names the mock can "extract", each with the keywords it assigns on.
pub const TOPIC_POOL: &[(&str, &[&str])] = &[
    ("AI Performance", &["ai", "accurate", "accuracy", "smart", "answers", "responses", "wrong"]),
    ("Content Quality", &["quality", "realistic", "blurry", "output", "photo", "photos", "images"]),
    ("Monetization Methods & Structure", &["subscription", "price", "pay", "paid", "premium", "expensive", "ads", "money"]),
    ("Technical Difficulties", &["crash", "crashes", "bug", "bugs", "error", "freeze", "slow", "loading", "login"]),
    ("User Interface & Experience", &["interface", "easy", "design", "ui", "navigate", "simple"]),
    ("Creative Potential", &["creative", "art", "creativity", "ideas", "imagination", "draw"]),
    ("Content Policy & Censorship", &["censorship", "nsfw", "policy", "restricted", "banned", "blocked", "filter"]),
    ("Emotional Connection", &["friend", "lonely", "companion", "feelings", "emotional"]),
    ("Updates & Evolution", &["update", "updates", "version", "changed"]),
    ("Customer Support", &["support", "refund", "contact", "email"]),
    ("Utility & Use Cases", &["homework", "work", "study", "writing", "tasks", "useful", "school"]),
    ("Features & Functionality", &["feature", "features", "option", "options", "tool", "tools"]),
    ("Voice & Audio", &["voice", "audio", "music", "sound", "song"]),
    ("Video Generation", &["video", "videos", "animation", "clip"]),
    ("Comparison to Other Apps", &["chatgpt", "compared", "alternative", "competitor"]),
    ("Personalization & Customization", &["personalize", "custom", "customize", "settings", "style"]),
    ("Privacy & Data", &["privacy", "data", "account", "permission"]),
    ("Language Support", &["language", "translate", "translation", "english", "spanish"]),
    ("Speed & Responsiveness", &["fast", "speed", "quick", "lag"]),
    ("Accessibility & Inclusivity", &["accessibility", "blind", "disability", "inclusive"]),
];

fn tokens(s: &str) -> BTreeSet<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn topic_keywords(topic: &str) -> Vec<String> {
    match TOPIC_POOL.iter().find(|(name, _)| name.eq_ignore_ascii_case(topic)) {
        Some((_, kws)) => kws.iter().map(|k| k.to_string()).collect(),
        None => tokens(topic).into_iter().filter(|t| t.len() >= 3 && t != "and").collect(),
    }
}

fn rows(prompt: &str) -> impl Iterator<Item = (&str, &str)> {
    fenced_block(prompt, "csv").into_iter().filter_map(|l| l.split_once(','))
}

pub fn mock_filter_label(text: &str) -> &'static str {
    let toks = tokens(text);
    let informative = text.split_whitespace().count() >= 6 || FILTER_KEYWORDS.iter().any(|k| toks.contains(*k));
    if informative {
        "informative"
    } else {
        "non-informative"
    }
}

/// The ten pool topics chosen for a category.
pub fn mock_topics(category: &str) -> Vec<&'static str> {
    let mut ranked: Vec<(Vec<u8>, &'static str)> = TOPIC_POOL
        .iter()
        .map(|(name, _)| {
            let mut h = Sha256::new();
            h.update(category.as_bytes());
            h.update([0]);
            h.update(name.as_bytes());
            (h.finalize().to_vec(), *name)
        })
        .collect();
    ranked.sort();
    ranked.into_iter().take(10).map(|(_, n)| n).collect()
}

pub fn mock_assign_label(text: &str, topics: &[String]) -> String {
    let toks = tokens(text);
    let mut candidates: Vec<&String> = topics.iter().filter(|t| t.as_str() != OTHER).collect();
    candidates.sort();
    candidates
        .into_iter()
        .find(|t| topic_keywords(t).iter().any(|k| toks.contains(k)))
        .cloned()
        .unwrap_or_else(|| OTHER.to_string())
}

/// Answers rendered prompts by rule. Same prompt, same bytes.
#[derive(Debug, Default)]
pub struct MockBackend {
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn respond(prompt: &str) -> String {
        match prompt_kind(prompt) {
            Some(PromptKind::Filter) => rows(prompt)
                .map(|(id, text)| format!("{id},{}", mock_filter_label(text)))
                .collect::<Vec<_>>()
                .join("\n"),
            Some(PromptKind::Extract) => {
                let category = prompt
                    .lines()
                    .find_map(|l| l.strip_prefix("category:"))
                    .map(str::trim)
                    .unwrap_or_default();
                mock_topics(category).join("\n")
            }
            Some(PromptKind::Assign) => {
                let topics: Vec<String> = fenced_block(prompt, "topics").into_iter().map(|t| t.trim().to_string()).collect();
                rows(prompt)
                    .map(|(id, text)| format!("{id},{}", mock_assign_label(text, &topics)))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            None => "error: unknown prompt kind".to_string(),
        }
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(Self::respond(request.prompt))
    }

    fn name(&self) -> &str {
        "mock"
    }
}
