//! Parsing constrained `id,label` model output.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateResponse {
    pub labels: BTreeMap<String, String>,
    /// Requested ids without a valid label, in request order.
    pub unreturned: Vec<String>,
    /// Ids whose label fell outside the allowed set (also in `unreturned`).
    pub hallucinated: Vec<String>,
    /// Ids that appeared more than once; the first occurrence was kept.
    pub duplicates: Vec<String>,
    /// Ids in the output that were never requested.
    pub unexpected: Vec<String>,
    pub raw: String,
}

impl GateResponse {
    pub fn hallucination_count(&self) -> usize {
        self.hallucinated.len()
    }
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"').and_then(|t| t.strip_suffix('"')).unwrap_or(s).trim()
}

/// Parses `id,label` lines. Labels are matched to `allowed` case-insensitively
/// and returned in their canonical spelling. Total: anything unusable ends up
/// in `unreturned`, so `labels ∪ unreturned = expected_ids`.
pub fn parse_csv_labels(raw: &str, expected_ids: &[String], allowed_labels: &[String]) -> GateResponse {
    let canon: HashMap<String, &String> = allowed_labels.iter().map(|l| (l.to_lowercase(), l)).collect();
    let expected: HashSet<&str> = expected_ids.iter().map(String::as_str).collect();
    let mut seen: HashSet<String> = HashSet::new();
    let mut resp = GateResponse {
        raw: raw.to_string(),
        ..GateResponse::default()
    };

    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        let Some((id, label)) = line.split_once(',') else {
            continue;
        };
        let id = strip_quotes(id);
        let label = strip_quotes(label);
        if !expected.contains(id) {
            if !id.eq_ignore_ascii_case("id") {
                resp.unexpected.push(id.to_string());
            }
            continue;
        }
        if !seen.insert(id.to_string()) {
            resp.duplicates.push(id.to_string());
            continue;
        }
        match canon.get(&label.to_lowercase()) {
            Some(c) => {
                resp.labels.insert(id.to_string(), (*c).clone());
            }
            None => {
                resp.hallucinated.push(id.to_string());
            }
        }
    }
    resp.unreturned = expected_ids
        .iter()
        .filter(|id| !resp.labels.contains_key(*id))
        .cloned()
        .collect();
    resp
}
