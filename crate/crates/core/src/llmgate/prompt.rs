//! Prompt templates and rendering.

use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CoreError, Result};

pub const OTHER: &str = "Other";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Filter,
    Extract,
    Assign,
}

impl PromptKind {
    pub fn name(self) -> &'static str {
        match self {
            PromptKind::Filter => "filter",
            PromptKind::Extract => "extract",
            PromptKind::Assign => "assign",
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            PromptKind::Filter => &["reviews_block"],
            PromptKind::Extract => &["category_name", "reviews_block"],
            PromptKind::Assign => &["topics_block", "examples_block", "reviews_block"],
        }
    }

    fn file_name(self, shots: u8) -> String {
        match self {
            PromptKind::Extract => format!("extract_{shots}shot.txt"),
            other => format!("{}.txt", other.name()),
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub shots: u8,
    pub body: String,
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").expect("placeholder pattern"));

fn builtin_body(kind: PromptKind, shots: u8) -> Option<&'static str> {
    Some(match (kind, shots) {
        (PromptKind::Filter, _) => include_str!("../../prompts/filter.txt"),
        (PromptKind::Assign, _) => include_str!("../../prompts/assign.txt"),
        (PromptKind::Extract, 0) => include_str!("../../prompts/extract_0shot.txt"),
        (PromptKind::Extract, 3) => include_str!("../../prompts/extract_3shot.txt"),
        (PromptKind::Extract, 5) => include_str!("../../prompts/extract_5shot.txt"),
        _ => return None,
    })
}

fn check_shots(shots: u8) -> Result<()> {
    if matches!(shots, 0 | 3 | 5) {
        Ok(())
    } else {
        Err(CoreError::Prompt(format!("shots must be 0, 3 or 5, got {shots}")))
    }
}

impl PromptTemplate {
    pub fn new(kind: PromptKind, shots: u8, body: impl Into<String>) -> Result<Self> {
        check_shots(shots)?;
        let t = Self {
            kind,
            shots,
            body: body.into(),
        };
        t.validate()?;
        Ok(t)
    }

    /// The template shipped in `prompts/`.
    pub fn builtin(kind: PromptKind, shots: u8) -> Result<Self> {
        check_shots(shots)?;
        let body = builtin_body(kind, shots).expect("shots checked");
        Self::new(kind, shots, body)
    }

    /// Loads `<dir>/<kind>.txt` (or `extract_<n>shot.txt`), falling back to the built-in.
    pub fn load(dir: Option<&Path>, kind: PromptKind, shots: u8) -> Result<Self> {
        check_shots(shots)?;
        match dir.map(|d| d.join(kind.file_name(shots))) {
            Some(path) if path.exists() => {
                let body = std::fs::read_to_string(&path).map_err(io_err(&path))?;
                Self::new(kind, shots, body)
            }
            _ => Self::builtin(kind, shots),
        }
    }

    fn validate(&self) -> Result<()> {
        let header = format!("task: {}", self.kind);
        if self.body.lines().next().map(str::trim) != Some(header.as_str()) {
            return Err(CoreError::Prompt(format!("template must start with {header:?}")));
        }
        let present: Vec<&str> = PLACEHOLDER
            .captures_iter(&self.body)
            .map(|c| c.get(1).expect("group").as_str())
            .collect();
        for need in self.kind.required() {
            if !present.contains(need) {
                return Err(CoreError::Prompt(format!("{} template lacks {{{need}}}", self.kind)));
            }
        }
        Ok(())
    }

    pub fn placeholders(&self) -> Vec<String> {
        let mut v: Vec<String> = PLACEHOLDER.captures_iter(&self.body).map(|c| c[1].to_string()).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// A labeled example shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, Default)]
pub struct PromptInputs<'a> {
    pub category_name: Option<&'a str>,
    /// (id, text) pairs.
    pub reviews: &'a [(String, String)],
    pub topics: &'a [String],
    pub examples: &'a [Example],
}

fn single_line(s: &str) -> String {
    s.replace([',', '\n', '\r'], " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

fn reviews_block(reviews: &[(String, String)]) -> Result<String> {
    let mut out = String::new();
    for (id, text) in reviews {
        if id.is_empty() || id.contains(',') || id.contains(char::is_whitespace) {
            return Err(CoreError::Prompt(format!("review id {id:?} cannot be used in a csv block")));
        }
        out.push_str(id);
        out.push(',');
        out.push_str(&single_line(text));
        out.push('\n');
    }
    out.pop();
    Ok(out)
}

/// Substitutes every placeholder. A placeholder without a supplied value is an error.
pub fn render_prompt(template: &PromptTemplate, inputs: &PromptInputs<'_>) -> Result<String> {
    let mut missing = None;
    let mut failure = None;
    let rendered = PLACEHOLDER.replace_all(&template.body, |c: &regex::Captures<'_>| {
        let name = &c[1];
        let value = match name {
            "category_name" => inputs.category_name.map(single_line),
            "reviews_block" if !inputs.reviews.is_empty() => match reviews_block(inputs.reviews) {
                Ok(b) => Some(b),
                Err(e) => {
                    failure = Some(e);
                    Some(String::new())
                }
            },
            "topics_block" if !inputs.topics.is_empty() => {
                let mut lines: Vec<String> = inputs.topics.iter().map(|t| single_line(t)).collect();
                if template.kind == PromptKind::Assign && !lines.iter().any(|l| l == OTHER) {
                    lines.push(OTHER.to_string());
                }
                Some(lines.join("\n"))
            }
            "examples_block" if !inputs.examples.is_empty() => Some(
                inputs
                    .examples
                    .iter()
                    .map(|e| format!("review: {}\ntopic: {}", single_line(&e.text), single_line(&e.label)))
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            _ => None,
        };
        value.unwrap_or_else(|| {
            missing.get_or_insert_with(|| name.to_string());
            String::new()
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(name) = missing {
        return Err(CoreError::Prompt(format!("no value supplied for {{{name}}} in {} template", template.kind)));
    }
    Ok(rendered.into_owned())
}

/// Reads the `task:` header of a rendered prompt.
pub fn prompt_kind(prompt: &str) -> Option<PromptKind> {
    match prompt.lines().next()?.trim().strip_prefix("task:")?.trim() {
        "filter" => Some(PromptKind::Filter),
        "extract" => Some(PromptKind::Extract),
        "assign" => Some(PromptKind::Assign),
        _ => None,
    }
}

/// Lines inside the first fenced block tagged `tag`.
pub fn fenced_block<'a>(prompt: &'a str, tag: &str) -> Vec<&'a str> {
    let open = format!("```{tag}");
    let mut lines = prompt.lines();
    for l in lines.by_ref() {
        if l.trim() == open {
            break;
        }
    }
    lines.take_while(|l| l.trim() != "```").collect()
}
