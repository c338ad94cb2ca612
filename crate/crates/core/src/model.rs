use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Gps,
    Astore,
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Platform::Gps => "gps",
            Platform::Astore => "astore",
        })
    }
}

impl std::str::FromStr for Platform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gps" => Ok(Platform::Gps),
            "astore" => Ok(Platform::Astore),
            other => Err(format!("unknown platform {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub app_id: String,
    pub content: String,
    pub score: u8,
    #[serde(with = "utc_rfc3339")]
    pub at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_utc_rfc3339")]
    pub replied_at: Option<DateTime<Utc>>,
    pub platform: Platform,
}

impl Review {
    pub fn has_reply(&self) -> bool {
        self.reply_content.is_some()
    }

    /// Reply delay in fractional days, clamped at zero.
    pub fn reply_delay_days(&self) -> Option<f64> {
        let replied = self.replied_at?;
        self.reply_content.as_ref()?;
        let secs = (replied - self.at).num_milliseconds() as f64 / 1000.0;
        Some((secs / 86_400.0).max(0.0))
    }
}

/// Provenance of an app's integration date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateFlag {
    Verified,
    Fallback,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRecord {
    pub app_id: String,
    pub name: String,
    pub category: String,
    pub integration_date: Option<NaiveDate>,
    pub platform: Platform,
    pub date_flag: DateFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    S0,
    S1,
    S2,
    S3,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::S0 => "s0",
            Stage::S1 => "s1",
            Stage::S2 => "s2",
            Stage::S3 => "s3",
        }
    }

    pub fn next(self) -> Option<Stage> {
        match self {
            Stage::Raw => Some(Stage::S0),
            Stage::S0 => Some(Stage::S1),
            Stage::S1 => Some(Stage::S2),
            Stage::S2 => Some(Stage::S3),
            Stage::S3 => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Stage::Raw),
            "s0" | "0" | "stage0" => Ok(Stage::S0),
            "s1" | "1" | "stage1" => Ok(Stage::S1),
            "s2" | "2" | "stage2" => Ok(Stage::S2),
            "s3" | "3" | "stage3" => Ok(Stage::S3),
            other => Err(format!("unknown stage {other:?}")),
        }
    }
}

pub type AppTable = BTreeMap<String, AppRecord>;

pub const UNCATEGORIZED: &str = "uncategorized";

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub reviews: Vec<Review>,
    pub apps: AppTable,
    pub stage: Stage,
}

impl Corpus {
    pub fn new(reviews: Vec<Review>, apps: AppTable) -> Self {
        Self {
            reviews,
            apps,
            stage: Stage::Raw,
        }
    }

    pub fn category_of(&self, app_id: &str) -> &str {
        self.apps.get(app_id).map(|a| a.category.as_str()).unwrap_or(UNCATEGORIZED)
    }

    /// App ids referenced by reviews but absent from the app table, sorted.
    pub fn unresolved_app_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .reviews
            .iter()
            .filter(|r| !self.apps.contains_key(&r.app_id))
            .map(|r| r.app_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn counts_by_category(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.reviews {
            *out.entry(self.category_of(&r.app_id).to_string()).or_insert(0) += 1;
        }
        out
    }
}

pub(crate) mod utc_rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod opt_utc_rfc3339 {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => super::utc_rfc3339::serialize(t, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        match Option::<String>::deserialize(d)? {
            Some(s) => super::parse_timestamp(&s).map(Some).map_err(serde::de::Error::custom),
            None => Ok(None),
        }
    }
}

/// Parses an RFC 3339 timestamp. An explicit offset or `Z` is required.
pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("invalid timestamp {s:?} (RFC 3339 with timezone required): {e}"))
}
