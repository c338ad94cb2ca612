//! Loading and validating pre-scraped review and app dumps.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{io_err, CoreError, Result};
use crate::model::{parse_timestamp, AppRecord, AppTable, Corpus, DateFlag, Platform, Review, UNCATEGORIZED};

/// Integration date assigned to Google Play apps without documentary evidence.
pub fn gps_fallback_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 10, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub lines: usize,
    pub accepted: usize,
    pub duplicates: usize,
    pub rejects: Vec<Reject>,
}

impl LoadReport {
    pub fn write_rejects(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        for r in &self.rejects {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        fs::write(path, buf).map_err(io_err(path))
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn str_field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> std::result::Result<Option<&'a str>, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.as_str())),
        Some(other) => Err(format!("field {key} must be a string, got {other}")),
    }
}

fn required<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> std::result::Result<&'a str, String> {
    match str_field(obj, key)? {
        Some(s) if !s.is_empty() => Ok(s),
        _ => Err(format!("missing {key}")),
    }
}

fn parse_review(line: &str, platform: Platform) -> std::result::Result<Review, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("malformed json: {e}"))?;
    let obj = value.as_object().ok_or("record is not a json object")?;
    let review_id = required(obj, "review_id")?.to_string();
    let app_id = required(obj, "app_id")?.to_string();
    let score = match obj.get("score") {
        None | Some(Value::Null) => return Err("missing score".into()),
        Some(v) => v.as_i64().ok_or_else(|| format!("score must be an integer, got {v}"))?,
    };
    if !(1..=5).contains(&score) {
        return Err(format!("score {score} outside 1-5"));
    }
    let at = parse_timestamp(str_field(obj, "at")?.ok_or("missing at")?)?;
    let content = str_field(obj, "content")?.unwrap_or_default().to_string();
    let reply_content = str_field(obj, "reply_content")?.map(str::to_owned);
    let replied_at = str_field(obj, "replied_at")?.map(parse_timestamp).transpose()?;
    if replied_at.is_some() && reply_content.is_none() {
        return Err("replied_at present without reply_content".into());
    }
    if let Some(p) = str_field(obj, "platform")? {
        let p: Platform = p.parse()?;
        if p != platform {
            return Err(format!("platform {p} does not match requested {platform}"));
        }
    }
    Ok(Review {
        review_id,
        app_id,
        content,
        score: score as u8,
        at,
        reply_content,
        replied_at,
        platform,
    })
}

/// Loads a line-delimited JSON review dump. Bad records are rejected, never fatal.
pub fn load_reviews(path: &Path, platform: Platform) -> Result<(Corpus, LoadReport)> {
    let lines = read_lines(path)?;
    Ok(parse_reviews(&lines, platform))
}

pub fn parse_reviews(lines: &[String], platform: Platform) -> (Corpus, LoadReport) {
    let parsed: Vec<Option<std::result::Result<Review, String>>> = lines
        .par_iter()
        .map(|l| (!l.trim().is_empty()).then(|| parse_review(l, platform)))
        .collect();
    let mut report = LoadReport {
        lines: lines.len(),
        ..LoadReport::default()
    };
    let mut seen = HashSet::new();
    let mut reviews = Vec::new();
    for (i, p) in parsed.into_iter().enumerate() {
        let line = i + 1;
        match p {
            None => {}
            Some(Err(reason)) => report.rejects.push(Reject { line, reason }),
            Some(Ok(r)) => {
                if seen.insert(r.review_id.clone()) {
                    reviews.push(r);
                } else {
                    report.duplicates += 1;
                    report.rejects.push(Reject {
                        line,
                        reason: format!("duplicate review_id {:?}", r.review_id),
                    });
                }
            }
        }
    }
    report.accepted = reviews.len();
    (Corpus::new(reviews, AppTable::new()), report)
}

#[derive(Deserialize)]
struct RawApp {
    app_id: String,
    #[serde(default)]
    name: String,
    category: String,
    #[serde(default)]
    integration_date: Option<String>,
    platform: Platform,
}

/// Loads the app table. Duplicate app ids are fatal; unparseable dates reject the record.
///
/// Google Play apps without a date, or dated after the fallback, get the
/// fallback date. App Store apps without a date are excluded from temporal filtering.
pub fn load_apps(path: &Path) -> Result<(AppTable, LoadReport)> {
    let lines = read_lines(path)?;
    parse_apps(&lines)
}

pub fn parse_apps(lines: &[String]) -> Result<(AppTable, LoadReport)> {
    let mut table = AppTable::new();
    let mut report = LoadReport {
        lines: lines.len(),
        ..LoadReport::default()
    };
    let fallback = gps_fallback_date();
    for (i, l) in lines.iter().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let line = i + 1;
        let raw: RawApp = match serde_json::from_str(l) {
            Ok(r) => r,
            Err(e) => {
                report.rejects.push(Reject {
                    line,
                    reason: format!("malformed app record: {e}"),
                });
                continue;
            }
        };
        let date = match raw.integration_date.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => match NaiveDate::parse_from_str(s, "%Y-%m-%d") {
                Ok(d) => Some(d),
                Err(e) => {
                    report.rejects.push(Reject {
                        line,
                        reason: format!("unparseable integration_date {s:?}: {e}"),
                    });
                    continue;
                }
            },
        };
        let (integration_date, date_flag) = match (raw.platform, date) {
            (Platform::Gps, None) => (Some(fallback), DateFlag::Fallback),
            (Platform::Gps, Some(d)) if d > fallback => (Some(fallback), DateFlag::Fallback),
            (_, Some(d)) => (Some(d), DateFlag::Verified),
            (Platform::Astore, None) => (None, DateFlag::Excluded),
        };
        if table.contains_key(&raw.app_id) {
            return Err(CoreError::DuplicateApp(raw.app_id));
        }
        table.insert(
            raw.app_id.clone(),
            AppRecord {
                app_id: raw.app_id,
                name: raw.name,
                category: raw.category,
                integration_date,
                platform: raw.platform,
                date_flag,
            },
        );
    }
    report.accepted = table.len();
    Ok((table, report))
}

/// Splits reviews by app category. Reviews of unknown apps go to `uncategorized`.
pub fn partition_by_category(corpus: &Corpus) -> BTreeMap<String, Vec<&Review>> {
    let mut out: BTreeMap<String, Vec<&Review>> = BTreeMap::new();
    let mut unknown = 0usize;
    for r in &corpus.reviews {
        let cat = corpus.category_of(&r.app_id);
        if cat == UNCATEGORIZED && !corpus.apps.contains_key(&r.app_id) {
            unknown += 1;
        }
        out.entry(cat.to_string()).or_default().push(r);
    }
    if unknown > 0 {
        log::warn!("{unknown} reviews reference apps missing from the app table");
    }
    out
}

pub fn write_reviews(path: &Path, reviews: &[Review]) -> Result<()> {
    let mut buf = Vec::with_capacity(reviews.len() * 160);
    for r in reviews {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(io_err(path))
}

pub fn write_apps(path: &Path, apps: &AppTable) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    for a in apps.values() {
        let date = a.integration_date.map(|d| d.to_string());
        let v = serde_json::json!({
            "app_id": a.app_id,
            "name": a.name,
            "category": a.category,
            "integration_date": date,
            "platform": a.platform,
        });
        writeln!(f, "{v}").map_err(io_err(path))?;
    }
    Ok(())
}

/// Cross-platform app identity, read from a `gps_app_id,astore_app_id` CSV.
pub fn load_app_mapping(path: &Path) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let gps = row.get(0).unwrap_or_default().trim();
        let astore = row.get(1).unwrap_or_default().trim();
        if gps.is_empty() || astore.is_empty() {
            return Err(CoreError::Invalid(format!("{}: incomplete mapping row", path.display())));
        }
        out.push((gps.to_string(), astore.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    const OK1: &str = r#"{"review_id":"r1","app_id":"a","content":"Nice app","score":5,"at":"2024-10-02T10:00:00Z","platform":"gps"}"#;
    const OK2: &str = r#"{"review_id":"r2","app_id":"a","content":"x","score":1,"at":"2024-10-02T10:00:00+01:00"}"#;
    const OK3: &str = r#"{"review_id":"r3","app_id":"b","content":"y","score":3,"at":"2024-10-03T00:00:00Z","reply_content":"thanks","replied_at":"2024-10-04T12:00:00Z"}"#;

    #[test]
    fn three_valid_lines() {
        let (c, rep) = parse_reviews(&lines(&[OK1, OK2, OK3]), Platform::Gps);
        assert_eq!(c.reviews.len(), 3);
        assert!(rep.rejects.is_empty());
        assert_eq!(c.reviews[2].reply_delay_days(), Some(1.5));
        assert_eq!(c.reviews.iter().map(|r| r.review_id.as_str()).collect::<Vec<_>>(), ["r1", "r2", "r3"]);
    }

    #[test]
    fn rejects_carry_line_numbers() {
        let bad_score = OK1.replace("\"score\":5", "\"score\":6").replace("r1", "r9");
        let no_tz = OK2.replace("+01:00", "").replace("r2", "r8");
        let missing = r#"{"app_id":"a","score":2,"at":"2024-10-02T10:00:00Z"}"#;
        let (c, rep) = parse_reviews(&lines(&[OK1, &bad_score, "not json", &no_tz, missing]), Platform::Gps);
        assert_eq!(c.reviews.len(), 1);
        let got: Vec<usize> = rep.rejects.iter().map(|r| r.line).collect();
        assert_eq!(got, [2, 3, 4, 5]);
        assert!(rep.rejects[0].reason.contains("outside 1-5"));
        assert!(rep.rejects[3].reason.contains("missing review_id"));
    }

    #[test]
    fn duplicate_review_id_keeps_first() {
        let dup = OK2.replace("r2", "r1");
        let (c, rep) = parse_reviews(&lines(&[OK1, &dup, OK3]), Platform::Gps);
        assert_eq!(c.reviews.len(), 2);
        assert_eq!(rep.duplicates, 1);
        assert_eq!(c.reviews[0].content, "Nice app");
        // oracle: linear scan with a seen-set
        let mut seen = HashSet::new();
        let dups = ["r1", "r1", "r3"].iter().filter(|id| !seen.insert(**id)).count();
        assert_eq!(dups, rep.duplicates);
    }

    #[test]
    fn platform_mismatch_is_rejected() {
        let (c, rep) = parse_reviews(&lines(&[OK1]), Platform::Astore);
        assert!(c.reviews.is_empty());
        assert!(rep.rejects[0].reason.contains("platform"));
    }

    #[test]
    fn app_dates_and_fallbacks() {
        let (t, rep) = parse_apps(&lines(&[
            r#"{"app_id":"g1","name":"G","category":"Tools","platform":"gps"}"#,
            r#"{"app_id":"s1","name":"S","category":"Tools","platform":"astore"}"#,
            r#"{"app_id":"g2","name":"H","category":"Tools","integration_date":"2022-11-30","platform":"gps"}"#,
            r#"{"app_id":"g3","name":"I","category":"Tools","integration_date":"2025-03-01","platform":"gps"}"#,
            r#"{"app_id":"g4","name":"J","category":"Tools","integration_date":"30/11/2022","platform":"gps"}"#,
        ]))
        .unwrap();
        assert_eq!(t["g1"].integration_date, Some(gps_fallback_date()));
        assert_eq!(t["g1"].date_flag, DateFlag::Fallback);
        assert_eq!(t["s1"].date_flag, DateFlag::Excluded);
        assert_eq!(t["s1"].integration_date, None);
        assert_eq!(t["g2"].integration_date, NaiveDate::from_ymd_opt(2022, 11, 30));
        assert_eq!(t["g3"].integration_date, Some(gps_fallback_date()));
        assert_eq!(rep.rejects.len(), 1);
        assert_eq!(rep.rejects[0].line, 5);
    }

    #[test]
    fn duplicate_app_is_fatal() {
        let a = r#"{"app_id":"g1","category":"Tools","platform":"gps"}"#;
        assert!(matches!(parse_apps(&lines(&[a, a])), Err(CoreError::DuplicateApp(_))));
    }

    #[test]
    fn partition_groups_and_flags_unknown() {
        let (mut c, _) = parse_reviews(&lines(&[OK1, OK2, OK3]), Platform::Gps);
        let (apps, _) = parse_apps(&lines(&[r#"{"app_id":"a","category":"Productivity","platform":"gps"}"#])).unwrap();
        c.apps = apps;
        let p = partition_by_category(&c);
        assert_eq!(p["Productivity"].len(), 2);
        assert_eq!(p[UNCATEGORIZED].len(), 1);
        assert_eq!(c.unresolved_app_ids(), ["b"]);
        let empty = Corpus::new(vec![], AppTable::new());
        assert!(partition_by_category(&empty).is_empty());
    }
}
