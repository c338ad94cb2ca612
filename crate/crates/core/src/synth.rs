//! Seeded synthetic app tables and review dumps for offline pipeline runs.

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::gps_fallback_date;
use crate::model::{AppRecord, AppTable, DateFlag, Platform, Review};

pub const CATEGORIES: &[&str] = &[
    "Productivity",
    "Photography",
    "Entertainment",
    "Art & Design",
    "Education",
    "Games",
    "Tools",
    "Video Players & Editors",
    "Music & Audio",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub reviews: usize,
    pub apps_per_category: usize,
    pub seed: u64,
    pub platform: Platform,
    pub reply_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            reviews: 5000,
            apps_per_category: 3,
            seed: 20241001,
            platform: Platform::Gps,
            reply_rate: 0.15,
        }
    }
}

const SHORT: &[&str] = &[
    "good", "great app", "love it", "nice", "bad", "ok", "meh", "5 stars", "worst app ever", "awesome!!",
    "not bad", "so good", "hate it", "perfect", "wow",
];

// (sentence, typical score)
const INFORMATIVE: &[(&str, u8)] = &[
    ("the ai answers are accurate and smart most of the time", 5),
    ("the ai gives wrong answers to simple questions", 2),
    ("image quality is blurry and the output looks fake", 2),
    ("photos come out realistic and the quality is great", 5),
    ("the subscription price is too expensive for what you get", 1),
    ("too many ads unless you pay for premium", 2),
    ("it crashes on launch after the latest update", 1),
    ("constant bug with login and a loading error every time", 1),
    ("the interface is easy to navigate and the design is simple", 5),
    ("great for creative art ideas and helps my imagination", 5),
    ("too much censorship and every prompt gets blocked by the filter", 2),
    ("it feels like a friend when i am lonely at night", 5),
    ("the new version changed everything and not for the better", 2),
    ("support never answered my refund email", 1),
    ("really useful for homework and writing tasks at school", 5),
    ("needs more options and tools to edit the results", 3),
    ("the voice sounds natural and the music is catchy", 4),
    ("video animation looks weird and every clip is short", 3),
    ("better than chatgpt when compared to the alternative apps", 4),
    ("lets me customize the style and settings of each result", 4),
    ("worried about privacy and what happens to my account data", 2),
    ("please translate to spanish and support more languages", 3),
    ("fast and quick responses without any lag", 5),
    ("good accessibility features for blind users", 4),
];

const OPENERS: &[&str] = &["", "", "", "Honestly, ", "Overall ", "Update: ", "I think ", "Well "];
const NOISE: &[&str] = &[" 😀", " 👍👍", " 🔥", " https://example.com/promo", " @dev_team", " ｆｕｌｌ width", "  ", " ⭐⭐⭐"];
const PURE_NOISE: &[&str] = &["😀😀😀", "https://spam.example/x", "@someone", "🔥 🔥"];

fn slug(s: &str) -> String {
    s.to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect::<String>()
        .split('_')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn jitter(rng: &mut ChaCha8Rng, score: u8) -> u8 {
    let d: i32 = *[-1, 0, 0, 0, 1].choose(rng).expect("non-empty");
    (score as i32 + d).clamp(1, 5) as u8
}

fn content(rng: &mut ChaCha8Rng) -> (String, u8) {
    let roll: f64 = rng.gen();
    if roll < 0.03 {
        return (PURE_NOISE.choose(rng).expect("non-empty").to_string(), rng.gen_range(1..=5));
    }
    if roll < 0.30 {
        let s = SHORT.choose(rng).expect("non-empty");
        let noise = if rng.gen_bool(0.3) { *NOISE.choose(rng).expect("non-empty") } else { "" };
        return (format!("{s}{noise}"), rng.gen_range(1..=5));
    }
    let (sentence, score) = INFORMATIVE.choose(rng).expect("non-empty");
    let mut text = format!("{}{}", OPENERS.choose(rng).expect("non-empty"), sentence);
    if rng.gen_bool(0.25) {
        let (extra, _) = INFORMATIVE.choose(rng).expect("non-empty");
        text.push_str(". Also ");
        text.push_str(extra);
    }
    if rng.gen_bool(0.3) {
        text.push_str(NOISE.choose(rng).expect("non-empty"));
    }
    (text, jitter(rng, *score))
}

/// Builds an app table and review dump. Same spec, same output.
pub fn generate(spec: &SynthSpec) -> (AppTable, Vec<Review>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prefix = match spec.platform {
        Platform::Gps => "gps",
        Platform::Astore => "astore",
    };
    let mut apps = AppTable::new();
    for cat in CATEGORIES {
        for i in 0..spec.apps_per_category {
            let app_id = format!("com.synth.{}.app{i}", slug(cat));
            let (integration_date, date_flag) = if rng.gen_bool(0.2) {
                match spec.platform {
                    Platform::Gps => (Some(gps_fallback_date()), DateFlag::Fallback),
                    Platform::Astore => (None, DateFlag::Excluded),
                }
            } else {
                let base = NaiveDate::from_ymd_opt(2022, 1, 1).expect("valid date");
                (Some(base + Duration::days(rng.gen_range(0..900))), DateFlag::Verified)
            };
            apps.insert(
                app_id.clone(),
                AppRecord {
                    app_id,
                    name: format!("{cat} Synth {i}"),
                    category: cat.to_string(),
                    integration_date,
                    platform: spec.platform,
                    date_flag,
                },
            );
        }
    }
    let ids: Vec<String> = apps.keys().cloned().collect();
    let start = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).single().expect("valid time");
    let span_secs = 4 * 365 * 86_400 + 180 * 86_400;
    let mut reviews = Vec::with_capacity(spec.reviews);
    for n in 0..spec.reviews {
        // a handful point at apps missing from the table
        let app_id = if rng.gen_bool(0.002) {
            "com.synth.unknown".to_string()
        } else {
            ids.choose(&mut rng).expect("apps exist").clone()
        };
        let at = start + Duration::seconds(rng.gen_range(0..span_secs));
        let (content, score) = content(&mut rng);
        let (reply_content, replied_at) = if rng.gen_bool(spec.reply_rate) {
            let delay = Duration::seconds(rng.gen_range(0..20 * 86_400));
            (Some("Thanks for the feedback!".to_string()), Some(at + delay))
        } else {
            (None, None)
        };
        reviews.push(Review {
            review_id: format!("{prefix}-{n:05}"),
            app_id,
            content,
            score,
            at,
            reply_content,
            replied_at,
            platform: spec.platform,
        });
    }
    (apps, reviews)
}
