//! Review text normalization.

use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)(?:https?://|\bwww\.)\S*").expect("url pattern"));
static USERNAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").expect("username pattern"));

const MAX_PASSES: usize = 8;

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x231A..=0x231B
        | 0x2328
        | 0x23CF
        | 0x23E9..=0x23F3
        | 0x23F8..=0x23FA
        | 0x25FB..=0x25FE
        | 0x2B05..=0x2B07
        | 0x2B1B..=0x2B1C
        | 0x2B50
        | 0x2B55
        | 0x3030
        | 0x303D
        | 0x3297
        | 0x3299
        // variation selectors, joiner, keycap, tags
        | 0xFE0E..=0xFE0F
        | 0x200D
        | 0x20E3
        | 0xE0020..=0xE007F)
}

fn one_pass(raw: &str) -> String {
    let normalized: String = raw.nfkc().map(|c| if is_emoji(c) { ' ' } else { c }).collect();
    let no_urls = URL.replace_all(&normalized, " ");
    let no_users = USERNAME.replace_all(&no_urls, " ");
    let lowered = no_users.replace(',', " ").to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalizes a review: NFKC, strip emoji, URLs and @usernames, commas to
/// spaces, lowercase, collapse whitespace. Idempotent.
pub fn clean_text(raw: &str) -> String {
    let mut cur = one_pass(raw);
    for _ in 1..MAX_PASSES {
        let next = one_pass(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

pub fn token_count(s: &str) -> usize {
    s.split_whitespace().count()
}
