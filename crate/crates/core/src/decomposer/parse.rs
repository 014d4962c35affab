use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::text::normalize;

fn strip_marker(line: &str) -> &str {
    let mut s = line.trim();
    loop {
        let before = s;
        for bullet in ['-', '*', '\u{2022}'] {
            if let Some(rest) = s.strip_prefix(bullet) {
                if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                    s = rest.trim_start();
                }
            }
        }
        let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
        if digits > 0 {
            let rest = &s[digits..];
            if let Some(after) = rest.strip_prefix(['.', ')']) {
                if after.is_empty() || after.starts_with(char::is_whitespace) {
                    s = after.trim_start();
                }
            }
        }
        if s == before {
            return s;
        }
    }
}

/// Case-insensitive dedup key.
pub(crate) fn dedup_key(text: &str) -> String {
    normalize(text).to_lowercase()
}

/// Keeps the first occurrence of each case-insensitively distinct item.
pub(crate) fn dedup(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items
        .into_iter()
        .filter(|g| seen.insert(dedup_key(g)))
        .collect()
}

/// Splits a completion into one generation per line, stripping list markers
/// (`-`, `*`, `•`, `1.`, `1)`) and dropping blanks and case-insensitive repeats.
pub fn parse_generations(raw: &str) -> Result<Vec<String>> {
    let lines = raw
        .lines()
        .map(|l| normalize(strip_marker(l)))
        .filter(|l| !l.is_empty());
    let out = dedup(lines);
    if out.is_empty() {
        return Err(Error::EmptyDecomposition);
    }
    Ok(out)
}
