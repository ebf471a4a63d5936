//! Lenient extraction of structured values from model replies.

use regex::Regex;
use serde_json::Value;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteChoice {
    /// 1-based candidate number.
    Candidate(usize),
    NoMatch,
}

fn fenced() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[ \t]*(?:json|JSON)?[ \t]*\r?\n(.*?)```").expect("fence regex"))
}

/// Finds the JSON object in a reply: the first fenced block that parses,
/// else the first balanced `{...}` span that parses.
pub fn extract_json(text: &str) -> Option<Value> {
    for cap in fenced().captures_iter(text) {
        if let Ok(v) = serde_json::from_str::<Value>(cap[1].trim()) {
            if v.is_object() {
                return Some(v);
            }
        }
    }
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(off) = text[start..].find('{') {
        let open = start + off;
        if let Some(close) = balanced_end(bytes, open) {
            if let Ok(v) = serde_json::from_str::<Value>(&text[open..=close]) {
                if v.is_object() {
                    return Some(v);
                }
            }
        }
        start = open + 1;
    }
    None
}

fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

const WORDS: &[(&str, usize)] = &[
    ("one", 1),
    ("first", 1),
    ("two", 2),
    ("second", 2),
    ("three", 3),
    ("third", 3),
    ("four", 4),
    ("fourth", 4),
    ("five", 5),
    ("fifth", 5),
    ("six", 6),
    ("sixth", 6),
    ("seven", 7),
    ("seventh", 7),
    ("eight", 8),
    ("eighth", 8),
    ("nine", 9),
    ("ninth", 9),
    ("ten", 10),
    ("tenth", 10),
];

fn numeral_value(token: &str) -> Option<usize> {
    let t = token.trim_end_matches(['.', ')', ':']);
    let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
    if !digits.is_empty() {
        return digits.parse().ok();
    }
    WORDS.iter().find(|(w, _)| *w == t).map(|(_, n)| *n)
}

fn referenced() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)(?:\b(?:image|view|picture|photo|render|option|candidate|number|choice|no\.)|#)\s*(?:number\s*|no\.?\s*)?#?\s*(\d+|one|two|three|four|five|six|seven|eight|nine|ten)\b",
        )
        .expect("reference regex")
    })
}

fn ordinal_reference() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(first|second|third|fourth|fifth|1st|2nd|3rd|4th|5th)\s+(?:image|view|picture|photo|render|option|candidate|one)\b")
            .expect("ordinal regex")
    })
}

fn standalone() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(\d+|one|two|three|four|five|six|seven|eight|nine|ten|first|second|third|fourth|fifth)\b")
            .expect("standalone regex")
    })
}

/// Direct references: a bare numeral reply, "image 3", "the second view".
fn direct_index(text: &str, max: usize) -> Option<usize> {
    let lower = text.trim().to_lowercase();
    let bare = lower.trim_matches(|c: char| !c.is_alphanumeric());
    if let Some(n) = numeral_value(bare) {
        return (1..=max).contains(&n).then_some(n);
    }
    for re in [referenced(), ordinal_reference()] {
        if let Some(n) = re.captures(&lower).and_then(|c| numeral_value(&c[1].to_lowercase())) {
            if (1..=max).contains(&n) {
                return Some(n);
            }
        }
    }
    None
}

/// Any in-range numeral, if exactly one distinct value appears.
fn sole_numeral(text: &str, max: usize) -> Option<usize> {
    let lower = text.to_lowercase();
    let mut found: Vec<usize> = standalone()
        .captures_iter(&lower)
        .filter_map(|c| numeral_value(&c[1]))
        .filter(|n| (1..=max).contains(n))
        .collect();
    found.dedup();
    found.sort_unstable();
    found.dedup();
    (found.len() == 1).then(|| found[0])
}

/// Extracts a 1-based index in `1..=max` from a reply such as `"3"`,
/// `"Image 2."` or `"front is image two"`.
pub fn parse_index(text: &str, max: usize) -> Option<usize> {
    direct_index(text, max).or_else(|| sole_numeral(text, max))
}

fn none_phrase() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(?:none|no\s+(?:suitable\s+)?match|no\s+suitable|not\s+suitable|nothing\s+matches|no\s+candidate)\b")
            .expect("none regex")
    })
}

/// A vote among `candidates`: a candidate number, or "none".
pub fn parse_vote(text: &str, candidates: usize) -> Option<VoteChoice> {
    let trimmed = text.trim().trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed == "0" {
        return Some(VoteChoice::NoMatch);
    }
    if let Some(n) = direct_index(text, candidates) {
        return Some(VoteChoice::Candidate(n));
    }
    if none_phrase().is_match(text) {
        return Some(VoteChoice::NoMatch);
    }
    sole_numeral(text, candidates).map(VoteChoice::Candidate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_in_fence() {
        let v = extract_json("Sure!\n```json\n{\"order\": [\"a\"]}\n```\nDone").unwrap();
        assert_eq!(v["order"][0], "a");
    }

    #[test]
    fn json_without_fence() {
        let v = extract_json("The answer is {\"a\": {\"b\": \"}\"}} ok").unwrap();
        assert_eq!(v["a"]["b"], "}");
        assert!(extract_json("no json here").is_none());
        assert!(extract_json("{broken").is_none());
    }

    #[test]
    fn second_fence_used_when_first_is_invalid() {
        let v = extract_json("```\nnot json\n```\n```json\n{\"x\": 1}\n```").unwrap();
        assert_eq!(v["x"], 1);
    }

    #[test]
    fn index_examples() {
        assert_eq!(parse_index("3", 4), Some(3));
        assert_eq!(parse_index("1", 4), Some(1));
        assert_eq!(parse_index("front is image two", 4), Some(2));
        assert_eq!(parse_index("7", 4), None);
        assert_eq!(parse_index("either 1 or 2", 4), None);
        assert_eq!(parse_index("no idea", 4), None);
    }

    #[test]
    fn vote_examples() {
        assert_eq!(parse_vote("1", 5), Some(VoteChoice::Candidate(1)));
        assert_eq!(parse_vote("none", 5), Some(VoteChoice::NoMatch));
        assert_eq!(parse_vote("None of these fit.", 5), Some(VoteChoice::NoMatch));
        assert_eq!(parse_vote("Candidate 4 is the closest.", 5), Some(VoteChoice::Candidate(4)));
        assert_eq!(parse_vote("0", 5), Some(VoteChoice::NoMatch));
        assert_eq!(parse_vote("asdfgh", 5), None);
        assert_eq!(parse_vote("6", 5), None);
    }
}
