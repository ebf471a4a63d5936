use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::OnceLock;

/// Structured object description in three sections.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TripartiteCaption {
    pub physical: String,
    pub functional: String,
    pub contextual: String,
}

impl TripartiteCaption {
    pub fn new(physical: impl Into<String>, functional: impl Into<String>, contextual: impl Into<String>) -> Self {
        Self {
            physical: physical.into(),
            functional: functional.into(),
            contextual: contextual.into(),
        }
    }

    pub fn is_complete(&self) -> bool {
        !self.physical.trim().is_empty() && !self.functional.trim().is_empty() && !self.contextual.trim().is_empty()
    }

    /// Names of the empty sections.
    pub fn missing_sections(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.physical.trim().is_empty() {
            out.push("physical");
        }
        if self.functional.trim().is_empty() {
            out.push("functional");
        }
        if self.contextual.trim().is_empty() {
            out.push("contextual");
        }
        out
    }

    /// Template context with `physical`, `functional` and `contextual` keys.
    pub fn context(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("physical".to_string(), self.physical.clone()),
            ("functional".to_string(), self.functional.clone()),
            ("contextual".to_string(), self.contextual.clone()),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("caption incomplete: missing {missing:?} section(s)")]
pub struct CaptionParseError {
    pub missing: Vec<&'static str>,
    /// Whatever sections were found.
    pub partial: TripartiteCaption,
}

fn header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?imx)
              \(\s*(?P<num>[123])\s*\)
              [\ \t*_\#]*
              (?:(?P<name>physical|functional|contextual)(?:\ +propert(?:y|ies))?)?
              [\ \t*_]*:?[\ \t*_]*
            | ^[\ \t\#>*_-]*(?:[123]\s*[.):])?[\ \t*_\#]*
              (?P<bare>physical|functional|contextual)
              (?:\ +propert(?:y|ies)[\ \t*_]*:?|[\ \t*_]*:)
              [\ \t*_]*
            ",
        )
        .expect("caption header regex")
    })
}

fn section_of(caps: &regex::Captures<'_>) -> Option<usize> {
    let by_name = |s: &str| match s.to_ascii_lowercase().as_str() {
        "physical" => Some(0),
        "functional" => Some(1),
        "contextual" => Some(2),
        _ => None,
    };
    if let Some(n) = caps.name("name").or_else(|| caps.name("bare")) {
        return by_name(n.as_str());
    }
    caps.name("num")
        .and_then(|m| m.as_str().parse::<usize>().ok())
        .map(|n| n - 1)
}

fn clean(text: &str) -> String {
    let lines: Vec<&str> = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .collect();
    lines
        .join("\n")
        .trim_matches(|c: char| c.is_whitespace() || c == '*' || c == '_' || c == '-' || c == '#')
        .to_string()
}

/// Splits a captioning reply into its three sections.
///
/// Sections are located by their headers, either numbered (`(1)`) or
/// named (`Physical properties`, `2. Functional properties`); a name wins over a number, so replies that
/// reorder or renumber sections are still assigned correctly.
pub fn parse_caption(text: &str) -> Result<TripartiteCaption, CaptionParseError> {
    // (section, header start, content start); first header per section wins.
    let mut found: Vec<(usize, usize, usize)> = Vec::new();
    for caps in header().captures_iter(text) {
        let Some(section) = section_of(&caps) else { continue };
        if found.iter().any(|(s, _, _)| *s == section) {
            continue;
        }
        let m = caps.get(0).expect("whole match");
        found.push((section, m.start(), m.end()));
    }
    found.sort_by_key(|(_, start, _)| *start);
    let mut sections = [String::new(), String::new(), String::new()];
    for (i, (section, _, content_start)) in found.iter().enumerate() {
        let end = found.get(i + 1).map_or(text.len(), |(_, s, _)| *s);
        sections[*section] = clean(&text[*content_start..end.max(*content_start)]);
    }
    let [physical, functional, contextual] = sections;
    let caption = TripartiteCaption {
        physical,
        functional,
        contextual,
    };
    if caption.is_complete() {
        Ok(caption)
    } else {
        Err(CaptionParseError {
            missing: caption.missing_sections(),
            partial: caption,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_sections() {
        let c = parse_caption(
            "(1) Physical properties: A tall oak chair.\n(2) Functional properties: For sitting.\n(3) Contextual properties: Dining rooms.",
        )
        .unwrap();
        assert_eq!(c.physical, "A tall oak chair.");
        assert_eq!(c.functional, "For sitting.");
        assert_eq!(c.contextual, "Dining rooms.");
    }

    #[test]
    fn missing_third_section() {
        let err = parse_caption("(1) Physical properties: red.\n(2) Functional properties: holds books.").unwrap_err();
        assert_eq!(err.missing, vec!["contextual"]);
        assert_eq!(err.partial.physical, "red.");
    }

    #[test]
    fn empty_section_is_incomplete() {
        assert!(parse_caption("(1) Physical properties:\n(2) Functional properties: x\n(3) Contextual properties: y").is_err());
    }
}
