use regex::Regex;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

/// Bumped whenever a shipped template under `prompts/` changes.
pub const PROMPT_LIBRARY_VERSION: u32 = 1;

const BUILTIN: &[(&str, &str)] = &[
    ("caption", include_str!("../../prompts/caption.txt")),
    ("orient", include_str!("../../prompts/orient.txt")),
    ("extract_objects", include_str!("../../prompts/extract_objects.txt")),
    ("vote", include_str!("../../prompts/vote.txt")),
    ("extract_constraints", include_str!("../../prompts/extract_constraints.txt")),
    ("order", include_str!("../../prompts/order.txt")),
    ("place", include_str!("../../prompts/place.txt")),
    ("refine", include_str!("../../prompts/refine.txt")),
    ("repair", include_str!("../../prompts/repair.txt")),
    ("embed_document", include_str!("../../prompts/embed_document.txt")),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {template:?} needs a value for placeholder {key:?}")]
    MissingKey { template: String, key: String },
    #[error("no template named {0:?}")]
    UnknownTemplate(String),
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

impl TemplateError {
    /// The missing placeholder, if that is the failure.
    pub fn missing_key(&self) -> Option<&str> {
        match self {
            TemplateError::MissingKey { key, .. } => Some(key),
            _ => None,
        }
    }
}

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_][a-z0-9_]*)\}").expect("placeholder regex"))
}

/// Named prompt templates with `{key}` placeholders.
///
/// Only lowercase identifiers in braces are placeholders, so JSON examples
/// inside templates pass through untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptLibrary {
    templates: BTreeMap<String, String>,
}

impl PromptLibrary {
    /// The templates shipped under `prompts/`.
    pub fn builtin() -> Self {
        Self {
            templates: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Builtin templates, overridden by any `<name>.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut lib = Self::builtin();
        let names: Vec<String> = lib.templates.keys().cloned().collect();
        for name in names {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                lib.templates.insert(name, text);
            }
        }
        Ok(lib)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.templates.get(name).map(String::as_str)
    }

    /// Placeholders a template expects, in order of first appearance.
    pub fn placeholders(&self, name: &str) -> Result<Vec<String>, TemplateError> {
        let text = self
            .get(name)
            .ok_or_else(|| TemplateError::UnknownTemplate(name.to_string()))?;
        let mut keys: Vec<String> = Vec::new();
        for cap in placeholder().captures_iter(text) {
            let k = cap[1].to_string();
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        Ok(keys)
    }

    /// Substitutes every placeholder. Output is a pure function of the inputs.
    pub fn render(&self, name: &str, context: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        let text = self
            .get(name)
            .ok_or_else(|| TemplateError::UnknownTemplate(name.to_string()))?;
        if let Some(missing) = placeholder()
            .captures_iter(text)
            .map(|c| c[1].to_string())
            .find(|k| !context.contains_key(k))
        {
            return Err(TemplateError::MissingKey {
                template: name.to_string(),
                key: missing,
            });
        }
        let out = placeholder().replace_all(text, |c: &regex::Captures<'_>| context[&c[1]].clone());
        Ok(out.trim_end().to_string())
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn caption_contains_name() {
        let lib = PromptLibrary::builtin();
        let out = lib.render("caption", &ctx(&[("name", "oak chair")])).unwrap();
        assert!(out.contains("oak chair"));
        assert!(out.contains("(3) Contextual properties"));
    }

    #[test]
    fn missing_key_is_named() {
        let lib = PromptLibrary::builtin();
        let err = lib.render("caption", &ctx(&[])).unwrap_err();
        assert_eq!(err.missing_key(), Some("name"));
    }

    #[test]
    fn json_examples_are_not_placeholders() {
        let lib = PromptLibrary::builtin();
        let keys = lib.placeholders("refine").unwrap();
        assert!(keys.iter().all(|k| !k.contains('"')));
        assert!(keys.contains(&"slot_id".to_string()));
    }

    #[test]
    fn rendering_is_deterministic() {
        let lib = PromptLibrary::builtin();
        let c = ctx(&[("name", "lamp")]);
        assert_eq!(lib.render("orient", &c).unwrap(), lib.render("orient", &c).unwrap());
    }

    #[test]
    fn overrides_replace_builtin() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("vote.txt"), "custom {name}").unwrap();
        let lib = PromptLibrary::with_overrides(dir.path()).unwrap();
        assert_eq!(lib.render("vote", &ctx(&[("name", "x")])).unwrap(), "custom x");
        assert!(lib.get("caption").is_some());
    }
}
