use super::RequestKind;
use jsonschema::JSONSchema;
use serde_json::Value;
use std::collections::BTreeMap;

const BUILTIN: &[(RequestKind, &str)] = &[
    (RequestKind::ExtractObjects, include_str!("../../schemas/extract_objects.json")),
    (RequestKind::ExtractConstraints, include_str!("../../schemas/extract_constraints.json")),
    (RequestKind::Order, include_str!("../../schemas/order.json")),
    (RequestKind::Place, include_str!("../../schemas/place.json")),
    (RequestKind::Refine, include_str!("../../schemas/refine.json")),
];

/// Compiled reply schemas for the JSON request kinds.
pub struct SchemaRegistry {
    compiled: BTreeMap<RequestKind, JSONSchema>,
}

impl std::fmt::Debug for SchemaRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.compiled.keys()).finish()
    }
}

impl SchemaRegistry {
    pub fn builtin() -> Self {
        let compiled = BUILTIN
            .iter()
            .map(|(kind, text)| {
                let value: Value = serde_json::from_str(text).expect("builtin schema is valid JSON");
                let schema = JSONSchema::compile(&value).expect("builtin schema compiles");
                (*kind, schema)
            })
            .collect();
        Self { compiled }
    }

    /// Raw text of a shipped schema.
    pub fn source(kind: RequestKind) -> Option<&'static str> {
        BUILTIN.iter().find(|(k, _)| *k == kind).map(|(_, t)| *t)
    }

    pub fn validate(&self, kind: RequestKind, value: &Value) -> Result<(), String> {
        let schema = self
            .compiled
            .get(&kind)
            .ok_or_else(|| format!("no JSON schema for {kind} replies"))?;
        schema.validate(value).map_err(|errors| {
            errors
                .map(|e| format!("{} at {}", e, e.instance_path))
                .collect::<Vec<_>>()
                .join("; ")
        })
    }
}
