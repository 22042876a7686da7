//! Bundled reference values for annotating model output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

const REFERENCE_JSON: &str = include_str!("../reference_values.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceValues {
    pub label: String,
    pub note: String,
    pub values: BTreeMap<String, f64>,
}

impl ReferenceValues {
    pub fn bundled() -> Self {
        serde_json::from_str(REFERENCE_JSON).expect("bundled reference values are valid JSON")
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// A model value next to its reference counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotated {
    pub model: f64,
    pub reference: Option<f64>,
}

impl Annotated {
    pub fn new(model: f64, reference: Option<f64>) -> Self {
        Self { model, reference }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_values_load() {
        let r = ReferenceValues::bundled();
        assert_eq!(r.label, "reference");
        assert_eq!(r.get("source_squeezing_db"), Some(7.8));
        assert_eq!(r.get("missing"), None);
    }
}
