//! Semantic mediation between a producer's output schema and a consumer's
//! input schema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::registry::{InterfaceSchema, ModelDescriptor};

/// Maps partner-specific semantic types onto canonical names.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemanticDictionary(pub BTreeMap<String, String>);

impl SemanticDictionary {
    /// Canonical form of a semantic type; unmapped types are their own canon.
    pub fn canonical<'a>(&'a self, semantic_type: &'a str) -> &'a str {
        self.0.get(semantic_type).map(String::as_str).unwrap_or(semantic_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldMapping {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaMapping {
    pub from_schema: String,
    pub to_schema: String,
    pub field_map: Vec<FieldMapping>,
    /// True if any required consumer field is left unmapped.
    pub lossiness: bool,
    pub unmapped_required: Vec<String>,
}

/// Maps each consumer field from a producer field of the same canonical
/// semantic type.
///
/// A producer field with the consumer field's own name wins; otherwise the
/// lexicographically smallest matching producer field is used.
pub fn mediate(producer: &InterfaceSchema, consumer: &InterfaceSchema, dictionary: &SemanticDictionary) -> SchemaMapping {
    let mut field_map = Vec::new();
    let mut unmapped_required = Vec::new();
    for want in &consumer.fields {
        let canon = dictionary.canonical(&want.semantic_type);
        let matches = producer.fields.iter().filter(|f| dictionary.canonical(&f.semantic_type) == canon);
        let pick = matches
            .clone()
            .find(|f| f.field_name == want.field_name)
            .or_else(|| matches.min_by(|a, b| a.field_name.cmp(&b.field_name)));
        match pick {
            Some(src) => field_map.push(FieldMapping { source: src.field_name.clone(), target: want.field_name.clone() }),
            None if want.required => unmapped_required.push(want.field_name.clone()),
            None => {}
        }
    }
    SchemaMapping {
        from_schema: String::new(),
        to_schema: String::new(),
        field_map,
        lossiness: !unmapped_required.is_empty(),
        unmapped_required,
    }
}

/// [`mediate`] between two registered models, labelling the schema identities.
pub fn mediate_models(producer: &ModelDescriptor, consumer: &ModelDescriptor, dictionary: &SemanticDictionary) -> SchemaMapping {
    SchemaMapping {
        from_schema: format!("{}.output", producer.model_id),
        to_schema: format!("{}.input", consumer.model_id),
        ..mediate(&producer.output_schema, &consumer.input_schema, dictionary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::SchemaField;

    fn schema(fields: &[(&str, &str, bool)]) -> InterfaceSchema {
        InterfaceSchema::new(fields.iter().map(|&(n, t, r)| SchemaField::new(n, t, r)).collect())
    }

    fn pairs(m: &SchemaMapping) -> Vec<(&str, &str)> {
        m.field_map.iter().map(|f| (f.source.as_str(), f.target.as_str())).collect()
    }

    #[test]
    fn identical_schemas_map_identically() {
        let s = schema(&[("lat", "degrees", true), ("lon", "degrees", true), ("t", "time", false)]);
        let m = mediate(&s, &s, &SemanticDictionary::default());
        assert_eq!(pairs(&m), vec![("lat", "lat"), ("lon", "lon"), ("t", "t")]);
        assert!(!m.lossiness);
    }

    #[test]
    fn missing_required_field_is_lossy() {
        let p = schema(&[("pos", "geo", true)]);
        let c = schema(&[("location", "geo", true), ("heading", "angle", true)]);
        let m = mediate(&p, &c, &SemanticDictionary::default());
        assert_eq!(pairs(&m), vec![("pos", "location")]);
        assert!(m.lossiness);
        assert_eq!(m.unmapped_required, vec!["heading".to_string()]);
    }

    #[test]
    fn smallest_name_wins_ties() {
        let p = schema(&[("b", "geo", true), ("a", "geo", true)]);
        let c = schema(&[("x", "geo", true)]);
        assert_eq!(pairs(&mediate(&p, &c, &SemanticDictionary::default())), vec![("a", "x")]);
    }

    #[test]
    fn dictionary_bridges_vocabularies() {
        let p = schema(&[("pos", "wgs84", true)]);
        let c = schema(&[("where", "geo", true)]);
        let dict = SemanticDictionary(BTreeMap::from([
            ("wgs84".to_string(), "position".to_string()),
            ("geo".to_string(), "position".to_string()),
        ]));
        let m = mediate(&p, &c, &dict);
        assert_eq!(pairs(&m), vec![("pos", "where")]);
        assert!(!mediate(&p, &c, &SemanticDictionary::default()).field_map.iter().any(|_| true));
    }

    #[test]
    fn optional_fields_never_cause_loss() {
        let m = mediate(&schema(&[]), &schema(&[("extra", "x", false)]), &SemanticDictionary::default());
        assert!(!m.lossiness);
        assert!(m.field_map.is_empty());
    }
}
