//! Relation inventories and the label strings that name their classes.
//!
//! A directed label is written `Type(e1,e2)` or `Type(e2,e1)`; the residual
//! class is written bare.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::RelationLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaName {
    Sanwen,
    Semeval,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSchema {
    pub name: SchemaName,
    pub relations: Vec<String>,
    pub residual: String,
    #[serde(default = "directed_default")]
    pub directed: bool,
}

fn directed_default() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema has no relation types")]
    NoRelations,
    #[error("residual class {0:?} is also listed as a relation type")]
    ResidualCollides(String),
    #[error("relation type {0:?} is listed twice")]
    Duplicate(String),
    #[error("relation type {0:?} contains '(' or whitespace")]
    BadName(String),
    #[error("undirected relation types are not supported")]
    Undirected,
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("schema mismatch: {0}")]
    Mismatch(String),
    #[error("reading schema {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing schema {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl LabelSchema {
    pub fn sanwen() -> Self {
        LabelSchema {
            name: SchemaName::Sanwen,
            relations: owned(&[
                "Located",
                "Near",
                "Part-Whole",
                "Family",
                "Social",
                "Create",
                "Use",
                "Ownership",
                "General-Special",
            ]),
            residual: "Null".into(),
            directed: true,
        }
    }

    pub fn semeval() -> Self {
        LabelSchema {
            name: SchemaName::Semeval,
            relations: owned(&[
                "Cause-Effect",
                "Component-Whole",
                "Content-Container",
                "Entity-Destination",
                "Entity-Origin",
                "Message-Topic",
                "Member-Collection",
                "Instrument-Agency",
                "Product-Agency",
            ]),
            residual: "Other".into(),
            directed: true,
        }
    }

    pub fn custom(relations: Vec<String>, residual: impl Into<String>) -> Result<Self, SchemaError> {
        let schema = LabelSchema {
            name: SchemaName::Custom,
            relations,
            residual: residual.into(),
            directed: true,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// `sanwen`, `semeval`, or a path to a JSON schema file.
    pub fn resolve(spec: &str) -> Result<Self, SchemaError> {
        match spec {
            "sanwen" => Ok(Self::sanwen()),
            "semeval" => Ok(Self::semeval()),
            path => Self::from_path(path),
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let shown = path.as_ref().display().to_string();
        let text = fs::read_to_string(&path).map_err(|source| SchemaError::Io {
            path: shown.clone(),
            source,
        })?;
        let schema: LabelSchema =
            serde_json::from_str(&text).map_err(|source| SchemaError::Json { path: shown, source })?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.relations.is_empty() {
            return Err(SchemaError::NoRelations);
        }
        if !self.directed {
            return Err(SchemaError::Undirected);
        }
        for (i, r) in self.relations.iter().enumerate() {
            if r.is_empty() || r.contains('(') || r.contains(char::is_whitespace) {
                return Err(SchemaError::BadName(r.clone()));
            }
            if self.relations[..i].contains(r) {
                return Err(SchemaError::Duplicate(r.clone()));
            }
        }
        if self.relations.contains(&self.residual) {
            return Err(SchemaError::ResidualCollides(self.residual.clone()));
        }
        Ok(())
    }

    /// Number of directed relation types `K`.
    pub fn k(&self) -> usize {
        self.relations.len()
    }

    pub fn fine_classes(&self) -> usize {
        2 * self.k() + 1
    }

    pub fn coarse_classes(&self) -> usize {
        self.k() + 1
    }

    pub fn parse_label(&self, s: &str) -> Result<RelationLabel, SchemaError> {
        let s = s.trim();
        if s == self.residual {
            return Ok(RelationLabel::Residual);
        }
        let unknown = || SchemaError::UnknownLabel(s.to_string());
        let open = s.find('(').ok_or_else(unknown)?;
        let args: String = s[open..].chars().filter(|c| !c.is_whitespace()).collect();
        let reversed = match args.as_str() {
            "(e1,e2)" => false,
            "(e2,e1)" => true,
            _ => return Err(unknown()),
        };
        let kind = self
            .relations
            .iter()
            .position(|r| r == s[..open].trim())
            .ok_or_else(unknown)?;
        Ok(RelationLabel::Directed { kind, reversed })
    }

    pub fn format_label(&self, label: RelationLabel) -> String {
        match label {
            RelationLabel::Directed { kind, reversed } => {
                let args = if reversed { "(e2,e1)" } else { "(e1,e2)" };
                format!("{}{}", self.relations[kind], args)
            }
            RelationLabel::Residual => self.residual.clone(),
        }
    }

    /// Every class name in fine-index order.
    pub fn fine_labels(&self) -> Vec<String> {
        (0..self.fine_classes())
            .map(|i| self.format_label(RelationLabel::from_fine(i, self.k()).expect("in range")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_class_counts() {
        for s in [LabelSchema::sanwen(), LabelSchema::semeval()] {
            s.validate().unwrap();
            assert_eq!((s.fine_classes(), s.coarse_classes()), (19, 10));
        }
    }

    #[test]
    fn labels_round_trip() {
        let s = LabelSchema::semeval();
        for (i, name) in s.fine_labels().iter().enumerate() {
            let label = s.parse_label(name).unwrap();
            assert_eq!(label.fine_index(9), i);
        }
        assert_eq!(
            s.parse_label("Cause-Effect(e2, e1)").unwrap(),
            RelationLabel::Directed {
                kind: 0,
                reversed: true
            }
        );
        assert!(s.parse_label("Cause-Effect").is_err());
        assert!(s.parse_label("Null").is_err());
        assert!(s.parse_label("Cause-Effect(e1,e3)").is_err());
    }

    #[test]
    fn custom_validation() {
        assert!(matches!(
            LabelSchema::custom(vec![], "Other"),
            Err(SchemaError::NoRelations)
        ));
        assert!(matches!(
            LabelSchema::custom(vec!["A".into(), "Other".into()], "Other"),
            Err(SchemaError::ResidualCollides(_))
        ));
        assert!(matches!(
            LabelSchema::custom(vec!["A".into(), "A".into()], "Other"),
            Err(SchemaError::Duplicate(_))
        ));
        let json = r#"{"name":"custom","relations":["A"],"residual":"None","directed":false}"#;
        let s: LabelSchema = serde_json::from_str(json).unwrap();
        assert!(matches!(s.validate(), Err(SchemaError::Undirected)));
    }
}
