//! JSON-lines datasets. Each line holds one record:
//!
//! ```text
//! {"id":"s1","conllu":"1\tcats\t...","e1":[1,1],"e2":[4,5],"label":"Located(e1,e2)"}
//! ```
//!
//! Spans are 1-based inclusive token ranges into the single sentence of
//! `conllu`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schema::{LabelSchema, SchemaError};
use crate::depgraph::{parse_conllu, serialize_conllu, ConlluError, EntityId, EntitySpan, Instance};
use crate::model::RelationLabel;

pub type LabeledInstance = Instance<RelationLabel>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    pub conllu: String,
    pub e1: [usize; 2],
    pub e2: [usize; 2],
    pub label: String,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("invalid record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid sentence: {0}")]
    Conllu(#[from] ConlluError),
    #[error("expected one sentence, found {0}")]
    SentenceCount(usize),
    #[error("{which} span [{start}, {end}] does not fit a {len}-token sentence")]
    BadSpan {
        which: &'static str,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("entity spans overlap")]
    OverlappingSpans,
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Error)]
#[error("line {line}{}: {error}", id.as_ref().map(|i| format!(" ({i})")).unwrap_or_default())]
pub struct Diagnostic {
    pub line: usize,
    pub id: Option<String>,
    pub error: RecordError,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Record(#[from] Diagnostic),
}

#[derive(Debug, Default)]
pub struct Dataset {
    pub instances: Vec<LabeledInstance>,
    /// Records that were skipped; always empty under fail-fast loading.
    pub diagnostics: Vec<Diagnostic>,
}

pub fn parse_record(record: &DatasetRecord, schema: &LabelSchema) -> Result<LabeledInstance, RecordError> {
    let mut trees = parse_conllu(&record.conllu)?;
    if trees.len() != 1 {
        return Err(RecordError::SentenceCount(trees.len()));
    }
    let tree = trees.pop().expect("one tree");
    let span = |which, [start, end]: [usize; 2], id| {
        let s = EntitySpan::new(start, end, id);
        if s.is_valid_for(&tree) {
            Ok(s)
        } else {
            Err(RecordError::BadSpan {
                which,
                start,
                end,
                len: tree.len(),
            })
        }
    };
    let e1 = span("e1", record.e1, EntityId::E1)?;
    let e2 = span("e2", record.e2, EntityId::E2)?;
    if e1.overlaps(&e2) {
        return Err(RecordError::OverlappingSpans);
    }
    let label = schema.parse_label(&record.label)?;
    Ok(Instance {
        id: record.id.clone(),
        tree,
        e1,
        e2,
        label,
    })
}

pub fn to_record(instance: &LabeledInstance, schema: &LabelSchema) -> DatasetRecord {
    DatasetRecord {
        id: instance.id.clone(),
        conllu: serialize_conllu(std::slice::from_ref(&instance.tree)),
        e1: [instance.e1.start, instance.e1.end],
        e2: [instance.e2.start, instance.e2.end],
        label: schema.format_label(instance.label),
    }
}

/// Reads records line by line. Blank lines are ignored. Without
/// `fail_fast`, bad records are collected as diagnostics and skipped.
pub fn read_dataset(reader: impl BufRead, schema: &LabelSchema, fail_fast: bool) -> Result<Dataset, DatasetError> {
    let mut out = Dataset::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: "<input>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<DatasetRecord>(&line)
            .map_err(|e| (None, RecordError::from(e)))
            .and_then(|r| parse_record(&r, schema).map_err(|e| (Some(r.id.clone()), e)));
        match parsed {
            Ok(inst) => out.instances.push(inst),
            Err((id, error)) => {
                let d = Diagnostic { line: i + 1, id, error };
                if fail_fast {
                    return Err(d.into());
                }
                log::warn!("skipping {d}");
                out.diagnostics.push(d);
            }
        }
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &LabelSchema, fail_fast: bool) -> Result<Dataset, DatasetError> {
    let shown = path.as_ref().display().to_string();
    let file = File::open(&path).map_err(|source| DatasetError::Io {
        path: shown.clone(),
        source,
    })?;
    let data = read_dataset(BufReader::new(file), schema, fail_fast).map_err(|e| match e {
        DatasetError::Io { source, .. } => DatasetError::Io {
            path: shown.clone(),
            source,
        },
        other => other,
    })?;
    if data.instances.is_empty() {
        log::warn!("{shown}: no instances");
    } else {
        log::info!("{shown}: {} instances", data.instances.len());
        for (label, n) in class_histogram(&data.instances, schema) {
            log::info!("  {label}: {n}");
        }
    }
    Ok(data)
}

pub fn write_dataset(mut w: impl Write, instances: &[LabeledInstance], schema: &LabelSchema) -> io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut w, &to_record(inst, schema))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Instance count per label string, for labels that occur.
pub fn class_histogram(instances: &[LabeledInstance], schema: &LabelSchema) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for inst in instances {
        *h.entry(schema.format_label(inst.label)).or_insert(0) += 1;
    }
    h
}

/// Count of paths per node count.
pub fn length_histogram(lengths: impl IntoIterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for n in lengths {
        *h.entry(n).or_insert(0) += 1;
    }
    h
}
