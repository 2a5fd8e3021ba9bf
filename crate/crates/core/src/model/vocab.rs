use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::depgraph::{DependencyTree, Direction, SdpPath};
use crate::structreg::SR_LINK;

pub const UNK: usize = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// Word and directed-relation indices for the embedding tables. Row 0 of
/// each table is UNK. Relation `r` occupies two rows, one per direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    words: Vec<String>,
    relations: Vec<String>,
    word_index: HashMap<String, usize>,
    rel_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    words: Vec<String>,
    relations: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        Vocab::from_lists(r.words, r.relations)
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            words: v.words,
            relations: v.relations,
        }
    }
}

impl Vocab {
    /// `words` excludes UNK; `relations` is the undirected label list and
    /// gets [`SR_LINK`] appended when missing.
    pub fn from_lists(words: Vec<String>, mut relations: Vec<String>) -> Self {
        if !relations.iter().any(|r| r == SR_LINK) {
            relations.push(SR_LINK.to_string());
        }
        let word_index = words.iter().enumerate().map(|(i, w)| (w.clone(), i + 1)).collect();
        let rel_index = relations.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        Vocab {
            words,
            relations,
            word_index,
            rel_index,
        }
    }

    /// Counts forms and relation labels over training trees.
    pub fn build<'a>(trees: impl IntoIterator<Item = &'a DependencyTree>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut rels: BTreeSet<String> = BTreeSet::new();
        for tree in trees {
            for tok in tree.tokens() {
                *counts.entry(tok.form.as_str()).or_default() += 1;
                rels.insert(tok.deprel.clone());
            }
        }
        let words = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .map(|(w, _)| w.to_string())
            .collect();
        Vocab::from_lists(words, rels.into_iter().collect())
    }

    /// Rows in the word table, UNK included.
    pub fn word_rows(&self) -> usize {
        self.words.len() + 1
    }

    /// Rows in the relation table: two per relation plus UNK.
    pub fn relation_rows(&self) -> usize {
        2 * self.relations.len() + 1
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.word_index.get(form).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> &str {
        if id == UNK {
            UNK_TOKEN
        } else {
            &self.words[id - 1]
        }
    }

    pub fn relation_id(&self, deprel: &str, direction: Direction) -> usize {
        match self.rel_index.get(deprel) {
            Some(&i) => 1 + 2 * i + (direction == Direction::Down) as usize,
            None => UNK,
        }
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }
}

/// Embedding-table indices for one path, in walking order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathFeatures {
    pub words: Vec<usize>,
    pub relations: Vec<usize>,
}

impl PathFeatures {
    pub fn new(path: &SdpPath, tree: &DependencyTree, vocab: &Vocab) -> Self {
        PathFeatures {
            words: path.nodes.iter().map(|&i| vocab.word_id(&tree.token(i).form)).collect(),
            relations: path
                .edges
                .iter()
                .map(|e| vocab.relation_id(&e.deprel, e.direction))
                .collect(),
        }
    }
}

/// Reads `word v1 v2 ... vd` lines. A leading `count dim` header is skipped.
/// Lines whose vector length differs from the first one are rejected.
pub fn read_word_vectors(reader: impl BufRead) -> std::io::Result<HashMap<String, Vec<f64>>> {
    let mut out = HashMap::new();
    let mut dim = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        if dim.is_none() && out.is_empty() && is_header(&line) {
            continue;
        }
        let values: Result<Vec<f64>, _> = parts.map(str::parse).collect();
        let values =
            values.map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        if values.is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: expected {d} values, found {}", n + 1, values.len()),
                ))
            }
            _ => {}
        }
        out.insert(word.to_string(), values);
    }
    Ok(out)
}

fn is_header(line: &str) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}
