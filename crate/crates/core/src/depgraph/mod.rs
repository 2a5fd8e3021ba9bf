//! Dependency-parsed sentences: tokens, validated trees, entity spans and
//! tree paths.
//!
//! A [`DependencyTree`] is immutable once built. Construction checks that
//! token ids run `1..=n`, that exactly one token attaches to the virtual root
//! and that following heads from any token reaches the root.

mod conllu;
mod path;

pub use conllu::{parse_conllu, serialize_conllu, ConlluError};
pub use path::{path_between, Direction, PathEdge, RootedStructure, SdpPath};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CoNLL-U columns the model never reads, kept verbatim for round-trips.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpaqueColumns {
    pub lemma: String,
    pub xpos: String,
    pub feats: String,
    pub deps: String,
    pub misc: String,
}

impl OpaqueColumns {
    pub fn blank() -> Self {
        let u = || "_".to_string();
        OpaqueColumns {
            lemma: u(),
            xpos: u(),
            feats: u(),
            deps: u(),
            misc: u(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based sentence position.
    pub index: usize,
    pub form: String,
    /// Coarse part-of-speech tag (UPOS column).
    pub pos: String,
    /// Head position, `0` for the virtual root.
    pub head: usize,
    pub deprel: String,
    #[serde(default = "OpaqueColumns::blank")]
    pub extra: OpaqueColumns,
}

impl Token {
    pub fn new(
        index: usize,
        form: impl Into<String>,
        pos: impl Into<String>,
        head: usize,
        deprel: impl Into<String>,
    ) -> Self {
        Token {
            index,
            form: form.into(),
            pos: pos.into(),
            head,
            deprel: deprel.into(),
            extra: OpaqueColumns::blank(),
        }
    }
}

/// Structural problems found while validating a token list.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("empty sentence")]
    Empty,
    #[error("token ids must be contiguous from 1: expected {expected}, found {found}")]
    NonContiguous { expected: usize, found: usize },
    #[error("tokens {first} and {second} both attach to the root")]
    MultipleRoots { first: usize, second: usize },
    #[error("no token attaches to the root")]
    NoRoot,
    #[error("head chain starting at token {token} never reaches the root")]
    CycleDetected { token: usize },
    #[error("token {token} has head {head}, outside 0..={len}")]
    HeadOutOfRange { token: usize, head: usize, len: usize },
}

/// A rooted, labeled tree over the tokens of one sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Token>", into = "Vec<Token>")]
pub struct DependencyTree {
    tokens: Vec<Token>,
    root: usize,
}

impl DependencyTree {
    pub fn new(tokens: Vec<Token>) -> Result<Self, TreeError> {
        if tokens.is_empty() {
            return Err(TreeError::Empty);
        }
        let n = tokens.len();
        let mut root = None;
        for (pos, tok) in tokens.iter().enumerate() {
            if tok.index != pos + 1 {
                return Err(TreeError::NonContiguous {
                    expected: pos + 1,
                    found: tok.index,
                });
            }
            if tok.head > n {
                return Err(TreeError::HeadOutOfRange {
                    token: tok.index,
                    head: tok.head,
                    len: n,
                });
            }
            if tok.head == tok.index {
                return Err(TreeError::CycleDetected { token: tok.index });
            }
            if tok.head == 0 {
                match root {
                    None => root = Some(tok.index),
                    Some(first) => {
                        return Err(TreeError::MultipleRoots {
                            first,
                            second: tok.index,
                        })
                    }
                }
            }
        }
        let root = root.ok_or(TreeError::NoRoot)?;

        // 0 = unvisited, 1 = on the current chain, 2 = known to reach the root
        let mut state = vec![0u8; n + 1];
        state[0] = 2;
        for start in 1..=n {
            let mut chain = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                chain.push(cur);
                cur = tokens[cur - 1].head;
            }
            if state[cur] == 1 {
                return Err(TreeError::CycleDetected { token: start });
            }
            for t in chain {
                state[t] = 2;
            }
        }
        Ok(DependencyTree { tokens, root })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The unique token whose head is `0`.
    pub fn root(&self) -> usize {
        self.root
    }

    /// Token at 1-based position `index`. Panics when out of range.
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn head(&self, index: usize) -> usize {
        self.token(index).head
    }

    /// Number of head edges between `index` and the root token.
    pub fn depth(&self, index: usize) -> usize {
        let mut depth = 0;
        let mut cur = index;
        while self.head(cur) != 0 {
            cur = self.head(cur);
            depth += 1;
        }
        depth
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }
}

impl TryFrom<Vec<Token>> for DependencyTree {
    type Error = TreeError;

    fn try_from(tokens: Vec<Token>) -> Result<Self, Self::Error> {
        DependencyTree::new(tokens)
    }
}

impl From<DependencyTree> for Vec<Token> {
    fn from(tree: DependencyTree) -> Self {
        tree.tokens
    }
}

impl RootedStructure for DependencyTree {
    fn size(&self) -> usize {
        self.len()
    }

    fn parent(&self, index: usize) -> Option<(usize, &str)> {
        let tok = self.token(index);
        if tok.head == 0 {
            None
        } else {
            Some((tok.head, tok.deprel.as_str()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityId {
    E1,
    E2,
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityId::E1 => f.write_str("e1"),
            EntityId::E2 => f.write_str("e2"),
        }
    }
}

/// Inclusive token range marking one entity mention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub id: EntityId,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, id: EntityId) -> Self {
        EntitySpan { start, end, id }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn is_valid_for(&self, tree: &DependencyTree) -> bool {
        1 <= self.start && self.start <= self.end && self.end <= tree.len()
    }
}

/// Picks the token of `span` that serves as the path endpoint.
///
/// Candidates are the span tokens whose head lies outside the span. In a
/// well-formed tree there is one; otherwise the candidate closest to the
/// root wins, then the smallest index.
pub fn entity_head(tree: &DependencyTree, span: &EntitySpan) -> usize {
    debug_assert!(span.is_valid_for(tree));
    (span.start..=span.end)
        .filter(|&i| {
            let h = tree.head(i);
            h == 0 || !span.contains(h)
        })
        .min_by_key(|&i| (tree.depth(i), i))
        .expect("an acyclic tree always has a span token whose head exits the span")
}

/// One classification example: a parsed sentence, two entity mentions and
/// the gold relation label as written in the data.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<L> {
    pub id: String,
    pub tree: DependencyTree,
    pub e1: EntitySpan,
    pub e2: EntitySpan,
    pub label: L,
}

impl<L> Instance<L> {
    pub fn entity_heads(&self) -> (usize, usize) {
        (entity_head(&self.tree, &self.e1), entity_head(&self.tree, &self.e2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree_from_heads(heads: &[usize]) -> Result<DependencyTree, TreeError> {
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| Token::new(i + 1, format!("w{}", i + 1), "NOUN", h, "dep"))
            .collect();
        DependencyTree::new(tokens)
    }

    #[test]
    fn validation_errors() {
        assert_eq!(tree_from_heads(&[]), Err(TreeError::Empty));
        assert_eq!(
            tree_from_heads(&[0, 0]),
            Err(TreeError::MultipleRoots { first: 1, second: 2 })
        );
        assert_eq!(tree_from_heads(&[2, 1]), Err(TreeError::NoRoot));
        assert_eq!(tree_from_heads(&[0, 3, 2]), Err(TreeError::CycleDetected { token: 2 }));
        assert_eq!(tree_from_heads(&[0, 2]), Err(TreeError::CycleDetected { token: 2 }));
        assert_eq!(
            tree_from_heads(&[0, 5]),
            Err(TreeError::HeadOutOfRange {
                token: 2,
                head: 5,
                len: 2
            })
        );
    }

    #[test]
    fn depth_follows_head_chain() {
        let tree = tree_from_heads(&[2, 0, 2, 5, 3]).unwrap();
        assert_eq!(tree.root(), 2);
        assert_eq!((1..=5).map(|i| tree.depth(i)).collect::<Vec<_>>(), vec![1, 0, 1, 3, 2]);
    }

    #[test]
    fn entity_head_unique_exit() {
        // head(3)=4, head(4)=7
        let tree = tree_from_heads(&[2, 7, 4, 7, 4, 7, 0]).unwrap();
        let span = EntitySpan::new(3, 4, EntityId::E1);
        assert_eq!(entity_head(&tree, &span), 4);
        let single = EntitySpan::new(2, 2, EntityId::E2);
        assert_eq!(entity_head(&tree, &single), 2);
    }

    #[test]
    fn entity_head_breaks_ties_by_depth_then_index() {
        // span 2..4: token 2 -> 6 (depth 3), token 3 -> 2, token 4 -> 5 (depth 2)
        // chain: 1 root, 5 -> 1, 6 -> 5
        let tree = tree_from_heads(&[0, 6, 2, 5, 1, 5]).unwrap();
        assert_eq!(tree.depth(2), 3);
        assert_eq!(tree.depth(4), 2);
        let span = EntitySpan::new(2, 4, EntityId::E1);
        assert_eq!(entity_head(&tree, &span), 4);

        // equal depths: smaller index wins
        let tree = tree_from_heads(&[0, 1, 1]).unwrap();
        let span = EntitySpan::new(2, 3, EntityId::E1);
        assert_eq!(entity_head(&tree, &span), 2);
    }

    #[test]
    fn spans_overlap() {
        let a = EntitySpan::new(1, 3, EntityId::E1);
        assert!(a.overlaps(&EntitySpan::new(3, 4, EntityId::E2)));
        assert!(!a.overlaps(&EntitySpan::new(4, 4, EntityId::E2)));
    }
}
