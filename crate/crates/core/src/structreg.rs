//! Tree structure regularization.
//!
//! A cut rule picks nodes of a dependency tree; the head edge of each picked
//! node is severed so that it roots its own component. The components are
//! then re-joined into one tree by chaining their roots in ascending token
//! order with synthetic [`SR_LINK`] edges, and entity paths are read off
//! that lined forest instead of the original parse.
//!
//! Random cuts use SplitMix64 seeded with `seed ^ sentence_ordinal`; one
//! 64-bit draw per non-root token, in index order, mapped to `[0, 1)` from
//! its top 53 bits. The sequence is the same on every platform.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depgraph::{path_between, DependencyTree, RootedStructure};

pub use crate::depgraph::{Direction, PathEdge, SdpPath};

/// Relation label carried by root-link edges.
pub const SR_LINK: &str = "SR-LINK";

/// POS tags treated as prepositions by default.
pub const DEFAULT_PREPOSITION_TAGS: [&str; 3] = ["ADP", "P", "IN"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum CutRule {
    #[default]
    None,
    #[serde(rename = "punct")]
    Punctuation,
    Random {
        p: f64,
        seed: u64,
    },
    #[serde(rename = "prep")]
    Preposition {
        #[serde(default = "default_tags")]
        tags: BTreeSet<String>,
    },
}

fn default_tags() -> BTreeSet<String> {
    DEFAULT_PREPOSITION_TAGS.iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CutRuleError {
    #[error("random cut probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("preposition rule needs at least one POS tag")]
    EmptyTagSet,
    #[error("unknown cut rule {0:?} (expected none, punct, random or prep)")]
    UnknownRule(String),
}

impl CutRule {
    pub fn random(p: f64, seed: u64) -> Result<Self, CutRuleError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(CutRuleError::Probability(p));
        }
        Ok(CutRule::Random { p, seed })
    }

    pub fn preposition() -> Self {
        CutRule::Preposition { tags: default_tags() }
    }

    pub fn preposition_with<I, S>(tags: I) -> Result<Self, CutRuleError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tags: BTreeSet<String> = tags.into_iter().map(Into::into).collect();
        if tags.is_empty() {
            return Err(CutRuleError::EmptyTagSet);
        }
        Ok(CutRule::Preposition { tags })
    }

    pub fn validate(&self) -> Result<(), CutRuleError> {
        match self {
            CutRule::Random { p, .. } if !(0.0..=1.0).contains(p) => Err(CutRuleError::Probability(*p)),
            CutRule::Preposition { tags } if tags.is_empty() => Err(CutRuleError::EmptyTagSet),
            _ => Ok(()),
        }
    }

    /// The rule to apply to the sentence at `ordinal` in a corpus. Only the
    /// random rule changes: its seed is xor-ed with the ordinal.
    pub fn for_sentence(&self, ordinal: u64) -> CutRule {
        match self {
            CutRule::Random { p, seed } => CutRule::Random {
                p: *p,
                seed: seed ^ ordinal,
            },
            other => other.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CutRule::None => "none",
            CutRule::Punctuation => "punct",
            CutRule::Random { .. } => "random",
            CutRule::Preposition { .. } => "prep",
        }
    }
}

impl fmt::Display for CutRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses the bare rule names used on the command line. `random` gets
/// `p = 0.5, seed = 0`; callers override those as needed.
impl FromStr for CutRule {
    type Err = CutRuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(CutRule::None),
            "punct" | "punctuation" => Ok(CutRule::Punctuation),
            "random" => Ok(CutRule::Random { p: 0.5, seed: 0 }),
            "prep" | "preposition" => Ok(CutRule::preposition()),
            other => Err(CutRuleError::UnknownRule(other.to_string())),
        }
    }
}

fn unit_interval(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Nodes whose subtrees the rule cuts off. Never contains the root.
pub fn select_cut_nodes(tree: &DependencyTree, rule: &CutRule) -> BTreeSet<usize> {
    let root = tree.root();
    match rule {
        CutRule::None => BTreeSet::new(),
        CutRule::Punctuation => {
            let mut selected = BTreeSet::new();
            let mut segment: Vec<usize> = Vec::new();
            let mut flush = |segment: &mut Vec<usize>| {
                if !segment.is_empty() && !segment.contains(&root) {
                    let (lo, hi) = (segment[0], *segment.last().unwrap());
                    for &t in segment.iter() {
                        let h = tree.head(t);
                        if h < lo || h > hi {
                            selected.insert(t);
                        }
                    }
                }
                segment.clear();
            };
            for tok in tree.tokens() {
                if tok.pos == "PUNCT" {
                    flush(&mut segment);
                } else {
                    segment.push(tok.index);
                }
            }
            flush(&mut segment);
            selected
        }
        CutRule::Random { p, seed } => {
            let mut rng = SplitMix64::seed_from_u64(*seed);
            let mut selected = BTreeSet::new();
            for tok in tree.tokens() {
                if tok.index == root {
                    continue;
                }
                if unit_interval(&mut rng) < *p {
                    selected.insert(tok.index);
                }
            }
            selected
        }
        CutRule::Preposition { tags } => tree
            .tokens()
            .iter()
            .filter(|t| t.index != root && tags.contains(&t.pos))
            .map(|t| t.index)
            .collect(),
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RegularizeError {
    #[error("cut set contains the root token {0}")]
    CutRootRequested(usize),
    #[error("cut node {node} is outside 1..={len}")]
    NodeOutOfRange { node: usize, len: usize },
}

/// A dependency tree split into components at the cut nodes and re-lined
/// into a single tree.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedTree {
    base: DependencyTree,
    cut_nodes: BTreeSet<usize>,
    /// `(lower, higher)` pairs of consecutive component roots.
    link_edges: Vec<(usize, usize)>,
    /// Parents in the lined tree, rooted at the smallest component root.
    parent: Vec<usize>,
    via_link: Vec<bool>,
}

impl RegularizedTree {
    pub fn base(&self) -> &DependencyTree {
        &self.base
    }

    pub fn cut_nodes(&self) -> &BTreeSet<usize> {
        &self.cut_nodes
    }

    pub fn link_edges(&self) -> &[(usize, usize)] {
        &self.link_edges
    }

    /// Component roots in ascending index order.
    pub fn component_roots(&self) -> Vec<usize> {
        let mut roots: Vec<usize> = self.cut_nodes.iter().copied().collect();
        roots.push(self.base.root());
        roots.sort_unstable();
        roots
    }

    /// Root of the component holding `index`.
    pub fn component_of(&self, index: usize) -> usize {
        let mut cur = index;
        while cur != self.base.root() && !self.cut_nodes.contains(&cur) {
            cur = self.base.head(cur);
        }
        cur
    }

    /// Token sets of each component, ordered like [`Self::component_roots`].
    pub fn components(&self) -> Vec<Vec<usize>> {
        let roots = self.component_roots();
        let mut out = vec![Vec::new(); roots.len()];
        for i in 1..=self.base.len() {
            let r = self.component_of(i);
            let slot = roots.binary_search(&r).expect("component root is listed");
            out[slot].push(i);
        }
        out
    }

    /// Undirected edges of the lined tree: surviving head edges followed by
    /// link edges, each as `(a, b, label)`.
    pub fn edges(&self) -> Vec<(usize, usize, &str)> {
        let mut edges = Vec::new();
        for tok in self.base.tokens() {
            if tok.head != 0 && !self.cut_nodes.contains(&tok.index) {
                edges.push((tok.index, tok.head, tok.deprel.as_str()));
            }
        }
        for &(a, b) in &self.link_edges {
            edges.push((a, b, SR_LINK));
        }
        edges
    }
}

impl RootedStructure for RegularizedTree {
    fn size(&self) -> usize {
        self.base.len()
    }

    fn parent(&self, index: usize) -> Option<(usize, &str)> {
        match self.parent[index] {
            0 => None,
            p if self.via_link[index] => Some((p, SR_LINK)),
            p => Some((p, self.base.token(index).deprel.as_str())),
        }
    }
}

/// Severs the head edge of every cut node and chains the component roots.
pub fn cut_and_line(tree: &DependencyTree, cut_nodes: &BTreeSet<usize>) -> Result<RegularizedTree, RegularizeError> {
    let n = tree.len();
    for &c in cut_nodes {
        if c == tree.root() {
            return Err(RegularizeError::CutRootRequested(c));
        }
        if c == 0 || c > n {
            return Err(RegularizeError::NodeOutOfRange { node: c, len: n });
        }
    }

    let mut parent = vec![0usize; n + 1];
    let mut via_link = vec![false; n + 1];
    for tok in tree.tokens() {
        if !cut_nodes.contains(&tok.index) {
            parent[tok.index] = tok.head;
        }
    }

    let mut roots: Vec<usize> = cut_nodes.iter().copied().collect();
    roots.push(tree.root());
    roots.sort_unstable();
    let link_edges: Vec<(usize, usize)> = roots.windows(2).map(|w| (w[0], w[1])).collect();
    for &(lower, higher) in &link_edges {
        parent[higher] = lower;
        via_link[higher] = true;
    }

    Ok(RegularizedTree {
        base: tree.clone(),
        cut_nodes: cut_nodes.clone(),
        link_edges,
        parent,
        via_link,
    })
}

/// Convenience: select with `rule` and then cut.
pub fn regularize(tree: &DependencyTree, rule: &CutRule) -> RegularizedTree {
    let cuts = select_cut_nodes(tree, rule);
    cut_and_line(tree, &cuts).expect("selected cut sets never contain the root")
}

/// Path between two entity heads through the lined forest. Link edges read
/// `DOWN` from the lower-index root to the higher one.
pub fn extract_sr_sdp(rt: &RegularizedTree, e1_head: usize, e2_head: usize) -> SdpPath {
    path_between(rt, e1_head, e2_head)
}

pub fn invert_path(p: &SdpPath) -> SdpPath {
    p.inverted()
}
