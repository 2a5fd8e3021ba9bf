//! Template-grammar corpus with known trees and a recoverable relation.
//!
//! Every sentence has a root verb between the two entities. The verb's form
//! alone fixes the gold class: each directed class owns one marker verb, and
//! a separate pool of neutral verbs marks the residual class.
//!
//! With probability `prep_density` an entity is buried inside a chain of
//! prepositional phrases hanging off the verb. Below, `cat` is the pobj of
//! `beside`, which hangs off the decoy `holds`, and so on up to `feeds`:
//!
//! ```text
//! in garden of holds beside cat feeds dog .
//! ```
//!
//! The nouns in these chains are drawn from a distractor pool that includes
//! other classes' marker forms, so the tree path between the entities runs
//! through decoys. Cutting every ADP subtree removes those nouns from the
//! path.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledInstance;
use super::schema::LabelSchema;
use crate::depgraph::{DependencyTree, EntityId, EntitySpan, Instance, Token};
use crate::model::RelationLabel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub size: usize,
    /// Number of directed relation types.
    pub k: usize,
    pub seed: u64,
    /// Probability that each entity sits inside a preposition chain.
    pub prep_density: f64,
    /// Longest chain, in ADP + noun pairs.
    pub max_chain: usize,
    /// Probability that a chain noun is a marker form.
    pub decoy_rate: f64,
    pub residual_rate: f64,
    /// Probability of a trailing off-path clause.
    pub clause_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            size: 100,
            k: 4,
            seed: 0,
            prep_density: 0.5,
            max_chain: 3,
            decoy_rate: 0.5,
            residual_rate: 0.2,
            clause_rate: 0.3,
        }
    }
}

const NOUNS: &[&str] = &[
    "cat", "dog", "river", "house", "tree", "stone", "girl", "boy", "teacher", "garden", "window", "road", "bridge",
    "lamp", "field", "boat", "horse", "city", "hill", "wall", "book", "table", "door", "bird", "flower", "market",
    "village", "forest", "lake", "shadow",
];
const ADJS: &[&str] = &["old", "small", "red", "quiet", "tall", "bright", "cold", "gentle"];
const PREPS: &[&str] = &["in", "on", "near", "under", "beside", "behind", "of", "with"];
const STEMS: &[&str] = &[
    "holds", "feeds", "builds", "owns", "visits", "guards", "paints", "carries", "follows", "teaches", "finds",
    "keeps", "drives", "moves", "shows", "sends", "cuts", "fills", "warms", "hides",
];
const NEUTRAL: &[&str] = &["sees", "meets", "passes", "likes"];
const CLAUSE_OBJ: &[&str] = &["rain", "light", "music", "smoke"];

/// Marker form of fine class `class`.
pub fn marker_form(class: usize) -> String {
    match STEMS.get(class) {
        Some(s) => s.to_string(),
        None => format!("verb{class}"),
    }
}

/// The schema that generated data uses: types `R0..R{k-1}` and `Other`.
pub fn synth_schema(k: usize) -> LabelSchema {
    LabelSchema::custom((0..k).map(|i| format!("R{i}")).collect(), "Other").expect("valid names")
}

struct Builder {
    tokens: Vec<(String, &'static str, usize, &'static str)>,
}

impl Builder {
    fn push(&mut self, form: impl Into<String>, pos: &'static str, head: usize, rel: &'static str) -> usize {
        self.tokens.push((form.into(), pos, head, rel));
        self.tokens.len()
    }

    fn set_head(&mut self, index: usize, head: usize) {
        self.tokens[index - 1].2 = head;
    }
}

fn distractor(rng: &mut impl Rng, spec: &SynthSpec) -> String {
    if rng.gen_bool(spec.decoy_rate) {
        marker_form(rng.gen_range(0..2 * spec.k))
    } else {
        NOUNS.choose(rng).expect("non-empty").to_string()
    }
}

/// Emits an entity, optionally inside a chain. All heads that point at the
/// verb are left as 0 and patched by the caller. Returns the span.
fn entity_phrase(
    b: &mut Builder,
    rng: &mut impl Rng,
    spec: &SynthSpec,
    outer_rel: &'static str,
) -> (EntitySpan, Vec<usize>) {
    let mut to_verb = Vec::new();
    let mut attach: Option<usize> = None;
    if spec.prep_density > 0.0 && rng.gen_bool(spec.prep_density) {
        let len = rng.gen_range(1..=spec.max_chain.max(1));
        for step in 0..len {
            let adp = b.push(
                *PREPS.choose(rng).expect("non-empty"),
                "ADP",
                attach.unwrap_or(0),
                "prep",
            );
            if attach.is_none() {
                to_verb.push(adp);
            }
            if step + 1 == len {
                attach = Some(adp);
            } else {
                let noun = distractor(rng, spec);
                attach = Some(b.push(noun, "NOUN", adp, "pobj"));
            }
        }
    }
    let with_adj = rng.gen_bool(0.3);
    let start = b.tokens.len() + 1;
    if with_adj {
        b.push(*ADJS.choose(rng).expect("non-empty"), "ADJ", start + 1, "amod");
    }
    let rel = if attach.is_some() { "pobj" } else { outer_rel };
    let noun = b.push(*NOUNS.choose(rng).expect("non-empty"), "NOUN", attach.unwrap_or(0), rel);
    if attach.is_none() {
        to_verb.push(noun);
    }
    (EntitySpan::new(start, noun, EntityId::E1), to_verb)
}

fn sentence(rng: &mut impl Rng, spec: &SynthSpec, label: RelationLabel) -> (DependencyTree, EntitySpan, EntitySpan) {
    let mut b = Builder { tokens: Vec::new() };
    let (e1, mut pending) = entity_phrase(&mut b, rng, spec, "nsubj");
    let verb_form = match label {
        RelationLabel::Residual => NEUTRAL.choose(rng).expect("non-empty").to_string(),
        l => marker_form(l.fine_index(spec.k)),
    };
    let verb = b.push(verb_form, "VERB", 0, "root");
    let (mut e2, more) = entity_phrase(&mut b, rng, spec, "dobj");
    e2.id = EntityId::E2;
    pending.extend(more);
    if rng.gen_bool(spec.clause_rate) {
        pending.push(b.push(",", "PUNCT", 0, "punct"));
        let pron = b.push("it", "PRON", 0, "nsubj");
        let v2 = b.push(marker_form(rng.gen_range(0..2 * spec.k)), "VERB", verb, "parataxis");
        b.set_head(pron, v2);
        b.push(*CLAUSE_OBJ.choose(rng).expect("non-empty"), "NOUN", v2, "dobj");
    }
    if rng.gen_bool(0.7) {
        pending.push(b.push(".", "PUNCT", 0, "punct"));
    }
    for i in pending {
        b.set_head(i, verb);
    }
    let tokens = b
        .tokens
        .into_iter()
        .enumerate()
        .map(|(i, (form, pos, head, rel))| Token::new(i + 1, form, pos, head, rel))
        .collect();
    (DependencyTree::new(tokens).expect("generator builds trees"), e1, e2)
}

/// Deterministic in `spec`.
pub fn synth_generate(spec: &SynthSpec) -> Vec<LabeledInstance> {
    assert!(spec.size >= 1 && spec.k >= 1, "size and k must be positive");
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    (0..spec.size)
        .map(|i| {
            let label = if rng.gen_bool(spec.residual_rate) {
                RelationLabel::Residual
            } else {
                RelationLabel::Directed {
                    kind: rng.gen_range(0..spec.k),
                    reversed: rng.gen_bool(0.5),
                }
            };
            let (tree, e1, e2) = sentence(&mut rng, spec, label);
            Instance {
                id: format!("synth-{i:05}"),
                tree,
                e1,
                e2,
                label,
            }
        })
        .collect()
}

/// Reads the gold class off the root verb.
pub fn marker_oracle(tree: &DependencyTree, k: usize) -> Option<RelationLabel> {
    let verb = &tree.token(tree.root()).form;
    if NEUTRAL.contains(&verb.as_str()) {
        return Some(RelationLabel::Residual);
    }
    (0..2 * k)
        .find(|&c| marker_form(c) == *verb)
        .and_then(|c| RelationLabel::from_fine(c, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_recovers_every_label() {
        let spec = SynthSpec {
            size: 300,
            k: 9,
            seed: 5,
            prep_density: 0.8,
            ..SynthSpec::default()
        };
        for inst in synth_generate(&spec) {
            assert_eq!(marker_oracle(&inst.tree, 9), Some(inst.label), "{}", inst.id);
        }
    }

    #[test]
    fn no_prepositions_at_zero_density() {
        let spec = SynthSpec {
            size: 200,
            prep_density: 0.0,
            ..SynthSpec::default()
        };
        for inst in synth_generate(&spec) {
            assert!(inst.tree.tokens().iter().all(|t| t.pos != "ADP"));
        }
    }
}
