//! Confusion matrices and direction-sensitive macro-F1.
//!
//! Scores are per relation type. A prediction counts as a true positive for
//! type `k` only when it names both the gold type and the gold direction.
//! Predicted and gold counts for `k` pool both directions, so a right type
//! with the wrong direction costs precision and recall at once. The
//! residual class is never averaged, but predicting it for a gold relation
//! still costs that relation recall.

use serde::{Deserialize, Serialize};

use crate::model::RelationLabel;

/// `counts[gold][predicted]` over the `2K+1` fine classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![vec![0; 2 * k + 1]; 2 * k + 1],
        }
    }

    pub fn from_counts(k: usize, counts: Vec<Vec<u64>>) -> Self {
        assert_eq!(counts.len(), 2 * k + 1);
        assert!(counts.iter().all(|r| r.len() == 2 * k + 1));
        ConfusionMatrix { k, counts }
    }

    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (RelationLabel, RelationLabel)>) -> Self {
        let mut m = ConfusionMatrix::new(k);
        for (gold, pred) in pairs {
            m.add(gold, pred);
        }
        m
    }

    pub fn add(&mut self, gold: RelationLabel, pred: RelationLabel) {
        self.counts[gold.fine_index(self.k)][pred.fine_index(self.k)] += 1;
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeScores {
    pub true_positives: u64,
    pub predicted: u64,
    pub gold: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl TypeScores {
    fn from_counts(tp: u64, predicted: u64, gold: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        TypeScores {
            true_positives: tp,
            predicted,
            gold,
            precision,
            recall,
            f1,
        }
    }

    /// A type with no gold and no predicted instances has no score.
    pub fn is_scored(&self) -> bool {
        self.gold > 0 || self.predicted > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// One entry per relation type, residual excluded.
    pub per_type: Vec<TypeScores>,
    /// Mean F1 over scored types; 0 when none is scored.
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

pub fn type_scores(m: &ConfusionMatrix, kind: usize) -> TypeScores {
    let cls = [2 * kind, 2 * kind + 1];
    let n = m.counts.len();
    let tp = cls.iter().map(|&c| m.counts[c][c]).sum();
    let predicted = cls.iter().map(|&c| (0..n).map(|g| m.counts[g][c]).sum::<u64>()).sum();
    let gold = cls.iter().map(|&c| m.counts[c].iter().sum::<u64>()).sum();
    TypeScores::from_counts(tp, predicted, gold)
}

pub fn macro_f1(m: &ConfusionMatrix) -> f64 {
    let scored: Vec<f64> = (0..m.k)
        .map(|k| type_scores(m, k))
        .filter(TypeScores::is_scored)
        .map(|s| s.f1)
        .collect();
    if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    }
}

impl Metrics {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let per_type = (0..confusion.k).map(|k| type_scores(&confusion, k)).collect();
        let total = confusion.total();
        let accuracy = if total == 0 {
            0.0
        } else {
            confusion.correct() as f64 / total as f64
        };
        Metrics {
            per_type,
            macro_f1: macro_f1(&confusion),
            accuracy,
            confusion,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(kind: usize, reversed: bool) -> RelationLabel {
        RelationLabel::Directed { kind, reversed }
    }

    #[test]
    fn all_correct_scores_one() {
        let pairs = [
            (d(0, false), d(0, false)),
            (d(1, true), d(1, true)),
            (RelationLabel::Residual, RelationLabel::Residual),
        ];
        let m = ConfusionMatrix::from_pairs(3, pairs);
        assert_eq!(macro_f1(&m), 1.0);
    }

    #[test]
    fn all_residual_scores_zero() {
        let pairs = [
            (d(0, false), RelationLabel::Residual),
            (d(2, true), RelationLabel::Residual),
        ];
        assert_eq!(macro_f1(&ConfusionMatrix::from_pairs(3, pairs)), 0.0);
    }

    #[test]
    fn hand_built_three_types() {
        // type 0: perfect. type 1: one of two gold found, one right
        // prediction out of two. type 2: its one gold goes to type 1.
        let pairs = [
            (d(0, false), d(0, false)),
            (d(0, true), d(0, true)),
            (d(1, false), d(1, false)),
            (d(1, false), RelationLabel::Residual),
            (d(2, false), d(1, true)),
        ];
        let m = ConfusionMatrix::from_pairs(3, pairs);
        let f: Vec<f64> = (0..3).map(|k| type_scores(&m, k).f1).collect();
        assert_eq!(f, vec![1.0, 0.5, 0.0]);
        assert_eq!(macro_f1(&m), 0.5);
    }

    #[test]
    fn wrong_direction_is_an_error() {
        let m = ConfusionMatrix::from_pairs(1, [(d(0, false), d(0, true))]);
        assert_eq!(macro_f1(&m), 0.0);
        let s = type_scores(&m, 0);
        assert_eq!((s.true_positives, s.predicted, s.gold), (0, 1, 1));
    }
}
