//! Class indexing for a `K`-type directed relation inventory.
//!
//! Fine classes: `2k` is type `k` read `(e1,e2)`, `2k + 1` is type `k` read
//! `(e2,e1)`, and `2K` is the residual class. Coarse classes: `k` for type
//! `k`, `K` for the residual.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationLabel {
    Directed { kind: usize, reversed: bool },
    Residual,
}

impl RelationLabel {
    pub fn fine_index(self, k: usize) -> usize {
        match self {
            RelationLabel::Directed { kind, reversed } => 2 * kind + reversed as usize,
            RelationLabel::Residual => 2 * k,
        }
    }

    pub fn coarse_index(self, k: usize) -> usize {
        match self {
            RelationLabel::Directed { kind, .. } => kind,
            RelationLabel::Residual => k,
        }
    }

    pub fn from_fine(index: usize, k: usize) -> Option<Self> {
        match index {
            i if i < 2 * k => Some(RelationLabel::Directed {
                kind: i / 2,
                reversed: i % 2 == 1,
            }),
            i if i == 2 * k => Some(RelationLabel::Residual),
            _ => None,
        }
    }

    /// The label of the same pair read in the opposite order.
    pub fn flipped(self) -> Self {
        match self {
            RelationLabel::Directed { kind, reversed } => RelationLabel::Directed {
                kind,
                reversed: !reversed,
            },
            RelationLabel::Residual => RelationLabel::Residual,
        }
    }

    pub fn kind(self) -> Option<usize> {
        match self {
            RelationLabel::Directed { kind, .. } => Some(kind),
            RelationLabel::Residual => None,
        }
    }
}

/// Fine class reached by swapping the direction of `index`.
pub fn z_index(index: usize, k: usize) -> usize {
    if index >= 2 * k {
        index
    } else {
        index ^ 1
    }
}

/// Swaps the two directed classes of every relation type; the residual
/// class stays put. `dist` must have `2K + 1` entries.
pub fn z_map(dist: &[f64]) -> Vec<f64> {
    assert!(dist.len() % 2 == 1, "fine distributions have 2K + 1 entries");
    let k = dist.len() / 2;
    (0..dist.len()).map(|i| dist[z_index(i, k)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_round_trip() {
        let k = 9;
        for i in 0..=2 * k {
            let l = RelationLabel::from_fine(i, k).unwrap();
            assert_eq!(l.fine_index(k), i);
            assert_eq!(l.flipped().fine_index(k), z_index(i, k));
        }
        assert_eq!(RelationLabel::from_fine(19, 9), None);
        assert_eq!(RelationLabel::Residual.coarse_index(9), 9);
    }

    #[test]
    fn z_is_an_involution_fixing_residual() {
        let y = [0.1, 0.2, 0.05, 0.15, 0.5];
        let z = z_map(&y);
        assert_eq!(z, vec![0.2, 0.1, 0.15, 0.05, 0.5]);
        assert_eq!(z_map(&z), y.to_vec());
    }
}
