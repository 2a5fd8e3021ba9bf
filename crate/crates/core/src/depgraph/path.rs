use std::fmt;

use serde::{Deserialize, Serialize};

/// Traversal direction of a path edge relative to the structure's root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// Dependent to head.
    #[serde(rename = "UP")]
    Up,
    /// Head to dependent.
    #[serde(rename = "DOWN")]
    Down,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "UP",
            Direction::Down => "DOWN",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathEdge {
    pub deprel: String,
    pub direction: Direction,
}

/// A simple path through a tree: `nodes.len() - 1` edges, each carrying the
/// relation label of the tree edge it crosses and the direction it was
/// crossed in.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SdpPath {
    pub nodes: Vec<usize>,
    pub edges: Vec<PathEdge>,
}

impl SdpPath {
    pub fn single(node: usize) -> Self {
        SdpPath {
            nodes: vec![node],
            edges: Vec::new(),
        }
    }

    /// Number of nodes on the path.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start(&self) -> usize {
        self.nodes[0]
    }

    pub fn end(&self) -> usize {
        *self.nodes.last().expect("non-empty path")
    }

    /// The same path walked from the other end.
    pub fn inverted(&self) -> SdpPath {
        SdpPath {
            nodes: self.nodes.iter().rev().copied().collect(),
            edges: self
                .edges
                .iter()
                .rev()
                .map(|e| PathEdge {
                    deprel: e.deprel.clone(),
                    direction: e.direction.flipped(),
                })
                .collect(),
        }
    }
}

/// `tok:3 UP:nsubj tok:5 DOWN:dobj tok:8`
impl fmt::Display for SdpPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, node) in self.nodes.iter().enumerate() {
            if i > 0 {
                let e = &self.edges[i - 1];
                write!(f, " {}:{} ", e.direction, e.deprel)?;
            }
            write!(f, "tok:{node}")?;
        }
        Ok(())
    }
}

/// A tree over positions `1..=size()` given by parent pointers.
pub trait RootedStructure {
    fn size(&self) -> usize;

    /// Parent of `index` with the label of the connecting edge, or `None`
    /// for the root.
    fn parent(&self, index: usize) -> Option<(usize, &str)>;

    fn depth_of(&self, index: usize) -> usize {
        let mut depth = 0;
        let mut cur = index;
        while let Some((p, _)) = self.parent(cur) {
            cur = p;
            depth += 1;
        }
        depth
    }
}

/// The unique simple path from `a` to `b`, climbing from both ends to the
/// lowest common ancestor.
pub fn path_between<S: RootedStructure + ?Sized>(tree: &S, a: usize, b: usize) -> SdpPath {
    let mut up_nodes = vec![a];
    let mut up_edges = Vec::new();
    let mut down_nodes = vec![b];
    let mut down_edges = Vec::new();

    let mut x = a;
    let mut y = b;
    let mut dx = tree.depth_of(a);
    let mut dy = tree.depth_of(b);

    let climb = |node: usize, nodes: &mut Vec<usize>, edges: &mut Vec<String>| -> usize {
        let (p, rel) = tree.parent(node).expect("depth > 0 implies a parent");
        nodes.push(p);
        edges.push(rel.to_string());
        p
    };

    while dx > dy {
        x = climb(x, &mut up_nodes, &mut up_edges);
        dx -= 1;
    }
    while dy > dx {
        y = climb(y, &mut down_nodes, &mut down_edges);
        dy -= 1;
    }
    while x != y {
        x = climb(x, &mut up_nodes, &mut up_edges);
        y = climb(y, &mut down_nodes, &mut down_edges);
    }

    // both lists end at the common ancestor
    down_nodes.pop();
    let mut nodes = up_nodes;
    nodes.extend(down_nodes.into_iter().rev());

    let mut edges: Vec<PathEdge> = up_edges
        .into_iter()
        .map(|deprel| PathEdge {
            deprel,
            direction: Direction::Up,
        })
        .collect();
    edges.extend(down_edges.into_iter().rev().map(|deprel| PathEdge {
        deprel,
        direction: Direction::Down,
    }));

    SdpPath { nodes, edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::{DependencyTree, Token};

    fn chain() -> DependencyTree {
        // head(1)=2, head(2)=3
        DependencyTree::new(vec![
            Token::new(1, "a", "X", 2, "r1"),
            Token::new(2, "b", "X", 3, "r2"),
            Token::new(3, "c", "X", 0, "root"),
        ])
        .unwrap()
    }

    #[test]
    fn degenerate_path() {
        let p = path_between(&chain(), 3, 3);
        assert_eq!(p, SdpPath::single(3));
        assert_eq!(p.to_string(), "tok:3");
    }

    #[test]
    fn ancestor_chain_goes_up() {
        let p = path_between(&chain(), 1, 3);
        assert_eq!(p.nodes, vec![1, 2, 3]);
        assert!(p.edges.iter().all(|e| e.direction == Direction::Up));
        assert_eq!(p.to_string(), "tok:1 UP:r1 tok:2 UP:r2 tok:3");

        let q = path_between(&chain(), 3, 1);
        assert_eq!(q.to_string(), "tok:3 DOWN:r2 tok:2 DOWN:r1 tok:1");
        assert_eq!(q, p.inverted());
    }

    #[test]
    fn through_lca() {
        // 1 <- 2 -> 3, 4 -> 3
        let tree = DependencyTree::new(vec![
            Token::new(1, "a", "X", 2, "nsubj"),
            Token::new(2, "b", "X", 0, "root"),
            Token::new(3, "c", "X", 2, "obj"),
            Token::new(4, "d", "X", 3, "amod"),
        ])
        .unwrap();
        let p = path_between(&tree, 1, 4);
        assert_eq!(p.to_string(), "tok:1 UP:nsubj tok:2 DOWN:obj tok:3 DOWN:amod tok:4");
    }
}
