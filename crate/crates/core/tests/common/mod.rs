//! Generators and brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use srbrcnn::depgraph::{DependencyTree, Direction, SdpPath, Token};
use srbrcnn::structreg::{CutRule, RegularizedTree, SR_LINK};

const POS: &[&str] = &["NOUN", "VERB", "ADP", "PUNCT", "ADJ", "IN", "DET"];

/// Uniformly shuffled attachment order: each token after the first picks a
/// head among the tokens placed before it.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> DependencyTree {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n + 1];
    for i in 1..n {
        heads[order[i]] = order[rng.gen_range(0..i)];
    }
    let tokens = (1..=n)
        .map(|i| {
            let pos = *POS.choose(rng).unwrap();
            let rel = if heads[i] == 0 {
                "root".to_string()
            } else {
                format!("r{}", rng.gen_range(0..4))
            };
            Token::new(i, format!("w{}", rng.gen_range(0..6)), pos, heads[i], rel)
        })
        .collect();
    DependencyTree::new(tokens).expect("generator builds trees")
}

pub fn random_rule(rng: &mut impl Rng) -> CutRule {
    match rng.gen_range(0..4) {
        0 => CutRule::None,
        1 => CutRule::Punctuation,
        2 => CutRule::random(rng.gen_range(0.0..=1.0), rng.gen()).unwrap(),
        _ => CutRule::preposition(),
    }
}

/// Any subset of non-root tokens.
pub fn random_cut_set(rng: &mut impl Rng, tree: &DependencyTree) -> BTreeSet<usize> {
    let p = rng.gen_range(0.0..1.0);
    (1..=tree.len())
        .filter(|&i| i != tree.root() && rng.gen_bool(p))
        .collect()
}

/// `(child, parent, label)` for every edge of the original tree.
pub fn tree_edges(tree: &DependencyTree) -> Vec<(usize, usize, String)> {
    tree.tokens()
        .iter()
        .filter(|t| t.head != 0)
        .map(|t| (t.index, t.head, t.deprel.clone()))
        .collect()
}

/// `(child, parent, label)` for every edge of a lined tree. Link edges are
/// oriented from the lower root down to the higher one.
pub fn lined_edges(rt: &RegularizedTree) -> Vec<(usize, usize, String)> {
    rt.edges()
        .into_iter()
        .map(|(a, b, label)| {
            if label == SR_LINK && rt.link_edges().contains(&(a, b)) {
                (b, a, label.to_string())
            } else {
                (a, b, label.to_string())
            }
        })
        .collect()
}

pub type OraclePath = (Vec<usize>, Vec<(String, Direction)>);

/// Breadth-first search over the undirected edge set; returns the node
/// sequence and each step's `(label, direction)`.
pub fn bfs_path(n: usize, edges: &[(usize, usize, String)], a: usize, b: usize) -> Option<OraclePath> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + 1];
    for (e, (c, p, _)) in edges.iter().enumerate() {
        adj[*c].push((*p, e));
        adj[*p].push((*c, e));
    }
    let mut prev = vec![None; n + 1];
    let mut seen = vec![false; n + 1];
    let mut queue = VecDeque::from([a]);
    seen[a] = true;
    while let Some(u) = queue.pop_front() {
        for &(v, e) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                prev[v] = Some((u, e));
                queue.push_back(v);
            }
        }
    }
    if !seen[b] {
        return None;
    }
    let mut nodes = vec![b];
    let mut steps = Vec::new();
    let mut cur = b;
    while let Some((u, e)) = prev[cur] {
        let (c, _, label) = &edges[e];
        // stepping u -> cur goes up when u is the child
        let dir = if *c == u { Direction::Up } else { Direction::Down };
        steps.push((label.clone(), dir));
        nodes.push(u);
        cur = u;
    }
    nodes.reverse();
    steps.reverse();
    Some((nodes, steps))
}

pub fn same_as_oracle(path: &SdpPath, oracle: &OraclePath) -> bool {
    let steps: Vec<(String, Direction)> = path.edges.iter().map(|e| (e.deprel.clone(), e.direction)).collect();
    path.nodes == oracle.0 && steps == oracle.1
}

fn find(uf: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while uf[r] != r {
        r = uf[r];
    }
    let mut cur = x;
    while uf[cur] != r {
        let next = uf[cur];
        uf[cur] = r;
        cur = next;
    }
    r
}

/// Partition, connectivity and acyclicity checks. Returns every violation.
pub fn structural_violations(rt: &RegularizedTree) -> Vec<String> {
    let n = rt.base().len();
    let mut errs = Vec::new();

    let comps = rt.components();
    let mut seen = vec![false; n + 1];
    for (c, root) in comps.iter().zip(rt.component_roots()) {
        if !c.contains(&root) {
            errs.push(format!("component of root {root} misses it"));
        }
        for &t in c {
            if seen[t] {
                errs.push(format!("token {t} in two components"));
            }
            seen[t] = true;
        }
    }
    if comps.iter().map(Vec::len).sum::<usize>() != n || !seen[1..].iter().all(|&s| s) {
        errs.push("components do not cover the tokens".into());
    }

    // every surviving edge stays inside one component
    let mut uf: Vec<usize> = (0..=n).collect();
    for (c, p, label) in lined_edges(rt) {
        if label != SR_LINK && rt.component_of(c) != rt.component_of(p) {
            errs.push(format!("edge {c}-{p} crosses components"));
        }
        let (rc, rp) = (find(&mut uf, c), find(&mut uf, p));
        if rc == rp {
            errs.push(format!("edge {c}-{p} closes a cycle"));
        }
        uf[rc] = rp;
    }
    let edges = rt.edges().len();
    if edges != n - 1 {
        errs.push(format!("{edges} edges for {n} tokens"));
    }
    let r = find(&mut uf, 1);
    if (1..=n).any(|i| find(&mut uf, i) != r) {
        errs.push("lined tree is disconnected".into());
    }
    errs
}
