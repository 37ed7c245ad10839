use std::collections::VecDeque;

use super::TypedDigraph;
use crate::error::{Error, Result};

/// Longest-path depth from the sources: sources get 0 and every other node
/// gets one more than the largest level among its in-neighbors.
pub fn topological_levels(g: &TypedDigraph) -> Result<Vec<usize>> {
    let n = g.num_nodes();
    let mut indeg: Vec<usize> = (0..n).map(|v| g.in_degree(v)).collect();
    let mut level = vec![0usize; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut done = 0;
    while let Some(u) = queue.pop_front() {
        done += 1;
        for v in 0..n {
            if g.has_edge(u, v) {
                level[v] = level[v].max(level[u] + 1);
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
    }
    if done != n {
        return Err(Error::CyclicGraph);
    }
    Ok(level)
}

/// Levels that tolerate cycles: when `g` is cyclic, back-edges are dropped
/// in node-id order (an edge `u→v` with `v ≤ u` is kept only while it does not
/// close a cycle) and levels are taken on the remaining acyclic subgraph.
pub fn levels_lenient(g: &TypedDigraph) -> Vec<usize> {
    if let Ok(l) = topological_levels(g) {
        return l;
    }
    let n = g.num_nodes();
    let mut kept = TypedDigraph::new(g.alphabet(), g.node_types().to_vec())
        .expect("same alphabet and classes");
    // forward edges (u < v) can never form a cycle among themselves
    for (u, v, c) in g.edges() {
        if u < v {
            kept.set_edge(u, v, c).expect("valid edge");
        }
    }
    for u in 0..n {
        for v in 0..u {
            let c = g.edge(u, v);
            if c != 0 && !reaches(&kept, v, u) {
                kept.set_edge(u, v, c).expect("valid edge");
            }
        }
    }
    topological_levels(&kept).expect("back-edges closing cycles were dropped")
}

fn reaches(g: &TypedDigraph, from: usize, to: usize) -> bool {
    let n = g.num_nodes();
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        for v in 0..n {
            if !seen[v] && g.has_edge(u, v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}
