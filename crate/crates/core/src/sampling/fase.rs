//! Rand-FaSE: probabilistic ESU whose paths are aggregated in a label trie.
//!
//! A trie edge is labeled by the class of the node being added and its edge
//! classes to and from every node already in the set, in insertion order. Two
//! traversal paths that share a label sequence therefore induce the same
//! labeled graph, so the trie leaves are exactly the distinct labeled
//! subgraphs seen; they are folded into isomorphism classes at the end.
//!
//! The root call is unconditional and a call from depth `d` to `d + 1` is kept
//! with probability `p_d`, so a leaf is reached with probability
//! `q = p_1 ⋯ p_{k−1}` and weighted by `1/q`.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;

use super::{has_connected_k_subgraph, Reservoir, SampleConfig, SampleResult, SampleStats};
use crate::error::{Error, Result};
use crate::graph::{Class, PatternTable, SubgraphInstance, TypedDigraph};
use crate::rng;

#[derive(Default)]
struct TrieNode {
    children: HashMap<Vec<Class>, usize>,
    weight: f64,
    // a witness occurrence, for leaves
    witness: Option<(usize, Vec<usize>)>,
}

#[derive(Default)]
struct Trie {
    nodes: Vec<TrieNode>,
}

impl Trie {
    fn new() -> Self {
        Self {
            nodes: vec![TrieNode::default()],
        }
    }

    fn child(&mut self, parent: usize, label: Vec<Class>) -> usize {
        if let Some(&c) = self.nodes[parent].children.get(&label) {
            return c;
        }
        let id = self.nodes.len();
        self.nodes.push(TrieNode::default());
        self.nodes[parent].children.insert(label, id);
        id
    }
}

fn ls_label(g: &TypedDigraph, w: usize, sub: &[usize]) -> Vec<Class> {
    let mut label = Vec::with_capacity(1 + 2 * sub.len());
    label.push(g.node_type(w));
    for &s in sub {
        label.push(g.edge(w, s));
        label.push(g.edge(s, w));
    }
    label
}

struct Pass<'a> {
    g: &'a TypedDigraph,
    gid: usize,
    nbrs: &'a [Vec<usize>],
    k: usize,
    probs: &'a [f64],
    rng: rng::Rng,
    trie: &'a mut Trie,
    pick: &'a mut rng::Rng,
    reservoir: &'a mut Reservoir<(SubgraphInstance, f64)>,
    // only the first pass feeds the count estimates
    estimate: bool,
}

impl Pass<'_> {
    fn extend(&mut self, sub: &mut Vec<usize>, mut ext: Vec<usize>, root: usize, node: usize, q: f64) {
        let depth = sub.len();
        if depth == self.k {
            let weight = 1.0 / q;
            if self.estimate {
                let leaf = &mut self.trie.nodes[node];
                leaf.weight += weight;
                if leaf.witness.is_none() {
                    leaf.witness = Some((self.gid, sub.clone()));
                }
            }
            let mut nodes = sub.clone();
            nodes.sort_unstable();
            self.reservoir
                .offer(self.pick, (SubgraphInstance::from_sorted(self.gid, nodes), weight));
            return;
        }
        let pd = self.probs[depth - 1];
        while !ext.is_empty() {
            let w = ext.remove(0);
            if pd < 1.0 && self.rng.random::<f64>() >= pd {
                continue;
            }
            let label = ls_label(self.g, w, sub);
            let child = self.trie.child(node, label);
            let mut next = ext.clone();
            next.extend(self.nbrs[w].iter().copied().filter(|&u| {
                u > root && !sub.iter().any(|&s| s == u || self.g.adjacent(u, s))
            }));
            next.sort_unstable();
            sub.push(w);
            self.extend(sub, next, root, child, q * pd);
            sub.pop();
        }
    }
}

/// Instances with weights plus per-class count estimates.
#[derive(Debug, Clone, Default)]
pub struct FaseOutput {
    pub sample: SampleResult,
    /// Weighted leaf totals per class from the first pass: an unbiased
    /// estimate of each class's exact count. Later passes run only because
    /// earlier ones fell short of `tc`, so averaging over them would tie the
    /// divisor to the outcomes and bias the totals; they feed the sample only.
    pub estimates: PatternTable<f64>,
}

pub fn rand_fase_sample(graphs: &[TypedDigraph], cfg: &SampleConfig) -> Result<FaseOutput> {
    cfg.validate()?;
    let start = Instant::now();
    if graphs.is_empty() {
        return Ok(FaseOutput {
            sample: SampleResult {
                weights: Some(Vec::new()),
                ..Default::default()
            },
            estimates: PatternTable::new(),
        });
    }
    if !has_connected_k_subgraph(graphs, cfg.k) {
        return Err(Error::Stall {
            attempts: 0,
            k: cfg.k,
        });
    }
    let probs = cfg.probs();
    let nbrs: Vec<Vec<Vec<usize>>> = graphs.iter().map(|g| g.undirected_neighbors()).collect();
    let mut trie = Trie::new();
    let mut pick = rng::stream(rng::derive(cfg.seed, 0xfa5e), 0);
    let mut reservoir = Reservoir::new(cfg.tc);
    let mut passes = 0u64;
    let mut empty_streak = 0u64;
    while reservoir.seen() < cfg.tc as u64 {
        let before = reservoir.seen();
        for (gid, g) in graphs.iter().enumerate() {
            let mut pass = Pass {
                g,
                gid,
                nbrs: &nbrs[gid],
                k: cfg.k,
                probs: &probs,
                rng: rng::stream(rng::derive(cfg.seed, passes), gid as u64),
                trie: &mut trie,
                pick: &mut pick,
                reservoir: &mut reservoir,
                estimate: passes == 0,
            };
            let mut sub = Vec::with_capacity(cfg.k);
            for v in 0..g.num_nodes() {
                let root = pass.trie.child(0, vec![g.node_type(v)]);
                let ext: Vec<usize> = nbrs[gid][v].iter().copied().filter(|&u| u > v).collect();
                sub.push(v);
                pass.extend(&mut sub, ext, v, root, 1.0);
                sub.pop();
            }
        }
        passes += 1;
        if reservoir.seen() == before {
            empty_streak += 1;
            if empty_streak >= 1000 {
                return Err(Error::Stall {
                    attempts: passes,
                    k: cfg.k,
                });
            }
        } else {
            empty_streak = 0;
        }
    }

    let mut estimates: PatternTable<f64> = PatternTable::new();
    for node in &trie.nodes {
        if let Some((gid, order)) = &node.witness {
            let mut nodes = order.clone();
            nodes.sort_unstable();
            let sub = graphs[*gid].induced_unchecked(&nodes);
            *estimates.entry_or_insert_with(sub, || 0.0).1 += node.weight;
        }
    }
    let collected = reservoir.seen();
    let (instances, weights): (Vec<_>, Vec<_>) = reservoir.into_items().into_iter().unzip();
    Ok(FaseOutput {
        sample: SampleResult {
            instances,
            weights: Some(weights),
            stats: SampleStats {
                draws: collected,
                rejections: 0,
                passes,
                collected,
                wall: start.elapsed(),
            },
        },
        estimates,
    })
}
