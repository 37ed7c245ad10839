use std::time::Instant;

use rand::Rng;

use super::{has_connected_k_subgraph, Reservoir, SampleConfig, SampleResult, SampleStats};
use crate::error::{Error, Result};
use crate::graph::{PatternTable, SubgraphInstance, TypedDigraph};
use crate::rng;

/// Exact class and its occurrences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassCensus {
    pub count: u64,
    pub instances: Vec<SubgraphInstance>,
}

struct Walk<'a, R, F> {
    g: &'a TypedDigraph,
    nbrs: &'a [Vec<usize>],
    k: usize,
    probs: Option<&'a [f64]>,
    rng: &'a mut R,
    visit: F,
}

impl<R: Rng, F: FnMut(&[usize])> Walk<'_, R, F> {
    fn keep(&mut self, depth: usize) -> bool {
        match self.probs {
            None => true,
            Some(p) => {
                let pd = p[depth - 1];
                pd >= 1.0 || self.rng.random::<f64>() < pd
            }
        }
    }

    fn exclusive(&self, u: usize, sub: &[usize]) -> bool {
        !sub.iter().any(|&s| s == u || self.g.adjacent(u, s))
    }

    fn extend(&mut self, sub: &mut Vec<usize>, mut ext: Vec<usize>, root: usize) {
        if sub.len() == self.k {
            (self.visit)(sub);
            return;
        }
        while !ext.is_empty() {
            // ascending node-id removal order
            let w = ext.remove(0);
            let mut next = ext.clone();
            next.extend(
                self.nbrs[w]
                    .iter()
                    .copied()
                    .filter(|&u| u > root && self.exclusive(u, sub)),
            );
            next.sort_unstable();
            let depth = sub.len() + 1;
            if self.keep(depth) {
                sub.push(w);
                self.extend(sub, next, root);
                sub.pop();
            }
        }
    }
}

/// ESU traversal of one graph. With `probs = None` every connected induced
/// `k`-subgraph is visited exactly once; otherwise the root call is kept with
/// probability `p_1` and a call that grows the set to `d` nodes with `p_d`,
/// so each leaf is reached with probability `p_1 ⋯ p_k`.
///
/// `visit` receives node ids in insertion order (the root first).
pub fn esu_visit<R: Rng>(
    g: &TypedDigraph,
    nbrs: &[Vec<usize>],
    k: usize,
    probs: Option<&[f64]>,
    rng: &mut R,
    visit: impl FnMut(&[usize]),
) {
    if k == 0 || k > g.num_nodes() {
        return;
    }
    let mut walk = Walk {
        g,
        nbrs,
        k,
        probs,
        rng,
        visit,
    };
    let mut sub = Vec::with_capacity(k);
    for v in 0..g.num_nodes() {
        if !walk.keep(1) {
            continue;
        }
        let ext: Vec<usize> = nbrs[v].iter().copied().filter(|&u| u > v).collect();
        sub.push(v);
        walk.extend(&mut sub, ext, v);
        sub.pop();
    }
}

/// Every connected induced `k`-subgraph of every graph, as sorted instances
/// in graph order.
pub fn exact_instances(graphs: &[TypedDigraph], k: usize) -> Vec<SubgraphInstance> {
    let mut out = Vec::new();
    let mut unused = rng::stream(0, 0);
    for (gid, g) in graphs.iter().enumerate() {
        let nbrs = g.undirected_neighbors();
        esu_visit(g, &nbrs, k, None, &mut unused, |sub| {
            let mut nodes = sub.to_vec();
            nodes.sort_unstable();
            out.push(SubgraphInstance::from_sorted(gid, nodes));
        });
    }
    out
}

/// Exact census of connected induced `k`-subgraphs by isomorphism class.
pub fn enumerate_k_subgraphs(graphs: &[TypedDigraph], k: usize) -> PatternTable<ClassCensus> {
    let mut table: PatternTable<ClassCensus> = PatternTable::new();
    for inst in exact_instances(graphs, k) {
        let sub = graphs[inst.graph_id].induced_unchecked(&inst.nodes);
        let (_, entry) = table.entry_or_insert_with(sub, ClassCensus::default);
        entry.count += 1;
        entry.instances.push(inst);
    }
    table
}

/// Consecutive empty passes tolerated before giving up.
const MAX_EMPTY_PASSES: u64 = 1000;

/// Randomized ESU: repeats probabilistic passes over the set (graphs in id
/// order) until at least `tc` subgraphs were collected, then keeps a uniform
/// random subset of `tc`.
pub fn rand_esu_sample(graphs: &[TypedDigraph], cfg: &SampleConfig) -> Result<SampleResult> {
    cfg.validate()?;
    let start = Instant::now();
    if graphs.is_empty() {
        return Ok(SampleResult::default());
    }
    if !has_connected_k_subgraph(graphs, cfg.k) {
        return Err(Error::Stall {
            attempts: 0,
            k: cfg.k,
        });
    }
    let probs = cfg.probs();
    let nbrs: Vec<Vec<Vec<usize>>> = graphs.iter().map(|g| g.undirected_neighbors()).collect();
    let mut pick = rng::stream(rng::derive(cfg.seed, 0x5e1ec7), 0);
    let mut reservoir = Reservoir::new(cfg.tc);
    let mut passes = 0u64;
    let mut empty_streak = 0u64;
    while reservoir.seen() < cfg.tc as u64 {
        let before = reservoir.seen();
        for (gid, g) in graphs.iter().enumerate() {
            let mut walk_rng = rng::stream(rng::derive(cfg.seed, passes), gid as u64);
            esu_visit(g, &nbrs[gid], cfg.k, Some(&probs), &mut walk_rng, |sub| {
                let mut nodes = sub.to_vec();
                nodes.sort_unstable();
                reservoir.offer(&mut pick, SubgraphInstance::from_sorted(gid, nodes));
            });
        }
        passes += 1;
        if reservoir.seen() == before {
            empty_streak += 1;
            if empty_streak >= MAX_EMPTY_PASSES {
                return Err(Error::Stall {
                    attempts: passes,
                    k: cfg.k,
                });
            }
        } else {
            empty_streak = 0;
        }
    }
    let collected = reservoir.seen();
    Ok(SampleResult {
        instances: reservoir.into_items(),
        weights: None,
        stats: SampleStats {
            draws: collected,
            rejections: 0,
            passes,
            collected,
            wall: start.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Alphabet;
    use crate::sampling::SampleMethod;

    fn chain(n: usize) -> TypedDigraph {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1)).collect();
        TypedDigraph::from_edges(Alphabet::new(1, 2).unwrap(), vec![0; n], &e).unwrap()
    }

    fn diamond() -> TypedDigraph {
        TypedDigraph::from_edges(
            Alphabet::new(1, 2).unwrap(),
            vec![0; 4],
            &[(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)],
        )
        .unwrap()
    }

    #[test]
    fn chain_of_four_pairs() {
        let t = enumerate_k_subgraphs(&[chain(4)], 2);
        assert_eq!(t.len(), 1);
        assert_eq!(t.iter().next().unwrap().2.count, 3);
    }

    #[test]
    fn chain_of_four_triples() {
        let inst = exact_instances(&[chain(4)], 3);
        let sets: Vec<_> = inst.iter().map(|i| i.nodes.clone()).collect();
        assert_eq!(sets, vec![vec![0, 1, 2], vec![1, 2, 3]]);
        let t = enumerate_k_subgraphs(&[chain(4)], 3);
        assert_eq!(t.len(), 1);
        assert_eq!(t.iter().next().unwrap().2.count, 2);
    }

    #[test]
    fn diamond_triples() {
        // {0,1,2} fork, {1,2,3} join, {0,1,3} and {0,2,3} paths
        let t = enumerate_k_subgraphs(&[diamond()], 3);
        let mut counts: Vec<u64> = t.iter().map(|(_, _, c)| c.count).collect();
        counts.sort_unstable();
        assert_eq!(counts, vec![1, 1, 2]);
    }

    #[test]
    fn full_probability_pass_enumerates() {
        let mut cfg = SampleConfig::new(SampleMethod::RandEsu, 3, 2);
        cfg.seed = 5;
        let res = rand_esu_sample(&[chain(4)], &cfg).unwrap();
        let mut sets: Vec<_> = res.instances.iter().map(|i| i.nodes.clone()).collect();
        sets.sort();
        assert_eq!(sets, vec![vec![0, 1, 2], vec![1, 2, 3]]);
        assert_eq!(res.stats.passes, 1);
    }

    #[test]
    fn infeasible_size_stalls() {
        let cfg = SampleConfig::new(SampleMethod::RandEsu, 4, 2);
        assert!(matches!(rand_esu_sample(&[chain(3)], &cfg), Err(Error::Stall { .. })));
    }
}
