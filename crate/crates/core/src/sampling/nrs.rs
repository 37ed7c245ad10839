use std::time::Instant;

use rand::Rng;

use super::{
    attempt_budget, has_connected_k_subgraph, pick_weighted, SampleConfig, SampleResult,
    SampleStats,
};
use crate::error::{Error, Result};
use crate::graph::{SubgraphInstance, TypedDigraph};
use crate::rng;

/// Present ordered pairs with exactly one endpoint in `inside`.
fn boundary(g: &TypedDigraph, inside: &[bool]) -> Vec<(usize, usize)> {
    g.edges()
        .filter(|&(u, v, _)| inside[u] != inside[v])
        .map(|(u, v, _)| (u, v))
        .collect()
}

fn connected(g: &TypedDigraph, nodes: &[usize]) -> bool {
    g.induced_unchecked(nodes).is_connected()
}

/// One NRS draw from a single graph, or `None` when the seed edge lies in a
/// component with fewer than `k` nodes.
fn nrs_single(g: &TypedDigraph, k: usize, rng: &mut rng::Rng) -> Option<Vec<usize>> {
    let edges: Vec<(usize, usize)> = g.edges().map(|(u, v, _)| (u, v)).collect();
    let (a, b) = edges[rng.random_range(0..edges.len())];
    let n = g.num_nodes();
    let mut inside = vec![false; n];
    let mut set = vec![a, b];
    inside[a] = true;
    inside[b] = true;
    while set.len() < k {
        let el = boundary(g, &inside);
        if el.is_empty() {
            return None;
        }
        let (x, y) = el[rng.random_range(0..el.len())];
        let fresh = if inside[x] { y } else { x };
        inside[fresh] = true;
        set.push(fresh);
    }

    // reservoir phase: each unprocessed neighbor may replace a member
    let mut unprocessed: Vec<bool> = inside.iter().map(|&b| !b).collect();
    let mut i = k;
    loop {
        let el: Vec<(usize, usize)> = g
            .edges()
            .filter(|&(u, v, _)| (inside[u] && unprocessed[v]) || (unprocessed[u] && inside[v]))
            .map(|(u, v, _)| (u, v))
            .collect();
        if el.is_empty() {
            break;
        }
        i += 1;
        let (x, y) = el[rng.random_range(0..el.len())];
        let v = if unprocessed[x] { x } else { y };
        unprocessed[v] = false;
        if rng.random::<f64>() < k as f64 / i as f64 {
            let slot = rng.random_range(0..k);
            let mut candidate = set.clone();
            candidate[slot] = v;
            if connected(g, &candidate) {
                inside[set[slot]] = false;
                inside[v] = true;
                set = candidate;
            }
        }
    }
    set.sort_unstable();
    Some(set)
}

/// Neighbor reservoir sampling: grow from a random edge to `k` nodes, then
/// stream over neighbors of the current set, swapping one in with
/// probability `k/i` at the `i`-th candidate when connectivity survives.
pub fn nrs_sample(graphs: &[TypedDigraph], cfg: &SampleConfig) -> Result<SampleResult> {
    cfg.validate()?;
    let start = Instant::now();
    let weights: Vec<f64> = graphs.iter().map(|g| g.num_edges() as f64).collect();
    let total: f64 = weights.iter().sum();
    if total == 0.0 || !has_connected_k_subgraph(graphs, cfg.k) {
        return Err(Error::Stall {
            attempts: 0,
            k: cfg.k,
        });
    }
    let budget = attempt_budget(cfg.tc);
    let mut rng = rng::stream(cfg.seed, 0);
    let mut stats = SampleStats::default();
    let mut instances = Vec::with_capacity(cfg.tc);
    while instances.len() < cfg.tc {
        if stats.draws >= budget {
            return Err(Error::Stall {
                attempts: stats.draws,
                k: cfg.k,
            });
        }
        stats.draws += 1;
        let gid = pick_weighted(&mut rng, &weights, total);
        match nrs_single(&graphs[gid], cfg.k, &mut rng) {
            Some(nodes) => instances.push(SubgraphInstance::from_sorted(gid, nodes)),
            None => stats.rejections += 1,
        }
    }
    stats.collected = instances.len() as u64;
    stats.wall = start.elapsed();
    Ok(SampleResult {
        instances,
        weights: None,
        stats,
    })
}
