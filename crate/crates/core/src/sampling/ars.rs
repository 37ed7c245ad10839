use std::time::Instant;

use rand::seq::index;

use super::{
    attempt_budget, has_connected_k_subgraph, pick_weighted, SampleConfig, SampleResult,
    SampleStats,
};
use crate::error::{Error, Result};
use crate::graph::{SubgraphInstance, TypedDigraph};
use crate::rng;

/// Acceptance–rejection sampling: pick a graph with probability proportional
/// to its edge count, pick `k` of its nodes uniformly, keep the draw if the
/// induced subgraph is connected.
pub fn ars_sample(graphs: &[TypedDigraph], cfg: &SampleConfig) -> Result<SampleResult> {
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
        let g = &graphs[gid];
        if g.num_nodes() < cfg.k {
            stats.rejections += 1;
            continue;
        }
        let mut nodes = index::sample(&mut rng, g.num_nodes(), cfg.k).into_vec();
        nodes.sort_unstable();
        if g.induced_unchecked(&nodes).is_connected() {
            instances.push(SubgraphInstance::from_sorted(gid, nodes));
        } else {
            stats.rejections += 1;
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
