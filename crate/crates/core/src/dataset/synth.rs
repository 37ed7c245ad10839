//! Synthetic DAG sets with planted motifs.
//!
//! Node ids are always a topological order: background nodes come first,
//! each with one random parent among earlier nodes (so the background is
//! connected) plus extra forward edges at `edge_density`. A planted motif is
//! appended on fresh ids in its own topological order and attached by one
//! random edge from a background node into the copy, which leaves the copy's
//! induced subgraph equal to the motif.

use rand::Rng;

use super::GraphSet;
use crate::error::{Error, Result};
use crate::graph::{topological_levels, Alphabet, Class, TypedDigraph};
use crate::rng;

#[derive(Debug, Clone)]
pub struct PlantedMotif {
    pub motif: TypedDigraph,
    /// Probability that a graph receives one copy.
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub num_graphs: usize,
    /// Inclusive range of total node counts, planted copies included.
    pub nodes_per_graph: (usize, usize),
    pub motifs: Vec<PlantedMotif>,
    /// Probability of each extra forward background edge.
    pub edge_density: f64,
    pub alphabet: Alphabet,
    /// Relative node-class weights for background nodes; uniform when `None`.
    pub node_class_weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.nodes_per_graph;
        if lo == 0 || lo > hi {
            return Err(Error::invalid("nodes_per_graph must be a nonempty range of positive sizes"));
        }
        if !(0.0..=1.0).contains(&self.edge_density) {
            return Err(Error::invalid("edge_density must lie in [0, 1]"));
        }
        let planted: usize = self.motifs.iter().map(|m| m.motif.num_nodes()).sum();
        if planted >= lo {
            return Err(Error::invalid(format!(
                "planted motifs need {planted} nodes but graphs may have only {lo}"
            )));
        }
        for m in &self.motifs {
            if !(0.0..=1.0).contains(&m.rate) {
                return Err(Error::invalid("motif rate must lie in [0, 1]"));
            }
            if m.motif.alphabet() != self.alphabet {
                return Err(Error::invalid("motif alphabet differs from the spec's"));
            }
            if !m.motif.is_connected() {
                return Err(Error::invalid("planted motifs must be connected"));
            }
            topological_levels(&m.motif)?;
        }
        if let Some(w) = &self.node_class_weights {
            if w.len() != self.alphabet.node_classes
                || w.iter().any(|&x| !(x >= 0.0) || !x.is_finite())
                || w.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::invalid("node_class_weights must be nonnegative with positive sum, one per class"));
            }
        }
        Ok(())
    }
}

fn topo_order(g: &TypedDigraph) -> Vec<usize> {
    let levels = topological_levels(g).expect("validated acyclic");
    let mut order: Vec<usize> = (0..g.num_nodes()).collect();
    order.sort_by_key(|&v| (levels[v], v));
    order
}

fn pick_class(rng: &mut rng::Rng, weights: Option<&[f64]>, classes: usize) -> Class {
    match weights {
        None => rng.random_range(0..classes) as Class,
        Some(w) => {
            let total: f64 = w.iter().sum();
            let mut x = rng.random::<f64>() * total;
            for (c, &wc) in w.iter().enumerate() {
                if x < wc {
                    return c as Class;
                }
                x -= wc;
            }
            w.iter().rposition(|&wc| wc > 0.0).unwrap_or(0) as Class
        }
    }
}

/// Generates a graph set; identical specs give identical sets.
pub fn synth_generate(spec: &SynthSpec) -> Result<GraphSet> {
    spec.validate()?;
    let ab = spec.alphabet;
    let edge_class = |rng: &mut rng::Rng| rng.random_range(1..ab.edge_classes) as Class;
    let orders: Vec<Vec<usize>> = spec.motifs.iter().map(|m| topo_order(&m.motif)).collect();
    let mut set = GraphSet::new("synthetic", ab);
    for gi in 0..spec.num_graphs {
        let mut rng = rng::stream(spec.seed, gi as u64);
        let total = rng.random_range(spec.nodes_per_graph.0..=spec.nodes_per_graph.1);
        let chosen: Vec<usize> = (0..spec.motifs.len())
            .filter(|&m| rng.random::<f64>() < spec.motifs[m].rate)
            .collect();
        let planted: usize = chosen.iter().map(|&m| spec.motifs[m].motif.num_nodes()).sum();
        let background = total - planted;

        let mut types: Vec<Class> = (0..background)
            .map(|_| pick_class(&mut rng, spec.node_class_weights.as_deref(), ab.node_classes))
            .collect();
        for &m in &chosen {
            let motif = &spec.motifs[m].motif;
            types.extend(orders[m].iter().map(|&v| motif.node_type(v)));
        }
        let mut g = TypedDigraph::new(ab, types)?;
        for v in 1..background {
            let parent = rng.random_range(0..v);
            let c = edge_class(&mut rng);
            g.set_edge(parent, v, c)?;
            for u in 0..v {
                if u != parent && rng.random::<f64>() < spec.edge_density {
                    let c = edge_class(&mut rng);
                    g.set_edge(u, v, c)?;
                }
            }
        }
        let mut offset = background;
        for &m in &chosen {
            let motif = &spec.motifs[m].motif;
            let order = &orders[m];
            let mut at = vec![0; order.len()];
            for (pos, &v) in order.iter().enumerate() {
                at[v] = offset + pos;
            }
            for (u, v, c) in motif.edges() {
                g.set_edge(at[u], at[v], c)?;
            }
            let host = rng.random_range(0..background);
            let target = offset + rng.random_range(0..order.len());
            let c = edge_class(&mut rng);
            g.set_edge(host, target, c)?;
            offset += order.len();
        }
        set.push(format!("g{gi}"), g)?;
    }
    Ok(set)
}
