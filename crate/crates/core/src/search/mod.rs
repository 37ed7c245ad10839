//! Beam search over pattern sizes.
//!
//! The beam starts from the most frequent 3-node classes, counted exactly.
//! Each round grows every stored occurrence by one adjacent node, groups the
//! grown node sets by isomorphism class, drops classes rejected by the
//! optional constraint, scores the rest with the diffusion estimator and keeps
//! the best `width`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::GraphRecord;
use crate::diffusion::{NoiseProcess, Posterior};
use crate::error::{Error, Result};
use crate::graph::{Pattern, PatternKey, PatternTable, SubgraphInstance, TypedDigraph};
use crate::rng;
use crate::sampling::enumerate_k_subgraphs;
use crate::sampling::Reservoir;

/// Accept/reject predicate applied to candidate patterns.
pub type Constraint = Arc<dyn Fn(&TypedDigraph) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct BeamConfig {
    pub k_max: usize,
    pub width: usize,
    /// Estimator trials per candidate class.
    pub trials: usize,
    /// Occurrences kept per class; extras are thinned by reservoir sampling.
    pub instance_cap: usize,
    pub constraint: Option<Constraint>,
    pub seed: u64,
}

impl fmt::Debug for BeamConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BeamConfig")
            .field("k_max", &self.k_max)
            .field("width", &self.width)
            .field("trials", &self.trials)
            .field("instance_cap", &self.instance_cap)
            .field("constraint", &self.constraint.is_some())
            .field("seed", &self.seed)
            .finish()
    }
}

impl BeamConfig {
    pub fn new(k_max: usize, width: usize) -> Self {
        Self {
            k_max,
            width,
            trials: 20,
            instance_cap: 5000,
            constraint: None,
            seed: 0,
        }
    }

    pub fn with_constraint(mut self, c: impl Fn(&TypedDigraph) -> bool + Send + Sync + 'static) -> Self {
        self.constraint = Some(Arc::new(c));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max < 4 {
            return Err(Error::invalid("k_max must be at least 4"));
        }
        if self.width == 0 || self.trials == 0 || self.instance_cap == 0 {
            return Err(Error::invalid("beam width, trials and instance cap must be positive"));
        }
        Ok(())
    }

    fn accepts(&self, g: &TypedDigraph) -> bool {
        self.constraint.as_ref().is_none_or(|c| c(g))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamEntry {
    pub pattern: Pattern,
    /// Log count at size 3, estimator log-probability above.
    pub score: f64,
    pub instances: Vec<SubgraphInstance>,
}

/// Patterns of one size, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub k: usize,
    pub entries: Vec<BeamEntry>,
}

impl Beam {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.entries.iter().map(|e| &e.pattern)
    }
}

/// A candidate class after scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub pattern: Pattern,
    pub slot: usize,
    pub score: f64,
    pub instances: Vec<SubgraphInstance>,
}

fn census_beam(graphs: &[TypedDigraph], width: usize, keep: impl Fn(&TypedDigraph) -> bool) -> Beam {
    let census = enumerate_k_subgraphs(graphs, 3);
    let scored: Vec<ScoredCandidate> = census
        .into_iter()
        .filter(|(_, p, _)| keep(p.graph()))
        .map(|(id, pattern, c)| ScoredCandidate {
            pattern,
            slot: id.slot,
            score: (c.count as f64).ln(),
            instances: c.instances,
        })
        .collect();
    select_top_n(scored, width, 3)
}

/// The `width` most frequent 3-node classes with their exact occurrences.
pub fn init_beam(graphs: &[TypedDigraph], width: usize) -> Result<Beam> {
    let beam = census_beam(graphs, width, |_| true);
    if beam.is_empty() {
        return Err(Error::EmptyBeam);
    }
    Ok(beam)
}

/// Grows every stored occurrence by one adjacent node and groups the results
/// by class. A node set reached from several occurrences is kept once.
pub fn expand_one_node(graphs: &[TypedDigraph], beam: &Beam, instance_cap: usize, seed: u64) -> PatternTable<Vec<SubgraphInstance>> {
    let nbrs: Vec<Vec<Vec<usize>>> = graphs.iter().map(|g| g.undirected_neighbors()).collect();
    let mut seen: HashSet<(usize, Vec<usize>)> = HashSet::new();
    let mut table: PatternTable<Reservoir<SubgraphInstance>> = PatternTable::new();
    let mut pick = rng::stream(rng::derive(seed, 0xe7a9), beam.k as u64);
    for entry in &beam.entries {
        for inst in &entry.instances {
            let g = &graphs[inst.graph_id];
            let mut frontier: Vec<usize> = inst
                .nodes
                .iter()
                .flat_map(|&u| nbrs[inst.graph_id][u].iter().copied())
                .filter(|v| inst.nodes.binary_search(v).is_err())
                .collect();
            frontier.sort_unstable();
            frontier.dedup();
            for v in frontier {
                let mut nodes = inst.nodes.clone();
                let at = nodes.binary_search(&v).unwrap_err();
                nodes.insert(at, v);
                if !seen.insert((inst.graph_id, nodes.clone())) {
                    continue;
                }
                let sub = g.induced_unchecked(&nodes);
                let (_, res) = table.entry_or_insert_with(sub, || Reservoir::new(instance_cap));
                res.offer(&mut pick, SubgraphInstance::from_sorted(inst.graph_id, nodes));
            }
        }
    }
    table.map(|_, r| {
        let mut items = r.into_items();
        items.sort();
        items
    })
}

/// Scores every class once with the estimator. Class `i` in table order uses
/// its own stream, so scores do not depend on evaluation order.
pub fn score_candidates(
    candidates: PatternTable<Vec<SubgraphInstance>>,
    posterior: &dyn Posterior,
    process: &NoiseProcess,
    trials: usize,
    seed: u64,
) -> Result<Vec<ScoredCandidate>> {
    let mut out = Vec::with_capacity(candidates.len());
    for (i, (id, pattern, instances)) in candidates.into_iter().enumerate() {
        let mut r = rng::stream(rng::derive(seed, pattern.size() as u64), i as u64);
        let est = process
            .log_prob(pattern.graph(), posterior, trials, &mut r)
            .map_err(|e| match e {
                Error::NumericalInstability { aborted, trials, .. } => Error::NumericalInstability {
                    aborted,
                    trials,
                    pattern: Some(pattern.key()),
                },
                other => other,
            })?;
        out.push(ScoredCandidate {
            pattern,
            slot: id.slot,
            score: est.mean_log_prob,
            instances,
        });
    }
    Ok(out)
}

/// Keeps the `width` best candidates, ordered by score (descending), then
/// pattern key and slot (ascending).
pub fn select_top_n(mut scored: Vec<ScoredCandidate>, width: usize, k: usize) -> Beam {
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.pattern.key().cmp(&b.pattern.key()))
            .then(a.slot.cmp(&b.slot))
    });
    scored.truncate(width);
    Beam {
        k,
        entries: scored
            .into_iter()
            .map(|c| BeamEntry {
                pattern: c.pattern,
                score: c.score,
                instances: c.instances,
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// The last nonempty beam, or an empty size-3 beam if nothing survived.
    pub beam: Beam,
    /// Every nonempty beam in order of size.
    pub levels: Vec<Beam>,
    /// Set when some level came out empty before `k_max`.
    pub truncated: bool,
}

/// Runs the full search up to `cfg.k_max`. `denoisers` maps each size
/// `4..=k_max` to the posterior used to score candidates of that size.
pub fn beam_search<P: Posterior>(
    graphs: &[TypedDigraph],
    cfg: &BeamConfig,
    denoisers: &BTreeMap<usize, P>,
    process: &NoiseProcess,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    for k in 4..=cfg.k_max {
        if !denoisers.contains_key(&k) {
            return Err(Error::invalid(format!("no denoiser for size {k}")));
        }
    }
    let first = census_beam(graphs, cfg.width, |g| cfg.accepts(g));
    if first.is_empty() {
        return Ok(SearchOutcome {
            beam: first,
            levels: Vec::new(),
            truncated: true,
        });
    }
    let mut levels = vec![first];
    for k in 4..=cfg.k_max {
        let prev = levels.last().expect("nonempty");
        let mut cands = expand_one_node(graphs, prev, cfg.instance_cap, cfg.seed);
        cands.retain(|p, _| cfg.accepts(p.graph()));
        if cands.is_empty() {
            let beam = levels.last().cloned().expect("nonempty");
            return Ok(SearchOutcome {
                beam,
                levels,
                truncated: true,
            });
        }
        let scored = score_candidates(cands, &denoisers[&k], process, cfg.trials, cfg.seed)?;
        levels.push(select_top_n(scored, cfg.width, k));
    }
    Ok(SearchOutcome {
        beam: levels.last().cloned().expect("nonempty"),
        levels,
        truncated: false,
    })
}

/// One line of a beam dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamRecord {
    pub key: String,
    pub k: usize,
    pub score: f64,
    pub instance_count: usize,
    pub pattern: GraphRecord,
}

impl BeamRecord {
    pub fn from_entry(k: usize, e: &BeamEntry) -> Self {
        let key = e.pattern.key().to_string();
        Self {
            pattern: GraphRecord::from_graph(key.clone(), e.pattern.graph()),
            key,
            k,
            score: e.score,
            instance_count: e.instances.len(),
        }
    }

    pub fn key(&self) -> Result<PatternKey> {
        self.key
            .parse()
            .map_err(|_| Error::invalid(format!("bad pattern key {:?}", self.key)))
    }
}

/// Writes a beam as JSON lines, one pattern per line, best first.
pub fn write_beam(beam: &Beam, mut out: impl Write) -> std::io::Result<()> {
    for e in &beam.entries {
        serde_json::to_writer(&mut out, &BeamRecord::from_entry(beam.k, e))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
