//! Connected induced `k`-subgraph samplers and the exact ESU census.
//!
//! | method | draws | bias |
//! |---|---|---|
//! | [`ars_sample`] | `k` random nodes from an edge-weighted graph, reject if disconnected | none, but slow |
//! | [`nrs_sample`] | edge-seeded growth then neighbor reservoir swaps | biased |
//! | [`rand_esu_sample`] | ESU tree, branch at depth `d` kept with probability `p_d` | none |
//! | [`rand_fase_sample`] | same tree, leaves weighted by `1/q` | unbiased counts |
//!
//! [`enumerate_k_subgraphs`] is ESU with every `p_d = 1`: the exact census
//! used as ground truth.

mod ars;
mod esu;
mod fase;
mod nrs;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SubgraphInstance, TypedDigraph};

pub use ars::ars_sample;
pub use esu::{enumerate_k_subgraphs, esu_visit, exact_instances, rand_esu_sample, ClassCensus};
pub use fase::{rand_fase_sample, FaseOutput};
pub use nrs::nrs_sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SampleMethod {
    #[serde(rename = "ars")]
    Ars,
    #[serde(rename = "nrs")]
    Nrs,
    #[serde(rename = "rand-esu")]
    RandEsu,
    #[serde(rename = "rand-fase")]
    RandFase,
    #[serde(rename = "exact-esu")]
    ExactEsu,
}

impl std::str::FromStr for SampleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ars" => Ok(Self::Ars),
            "nrs" => Ok(Self::Nrs),
            "rand-esu" | "randesu" => Ok(Self::RandEsu),
            "rand-fase" | "randfase" => Ok(Self::RandFase),
            "exact-esu" | "exactesu" | "esu" => Ok(Self::ExactEsu),
            other => Err(Error::invalid(format!("unknown sampling method `{other}`"))),
        }
    }
}

impl std::fmt::Display for SampleMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Ars => "ars",
            Self::Nrs => "nrs",
            Self::RandEsu => "rand-esu",
            Self::RandFase => "rand-fase",
            Self::ExactEsu => "exact-esu",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub method: SampleMethod,
    pub k: usize,
    /// Target count; ignored by the exact census.
    pub tc: usize,
    /// Depth-probability exponent for ESU-style samplers.
    pub r: f64,
    /// Explicit `p_1..p_k`, overriding `r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_probs: Option<Vec<f64>>,
    pub seed: u64,
}

impl SampleConfig {
    pub fn new(method: SampleMethod, k: usize, tc: usize) -> Self {
        Self {
            method,
            k,
            tc,
            r: 0.0,
            depth_probs: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("subgraph size k must be at least 2"));
        }
        if self.method != SampleMethod::ExactEsu && self.tc == 0 {
            return Err(Error::invalid("target count tc must be at least 1"));
        }
        if !(self.r >= 0.0) {
            return Err(Error::invalid("depth exponent r must be nonnegative"));
        }
        if let Some(p) = &self.depth_probs {
            if p.len() != self.k || p.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                return Err(Error::invalid("depth_probs needs k values in (0, 1]"));
            }
        }
        Ok(())
    }

    /// `p_1..p_k` in effect.
    pub fn probs(&self) -> Vec<f64> {
        self.depth_probs
            .clone()
            .unwrap_or_else(|| depth_probs(self.k, self.r))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub draws: u64,
    pub rejections: u64,
    /// Full ESU passes over the set (ESU-style samplers only).
    pub passes: u64,
    /// Connected subgraphs seen before down-sampling.
    pub collected: u64,
    #[serde(with = "secs")]
    pub wall: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleResult {
    pub instances: Vec<SubgraphInstance>,
    /// Inverse inclusion probabilities, Rand-FaSE only.
    pub weights: Option<Vec<f64>>,
    pub stats: SampleStats,
}

impl SampleResult {
    /// Induced subgraphs of the instances, in instance order.
    pub fn subgraphs(&self, graphs: &[TypedDigraph]) -> Vec<TypedDigraph> {
        self.instances
            .iter()
            .map(|i| graphs[i.graph_id].induced_unchecked(&i.nodes))
            .collect()
    }
}

/// `p_d = (1 − d/(k+1))^r` for `d = 1..=k`.
pub fn depth_probs(k: usize, r: f64) -> Vec<f64> {
    (1..=k)
        .map(|d| (1.0 - d as f64 / (k as f64 + 1.0)).powf(r))
        .collect()
}

/// Runs the sampler selected by `cfg.method`.
pub fn sample(graphs: &[TypedDigraph], cfg: &SampleConfig) -> Result<SampleResult> {
    cfg.validate()?;
    match cfg.method {
        SampleMethod::Ars => ars_sample(graphs, cfg),
        SampleMethod::Nrs => nrs_sample(graphs, cfg),
        SampleMethod::RandEsu => rand_esu_sample(graphs, cfg),
        SampleMethod::RandFase => rand_fase_sample(graphs, cfg).map(|o| o.sample),
        SampleMethod::ExactEsu => {
            let start = std::time::Instant::now();
            let instances = exact_instances(graphs, cfg.k);
            let collected = instances.len() as u64;
            Ok(SampleResult {
                instances,
                weights: None,
                stats: SampleStats {
                    passes: 1,
                    collected,
                    wall: start.elapsed(),
                    ..Default::default()
                },
            })
        }
    }
}

/// Draw budget for rejection-style samplers.
pub(crate) fn attempt_budget(tc: usize) -> u64 {
    10_000u64.saturating_mul(tc as u64)
}

/// True when some graph has a weakly connected component with at least `k`
/// nodes, i.e. a connected induced `k`-subgraph exists.
pub(crate) fn has_connected_k_subgraph(graphs: &[TypedDigraph], k: usize) -> bool {
    graphs.iter().any(|g| {
        let n = g.num_nodes();
        let mut seen = vec![false; n];
        (0..n).any(|s| {
            if seen[s] {
                return false;
            }
            seen[s] = true;
            let mut stack = vec![s];
            let mut size = 1;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if !seen[v] && g.adjacent(u, v) {
                        seen[v] = true;
                        size += 1;
                        stack.push(v);
                    }
                }
            }
            size >= k
        })
    })
}

/// Picks an index with probability proportional to `weights`.
pub(crate) fn pick_weighted(rng: &mut impl rand::Rng, weights: &[f64], total: f64) -> usize {
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Uniform reservoir over a stream (Algorithm R).
pub(crate) struct Reservoir<T> {
    cap: usize,
    seen: u64,
    items: Vec<T>,
}

impl<T> Reservoir<T> {
    pub(crate) fn new(cap: usize) -> Self {
        Self {
            cap,
            seen: 0,
            items: Vec::with_capacity(cap.min(1 << 16)),
        }
    }

    pub(crate) fn offer(&mut self, rng: &mut impl rand::Rng, item: T) {
        self.seen += 1;
        if self.items.len() < self.cap {
            self.items.push(item);
        } else {
            let j = rng.random_range(0..self.seen);
            if (j as usize) < self.cap {
                self.items[j as usize] = item;
            }
        }
    }

    pub(crate) fn seen(&self) -> u64 {
        self.seen
    }

    pub(crate) fn into_items(self) -> Vec<T> {
        self.items
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_probs_examples() {
        assert_eq!(depth_probs(4, 0.0), vec![1.0; 4]);
        let p = depth_probs(4, 1.0);
        for (a, b) in p.iter().zip([0.8, 0.6, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = depth_probs(2, 2.0);
        assert!((p[0] - 4.0 / 9.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SampleConfig::new(SampleMethod::Ars, 1, 5).validate().is_err());
        assert!(SampleConfig::new(SampleMethod::Ars, 3, 0).validate().is_err());
        assert!(SampleConfig::new(SampleMethod::ExactEsu, 3, 0).validate().is_ok());
        assert!("bogus".parse::<SampleMethod>().is_err());
        assert_eq!("Rand_ESU".parse::<SampleMethod>().unwrap(), SampleMethod::RandEsu);
    }
}
