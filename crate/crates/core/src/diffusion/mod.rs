//! Discrete-state diffusion over typed digraphs.
//!
//! The continuous-time process noises each node and each off-diagonal edge
//! slot independently with a uniform rate matrix scaled by `β(t)`. The
//! discrete-time variant mixes each component toward the data marginals on a
//! cosine schedule. Both expose a Monte Carlo estimate of `ln p(G_0)` given
//! a [`Posterior`].

mod digress;
mod estimator;
mod kernel;
mod reverse;
mod schedule;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use digress::{digress_forward, digress_reverse_component};
pub use estimator::{
    mc_log_prob, mc_log_prob_digress, prior_log_prob, prior_log_prob_marginal, GraphPosterior,
    LogProbEstimate, Posterior,
};
pub use kernel::{forward_component_matrix, sample_forward_step, TransitionKernel};
pub use reverse::{reverse_component_prob, reverse_rate_edge, reverse_rate_node, reverse_rate_row};
pub use schedule::{DigressSchedule, NoiseSchedule};

use crate::error::Result;
use crate::graph::{Alphabet, Class, TypedDigraph};

/// Floor applied before every log and ratio.
pub const EPS: f64 = 1e-12;

/// Which estimator family a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Disco,
    Digress,
}

impl std::str::FromStr for Estimator {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disco" => Ok(Self::Disco),
            "digress" => Ok(Self::Digress),
            other => Err(crate::Error::invalid(format!("unknown estimator {other:?}"))),
        }
    }
}

/// A fully specified noising process: what training corrupts with and what
/// scoring integrates over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseProcess {
    Disco {
        schedule: NoiseSchedule,
        kernel: TransitionKernel,
    },
    Digress {
        schedule: DigressSchedule,
    },
}

impl NoiseProcess {
    pub fn disco(alphabet: Alphabet, schedule: NoiseSchedule) -> Self {
        Self::Disco {
            schedule,
            kernel: TransitionKernel::new(alphabet),
        }
    }

    pub fn estimator(&self) -> Estimator {
        match self {
            Self::Disco { .. } => Estimator::Disco,
            Self::Digress { .. } => Estimator::Digress,
        }
    }

    /// Draws a time and a noised copy of `g0` at that time. The returned time
    /// is normalized to `(0, 1]`.
    pub fn noise(&self, g0: &TypedDigraph, rng: &mut impl Rng) -> (TypedDigraph, f64) {
        match self {
            Self::Disco { schedule, kernel } => {
                let t = schedule.horizon * (1.0 - rng.random::<f64>());
                let c = schedule.cum_rate_unchecked(0.0, t);
                let (g, _) = kernel::noise_with_cum_rate(g0, c, kernel.alphabet, rng);
                (g, t / schedule.horizon)
            }
            Self::Digress { schedule } => {
                let t = rng.random_range(1..=schedule.steps);
                let ab = schedule.alpha_bar(t);
                let mut g = g0.clone();
                let n = g.num_nodes();
                let mut nodes = g.node_types().to_vec();
                for x in nodes.iter_mut() {
                    if rng.random::<f64>() >= ab {
                        *x = digress::sample_class(rng, &schedule.marginals.node) as Class;
                    }
                }
                let mut edges = g.edge_matrix().to_vec();
                for i in 0..n {
                    for j in 0..n {
                        if i != j && rng.random::<f64>() >= ab {
                            edges[i * n + j] = digress::sample_class(rng, &schedule.marginals.edge) as Class;
                        }
                    }
                }
                g = TypedDigraph::from_parts_unchecked(g.alphabet(), nodes, edges);
                (g, t as f64 / schedule.steps as f64)
            }
        }
    }

    pub fn log_prob(
        &self,
        g0: &TypedDigraph,
        posterior: &dyn Posterior,
        trials: usize,
        rng: &mut impl Rng,
    ) -> Result<LogProbEstimate> {
        match self {
            Self::Disco { schedule, kernel } => mc_log_prob(g0, posterior, kernel, schedule, trials, rng),
            Self::Digress { schedule } => mc_log_prob_digress(g0, posterior, schedule, trials, rng),
        }
    }

    pub fn prior_log_prob(&self, g: &TypedDigraph) -> f64 {
        match self {
            Self::Disco { kernel, .. } => prior_log_prob(g, kernel),
            Self::Digress { schedule } => prior_log_prob_marginal(g, &schedule.marginals),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Marginals;
    use crate::rng;

    #[test]
    fn chapman_kolmogorov() {
        for m in 2..=6 {
            let p = forward_component_matrix(m, 0.3).dot(&forward_component_matrix(m, 1.1));
            let q = forward_component_matrix(m, 1.4);
            assert!((&p - &q).iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn noise_keeps_diagonal_and_alphabet() {
        let ab = Alphabet::new(3, 3).unwrap();
        let g = TypedDigraph::from_edges(ab, vec![0, 1, 2], &[(0, 1, 1), (1, 2, 2)]).unwrap();
        let digress = NoiseProcess::Digress {
            schedule: DigressSchedule::new(
                10,
                Marginals {
                    node: vec![0.2, 0.3, 0.5],
                    edge: vec![0.8, 0.1, 0.1],
                },
            )
            .unwrap(),
        };
        let disco = NoiseProcess::disco(ab, NoiseSchedule::default());
        let mut r = rng::stream(3, 0);
        for p in [&disco, &digress] {
            for _ in 0..50 {
                let (h, t) = p.noise(&g, &mut r);
                assert!(t > 0.0 && t <= 1.0);
                assert!(h.validate().is_ok());
                assert!((0..3).all(|i| h.edge(i, i) == 0));
            }
        }
    }
}
