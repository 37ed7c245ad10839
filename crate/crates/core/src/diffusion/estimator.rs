use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::digress::{digress_step, fill_reverse};
use super::kernel::{forward_entries, noise_with_cum_rate};
use super::reverse::{fill_rate_row, reverse_component_prob};
use super::{DigressSchedule, NoiseSchedule, TransitionKernel, EPS};
use crate::dataset::Marginals;
use crate::error::{Error, Result};
use crate::graph::{Alphabet, TypedDigraph};
use crate::rng;

/// Per-component clean-state distributions for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPosterior {
    /// `n × a`, one row per node.
    pub node: Array2<f64>,
    /// `n² × b`, row `i·n + j` for the pair `(i, j)`. Diagonal rows are ignored.
    pub edge: Array2<f64>,
}

impl GraphPosterior {
    pub fn num_nodes(&self) -> usize {
        self.node.nrows()
    }

    pub fn node_probs(&self, i: usize) -> &[f64] {
        let a = self.node.ncols();
        &self.node.as_slice().expect("standard layout")[i * a..(i + 1) * a]
    }

    pub fn edge_probs(&self, i: usize, j: usize) -> &[f64] {
        let (n, b) = (self.num_nodes(), self.edge.ncols());
        let r = i * n + j;
        &self.edge.as_slice().expect("standard layout")[r * b..(r + 1) * b]
    }
}

/// Anything that predicts `p(G_0 | G_t)` component-wise. `t` is the
/// normalized time in `(0, 1]`.
pub trait Posterior: Sync {
    fn alphabet(&self) -> Alphabet;

    fn predict(&self, g: &TypedDigraph, t: f64) -> GraphPosterior;

    fn predict_batch(&self, graphs: &[TypedDigraph], t: f64) -> Vec<GraphPosterior> {
        graphs.iter().map(|g| self.predict(g, t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbEstimate {
    pub mean_log_prob: f64,
    pub per_trial: Vec<f64>,
    pub trials: usize,
    /// Trials discarded for non-finite values and redrawn.
    pub aborted: usize,
}

impl LogProbEstimate {
    /// `exp(mean_log_prob)`; underflows to 0 for large patterns.
    pub fn probability(&self) -> f64 {
        self.mean_log_prob.exp()
    }

    pub fn variance(&self) -> f64 {
        let n = self.per_trial.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let m = self.mean_log_prob;
        self.per_trial.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }
}

#[inline]
fn safe_ln(x: f64) -> f64 {
    if x.is_nan() {
        x
    } else {
        x.max(EPS).ln()
    }
}

/// Log-density of the uniform limit: `k ln(1/a) + k(k−1) ln(1/b)`.
pub fn prior_log_prob(g: &TypedDigraph, kernel: &TransitionKernel) -> f64 {
    let k = g.num_nodes() as f64;
    let (a, b) = (kernel.alphabet.node_classes as f64, kernel.alphabet.edge_classes as f64);
    -k * a.ln() - k * (k - 1.0) * b.ln()
}

/// Log-density under the marginal prior, with zero-mass classes floored.
pub fn prior_log_prob_marginal(g: &TypedDigraph, marginals: &Marginals) -> f64 {
    let mut lp: f64 = g.node_types().iter().map(|&x| safe_ln(marginals.node[x as usize])).sum();
    let n = g.num_nodes();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                lp += safe_ln(marginals.edge[g.edge(i, j) as usize]);
            }
        }
    }
    lp
}

fn check_inputs(g0: &TypedDigraph, posterior: &dyn Posterior, trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if posterior.alphabet() != g0.alphabet() {
        return Err(Error::invalid("posterior alphabet differs from the graph's"));
    }
    g0.validate()
}

/// Runs `trials` paths through `batch`, redrawing any non-finite ones on
/// fresh streams. Fails once more than 10% of the requested trials abort.
fn collect_trials(
    trials: usize,
    mut batch: impl FnMut(&[u64]) -> Vec<f64>,
) -> Result<LogProbEstimate> {
    let max_aborts = trials / 10;
    let mut per_trial = Vec::with_capacity(trials);
    let mut aborted = 0usize;
    let mut next_stream = 0u64;
    let mut pending = trials;
    while pending > 0 {
        let streams: Vec<u64> = (next_stream..next_stream + pending as u64).collect();
        next_stream += pending as u64;
        for l in batch(&streams) {
            if l.is_finite() {
                per_trial.push(l);
            } else {
                aborted += 1;
            }
        }
        if aborted > max_aborts {
            return Err(Error::NumericalInstability {
                aborted,
                trials,
                pattern: None,
            });
        }
        pending = trials - per_trial.len();
    }
    let mean_log_prob = per_trial.iter().sum::<f64>() / trials as f64;
    Ok(LogProbEstimate {
        mean_log_prob,
        per_trial,
        trials,
        aborted,
    })
}

/// Monte Carlo lower bound on `ln p(G_0)` for the continuous-time process.
///
/// Each trial walks the uniform time grid forward, scoring every step by the
/// reverse transition probability implied by the posterior at the noised
/// graph minus the forward transition probability, and finishes with the
/// prior at the horizon. Trials run as one batch per step.
pub fn mc_log_prob(
    g0: &TypedDigraph,
    posterior: &dyn Posterior,
    kernel: &TransitionKernel,
    sched: &NoiseSchedule,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<LogProbEstimate> {
    check_inputs(g0, posterior, trials)?;
    sched.validate()?;
    let base: u64 = rng.random();
    let ab = kernel.alphabet;
    let (a, b) = (ab.node_classes, ab.edge_classes);
    let n = g0.num_nodes();
    collect_trials(trials, |streams| {
        let mut rngs: Vec<rng::Rng> = streams.iter().map(|&s| rng::stream(base, s)).collect();
        let mut states = vec![g0.clone(); streams.len()];
        let mut logs = vec![0.0; streams.len()];
        let mut row_x = vec![0.0; a];
        let mut row_e = vec![0.0; b];
        for step in 1..=sched.steps {
            let (s, t) = (sched.time(step - 1), sched.time(step));
            let dt = t - s;
            let c = sched.cum_rate_unchecked(s, t);
            let prev = std::mem::take(&mut states);
            for (i, g) in prev.iter().enumerate() {
                let (next, lf) = noise_with_cum_rate(g, c, ab, &mut rngs[i]);
                logs[i] -= lf;
                states.push(next);
            }
            let posts = posterior.predict_batch(&states, t / sched.horizon);
            let beta = sched.beta(t);
            let c0 = sched.cum_rate_unchecked(0.0, t);
            let (px, pe) = (forward_entries(a, c0), forward_entries(b, c0));
            for (i, post) in posts.iter().enumerate() {
                let (cur, old) = (&states[i], &prev[i]);
                let mut l = 0.0;
                for v in 0..n {
                    let x = cur.node_type(v) as usize;
                    fill_rate_row(x, post.node_probs(v), beta, px, &mut row_x);
                    l += safe_ln(reverse_component_prob(x, old.node_type(v) as usize, dt, &row_x));
                }
                for u in 0..n {
                    for v in 0..n {
                        if u == v {
                            continue;
                        }
                        let x = cur.edge(u, v) as usize;
                        fill_rate_row(x, post.edge_probs(u, v), beta, pe, &mut row_e);
                        l += safe_ln(reverse_component_prob(x, old.edge(u, v) as usize, dt, &row_e));
                    }
                }
                logs[i] += l;
            }
        }
        for (l, g) in logs.iter_mut().zip(&states) {
            *l += prior_log_prob(g, kernel);
        }
        logs
    })
}

/// Discrete-time counterpart of [`mc_log_prob`]: forward steps use
/// `Q_t = α_t I + (1 − α_t)1mᵀ` and the prior is the data marginal.
pub fn mc_log_prob_digress(
    g0: &TypedDigraph,
    posterior: &dyn Posterior,
    sched: &DigressSchedule,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<LogProbEstimate> {
    check_inputs(g0, posterior, trials)?;
    let ab = g0.alphabet();
    if sched.marginals.node.len() != ab.node_classes || sched.marginals.edge.len() != ab.edge_classes {
        return Err(Error::invalid("marginals do not match the alphabet"));
    }
    let base: u64 = rng.random();
    let n = g0.num_nodes();
    let (mx, me) = (&sched.marginals.node, &sched.marginals.edge);
    collect_trials(trials, |streams| {
        let mut rngs: Vec<rng::Rng> = streams.iter().map(|&s| rng::stream(base, s)).collect();
        let mut states = vec![g0.clone(); streams.len()];
        let mut logs = vec![0.0; streams.len()];
        let mut dist_x = vec![0.0; ab.node_classes];
        let mut dist_e = vec![0.0; ab.edge_classes];
        for t in 1..=sched.steps {
            let coeffs = (sched.alpha(t), sched.alpha_bar(t - 1), sched.alpha_bar(t));
            let prev = std::mem::take(&mut states);
            for (i, g) in prev.iter().enumerate() {
                let (next, lf) = digress_step(g, coeffs.0, sched, &mut rngs[i]);
                logs[i] -= lf;
                states.push(next);
            }
            let posts = posterior.predict_batch(&states, t as f64 / sched.steps as f64);
            for (i, post) in posts.iter().enumerate() {
                let (cur, old) = (&states[i], &prev[i]);
                let mut l = 0.0;
                for v in 0..n {
                    fill_reverse(cur.node_type(v) as usize, post.node_probs(v), mx, coeffs, &mut dist_x);
                    l += safe_ln(dist_x[old.node_type(v) as usize]);
                }
                for u in 0..n {
                    for v in 0..n {
                        if u != v {
                            fill_reverse(cur.edge(u, v) as usize, post.edge_probs(u, v), me, coeffs, &mut dist_e);
                            l += safe_ln(dist_e[old.edge(u, v) as usize]);
                        }
                    }
                }
                logs[i] += l;
            }
        }
        for (l, g) in logs.iter_mut().zip(&states) {
            *l += prior_log_prob_marginal(g, &sched.marginals);
        }
        logs
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Posterior of a point mass on node class 0 for single-node graphs.
    struct PointMass(Alphabet);

    impl Posterior for PointMass {
        fn alphabet(&self) -> Alphabet {
            self.0
        }
        fn predict(&self, g: &TypedDigraph, _t: f64) -> GraphPosterior {
            let n = g.num_nodes();
            let mut node = Array2::zeros((n, self.0.node_classes));
            node.column_mut(0).fill(1.0);
            let mut edge = Array2::zeros((n * n, self.0.edge_classes));
            edge.column_mut(0).fill(1.0);
            GraphPosterior { node, edge }
        }
    }

    struct Broken(Alphabet);

    impl Posterior for Broken {
        fn alphabet(&self) -> Alphabet {
            self.0
        }
        fn predict(&self, g: &TypedDigraph, _t: f64) -> GraphPosterior {
            let n = g.num_nodes();
            GraphPosterior {
                node: Array2::from_elem((n, self.0.node_classes), f64::NAN),
                edge: Array2::from_elem((n * n, self.0.edge_classes), f64::NAN),
            }
        }
    }

    fn one_node(class: u16) -> TypedDigraph {
        TypedDigraph::new(Alphabet::new(2, 2).unwrap(), vec![class]).unwrap()
    }

    #[test]
    fn prior_examples() {
        let k = TransitionKernel::new(Alphabet::new(4, 2).unwrap());
        let g = TypedDigraph::new(k.alphabet, vec![3]).unwrap();
        assert!((prior_log_prob(&g, &k) - 0.25f64.ln()).abs() < 1e-15);
        let k2 = TransitionKernel::new(Alphabet::new(2, 2).unwrap());
        let g2 = TypedDigraph::new(k2.alphabet, vec![0, 1]).unwrap();
        assert!((prior_log_prob(&g2, &k2) - 4.0 * 0.5f64.ln()).abs() < 1e-15);
        let m = Marginals {
            node: vec![0.25, 0.75],
            edge: vec![0.5, 0.5],
        };
        assert!((prior_log_prob_marginal(&one_node(1), &m) - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = PointMass(Alphabet::new(2, 2).unwrap());
        let k = TransitionKernel::new(p.0);
        let s = NoiseSchedule::default();
        let a = mc_log_prob(&one_node(0), &p, &k, &s, 1, &mut rng::stream(5, 0)).unwrap();
        let b = mc_log_prob(&one_node(0), &p, &k, &s, 1, &mut rng::stream(5, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn data_point_dominates() {
        let p = PointMass(Alphabet::new(2, 2).unwrap());
        let k = TransitionKernel::new(p.0);
        let s = NoiseSchedule::default();
        let hit = mc_log_prob(&one_node(0), &p, &k, &s, 50, &mut rng::stream(1, 0)).unwrap();
        let miss = mc_log_prob(&one_node(1), &p, &k, &s, 50, &mut rng::stream(1, 0)).unwrap();
        assert!(hit.mean_log_prob > miss.mean_log_prob);
        assert!(hit.per_trial.iter().all(|l| l.is_finite()));
        assert_eq!(hit.per_trial.len(), 50);
    }

    #[test]
    fn digress_data_point_dominates() {
        let p = PointMass(Alphabet::new(2, 2).unwrap());
        let s = DigressSchedule::new(
            50,
            Marginals {
                node: vec![0.5, 0.5],
                edge: vec![0.5, 0.5],
            },
        )
        .unwrap();
        let hit = mc_log_prob_digress(&one_node(0), &p, &s, 50, &mut rng::stream(1, 0)).unwrap();
        let miss = mc_log_prob_digress(&one_node(1), &p, &s, 50, &mut rng::stream(1, 0)).unwrap();
        assert!(hit.mean_log_prob > miss.mean_log_prob);
    }

    #[test]
    fn nan_posterior_is_unstable() {
        let p = Broken(Alphabet::new(2, 2).unwrap());
        let k = TransitionKernel::new(p.0);
        let s = NoiseSchedule::new(0.8, 2.0, 1.0, 5).unwrap();
        let r = mc_log_prob(&one_node(0), &p, &k, &s, 10, &mut rng::stream(1, 0));
        assert!(matches!(r, Err(Error::NumericalInstability { .. })));
    }

    #[test]
    fn alphabet_mismatch_rejected() {
        let p = PointMass(Alphabet::new(3, 2).unwrap());
        let k = TransitionKernel::new(p.0);
        let r = mc_log_prob(&one_node(0), &p, &k, &NoiseSchedule::default(), 1, &mut rng::stream(1, 0));
        assert!(r.is_err());
    }
}
