use rand::Rng;

use super::{DigressSchedule, EPS};
use crate::graph::{Class, TypedDigraph};

/// Applies `Q = αI + (1 − α)1mᵀ` to a class distribution: `αp + (1 − α)(Σp)m`.
pub fn digress_forward(alpha: f64, marginal: &[f64], dist: &[f64]) -> Vec<f64> {
    let mass: f64 = dist.iter().sum();
    dist.iter()
        .zip(marginal)
        .map(|(&p, &m)| alpha * p + (1.0 - alpha) * mass * m)
        .collect()
}

/// `Σ_{x0} Q_t(y → x_t) Q̄_{t−1}(x0 → y) / Q̄_t(x0 → x_t) · posterior[x0]`,
/// normalized over `y`.
pub fn digress_reverse_component(
    x_t: usize,
    t: usize,
    posterior: &[f64],
    sched: &DigressSchedule,
    marginal: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; marginal.len()];
    fill_reverse(
        x_t,
        posterior,
        marginal,
        (sched.alpha(t), sched.alpha_bar(t - 1), sched.alpha_bar(t)),
        &mut out,
    );
    out
}

#[inline]
pub(crate) fn fill_reverse(
    x_t: usize,
    posterior: &[f64],
    marginal: &[f64],
    (a_t, ab_prev, ab_t): (f64, f64, f64),
    out: &mut [f64],
) {
    let mx = marginal[x_t];
    // w[x0] = posterior[x0] / Q̄_t(x0 → x_t)
    let mut total_w = 0.0;
    for (x0, &p) in posterior.iter().enumerate() {
        let q = ab_t * (x0 == x_t) as u8 as f64 + (1.0 - ab_t) * mx;
        let w = p / q.max(EPS);
        total_w += w;
        out[x0] = w;
    }
    let mut z = 0.0;
    for y in 0..out.len() {
        let step = a_t * (y == x_t) as u8 as f64 + (1.0 - a_t) * mx;
        // Σ_{x0} w[x0] Q̄_{t−1}(x0 → y) = ᾱ_{t−1} w[y] + (1 − ᾱ_{t−1}) m[y] W
        let cum = ab_prev * out[y] + (1.0 - ab_prev) * marginal[y] * total_w;
        out[y] = step * cum;
        z += out[y];
    }
    if z > 0.0 && z.is_finite() {
        out.iter_mut().for_each(|v| *v /= z);
    } else {
        // everything underflowed: fall back to staying put
        out.iter_mut().for_each(|v| *v = 0.0);
        out[x_t] = 1.0;
    }
}

#[inline]
pub(crate) fn sample_class(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let mut u: f64 = rng.random();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Keeps a class with probability `alpha`, otherwise redraws it from the
/// marginal. Returns the new class and `ln Q(x → y)`.
#[inline]
fn step_component(rng: &mut impl Rng, x: usize, alpha: f64, marginal: &[f64]) -> (usize, f64) {
    let y = if rng.random::<f64>() < alpha {
        x
    } else {
        sample_class(rng, marginal)
    };
    let q = alpha * (x == y) as u8 as f64 + (1.0 - alpha) * marginal[y];
    (y, q.max(EPS).ln())
}

/// One discrete step with retention `alpha` on every node and off-diagonal
/// edge slot.
pub(crate) fn digress_step(g: &TypedDigraph, alpha: f64, sched: &DigressSchedule, rng: &mut impl Rng) -> (TypedDigraph, f64) {
    let n = g.num_nodes();
    let mut log_f = 0.0;
    let mut nodes = Vec::with_capacity(n);
    for &x in g.node_types() {
        let (y, lf) = step_component(rng, x as usize, alpha, &sched.marginals.node);
        log_f += lf;
        nodes.push(y as Class);
    }
    let mut edges = g.edge_matrix().to_vec();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let (y, lf) = step_component(rng, edges[i * n + j] as usize, alpha, &sched.marginals.edge);
                log_f += lf;
                edges[i * n + j] = y as Class;
            }
        }
    }
    (TypedDigraph::from_parts_unchecked(g.alphabet(), nodes, edges), log_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Marginals;

    fn sched(steps: usize) -> DigressSchedule {
        DigressSchedule::new(
            steps,
            Marginals {
                node: vec![0.25, 0.75],
                edge: vec![0.6, 0.4],
            },
        )
        .unwrap()
    }

    #[test]
    fn forward_examples() {
        let m = [0.25, 0.75];
        assert_eq!(digress_forward(1.0, &m, &[1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(digress_forward(0.0, &m, &[1.0, 0.0]), m.to_vec());
        assert_eq!(digress_forward(0.5, &m, &[1.0, 0.0]), vec![0.625, 0.375]);
    }

    #[test]
    fn alpha_bar_decreasing_and_composes() {
        let s = sched(50);
        assert_eq!(s.alpha_bar(0), 1.0);
        for t in 1..=50 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
        // Q̄_t against the product Q_1 ⋯ Q_t, applied row by row
        let m = &s.marginals.node;
        for x in 0..2 {
            let mut row = vec![0.0; 2];
            row[x] = 1.0;
            for t in 1..=50 {
                row = digress_forward(s.alpha(t), m, &row);
                let mut e = vec![0.0; 2];
                e[x] = 1.0;
                let direct = digress_forward(s.alpha_bar(t), m, &e);
                for (a, b) in row.iter().zip(&direct) {
                    assert!((a - b).abs() < 1e-9, "t={t}");
                }
            }
        }
    }

    #[test]
    fn reverse_near_identity_at_first_step() {
        let s = sched(1000);
        // exact posterior p(x0 | x_1 = 1) under a uniform data prior
        let lik = digress_forward(s.alpha_bar(1), &s.marginals.node, &[1.0, 0.0])[1];
        let keep = digress_forward(s.alpha_bar(1), &s.marginals.node, &[0.0, 1.0])[1];
        let post = [lik / (lik + keep), keep / (lik + keep)];
        let out = digress_reverse_component(1, 1, &post, &s, &s.marginals.node);
        assert!(out[1] > 0.999);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reverse_symmetric_for_symmetric_marginal() {
        let mut s = sched(20);
        s.marginals.node = vec![0.5, 0.5];
        let a = digress_reverse_component(0, 7, &[0.5, 0.5], &s, &s.marginals.node);
        let b = digress_reverse_component(1, 7, &[0.5, 0.5], &s, &s.marginals.node);
        assert!((a[0] - b[1]).abs() < 1e-12);
        assert!((a[1] - b[0]).abs() < 1e-12);
    }

    #[test]
    fn reverse_is_bayes() {
        // q(x_{t−1} | x_t, x0) with explicit matrices, mixed over the posterior
        let s = sched(10);
        let m = s.marginals.node.clone();
        let t = 4;
        let post = [0.3, 0.7];
        let x_t = 0;
        let q = |alpha: f64, from: usize, to: usize| alpha * (from == to) as u8 as f64 + (1.0 - alpha) * m[to];
        let mut want = [0.0; 2];
        for (y, w) in want.iter_mut().enumerate() {
            for x0 in 0..2 {
                *w += q(s.alpha(t), y, x_t) * q(s.alpha_bar(t - 1), x0, y) / q(s.alpha_bar(t), x0, x_t) * post[x0];
            }
        }
        let z: f64 = want.iter().sum();
        let got = digress_reverse_component(x_t, t, &post, &s, &m);
        for y in 0..2 {
            assert!((got[y] - want[y] / z).abs() < 1e-12);
        }
    }
}
