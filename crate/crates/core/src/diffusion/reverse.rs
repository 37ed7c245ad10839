use super::kernel::forward_entries;
use super::{NoiseSchedule, TransitionKernel, EPS};
use crate::graph::TypedDigraph;

/// Reverse rate row for one component in class `current` at time `t`.
///
/// Entry `y ≠ current` is
/// `β(t) Σ_{x0} P_{t|0}(y | x0) / P_{t|0}(current | x0) · posterior[x0]`
/// and the diagonal is the negated sum of the others.
pub fn reverse_rate_row(current: usize, posterior: &[f64], t: f64, sched: &NoiseSchedule) -> Vec<f64> {
    let m = posterior.len();
    let mut row = vec![0.0; m];
    fill_rate_row(
        current,
        posterior,
        sched.beta(t),
        forward_entries(m, sched.cum_rate_unchecked(0.0, t)),
        &mut row,
    );
    row
}

/// Allocation-free core of [`reverse_rate_row`], given `β(t)` and the
/// `(diagonal, off-diagonal)` entries of `P_{t|0}`.
#[inline]
pub(crate) fn fill_rate_row(current: usize, posterior: &[f64], beta: f64, (d, o): (f64, f64), row: &mut [f64]) {
    // with P = (d−o)I + o11ᵀ, Σ_{x0} w[x0] P[x0][y] = o·W + (d−o)·w[y]
    let mut total_w = 0.0;
    for (x0, r) in row.iter_mut().enumerate() {
        let p = if x0 == current { d } else { o };
        *r = posterior[x0] / p.max(EPS);
        total_w += *r;
    }
    let mut diag = 0.0;
    for (y, r) in row.iter_mut().enumerate() {
        if y == current {
            continue;
        }
        *r = beta * (o * total_w + (d - o) * *r);
        diag -= *r;
    }
    row[current] = diag;
}

pub fn reverse_rate_node(
    g: &TypedDigraph,
    i: usize,
    target: usize,
    t: f64,
    posterior: &[f64],
    kernel: &TransitionKernel,
    sched: &NoiseSchedule,
) -> f64 {
    debug_assert_eq!(posterior.len(), kernel.alphabet.node_classes);
    reverse_rate_row(g.node_type(i) as usize, posterior, t, sched)[target]
}

pub fn reverse_rate_edge(
    g: &TypedDigraph,
    (i, j): (usize, usize),
    target: usize,
    t: f64,
    posterior: &[f64],
    kernel: &TransitionKernel,
    sched: &NoiseSchedule,
) -> f64 {
    debug_assert_eq!(posterior.len(), kernel.alphabet.edge_classes);
    reverse_rate_row(g.edge(i, j) as usize, posterior, t, sched)[target]
}

/// Probability of moving from `current` to `candidate` over `dt` under the
/// rate row: stay `e^{dt·R(x,x)}`, jump `(e^{dt·R(x,x)} − 1)·R(x,y)/R(x,x)`.
#[inline]
pub fn reverse_component_prob(current: usize, candidate: usize, dt: f64, row: &[f64]) -> f64 {
    let diag = row[current];
    if diag.abs() < EPS {
        return if candidate == current { 1.0 } else { 0.0 };
    }
    let stay = (dt * diag).exp();
    if candidate == current {
        stay
    } else {
        (dt * diag).exp_m1() * row[candidate] / diag
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Alphabet;

    #[test]
    fn zero_rate_stays() {
        assert_eq!(reverse_component_prob(0, 0, 0.1, &[0.0, 0.0]), 1.0);
        assert_eq!(reverse_component_prob(0, 1, 0.1, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn two_state_symmetric() {
        let (r, dt) = (1.7, 0.05);
        let row = [-r, r];
        let stay = reverse_component_prob(0, 0, dt, &row);
        let jump = reverse_component_prob(0, 1, dt, &row);
        assert!((stay - (-r * dt).exp()).abs() < 1e-15);
        assert!((jump - (1.0 - (-r * dt).exp())).abs() < 1e-15);
        assert!((stay + jump - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_posterior_is_symmetric() {
        let s = NoiseSchedule::default();
        let a = reverse_rate_row(0, &[0.5, 0.5], 0.4, &s);
        let b = reverse_rate_row(1, &[0.5, 0.5], 0.4, &s);
        assert!((a[1] - b[0]).abs() < 1e-15);
    }

    #[test]
    fn rate_matches_bayes_on_single_node() {
        // Direct evaluation with explicit matrices on a 1-node chain, a = 3.
        let s = NoiseSchedule::default();
        let t = 0.37;
        let p = crate::diffusion::forward_component_matrix(3, s.cum_rate(0.0, t).unwrap());
        let post = [0.2, 0.5, 0.3];
        let x = 1;
        let mut want = [0.0; 3];
        for y in 0..3 {
            if y != x {
                want[y] = s.beta(t) * (0..3).map(|x0| p[[x0, y]] / p[[x0, x]] * post[x0]).sum::<f64>();
            }
        }
        want[x] = -(want[0] + want[2]);
        let ab = Alphabet::new(3, 2).unwrap();
        let g = TypedDigraph::new(ab, vec![1]).unwrap();
        let k = TransitionKernel::new(ab);
        for y in 0..3 {
            let got = reverse_rate_node(&g, 0, y, t, &post, &k, &s);
            assert!((got - want[y]).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_small_t_is_finite() {
        let s = NoiseSchedule::default();
        let row = reverse_rate_row(0, &[1.0, 0.0, 0.0, 0.0], 0.01, &s);
        assert!(row.iter().all(|r| r.is_finite()));
        assert!(row[1..].iter().all(|&r| r >= 0.0));
        // β(t)·P(y|0)/P(0|0) with the exact matrix
        let p = crate::diffusion::forward_component_matrix(4, s.cum_rate(0.0, 0.01).unwrap());
        let want = s.beta(0.01) * p[[0, 1]] / p[[0, 0]];
        assert!((row[1] - want).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one() {
        let row = [0.3, -1.0, 0.7];
        let total: f64 = (0..3).map(|y| reverse_component_prob(1, y, 0.2, &row)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
