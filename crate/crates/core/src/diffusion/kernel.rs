use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NoiseSchedule, EPS};
use crate::graph::{Alphabet, Class, TypedDigraph};

/// Uniform-rate CTMC kernels: every node uses `R_x = 11ᵀ − aI` and every
/// off-diagonal edge slot `R_e = 11ᵀ − bI`, both scaled by `β(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionKernel {
    pub alphabet: Alphabet,
}

impl TransitionKernel {
    pub fn new(alphabet: Alphabet) -> Self {
        Self { alphabet }
    }

    /// `11ᵀ − mI`: off-diagonal 1, rows sum to 0.
    pub fn rate_matrix(m: usize) -> Array2<f64> {
        Array2::from_shape_fn((m, m), |(i, j)| if i == j { 1.0 - m as f64 } else { 1.0 })
    }

    pub fn node_rates(&self) -> Array2<f64> {
        Self::rate_matrix(self.alphabet.node_classes)
    }

    pub fn edge_rates(&self) -> Array2<f64> {
        Self::rate_matrix(self.alphabet.edge_classes)
    }
}

/// `exp(c (11ᵀ − mI))` in closed form. Since `R² = −mR`, the exponential
/// collapses to `I + (1 − e^{−mc})/m · R`: diagonal `(1 + (m−1)e^{−mc})/m`,
/// off-diagonal `(1 − e^{−mc})/m`.
pub fn forward_component_matrix(m: usize, c: f64) -> Array2<f64> {
    let (diag, off) = forward_entries(m, c);
    Array2::from_shape_fn((m, m), |(i, j)| if i == j { diag } else { off })
}

/// `(diagonal, off-diagonal)` entries of [`forward_component_matrix`].
#[inline]
pub(crate) fn forward_entries(m: usize, c: f64) -> (f64, f64) {
    let mf = m as f64;
    let decay = (-mf * c).exp();
    ((1.0 + (mf - 1.0) * decay) / mf, -(-mf * c).exp_m1() / mf)
}

#[inline]
pub(crate) fn sample_component(rng: &mut impl Rng, current: usize, m: usize, diag: f64, off: f64) -> usize {
    let u: f64 = rng.random();
    if u < diag {
        return current;
    }
    // remaining mass is spread evenly over the other m − 1 classes
    let j = (((u - diag) / off) as usize).min(m - 2);
    if j >= current {
        j + 1
    } else {
        j
    }
}

/// Noises every node and off-diagonal edge slot independently from time `s`
/// to `t`. Returns the new graph and the log-probability of the realized
/// transition.
pub fn sample_forward_step(
    g: &TypedDigraph,
    s: f64,
    t: f64,
    kernel: &TransitionKernel,
    sched: &NoiseSchedule,
    rng: &mut impl Rng,
) -> (TypedDigraph, f64) {
    let c = sched.cum_rate_unchecked(s, t);
    noise_with_cum_rate(g, c, kernel.alphabet, rng)
}

pub(crate) fn noise_with_cum_rate(
    g: &TypedDigraph,
    c: f64,
    alphabet: Alphabet,
    rng: &mut impl Rng,
) -> (TypedDigraph, f64) {
    let (a, b) = (alphabet.node_classes, alphabet.edge_classes);
    let (xd, xo) = forward_entries(a, c);
    let (ed, eo) = forward_entries(b, c);
    let (lxd, lxo) = (xd.max(EPS).ln(), xo.max(EPS).ln());
    let (led, leo) = (ed.max(EPS).ln(), eo.max(EPS).ln());
    let n = g.num_nodes();
    let mut log_f = 0.0;
    let mut nodes = Vec::with_capacity(n);
    for &x in g.node_types() {
        let y = sample_component(rng, x as usize, a, xd, xo);
        log_f += if y == x as usize { lxd } else { lxo };
        nodes.push(y as Class);
    }
    let mut edges = g.edge_matrix().to_vec();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let x = edges[i * n + j] as usize;
            let y = sample_component(rng, x, b, ed, eo);
            log_f += if y == x { led } else { leo };
            edges[i * n + j] = y as Class;
        }
    }
    (TypedDigraph::from_parts_unchecked(alphabet, nodes, edges), log_f)
}
