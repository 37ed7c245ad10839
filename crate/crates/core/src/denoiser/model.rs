use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{softmax_rows, Tape, Var};
use crate::diffusion::{GraphPosterior, Posterior};
use crate::error::{Error, Result};
use crate::graph::{levels_lenient, Alphabet, TypedDigraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub alphabet: Alphabet,
    pub hidden: usize,
    pub layers: usize,
    /// Width of the sinusoidal time features; must be even.
    pub time_dim: usize,
    /// Levels above this share the last positional row.
    pub max_level: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl DenoiserConfig {
    pub fn new(alphabet: Alphabet) -> Self {
        Self {
            alphabet,
            hidden: 32,
            layers: 3,
            time_dim: 16,
            max_level: 16,
            lambda: 5.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.layers == 0 {
            return Err(Error::invalid("hidden width and layer count must be positive"));
        }
        if self.time_dim == 0 || self.time_dim % 2 == 1 {
            return Err(Error::invalid("time_dim must be a positive even number"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Name and shape of every parameter array, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, (usize, usize))> {
        let (a, b, h) = (self.alphabet.node_classes, self.alphabet.edge_classes, self.hidden);
        let mut v = vec![
            ("node_embed".to_string(), (a, h)),
            ("edge_embed".to_string(), (b, h)),
            ("level_embed".to_string(), (self.max_level + 1, h)),
            ("time_proj".to_string(), (self.time_dim, h)),
            ("time_bias".to_string(), (1, h)),
        ];
        for l in 0..self.layers {
            for (name, rows) in [
                ("in_node", h),
                ("in_edge", h),
                ("in_bias", 1),
                ("out_node", h),
                ("out_edge", h),
                ("out_bias", 1),
                ("upd_self", h),
                ("upd_in", h),
                ("upd_out", h),
                ("upd_bias", 1),
                ("edge_self", h),
                ("edge_src", h),
                ("edge_dst", h),
                ("edge_bias", 1),
            ] {
                v.push((format!("layer{l}.{name}"), (rows, h)));
            }
        }
        v.push(("node_head".to_string(), (h, a)));
        v.push(("node_head_bias".to_string(), (1, a)));
        v.push(("edge_head".to_string(), (h, b)));
        v.push(("edge_head_bias".to_string(), (1, b)));
        v
    }
}

/// Named dense parameter arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    names: Vec<String>,
    arrays: Vec<Array2<f64>>,
}

impl DenoiserParams {
    pub(crate) fn from_parts(names: Vec<String>, arrays: Vec<Array2<f64>>) -> Self {
        debug_assert_eq!(names.len(), arrays.len());
        Self { names, arrays }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            names: other.names.clone(),
            arrays: other.arrays.iter().map(|a| Array2::zeros(a.raw_dim())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn arrays(&self) -> &[Array2<f64>] {
        &self.arrays
    }

    pub fn arrays_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.arrays
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.names.iter().position(|n| n == name).map(|i| &self.arrays[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(&self.arrays)
    }

    pub fn num_scalars(&self) -> usize {
        self.arrays.iter().map(|a| a.len()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.arrays.iter().flat_map(|a| a.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Uniform initialization with variance `1/fan_in`; biases start at zero.
pub fn init_params(cfg: &DenoiserConfig, rng: &mut impl Rng) -> Result<DenoiserParams> {
    cfg.validate()?;
    let mut names = Vec::new();
    let mut arrays = Vec::new();
    for (name, (r, c)) in cfg.param_shapes() {
        let arr = if name.ends_with("bias") {
            Array2::zeros((r, c))
        } else {
            // embeddings are lookups, so their scale is set by width instead
            let fan_in = if name.ends_with("embed") { c } else { r } as f64;
            let bound = (3.0 / fan_in).sqrt();
            Array2::from_shape_simple_fn((r, c), || rng.random_range(-bound..bound))
        };
        names.push(name);
        arrays.push(arr);
    }
    Ok(DenoiserParams { names, arrays })
}

/// A batch of graphs flattened into one disjoint union.
pub(crate) struct Batch {
    pub node_class: Vec<usize>,
    pub edge_class: Vec<usize>,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub levels: Vec<usize>,
    pub time: Array2<f64>,
    /// `(first node row, node count, first edge row)` per graph.
    pub spans: Vec<(usize, usize, usize)>,
}

fn time_features(t: f64, dim: usize, out: &mut [f64]) {
    let half = dim / 2;
    for j in 0..half {
        let freq = (100f64.ln() * j as f64 / half.max(1) as f64).exp();
        out[2 * j] = (t * freq).sin();
        out[2 * j + 1] = (t * freq).cos();
    }
}

impl Batch {
    pub fn new(graphs: &[&TypedDigraph], times: &[f64], cfg: &DenoiserConfig) -> Self {
        let total_nodes: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let total_edges: usize = graphs.iter().map(|g| g.num_nodes() * g.num_nodes().saturating_sub(1)).sum();
        let mut b = Batch {
            node_class: Vec::with_capacity(total_nodes),
            edge_class: Vec::with_capacity(total_edges),
            src: Vec::with_capacity(total_edges),
            dst: Vec::with_capacity(total_edges),
            levels: Vec::with_capacity(total_nodes),
            time: Array2::zeros((total_nodes, cfg.time_dim)),
            spans: Vec::with_capacity(graphs.len()),
        };
        let mut feat = vec![0.0; cfg.time_dim];
        for (g, &t) in graphs.iter().zip(times) {
            let off = b.node_class.len();
            let n = g.num_nodes();
            b.spans.push((off, n, b.edge_class.len()));
            time_features(t, cfg.time_dim, &mut feat);
            for v in 0..n {
                b.node_class.push(g.node_type(v) as usize);
                b.time
                    .row_mut(off + v)
                    .as_slice_mut()
                    .unwrap()
                    .copy_from_slice(&feat);
            }
            b.levels
                .extend(levels_lenient(g).into_iter().map(|l| l.min(cfg.max_level)));
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        b.edge_class.push(g.edge(i, j) as usize);
                        b.src.push(off + i);
                        b.dst.push(off + j);
                    }
                }
            }
        }
        b
    }

    pub fn num_nodes(&self) -> usize {
        self.node_class.len()
    }
}

/// Records the network on `tape` and returns `(node logits, edge logits)`.
pub(crate) fn forward(tape: &mut Tape, params: &DenoiserParams, batch: &Batch) -> (Var, Var, Vec<Var>) {
    let vars: Vec<Var> = params
        .arrays
        .iter()
        .enumerate()
        .map(|(i, a)| tape.param(a.clone(), i))
        .collect();
    let p = |name: &str| vars[params.names.iter().position(|n| n == name).expect("known parameter")];
    let n = batch.num_nodes();

    let x = tape.gather(p("node_embed"), batch.node_class.clone());
    let lv = tape.gather(p("level_embed"), batch.levels.clone());
    let time = tape.constant(batch.time.clone());
    let tp = tape.matmul(time, p("time_proj"));
    let tp = tape.add_row(tp, p("time_bias"));
    let mut h = tape.add(x, lv);
    h = tape.add(h, tp);
    let mut e = tape.gather(p("edge_embed"), batch.edge_class.clone());

    let layers = params.names.iter().filter(|s| s.ends_with(".in_node")).count();
    for l in 0..layers {
        let q = |s: &str| p(&format!("layer{l}.{s}"));
        // incoming: message from src to dst over each ordered pair
        let hn = tape.matmul(h, q("in_node"));
        let hs = tape.gather(hn, batch.src.clone());
        let en = tape.matmul(e, q("in_edge"));
        let m_in = tape.add(hs, en);
        let m_in = tape.add_row(m_in, q("in_bias"));
        let m_in = tape.silu(m_in);
        let agg_in = tape.scatter_mean(m_in, batch.dst.clone(), n);
        // outgoing: message from dst back to src
        let hn = tape.matmul(h, q("out_node"));
        let hd = tape.gather(hn, batch.dst.clone());
        let en = tape.matmul(e, q("out_edge"));
        let m_out = tape.add(hd, en);
        let m_out = tape.add_row(m_out, q("out_bias"));
        let m_out = tape.silu(m_out);
        let agg_out = tape.scatter_mean(m_out, batch.src.clone(), n);

        let u = tape.matmul(h, q("upd_self"));
        let ui = tape.matmul(agg_in, q("upd_in"));
        let uo = tape.matmul(agg_out, q("upd_out"));
        let u = tape.add(u, ui);
        let u = tape.add(u, uo);
        let u = tape.add_row(u, q("upd_bias"));
        let u = tape.silu(u);
        h = tape.add(h, u);

        let es = tape.matmul(e, q("edge_self"));
        let hs = tape.matmul(h, q("edge_src"));
        let hs = tape.gather(hs, batch.src.clone());
        let hd = tape.matmul(h, q("edge_dst"));
        let hd = tape.gather(hd, batch.dst.clone());
        let ue = tape.add(es, hs);
        let ue = tape.add(ue, hd);
        let ue = tape.add_row(ue, q("edge_bias"));
        let ue = tape.silu(ue);
        e = tape.add(e, ue);
    }

    let nl = tape.matmul(h, p("node_head"));
    let nl = tape.add_row(nl, p("node_head_bias"));
    let el = tape.matmul(e, p("edge_head"));
    let el = tape.add_row(el, p("edge_head_bias"));
    (nl, el, vars)
}

/// A configured network with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub config: DenoiserConfig,
    pub params: DenoiserParams,
}

impl Denoiser {
    pub fn new(config: DenoiserConfig, params: DenoiserParams) -> Result<Self> {
        config.validate()?;
        check_shapes(&config, &params)?;
        Ok(Self { config, params })
    }

    pub fn init(config: DenoiserConfig) -> Result<Self> {
        let params = init_params(&config, &mut crate::rng::stream(config.seed, 0))?;
        Ok(Self { config, params })
    }
}

pub(crate) fn check_shapes(cfg: &DenoiserConfig, params: &DenoiserParams) -> Result<()> {
    let shapes = cfg.param_shapes();
    if shapes.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter arrays, found {}",
            shapes.len(),
            params.len()
        )));
    }
    for ((name, (r, c)), (pn, arr)) in shapes.iter().zip(params.iter()) {
        if name != pn || arr.dim() != (*r, *c) {
            return Err(Error::Checkpoint(format!(
                "parameter {pn} has shape {:?}, config expects {name} with ({r}, {c})",
                arr.dim()
            )));
        }
    }
    Ok(())
}

/// Softmax posteriors for every graph in `graphs`, all at time `t`.
pub fn predict_batch(params: &DenoiserParams, cfg: &DenoiserConfig, graphs: &[TypedDigraph], t: f64) -> Vec<GraphPosterior> {
    let refs: Vec<&TypedDigraph> = graphs.iter().collect();
    let batch = Batch::new(&refs, &vec![t; graphs.len()], cfg);
    let mut tape = Tape::new();
    let (nl, el, _) = forward(&mut tape, params, &batch);
    let node = softmax_rows(tape.value(nl));
    let edge = softmax_rows(tape.value(el));
    let b = cfg.alphabet.edge_classes;
    batch
        .spans
        .iter()
        .map(|&(off, n, eoff)| {
            let node_post = node.slice(ndarray::s![off..off + n, ..]).to_owned();
            let mut edge_post = Array2::zeros((n * n, b));
            let mut r = eoff;
            for i in 0..n {
                edge_post[[i * n + i, 0]] = 1.0;
                for j in 0..n {
                    if i != j {
                        edge_post.row_mut(i * n + j).assign(&edge.row(r));
                        r += 1;
                    }
                }
            }
            GraphPosterior {
                node: node_post,
                edge: edge_post,
            }
        })
        .collect()
}

pub fn predict(params: &DenoiserParams, cfg: &DenoiserConfig, g: &TypedDigraph, t: f64) -> GraphPosterior {
    predict_batch(params, cfg, std::slice::from_ref(g), t).pop().expect("one graph in, one out")
}

impl Posterior for Denoiser {
    fn alphabet(&self) -> Alphabet {
        self.config.alphabet
    }

    fn predict(&self, g: &TypedDigraph, t: f64) -> GraphPosterior {
        predict(&self.params, &self.config, g, t)
    }

    fn predict_batch(&self, graphs: &[TypedDigraph], t: f64) -> Vec<GraphPosterior> {
        predict_batch(&self.params, &self.config, graphs, t)
    }
}
