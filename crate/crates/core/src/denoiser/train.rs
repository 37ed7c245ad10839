use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{forward, init_params, Batch, Denoiser, DenoiserConfig, DenoiserParams};
use super::tape::{Tape, Var};
use crate::diffusion::NoiseProcess;
use crate::error::{Error, Result};
use crate::graph::TypedDigraph;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::invalid("clip norm must be positive"));
        }
        Ok(())
    }
}

/// A clean graph, its noised copy and the normalized time of the noise.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub clean: TypedDigraph,
    pub noisy: TypedDigraph,
    pub t: f64,
}

/// The two halves of the objective, each averaged over the batch. The
/// training loss is `node + λ·edge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub node: f64,
    pub edge: f64,
    pub total: f64,
}

struct Recorded {
    tape: Tape,
    node: Var,
    edge: Var,
    total: Var,
}

fn record(params: &DenoiserParams, cfg: &DenoiserConfig, batch: &[TrainExample]) -> Result<Recorded> {
    if batch.is_empty() {
        return Err(Error::invalid("loss needs a nonempty batch"));
    }
    for ex in batch {
        if ex.clean.num_nodes() != ex.noisy.num_nodes() {
            return Err(Error::invalid("clean and noisy graphs differ in size"));
        }
    }
    let noisy: Vec<&TypedDigraph> = batch.iter().map(|e| &e.noisy).collect();
    let times: Vec<f64> = batch.iter().map(|e| e.t).collect();
    let b = Batch::new(&noisy, &times, cfg);
    let mut tape = Tape::new();
    let (nl, el, _) = forward(&mut tape, params, &b);

    let w = 1.0 / batch.len() as f64;
    let mut node_t = Vec::with_capacity(b.num_nodes());
    let mut edge_t = Vec::with_capacity(b.edge_class.len());
    for ex in batch {
        let g = &ex.clean;
        node_t.extend(g.node_types().iter().map(|&x| x as usize));
        let n = g.num_nodes();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    edge_t.push(g.edge(i, j) as usize);
                }
            }
        }
    }
    let (nn, ne) = (node_t.len(), edge_t.len());
    let node = tape.cross_entropy(nl, node_t, vec![w; nn]);
    let edge = tape.cross_entropy(el, edge_t, vec![w; ne]);
    let weighted = tape.scale(edge, cfg.lambda);
    let total = tape.sum(node, weighted);
    Ok(Recorded {
        tape,
        node,
        edge,
        total,
    })
}

pub fn loss_terms(params: &DenoiserParams, cfg: &DenoiserConfig, batch: &[TrainExample]) -> Result<LossTerms> {
    let r = record(params, cfg, batch)?;
    Ok(LossTerms {
        node: r.tape.value(r.node)[[0, 0]],
        edge: r.tape.value(r.edge)[[0, 0]],
        total: r.tape.value(r.total)[[0, 0]],
    })
}

pub fn loss(params: &DenoiserParams, cfg: &DenoiserConfig, batch: &[TrainExample]) -> Result<f64> {
    Ok(loss_terms(params, cfg, batch)?.total)
}

/// Loss and its gradient with respect to every parameter array.
pub fn grad(params: &DenoiserParams, cfg: &DenoiserConfig, batch: &[TrainExample]) -> Result<(f64, DenoiserParams)> {
    let r = record(params, cfg, batch)?;
    let raw = r.tape.backward(r.total, params.len());
    let mut out = DenoiserParams::zeros_like(params);
    for ((slot, g), name) in out.arrays_mut().iter_mut().zip(raw).zip(params.names()) {
        if let Some(g) = g {
            if !g.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
            *slot = g;
        }
    }
    Ok((r.tape.value(r.total)[[0, 0]], out))
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: i32,
}

impl Adam {
    fn new(params: &DenoiserParams) -> Self {
        let zeros = || params.arrays().iter().map(|a| Array2::zeros(a.raw_dim())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut DenoiserParams, grads: &DenoiserParams, tc: &TrainConfig) {
        self.step += 1;
        let norm = grads.norm();
        let clip = if norm > tc.clip_norm { tc.clip_norm / norm } else { 1.0 };
        let bc1 = 1.0 - tc.beta1.powi(self.step);
        let bc2 = 1.0 - tc.beta2.powi(self.step);
        for (i, p) in params.arrays_mut().iter_mut().enumerate() {
            let g = &grads.arrays()[i];
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                let g = g * clip;
                *m = tc.beta1 * *m + (1.0 - tc.beta1) * g;
                *v = tc.beta2 * *v + (1.0 - tc.beta2) * g * g;
                *p -= tc.lr * (*m / bc1) / ((*v / bc2).sqrt() + tc.eps);
            });
        }
    }
}

/// Trained network plus the mean training loss of each epoch.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub denoiser: Denoiser,
    pub losses: Vec<f64>,
}

/// Fits a fresh network to `samples`. Each epoch shuffles the samples and,
/// per batch, draws a noise time and a noised copy for every graph.
pub fn train(
    samples: &[TypedDigraph],
    cfg: &DenoiserConfig,
    tc: &TrainConfig,
    process: &NoiseProcess,
) -> Result<TrainOutput> {
    cfg.validate()?;
    tc.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if samples.iter().any(|g| g.alphabet() != cfg.alphabet) {
        return Err(Error::invalid("training graph alphabet differs from the config"));
    }
    let mut params = init_params(cfg, &mut rng::stream(cfg.seed, 0))?;
    let mut adam = Adam::new(&params);
    let mut rng = rng::stream(tc.seed, 1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(tc.batch_size) {
            let batch: Vec<TrainExample> = chunk
                .iter()
                .map(|&i| {
                    let (noisy, t) = process.noise(&samples[i], &mut rng);
                    TrainExample {
                        clean: samples[i].clone(),
                        noisy,
                        t,
                    }
                })
                .collect();
            let (l, g) = grad(&params, cfg, &batch)?;
            if !l.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam.update(&mut params, &g, tc);
            total += l;
            batches += 1;
        }
        losses.push(total / batches as f64);
    }
    Ok(TrainOutput {
        denoiser: Denoiser {
            config: *cfg,
            params,
        },
        losses,
    })
}
