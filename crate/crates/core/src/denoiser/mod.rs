//! The trainable posterior `p(G_0 | G_t)`.
//!
//! A small message-passing network over every ordered node pair: node states
//! start from class embeddings plus a topological-level embedding plus a
//! projected sinusoidal time feature, edge states from edge-class embeddings.
//! Each layer sends messages along incoming and outgoing pairs separately,
//! updates nodes residually, then refreshes edges from their endpoints.
//! Gradients come from a reverse-mode tape in [`tape`].

mod checkpoint;
mod model;
pub mod tape;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use model::{init_params, predict, predict_batch, Denoiser, DenoiserConfig, DenoiserParams};
pub use train::{grad, loss, loss_terms, train, LossTerms, TrainConfig, TrainExample, TrainOutput};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{NoiseProcess, NoiseSchedule};
    use crate::graph::{Alphabet, TypedDigraph};
    use crate::rng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn small_cfg(a: usize, b: usize) -> DenoiserConfig {
        let mut c = DenoiserConfig::new(Alphabet::new(a, b).unwrap());
        c.hidden = 8;
        c.layers = 2;
        c.time_dim = 4;
        c.max_level = 4;
        c
    }

    fn dag() -> TypedDigraph {
        TypedDigraph::from_edges(
            Alphabet::new(3, 3).unwrap(),
            vec![0, 2, 1, 1, 0],
            &[(0, 1, 1), (0, 2, 2), (1, 3, 1), (2, 3, 1), (3, 4, 2)],
        )
        .unwrap()
    }

    fn set(params: &mut DenoiserParams, name: &str, f: impl Fn(&mut ndarray::Array2<f64>)) {
        let i = params.names().iter().position(|n| n == name).unwrap();
        f(&mut params.arrays_mut()[i]);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = small_cfg(2, 2);
        let a = init_params(&cfg, &mut rng::stream(1, 0)).unwrap();
        let b = init_params(&cfg, &mut rng::stream(1, 0)).unwrap();
        let c = init_params(&cfg, &mut rng::stream(2, 0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.get("node_head").unwrap().ncols(), 2);
        assert_eq!(a.get("edge_head").unwrap().ncols(), 2);
    }

    #[test]
    fn rows_are_distributions_and_deterministic() {
        let mut cfg = small_cfg(3, 3);
        cfg.seed = 4;
        let d = Denoiser::init(cfg).unwrap();
        let g = dag();
        let p = predict(&d.params, &d.config, &g, 0.3);
        for row in p.node.rows().into_iter().chain(p.edge.rows()) {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        assert_eq!(p, predict(&d.params, &d.config, &g, 0.3));
    }

    #[test]
    fn permutation_equivariance() {
        let d = Denoiser::init(small_cfg(3, 3)).unwrap();
        let g = dag();
        let base = predict(&d.params, &d.config, &g, 0.6);
        let n = g.num_nodes();
        let mut r = rng::stream(9, 0);
        for _ in 0..20 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut r);
            let h = g.permuted(&perm).unwrap();
            let p = predict(&d.params, &d.config, &h, 0.6);
            for i in 0..n {
                for (x, y) in base.node_probs(i).iter().zip(p.node_probs(perm[i])) {
                    assert!((x - y).abs() < 1e-12);
                }
                for j in 0..n {
                    for (x, y) in base.edge_probs(i, j).iter().zip(p.edge_probs(perm[i], perm[j])) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }

    fn two_node_example() -> TrainExample {
        let ab = Alphabet::new(2, 2).unwrap();
        let clean = TypedDigraph::from_edges(ab, vec![0, 0], &[(0, 1, 1)]).unwrap();
        TrainExample {
            noisy: clean.clone(),
            clean,
            t: 0.5,
        }
    }

    #[test]
    fn uniform_output_costs_ln2_per_slot() {
        let cfg = small_cfg(2, 2);
        let mut p = init_params(&cfg, &mut rng::stream(0, 0)).unwrap();
        for name in ["node_head", "edge_head"] {
            set(&mut p, name, |a| a.fill(0.0));
        }
        let terms = loss_terms(&p, &cfg, &[two_node_example()]).unwrap();
        let ln2 = 2f64.ln();
        assert!((terms.node - 2.0 * ln2).abs() < 1e-12);
        assert!((terms.edge - 2.0 * ln2).abs() < 1e-12);
        assert!((terms.total - (2.0 * ln2 + cfg.lambda * 2.0 * ln2)).abs() < 1e-12);
    }

    fn fitted(cfg: &DenoiserConfig) -> DenoiserParams {
        // all-zero targets except the one present edge, matched by the heads
        let mut p = init_params(cfg, &mut rng::stream(0, 0)).unwrap();
        set(&mut p, "node_head", |a| a.fill(0.0));
        set(&mut p, "node_head_bias", |a| a[[0, 0]] = 1e3);
        set(&mut p, "edge_head", |a| a.fill(0.0));
        set(&mut p, "edge_head_bias", |a| a[[0, 0]] = 1e3);
        p
    }

    #[test]
    fn one_hot_fit_has_zero_loss_and_gradient() {
        let cfg = small_cfg(2, 2);
        let p = fitted(&cfg);
        let ab = Alphabet::new(2, 2).unwrap();
        let g = TypedDigraph::new(ab, vec![0, 0, 0]).unwrap();
        let ex = TrainExample {
            clean: g.clone(),
            noisy: g,
            t: 0.2,
        };
        let (l, gr) = grad(&p, &cfg, &[ex]).unwrap();
        assert!(l.abs() < 1e-12);
        assert!(gr.norm() < 1e-9);
    }

    #[test]
    fn zero_lambda_ignores_edge_head() {
        let mut cfg = small_cfg(2, 2);
        cfg.lambda = 0.0;
        let p = init_params(&cfg, &mut rng::stream(3, 0)).unwrap();
        let mut q = p.clone();
        set(&mut q, "edge_head", |a| a.mapv_inplace(|x| x * 7.0 - 1.0));
        let ex = [two_node_example()];
        assert_eq!(loss(&p, &cfg, &ex).unwrap(), loss(&q, &cfg, &ex).unwrap());
    }

    #[test]
    fn lambda_scales_edge_head_gradient() {
        let mut cfg = small_cfg(2, 2);
        let p = init_params(&cfg, &mut rng::stream(3, 0)).unwrap();
        let ex = [two_node_example()];
        let g1 = grad(&p, &cfg, &ex).unwrap().1;
        cfg.lambda *= 2.0;
        let g2 = grad(&p, &cfg, &ex).unwrap().1;
        for name in ["edge_head", "edge_head_bias"] {
            let (a, b) = (g1.get(name).unwrap(), g2.get(name).unwrap());
            assert!((b - &(a * 2.0)).iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = small_cfg(3, 3);
        let p = init_params(&cfg, &mut rng::stream(5, 0)).unwrap();
        let g = dag();
        let process = NoiseProcess::disco(cfg.alphabet, NoiseSchedule::default());
        let mut r = rng::stream(6, 0);
        let (noisy, t) = process.noise(&g, &mut r);
        let ex = [TrainExample { clean: g, noisy, t }];
        let (_, an) = grad(&p, &cfg, &ex).unwrap();
        let h = 1e-4;
        for _ in 0..10 {
            let ai = r.random_range(0..p.len());
            let shape = p.arrays()[ai].dim();
            let ij = (r.random_range(0..shape.0), r.random_range(0..shape.1));
            let mut plus = p.clone();
            plus.arrays_mut()[ai][ij] += h;
            let mut minus = p.clone();
            minus.arrays_mut()[ai][ij] -= h;
            let fd = (loss(&plus, &cfg, &ex).unwrap() - loss(&minus, &cfg, &ex).unwrap()) / (2.0 * h);
            let a = an.arrays()[ai][ij];
            let rel = (fd - a).abs() / fd.abs().max(a.abs()).max(1e-6);
            assert!(rel < 1e-4, "{} {ij:?}: fd {fd} vs {a}", p.names()[ai]);
        }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let cfg = small_cfg(3, 3);
        let tc = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let process = NoiseProcess::disco(cfg.alphabet, NoiseSchedule::default());
        let out = train(&[dag()], &cfg, &tc, &process).unwrap();
        assert_eq!(out.denoiser.params, Denoiser::init(cfg).unwrap().params);
        assert!(out.losses.is_empty());
    }

    fn fast_train() -> TrainConfig {
        TrainConfig {
            epochs: 200,
            batch_size: 8,
            lr: 1e-2,
            seed: 2,
            ..Default::default()
        }
    }

    #[test]
    fn memorizes_a_single_graph() {
        // A lone node is the one shape an equivariant network can pin down
        // at every noise level, so its loss can approach zero.
        let cfg = small_cfg(3, 3);
        let process = NoiseProcess::disco(cfg.alphabet, NoiseSchedule::default());
        let g = TypedDigraph::new(cfg.alphabet, vec![2]).unwrap();
        let data = vec![g; 16];
        let out = train(&data, &cfg, &fast_train(), &process).unwrap();
        let (first, last) = (out.losses[0], *out.losses.last().unwrap());
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn repeated_dag_loss_drops_and_is_reproducible() {
        // Heavily noised copies leave the nodes interchangeable, which puts
        // a floor well above zero under the loss; ask only for a clear drop.
        let cfg = DenoiserConfig::new(Alphabet::new(3, 3).unwrap());
        let process = NoiseProcess::disco(cfg.alphabet, NoiseSchedule::default());
        let data = vec![dag(); 64];
        let out = train(&data, &cfg, &fast_train(), &process).unwrap();
        let (first, last) = (out.losses[0], *out.losses.last().unwrap());
        assert!(last < 0.3 * first, "{first} -> {last}");
        let again = train(&data, &cfg, &fast_train(), &process).unwrap();
        assert_eq!(again.denoiser.params, out.denoiser.params);
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let d = Denoiser::init(small_cfg(2, 3)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&d, &mut buf).unwrap();
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), d);

        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint(&extra[..]).is_err());
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut bad_version = buf.clone();
        bad_version[8] = 9;
        assert!(read_checkpoint(&bad_version[..]).is_err());

        // a config that declares a different width than the stored arrays
        let mut other = d.clone();
        other.config.hidden = 9;
        let mut buf2 = Vec::new();
        write_checkpoint(&other, &mut buf2).unwrap();
        assert!(read_checkpoint(&buf2[..]).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&d, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), d);
    }
}
