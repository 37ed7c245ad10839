use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use motifdiff::dataset::{
    compute_marginals, load_graph_set, save_graph_set, synth_generate, GraphSet, PlantedMotif, SynthSpec,
};
use motifdiff::denoiser::{load_checkpoint, save_checkpoint, train as train_denoiser, Denoiser};
use motifdiff::diffusion::{DigressSchedule, Estimator, NoiseProcess};
use motifdiff::eval::{median, rank_eval, verified_count, write_rank_csv, write_topn_csv, TopNReport};
use motifdiff::graph::{pattern_key, PatternTable};
use motifdiff::sampling::{enumerate_k_subgraphs, sample as run_sampler, SampleConfig, SampleStats};
use motifdiff::search::{beam_search, write_beam, BeamConfig};
use motifdiff::{rng, Alphabet, Error, TypedDigraph};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::fail::{CliError, CliResult};
use crate::{EvaluateArgs, SampleArgs, ScoreArgs, SearchArgs, SynthArgs, TrainArgs};

const MOTIF_STREAM: u64 = 0x6d6f_7469_66;
const SCORE_STREAM: u64 = 0x5c0e;

fn log(start: Instant, msg: impl std::fmt::Display) {
    eprintln!("[{:>8.2}s] {msg}", start.elapsed().as_secs_f64());
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn echo_config(cfg: &RunConfig, out: &Path, command: &str) -> CliResult<()> {
    write_text(&out.join(format!("{command}.config.toml")), &cfg.to_toml())
}

fn dataset_path(flag: &Option<PathBuf>, cfg: &mut RunConfig) -> CliResult<PathBuf> {
    if let Some(p) = flag {
        cfg.dataset = Some(p.clone());
    }
    cfg.dataset
        .clone()
        .ok_or_else(|| CliError::usage("no dataset given: pass --dataset or set `dataset` in the config"))
}

/// Maps `f` over `items` on up to `threads` scoped workers, keeping order.
fn par_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(usize, &T) -> U + Sync) -> Vec<U> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let workers: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                s.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(j, x)| f(c * chunk + j, x))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        workers
            .into_iter()
            .flat_map(|w| w.join().expect("worker panicked"))
            .collect()
    })
}

fn random_motif(alphabet: Alphabet, size: usize, rng: &mut rng::Rng) -> CliResult<TypedDigraph> {
    let types = (0..size)
        .map(|_| rng.random_range(0..alphabet.node_classes) as u16)
        .collect();
    let mut g = TypedDigraph::new(alphabet, types)?;
    let class = |rng: &mut rng::Rng| rng.random_range(1..alphabet.edge_classes) as u16;
    for v in 1..size {
        let parent = rng.random_range(0..v);
        let c = class(rng);
        g.set_edge(parent, v, c)?;
        for u in 0..v {
            if u != parent && rng.random::<f64>() < 0.3 {
                let c = class(rng);
                g.set_edge(u, v, c)?;
            }
        }
    }
    Ok(g)
}

pub fn synth(mut cfg: RunConfig, args: &SynthArgs, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    if let Some(n) = args.num_graphs {
        cfg.synth.num_graphs = n;
    }
    echo_config(&cfg, out, "synth")?;
    let s = &cfg.synth;
    let alphabet = Alphabet::new(s.node_classes, s.edge_classes)?;
    let motifs: Vec<TypedDigraph> = match &s.motif_file {
        Some(path) => {
            let set = load_graph_set(path)?;
            if set.alphabet() != alphabet {
                return Err(CliError::usage(format!(
                    "{}: motif alphabet differs from synth.node_classes/edge_classes",
                    path.display()
                )));
            }
            set.graphs().to_vec()
        }
        None => (0..s.random_motifs)
            .map(|m| {
                let mut r = rng::stream(rng::derive(cfg.seed, MOTIF_STREAM), m as u64);
                random_motif(alphabet, s.motif_size, &mut r)
            })
            .collect::<CliResult<_>>()?,
    };
    let spec = SynthSpec {
        num_graphs: s.num_graphs,
        nodes_per_graph: (s.min_nodes, s.max_nodes),
        motifs: motifs
            .iter()
            .map(|m| PlantedMotif {
                motif: m.clone(),
                rate: s.motif_rate,
            })
            .collect(),
        edge_density: s.edge_density,
        alphabet,
        node_class_weights: s.node_class_weights.clone(),
        seed: cfg.seed,
    };
    let set = synth_generate(&spec)?;
    save_graph_set(&set, out.join("dataset.jsonl"))?;
    save_graph_set(&GraphSet::from_graphs("motifs", alphabet, motifs)?, out.join("motifs.jsonl"))?;
    log(start, format!("wrote {} graphs to {}", set.len(), out.join("dataset.jsonl").display()));
    Ok(())
}

/// Sidecar written next to every sample dump.
#[derive(Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: PathBuf,
    pub config: SampleConfig,
    pub stats: SampleStats,
    pub distinct: bool,
    /// `(graph index, sorted node ids)` per dumped graph, unless distinct.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<Vec<(usize, Vec<usize>)>>,
    /// Per dumped graph: its inverse inclusion probability, or with
    /// `distinct` the class total.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

pub fn provenance_path(samples: &Path) -> PathBuf {
    samples.with_extension("provenance.json")
}

pub fn sample(mut cfg: RunConfig, args: &SampleArgs, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let dataset = dataset_path(&args.dataset, &mut cfg)?;
    if let Some(m) = &args.method {
        cfg.sample.method = m.clone();
    }
    if let Some(k) = args.k {
        cfg.sample.k = k;
    }
    if let Some(tc) = args.tc {
        cfg.sample.tc = tc;
    }
    let sc = cfg.sample.to_config(cfg.seed)?;
    echo_config(&cfg, out, "sample")?;
    let set = load_graph_set(&dataset)?;
    let result = run_sampler(set.graphs(), &sc)?;
    log(start, format!("{} drew {} instances", sc.method, result.instances.len()));

    let subgraphs = result.subgraphs(set.graphs());
    let mut dump = GraphSet::with_class_names(
        "samples",
        set.alphabet(),
        set.node_class_names().to_vec(),
        set.edge_class_names().to_vec(),
    )?;
    let provenance = if args.distinct {
        let mut table: PatternTable<f64> = PatternTable::new();
        let weights = result.weights.clone().unwrap_or_else(|| vec![1.0; subgraphs.len()]);
        for (g, w) in subgraphs.into_iter().zip(weights) {
            *table.entry_or_insert_with(g, || 0.0).1 += w;
        }
        let mut totals = Vec::with_capacity(table.len());
        for (i, (_, p, &w)) in table.iter().enumerate() {
            dump.push(format!("c{i}-{}", p.key()), p.graph().clone())?;
            totals.push(w);
        }
        Provenance {
            dataset,
            config: sc,
            stats: result.stats,
            distinct: true,
            instances: None,
            weights: Some(totals),
        }
    } else {
        for (inst, g) in result.instances.iter().zip(subgraphs) {
            let nodes: Vec<String> = inst.nodes.iter().map(|v| v.to_string()).collect();
            dump.push(format!("{}/{}", set.id(inst.graph_id), nodes.join("-")), g)?;
        }
        Provenance {
            dataset,
            config: sc,
            stats: result.stats,
            distinct: false,
            instances: Some(result.instances.iter().map(|i| (i.graph_id, i.nodes.clone())).collect()),
            weights: result.weights,
        }
    };
    let path = out.join("samples.jsonl");
    save_graph_set(&dump, &path)?;
    write_json(&provenance_path(&path), &provenance)?;
    log(start, format!("wrote {} graphs to {}", dump.len(), path.display()));
    Ok(())
}

fn process_for(cfg: &RunConfig, alphabet: Alphabet, graphs: &[TypedDigraph]) -> CliResult<NoiseProcess> {
    Ok(match cfg.estimator {
        Estimator::Disco => {
            cfg.schedule.validate()?;
            NoiseProcess::disco(alphabet, cfg.schedule)
        }
        Estimator::Digress => NoiseProcess::Digress {
            schedule: DigressSchedule::new(cfg.digress.steps, compute_marginals(graphs)?)?,
        },
    })
}

fn process_path(model: &Path) -> PathBuf {
    model.with_extension("process.json")
}

pub fn train(mut cfg: RunConfig, args: &TrainArgs, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    cfg.train.seed = cfg.seed;
    echo_config(&cfg, out, "train")?;
    let set = load_graph_set(&args.samples)?;
    let k = match set.graphs().first() {
        Some(g) => g.num_nodes(),
        None => return Err(CliError::usage(format!("{}: no samples", args.samples.display()))),
    };
    if set.graphs().iter().any(|g| g.num_nodes() != k) {
        return Err(CliError::usage("training samples must all have the same size"));
    }
    let dc = cfg.denoiser.to_config(set.alphabet(), cfg.seed)?;
    let process = process_for(&cfg, set.alphabet(), set.graphs())?;
    let trained = train_denoiser(set.graphs(), &dc, &cfg.train, &process)?;
    let name = args.name.clone().unwrap_or_else(|| format!("model-k{k}"));
    let ckpt = out.join(format!("{name}.ckpt"));
    save_checkpoint(&trained.denoiser, &ckpt)?;
    write_json(&process_path(&ckpt), &process)?;
    let losses = out.join(format!("{name}.losses.csv"));
    let mut w = csv::Writer::from_writer(create(&losses)?);
    let csv_err = |e: csv::Error| CliError::usage(format!("{}: {e}", losses.display()));
    w.write_record(["epoch", "loss"]).map_err(csv_err)?;
    for (e, l) in trained.losses.iter().enumerate() {
        w.write_record([e.to_string(), l.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(&losses, e))?;
    log(
        start,
        format!(
            "trained on {} samples of size {k}; loss {:.4} -> {:.4}; wrote {}",
            set.len(),
            trained.losses.first().copied().unwrap_or(f64::NAN),
            trained.losses.last().copied().unwrap_or(f64::NAN),
            ckpt.display()
        ),
    );
    Ok(())
}

fn load_model(path: &Path) -> CliResult<(Denoiser, NoiseProcess)> {
    let d = load_checkpoint(path)?;
    let p: NoiseProcess = read_json(&process_path(path))?;
    Ok((d, p))
}

fn check_alphabet(model: &Denoiser, alphabet: Alphabet, what: &Path) -> CliResult<()> {
    if model.config.alphabet != alphabet {
        return Err(CliError::usage(format!(
            "{}: alphabet {:?} differs from the model's {:?}",
            what.display(),
            alphabet,
            model.config.alphabet
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub key: String,
    pub nodes: usize,
    pub log_prob: f64,
    pub probability: f64,
    pub aborted: usize,
}

pub fn score(mut cfg: RunConfig, args: &ScoreArgs, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    if let Some(m) = args.trials {
        cfg.score.trials = m;
    }
    echo_config(&cfg, out, "score")?;
    let (model, process) = load_model(&args.model)?;
    let set = load_graph_set(&args.graphs)?;
    check_alphabet(&model, set.alphabet(), &args.graphs)?;
    let base = rng::derive(cfg.seed, SCORE_STREAM);
    let trials = cfg.score.trials;
    let estimates = par_map(set.graphs(), cfg.threads(), |i, g| {
        let mut r = rng::stream(base, i as u64);
        process.log_prob(g, &model, trials, &mut r).map_err(|e| match e {
            Error::NumericalInstability { aborted, trials, .. } => Error::NumericalInstability {
                aborted,
                trials,
                pattern: Some(pattern_key(g)),
            },
            e => e,
        })
    });
    let path = out.join("scores.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    for (i, est) in estimates.into_iter().enumerate() {
        let est = est?;
        let g = set.graph(i);
        w.serialize(ScoreRow {
            id: set.id(i).to_string(),
            key: pattern_key(g).to_string(),
            nodes: g.num_nodes(),
            log_prob: est.mean_log_prob,
            probability: est.probability(),
            aborted: est.aborted,
        })
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    log(start, format!("scored {} graphs into {}", set.len(), path.display()));
    Ok(())
}

#[derive(Debug, Serialize)]
struct SearchSummary {
    k: usize,
    truncated: bool,
    beam_len: usize,
    verified: usize,
    timeouts: usize,
    mean: Option<f64>,
    median: Option<f64>,
    cutoff_secs: f64,
}

pub fn search(mut cfg: RunConfig, args: &SearchArgs, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let dataset = dataset_path(&args.dataset, &mut cfg)?;
    if let Some(k) = args.k_max {
        cfg.search.k_max = k;
    }
    if let Some(w) = args.width {
        cfg.search.width = w;
    }
    if let Some(m) = args.trials {
        cfg.search.trials = m;
    }
    echo_config(&cfg, out, "search")?;
    let s = &cfg.search;
    let mut bc = BeamConfig::new(s.k_max, s.width);
    bc.trials = s.trials;
    bc.instance_cap = s.instance_cap;
    bc.seed = cfg.seed;
    if let Some(allowed) = s.allowed_node_classes.clone() {
        bc = bc.with_constraint(move |g| g.node_types().iter().all(|&c| allowed.contains(&(c as usize))));
    }
    bc.validate()?;
    if !(s.cutoff_secs >= 0.0) {
        return Err(CliError::usage("search.cutoff_secs must be nonnegative"));
    }

    let set = load_graph_set(&dataset)?;
    let mut models = BTreeMap::new();
    let mut process = None;
    for k in 4..=s.k_max {
        let path = args.models.join(format!("model-k{k}.ckpt"));
        let (m, p) = load_model(&path)?;
        check_alphabet(&m, set.alphabet(), &dataset)?;
        models.insert(k, m);
        process = Some(p);
    }
    let process = process.expect("k_max >= 4");
    let outcome = beam_search(set.graphs(), &bc, &models, &process)?;
    log(
        start,
        format!(
            "search reached k = {} with {} patterns{}",
            outcome.beam.k,
            outcome.beam.len(),
            if outcome.truncated { " (truncated)" } else { "" }
        ),
    );
    write_beam(&outcome.beam, create(&out.join("beam.jsonl"))?).map_err(|e| CliError::io(out, e))?;
    let mut all = create(&out.join("levels.jsonl"))?;
    for level in &outcome.levels {
        write_beam(level, &mut all).map_err(|e| CliError::io(out, e))?;
    }
    all.flush().map_err(|e| CliError::io(out, e))?;

    let cutoff = Duration::from_secs_f64(s.cutoff_secs);
    let top: Vec<&TypedDigraph> = outcome.beam.patterns().take(s.verify_top).map(|p| p.graph()).collect();
    let counts = par_map(&top, cfg.threads(), |_, p| verified_count(p, set.graphs(), Some(cutoff)));
    let exact: Vec<f64> = counts.iter().filter_map(|c| c.exact()).map(|c| c as f64).collect();
    let report = TopNReport {
        keys: top.iter().map(|p| pattern_key(p)).collect(),
        mean: (!exact.is_empty()).then(|| exact.iter().sum::<f64>() / exact.len() as f64),
        median: median(&exact),
        counts,
        cutoff: Some(cutoff),
    };
    let path = out.join("topn.csv");
    write_topn_csv(&report, create(&path)?)?;
    write_json(
        &out.join("search.json"),
        &SearchSummary {
            k: outcome.beam.k,
            truncated: outcome.truncated,
            beam_len: outcome.beam.len(),
            verified: report.counts.len(),
            timeouts: report.timeouts(),
            mean: report.mean,
            median: report.median,
            cutoff_secs: s.cutoff_secs,
        },
    )?;
    log(
        start,
        format!("verified top {}: median count {:?}, {} timeouts", report.counts.len(), report.median, report.timeouts()),
    );
    Ok(())
}

fn method_from_samples(path: &Path, k: usize) -> CliResult<(Alphabet, PatternTable<f64>)> {
    let set = load_graph_set(path)?;
    let prov = provenance_path(path);
    let weights = if prov.exists() {
        read_json::<Provenance>(&prov)?.weights
    } else {
        None
    };
    let weights = weights.unwrap_or_else(|| vec![1.0; set.len()]);
    if weights.len() != set.len() {
        return Err(CliError::usage(format!("{}: weight count differs from the dump", prov.display())));
    }
    let mut table = PatternTable::new();
    for (g, w) in set.graphs().iter().zip(weights) {
        if g.num_nodes() != k {
            return Err(CliError::usage(format!(
                "{}: sample of size {} but evaluating k = {k}",
                path.display(),
                g.num_nodes()
            )));
        }
        *table.entry_or_insert_with(g.clone(), || 0.0).1 += w;
    }
    Ok((set.alphabet(), table))
}

fn method_from_scores(scores: &Path, graphs: &Path, k: usize) -> CliResult<(Alphabet, PatternTable<f64>)> {
    let set = load_graph_set(graphs)?;
    let by_id: BTreeMap<&str, &TypedDigraph> = set.iter().collect();
    let mut rdr = csv::Reader::from_path(scores).map_err(|e| CliError::usage(format!("{}: {e}", scores.display())))?;
    let mut table = PatternTable::new();
    for row in rdr.deserialize::<ScoreRow>() {
        let row = row.map_err(|e| CliError::usage(format!("{}: {e}", scores.display())))?;
        let g = by_id
            .get(row.id.as_str())
            .ok_or_else(|| CliError::usage(format!("score row {:?} has no graph in {}", row.id, graphs.display())))?;
        if g.num_nodes() != k {
            return Err(CliError::usage(format!(
                "{}: graph {:?} has {} nodes but evaluating k = {k}",
                graphs.display(),
                row.id,
                g.num_nodes()
            )));
        }
        *table.entry_or_insert_with((*g).clone(), || row.log_prob).1 = row.log_prob;
    }
    Ok((set.alphabet(), table))
}

pub fn evaluate(mut cfg: RunConfig, args: &EvaluateArgs, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let dataset = dataset_path(&args.dataset, &mut cfg)?;
    if let Some(k) = args.k {
        cfg.evaluate.k = k;
    }
    if let Some(m) = &args.missing {
        cfg.evaluate.missing = m.clone();
    }
    let policy = cfg.evaluate.policy()?;
    echo_config(&cfg, out, "evaluate")?;
    let k = cfg.evaluate.k;
    let (alphabet, method) = match (&args.samples, &args.scores, &args.graphs) {
        (Some(s), None, _) => method_from_samples(s, k)?,
        (None, Some(s), Some(g)) => method_from_scores(s, g, k)?,
        _ => return Err(CliError::usage("pass either --samples, or --scores with --graphs")),
    };
    let set = load_graph_set(&dataset)?;
    if set.alphabet() != alphabet {
        return Err(CliError::usage("method output and dataset use different alphabets"));
    }
    let truth = enumerate_k_subgraphs(set.graphs(), k).map(|_, c| c.count as f64);
    log(start, format!("exact census: {} classes of size {k}", truth.len()));
    let report = rank_eval(&truth, &method, policy)?;
    let path = out.join("rank.csv");
    write_rank_csv(&report, create(&path)?)?;
    log(
        start,
        format!(
            "spearman {:.4}, kendall {:.4}, {} classes, {} zero-filled{}",
            report.spearman_rho,
            report.kendall_tau,
            report.n_classes,
            report.zero_filled,
            if report.degenerate { ", degenerate" } else { "" }
        ),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order_for_any_thread_count() {
        let xs: Vec<u64> = (0..37).collect();
        let want: Vec<u64> = xs.iter().map(|x| x * x + 1).collect();
        for t in [1, 2, 3, 8, 64] {
            assert_eq!(par_map(&xs, t, |i, x| x * x + i as u64 + 1 - *x), want);
        }
        assert!(par_map(&Vec::<u8>::new(), 4, |_, x| *x).is_empty());
    }

    #[test]
    fn random_motifs_are_connected_dags() {
        let ab = Alphabet::new(3, 3).unwrap();
        for m in 0..20 {
            let g = random_motif(ab, 5, &mut rng::stream(1, m)).unwrap();
            assert!(g.is_connected());
            assert!(motifdiff::graph::topological_levels(&g).is_ok());
        }
    }
}
