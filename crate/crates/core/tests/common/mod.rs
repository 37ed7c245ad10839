//! Brute-force oracles and random graph builders shared by the integration
//! tests. Everything here is deliberately naive: permutations and subsets are
//! enumerated outright.

#![allow(dead_code)]

use motifdiff::graph::Class;
use motifdiff::{rng, Alphabet, TypedDigraph};
use proptest::prelude::*;
use rand::Rng;

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                go(cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// All `k`-subsets of `0..n`, each sorted.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            go(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Is there a bijection mapping `a` onto `b` that preserves every class?
pub fn brute_isomorphic(a: &TypedDigraph, b: &TypedDigraph) -> bool {
    let n = a.num_nodes();
    if n != b.num_nodes() || a.alphabet() != b.alphabet() {
        return false;
    }
    permutations(n).iter().any(|p| {
        (0..n).all(|i| a.node_type(i) == b.node_type(p[i]))
            && (0..n).all(|i| (0..n).all(|j| i == j || a.edge(i, j) == b.edge(p[i], p[j])))
    })
}

/// Node sets of `host` whose induced subgraph is isomorphic to `pattern`.
pub fn brute_occurrences(pattern: &TypedDigraph, host: &TypedDigraph) -> u64 {
    let k = pattern.num_nodes();
    if k > host.num_nodes() {
        return 0;
    }
    subsets(host.num_nodes(), k)
        .iter()
        .filter(|s| brute_isomorphic(pattern, &host.induced_subgraph(s).unwrap()))
        .count() as u64
}

/// Every connected induced `k`-subgraph of every graph as `(graph, nodes)`.
pub fn brute_connected(graphs: &[TypedDigraph], k: usize) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for (gi, g) in graphs.iter().enumerate() {
        if k > g.num_nodes() {
            continue;
        }
        for s in subsets(g.num_nodes(), k) {
            if g.induced_subgraph(&s).unwrap().is_connected() {
                out.push((gi, s));
            }
        }
    }
    out
}

/// Random DAG whose node ids are a topological order; each forward pair gets
/// an edge with probability `p`.
pub fn random_dag(ab: Alphabet, n: usize, p: f64, r: &mut impl Rng) -> TypedDigraph {
    let types = (0..n).map(|_| r.random_range(0..ab.node_classes) as Class).collect();
    let mut g = TypedDigraph::new(ab, types).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                g.set_edge(i, j, r.random_range(1..ab.edge_classes) as Class).unwrap();
            }
        }
    }
    g
}

/// Random DAG that is also weakly connected: a random spanning parent per
/// node plus extra forward edges.
pub fn random_connected_dag(ab: Alphabet, n: usize, p: f64, r: &mut impl Rng) -> TypedDigraph {
    let mut g = random_dag(ab, n, p, r);
    for v in 1..n {
        let u = r.random_range(0..v);
        if g.edge(u, v) == 0 {
            g.set_edge(u, v, r.random_range(1..ab.edge_classes) as Class).unwrap();
        }
    }
    g
}

pub fn seeded_dags(seed: u64, count: usize, ab: Alphabet, n: (usize, usize), p: f64) -> Vec<TypedDigraph> {
    let mut r = rng::stream(seed, 0);
    (0..count)
        .map(|_| {
            let size = r.random_range(n.0..=n.1);
            random_dag(ab, size, p, &mut r)
        })
        .collect()
}

/// Arbitrary directed graphs (cycles allowed) with up to `max_n` nodes.
pub fn digraph(max_n: usize, a: usize, b: usize) -> impl Strategy<Value = TypedDigraph> {
    let ab = Alphabet::new(a, b).unwrap();
    (1..=max_n).prop_flat_map(move |n| {
        (
            proptest::collection::vec(0..a as Class, n),
            proptest::collection::vec(0..b as Class, n * n),
        )
            .prop_map(move |(types, edges)| {
                let mut g = TypedDigraph::new(ab, types).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        if i != j && edges[i * n + j] != 0 {
                            g.set_edge(i, j, edges[i * n + j]).unwrap();
                        }
                    }
                }
                g
            })
    })
}

/// DAGs with node ids in topological order and up to `max_n` nodes.
pub fn dag(max_n: usize, a: usize, b: usize) -> impl Strategy<Value = TypedDigraph> {
    let ab = Alphabet::new(a, b).unwrap();
    (1..=max_n).prop_flat_map(move |n| {
        (
            proptest::collection::vec(0..a as Class, n),
            proptest::collection::vec(0..b as Class, n * n),
        )
            .prop_map(move |(types, edges)| {
                let mut g = TypedDigraph::new(ab, types).unwrap();
                for i in 0..n {
                    for j in i + 1..n {
                        if edges[i * n + j] != 0 {
                            g.set_edge(i, j, edges[i * n + j]).unwrap();
                        }
                    }
                }
                g
            })
    })
}

/// A graph together with a random permutation of its nodes.
pub fn with_permutation<S: Strategy<Value = TypedDigraph>>(s: S) -> impl Strategy<Value = (TypedDigraph, Vec<usize>)> {
    s.prop_flat_map(|g| {
        let n = g.num_nodes();
        (Just(g), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
    })
}
