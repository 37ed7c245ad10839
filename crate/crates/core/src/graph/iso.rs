//! VF2-style backtracking for induced subgraph isomorphism.
//!
//! The matcher maps pattern nodes one at a time in a connectivity-first
//! order. A candidate host node must match the node class, have at least the
//! pattern node's in/out degree, and agree on the edge class (including
//! absence) with every already-mapped pattern node in both directions.
//! Checking absence as well as presence is what makes the embedding induced.

use std::time::{Duration, Instant};

use super::TypedDigraph;

/// Outcome of a counting call that may run out of time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    Exact(u64),
    Timeout,
}

impl Count {
    pub fn exact(self) -> Option<u64> {
        match self {
            Count::Exact(c) => Some(c),
            Count::Timeout => None,
        }
    }
}

struct Plan {
    order: Vec<usize>,
    // earlier position whose image seeds the candidate list
    anchor: Vec<Option<usize>>,
    in_deg: Vec<usize>,
    out_deg: Vec<usize>,
}

impl Plan {
    fn new(pattern: &TypedDigraph) -> Self {
        let k = pattern.num_nodes();
        let in_deg: Vec<usize> = (0..k).map(|u| pattern.in_degree(u)).collect();
        let out_deg: Vec<usize> = (0..k).map(|u| pattern.out_degree(u)).collect();
        let mut placed = vec![false; k];
        let mut order = Vec::with_capacity(k);
        let mut anchor = Vec::with_capacity(k);
        while order.len() < k {
            // most links into the placed set first, then highest degree
            let next = (0..k)
                .filter(|&u| !placed[u])
                .max_by_key(|&u| {
                    let links = order.iter().filter(|&&w| pattern.adjacent(u, w)).count();
                    (links, in_deg[u] + out_deg[u], std::cmp::Reverse(u))
                })
                .expect("unplaced node exists");
            let a = order.iter().position(|&w| pattern.adjacent(next, w));
            placed[next] = true;
            order.push(next);
            anchor.push(a);
        }
        Self {
            order,
            anchor,
            in_deg,
            out_deg,
        }
    }
}

struct Matcher<'a> {
    pattern: &'a TypedDigraph,
    host: &'a TypedDigraph,
    plan: Plan,
    host_nbrs: Vec<Vec<usize>>,
    host_in: Vec<usize>,
    host_out: Vec<usize>,
    image: Vec<usize>,
    used: Vec<bool>,
    deadline: Option<Instant>,
    ticks: u32,
    timed_out: bool,
    found: u64,
    stop_at_first: bool,
}

impl<'a> Matcher<'a> {
    fn new(pattern: &'a TypedDigraph, host: &'a TypedDigraph, deadline: Option<Instant>) -> Self {
        let n = host.num_nodes();
        Self {
            pattern,
            host,
            plan: Plan::new(pattern),
            host_nbrs: host.undirected_neighbors(),
            host_in: (0..n).map(|v| host.in_degree(v)).collect(),
            host_out: (0..n).map(|v| host.out_degree(v)).collect(),
            image: vec![usize::MAX; pattern.num_nodes()],
            used: vec![false; n],
            deadline,
            ticks: 0,
            timed_out: false,
            found: 0,
            stop_at_first: false,
        }
    }

    fn feasible(&self, pos: usize, v: usize) -> bool {
        let u = self.plan.order[pos];
        if self.used[v]
            || self.pattern.node_type(u) != self.host.node_type(v)
            || self.host_in[v] < self.plan.in_deg[u]
            || self.host_out[v] < self.plan.out_deg[u]
        {
            return false;
        }
        self.plan.order[..pos].iter().all(|&w| {
            let hw = self.image[w];
            self.pattern.edge(u, w) == self.host.edge(v, hw)
                && self.pattern.edge(w, u) == self.host.edge(hw, v)
        })
    }

    fn out_of_time(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks % 1024 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                }
            }
        }
        self.timed_out
    }

    fn search(&mut self, pos: usize) {
        if pos == self.plan.order.len() {
            self.found += 1;
            return;
        }
        if self.out_of_time() {
            return;
        }
        let u = self.plan.order[pos];
        let candidates: Vec<usize> = match self.plan.anchor[pos] {
            Some(a) => self.host_nbrs[self.image[self.plan.order[a]]].clone(),
            None => (0..self.host.num_nodes()).collect(),
        };
        for v in candidates {
            if self.feasible(pos, v) {
                self.image[u] = v;
                self.used[v] = true;
                self.search(pos + 1);
                self.used[v] = false;
                self.image[u] = usize::MAX;
                if self.timed_out || (self.stop_at_first && self.found > 0) {
                    return;
                }
            }
        }
    }

    fn run(mut self) -> Count {
        self.search(0);
        if self.timed_out {
            Count::Timeout
        } else {
            Count::Exact(self.found)
        }
    }
}

/// Number of injective maps of `pattern` into `host` that preserve node
/// classes and every ordered-pair edge class.
pub fn count_embeddings(
    pattern: &TypedDigraph,
    host: &TypedDigraph,
    cutoff: Option<Duration>,
) -> Count {
    if pattern.num_nodes() > host.num_nodes() {
        return Count::Exact(0);
    }
    let deadline = cutoff.map(|c| Instant::now() + c);
    if cutoff == Some(Duration::ZERO) {
        return Count::Timeout;
    }
    Matcher::new(pattern, host, deadline).run()
}

/// Number of node subsets of `host` whose induced subgraph is isomorphic to
/// `pattern`. Each such subset carries exactly |Aut(pattern)| embeddings, so
/// the embedding count is divided by the automorphism count.
///
/// `cutoff` is a wall-clock budget for the whole call; `None` means no limit.
pub fn count_occurrences(
    pattern: &TypedDigraph,
    host: &TypedDigraph,
    cutoff: Option<Duration>,
) -> Count {
    if pattern.num_nodes() > host.num_nodes() {
        return Count::Exact(0);
    }
    if cutoff == Some(Duration::ZERO) {
        return Count::Timeout;
    }
    let start = Instant::now();
    let emb = match count_embeddings(pattern, host, cutoff) {
        Count::Exact(0) => return Count::Exact(0),
        Count::Exact(e) => e,
        Count::Timeout => return Count::Timeout,
    };
    let remaining = cutoff.map(|c| c.saturating_sub(start.elapsed()));
    if remaining == Some(Duration::ZERO) {
        return Count::Timeout;
    }
    match count_embeddings(pattern, pattern, remaining) {
        Count::Exact(aut) => Count::Exact(emb / aut),
        Count::Timeout => Count::Timeout,
    }
}

fn sorted_profile(g: &TypedDigraph) -> Vec<(u16, usize, usize)> {
    let mut p: Vec<_> = (0..g.num_nodes())
        .map(|v| (g.node_type(v), g.in_degree(v), g.out_degree(v)))
        .collect();
    p.sort_unstable();
    p
}

/// Exact isomorphism test under node-class and edge-class preservation.
pub fn is_isomorphic(a: &TypedDigraph, b: &TypedDigraph) -> bool {
    if a.num_nodes() != b.num_nodes() || a.alphabet() != b.alphabet() {
        return false;
    }
    if a.num_nodes() == 0 {
        return true;
    }
    let mut ea: Vec<_> = a.edge_matrix().to_vec();
    let mut eb: Vec<_> = b.edge_matrix().to_vec();
    ea.sort_unstable();
    eb.sort_unstable();
    if ea != eb || sorted_profile(a) != sorted_profile(b) {
        return false;
    }
    let mut m = Matcher::new(a, b, None);
    m.stop_at_first = true;
    matches!(m.run(), Count::Exact(c) if c > 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Alphabet;

    fn ab() -> Alphabet {
        Alphabet::new(3, 2).unwrap()
    }

    fn g(types: Vec<u16>, edges: &[(usize, usize)]) -> TypedDigraph {
        let e: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1)).collect();
        TypedDigraph::from_edges(ab(), types, &e).unwrap()
    }

    #[test]
    fn reversed_edge_is_isomorphic() {
        assert!(is_isomorphic(&g(vec![0, 0], &[(0, 1)]), &g(vec![0, 0], &[(1, 0)])));
    }

    #[test]
    fn swapped_types_are_not_isomorphic() {
        // A→B vs B→A: the only bijections either keep or swap the nodes, and
        // both break the class-then-direction pairing.
        assert!(!is_isomorphic(&g(vec![0, 1], &[(0, 1)]), &g(vec![1, 0], &[(0, 1)])));
    }

    #[test]
    fn count_edge_in_typed_chain() {
        let host = g(vec![0, 1, 2], &[(0, 1), (1, 2)]);
        assert_eq!(count_occurrences(&g(vec![0, 1], &[(0, 1)]), &host, None), Count::Exact(1));
    }

    #[test]
    fn count_single_nodes() {
        let host = g(vec![0, 0, 0], &[(0, 1)]);
        assert_eq!(count_occurrences(&g(vec![0], &[]), &host, None), Count::Exact(3));
    }

    #[test]
    fn count_edge_in_uniform_chain() {
        let host = g(vec![0, 0, 0], &[(0, 1), (1, 2)]);
        assert_eq!(count_occurrences(&g(vec![0, 0], &[(0, 1)]), &host, None), Count::Exact(2));
    }

    #[test]
    fn oversized_pattern_counts_zero() {
        let host = g(vec![0, 0], &[(0, 1)]);
        let pat = g(vec![0, 0, 0], &[(0, 1), (1, 2)]);
        assert_eq!(count_occurrences(&pat, &host, None), Count::Exact(0));
    }

    #[test]
    fn zero_cutoff_times_out() {
        let host = g(vec![0, 0, 0], &[(0, 1), (1, 2)]);
        let pat = g(vec![0, 0], &[(0, 1)]);
        assert_eq!(count_occurrences(&pat, &host, Some(Duration::ZERO)), Count::Timeout);
    }

    #[test]
    fn triangle_automorphisms() {
        let tri = g(vec![0, 0, 0], &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(count_embeddings(&tri, &tri, None), Count::Exact(3));
    }
}
