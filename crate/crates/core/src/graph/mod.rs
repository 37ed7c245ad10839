//! Directed graphs with categorical node and edge classes.
//!
//! A [`TypedDigraph`] stores a node class per node and a dense matrix of edge
//! classes over ordered node pairs. Edge class `0` means "no edge", so the
//! absence of an edge is just another category; this is the same convention
//! the diffusion state space uses. Diagonal entries are always `0`.

mod hash;
mod iso;
mod levels;
mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hash::{canonicalize, pattern_key, pattern_key_with_rounds, PatternKey};
pub use iso::{count_embeddings, count_occurrences, is_isomorphic, Count};
pub use levels::{levels_lenient, topological_levels};
pub use table::{ClassId, PatternTable};

/// Category index for node and edge classes.
pub type Class = u16;

/// Alphabet sizes: `node_classes` node categories and `edge_classes` edge
/// categories, the latter including the "absent" class `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    pub node_classes: usize,
    pub edge_classes: usize,
}

impl Alphabet {
    pub fn new(node_classes: usize, edge_classes: usize) -> Result<Self> {
        if node_classes == 0 {
            return Err(Error::invalid("alphabet needs at least one node class"));
        }
        if edge_classes < 2 {
            return Err(Error::invalid(
                "alphabet needs at least two edge classes (absent + present)",
            ));
        }
        if node_classes > Class::MAX as usize || edge_classes > Class::MAX as usize {
            return Err(Error::invalid("alphabet too large"));
        }
        Ok(Self {
            node_classes,
            edge_classes,
        })
    }
}

/// A directed graph with typed nodes and typed ordered pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedDigraph {
    alphabet: Alphabet,
    node_types: Vec<Class>,
    // row-major n×n, entry (i, j) is the class of i→j
    edges: Vec<Class>,
}

impl TypedDigraph {
    /// Graph with the given node classes and no edges.
    pub fn new(alphabet: Alphabet, node_types: Vec<Class>) -> Result<Self> {
        if let Some(&c) = node_types
            .iter()
            .find(|&&c| c as usize >= alphabet.node_classes)
        {
            return Err(Error::invalid(format!(
                "node class {c} outside alphabet of {} classes",
                alphabet.node_classes
            )));
        }
        let n = node_types.len();
        Ok(Self {
            alphabet,
            node_types,
            edges: vec![0; n * n],
        })
    }

    /// Graph from node classes and `(src, dst, class)` triples.
    pub fn from_edges(
        alphabet: Alphabet,
        node_types: Vec<Class>,
        edges: &[(usize, usize, Class)],
    ) -> Result<Self> {
        let mut g = Self::new(alphabet, node_types)?;
        for &(u, v, c) in edges {
            g.set_edge(u, v, c)?;
        }
        Ok(g)
    }

    /// Graph from a row-major edge matrix. Used where the matrix is already
    /// known to be valid (noising, induced subgraphs).
    pub(crate) fn from_parts_unchecked(
        alphabet: Alphabet,
        node_types: Vec<Class>,
        edges: Vec<Class>,
    ) -> Self {
        debug_assert_eq!(edges.len(), node_types.len() * node_types.len());
        Self {
            alphabet,
            node_types,
            edges,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn num_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn node_types(&self) -> &[Class] {
        &self.node_types
    }

    pub fn node_type(&self, i: usize) -> Class {
        self.node_types[i]
    }

    /// Row-major edge class matrix.
    pub fn edge_matrix(&self) -> &[Class] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, i: usize, j: usize) -> Class {
        self.edges[i * self.node_types.len() + j]
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge(i, j) != 0
    }

    /// True when there is an edge in either direction.
    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.has_edge(i, j) || self.has_edge(j, i)
    }

    pub fn set_edge(&mut self, i: usize, j: usize, class: Class) -> Result<()> {
        let n = self.num_nodes();
        if i >= n || j >= n {
            return Err(Error::invalid(format!(
                "edge {i}->{j} out of range for {n} nodes"
            )));
        }
        if i == j && class != 0 {
            return Err(Error::invalid(format!("self-loop on node {i}")));
        }
        if class as usize >= self.alphabet.edge_classes {
            return Err(Error::invalid(format!(
                "edge class {class} outside alphabet of {} classes",
                self.alphabet.edge_classes
            )));
        }
        self.edges[i * n + j] = class;
        Ok(())
    }

    pub fn set_node_type(&mut self, i: usize, class: Class) -> Result<()> {
        if class as usize >= self.alphabet.node_classes {
            return Err(Error::invalid(format!(
                "node class {class} outside alphabet of {} classes",
                self.alphabet.node_classes
            )));
        }
        self.node_types[i] = class;
        Ok(())
    }

    /// Number of present (class ≠ 0) ordered pairs.
    pub fn num_edges(&self) -> usize {
        self.edges.iter().filter(|&&c| c != 0).count()
    }

    /// Present edges as `(src, dst, class)` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Class)> + '_ {
        let n = self.num_nodes();
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(move |(idx, &c)| (idx / n, idx % n, c))
    }

    /// Sorted neighbor lists of the undirected skeleton.
    pub fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let n = self.num_nodes();
        let mut out = vec![Vec::new(); n];
        for (i, row) in out.iter_mut().enumerate() {
            for j in 0..n {
                if i != j && self.adjacent(i, j) {
                    row.push(j);
                }
            }
        }
        out
    }

    pub fn out_degree(&self, i: usize) -> usize {
        let n = self.num_nodes();
        self.edges[i * n..(i + 1) * n]
            .iter()
            .filter(|&&c| c != 0)
            .count()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        (0..self.num_nodes()).filter(|&j| self.has_edge(j, i)).count()
    }

    /// Weak connectivity: edges count regardless of direction. The empty
    /// graph and single nodes are connected.
    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && self.adjacent(u, v) {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        reached == n
    }

    /// Induced subgraph on `nodes`, in the given order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<TypedDigraph> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        for &v in nodes {
            if v >= n {
                return Err(Error::invalid(format!(
                    "node {v} out of range for {n} nodes"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::invalid(format!("duplicate node {v}")));
            }
        }
        Ok(self.induced_unchecked(nodes))
    }

    pub(crate) fn induced_unchecked(&self, nodes: &[usize]) -> TypedDigraph {
        let k = nodes.len();
        let mut edges = Vec::with_capacity(k * k);
        for &u in nodes {
            for &v in nodes {
                edges.push(self.edge(u, v));
            }
        }
        TypedDigraph {
            alphabet: self.alphabet,
            node_types: nodes.iter().map(|&v| self.node_types[v]).collect(),
            edges,
        }
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<TypedDigraph> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::invalid("permutation length mismatch"));
        }
        let mut inverse = vec![usize::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || inverse[p] != usize::MAX {
                return Err(Error::invalid("not a permutation"));
            }
            inverse[p] = i;
        }
        Ok(self.induced_unchecked(&inverse))
    }

    /// Checks the structural invariants; useful after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.edges.len() != n * n {
            return Err(Error::invalid("edge matrix is not n×n"));
        }
        for i in 0..n {
            if self.edges[i * n + i] != 0 {
                return Err(Error::invalid(format!("self-loop on node {i}")));
            }
        }
        if self
            .node_types
            .iter()
            .any(|&c| c as usize >= self.alphabet.node_classes)
        {
            return Err(Error::invalid("node class outside alphabet"));
        }
        if self
            .edges
            .iter()
            .any(|&c| c as usize >= self.alphabet.edge_classes)
        {
            return Err(Error::invalid("edge class outside alphabet"));
        }
        Ok(())
    }
}

/// One induced occurrence: a graph in a set plus a sorted node-id list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubgraphInstance {
    pub graph_id: usize,
    pub nodes: Vec<usize>,
}

impl SubgraphInstance {
    /// Builds an instance, sorting the node ids.
    pub fn new(graph_id: usize, mut nodes: Vec<usize>) -> Result<Self> {
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("instance has duplicate node ids"));
        }
        Ok(Self { graph_id, nodes })
    }

    pub(crate) fn from_sorted(graph_id: usize, nodes: Vec<usize>) -> Self {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        Self { graph_id, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Representative of an isomorphism class together with its key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    graph: TypedDigraph,
    key: PatternKey,
}

impl Pattern {
    /// Wraps a connected graph as a pattern.
    pub fn new(graph: TypedDigraph) -> Result<Self> {
        if !graph.is_connected() {
            return Err(Error::invalid("pattern graph must be connected"));
        }
        let key = pattern_key(&graph);
        Ok(Self { graph, key })
    }

    pub(crate) fn with_key(graph: TypedDigraph, key: PatternKey) -> Self {
        Self { graph, key }
    }

    pub fn graph(&self) -> &TypedDigraph {
        &self.graph
    }

    pub fn key(&self) -> PatternKey {
        self.key
    }

    pub fn size(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn into_graph(self) -> TypedDigraph {
        self.graph
    }
}
