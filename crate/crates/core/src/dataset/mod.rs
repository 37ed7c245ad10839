//! Graph sets, their newline-delimited JSON format, empirical class
//! marginals and a synthetic generator with planted motifs.

mod io;
mod marginals;
mod synth;

use crate::error::{Error, Result};
use crate::graph::{Alphabet, TypedDigraph};

pub use io::{
    load_graph_set, parse_graph_set, save_graph_set, write_graph_set, GraphRecord, Manifest,
};
pub use marginals::{compute_marginals, Marginals};
pub use synth::{synth_generate, PlantedMotif, SynthSpec};

/// An ordered collection of graphs over one alphabet.
///
/// Graphs are addressed by position (`graph_id` in
/// [`SubgraphInstance`](crate::SubgraphInstance)) and carry a string id for
/// files.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSet {
    pub name: String,
    alphabet: Alphabet,
    node_class_names: Vec<String>,
    edge_class_names: Vec<String>,
    ids: Vec<String>,
    graphs: Vec<TypedDigraph>,
}

impl GraphSet {
    /// Empty set with generated class names (`n0, n1, …` and `e0, e1, …`).
    pub fn new(name: impl Into<String>, alphabet: Alphabet) -> Self {
        Self {
            name: name.into(),
            alphabet,
            node_class_names: (0..alphabet.node_classes).map(|c| format!("n{c}")).collect(),
            edge_class_names: (0..alphabet.edge_classes).map(|c| format!("e{c}")).collect(),
            ids: Vec::new(),
            graphs: Vec::new(),
        }
    }

    pub fn with_class_names(
        name: impl Into<String>,
        alphabet: Alphabet,
        node_class_names: Vec<String>,
        edge_class_names: Vec<String>,
    ) -> Result<Self> {
        if node_class_names.len() != alphabet.node_classes
            || edge_class_names.len() != alphabet.edge_classes
        {
            return Err(Error::invalid("class name count does not match alphabet"));
        }
        Ok(Self {
            name: name.into(),
            alphabet,
            node_class_names,
            edge_class_names,
            ids: Vec::new(),
            graphs: Vec::new(),
        })
    }

    /// Builds a set from graphs, naming them `g0, g1, …`.
    pub fn from_graphs(
        name: impl Into<String>,
        alphabet: Alphabet,
        graphs: Vec<TypedDigraph>,
    ) -> Result<Self> {
        let mut set = Self::new(name, alphabet);
        for (i, g) in graphs.into_iter().enumerate() {
            set.push(format!("g{i}"), g)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, id: impl Into<String>, graph: TypedDigraph) -> Result<usize> {
        let id = id.into();
        if graph.alphabet() != self.alphabet {
            return Err(Error::Validation {
                record: id,
                message: "alphabet differs from the set's".into(),
            });
        }
        if self.ids.contains(&id) {
            return Err(Error::Validation {
                record: id,
                message: "duplicate graph id".into(),
            });
        }
        self.ids.push(id);
        self.graphs.push(graph);
        Ok(self.graphs.len() - 1)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn node_class_names(&self) -> &[String] {
        &self.node_class_names
    }

    pub fn edge_class_names(&self) -> &[String] {
        &self.edge_class_names
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[TypedDigraph] {
        &self.graphs
    }

    pub fn graph(&self, idx: usize) -> &TypedDigraph {
        &self.graphs[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TypedDigraph)> {
        self.ids.iter().map(String::as_str).zip(self.graphs.iter())
    }
}
