//! Newline-delimited JSON graph sets.
//!
//! The first record is a manifest declaring the alphabet:
//!
//! ```text
//! {"a": 2, "b": 2, "node_classes": ["conv", "pool"], "edge_classes": ["none", "data"]}
//! ```
//!
//! Each following record is one graph with 0-based node ids. Pairs that are
//! not listed have edge class 0; listed edges have class ≥ 1.
//!
//! ```text
//! {"id": "g0", "n": 3, "node_types": [0, 1, 1], "edges": [[0, 1, 1], [1, 2, 1]]}
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GraphSet;
use crate::error::{Error, Result};
use crate::graph::{Alphabet, Class, TypedDigraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub a: usize,
    pub b: usize,
    pub node_classes: Vec<String>,
    pub edge_classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    pub n: usize,
    pub node_types: Vec<usize>,
    pub edges: Vec<[usize; 3]>,
}

impl GraphRecord {
    pub fn from_graph(id: impl Into<String>, g: &TypedDigraph) -> Self {
        Self {
            id: id.into(),
            n: g.num_nodes(),
            node_types: g.node_types().iter().map(|&c| c as usize).collect(),
            edges: g.edges().map(|(u, v, c)| [u, v, c as usize]).collect(),
        }
    }

    /// Validates against `alphabet` and builds the graph.
    pub fn to_graph(&self, alphabet: Alphabet) -> Result<TypedDigraph> {
        let fail = |message: String| Error::Validation {
            record: self.id.clone(),
            message,
        };
        if self.node_types.len() != self.n {
            return Err(fail(format!(
                "n = {} but {} node types",
                self.n,
                self.node_types.len()
            )));
        }
        if let Some(&c) = self.node_types.iter().find(|&&c| c >= alphabet.node_classes) {
            return Err(fail(format!(
                "node class {c} outside alphabet a = {}",
                alphabet.node_classes
            )));
        }
        let mut g = TypedDigraph::new(
            alphabet,
            self.node_types.iter().map(|&c| c as Class).collect(),
        )
        .map_err(|e| fail(e.to_string()))?;
        for &[u, v, c] in &self.edges {
            if u >= self.n || v >= self.n {
                return Err(fail(format!("edge [{u}, {v}, {c}] references a missing node")));
            }
            if u == v {
                return Err(fail(format!("self-loop on node {u}")));
            }
            if c == 0 || c >= alphabet.edge_classes {
                return Err(fail(format!(
                    "edge class {c} outside 1..{}",
                    alphabet.edge_classes
                )));
            }
            if g.edge(u, v) != 0 {
                return Err(fail(format!("edge {u}->{v} listed twice")));
            }
            g.set_edge(u, v, c as Class).map_err(|e| fail(e.to_string()))?;
        }
        Ok(g)
    }
}

/// Parses a graph set from the text of a file. Blank lines are skipped.
pub fn parse_graph_set(text: &str, name: &str) -> Result<GraphSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (line, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing manifest record".into(),
    })?;
    let manifest: Manifest = serde_json::from_str(first).map_err(|e| Error::Parse {
        line,
        message: format!("bad manifest: {e}"),
    })?;
    let alphabet = Alphabet::new(manifest.a, manifest.b).map_err(|e| Error::Validation {
        record: "manifest".into(),
        message: e.to_string(),
    })?;
    let mut set = GraphSet::with_class_names(
        manifest.name.clone().unwrap_or_else(|| name.to_string()),
        alphabet,
        manifest.node_classes,
        manifest.edge_classes,
    )
    .map_err(|e| Error::Validation {
        record: "manifest".into(),
        message: e.to_string(),
    })?;
    for (line, text) in lines {
        let rec: GraphRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let g = rec.to_graph(alphabet)?;
        set.push(rec.id, g)?;
    }
    Ok(set)
}

pub fn load_graph_set(path: impl AsRef<Path>) -> Result<GraphSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_graph_set(&text, &stem)
}

/// Writes the manifest and one record per graph.
pub fn write_graph_set(set: &GraphSet, mut out: impl Write) -> std::io::Result<()> {
    let manifest = Manifest {
        a: set.alphabet().node_classes,
        b: set.alphabet().edge_classes,
        node_classes: set.node_class_names().to_vec(),
        edge_classes: set.edge_class_names().to_vec(),
        name: Some(set.name.clone()),
    };
    serde_json::to_writer(&mut out, &manifest)?;
    out.write_all(b"\n")?;
    for (id, g) in set.iter() {
        serde_json::to_writer(&mut out, &GraphRecord::from_graph(id, g))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_graph_set(set: &GraphSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_graph_set(set, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MANIFEST: &str =
        r#"{"a": 2, "b": 2, "node_classes": ["x", "y"], "edge_classes": ["none", "data"]}"#;

    #[test]
    fn manifest_only() {
        let set = parse_graph_set(MANIFEST, "t").unwrap();
        assert!(set.is_empty());
        assert_eq!(set.alphabet(), Alphabet::new(2, 2).unwrap());
    }

    #[test]
    fn one_graph_roundtrip() {
        let text = format!(
            "{MANIFEST}\n{}\n",
            r#"{"id": "g0", "n": 3, "node_types": [0, 1, 1], "edges": [[0, 1, 1], [2, 1, 1]]}"#
        );
        let set = parse_graph_set(&text, "t").unwrap();
        let mut buf = Vec::new();
        write_graph_set(&set, &mut buf).unwrap();
        let again = parse_graph_set(std::str::from_utf8(&buf).unwrap(), "t").unwrap();
        assert_eq!(again.graphs(), set.graphs());
        assert_eq!(again.ids(), set.ids());
    }

    #[test]
    fn edge_class_outside_alphabet_names_record() {
        let text = format!(
            "{MANIFEST}\n{}\n",
            r#"{"id": "bad", "n": 2, "node_types": [0, 1], "edges": [[0, 1, 2]]}"#
        );
        match parse_graph_set(&text, "t") {
            Err(Error::Validation { record, .. }) => assert_eq!(record, "bad"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = format!("{MANIFEST}\n\n{{\"id\": 3\n");
        match parse_graph_set(&text, "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn listed_edges_need_nonzero_class() {
        let text = format!(
            "{MANIFEST}\n{}\n",
            r#"{"id": "z", "n": 2, "node_types": [0, 1], "edges": [[0, 1, 0]]}"#
        );
        assert!(matches!(parse_graph_set(&text, "t"), Err(Error::Validation { .. })));
    }
}
