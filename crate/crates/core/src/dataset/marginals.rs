use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TypedDigraph;

/// Empirical class frequencies of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

/// Fraction of nodes in each node class and of off-diagonal ordered pairs in
/// each edge class, pooled over all graphs.
///
/// Sets without any off-diagonal pair put all edge mass on class 0.
pub fn compute_marginals(graphs: &[TypedDigraph]) -> Result<Marginals> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::invalid("cannot compute marginals of an empty set"))?;
    let alphabet = first.alphabet();
    let mut node = vec![0u64; alphabet.node_classes];
    let mut edge = vec![0u64; alphabet.edge_classes];
    for g in graphs {
        if g.alphabet() != alphabet {
            return Err(Error::invalid("graphs disagree on the alphabet"));
        }
        for &c in g.node_types() {
            node[c as usize] += 1;
        }
        let n = g.num_nodes();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    edge[g.edge(i, j) as usize] += 1;
                }
            }
        }
    }
    let normalize = |counts: Vec<u64>| -> Vec<f64> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            let mut v = vec![0.0; counts.len()];
            v[0] = 1.0;
            return v;
        }
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    Ok(Marginals {
        node: normalize(node),
        edge: normalize(edge),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Alphabet;

    #[test]
    fn single_class_nodes() {
        let ab = Alphabet::new(3, 2).unwrap();
        let g = TypedDigraph::new(ab, vec![2, 2, 2]).unwrap();
        assert_eq!(compute_marginals(&[g]).unwrap().node, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn edge_pairs_counted_over_ordered_off_diagonal() {
        // 4 ordered off-diagonal pairs in total, one of them present
        let ab = Alphabet::new(1, 2).unwrap();
        let with = TypedDigraph::from_edges(ab, vec![0, 0], &[(0, 1, 1)]).unwrap();
        let without = TypedDigraph::new(ab, vec![0, 0]).unwrap();
        assert_eq!(compute_marginals(&[with, without]).unwrap().edge, vec![0.75, 0.25]);
    }

    #[test]
    fn empty_is_error() {
        assert!(compute_marginals(&[]).is_err());
    }
}
