//! Isomorphism-invariant graph keys by iterated neighborhood refinement.
//!
//! Every node starts from its class. Each round replaces a node's label by a
//! digest of its previous label and the sorted multiset of
//! `(direction, edge class, neighbor label)` over its in- and out-edges. After
//! `num_nodes` rounds the sorted label multiset is folded into a 128-bit key.
//! Isomorphic graphs always get equal keys; distinct classes can collide, and
//! [`canonicalize`] splits buckets by exact isomorphism.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{is_isomorphic, Pattern, TypedDigraph};

/// 128-bit digest used as a hash-bucket key for isomorphism classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternKey(pub u128);

impl PatternKey {
    /// Big-endian bytes; ordering on these matches `Ord` on the key.
    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_be_bytes()
    }

    /// Keeps only the top `bits` bits. Narrow keys make collisions easy to
    /// provoke in tests.
    pub fn truncated(self, bits: u32) -> PatternKey {
        match bits {
            0 => PatternKey(0),
            b if b >= 128 => self,
            b => PatternKey(self.0 >> (128 - b)),
        }
    }
}

impl fmt::Display for PatternKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl std::str::FromStr for PatternKey {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u128::from_str_radix(s, 16).map(PatternKey)
    }
}

#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// Two-lane 128-bit accumulator.
struct Mix128 {
    lo: u64,
    hi: u64,
}

impl Mix128 {
    fn new(seed: u64) -> Self {
        Self {
            lo: fmix64(seed ^ 0x9e37_79b9_7f4a_7c15),
            hi: fmix64(seed.wrapping_add(0x6a09_e667_f3bc_c909)),
        }
    }

    #[inline]
    fn absorb(&mut self, w: u64) {
        self.lo = fmix64(self.lo ^ w).wrapping_add(self.hi.rotate_left(29));
        self.hi = fmix64(self.hi.wrapping_add(w.wrapping_mul(0x87c3_7b91_1142_53d5)) ^ self.lo);
    }

    #[inline]
    fn absorb128(&mut self, w: u128) {
        self.absorb(w as u64);
        self.absorb((w >> 64) as u64);
    }

    fn finish(mut self) -> u128 {
        self.absorb(0x2545_f491_4f6c_dd1d);
        ((self.hi as u128) << 64) | self.lo as u128
    }
}

/// Key with `num_nodes` refinement rounds.
pub fn pattern_key(g: &TypedDigraph) -> PatternKey {
    pattern_key_with_rounds(g, g.num_nodes())
}

/// Key with an explicit number of refinement rounds.
pub fn pattern_key_with_rounds(g: &TypedDigraph, rounds: usize) -> PatternKey {
    let n = g.num_nodes();
    let mut labels: Vec<u128> = (0..n)
        .map(|v| {
            let mut m = Mix128::new(1);
            m.absorb(g.node_type(v) as u64);
            m.finish()
        })
        .collect();
    let mut sig: Vec<(u8, u16, u128)> = Vec::with_capacity(2 * n);
    let mut next = vec![0u128; n];
    for _ in 0..rounds {
        for v in 0..n {
            sig.clear();
            for u in 0..n {
                let out = g.edge(v, u);
                if out != 0 {
                    sig.push((0, out, labels[u]));
                }
                let inc = g.edge(u, v);
                if inc != 0 {
                    sig.push((1, inc, labels[u]));
                }
            }
            sig.sort_unstable();
            let mut m = Mix128::new(2);
            m.absorb128(labels[v]);
            for &(dir, class, label) in &sig {
                m.absorb(((dir as u64) << 32) | class as u64);
                m.absorb128(label);
            }
            next[v] = m.finish();
        }
        std::mem::swap(&mut labels, &mut next);
    }
    labels.sort_unstable();
    let mut m = Mix128::new(3);
    m.absorb(n as u64);
    m.absorb(g.num_edges() as u64);
    for l in labels {
        m.absorb128(l);
    }
    PatternKey(m.finish())
}

/// Splits a bucket of same-key graphs into exact isomorphism classes.
///
/// Returns one `(representative, member indices)` pair per class, in order
/// of first appearance; the first member of a class is its representative.
pub fn canonicalize(bucket: &[TypedDigraph]) -> Vec<(Pattern, Vec<usize>)> {
    let mut classes: Vec<(Pattern, Vec<usize>)> = Vec::new();
    for (i, g) in bucket.iter().enumerate() {
        match classes
            .iter_mut()
            .find(|(rep, _)| is_isomorphic(rep.graph(), g))
        {
            Some((_, members)) => members.push(i),
            None => classes.push((Pattern::with_key(g.clone(), pattern_key(g)), vec![i])),
        }
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Alphabet;

    fn ab() -> Alphabet {
        Alphabet::new(2, 2).unwrap()
    }

    #[test]
    fn permuted_graph_same_key() {
        let g = TypedDigraph::from_edges(ab(), vec![0, 1, 1, 0], &[(0, 1, 1), (1, 2, 1), (3, 2, 1)])
            .unwrap();
        let p = g.permuted(&[3, 1, 0, 2]).unwrap();
        assert_eq!(pattern_key(&g), pattern_key(&p));
    }

    #[test]
    fn swapped_types_different_key() {
        let a = TypedDigraph::from_edges(ab(), vec![0, 1], &[(0, 1, 1)]).unwrap();
        let b = TypedDigraph::from_edges(ab(), vec![1, 0], &[(0, 1, 1)]).unwrap();
        assert!(!is_isomorphic(&a, &b));
        assert_ne!(pattern_key(&a), pattern_key(&b));
    }

    #[test]
    fn deterministic() {
        let g = TypedDigraph::from_edges(ab(), vec![0, 1, 0], &[(0, 1, 1), (2, 1, 1)]).unwrap();
        assert_eq!(pattern_key(&g), pattern_key(&g.clone()));
        assert_eq!(pattern_key(&g).to_string().len(), 32);
    }

    #[test]
    fn canonicalize_copies() {
        let g = TypedDigraph::from_edges(ab(), vec![0, 1, 0], &[(0, 1, 1), (2, 1, 1)]).unwrap();
        let classes = canonicalize(&[g.clone(), g.clone(), g]);
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].1, vec![0, 1, 2]);
        assert!(canonicalize(&[]).is_empty());
    }

    #[test]
    fn key_parse_roundtrip() {
        let k = PatternKey(0x0123_4567_89ab_cdef_0011_2233_4455_6677);
        assert_eq!(k.to_string().parse::<PatternKey>().unwrap(), k);
        assert_eq!(k.truncated(8), PatternKey(0x01));
    }
}
