use std::collections::BTreeMap;

use super::{is_isomorphic, pattern_key, Pattern, PatternKey, TypedDigraph};

/// Identifies a class in a [`PatternTable`]: its hash bucket and its slot
/// within the bucket. Slots only differ when distinct classes collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId {
    pub key: PatternKey,
    pub slot: usize,
}

/// Map from isomorphism class to a value.
///
/// Graphs are bucketed by [`PatternKey`] and resolved inside a bucket with an
/// exact isomorphism test, so two graphs share an entry iff they are
/// isomorphic. Iteration is ordered by `(key, slot)`, which is deterministic.
#[derive(Debug, Clone)]
pub struct PatternTable<V> {
    buckets: BTreeMap<PatternKey, Vec<(Pattern, V)>>,
    len: usize,
}

impl<V> Default for PatternTable<V> {
    fn default() -> Self {
        Self {
            buckets: BTreeMap::new(),
            len: 0,
        }
    }
}

impl<V> PatternTable<V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of classes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn find(&self, g: &TypedDigraph) -> Option<ClassId> {
        self.find_with_key(g, pattern_key(g))
    }

    pub fn find_with_key(&self, g: &TypedDigraph, key: PatternKey) -> Option<ClassId> {
        let bucket = self.buckets.get(&key)?;
        bucket
            .iter()
            .position(|(p, _)| is_isomorphic(p.graph(), g))
            .map(|slot| ClassId { key, slot })
    }

    /// Value for `g`'s class, inserting `g` as representative when the class
    /// is new.
    pub fn entry_or_insert_with(
        &mut self,
        g: TypedDigraph,
        default: impl FnOnce() -> V,
    ) -> (ClassId, &mut V) {
        let key = pattern_key(&g);
        self.entry_with_key(g, key, default)
    }

    pub fn entry_with_key(
        &mut self,
        g: TypedDigraph,
        key: PatternKey,
        default: impl FnOnce() -> V,
    ) -> (ClassId, &mut V) {
        let bucket = self.buckets.entry(key).or_default();
        let slot = match bucket.iter().position(|(p, _)| is_isomorphic(p.graph(), &g)) {
            Some(slot) => slot,
            None => {
                bucket.push((Pattern::with_key(g, key), default()));
                self.len += 1;
                bucket.len() - 1
            }
        };
        (ClassId { key, slot }, &mut bucket[slot].1)
    }

    pub fn get(&self, id: ClassId) -> Option<(&Pattern, &V)> {
        self.buckets
            .get(&id.key)
            .and_then(|b| b.get(id.slot))
            .map(|(p, v)| (p, v))
    }

    pub fn get_mut(&mut self, id: ClassId) -> Option<&mut V> {
        self.buckets
            .get_mut(&id.key)
            .and_then(|b| b.get_mut(id.slot))
            .map(|(_, v)| v)
    }

    pub fn get_graph(&self, g: &TypedDigraph) -> Option<&V> {
        self.find(g).and_then(|id| self.get(id)).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &Pattern, &V)> {
        self.buckets.iter().flat_map(|(&key, bucket)| {
            bucket
                .iter()
                .enumerate()
                .map(move |(slot, (p, v))| (ClassId { key, slot }, p, v))
        })
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut V> {
        self.buckets
            .values_mut()
            .flat_map(|b| b.iter_mut().map(|(_, v)| v))
    }

    pub fn map<W>(self, mut f: impl FnMut(&Pattern, V) -> W) -> PatternTable<W> {
        let buckets = self
            .buckets
            .into_iter()
            .map(|(k, b)| {
                let b = b
                    .into_iter()
                    .map(|(p, v)| {
                        let w = f(&p, v);
                        (p, w)
                    })
                    .collect();
                (k, b)
            })
            .collect();
        PatternTable {
            buckets,
            len: self.len,
        }
    }

    /// Drops classes for which `keep` is false. Slots are renumbered.
    pub fn retain(&mut self, mut keep: impl FnMut(&Pattern, &V) -> bool) {
        for bucket in self.buckets.values_mut() {
            bucket.retain(|(p, v)| keep(p, v));
        }
        self.buckets.retain(|_, b| !b.is_empty());
        self.len = self.buckets.values().map(Vec::len).sum();
    }
}

impl<V> IntoIterator for PatternTable<V> {
    type Item = (ClassId, Pattern, V);
    type IntoIter = std::vec::IntoIter<(ClassId, Pattern, V)>;

    fn into_iter(self) -> Self::IntoIter {
        let mut out = Vec::with_capacity(self.len);
        for (key, bucket) in self.buckets {
            for (slot, (p, v)) in bucket.into_iter().enumerate() {
                out.push((ClassId { key, slot }, p, v));
            }
        }
        out.into_iter()
    }
}
