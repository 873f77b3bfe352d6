//! Element identifiers and counted sample collections.
//!
//! Every test in this crate is a function of sample multiplicities only, so
//! samples are stored as an ordered element → count map. Iteration order is
//! the element order, which keeps every downstream statistic independent of
//! the order in which samples were drawn.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Opaque identifier of one domain element (a text, an integer label, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for ElementId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ElementId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ElementId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl From<u64> for ElementId {
    fn from(v: u64) -> Self {
        Self(v.to_string())
    }
}

impl From<usize> for ElementId {
    fn from(v: usize) -> Self {
        Self(v.to_string())
    }
}

/// A multiset of elements.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Multiset {
    counts: BTreeMap<ElementId, u64>,
    total: u64,
}

impl Multiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, x: ElementId) {
        self.insert_n(x, 1);
    }

    pub fn insert_n(&mut self, x: ElementId, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(x).or_insert(0) += n;
        self.total += n;
    }

    pub fn count(&self, x: &str) -> u64 {
        self.counts.get(x).copied().unwrap_or(0)
    }

    /// Total number of samples, multiplicities included.
    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Number of distinct elements.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementId, u64)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    pub fn merge(&mut self, other: &Multiset) {
        for (x, n) in other.iter() {
            self.insert_n(x.clone(), n);
        }
    }
}

impl<T: Into<ElementId>> FromIterator<T> for Multiset {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut m = Multiset::new();
        for x in iter {
            m.insert(x.into());
        }
        m
    }
}
