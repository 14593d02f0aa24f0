//! Integer domains stored as ordered unions of disjoint closed intervals.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Largest magnitude a domain bound may take. Stands in for "unbounded".
pub const INF: i64 = 1 << 40;

/// Clamps an intermediate (wide) result back into the representable range.
#[inline]
pub(crate) fn clamp_wide(v: i128) -> i64 {
    v.clamp(-(INF as i128), INF as i128) as i64
}

/// An ordered union of disjoint, non-adjacent closed intervals.
///
/// Intervals are sorted ascending and any two consecutive ones are separated
/// by a gap of at least one missing value, so the representation of a given
/// value set is unique. An empty domain has no intervals.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Dom {
    ivs: SmallVec<[(i64, i64); 2]>,
}

impl Dom {
    pub fn empty() -> Self {
        Dom { ivs: SmallVec::new() }
    }

    /// `[lo, hi]`, clamped to `[-INF, INF]`. Empty when `lo > hi`.
    pub fn range(lo: i64, hi: i64) -> Self {
        let lo = lo.max(-INF);
        let hi = hi.min(INF);
        let mut d = Dom::empty();
        if lo <= hi {
            d.ivs.push((lo, hi));
        }
        d
    }

    pub fn singleton(v: i64) -> Self {
        Dom::range(v, v)
    }

    /// The full representable range.
    pub fn full() -> Self {
        Dom::range(-INF, INF)
    }

    pub fn at_least(lo: i64) -> Self {
        Dom::range(lo, INF)
    }

    pub fn at_most(hi: i64) -> Self {
        Dom::range(-INF, hi)
    }

    pub fn from_values<I: IntoIterator<Item = i64>>(values: I) -> Self {
        let mut vs: Vec<i64> = values.into_iter().collect();
        vs.sort_unstable();
        vs.dedup();
        let mut d = Dom::empty();
        for v in vs {
            d.push_back(v, v);
        }
        d
    }

    /// Builds a domain from arbitrary (possibly overlapping) intervals.
    pub fn from_intervals<I: IntoIterator<Item = (i64, i64)>>(ivs: I) -> Self {
        let mut v: Vec<(i64, i64)> = ivs
            .into_iter()
            .map(|(a, b)| (a.max(-INF), b.min(INF)))
            .filter(|(a, b)| a <= b)
            .collect();
        v.sort_unstable();
        let mut d = Dom::empty();
        for (a, b) in v {
            d.push_back(a, b);
        }
        d
    }

    // Appends an interval whose start is >= every existing start.
    fn push_back(&mut self, a: i64, b: i64) {
        if let Some(last) = self.ivs.last_mut() {
            if a <= last.1.saturating_add(1) {
                last.1 = last.1.max(b);
                return;
            }
        }
        self.ivs.push((a, b));
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.ivs
    }

    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    /// Lower bound. Panics on an empty domain.
    pub fn min(&self) -> i64 {
        self.ivs[0].0
    }

    /// Upper bound. Panics on an empty domain.
    pub fn max(&self) -> i64 {
        self.ivs[self.ivs.len() - 1].1
    }

    pub fn is_fixed(&self) -> bool {
        self.ivs.len() == 1 && self.ivs[0].0 == self.ivs[0].1
    }

    pub fn value(&self) -> Option<i64> {
        self.is_fixed().then(|| self.ivs[0].0)
    }

    /// Number of values (saturating for near-infinite domains).
    pub fn size(&self) -> u64 {
        self.ivs
            .iter()
            .fold(0u64, |acc, &(a, b)| acc.saturating_add((b - a) as u64 + 1))
    }

    pub fn contains(&self, v: i64) -> bool {
        match self.ivs.binary_search_by(|&(a, b)| {
            if b < v {
                std::cmp::Ordering::Less
            } else if a > v {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(_) => true,
            Err(_) => false,
        }
    }

    /// Whether every value of `self` belongs to `other`.
    pub fn is_subset(&self, other: &Dom) -> bool {
        self.ivs.iter().all(|&(a, b)| {
            other.ivs.iter().any(|&(c, d)| c <= a && b <= d)
        })
    }

    /// Whether the closed range `[lo, hi]` is entirely contained.
    pub fn contains_range(&self, lo: i64, hi: i64) -> bool {
        lo > hi || self.ivs.iter().any(|&(a, b)| a <= lo && hi <= b)
    }

    /// Whether some value of `[lo, hi]` belongs to the domain.
    pub fn meets_range(&self, lo: i64, hi: i64) -> bool {
        self.ivs.iter().any(|&(a, b)| a <= hi && lo <= b)
    }

    /// Whether the two domains share a value.
    pub fn meets(&self, other: &Dom) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.ivs.len() && j < other.ivs.len() {
            let (a, b) = self.ivs[i];
            let (c, d) = other.ivs[j];
            if a.max(c) <= b.min(d) {
                return true;
            }
            if b < d {
                i += 1;
            } else {
                j += 1;
            }
        }
        false
    }

    pub fn intersect(&self, other: &Dom) -> Dom {
        let mut out = Dom::empty();
        let (mut i, mut j) = (0, 0);
        while i < self.ivs.len() && j < other.ivs.len() {
            let (a, b) = self.ivs[i];
            let (c, d) = other.ivs[j];
            let lo = a.max(c);
            let hi = b.min(d);
            if lo <= hi {
                out.ivs.push((lo, hi));
            }
            if b < d {
                i += 1;
            } else {
                j += 1;
            }
        }
        out
    }

    pub fn union(&self, other: &Dom) -> Dom {
        Dom::from_intervals(self.ivs.iter().chain(other.ivs.iter()).copied())
    }

    /// Complement within `[-INF, INF]`.
    pub fn complement(&self) -> Dom {
        let mut out = Dom::empty();
        let mut next = -INF;
        for &(a, b) in &self.ivs {
            if a > next {
                out.ivs.push((next, a - 1));
            }
            next = b.saturating_add(1);
        }
        if next <= INF {
            out.ivs.push((next, INF));
        }
        out
    }

    pub fn difference(&self, other: &Dom) -> Dom {
        self.intersect(&other.complement())
    }

    /// Domain restricted to values `>= lo`.
    pub fn with_min(&self, lo: i64) -> Dom {
        self.intersect(&Dom::at_least(lo))
    }

    /// Domain restricted to values `<= hi`.
    pub fn with_max(&self, hi: i64) -> Dom {
        self.intersect(&Dom::at_most(hi))
    }

    pub fn without(&self, v: i64) -> Dom {
        self.difference(&Dom::singleton(v))
    }

    /// `{ v + k : v in self }`.
    pub fn shift(&self, k: i64) -> Dom {
        Dom::from_intervals(
            self.ivs
                .iter()
                .map(|&(a, b)| (clamp_wide(a as i128 + k as i128), clamp_wide(b as i128 + k as i128))),
        )
    }

    /// `{ -v : v in self }`.
    pub fn negate(&self) -> Dom {
        Dom::from_intervals(self.ivs.iter().map(|&(a, b)| (-b, -a)))
    }

    /// Iterates over every value. Only sensible on small domains.
    pub fn values(&self) -> impl Iterator<Item = i64> + '_ {
        self.ivs.iter().flat_map(|&(a, b)| a..=b)
    }
}

impl fmt::Debug for Dom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Dom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ivs.is_empty() {
            return f.write_str("{}");
        }
        let fmt_bound = |v: i64| -> String {
            if v >= INF {
                "+inf".into()
            } else if v <= -INF {
                "-inf".into()
            } else {
                v.to_string()
            }
        };
        let parts: Vec<String> = self
            .ivs
            .iter()
            .map(|&(a, b)| {
                if a == b {
                    fmt_bound(a)
                } else {
                    format!("[{},{}]", fmt_bound(a), fmt_bound(b))
                }
            })
            .collect();
        f.write_str(&parts.join("u"))
    }
}

/// Serialized as the list of `[lo, hi]` pairs.
impl Serialize for Dom {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<[i64; 2]> = self.ivs.iter().map(|&(a, b)| [a, b]).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dom {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<[i64; 2]> = Vec::deserialize(d)?;
        Ok(Dom::from_intervals(v.into_iter().map(|[a, b]| (a, b))))
    }
}
