use std::cmp::Ordering;

use serde::Serialize;

use super::MooError;
use crate::objectives::{ObjectiveVector, PolicyEvaluation};

/// Anything that carries an objective vector to be minimized.
pub trait Objectives {
    fn objectives(&self) -> &[f64];
}

impl Objectives for Vec<f64> {
    fn objectives(&self) -> &[f64] {
        self
    }
}

impl Objectives for ObjectiveVector {
    fn objectives(&self) -> &[f64] {
        self.as_slice()
    }
}

impl Objectives for PolicyEvaluation {
    fn objectives(&self) -> &[f64] {
        self.objectives.as_slice()
    }
}

/// Pareto dominance under minimization: `a` is no worse in every component
/// and strictly better in at least one.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, MooError> {
    if a.len() != b.len() {
        return Err(MooError::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Counters kept by a [`ParetoArchive`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ArchiveStats {
    pub offered: usize,
    pub accepted: usize,
    /// Entries removed because a newcomer dominated them.
    pub displaced: usize,
    /// Entries removed by crowding-distance pruning.
    pub pruned: usize,
}

/// A mutually nondominated set. Equal objective vectors collapse to the
/// first one inserted.
#[derive(Debug, Clone)]
pub struct ParetoArchive<T> {
    entries: Vec<T>,
    capacity: Option<usize>,
    stats: ArchiveStats,
}

impl<T> Default for ParetoArchive<T> {
    fn default() -> Self {
        ParetoArchive {
            entries: Vec::new(),
            capacity: None,
            stats: ArchiveStats::default(),
        }
    }
}

impl<T: Objectives> ParetoArchive<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Archive that prunes the most crowded entry whenever it grows past
    /// `capacity`. Pruning never breaks mutual nondominance.
    pub fn with_capacity(capacity: usize) -> Self {
        ParetoArchive {
            capacity: Some(capacity.max(2)),
            ..Self::default()
        }
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> ArchiveStats {
        self.stats
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.entries.iter()
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [T] {
        &mut self.entries
    }

    /// Would `point` enter the archive?
    pub fn accepts(&self, point: &[f64]) -> bool {
        !self.entries.iter().any(|e| {
            let o = e.objectives();
            o == point || dominates_unchecked(o, point)
        })
    }

    /// Inserts `item` unless an entry dominates or equals it; removes
    /// entries it dominates. Returns whether it was added.
    pub fn insert(&mut self, item: T) -> Result<bool, MooError> {
        self.stats.offered += 1;
        let point = item.objectives();
        if let Some(first) = self.entries.first() {
            let dim = first.objectives().len();
            if point.len() != dim {
                return Err(MooError::Dimension {
                    expected: dim,
                    got: point.len(),
                });
            }
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(MooError::NonFinite);
        }
        if !self.accepts(point) {
            return Ok(false);
        }
        let before = self.entries.len();
        self.entries
            .retain(|e| !dominates_unchecked(point, e.objectives()));
        self.stats.displaced += before - self.entries.len();
        self.entries.push(item);
        self.stats.accepted += 1;
        if let Some(cap) = self.capacity {
            while self.entries.len() > cap {
                let victim = most_crowded(&self.entries);
                self.entries.remove(victim);
                self.stats.pruned += 1;
            }
        }
        Ok(true)
    }
}

/// Crowding distances of a set of objective vectors; boundary points of
/// each axis get infinity.
pub fn crowding_distances<T: Objectives>(items: &[T]) -> Vec<f64> {
    let n = items.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    let dim = items[0].objectives().len();
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..dim {
        order.sort_by(|&a, &b| items[a].objectives()[m].total_cmp(&items[b].objectives()[m]));
        let lo = items[order[0]].objectives()[m];
        let hi = items[order[n - 1]].objectives()[m];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            let gap = items[w[2]].objectives()[m] - items[w[0]].objectives()[m];
            dist[w[1]] += gap / range;
        }
    }
    dist
}

fn most_crowded<T: Objectives>(items: &[T]) -> usize {
    let dist = crowding_distances(items);
    let mut best = 0;
    for (i, d) in dist.iter().enumerate() {
        // ties go to the later entry so older members survive
        if *d <= dist[best] {
            best = i;
        }
    }
    best
}

/// Keeps exactly the points no other point dominates, with duplicates
/// collapsed to their first occurrence. Output keeps input order.
pub fn nondominated_filter<T: Objectives>(points: Vec<T>) -> Result<ParetoArchive<T>, MooError> {
    let Some(first) = points.first() else {
        return Ok(ParetoArchive::new());
    };
    let dim = first.objectives().len();
    for p in &points {
        if p.objectives().len() != dim {
            return Err(MooError::Dimension {
                expected: dim,
                got: p.objectives().len(),
            });
        }
        if p.objectives().iter().any(|v| !v.is_finite()) {
            return Err(MooError::NonFinite);
        }
    }
    // A dominating point is lexicographically smaller, so after a stable
    // sort every point only needs checking against the survivors before it.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lexicographic(points[a].objectives(), points[b].objectives()));
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let p = points[i].objectives();
        let beaten = kept.iter().any(|&k| {
            let q = points[k].objectives();
            q == p || dominates_unchecked(q, p)
        });
        if !beaten {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    let n_offered = points.len();
    let mut keep = vec![false; n_offered];
    for &k in &kept {
        keep[k] = true;
    }
    let entries: Vec<T> = points
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect();
    Ok(ParetoArchive {
        stats: ArchiveStats {
            offered: n_offered,
            accepted: entries.len(),
            displaced: 0,
            pruned: 0,
        },
        entries,
        capacity: None,
    })
}
