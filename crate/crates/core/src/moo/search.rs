use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::archive::{ArchiveStats, Objectives, ParetoArchive};
use super::MooError;

/// Box `lower ≤ x ≤ upper` of admissible decision vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraints {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxConstraints {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, MooError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(MooError::EmptyBox);
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(MooError::EmptyBox);
        }
        Ok(BoxConstraints { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) / 2.0)
            .collect()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(i, v)| self.lower[i] <= *v && *v <= self.upper[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub max_evaluations: usize,
    /// Initial mesh as a fraction of each coordinate's range.
    pub initial_mesh: f64,
    pub expansion: f64,
    pub contraction: f64,
    /// Search stops once every archive member's mesh is below this fraction.
    pub min_mesh: f64,
    pub seed: u64,
    /// Seed population size; `None` means `4d + 2`.
    pub initial_population: Option<usize>,
    /// Optional archive cap enforced by crowding-distance pruning.
    pub capacity: Option<usize>,
    /// Worker threads for poll evaluations; 1 evaluates serially.
    pub jobs: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_evaluations: 1000,
            initial_mesh: 0.25,
            expansion: 2.0,
            contraction: 0.5,
            min_mesh: 1e-3,
            seed: 0,
            initial_population: None,
            capacity: None,
            jobs: 1,
        }
    }
}

impl SearchOptions {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // the negations also reject NaN
    pub fn validate(&self) -> Result<(), MooError> {
        let bad = |what: &str| Err(MooError::Options(what.to_string()));
        if self.max_evaluations == 0 {
            return Err(MooError::ZeroBudget);
        }
        if !(self.expansion > 1.0) {
            return bad("expansion factor must exceed 1");
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return bad("contraction factor must lie in (0, 1)");
        }
        if !(self.initial_mesh > 0.0) || !(self.min_mesh > 0.0) {
            return bad("mesh sizes must be positive");
        }
        if self.initial_population == Some(0) || self.capacity == Some(0) || self.jobs == 0 {
            return bad("counts must be positive");
        }
        Ok(())
    }
}

/// An evaluated decision vector together with its poll state.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchPoint<P> {
    pub x: Vec<f64>,
    pub value: P,
    /// Mesh size as a fraction of the box range.
    pub mesh: f64,
    pub polls: usize,
}

impl<P: Objectives> Objectives for SearchPoint<P> {
    fn objectives(&self) -> &[f64] {
        self.value.objectives()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    MeshConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchDiagnostics {
    pub evaluations: usize,
    pub iterations: usize,
    /// Largest mesh fraction left in the archive.
    pub final_mesh: f64,
    pub archive_size: usize,
    pub stop_reason: StopReason,
    pub archive: ArchiveStats,
}

/// Bit-exact key used to skip re-evaluating a decision vector.
fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

fn seeds(bounds: &BoxConstraints, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = bounds.dim();
    let mut out = vec![bounds.lower.clone(), bounds.upper.clone(), bounds.center()];
    // random corners other than the all-lower and all-upper ones
    for _ in 0..2 * d {
        let corner: Vec<f64> = (0..d)
            .map(|i| {
                if rng.gen::<bool>() {
                    bounds.upper[i]
                } else {
                    bounds.lower[i]
                }
            })
            .collect();
        out.push(corner);
    }
    while out.len() < size {
        out.push(
            (0..d)
                .map(|i| bounds.lower[i] + rng.gen::<f64>() * bounds.range(i))
                .collect(),
        );
    }
    out.truncate(size);
    out
}

fn evaluate_batch<P, E, F>(
    evaluate: &F,
    points: &[Vec<f64>],
    pool: Option<&rayon::ThreadPool>,
) -> Result<Vec<P>, MooError>
where
    P: Send,
    E: std::error::Error + Send + Sync + 'static,
    F: Fn(&[f64]) -> Result<P, E> + Sync,
{
    let results: Vec<Result<P, E>> = match pool {
        Some(pool) => pool.install(|| points.par_iter().map(|x| evaluate(x)).collect()),
        None => points.iter().map(|x| evaluate(x)).collect(),
    };
    results
        .into_iter()
        .map(|r| r.map_err(|e| MooError::Evaluation(Box::new(e))))
        .collect()
}

/// Picks the member to poll next: largest mesh, then fewest polls, then the
/// lexicographically smallest objective vector.
fn select<P: Objectives>(members: &[SearchPoint<P>], min_mesh: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, m) in members.iter().enumerate() {
        if m.mesh < min_mesh {
            continue;
        }
        best = Some(match best {
            None => i,
            Some(b) => {
                let o = &members[b];
                let better = m
                    .mesh
                    .total_cmp(&o.mesh)
                    .then(o.polls.cmp(&m.polls))
                    .then_with(|| {
                        o.objectives()
                            .iter()
                            .zip(m.objectives())
                            .map(|(a, b)| a.total_cmp(b))
                            .find(|c| c.is_ne())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    });
                if better.is_gt() {
                    i
                } else {
                    b
                }
            }
        });
    }
    best
}

/// Multi-directional pattern search for the Pareto set of `evaluate` over
/// `bounds`.
///
/// Seeds the archive with box corners, the center and random points, then
/// repeatedly polls one archive member along `±` coordinate directions.
/// Poll points are clipped to the box. A member whose poll adds anything to
/// the archive has its mesh expanded; otherwise the mesh is contracted.
/// New members inherit the mesh of the member that found them.
///
/// `observer` sees the archive after seeding and after every poll.
pub fn pareto_search_observed<P, E, F, O>(
    evaluate: F,
    bounds: &BoxConstraints,
    opts: &SearchOptions,
    mut observer: O,
) -> Result<(ParetoArchive<SearchPoint<P>>, SearchDiagnostics), MooError>
where
    P: Objectives + Clone + Send,
    E: std::error::Error + Send + Sync + 'static,
    F: Fn(&[f64]) -> Result<P, E> + Sync,
    O: FnMut(&ParetoArchive<SearchPoint<P>>),
{
    opts.validate()?;
    let pool = if opts.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.jobs)
                .build()
                .map_err(|e| MooError::Options(e.to_string()))?,
        )
    } else {
        None
    };
    let d = bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut archive = match opts.capacity {
        Some(cap) => ParetoArchive::with_capacity(cap),
        None => ParetoArchive::new(),
    };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut evaluations = 0;

    let mut initial: Vec<Vec<f64>> = seeds(bounds, opts.initial_population.unwrap_or(4 * d + 2), &mut rng)
        .into_iter()
        .filter(|x| seen.insert(key(x)))
        .collect();
    initial.truncate(opts.max_evaluations);
    let values = evaluate_batch(&evaluate, &initial, pool.as_ref())?;
    evaluations += initial.len();
    for (x, value) in initial.into_iter().zip(values) {
        archive.insert(SearchPoint {
            x,
            value,
            mesh: opts.initial_mesh,
            polls: 0,
        })?;
    }
    observer(&archive);

    let mut iterations = 0;
    let stop_reason = loop {
        if evaluations >= opts.max_evaluations {
            break StopReason::Budget;
        }
        let Some(idx) = select(archive.entries(), opts.min_mesh) else {
            break StopReason::MeshConverged;
        };
        iterations += 1;
        let (center, mesh) = {
            let m = &archive.entries()[idx];
            (m.x.clone(), m.mesh)
        };
        let mut polls = Vec::with_capacity(2 * d);
        let mut directions: Vec<(usize, f64)> = (0..d).flat_map(|i| [(i, 1.0), (i, -1.0)]).collect();
        directions.shuffle(&mut rng);
        for (i, sign) in directions {
            let mut x = center.clone();
            x[i] += sign * mesh * bounds.range(i);
            bounds.clip(&mut x);
            if x != center && seen.insert(key(&x)) {
                polls.push(x);
            }
        }
        polls.truncate(opts.max_evaluations - evaluations);
        let values = evaluate_batch(&evaluate, &polls, pool.as_ref())?;
        evaluations += polls.len();
        let mut success = false;
        for (x, value) in polls.into_iter().zip(values) {
            success |= archive.insert(SearchPoint {
                x,
                value,
                mesh,
                polls: 0,
            })?;
        }
        // the polled member may have been pruned by the capacity cap
        if let Some(m) = archive.entries_mut().iter_mut().find(|m| m.x == center) {
            m.polls += 1;
            m.mesh = if success {
                (mesh * opts.expansion).min(opts.initial_mesh)
            } else {
                mesh * opts.contraction
            };
        }
        observer(&archive);
    };

    let diagnostics = SearchDiagnostics {
        evaluations,
        iterations,
        final_mesh: archive.iter().map(|m| m.mesh).fold(0.0, f64::max),
        archive_size: archive.len(),
        stop_reason,
        archive: archive.stats(),
    };
    Ok((archive, diagnostics))
}

/// [`pareto_search_observed`] without an observer.
pub fn pareto_search<P, E, F>(
    evaluate: F,
    bounds: &BoxConstraints,
    opts: &SearchOptions,
) -> Result<(ParetoArchive<SearchPoint<P>>, SearchDiagnostics), MooError>
where
    P: Objectives + Clone + Send,
    E: std::error::Error + Send + Sync + 'static,
    F: Fn(&[f64]) -> Result<P, E> + Sync,
{
    pareto_search_observed(evaluate, bounds, opts, |_| {})
}

#[derive(Debug, Clone)]
struct Scalar(Vec<f64>);

impl Objectives for Scalar {
    fn objectives(&self) -> &[f64] {
        &self.0
    }
}

/// Best value of every objective component, each found by a separate
/// single-objective run of the same search.
pub fn ideal_point<P, E, F>(
    evaluate: F,
    bounds: &BoxConstraints,
    opts: &SearchOptions,
) -> Result<Vec<f64>, MooError>
where
    P: Objectives + Send,
    E: std::error::Error + Send + Sync + 'static,
    F: Fn(&[f64]) -> Result<P, E> + Sync,
{
    opts.validate()?;
    let probe = evaluate(&bounds.center()).map_err(|e| MooError::Evaluation(Box::new(e)))?;
    let dim = probe.objectives().len();
    let mut ideal = Vec::with_capacity(dim);
    for m in 0..dim {
        let single = |x: &[f64]| evaluate(x).map(|p| Scalar(vec![p.objectives()[m]]));
        let (archive, _) = pareto_search(single, bounds, opts)?;
        let best = archive
            .iter()
            .map(|p| p.value.0[0])
            .fold(f64::INFINITY, f64::min);
        ideal.push(best);
    }
    Ok(ideal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moo::archive::dominates_unchecked;
    use crate::moo::hypervolume;
    use std::convert::Infallible;

    fn two_parabolas(x: &[f64]) -> Result<Vec<f64>, Infallible> {
        Ok(vec![x[0] * x[0], (x[0] - 1.0) * (x[0] - 1.0)])
    }

    fn unit(d: usize) -> BoxConstraints {
        BoxConstraints::new(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    fn opts(budget: usize, seed: u64) -> SearchOptions {
        SearchOptions {
            max_evaluations: budget,
            seed,
            ..SearchOptions::default()
        }
    }

    #[test]
    fn parabolas_sweep_the_interval() {
        let (archive, diag) = pareto_search(two_parabolas, &unit(1), &opts(500, 1)).unwrap();
        assert!(diag.evaluations <= 500);
        let mut xs: Vec<f64> = archive.iter().map(|p| p.x[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs[0], 0.0);
        assert_eq!(*xs.last().unwrap(), 1.0);
        let gap = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(gap < 0.1, "gap {gap}");
    }

    #[test]
    fn aligned_objectives_converge_to_zero() {
        let f = |x: &[f64]| -> Result<Vec<f64>, Infallible> { Ok(vec![x[0], x[0]]) };
        let (archive, _) = pareto_search(f, &unit(1), &opts(200, 3)).unwrap();
        assert_eq!(archive.len(), 1);
        assert!(archive.entries()[0].x[0] < 1e-3);
    }

    #[test]
    fn identity_objectives_reach_the_origin() {
        let f = |x: &[f64]| -> Result<Vec<f64>, Infallible> { Ok(vec![x[0], x[1]]) };
        let (archive, diag) = pareto_search(f, &unit(2), &opts(300, 4)).unwrap();
        let worst = archive
            .iter()
            .map(|p| p.x[0].max(p.x[1]))
            .fold(0.0, f64::max);
        assert!(worst <= 2.0 * diag.final_mesh.max(1e-3), "{worst}");
    }

    #[test]
    fn fixed_seed_is_reproducible_and_threads_do_not_matter() {
        let run = |jobs| {
            let o = SearchOptions {
                jobs,
                ..opts(300, 9)
            };
            let (a, d) = pareto_search(two_parabolas, &unit(1), &o).unwrap();
            (a.into_entries(), d)
        };
        let (a, da) = run(1);
        let (b, db) = run(1);
        let (c, _) = run(3);
        assert_eq!(a, b);
        assert_eq!(da, db);
        assert_eq!(a, c);
    }

    #[test]
    fn hypervolume_never_decreases() {
        let mut history = Vec::new();
        let reference = [1.1, 1.1];
        pareto_search_observed(two_parabolas, &unit(1), &opts(300, 2), |a| {
            let pts: Vec<Vec<f64>> = a.iter().map(|p| p.value.clone()).collect();
            history.push(hypervolume(&pts, &reference).unwrap());
        })
        .unwrap();
        assert!(history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn results_stay_in_the_box_and_nondominated() {
        let b = BoxConstraints::new(vec![0.25, -1.0, 2.0], vec![2.0, 1.0, 2.0]).unwrap();
        let f = |x: &[f64]| -> Result<Vec<f64>, Infallible> {
            Ok(vec![x[0] + x[1] * x[1], (x[0] - 2.0).powi(2) - x[1]])
        };
        let (archive, _) = pareto_search(f, &b, &opts(400, 5)).unwrap();
        for p in archive.iter() {
            assert!(b.contains(&p.x));
            for q in archive.iter() {
                assert!(!dominates_unchecked(&p.value, &q.value));
            }
        }
    }

    #[test]
    fn ideal_point_of_parabolas() {
        let ideal = ideal_point(two_parabolas, &unit(1), &opts(200, 0)).unwrap();
        assert!(ideal[0].abs() < 1e-6 && ideal[1].abs() < 1e-6, "{ideal:?}");
        let constant = |_: &[f64]| -> Result<Vec<f64>, Infallible> { Ok(vec![4.5]) };
        assert_eq!(ideal_point(constant, &unit(2), &opts(50, 0)).unwrap(), vec![4.5]);
    }

    #[test]
    fn zero_budget_is_an_error() {
        assert!(matches!(
            pareto_search(two_parabolas, &unit(1), &opts(0, 0)),
            Err(MooError::ZeroBudget)
        ));
        assert!(BoxConstraints::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn capacity_bounds_the_archive() {
        let o = SearchOptions {
            capacity: Some(10),
            ..opts(300, 1)
        };
        let (archive, diag) = pareto_search(two_parabolas, &unit(1), &o).unwrap();
        assert!(archive.len() <= 10);
        assert!(diag.archive.pruned > 0);
    }
}
