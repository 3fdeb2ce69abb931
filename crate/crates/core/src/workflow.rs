//! End-to-end optimization runs and their front files.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::io::{write_front_csv, FrontRow, IoError};
use crate::moo::{
    ideal_point, normalize_front, pareto_search, AxisScaling, BoxConstraints, MooError,
    SearchDiagnostics, SearchOptions,
};
use crate::network::{ObjectiveMode, Scenario, SpeedLimitPolicy};
use crate::objectives::{Evaluator, ObjectiveError, PolicyEvaluation};

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Moo(#[from] MooError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl From<std::io::Error> for WorkflowError {
    fn from(e: std::io::Error) -> Self {
        WorkflowError::Io(IoError::Io(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub mode: ObjectiveMode,
    pub delta: f64,
    pub seed: u64,
    /// Evaluations for the front search.
    pub budget: usize,
    /// Evaluations for each single-objective ideal search; `None` means
    /// `max(budget / 4, 50)`.
    pub ideal_budget: Option<usize>,
    pub jobs: usize,
    pub capacity: Option<usize>,
}

impl OptimizeConfig {
    pub fn new(mode: ObjectiveMode, delta: f64, seed: u64, budget: usize) -> Self {
        OptimizeConfig {
            mode,
            delta,
            seed,
            budget,
            ideal_budget: None,
            jobs: 1,
            capacity: None,
        }
    }

    fn search_options(&self, budget: usize) -> SearchOptions {
        SearchOptions {
            max_evaluations: budget,
            seed: self.seed,
            jobs: self.jobs,
            capacity: self.capacity,
            ..SearchOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationRun {
    pub mode: ObjectiveMode,
    pub delta: f64,
    pub road_ids: Vec<u32>,
    /// Front members ordered by their objective vectors.
    pub front: Vec<PolicyEvaluation>,
    pub ideal: Vec<f64>,
    pub normalized: Vec<Vec<f64>>,
    pub diagnostics: SearchDiagnostics,
}

/// Axis treatment used for normalized fronts: objectives are divided by
/// their ideal values, except a queue axis whose ideal is zero.
pub fn front_scaling(mode: ObjectiveMode) -> Vec<AxisScaling> {
    match mode {
        ObjectiveMode::TwoObjective => vec![AxisScaling::Divide, AxisScaling::Divide],
        ObjectiveMode::ThreeObjective => vec![
            AxisScaling::Divide,
            AxisScaling::Divide,
            AxisScaling::DivideUnlessZero,
        ],
    }
}

/// Box of admissible policies of a scenario.
pub fn policy_box(scenario: &Scenario) -> Result<BoxConstraints, MooError> {
    let (lo, hi) = scenario.bounds();
    BoxConstraints::new(lo, hi)
}

/// Searches the Pareto front of `evaluator`'s scenario under the mode and
/// idle weight in `cfg`, then normalizes it by the ideal vector.
pub fn optimize(evaluator: &Evaluator, cfg: &OptimizeConfig) -> Result<OptimizationRun, WorkflowError> {
    let evaluator = evaluator.clone().with_objectives(cfg.delta, cfg.mode);
    let bounds = policy_box(evaluator.scenario())?;
    let eval = |x: &[f64]| evaluator.evaluate(&SpeedLimitPolicy::new(x.to_vec()));

    let (archive, diagnostics) = pareto_search(eval, &bounds, &cfg.search_options(cfg.budget))?;
    let mut front: Vec<PolicyEvaluation> = archive.into_entries().into_iter().map(|p| p.value).collect();
    front.sort_by(|a, b| {
        let (a, b) = (a.objectives.as_slice(), b.objectives.as_slice());
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let ideal_budget = cfg.ideal_budget.unwrap_or((cfg.budget / 4).max(50));
    let mut ideal = ideal_point(eval, &bounds, &cfg.search_options(ideal_budget))?;
    // the front search may have found better extremes than the scalar runs
    for p in &front {
        for (best, v) in ideal.iter_mut().zip(p.objectives.as_slice()) {
            *best = best.min(*v);
        }
    }
    let points: Vec<Vec<f64>> = front.iter().map(|p| p.objectives.as_slice().to_vec()).collect();
    let normalized = normalize_front(&points, &ideal, &front_scaling(cfg.mode))?;
    Ok(OptimizationRun {
        mode: cfg.mode,
        delta: cfg.delta,
        road_ids: evaluator.scenario().roads.iter().map(|r| r.id).collect(),
        front,
        ideal,
        normalized,
        diagnostics,
    })
}

/// Per-road `(id, min, max)` of the speed limits across the front.
pub fn speed_limit_ranges(run: &OptimizationRun) -> Vec<(u32, f64, f64)> {
    run.road_ids
        .iter()
        .enumerate()
        .map(|(e, &id)| {
            let (lo, hi) = run.front.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.policy.v_max[e]), hi.max(p.policy.v_max[e]))
            });
            (id, lo, hi)
        })
        .collect()
}

pub fn front_rows(front: &[PolicyEvaluation]) -> Vec<FrontRow> {
    front
        .iter()
        .map(|p| FrontRow {
            policy: p.policy.v_max.clone(),
            j_flow: p.j_flow,
            j_diff: p.j_diff,
            j_queue: p.j_queue,
            j_poll: p.j_poll,
        })
        .collect()
}

/// Column names of the normalized objectives.
pub fn normalized_header(mode: ObjectiveMode) -> Vec<String> {
    let names: &[&str] = match mode {
        ObjectiveMode::TwoObjective => &["flow_norm", "poll_norm"],
        ObjectiveMode::ThreeObjective => &["flow_norm", "diff_norm", "queue_norm"],
    };
    names.iter().map(|s| s.to_string()).collect()
}

/// Writes `front.csv`, `front_normalized.csv` and `speed_limit_ranges.csv`
/// into `dir` and returns their paths.
pub fn write_front_files(dir: &Path, run: &OptimizationRun) -> Result<Vec<PathBuf>, WorkflowError> {
    fs::create_dir_all(dir)?;
    let rows = front_rows(&run.front);
    let front = dir.join("front.csv");
    write_front_csv(BufWriter::new(fs::File::create(&front)?), &rows, &run.road_ids, &[], &[])?;

    let normalized = dir.join("front_normalized.csv");
    write_front_csv(
        BufWriter::new(fs::File::create(&normalized)?),
        &rows,
        &run.road_ids,
        &normalized_header(run.mode),
        &run.normalized,
    )?;

    let ranges = dir.join("speed_limit_ranges.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(fs::File::create(&ranges)?));
    w.write_record(["road", "v_min", "v_max"]).map_err(IoError::from)?;
    for (id, lo, hi) in speed_limit_ranges(run) {
        w.write_record([id.to_string(), lo.to_string(), hi.to_string()])
            .map_err(IoError::from)?;
    }
    w.flush()?;
    Ok(vec![front, normalized, ranges])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Scenario {
        let mut s = Scenario::sample();
        s.horizon = 0.5;
        s.n_time = 61;
        s.n_grid = 30;
        s.dispersion.mu = 1e-3;
        s
    }

    #[test]
    fn run_produces_consistent_front() {
        let ev = Evaluator::new(tiny()).unwrap();
        let run = optimize(&ev, &OptimizeConfig::new(ObjectiveMode::TwoObjective, 0.0, 1, 60)).unwrap();
        assert!(!run.front.is_empty());
        assert_eq!(run.front.len(), run.normalized.len());
        for (p, n) in run.front.iter().zip(&run.normalized) {
            assert!(n[0] <= 1.0 + 1e-12 && n[1] >= 1.0 - 1e-12, "{n:?}");
            assert_eq!(p.j_poll, p.j_diff);
        }
        let ranges = speed_limit_ranges(&run);
        assert_eq!(ranges.len(), 6);
        assert!(ranges.iter().all(|(_, lo, hi)| 0.25 <= *lo && lo <= hi && *hi <= 2.0));
    }

    #[test]
    fn three_objective_columns() {
        let ev = Evaluator::new(tiny()).unwrap();
        let run = optimize(&ev, &OptimizeConfig::new(ObjectiveMode::ThreeObjective, 0.0, 1, 40)).unwrap();
        assert!(run.front.iter().all(|p| p.objectives.len() == 3));
        assert_eq!(run.normalized[0].len(), 3);
    }
}
