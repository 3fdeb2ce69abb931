//! Derivative-free multi-objective optimization over box-constrained
//! decision vectors: dominance, nondominated archives, a pattern-search
//! front explorer and front post-processing.

mod archive;
mod hypervolume;
mod search;

use thiserror::Error;

pub use archive::{
    crowding_distances, dominates, nondominated_filter, ArchiveStats, Objectives, ParetoArchive,
};
pub use hypervolume::hypervolume;
pub use search::{
    ideal_point, pareto_search, pareto_search_observed, BoxConstraints, SearchDiagnostics,
    SearchOptions, SearchPoint, StopReason,
};

#[derive(Debug, Error)]
pub enum MooError {
    #[error("objective vectors have different lengths: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("objective vector contains a non-finite value")]
    NonFinite,
    #[error("evaluation budget must be positive")]
    ZeroBudget,
    #[error("box constraints are empty or malformed")]
    EmptyBox,
    #[error("invalid search options: {0}")]
    Options(String),
    #[error("cannot normalize axis {axis}: ideal value is zero")]
    ZeroIdeal { axis: usize },
    #[error("evaluation failed: {0}")]
    Evaluation(Box<dyn std::error::Error + Send + Sync>),
}

/// How [`normalize_front`] treats one objective axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisScaling {
    /// Divide by the ideal value; a zero ideal is an error.
    Divide,
    /// Divide by the ideal value unless it is zero, else keep raw values.
    DivideUnlessZero,
    Keep,
}

/// Divides every objective by its ideal value, axis by axis.
///
/// With objectives `(−J_flow, J_poll)` and ideal `(−max J_flow, min J_poll)`
/// the flow axis becomes `J_flow / max J_flow ≤ 1` and the pollution axis
/// `J_poll / min J_poll ≥ 1`, so the ideal vector maps to `(1, 1)`.
pub fn normalize_front(
    points: &[Vec<f64>],
    ideal: &[f64],
    scaling: &[AxisScaling],
) -> Result<Vec<Vec<f64>>, MooError> {
    if scaling.len() != ideal.len() {
        return Err(MooError::Dimension {
            expected: ideal.len(),
            got: scaling.len(),
        });
    }
    let divisors: Vec<Option<f64>> = scaling
        .iter()
        .zip(ideal)
        .enumerate()
        .map(|(axis, (s, &v))| match s {
            AxisScaling::Keep => Ok(None),
            AxisScaling::DivideUnlessZero if v == 0.0 => Ok(None),
            AxisScaling::DivideUnlessZero => Ok(Some(v)),
            AxisScaling::Divide if v == 0.0 => Err(MooError::ZeroIdeal { axis }),
            AxisScaling::Divide => Ok(Some(v)),
        })
        .collect::<Result<_, _>>()?;
    points
        .iter()
        .map(|p| {
            if p.len() != ideal.len() {
                return Err(MooError::Dimension {
                    expected: ideal.len(),
                    got: p.len(),
                });
            }
            Ok(p.iter()
                .zip(&divisors)
                .map(|(v, d)| d.map_or(*v, |d| v / d))
                .collect())
        })
        .collect()
}
