//! Discrete objective functionals and the policy evaluation pipeline.
//!
//! All time integrals use the right-rectangle rule over `k = 1, …, N_t`.
//! Space integrals over the control area use the grid points
//! `i, j = 1, …, N_h`.

use std::fmt;

use thiserror::Error;

use crate::dispersion::{solve_adjoint, AdjointField, ConcentrationField, DispersionError};
use crate::emission::{emission_field, rasterize_network, EmissionError, EmissionField, RasterMap};
use crate::network::{InitialConcentration, ObjectiveMode, Scenario, SpeedLimitPolicy};
use crate::traffic::{simulate_traffic, FluxParams, TrafficError, TrafficTrajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Emission(#[from] EmissionError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error("{0}")]
    GridMismatch(String),
}

/// Accumulated traffic flow `Δt Σ_e Δs_e Σ_k Σ_n Q_e(ρ^k_{e,n})`.
pub fn j_flow(
    traj: &TrafficTrajectory,
    policy: &SpeedLimitPolicy,
    scenario: &Scenario,
) -> Result<f64, ObjectiveError> {
    check_trajectory(traj, scenario)?;
    if policy.v_max.len() != scenario.roads.len() {
        return Err(ObjectiveError::GridMismatch(format!(
            "policy has {} speed limits for {} roads",
            policy.v_max.len(),
            scenario.roads.len()
        )));
    }
    let mut total = 0.0;
    for (e, road) in scenario.roads.iter().enumerate() {
        let params = FluxParams::new(policy.v_max[e], road.rho_max);
        let mut road_sum = 0.0;
        for snap in &traj.snapshots[1..] {
            road_sum += snap.densities[e].iter().map(|&r| params.flux(r)).sum::<f64>();
        }
        total += scenario.ds(road) * road_sum;
    }
    Ok(scenario.dt() * total)
}

/// Time-averaged total queue length `(Δt/T) Σ_a Σ_k ℓ^k_a`.
pub fn j_queue(traj: &TrafficTrajectory, scenario: &Scenario) -> Result<f64, ObjectiveError> {
    check_trajectory(traj, scenario)?;
    let mut total = 0.0;
    for a in 0..scenario.access.len() {
        total += traj.snapshots[1..].iter().map(|s| s.queues[a]).sum::<f64>();
    }
    Ok(scenario.dt() / scenario.horizon * total)
}

/// Average pollutant mass through the adjoint:
/// `Δt h² Σ_k Σ_{i,j} ξ^k p^k + h² Σ_{i,j} φ₀ p^0`.
pub fn j_diff_adjoint(
    emission: &EmissionField,
    adjoint: &AdjointField,
    phi0: &InitialConcentration,
    scenario: &Scenario,
) -> Result<f64, ObjectiveError> {
    let grid = scenario.grid();
    for (what, series) in [("emission", &emission.values), ("adjoint", &adjoint.values)] {
        if series.grid != grid || series.n_time != scenario.n_time {
            return Err(ObjectiveError::GridMismatch(format!(
                "{what} field does not match the scenario grid"
            )));
        }
    }
    let h2 = grid.h() * grid.h();
    let mut source = 0.0;
    for k in 1..=scenario.n_time {
        source += interior_dot(grid, emission.values.slice(k), adjoint.values.slice(k));
    }
    let initial = if phi0.is_zero() {
        0.0
    } else {
        let p0 = adjoint.values.slice(0);
        let mut sum = 0.0;
        for i in 1..grid.per_axis() {
            for j in 1..grid.per_axis() {
                let idx = grid.index(i, j);
                sum += phi0.value(idx) * p0[idx];
            }
        }
        sum
    };
    Ok(scenario.dt() * h2 * source + h2 * initial)
}

/// Average pollutant mass from a forward concentration field:
/// `(Δt h² / (T|Ω|)) Σ_k Σ_{i,j} φ^k`.
pub fn j_diff_forward(conc: &ConcentrationField, scenario: &Scenario) -> Result<f64, ObjectiveError> {
    let grid = scenario.grid();
    if conc.values.grid != grid || conc.values.n_time != scenario.n_time {
        return Err(ObjectiveError::GridMismatch(
            "concentration field does not match the scenario grid".into(),
        ));
    }
    let mut sum = 0.0;
    for k in 1..=scenario.n_time {
        let slice = conc.values.slice(k);
        for i in 1..grid.per_axis() {
            for j in 1..grid.per_axis() {
                sum += slice[grid.index(i, j)];
            }
        }
    }
    let h2 = grid.h() * grid.h();
    Ok(scenario.dt() * h2 / (scenario.horizon * scenario.area()) * sum)
}

fn interior_dot(grid: crate::dispersion::Grid2D, a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 1..grid.per_axis() {
        for j in 1..grid.per_axis() {
            let idx = grid.index(i, j);
            sum += a[idx] * b[idx];
        }
    }
    sum
}

fn check_trajectory(traj: &TrafficTrajectory, scenario: &Scenario) -> Result<(), ObjectiveError> {
    if traj.snapshots.len() != scenario.n_time + 1 {
        return Err(ObjectiveError::GridMismatch(format!(
            "trajectory has {} time levels, scenario needs {}",
            traj.snapshots.len(),
            scenario.n_time + 1
        )));
    }
    let ok = traj.snapshots.iter().all(|s| {
        s.queues.len() == scenario.access.len()
            && s.densities.len() == scenario.roads.len()
            && s.densities.iter().all(|d| d.len() == scenario.n_cells)
    });
    if !ok {
        return Err(ObjectiveError::GridMismatch(
            "trajectory shape does not match the scenario".into(),
        ));
    }
    Ok(())
}

/// Objective values to be minimized. Flow enters negated.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        ObjectiveVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl fmt::Display for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// All objective components of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub policy: SpeedLimitPolicy,
    pub j_flow: f64,
    pub j_diff: f64,
    pub j_queue: f64,
    /// `J_diff + δ J_queue`.
    pub j_poll: f64,
    pub objectives: ObjectiveVector,
}

impl PolicyEvaluation {
    fn assemble(
        policy: SpeedLimitPolicy,
        j_flow: f64,
        j_diff: f64,
        j_queue: f64,
        delta: f64,
        mode: ObjectiveMode,
    ) -> Self {
        let j_poll = j_diff + delta * j_queue;
        let objectives = match mode {
            ObjectiveMode::TwoObjective => ObjectiveVector(vec![-j_flow, j_poll]),
            ObjectiveMode::ThreeObjective => ObjectiveVector(vec![-j_flow, j_diff, j_queue]),
        };
        PolicyEvaluation {
            policy,
            j_flow,
            j_diff,
            j_queue,
            j_poll,
            objectives,
        }
    }
}

/// Intermediate results of one evaluation, kept for export.
#[derive(Debug, Clone)]
pub struct EvaluationDetail {
    pub evaluation: PolicyEvaluation,
    pub trajectory: TrafficTrajectory,
    pub emission: EmissionField,
}

/// Scenario with its raster map and adjoint, ready to evaluate many
/// policies. Evaluation only reruns the traffic model.
#[derive(Debug, Clone)]
pub struct Evaluator {
    scenario: Scenario,
    raster: RasterMap,
    adjoint: AdjointField,
}

impl Evaluator {
    /// Solves the adjoint for `scenario`.
    pub fn new(scenario: Scenario) -> Result<Self, ObjectiveError> {
        let adjoint = solve_adjoint(&scenario)?;
        Self::with_adjoint(scenario, adjoint)
    }

    pub fn with_adjoint(scenario: Scenario, adjoint: AdjointField) -> Result<Self, ObjectiveError> {
        if adjoint.values.grid != scenario.grid() || adjoint.values.n_time != scenario.n_time {
            return Err(ObjectiveError::GridMismatch(
                "adjoint field does not match the scenario grid".into(),
            ));
        }
        let raster = rasterize_network(&scenario);
        Ok(Evaluator {
            scenario,
            raster,
            adjoint,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn adjoint(&self) -> &AdjointField {
        &self.adjoint
    }

    pub fn raster(&self) -> &RasterMap {
        &self.raster
    }

    /// Same evaluator with a different idle weight or objective mode.
    pub fn with_objectives(mut self, delta: f64, mode: ObjectiveMode) -> Self {
        self.scenario.delta = delta;
        self.scenario.mode = mode;
        self
    }

    pub fn evaluate(&self, policy: &SpeedLimitPolicy) -> Result<PolicyEvaluation, ObjectiveError> {
        Ok(self.evaluate_detailed(policy)?.evaluation)
    }

    pub fn evaluate_detailed(&self, policy: &SpeedLimitPolicy) -> Result<EvaluationDetail, ObjectiveError> {
        let s = &self.scenario;
        let trajectory = simulate_traffic(s, policy)?;
        let emission = emission_field(&trajectory, &self.raster, s, policy)?;
        let flow = j_flow(&trajectory, policy, s)?;
        let queue = j_queue(&trajectory, s)?;
        let diff = j_diff_adjoint(&emission, &self.adjoint, &s.phi0, s)?;
        Ok(EvaluationDetail {
            evaluation: PolicyEvaluation::assemble(policy.clone(), flow, diff, queue, s.delta, s.mode),
            trajectory,
            emission,
        })
    }
}

/// One-off evaluation against a precomputed adjoint.
pub fn evaluate_policy(
    scenario: &Scenario,
    policy: &SpeedLimitPolicy,
    adjoint: &AdjointField,
) -> Result<PolicyEvaluation, ObjectiveError> {
    Evaluator::with_adjoint(scenario.clone(), adjoint.clone())?.evaluate(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{GridSeries, Grid2D};
    use crate::network::load_scenario;
    use crate::traffic::TrafficState;

    fn one_road(horizon: f64, n_time: usize) -> Scenario {
        let text = format!(
            r#"{{
              "horizon": {horizon},
              "domain": {{ "side": 2.0, "n_grid": 20 }},
              "roads": [ {{ "id": 1, "start": [0.5, 1.0], "end": [1.5, 1.0], "width": 0.1,
                           "rho_max": 1.0, "rho0": 0.0, "v_min": 0.5, "v_max": 2.0 }} ],
              "access": [ {{ "road": 1, "inflow": 0.1 }} ],
              "exits": [1],
              "dispersion": {{ "mu": 1e-2, "wind": [0.0, 0.0] }},
              "emission": {{ "theta": 0.5 }},
              "discretization": {{ "n_cells": 20, "n_time": {n_time} }}
            }}"#
        );
        load_scenario(&text).unwrap()
    }

    fn constant_traj(s: &Scenario, rho: f64, queue: impl Fn(f64) -> f64) -> TrafficTrajectory {
        let snapshots = (0..=s.n_time)
            .map(|k| {
                let t = k as f64 * s.dt();
                TrafficState {
                    densities: vec![vec![rho; s.n_cells]; s.roads.len()],
                    queues: vec![queue(t); s.access.len()],
                    time: t,
                }
            })
            .collect();
        TrafficTrajectory {
            snapshots,
            flows: Vec::new(),
            substeps: 1,
        }
    }

    #[test]
    fn flow_examples() {
        let s = one_road(5.0, 100);
        let p = SpeedLimitPolicy::new(vec![1.0]);
        assert_eq!(j_flow(&constant_traj(&s, 0.0, |_| 0.0), &p, &s).unwrap(), 0.0);
        assert_eq!(j_flow(&constant_traj(&s, 1.0, |_| 0.0), &p, &s).unwrap(), 0.0);
        let v = j_flow(&constant_traj(&s, 0.5, |_| 0.0), &p, &s).unwrap();
        assert!((v - 1.25).abs() < 1e-12, "{v}");
    }

    #[test]
    fn queue_examples() {
        let s = one_road(5.0, 500);
        assert_eq!(j_queue(&constant_traj(&s, 0.0, |_| 0.0), &s).unwrap(), 0.0);
        let c = j_queue(&constant_traj(&s, 0.0, |_| 2.0), &s).unwrap();
        assert!((c - 2.0).abs() < 1e-12);
        let lin = j_queue(&constant_traj(&s, 0.0, |t| t), &s).unwrap();
        // right rectangles overshoot T/2 by Δt/2
        assert!((lin - 2.5).abs() <= s.dt() / 2.0 + 1e-12, "{lin}");
    }

    #[test]
    fn diff_zero_and_phi0_shift() {
        let s = one_road(1.0, 200);
        let grid = Grid2D::new(s.side, s.n_grid);
        let mut p = GridSeries::zeros(grid, s.n_time);
        p.slice_mut(0).fill(0.5);
        let adjoint = AdjointField { values: p };
        let xi = EmissionField {
            values: GridSeries::zeros(grid, s.n_time),
        };
        assert_eq!(
            j_diff_adjoint(&xi, &adjoint, &InitialConcentration::Constant(0.0), &s).unwrap(),
            0.0
        );
        let shift = j_diff_adjoint(&xi, &adjoint, &InitialConcentration::Constant(2.0), &s).unwrap();
        let h2 = s.h() * s.h();
        assert!((shift - h2 * 20.0 * 20.0 * 2.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn forward_average_of_constant() {
        let s = one_road(1.0, 200);
        let grid = s.grid();
        let zero = ConcentrationField {
            values: GridSeries::zeros(grid, s.n_time),
        };
        assert_eq!(j_diff_forward(&zero, &s).unwrap(), 0.0);
        let c = 3.0;
        let data = vec![c; grid.len() * (s.n_time + 1)];
        let conc = ConcentrationField {
            values: GridSeries::from_data(grid, s.n_time, data).unwrap(),
        };
        let v = j_diff_forward(&conc, &s).unwrap();
        assert!((v - c).abs() <= c * 1e-12, "{v}");
    }

    #[test]
    fn assembly_by_mode() {
        let p = SpeedLimitPolicy::new(vec![1.0]);
        let e = PolicyEvaluation::assemble(p.clone(), 2.0, 0.3, 0.4, 0.0, ObjectiveMode::TwoObjective);
        assert_eq!(e.objectives.as_slice(), &[-2.0, 0.3]);
        let e = PolicyEvaluation::assemble(p.clone(), 2.0, 0.3, 0.4, 0.5, ObjectiveMode::TwoObjective);
        assert_eq!(e.j_poll, 0.3 + 0.5 * 0.4);
        let e = PolicyEvaluation::assemble(p, 2.0, 0.3, 0.4, 0.5, ObjectiveMode::ThreeObjective);
        assert_eq!(e.objectives.as_slice(), &[-2.0, 0.3, 0.4]);
    }

    #[test]
    fn evaluation_is_deterministic_and_nonnegative() {
        let s = one_road(1.0, 200);
        let ev = Evaluator::new(s).unwrap();
        let p = SpeedLimitPolicy::new(vec![1.2]);
        let a = ev.evaluate(&p).unwrap();
        let b = ev.evaluate(&p).unwrap();
        assert_eq!(a, b);
        assert!(a.j_flow > 0.0 && a.j_diff > 0.0 && a.j_queue == 0.0);
        assert_eq!(a.j_poll, a.j_diff);
    }

    #[test]
    fn phi0_term_does_not_depend_on_policy() {
        let mut s = one_road(1.0, 200);
        let base = Evaluator::new(s.clone()).unwrap();
        s.phi0 = InitialConcentration::Constant(1.0);
        let shifted = Evaluator::new(s).unwrap();
        let d = |ev: &Evaluator, v: f64| ev.evaluate(&SpeedLimitPolicy::new(vec![v])).unwrap().j_diff;
        let shift_a = d(&shifted, 0.6) - d(&base, 0.6);
        let shift_b = d(&shifted, 1.9) - d(&base, 1.9);
        assert!((shift_a - shift_b).abs() < 1e-12 * shift_a.abs().max(1.0));
    }
}
