//! Road network description: geometry inside the control area, junctions,
//! access roads, and the full scenario a simulation runs on.

mod schema;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{DispersionParams, Grid2D};

pub use schema::{load_scenario, serialize_scenario};
pub use validate::{validate_scenario, Finding, ValidationReport};

/// Errors raised while reading or checking a scenario.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
}

impl ScenarioError {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Errors raised by geometric queries and policy checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("arc length {s} outside [0, {length}]")]
    ArcLengthOutOfRange { s: f64, length: f64 },
    #[error("policy has {got} speed limits but the network has {expected} roads")]
    PolicyLength { expected: usize, got: usize },
    #[error("V_{road} {relation} {bound_kind} bound {bound}")]
    Infeasible {
        road: u32,
        relation: &'static str,
        bound_kind: &'static str,
        bound: f64,
    },
    #[error("V_{road} is not a finite positive number")]
    NonPositive { road: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

/// A unidirectional road, embedded in the control area as a straight segment
/// from `start` (arc length 0) to `end` (arc length `length()`).
#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: u32,
    pub start: Point,
    pub end: Point,
    pub width: f64,
    pub rho_max: f64,
    /// Initial density, one value per road cell.
    pub rho0: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
}

impl Road {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    /// Unit tangent of the road, pointing from its tail to its head.
    pub fn direction(&self) -> (f64, f64) {
        let len = self.length();
        ((self.end.x - self.start.x) / len, (self.end.y - self.start.y) / len)
    }

    /// The point `σ(s)` at arc length `s` from the road's tail.
    pub fn point_at(&self, s: f64) -> Result<Point, NetworkError> {
        let length = self.length();
        if !(0.0..=length).contains(&s) {
            return Err(NetworkError::ArcLengthOutOfRange { s, length });
        }
        let (ux, uy) = self.direction();
        Ok(Point::new(self.start.x + s * ux, self.start.y + s * uy))
    }
}

/// Free-function form of [`Road::point_at`].
pub fn point_on_road(road: &Road, s: f64) -> Result<Point, NetworkError> {
    road.point_at(s)
}

/// The three junction types with closed-form coupling.
#[derive(Debug, Clone, PartialEq)]
pub enum Junction {
    OneToOne {
        incoming: u32,
        outgoing: u32,
    },
    /// Diverge; `alpha[j]` is the share of the incoming flow that turns into
    /// `outgoing[j]`.
    OneToTwo {
        incoming: u32,
        outgoing: [u32; 2],
        alpha: [f64; 2],
    },
    /// Merge; `beta[i]` is the priority of `incoming[i]`.
    TwoToOne {
        incoming: [u32; 2],
        outgoing: u32,
        beta: [f64; 2],
    },
}

impl Junction {
    pub fn incoming(&self) -> Vec<u32> {
        match self {
            Junction::OneToOne { incoming, .. } | Junction::OneToTwo { incoming, .. } => {
                vec![*incoming]
            }
            Junction::TwoToOne { incoming, .. } => incoming.to_vec(),
        }
    }

    pub fn outgoing(&self) -> Vec<u32> {
        match self {
            Junction::OneToOne { outgoing, .. } | Junction::TwoToOne { outgoing, .. } => {
                vec![*outgoing]
            }
            Junction::OneToTwo { outgoing, .. } => outgoing.to_vec(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Junction::OneToOne { .. } => "one_to_one",
            Junction::OneToTwo { .. } => "one_to_two",
            Junction::TwoToOne { .. } => "two_to_one",
        }
    }
}

/// Prescribed inflow rate at an access road. A series is piecewise constant
/// on the output time grid; the last value is held past its end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Inflow {
    Constant(f64),
    Series(Vec<f64>),
}

impl Inflow {
    /// Rate on the interval `[t^k, t^{k+1})`.
    pub fn rate_at(&self, k: usize) -> f64 {
        match self {
            Inflow::Constant(q) => *q,
            Inflow::Series(values) => values
                .get(k)
                .or_else(|| values.last())
                .copied()
                .unwrap_or(0.0),
        }
    }

    pub(crate) fn values(&self) -> Vec<f64> {
        match self {
            Inflow::Constant(q) => vec![*q],
            Inflow::Series(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessBoundary {
    pub road: u32,
    pub inflow: Inflow,
    pub initial_queue: f64,
}

/// Initial pollutant concentration on the control-area grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConcentration {
    Constant(f64),
    /// One value per grid point, indexed `i * (n_grid + 1) + j`.
    Grid(Vec<f64>),
}

impl Default for InitialConcentration {
    fn default() -> Self {
        InitialConcentration::Constant(0.0)
    }
}

impl InitialConcentration {
    pub fn value(&self, index: usize) -> f64 {
        match self {
            InitialConcentration::Constant(c) => *c,
            InitialConcentration::Grid(v) => v[index],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            InitialConcentration::Constant(c) => *c == 0.0,
            InitialConcentration::Grid(v) => v.iter().all(|&c| c == 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveMode {
    /// `(-J_flow, J_poll)`.
    #[serde(rename = "2d", alias = "two_objective", alias = "TwoObjective")]
    TwoObjective,
    /// `(-J_flow, J_diff, J_queue)`.
    #[serde(rename = "3d", alias = "three_objective", alias = "ThreeObjective")]
    ThreeObjective,
}

impl fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveMode::TwoObjective => f.write_str("2d"),
            ObjectiveMode::ThreeObjective => f.write_str("3d"),
        }
    }
}

impl std::str::FromStr for ObjectiveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2d" => Ok(ObjectiveMode::TwoObjective),
            "3d" => Ok(ObjectiveMode::ThreeObjective),
            other => Err(format!("unknown objective mode `{other}` (expected 2d or 3d)")),
        }
    }
}

/// Everything needed to simulate traffic, emissions and dispersion and to
/// evaluate the objectives. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub description: Option<String>,
    /// Time horizon `T`.
    pub horizon: f64,
    /// Side length `L` of the square control area `[0, L]²`.
    pub side: f64,
    /// Number of grid intervals `N_h` per axis of the control area.
    pub n_grid: usize,
    pub roads: Vec<Road>,
    pub junctions: Vec<Junction>,
    pub access: Vec<AccessBoundary>,
    pub exits: Vec<u32>,
    pub dispersion: DispersionParams,
    pub phi0: InitialConcentration,
    pub theta: f64,
    pub delta: f64,
    pub mode: ObjectiveMode,
    /// Cells per road `N_s`.
    pub n_cells: usize,
    /// Time steps `N_t`.
    pub n_time: usize,
}

impl Scenario {
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_time as f64
    }

    pub fn h(&self) -> f64 {
        self.side / self.n_grid as f64
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Cell length `Δs` of a road.
    pub fn ds(&self, road: &Road) -> f64 {
        road.length() / self.n_cells as f64
    }

    pub fn grid(&self) -> Grid2D {
        Grid2D::new(self.side, self.n_grid)
    }

    pub fn road_index(&self, id: u32) -> Option<usize> {
        self.roads.iter().position(|r| r.id == id)
    }

    pub fn road(&self, id: u32) -> Option<&Road> {
        self.roads.iter().find(|r| r.id == id)
    }

    /// Lower and upper speed-limit bounds, in road order.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.roads.iter().map(|r| r.v_min).collect(),
            self.roads.iter().map(|r| r.v_max).collect(),
        )
    }

    /// The shipped six-road proof-of-concept scenario.
    pub fn sample() -> Scenario {
        load_scenario(SAMPLE_SCENARIO).expect("bundled scenario is valid")
    }
}

/// JSON text of the bundled proof-of-concept scenario.
pub const SAMPLE_SCENARIO: &str = include_str!("../../data/diamond.json");

/// Speed limits `V_e^max`, one per road in scenario order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedLimitPolicy {
    pub v_max: Vec<f64>,
}

impl SpeedLimitPolicy {
    pub fn new(v_max: Vec<f64>) -> Self {
        SpeedLimitPolicy { v_max }
    }

    pub fn uniform(scenario: &Scenario, v: f64) -> Self {
        SpeedLimitPolicy {
            v_max: vec![v; scenario.roads.len()],
        }
    }

    /// Checks membership in the box of admissible speed limits.
    pub fn check_feasible(&self, scenario: &Scenario) -> Result<(), NetworkError> {
        if self.v_max.len() != scenario.roads.len() {
            return Err(NetworkError::PolicyLength {
                expected: scenario.roads.len(),
                got: self.v_max.len(),
            });
        }
        for (road, &v) in scenario.roads.iter().zip(&self.v_max) {
            if !(v.is_finite() && v > 0.0) {
                return Err(NetworkError::NonPositive { road: road.id });
            }
            if v < road.v_min {
                return Err(NetworkError::Infeasible {
                    road: road.id,
                    relation: "is below",
                    bound_kind: "lower",
                    bound: road.v_min,
                });
            }
            if v > road.v_max {
                return Err(NetworkError::Infeasible {
                    road: road.id,
                    relation: "exceeds",
                    bound_kind: "upper",
                    bound: road.v_max,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(start: [f64; 2], end: [f64; 2]) -> Road {
        Road {
            id: 1,
            start: start.into(),
            end: end.into(),
            width: 0.1,
            rho_max: 1.0,
            rho0: vec![0.0; 4],
            v_min: 0.25,
            v_max: 2.0,
        }
    }

    #[test]
    fn point_on_road_examples() {
        let road = segment([0.0, 0.0], [1.0, 0.0]);
        assert_eq!(point_on_road(&road, 0.0).unwrap(), Point::new(0.0, 0.0));
        assert_eq!(point_on_road(&road, 0.5).unwrap(), Point::new(0.5, 0.0));
        let road = segment([1.0, 1.0], [1.0, 2.0]);
        assert_eq!(point_on_road(&road, 0.25).unwrap(), Point::new(1.0, 1.25));
    }

    #[test]
    fn point_on_road_keeps_direction() {
        let road = segment([2.0, 1.0], [1.0, 1.0]);
        assert_eq!(road.point_at(0.0).unwrap(), road.start);
        assert_eq!(road.point_at(1.0).unwrap(), road.end);
    }

    #[test]
    fn point_on_road_rejects_outside_parameter() {
        let road = segment([0.0, 0.0], [1.0, 0.0]);
        assert!(matches!(
            road.point_at(-0.1),
            Err(NetworkError::ArcLengthOutOfRange { .. })
        ));
        assert!(road.point_at(1.0 + 1e-9).is_err());
    }

    #[test]
    fn infeasible_policy_names_the_bound() {
        let scenario = Scenario::sample();
        let policy = SpeedLimitPolicy::new(vec![3.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let err = policy.check_feasible(&scenario).unwrap_err();
        assert_eq!(err.to_string(), "V_1 exceeds upper bound 2");
        let policy = SpeedLimitPolicy::new(vec![1.0, 0.1, 1.0, 1.0, 1.0, 1.0]);
        let err = policy.check_feasible(&scenario).unwrap_err();
        assert_eq!(err.to_string(), "V_2 is below lower bound 0.25");
        assert!(SpeedLimitPolicy::uniform(&scenario, 1.0)
            .check_feasible(&scenario)
            .is_ok());
    }

    #[test]
    fn inflow_series_holds_last_value() {
        let q = Inflow::Series(vec![0.1, 0.2]);
        assert_eq!(q.rate_at(0), 0.1);
        assert_eq!(q.rate_at(1), 0.2);
        assert_eq!(q.rate_at(10), 0.2);
        assert_eq!(Inflow::Constant(0.25).rate_at(7), 0.25);
    }
}
