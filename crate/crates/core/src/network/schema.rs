//! JSON scenario format.
//!
//! ```text
//! {
//!   "description": "...",                       (optional)
//!   "horizon": 5.0,
//!   "domain": { "side": 3.0, "n_grid": 60 },
//!   "roads": [ { "id": 1, "start": [x, y], "end": [x, y], "width": 0.1,
//!                "rho_max": 1.0, "rho0": 0.3 | [per-cell...],
//!                "v_min": 0.25, "v_max": 2.0 } ],
//!   "junctions": [ { "kind": "one_to_two", "in": [1], "out": [2, 3],
//!                    "alpha": [0.5, 0.5] } ],
//!   "access": [ { "road": 1, "inflow": 0.25 | [series...], "queue0": 0.0 } ],
//!   "exits": [6],
//!   "dispersion": { "mu": 1e-6, "kappa": 0.0, "wind": [1.0, 1.0], "phi0": 0.0 },
//!   "emission": { "theta": 0.5 },
//!   "objectives": { "delta": 0.0, "mode": "2d" },
//!   "discretization": { "n_cells": 20, "n_time": 601 }
//! }
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{
    AccessBoundary, InitialConcentration, Inflow, Junction, ObjectiveMode, Point, Road, Scenario,
    ScenarioError,
};
use crate::dispersion::DispersionParams;

/// Tolerance on `Σα = 1` and `Σβ = 1`.
const RATE_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    horizon: f64,
    domain: DomainFile,
    roads: Vec<RoadFile>,
    #[serde(default)]
    junctions: Vec<JunctionFile>,
    #[serde(default)]
    access: Vec<AccessFile>,
    #[serde(default)]
    exits: Vec<u32>,
    dispersion: DispersionFile,
    emission: EmissionFile,
    #[serde(default)]
    objectives: ObjectivesFile,
    discretization: DiscretizationFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    side: f64,
    n_grid: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CellValues {
    Constant(f64),
    PerCell(Vec<f64>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadFile {
    id: u32,
    start: [f64; 2],
    end: [f64; 2],
    width: f64,
    rho_max: f64,
    rho0: CellValues,
    v_min: f64,
    v_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum JunctionKind {
    OneToOne,
    OneToTwo,
    TwoToOne,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JunctionFile {
    kind: JunctionKind,
    #[serde(rename = "in")]
    incoming: Vec<u32>,
    #[serde(rename = "out")]
    outgoing: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AccessFile {
    road: u32,
    inflow: Inflow,
    #[serde(default)]
    queue0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DispersionFile {
    mu: f64,
    #[serde(default)]
    kappa: f64,
    wind: [f64; 2],
    #[serde(default)]
    phi0: InitialConcentration,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmissionFile {
    theta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectivesFile {
    #[serde(default)]
    delta: f64,
    #[serde(default = "default_mode")]
    mode: ObjectiveMode,
}

impl Default for ObjectivesFile {
    fn default() -> Self {
        ObjectivesFile {
            delta: 0.0,
            mode: default_mode(),
        }
    }
}

fn default_mode() -> ObjectiveMode {
    ObjectiveMode::TwoObjective
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscretizationFile {
    n_cells: usize,
    n_time: usize,
}

/// Parses and checks a scenario. Omitted optional values default to
/// `phi0 = 0`, `kappa = 0`, `queue0 = 0`, `delta = 0`, mode `2d`.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(file)
}

/// Writes a scenario back to the JSON format read by [`load_scenario`].
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let file = ScenarioFile {
        description: scenario.description.clone(),
        horizon: scenario.horizon,
        domain: DomainFile {
            side: scenario.side,
            n_grid: scenario.n_grid,
        },
        roads: scenario
            .roads
            .iter()
            .map(|r| RoadFile {
                id: r.id,
                start: [r.start.x, r.start.y],
                end: [r.end.x, r.end.y],
                width: r.width,
                rho_max: r.rho_max,
                rho0: CellValues::PerCell(r.rho0.clone()),
                v_min: r.v_min,
                v_max: r.v_max,
            })
            .collect(),
        junctions: scenario.junctions.iter().map(junction_to_file).collect(),
        access: scenario
            .access
            .iter()
            .map(|a| AccessFile {
                road: a.road,
                inflow: a.inflow.clone(),
                queue0: a.initial_queue,
            })
            .collect(),
        exits: scenario.exits.clone(),
        dispersion: DispersionFile {
            mu: scenario.dispersion.mu,
            kappa: scenario.dispersion.kappa,
            wind: scenario.dispersion.wind,
            phi0: scenario.phi0.clone(),
        },
        emission: EmissionFile {
            theta: scenario.theta,
        },
        objectives: ObjectivesFile {
            delta: scenario.delta,
            mode: scenario.mode,
        },
        discretization: DiscretizationFile {
            n_cells: scenario.n_cells,
            n_time: scenario.n_time,
        },
    };
    serde_json::to_string_pretty(&file).expect("scenario serializes")
}

fn junction_to_file(j: &Junction) -> JunctionFile {
    match j {
        Junction::OneToOne { incoming, outgoing } => JunctionFile {
            kind: JunctionKind::OneToOne,
            incoming: vec![*incoming],
            outgoing: vec![*outgoing],
            alpha: None,
            beta: None,
        },
        Junction::OneToTwo {
            incoming,
            outgoing,
            alpha,
        } => JunctionFile {
            kind: JunctionKind::OneToTwo,
            incoming: vec![*incoming],
            outgoing: outgoing.to_vec(),
            alpha: Some(alpha.to_vec()),
            beta: None,
        },
        Junction::TwoToOne {
            incoming,
            outgoing,
            beta,
        } => JunctionFile {
            kind: JunctionKind::TwoToOne,
            incoming: incoming.to_vec(),
            outgoing: vec![*outgoing],
            alpha: None,
            beta: Some(beta.to_vec()),
        },
    }
}

fn positive(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ScenarioError::schema(field, format!("must be positive, got {value}")))
    }
}

fn nonnegative(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ScenarioError::schema(
            field,
            format!("must be nonnegative, got {value}"),
        ))
    }
}

fn count(field: &str, value: usize) -> Result<usize, ScenarioError> {
    if value == 0 {
        Err(ScenarioError::schema(field, "must be at least 1"))
    } else {
        Ok(value)
    }
}

fn build(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let horizon = positive("horizon", file.horizon)?;
    let side = positive("domain.side", file.domain.side)?;
    let n_grid = count("domain.n_grid", file.domain.n_grid)?;
    let n_cells = count("discretization.n_cells", file.discretization.n_cells)?;
    let n_time = count("discretization.n_time", file.discretization.n_time)?;

    if file.roads.is_empty() {
        return Err(ScenarioError::schema("roads", "network has no roads"));
    }
    let mut ids = HashSet::new();
    let mut roads = Vec::with_capacity(file.roads.len());
    for (idx, r) in file.roads.into_iter().enumerate() {
        let field = |name: &str| format!("roads[{idx}].{name}");
        if !ids.insert(r.id) {
            return Err(ScenarioError::schema(
                field("id"),
                format!("duplicate road id {}", r.id),
            ));
        }
        let width = positive(&field("width"), r.width)?;
        let rho_max = positive(&field("rho_max"), r.rho_max)?;
        let v_min = positive(&field("v_min"), r.v_min)?;
        let v_max = positive(&field("v_max"), r.v_max)?;
        if v_min > v_max {
            return Err(ScenarioError::schema(
                field("v_min"),
                format!("lower speed bound {v_min} exceeds upper bound {v_max}"),
            ));
        }
        if r.start.iter().chain(&r.end).any(|c| !c.is_finite()) {
            return Err(ScenarioError::schema(field("start"), "non-finite coordinate"));
        }
        let start = Point::from(r.start);
        let end = Point::from(r.end);
        if start.distance(end) <= 0.0 {
            return Err(ScenarioError::schema(field("end"), "road has zero length"));
        }
        let rho0 = match r.rho0 {
            CellValues::Constant(c) => vec![c; n_cells],
            CellValues::PerCell(v) => {
                if v.len() != n_cells {
                    return Err(ScenarioError::schema(
                        field("rho0"),
                        format!("expected {n_cells} cell values, got {}", v.len()),
                    ));
                }
                v
            }
        };
        if let Some(bad) = rho0
            .iter()
            .find(|&&rho| !(rho.is_finite() && (0.0..=rho_max).contains(&rho)))
        {
            return Err(ScenarioError::schema(
                field("rho0"),
                format!("initial density {bad} outside [0, {rho_max}]"),
            ));
        }
        roads.push(Road {
            id: r.id,
            start,
            end,
            width,
            rho_max,
            rho0,
            v_min,
            v_max,
        });
    }

    let known = |field: String, id: u32| -> Result<u32, ScenarioError> {
        if ids.contains(&id) {
            Ok(id)
        } else {
            Err(ScenarioError::schema(field, format!("unknown road id {id}")))
        }
    };

    let mut junctions = Vec::with_capacity(file.junctions.len());
    for (idx, j) in file.junctions.into_iter().enumerate() {
        let field = |name: &str| format!("junctions[{idx}].{name}");
        let (n_in, n_out) = match j.kind {
            JunctionKind::OneToOne => (1, 1),
            JunctionKind::OneToTwo => (1, 2),
            JunctionKind::TwoToOne => (2, 1),
        };
        if j.incoming.len() != n_in || j.outgoing.len() != n_out {
            return Err(ScenarioError::schema(
                field("kind"),
                format!(
                    "expects {n_in} incoming and {n_out} outgoing roads, got {} and {}",
                    j.incoming.len(),
                    j.outgoing.len()
                ),
            ));
        }
        for &id in &j.incoming {
            known(field("in"), id)?;
        }
        for &id in &j.outgoing {
            known(field("out"), id)?;
        }
        let junction = match j.kind {
            JunctionKind::OneToOne => {
                reject_rates(&field("alpha"), j.alpha.as_deref())?;
                reject_rates(&field("beta"), j.beta.as_deref())?;
                Junction::OneToOne {
                    incoming: j.incoming[0],
                    outgoing: j.outgoing[0],
                }
            }
            JunctionKind::OneToTwo => {
                reject_rates(&field("beta"), j.beta.as_deref())?;
                let alpha = rate_pair(&field("alpha"), j.alpha.as_deref(), "distribution")?;
                Junction::OneToTwo {
                    incoming: j.incoming[0],
                    outgoing: [j.outgoing[0], j.outgoing[1]],
                    alpha,
                }
            }
            JunctionKind::TwoToOne => {
                reject_rates(&field("alpha"), j.alpha.as_deref())?;
                let beta = rate_pair(&field("beta"), j.beta.as_deref(), "priority")?;
                Junction::TwoToOne {
                    incoming: [j.incoming[0], j.incoming[1]],
                    outgoing: j.outgoing[0],
                    beta,
                }
            }
        };
        junctions.push(junction);
    }

    let mut access = Vec::with_capacity(file.access.len());
    for (idx, a) in file.access.into_iter().enumerate() {
        let road = known(format!("access[{idx}].road"), a.road)?;
        let values = a.inflow.values();
        if values.is_empty() {
            return Err(ScenarioError::schema(
                format!("access[{idx}].inflow"),
                "inflow series is empty",
            ));
        }
        for q in values {
            nonnegative(&format!("access[{idx}].inflow"), q)?;
        }
        let initial_queue = nonnegative(&format!("access[{idx}].queue0"), a.queue0)?;
        access.push(AccessBoundary {
            road,
            inflow: a.inflow,
            initial_queue,
        });
    }

    let mut exits = Vec::with_capacity(file.exits.len());
    for (idx, id) in file.exits.into_iter().enumerate() {
        exits.push(known(format!("exits[{idx}]"), id)?);
    }

    let mu = positive("dispersion.mu", file.dispersion.mu)?;
    let kappa = nonnegative("dispersion.kappa", file.dispersion.kappa)?;
    if file.dispersion.wind.iter().any(|w| !w.is_finite()) {
        return Err(ScenarioError::schema("dispersion.wind", "non-finite wind"));
    }
    match &file.dispersion.phi0 {
        InitialConcentration::Constant(c) => {
            nonnegative("dispersion.phi0", *c)?;
        }
        InitialConcentration::Grid(values) => {
            let expected = (n_grid + 1) * (n_grid + 1);
            if values.len() != expected {
                return Err(ScenarioError::schema(
                    "dispersion.phi0",
                    format!("expected {expected} grid values, got {}", values.len()),
                ));
            }
            for &c in values {
                nonnegative("dispersion.phi0", c)?;
            }
        }
    }
    let theta = nonnegative("emission.theta", file.emission.theta)?;
    let delta = nonnegative("objectives.delta", file.objectives.delta)?;

    Ok(Scenario {
        description: file.description,
        horizon,
        side,
        n_grid,
        roads,
        junctions,
        access,
        exits,
        dispersion: DispersionParams {
            mu,
            kappa,
            wind: file.dispersion.wind,
        },
        phi0: file.dispersion.phi0,
        theta,
        delta,
        mode: file.objectives.mode,
        n_cells,
        n_time,
    })
}

fn reject_rates(field: &str, rates: Option<&[f64]>) -> Result<(), ScenarioError> {
    match rates {
        Some(_) => Err(ScenarioError::schema(
            field,
            "not applicable to this junction kind",
        )),
        None => Ok(()),
    }
}

fn rate_pair(field: &str, rates: Option<&[f64]>, what: &str) -> Result<[f64; 2], ScenarioError> {
    let rates = rates.ok_or_else(|| ScenarioError::schema(field, format!("{what} rates missing")))?;
    let [a, b] = rates else {
        return Err(ScenarioError::schema(
            field,
            format!("expected 2 {what} rates, got {}", rates.len()),
        ));
    };
    for &r in rates {
        if !(r > 0.0 && r < 1.0) {
            return Err(ScenarioError::schema(
                field,
                format!("{what} rate {r} outside (0, 1)"),
            ));
        }
    }
    if (a + b - 1.0).abs() > RATE_SUM_TOL {
        return Err(ScenarioError::schema(
            field,
            format!("{what} rates must sum to 1"),
        ));
    }
    Ok([*a, *b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SAMPLE_SCENARIO;

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(SAMPLE_SCENARIO).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn sample_matches_proof_of_concept_parameters() {
        let s = load_scenario(SAMPLE_SCENARIO).unwrap();
        assert_eq!(s.horizon, 5.0);
        assert_eq!(s.h(), 0.05);
        assert_eq!(s.ds(&s.roads[0]), 0.05);
        assert_eq!(s.theta, 0.5);
        assert_eq!(s.dispersion.mu, 1e-6);
        assert_eq!(s.dispersion.wind, [1.0, 1.0]);
        assert_eq!(s.dispersion.kappa, 0.0);
        assert_eq!(s.n_time, 601);
        assert_eq!(s.n_grid, 60);
        assert_eq!(s.n_cells, 20);
        assert_eq!(s.roads.len(), 6);
        assert!(s.roads.iter().all(|r| r.width == 0.1 && r.rho_max == 1.0));
        assert!(s.roads.iter().all(|r| r.v_min == 0.25 && r.v_max == 2.0));
        assert_eq!(s.access[0].inflow, Inflow::Constant(0.25));
    }

    #[test]
    fn omitted_phi0_defaults_to_zero() {
        let text = edit(|v| {
            v["dispersion"].as_object_mut().unwrap().remove("phi0");
            v["dispersion"].as_object_mut().unwrap().remove("kappa");
        });
        let s = load_scenario(&text).unwrap();
        assert!(s.phi0.is_zero());
        assert_eq!(s.dispersion.kappa, 0.0);
        assert_eq!(s.access[0].initial_queue, 0.0);
    }

    #[test]
    fn distribution_rates_must_sum_to_one() {
        let text = edit(|v| {
            v["junctions"][0]["alpha"] = serde_json::json!([0.6, 0.5]);
        });
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("distribution rates must sum to 1"), "{err}");
    }

    #[test]
    fn priority_rates_must_sum_to_one() {
        let text = edit(|v| {
            let merge = v["junctions"]
                .as_array_mut()
                .unwrap()
                .iter_mut()
                .find(|j| j["kind"] == "two_to_one")
                .unwrap();
            merge["beta"] = serde_json::json!([0.3, 0.3]);
        });
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("priority rates must sum to 1"), "{err}");
    }

    #[test]
    fn junction_with_missing_road_is_rejected() {
        let text = edit(|v| {
            v["junctions"][0]["out"] = serde_json::json!([2, 99]);
        });
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("unknown road id 99"), "{err}");
    }

    #[test]
    fn negative_width_is_rejected() {
        let text = edit(|v| {
            v["roads"][2]["width"] = serde_json::json!(-0.1);
        });
        let err = load_scenario(&text).unwrap_err();
        assert_eq!(
            err,
            ScenarioError::schema("roads[2].width", "must be positive, got -0.1")
        );
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = load_scenario("{\n  \"horizon\": 5.0,\n  \"domain\": oops\n}").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = load_scenario("{\"horizon\": 5.0}").unwrap_err();
        assert!(err.to_string().contains("missing field"), "{err}");
    }

    #[test]
    fn arity_must_match_kind() {
        let text = edit(|v| {
            v["junctions"][0]["out"] = serde_json::json!([2]);
        });
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("expects 1 incoming and 2 outgoing"), "{err}");
    }

    #[test]
    fn initial_density_above_capacity_is_rejected() {
        let text = edit(|v| {
            v["roads"][0]["rho0"] = serde_json::json!(1.5);
        });
        assert!(load_scenario(&text).is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let s = load_scenario(SAMPLE_SCENARIO).unwrap();
        let again = load_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(s, again);
    }
}
