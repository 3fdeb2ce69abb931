use std::fmt;

use super::Scenario;
use crate::dispersion::{cfl_check_adjoint, CflReport};
use crate::emission::rasterize_network;
use crate::traffic::Topology;

/// One problem found in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    /// The adjoint time step is too large for the explicit scheme.
    Cfl(CflReport),
    /// A road covers fewer grid points than it has cells.
    InvisibleRoad { road: u32, covered: usize, needed: usize },
    /// A road endpoint is not attached to exactly one junction or boundary.
    Graph(String),
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::Cfl(r) => write!(f, "CFL: fail ({r})"),
            Finding::InvisibleRoad {
                road,
                covered,
                needed,
            } => write!(
                f,
                "road {road} invisible to grid: covers {covered} grid points, needs at least {needed}"
            ),
            Finding::Graph(msg) => write!(f, "graph: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub adjoint_cfl: CflReport,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    /// Status line for the adjoint CFL check.
    pub fn cfl_line(&self) -> String {
        let r = &self.adjoint_cfl;
        if r.passes() {
            format!("CFL: pass (Δt={:.4} ≤ {:.6})", r.dt, r.dt_bound)
        } else {
            format!("CFL: fail ({r})")
        }
    }
}

pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let adjoint_cfl = cfl_check_adjoint(scenario.h(), scenario.dt(), &scenario.dispersion);
    let mut findings = Vec::new();
    if !adjoint_cfl.passes() {
        findings.push(Finding::Cfl(adjoint_cfl));
    }
    let map = rasterize_network(scenario);
    for (road, covered) in scenario.roads.iter().zip(map.points_per_road()) {
        if covered < scenario.n_cells {
            findings.push(Finding::InvisibleRoad {
                road: road.id,
                covered,
                needed: scenario.n_cells,
            });
        }
    }
    if let Err(problems) = Topology::build(scenario) {
        findings.extend(problems.into_iter().map(Finding::Graph));
    }
    ValidationReport {
        adjoint_cfl,
        findings,
    }
}
