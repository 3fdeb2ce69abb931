//! Emission rates on roads and their rasterization onto the control-area
//! grid.
//!
//! A road of width `w` spreads its line emission `Q + θρ` uniformly across
//! its width, giving an area rate `(Q + θρ)/w`. Grid points covered by
//! several roads take the average of the covering rates.

use thiserror::Error;

use crate::dispersion::{Grid2D, GridSeries};
use crate::network::{Road, Scenario, SpeedLimitPolicy};
use crate::traffic::{FluxParams, TrafficTrajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmissionError {
    #[error("density {rho} outside [0, {rho_max}]")]
    DensityOutOfRange { rho: f64, rho_max: f64 },
    #[error("emission weight theta must be nonnegative, got {0}")]
    NegativeTheta(f64),
    #[error("speed limit must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("{0}")]
    GridMismatch(String),
}

/// Line emission rate `Q(ρ, V) + θρ` of one road cell.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // the negations also reject NaN
pub fn road_emission_rate(rho: f64, v_max: f64, rho_max: f64, theta: f64) -> Result<f64, EmissionError> {
    if !(rho_max > 0.0) || !(0.0..=rho_max).contains(&rho) {
        return Err(EmissionError::DensityOutOfRange { rho, rho_max });
    }
    if !(theta >= 0.0) {
        return Err(EmissionError::NegativeTheta(theta));
    }
    if !(v_max > 0.0) {
        return Err(EmissionError::NonPositiveSpeed(v_max));
    }
    Ok(FluxParams::new(v_max, rho_max).flux(rho) + theta * rho)
}

/// One road covering a grid point: road index in scenario order and the
/// road cell containing the point's perpendicular foot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coverage {
    pub road: usize,
    pub cell: usize,
}

/// Which roads cover each grid point, in compressed row form indexed by
/// [`Grid2D::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMap {
    grid: Grid2D,
    offsets: Vec<usize>,
    entries: Vec<Coverage>,
    n_roads: usize,
}

impl RasterMap {
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    /// Roads covering the grid point with flat index `idx`.
    pub fn covering(&self, idx: usize) -> &[Coverage] {
        &self.entries[self.offsets[idx]..self.offsets[idx + 1]]
    }

    pub fn covering_at(&self, i: usize, j: usize) -> &[Coverage] {
        self.covering(self.grid.index(i, j))
    }

    /// `|ℰ(x_i, y_j)|`.
    pub fn count(&self, i: usize, j: usize) -> usize {
        self.covering_at(i, j).len()
    }

    /// Number of grid points each road covers, in scenario order.
    pub fn points_per_road(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_roads];
        for c in &self.entries {
            counts[c.road] += 1;
        }
        counts
    }
}

/// Relative slack on the closed membership test, so that points lying
/// exactly on the band edge are not lost to rounding.
const TIE_TOLERANCE: f64 = 1e-9;

fn cover(road: &Road, n_cells: usize, x: f64, y: f64) -> Option<usize> {
    let length = road.length();
    let (dx, dy) = road.direction();
    let (px, py) = (x - road.start.x, y - road.start.y);
    let s = px * dx + py * dy;
    let dist = (px * dy - py * dx).abs();
    let slack = TIE_TOLERANCE * length.max(road.width);
    if s < -slack || s > length + slack || dist > road.width / 2.0 + slack {
        return None;
    }
    let ds = length / n_cells as f64;
    // feet on a cell boundary belong to the cell that starts there, even
    // when s / ds rounds to just below an integer
    let cell = (s.max(0.0) / ds + TIE_TOLERANCE).floor() as usize;
    Some(cell.min(n_cells - 1))
}

/// Computes road coverage of every grid point. The result depends only on
/// geometry, so it is built once per scenario.
pub fn rasterize_network(scenario: &Scenario) -> RasterMap {
    let grid = scenario.grid();
    let mut offsets = Vec::with_capacity(grid.len() + 1);
    let mut entries = Vec::new();
    offsets.push(0);
    for i in 0..grid.per_axis() {
        for j in 0..grid.per_axis() {
            debug_assert_eq!(grid.index(i, j), offsets.len() - 1);
            let (x, y) = (grid.coord(i), grid.coord(j));
            for (road, r) in scenario.roads.iter().enumerate() {
                if let Some(cell) = cover(r, scenario.n_cells, x, y) {
                    entries.push(Coverage { road, cell });
                }
            }
            offsets.push(entries.len());
        }
    }
    RasterMap {
        grid,
        offsets,
        entries,
        n_roads: scenario.roads.len(),
    }
}

/// Area emission rates `ξ^k_{i,j}` for `k = 0, …, N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionField {
    pub values: GridSeries,
}

/// Rasterizes the emission of a simulated trajectory.
pub fn emission_field(
    traj: &TrafficTrajectory,
    map: &RasterMap,
    scenario: &Scenario,
    policy: &SpeedLimitPolicy,
) -> Result<EmissionField, EmissionError> {
    let grid = scenario.grid();
    if map.grid != grid || map.n_roads != scenario.roads.len() {
        return Err(EmissionError::GridMismatch(
            "raster map was built for a different scenario".into(),
        ));
    }
    if traj.snapshots.len() != scenario.n_time + 1 {
        return Err(EmissionError::GridMismatch(format!(
            "trajectory has {} time levels, scenario needs {}",
            traj.snapshots.len(),
            scenario.n_time + 1
        )));
    }
    if policy.v_max.len() != scenario.roads.len() {
        return Err(EmissionError::GridMismatch(format!(
            "policy has {} speed limits for {} roads",
            policy.v_max.len(),
            scenario.roads.len()
        )));
    }
    let mut values = GridSeries::zeros(grid, scenario.n_time);
    let mut rates: Vec<Vec<f64>> = vec![Vec::new(); scenario.roads.len()];
    for (k, snap) in traj.snapshots.iter().enumerate() {
        for (e, road) in scenario.roads.iter().enumerate() {
            let rho = &snap.densities[e];
            if rho.len() != scenario.n_cells {
                return Err(EmissionError::GridMismatch(format!(
                    "road {} has {} cells, scenario needs {}",
                    road.id,
                    rho.len(),
                    scenario.n_cells
                )));
            }
            rates[e].clear();
            for &r in rho {
                rates[e].push(
                    road_emission_rate(r, policy.v_max[e], road.rho_max, scenario.theta)?
                        / road.width,
                );
            }
        }
        let slice = values.slice_mut(k);
        for (idx, xi) in slice.iter_mut().enumerate() {
            let cov = map.covering(idx);
            if cov.is_empty() {
                continue;
            }
            let sum: f64 = cov.iter().map(|c| rates[c.road][c.cell]).sum();
            *xi = sum / cov.len() as f64;
        }
    }
    Ok(EmissionField { values })
}

impl EmissionField {
    pub fn grid(&self) -> Grid2D {
        self.values.grid
    }
}
