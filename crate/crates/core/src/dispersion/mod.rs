//! Pollutant dispersion on the square control area.
//!
//! Both the forward concentration equation and the time-reversed adjoint
//! equation are advection–diffusion–reaction problems of the same form,
//!
//! ```text
//! u_t − μ Δu + w·∇u + κ u = f,
//! ```
//!
//! with zero total flux on the boundary part where `w` points inward and a
//! homogeneous Neumann condition where it points outward. The forward problem
//! uses the physical wind `w = v`, the time-reversed adjoint uses `w = −v`.
//! Both are marched with an explicit five-point diffusion stencil and a
//! first-order upwind advection stencil; boundary stencils are closed by
//! eliminating ghost points through the discretized boundary condition.

mod solver;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use solver::{solve_adjoint, solve_dispersion_forward, TransportStencil};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("adjoint CFL condition violated: {0}")]
    Cfl(CflReport),
    #[error("Robin ghost elimination undefined: mu + v*h = 0 (mu = {mu}, v = {v}, h = {h})")]
    RobinDenominator { mu: f64, v: f64, h: f64 },
    #[error("non-finite value after step {step}; the explicit scheme is unstable")]
    NonFinite { step: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

/// Diffusion coefficient `μ`, extinction rate `κ` and constant wind `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    pub mu: f64,
    pub kappa: f64,
    pub wind: [f64; 2],
}

impl DispersionParams {
    pub fn wind_l1(&self) -> f64 {
        self.wind[0].abs() + self.wind[1].abs()
    }
}

/// Uniform grid `(x_i, y_j) = (ih, jh)`, `0 ≤ i, j ≤ N_h`, on `[0, L]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub side: f64,
    pub n: usize,
}

impl Grid2D {
    pub fn new(side: f64, n: usize) -> Self {
        Grid2D { side, n }
    }

    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Points per axis, `N_h + 1`.
    pub fn per_axis(&self) -> usize {
        self.n + 1
    }

    pub fn len(&self) -> usize {
        self.per_axis() * self.per_axis()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of `(i, j)`; `i` is the x index and rows are stored contiguously.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.per_axis() + j
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }
}

/// Values on every grid point for the time levels `t^0, …, t^{N_t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub grid: Grid2D,
    pub n_time: usize,
    data: Vec<f64>,
}

impl GridSeries {
    pub fn zeros(grid: Grid2D, n_time: usize) -> Self {
        GridSeries {
            grid,
            n_time,
            data: vec![0.0; grid.len() * (n_time + 1)],
        }
    }

    pub fn from_data(grid: Grid2D, n_time: usize, data: Vec<f64>) -> Result<Self, DispersionError> {
        let expected = grid.len() * (n_time + 1);
        if data.len() != expected {
            return Err(DispersionError::GridMismatch(format!(
                "expected {expected} values, got {}",
                data.len()
            )));
        }
        Ok(GridSeries { grid, n_time, data })
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.slice(k)[self.grid.index(i, j)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &GridSeries) -> bool {
        self.grid == other.grid && self.n_time == other.n_time
    }
}

/// Adjoint state `p^k_{i,j}` on the forward time grid; `p^{N_t} ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointField {
    pub values: GridSeries,
}

/// Concentration `φ^k_{i,j}` from the forward dispersion solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationField {
    pub values: GridSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Edge::Left => [-1.0, 0.0],
            Edge::Right => [1.0, 0.0],
            Edge::Bottom => [0.0, -1.0],
            Edge::Top => [0.0, 1.0],
        }
    }

    fn slot(self) -> usize {
        match self {
            Edge::Left => 0,
            Edge::Right => 1,
            Edge::Bottom => 2,
            Edge::Top => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// `v·η < 0`.
    Inflow,
    /// `v·η ≥ 0`.
    Outflow,
}

/// Inflow/outflow label of each edge of the square for a constant wind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryClassification {
    kinds: [BoundaryKind; 4],
}

impl BoundaryClassification {
    pub fn edge(&self, edge: Edge) -> BoundaryKind {
        self.kinds[edge.slot()]
    }

    /// Labels of a grid point: empty in the interior, one entry on an edge,
    /// two at a corner (one per axis).
    pub fn at(&self, grid: &Grid2D, i: usize, j: usize) -> Vec<(Edge, BoundaryKind)> {
        let mut labels = Vec::new();
        if i == 0 {
            labels.push((Edge::Left, self.edge(Edge::Left)));
        }
        if i == grid.n {
            labels.push((Edge::Right, self.edge(Edge::Right)));
        }
        if j == 0 {
            labels.push((Edge::Bottom, self.edge(Edge::Bottom)));
        }
        if j == grid.n {
            labels.push((Edge::Top, self.edge(Edge::Top)));
        }
        labels
    }
}

pub fn classify_boundary(wind: [f64; 2]) -> BoundaryClassification {
    let mut kinds = [BoundaryKind::Outflow; 4];
    for edge in Edge::ALL {
        let [nx, ny] = edge.outward_normal();
        if wind[0] * nx + wind[1] * ny < 0.0 {
            kinds[edge.slot()] = BoundaryKind::Inflow;
        }
    }
    BoundaryClassification { kinds }
}

/// Outcome of the tightened explicit-scheme stability check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    pub dt: f64,
    /// `(1/3) h² / (4μ + ‖v‖₁ h)`.
    pub dt_bound: f64,
    /// `Δt [v_x²/(2μ + |v_x| h) + v_y²/(2μ + |v_y| h)]`, must not exceed 1/3.
    pub advection_number: f64,
    /// `Δt κ`, must not exceed 1/3.
    pub reaction_number: f64,
}

impl CflReport {
    pub const LIMIT: f64 = 1.0 / 3.0;

    pub fn passes_step_bound(&self) -> bool {
        self.dt <= self.dt_bound
    }

    pub fn passes_advection(&self) -> bool {
        self.advection_number <= Self::LIMIT
    }

    pub fn passes_reaction(&self) -> bool {
        self.reaction_number <= Self::LIMIT
    }

    pub fn passes(&self) -> bool {
        self.passes_step_bound() && self.passes_advection() && self.passes_reaction()
    }
}

impl std::fmt::Display for CflReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "dt = {:.6} vs bound {:.6}; advection number {:.6} vs 1/3; reaction number {:.6} vs 1/3",
            self.dt, self.dt_bound, self.advection_number, self.reaction_number
        )
    }
}

pub fn cfl_check_adjoint(h: f64, dt: f64, params: &DispersionParams) -> CflReport {
    let mu = params.mu;
    let dt_bound = h * h / (4.0 * mu + params.wind_l1() * h) / 3.0;
    let advection_number = dt
        * params
            .wind
            .iter()
            .map(|&v| v * v / (2.0 * mu + v.abs() * h))
            .sum::<f64>();
    CflReport {
        dt,
        dt_bound,
        advection_number,
        reaction_number: dt * params.kappa,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostCondition {
    /// `μ ∂u/∂η + c u = 0`, `c` the normal coefficient.
    Robin,
    /// `∂u/∂η = 0`.
    Neumann,
}

/// Ghost-point value outside the boundary, from the central-difference
/// discretization of the boundary condition at the boundary point.
/// `v_normal` is the coefficient `c` of the Robin condition written as
/// `μ ∂u/∂η + c u = 0`.
pub fn ghost_value(
    condition: GhostCondition,
    neighbor: f64,
    mu: f64,
    v_normal: f64,
    h: f64,
) -> Result<f64, DispersionError> {
    Ok(ghost_ratio(condition, mu, v_normal, h)? * neighbor)
}

pub(crate) fn ghost_ratio(
    condition: GhostCondition,
    mu: f64,
    v_normal: f64,
    h: f64,
) -> Result<f64, DispersionError> {
    match condition {
        GhostCondition::Neumann => Ok(1.0),
        GhostCondition::Robin => {
            let denom = mu + v_normal * h;
            if denom == 0.0 {
                return Err(DispersionError::RobinDenominator { mu, v: v_normal, h });
            }
            Ok((mu - v_normal * h) / denom)
        }
    }
}

/// Content hash identifying an adjoint solution: grid, dispersion
/// parameters, horizon and time steps.
pub fn adjoint_cache_key(scenario: &crate::network::Scenario) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"adjoint-v1");
    for value in [
        scenario.side,
        scenario.dispersion.mu,
        scenario.dispersion.kappa,
        scenario.dispersion.wind[0],
        scenario.dispersion.wind[1],
        scenario.horizon,
    ] {
        hasher.update(value.to_bits().to_le_bytes());
    }
    hasher.update((scenario.n_grid as u64).to_le_bytes());
    hasher.update((scenario.n_time as u64).to_le_bytes());
    hex::encode(hasher.finalize())
}
