use super::{
    cfl_check_adjoint, ghost_ratio, AdjointField, ConcentrationField, DispersionError, Edge,
    GhostCondition, Grid2D, GridSeries,
};
use crate::emission::EmissionField;
use crate::network::Scenario;

/// Explicit stencil for `u_t − μΔu + w·∇u + κu = f` on a [`Grid2D`], with
/// ghost points eliminated edge by edge.
///
/// Edges where the transport wind `w` points inward carry the zero-flux
/// Robin condition `μ ∂u/∂η − (w·η) u = 0`; the remaining edges carry
/// `∂u/∂η = 0`. A ghost point across an edge equals `ratio · u` at the
/// mirrored interior neighbor, which makes corners need no special rule.
#[derive(Debug, Clone)]
pub struct TransportStencil {
    grid: Grid2D,
    mu: f64,
    kappa: f64,
    wind: [f64; 2],
    ghost: [f64; 4],
}

/// Effective update weights of one grid point after ghost elimination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilWeights {
    pub center: f64,
    pub left: f64,
    pub right: f64,
    pub down: f64,
    pub up: f64,
}

enum Source<'a> {
    Uniform(f64),
    Field(&'a [f64]),
}

impl TransportStencil {
    pub fn new(grid: Grid2D, mu: f64, kappa: f64, wind: [f64; 2]) -> Result<Self, DispersionError> {
        let h = grid.h();
        let mut ghost = [1.0; 4];
        for edge in Edge::ALL {
            let [nx, ny] = edge.outward_normal();
            let w_normal = wind[0] * nx + wind[1] * ny;
            ghost[edge.slot()] = if w_normal < 0.0 {
                ghost_ratio(GhostCondition::Robin, mu, -w_normal, h)?
            } else {
                ghost_ratio(GhostCondition::Neumann, mu, 0.0, h)?
            };
        }
        Ok(TransportStencil {
            grid,
            mu,
            kappa,
            wind,
            ghost,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn ghost_ratio(&self, edge: Edge) -> f64 {
        self.ghost[edge.slot()]
    }

    /// `(left, right, down, up)` neighbor values, ghosts substituted.
    #[inline]
    fn neighbors(&self, u: &[f64], i: usize, j: usize) -> (f64, f64, f64, f64) {
        let g = &self.grid;
        let n = g.n;
        let left = if i > 0 {
            u[g.index(i - 1, j)]
        } else {
            self.ghost[0] * u[g.index(1, j)]
        };
        let right = if i < n {
            u[g.index(i + 1, j)]
        } else {
            self.ghost[1] * u[g.index(n - 1, j)]
        };
        let down = if j > 0 {
            u[g.index(i, j - 1)]
        } else {
            self.ghost[2] * u[g.index(i, 1)]
        };
        let up = if j < n {
            u[g.index(i, j + 1)]
        } else {
            self.ghost[3] * u[g.index(i, n - 1)]
        };
        (left, right, down, up)
    }

    /// Five-point approximation of `μΔu` at `(i, j)`.
    pub fn diffusion(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let (left, right, down, up) = self.neighbors(u, i, j);
        let h = self.grid.h();
        self.mu / (h * h) * (up + down - 4.0 * u[self.grid.index(i, j)] + right + left)
    }

    /// First-order upwind approximation of `w·∇u` at `(i, j)`.
    pub fn advection(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let (left, right, down, up) = self.neighbors(u, i, j);
        let [wx, wy] = self.wind;
        let norm = wx.abs() + wy.abs();
        (wy.min(0.0) * up - wy.max(0.0) * down
            + norm * u[self.grid.index(i, j)]
            + wx.min(0.0) * right
            - wx.max(0.0) * left)
            / self.grid.h()
    }

    /// Weights `c` with `u^{k+1}_{i,j} = Σ c·u^k + Δt f` after folding ghost
    /// values into the mirrored interior neighbor.
    pub fn weights(&self, i: usize, j: usize, dt: f64) -> StencilWeights {
        let h = self.grid.h();
        let d = dt * self.mu / (h * h);
        let a = dt / h;
        let [wx, wy] = self.wind;
        let mut w = StencilWeights {
            center: 1.0 - 4.0 * d - a * (wx.abs() + wy.abs()) - dt * self.kappa,
            left: d + a * wx.max(0.0),
            right: d - a * wx.min(0.0),
            down: d + a * wy.max(0.0),
            up: d - a * wy.min(0.0),
        };
        let n = self.grid.n;
        if i == 0 {
            w.right += self.ghost[0] * w.left;
            w.left = 0.0;
        }
        if i == n {
            w.left += self.ghost[1] * w.right;
            w.right = 0.0;
        }
        if j == 0 {
            w.up += self.ghost[2] * w.down;
            w.down = 0.0;
        }
        if j == n {
            w.down += self.ghost[3] * w.up;
            w.up = 0.0;
        }
        w
    }

    fn step(&self, u: &[f64], source: Source<'_>, dt: f64, out: &mut [f64]) {
        let per_axis = self.grid.per_axis();
        for i in 0..per_axis {
            for j in 0..per_axis {
                let idx = self.grid.index(i, j);
                let f = match source {
                    Source::Uniform(c) => c,
                    Source::Field(values) => values[idx],
                };
                out[idx] = u[idx]
                    + dt * (self.diffusion(u, i, j) - self.advection(u, i, j) - self.kappa * u[idx]
                        + f);
            }
        }
    }
}

fn checked_stencil(scenario: &Scenario, wind: [f64; 2]) -> Result<TransportStencil, DispersionError> {
    let grid = scenario.grid();
    let report = cfl_check_adjoint(grid.h(), scenario.dt(), &scenario.dispersion);
    if !report.passes() {
        return Err(DispersionError::Cfl(report));
    }
    TransportStencil::new(grid, scenario.dispersion.mu, scenario.dispersion.kappa, wind)
}

/// Solves the adjoint equation backward in time by marching its time-reversed
/// form forward from zero, then reindexing so that `p^k = p̃^{N_t − k}`.
pub fn solve_adjoint(scenario: &Scenario) -> Result<AdjointField, DispersionError> {
    let [vx, vy] = scenario.dispersion.wind;
    let stencil = checked_stencil(scenario, [-vx, -vy])?;
    let grid = stencil.grid();
    let n_time = scenario.n_time;
    let dt = scenario.dt();
    let source = 1.0 / (scenario.horizon * scenario.area());

    let mut values = GridSeries::zeros(grid, n_time);
    let mut current = vec![0.0; grid.len()];
    let mut next = vec![0.0; grid.len()];
    for step in 1..=n_time {
        stencil.step(&current, Source::Uniform(source), dt, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(DispersionError::NonFinite { step });
        }
        std::mem::swap(&mut current, &mut next);
        values.slice_mut(n_time - step).copy_from_slice(&current);
    }
    Ok(AdjointField { values })
}

/// Marches the forward dispersion equation with the physical wind and the
/// given emission as source, starting from the scenario's initial
/// concentration.
pub fn solve_dispersion_forward(
    scenario: &Scenario,
    emission: &EmissionField,
) -> Result<ConcentrationField, DispersionError> {
    let stencil = checked_stencil(scenario, scenario.dispersion.wind)?;
    let grid = stencil.grid();
    let n_time = scenario.n_time;
    if emission.values.grid != grid || emission.values.n_time != n_time {
        return Err(DispersionError::GridMismatch(
            "emission field does not match the scenario grid".into(),
        ));
    }
    let dt = scenario.dt();
    let mut values = GridSeries::zeros(grid, n_time);
    for (idx, v) in values.slice_mut(0).iter_mut().enumerate() {
        *v = scenario.phi0.value(idx);
    }
    let mut next = vec![0.0; grid.len()];
    for k in 0..n_time {
        stencil.step(
            values.slice(k),
            Source::Field(emission.values.slice(k)),
            dt,
            &mut next,
        );
        if next.iter().any(|v| !v.is_finite()) {
            return Err(DispersionError::NonFinite { step: k + 1 });
        }
        values.slice_mut(k + 1).copy_from_slice(&next);
    }
    Ok(ConcentrationField { values })
}
