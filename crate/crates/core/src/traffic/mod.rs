//! First-order macroscopic traffic on a road network.
//!
//! Each road carries an LWR conservation law with the Greenshields flux
//! `Q(ρ) = V ρ (1 − ρ/ρ_max)`, discretized by Godunov finite volumes.
//! Roads are coupled at junctions through demand and supply; access roads
//! are fed by a point queue and exit roads drain freely.

mod simulate;

use thiserror::Error;

use crate::network::NetworkError;

pub use simulate::{
    cfl_max_dt_traffic, lwr_step, simulate_traffic, StepFlows, Topology, TrafficState,
    TrafficTrajectory, Upstream, Downstream,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("density {rho} outside [0, {rho_max}]")]
    DensityOutOfRange { rho: f64, rho_max: f64 },
    #[error("speed limit must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("{what} must be nonnegative, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("{what} rates must sum to 1, got {sum}")]
    RateSum { what: &'static str, sum: f64 },
    #[error("network has no roads")]
    EmptyNetwork,
    #[error("time step {dt} exceeds the traffic CFL bound {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("inconsistent network: {0}")]
    Topology(String),
    #[error(transparent)]
    Policy(#[from] NetworkError),
    #[error("trajectory does not match the scenario: {0}")]
    GridMismatch(String),
}

const RATE_SUM_TOL: f64 = 1e-9;

/// Speed limit and maximal density of one road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxParams {
    pub v_max: f64,
    pub rho_max: f64,
}

impl FluxParams {
    pub fn new(v_max: f64, rho_max: f64) -> Self {
        FluxParams { v_max, rho_max }
    }

    pub fn critical_density(&self) -> f64 {
        0.5 * self.rho_max
    }

    /// `Q^max(V) = V ρ_max / 4`.
    pub fn capacity(&self) -> f64 {
        0.25 * self.v_max * self.rho_max
    }

    #[inline]
    pub fn flux(&self, rho: f64) -> f64 {
        self.v_max * rho * (1.0 - rho / self.rho_max)
    }

    #[inline]
    pub fn demand(&self, rho: f64) -> f64 {
        if rho <= self.critical_density() {
            self.flux(rho)
        } else {
            self.capacity()
        }
    }

    #[inline]
    pub fn supply(&self, rho: f64) -> f64 {
        if rho <= self.critical_density() {
            self.capacity()
        } else {
            self.flux(rho)
        }
    }

    /// Godunov interface flux `min{D(u), S(v)}`.
    #[inline]
    pub fn godunov(&self, left: f64, right: f64) -> f64 {
        self.demand(left).min(self.supply(right))
    }

    fn check(&self, rho: f64) -> Result<(), TrafficError> {
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(TrafficError::NonPositiveSpeed(self.v_max));
        }
        if !(rho.is_finite() && (0.0..=self.rho_max).contains(&rho)) {
            return Err(TrafficError::DensityOutOfRange {
                rho,
                rho_max: self.rho_max,
            });
        }
        Ok(())
    }
}

pub fn greenshields_flux(rho: f64, v_max: f64, rho_max: f64) -> Result<f64, TrafficError> {
    let p = FluxParams::new(v_max, rho_max);
    p.check(rho)?;
    Ok(p.flux(rho))
}

pub fn demand(rho: f64, v_max: f64, rho_max: f64) -> Result<f64, TrafficError> {
    let p = FluxParams::new(v_max, rho_max);
    p.check(rho)?;
    Ok(p.demand(rho))
}

pub fn supply(rho: f64, v_max: f64, rho_max: f64) -> Result<f64, TrafficError> {
    let p = FluxParams::new(v_max, rho_max);
    p.check(rho)?;
    Ok(p.supply(rho))
}

pub fn godunov_flux(left: f64, right: f64, params: FluxParams) -> Result<f64, TrafficError> {
    params.check(left)?;
    params.check(right)?;
    Ok(params.godunov(left, right))
}

fn nonnegative(what: &'static str, value: f64) -> Result<f64, TrafficError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(TrafficError::Negative { what, value })
    }
}

fn check_rates(what: &'static str, rates: [f64; 2]) -> Result<(), TrafficError> {
    let sum = rates[0] + rates[1];
    if (sum - 1.0).abs() > RATE_SUM_TOL || rates.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
        return Err(TrafficError::RateSum { what, sum });
    }
    Ok(())
}

/// One incoming and one outgoing road: the flux is the smaller of the
/// upstream demand and the downstream supply. Returns `(Q_in, Q_out)`.
pub fn junction_one_to_one(demand_in: f64, supply_out: f64) -> Result<(f64, f64), TrafficError> {
    let d = nonnegative("demand", demand_in)?;
    let s = nonnegative("supply", supply_out)?;
    let q = d.min(s);
    Ok((q, q))
}

/// Diverge with distribution rates `alpha`. Returns `(Q_1, Q_2, Q_3)` where
/// `Q_1 = Q_2 + Q_3` leaves the incoming road.
pub fn junction_one_to_two(
    demand_in: f64,
    supply_a: f64,
    supply_b: f64,
    alpha: [f64; 2],
) -> Result<(f64, f64, f64), TrafficError> {
    check_rates("distribution", alpha)?;
    let d = nonnegative("demand", demand_in)?;
    let sa = nonnegative("supply", supply_a)?;
    let sb = nonnegative("supply", supply_b)?;
    Ok(one_to_two(d, sa, sb, alpha))
}

#[inline]
pub(crate) fn one_to_two(d: f64, sa: f64, sb: f64, alpha: [f64; 2]) -> (f64, f64, f64) {
    let qa = (alpha[0] * d).min(sa);
    let qb = (alpha[1] * d).min(sb);
    (qa + qb, qa, qb)
}

/// Merge with priority rates `beta`. Returns `(Q_1, Q_2, Q_3)` where
/// `Q_3 = Q_1 + Q_2` enters the outgoing road.
pub fn junction_two_to_one(
    demand_a: f64,
    demand_b: f64,
    supply_out: f64,
    beta: [f64; 2],
) -> Result<(f64, f64, f64), TrafficError> {
    check_rates("priority", beta)?;
    let da = nonnegative("demand", demand_a)?;
    let db = nonnegative("demand", demand_b)?;
    let s = nonnegative("supply", supply_out)?;
    Ok(two_to_one(da, db, s, beta))
}

#[inline]
pub(crate) fn two_to_one(da: f64, db: f64, s: f64, beta: [f64; 2]) -> (f64, f64, f64) {
    let gamma_a = (beta[0] * s).max(s - db);
    let gamma_b = (beta[1] * s).max(s - da);
    let qa = da.min(gamma_a);
    let qb = db.min(gamma_b);
    (qa, qb, qa + qb)
}

/// One explicit Euler step of the access-road queue. The queue releases the
/// smaller of its demand `q_in + ℓ/dt` and the supply of the road it feeds.
/// Returns `(ℓ_next, Q_out)`.
pub fn queue_step(
    queue: f64,
    inflow: f64,
    road_supply: f64,
    dt: f64,
) -> Result<(f64, f64), TrafficError> {
    let queue = nonnegative("queue length", queue)?;
    let inflow = nonnegative("inflow rate", inflow)?;
    let road_supply = nonnegative("supply", road_supply)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(TrafficError::Negative {
            what: "time step",
            value: dt,
        });
    }
    Ok(queue_update(queue, inflow, road_supply, dt))
}

#[inline]
pub(crate) fn queue_update(queue: f64, inflow: f64, road_supply: f64, dt: f64) -> (f64, f64) {
    let queue_demand = inflow + queue / dt;
    if queue_demand <= road_supply {
        (0.0, queue_demand)
    } else {
        let out = road_supply;
        ((queue + dt * (inflow - out)).max(0.0), out)
    }
}

/// Advances the cell averages of one road by a Godunov step given the fluxes
/// entering at its tail and leaving at its head.
pub fn godunov_update(
    rho: &[f64],
    params: FluxParams,
    upstream_flux: f64,
    downstream_flux: f64,
    dt: f64,
    ds: f64,
) -> Vec<f64> {
    let mut out = rho.to_vec();
    advance_road(&mut out, params, upstream_flux, downstream_flux, dt / ds);
    out
}

pub(crate) fn advance_road(
    rho: &mut [f64],
    params: FluxParams,
    upstream_flux: f64,
    downstream_flux: f64,
    ratio: f64,
) {
    let n = rho.len();
    let mut left_flux = upstream_flux;
    for c in 0..n {
        let right_flux = if c + 1 < n {
            params.godunov(rho[c], rho[c + 1])
        } else {
            downstream_flux
        };
        // left_flux and right_flux both come from pre-update values
        rho[c] -= ratio * (right_flux - left_flux);
        left_flux = right_flux;
    }
    for r in rho.iter_mut() {
        *r = r.clamp(0.0, params.rho_max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn flux_examples() {
        assert_eq!(greenshields_flux(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(greenshields_flux(0.5, 1.0, 1.0).unwrap(), 0.25);
        assert!(close(greenshields_flux(0.25, 1.0, 1.0).unwrap(), 0.25 * 0.75));
        assert!(greenshields_flux(1.2, 1.0, 1.0).is_err());
        assert!(greenshields_flux(-0.1, 1.0, 1.0).is_err());
        assert!(greenshields_flux(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn demand_supply_examples() {
        assert!(close(demand(0.25, 1.0, 1.0).unwrap(), 0.1875));
        assert_eq!(demand(0.75, 1.0, 1.0).unwrap(), 0.25);
        assert_eq!(supply(0.5, 1.0, 1.0).unwrap(), 0.25);
        assert_eq!(demand(0.5, 1.0, 1.0).unwrap(), 0.25);
        assert!(close(supply(0.75, 1.0, 1.0).unwrap(), 0.1875));
        assert_eq!(supply(0.25, 2.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn godunov_examples() {
        let p = FluxParams::new(1.0, 1.0);
        assert!(close(godunov_flux(0.25, 0.75, p).unwrap(), 0.1875));
        for x in [0.0, 0.3, 0.5, 0.9, 1.0] {
            assert_eq!(godunov_flux(0.0, x, p).unwrap(), 0.0);
            assert_eq!(godunov_flux(x, 1.0, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn one_to_one_examples() {
        assert_eq!(junction_one_to_one(0.25, 0.1).unwrap(), (0.1, 0.1));
        assert_eq!(junction_one_to_one(0.1, 0.25).unwrap(), (0.1, 0.1));
        assert_eq!(junction_one_to_one(0.0, 0.25).unwrap(), (0.0, 0.0));
        assert!(junction_one_to_one(-0.1, 0.25).is_err());
    }

    #[test]
    fn one_to_two_examples() {
        let (q1, q2, q3) = junction_one_to_two(0.2, 0.05, 0.2, [0.5, 0.5]).unwrap();
        assert!(close(q1, 0.15) && close(q2, 0.05) && close(q3, 0.1));
        assert_eq!(junction_one_to_two(0.0, 0.3, 0.7, [0.5, 0.5]).unwrap(), (0.0, 0.0, 0.0));
        let (q1, q2, q3) = junction_one_to_two(0.2, 1.0, 1.0, [0.5, 0.5]).unwrap();
        assert!(close(q1, 0.2) && close(q2, 0.1) && close(q3, 0.1));
        assert!(matches!(
            junction_one_to_two(0.2, 1.0, 1.0, [0.6, 0.5]),
            Err(TrafficError::RateSum { .. })
        ));
    }

    #[test]
    fn two_to_one_examples() {
        let (q1, q2, q3) = junction_two_to_one(0.3, 0.3, 0.25, [0.5, 0.5]).unwrap();
        assert!(close(q1, 0.125) && close(q2, 0.125) && close(q3, 0.25));
        let (q1, q2, q3) = junction_two_to_one(0.05, 0.3, 0.25, [0.5, 0.5]).unwrap();
        assert!(close(q1, 0.05) && close(q2, 0.2) && close(q3, 0.25));
        assert_eq!(junction_two_to_one(0.0, 0.0, 0.4, [0.5, 0.5]).unwrap(), (0.0, 0.0, 0.0));
        assert!(junction_two_to_one(0.1, 0.1, 0.4, [0.5, 0.6]).is_err());
    }

    #[test]
    fn queue_examples() {
        assert_eq!(queue_step(0.0, 0.25, 0.3, 0.01).unwrap(), (0.0, 0.25));
        let (ell, q) = queue_step(0.1, 0.25, 0.2, 0.01).unwrap();
        assert!(close(ell, 0.1005) && q == 0.2);
        let (ell, q) = queue_step(0.002, 0.0, 0.5, 0.01).unwrap();
        assert!(ell == 0.0 && close(q, 0.2));
        assert!(queue_step(-1.0, 0.0, 0.5, 0.01).is_err());
        assert!(queue_step(0.0, 0.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn single_godunov_update_moves_mass_forward() {
        let p = FluxParams::new(1.0, 1.0);
        let next = godunov_update(&[0.25, 0.75], p, 0.0, 0.0, 0.01, 0.05);
        assert!(close(next[0], 0.2125));
        assert!(close(next[1], 0.7875));
    }
}
