use super::{advance_road, one_to_two, queue_update, two_to_one, FluxParams, TrafficError};
use crate::network::{Junction, Scenario, SpeedLimitPolicy};

/// What feeds the tail of a road.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upstream {
    Junction(usize),
    Access(usize),
}

/// What drains the head of a road.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Downstream {
    Junction(usize),
    Exit,
}

/// Road-to-junction incidence, resolved to indices into the scenario's
/// `roads`, `junctions` and `access` lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub upstream: Vec<Upstream>,
    pub downstream: Vec<Downstream>,
    junction_roads: Vec<JunctionRoads>,
}

#[derive(Debug, Clone, PartialEq)]
enum JunctionRoads {
    OneToOne { incoming: usize, outgoing: usize },
    OneToTwo { incoming: usize, outgoing: [usize; 2], alpha: [f64; 2] },
    TwoToOne { incoming: [usize; 2], outgoing: usize, beta: [f64; 2] },
}

impl Topology {
    /// Resolves the incidence structure, collecting every endpoint that is
    /// attached to zero or to more than one junction or boundary.
    pub fn build(scenario: &Scenario) -> Result<Topology, Vec<String>> {
        let n = scenario.roads.len();
        let mut upstream: Vec<Vec<Upstream>> = vec![Vec::new(); n];
        let mut downstream: Vec<Vec<Downstream>> = vec![Vec::new(); n];
        let mut problems = Vec::new();
        let idx = |id: u32, problems: &mut Vec<String>| -> Option<usize> {
            let found = scenario.road_index(id);
            if found.is_none() {
                problems.push(format!("unknown road id {id}"));
            }
            found
        };

        let mut junction_roads = Vec::with_capacity(scenario.junctions.len());
        for (j, junction) in scenario.junctions.iter().enumerate() {
            let ins: Vec<Option<usize>> =
                junction.incoming().into_iter().map(|id| idx(id, &mut problems)).collect();
            let outs: Vec<Option<usize>> =
                junction.outgoing().into_iter().map(|id| idx(id, &mut problems)).collect();
            for &r in ins.iter().flatten() {
                downstream[r].push(Downstream::Junction(j));
            }
            for &r in outs.iter().flatten() {
                upstream[r].push(Upstream::Junction(j));
            }
            if ins.iter().chain(&outs).any(Option::is_none) {
                continue;
            }
            let ins: Vec<usize> = ins.into_iter().flatten().collect();
            let outs: Vec<usize> = outs.into_iter().flatten().collect();
            junction_roads.push(match junction {
                Junction::OneToOne { .. } => JunctionRoads::OneToOne {
                    incoming: ins[0],
                    outgoing: outs[0],
                },
                Junction::OneToTwo { alpha, .. } => JunctionRoads::OneToTwo {
                    incoming: ins[0],
                    outgoing: [outs[0], outs[1]],
                    alpha: *alpha,
                },
                Junction::TwoToOne { beta, .. } => JunctionRoads::TwoToOne {
                    incoming: [ins[0], ins[1]],
                    outgoing: outs[0],
                    beta: *beta,
                },
            });
        }
        for (a, access) in scenario.access.iter().enumerate() {
            if let Some(r) = idx(access.road, &mut problems) {
                upstream[r].push(Upstream::Access(a));
            }
        }
        for &id in &scenario.exits {
            if let Some(r) = idx(id, &mut problems) {
                downstream[r].push(Downstream::Exit);
            }
        }

        for (r, road) in scenario.roads.iter().enumerate() {
            match upstream[r].len() {
                1 => {}
                0 => problems.push(format!(
                    "road {} has no junction or access boundary at its tail",
                    road.id
                )),
                k => problems.push(format!(
                    "road {} has {k} junctions or boundaries at its tail",
                    road.id
                )),
            }
            match downstream[r].len() {
                1 => {}
                0 => problems.push(format!(
                    "road {} has no junction or exit at its head",
                    road.id
                )),
                k => problems.push(format!(
                    "road {} has {k} junctions or exits at its head",
                    road.id
                )),
            }
        }
        if !problems.is_empty() {
            return Err(problems);
        }
        Ok(Topology {
            upstream: upstream.into_iter().map(|u| u[0]).collect(),
            downstream: downstream.into_iter().map(|d| d[0]).collect(),
            junction_roads,
        })
    }
}

/// Densities and queue lengths at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    /// Cell averages per road, in scenario road order.
    pub densities: Vec<Vec<f64>>,
    /// Queue length per access boundary, in scenario access order.
    pub queues: Vec<f64>,
    pub time: f64,
}

impl TrafficState {
    pub fn initial(scenario: &Scenario) -> Self {
        TrafficState {
            densities: scenario.roads.iter().map(|r| r.rho0.clone()).collect(),
            queues: scenario.access.iter().map(|a| a.initial_queue).collect(),
            time: 0.0,
        }
    }
}

/// Boundary fluxes of every road, averaged over one output interval
/// `[t^k, t^{k+1}]` (exact time integral divided by `Δt`).
#[derive(Debug, Clone, PartialEq)]
pub struct StepFlows {
    /// Flux entering each road at its tail.
    pub upstream: Vec<f64>,
    /// Flux leaving each road at its head.
    pub downstream: Vec<f64>,
}

impl StepFlows {
    fn zeros(n: usize) -> Self {
        StepFlows {
            upstream: vec![0.0; n],
            downstream: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrajectory {
    /// States at `t^0, …, t^{N_t}`.
    pub snapshots: Vec<TrafficState>,
    /// `flows[k]` covers `[t^k, t^{k+1}]`.
    pub flows: Vec<StepFlows>,
    /// CFL substeps taken per output interval.
    pub substeps: usize,
}

/// Largest time step allowed by the traffic CFL condition, using the
/// bound `|Q'(ρ)| ≤ V` on every road.
pub fn cfl_max_dt_traffic(v_max: &[f64], ds: &[f64]) -> Result<f64, TrafficError> {
    if v_max.is_empty() || v_max.len() != ds.len() {
        return Err(TrafficError::EmptyNetwork);
    }
    let mut bound = f64::INFINITY;
    for (&v, &d) in v_max.iter().zip(ds) {
        if !(v.is_finite() && v > 0.0) {
            return Err(TrafficError::NonPositiveSpeed(v));
        }
        bound = bound.min(d / v);
    }
    Ok(bound)
}

struct Model<'a> {
    scenario: &'a Scenario,
    topology: Topology,
    params: Vec<FluxParams>,
    ds: Vec<f64>,
}

impl<'a> Model<'a> {
    fn new(scenario: &'a Scenario, policy: &SpeedLimitPolicy) -> Result<Self, TrafficError> {
        policy.check_feasible(scenario)?;
        let topology = Topology::build(scenario).map_err(|p| TrafficError::Topology(p.join("; ")))?;
        let params = scenario
            .roads
            .iter()
            .zip(&policy.v_max)
            .map(|(r, &v)| FluxParams::new(v, r.rho_max))
            .collect();
        let ds = scenario.roads.iter().map(|r| scenario.ds(r)).collect();
        Ok(Model {
            scenario,
            topology,
            params,
            ds,
        })
    }

    fn cfl_bound(&self) -> f64 {
        let v: Vec<f64> = self.params.iter().map(|p| p.v_max).collect();
        cfl_max_dt_traffic(&v, &self.ds).expect("validated policy")
    }

    /// Advances `state` in place by `dt`, using inflow rates of output
    /// interval `k`, and adds `dt ×` boundary fluxes to `acc`.
    fn step(&self, state: &mut TrafficState, k: usize, dt: f64, acc: &mut StepFlows) {
        let n = self.params.len();
        let mut up = vec![0.0; n];
        let mut down = vec![0.0; n];
        let first = |r: usize, s: &TrafficState| s.densities[r][0];
        let last = |r: usize, s: &TrafficState| *s.densities[r].last().expect("nonempty road");

        for j in &self.topology.junction_roads {
            match *j {
                JunctionRoads::OneToOne { incoming, outgoing } => {
                    let d = self.params[incoming].demand(last(incoming, state));
                    let s = self.params[outgoing].supply(first(outgoing, state));
                    let q = d.min(s);
                    down[incoming] = q;
                    up[outgoing] = q;
                }
                JunctionRoads::OneToTwo {
                    incoming,
                    outgoing: [a, b],
                    alpha,
                } => {
                    let d = self.params[incoming].demand(last(incoming, state));
                    let sa = self.params[a].supply(first(a, state));
                    let sb = self.params[b].supply(first(b, state));
                    let (q_in, qa, qb) = one_to_two(d, sa, sb, alpha);
                    down[incoming] = q_in;
                    up[a] = qa;
                    up[b] = qb;
                }
                JunctionRoads::TwoToOne {
                    incoming: [a, b],
                    outgoing,
                    beta,
                } => {
                    let da = self.params[a].demand(last(a, state));
                    let db = self.params[b].demand(last(b, state));
                    let s = self.params[outgoing].supply(first(outgoing, state));
                    let (qa, qb, q_out) = two_to_one(da, db, s, beta);
                    down[a] = qa;
                    down[b] = qb;
                    up[outgoing] = q_out;
                }
            }
        }
        for (r, (u, d)) in self
            .topology
            .upstream
            .iter()
            .zip(&self.topology.downstream)
            .enumerate()
        {
            if let Upstream::Access(a) = *u {
                let inflow = self.scenario.access[a].inflow.rate_at(k);
                let supply = self.params[r].supply(first(r, state));
                let (queue, q_out) = queue_update(state.queues[a], inflow, supply, dt);
                state.queues[a] = queue;
                up[r] = q_out;
            }
            if let Downstream::Exit = *d {
                down[r] = self.params[r].demand(last(r, state));
            }
        }
        for r in 0..n {
            advance_road(&mut state.densities[r], self.params[r], up[r], down[r], dt / self.ds[r]);
            acc.upstream[r] += dt * up[r];
            acc.downstream[r] += dt * down[r];
        }
        state.time += dt;
    }
}

/// One step of size `dt` of the network scheme. Returns the new state and
/// the boundary fluxes used (not time-averaged: `dt ×` flux divided by `dt`).
pub fn lwr_step(
    state: &TrafficState,
    policy: &SpeedLimitPolicy,
    scenario: &Scenario,
    dt: f64,
    interval: usize,
) -> Result<(TrafficState, StepFlows), TrafficError> {
    let model = Model::new(scenario, policy)?;
    let bound = model.cfl_bound();
    if dt > bound {
        return Err(TrafficError::Cfl { dt, bound });
    }
    let mut next = state.clone();
    let mut acc = StepFlows::zeros(scenario.roads.len());
    model.step(&mut next, interval, dt, &mut acc);
    for v in acc.upstream.iter_mut().chain(acc.downstream.iter_mut()) {
        *v /= dt;
    }
    Ok((next, acc))
}

/// Simulates the network over `[0, T]`, taking as many uniform CFL substeps
/// per output interval as needed and recording states at every `t^k`.
pub fn simulate_traffic(
    scenario: &Scenario,
    policy: &SpeedLimitPolicy,
) -> Result<TrafficTrajectory, TrafficError> {
    let model = Model::new(scenario, policy)?;
    let dt = scenario.dt();
    let bound = model.cfl_bound();
    let mut substeps = (dt / bound).ceil().max(1.0) as usize;
    while dt / substeps as f64 > bound {
        substeps += 1;
    }
    let sub_dt = dt / substeps as f64;
    let n_roads = scenario.roads.len();

    let mut state = TrafficState::initial(scenario);
    let mut snapshots = Vec::with_capacity(scenario.n_time + 1);
    let mut flows = Vec::with_capacity(scenario.n_time);
    snapshots.push(state.clone());
    for k in 0..scenario.n_time {
        let mut acc = StepFlows::zeros(n_roads);
        for _ in 0..substeps {
            model.step(&mut state, k, sub_dt, &mut acc);
        }
        for v in acc.upstream.iter_mut().chain(acc.downstream.iter_mut()) {
            *v /= dt;
        }
        state.time = (k + 1) as f64 * dt;
        snapshots.push(state.clone());
        flows.push(acc);
    }
    Ok(TrafficTrajectory {
        snapshots,
        flows,
        substeps,
    })
}
