//! Readers and writers for simulation and optimization artifacts.
//!
//! Tables are CSV with a header row; floats are written in Rust's shortest
//! round-trip form so that reading a file back reproduces every value bit
//! for bit. Grid time series use a flat binary layout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `SLGRID01` |
//! | 8     | `N_h`, u64 little endian |
//! | 8     | `N_t`, u64 little endian |
//! | 8 each | `(N_t + 1)(N_h + 1)²` f64 little endian values |
//!
//! Values are stored one time slice after another; inside a slice the
//! point `(x_i, y_j)` sits at `i (N_h + 1) + j`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::dispersion::{Grid2D, GridSeries};
use crate::network::Scenario;
use crate::traffic::{TrafficState, TrafficTrajectory};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

pub const GRID_MAGIC: &[u8; 8] = b"SLGRID01";

/// Hex SHA-256 of `bytes`, used to tie outputs to their input files.
pub fn content_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

pub fn write_grid_series<W: Write>(mut w: W, series: &GridSeries) -> Result<(), IoError> {
    w.write_all(GRID_MAGIC)?;
    w.write_all(&(series.grid.n as u64).to_le_bytes())?;
    w.write_all(&(series.n_time as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(series.as_slice().len() * 8);
    for v in series.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads a grid series written by [`write_grid_series`]; the domain side is
/// not stored and must be supplied.
pub fn read_grid_series<R: Read>(mut r: R, side: f64) -> Result<GridSeries, IoError> {
    let mut header = [0u8; 24];
    r.read_exact(&mut header)?;
    if &header[..8] != GRID_MAGIC {
        return Err(format_err("not a grid series file (bad magic)"));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes")) as usize;
    let n_time = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes")) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(format_err("truncated grid series payload"));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    GridSeries::from_data(Grid2D::new(side, n), n_time, data).map_err(|e| format_err(e.to_string()))
}

/// Densities as rows `k,t,road,cell,density`.
pub fn write_densities_csv<W: Write>(w: W, traj: &TrafficTrajectory, scenario: &Scenario) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "t", "road", "cell", "density"])?;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        for (road, rho) in scenario.roads.iter().zip(&snap.densities) {
            for (n, r) in rho.iter().enumerate() {
                out.write_record([
                    k.to_string(),
                    snap.time.to_string(),
                    road.id.to_string(),
                    n.to_string(),
                    r.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Queue lengths as rows `k,t,road,queue`.
pub fn write_queues_csv<W: Write>(w: W, traj: &TrafficTrajectory, scenario: &Scenario) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "t", "road", "queue"])?;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        for (access, q) in scenario.access.iter().zip(&snap.queues) {
            out.write_record([
                k.to_string(),
                snap.time.to_string(),
                access.road.to_string(),
                q.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Interval-averaged boundary fluxes as rows `k,road,inflow,outflow`, where
/// row `k` covers `[t^k, t^{k+1}]`.
pub fn write_fluxes_csv<W: Write>(w: W, traj: &TrafficTrajectory, scenario: &Scenario) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "road", "inflow", "outflow"])?;
    for (k, f) in traj.flows.iter().enumerate() {
        for (e, road) in scenario.roads.iter().enumerate() {
            out.write_record([
                k.to_string(),
                road.id.to_string(),
                f.upstream[e].to_string(),
                f.downstream[e].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, IoError> {
    s.trim()
        .parse()
        .map_err(|_| format_err(format!("cannot parse {what} from {s:?}")))
}

/// Rebuilds the states of a trajectory from density and queue tables.
/// Boundary fluxes are not restored.
pub fn read_trajectory_csv<R1: Read, R2: Read>(
    densities: R1,
    queues: R2,
    scenario: &Scenario,
) -> Result<TrafficTrajectory, IoError> {
    let levels = scenario.n_time + 1;
    let mut snapshots: Vec<TrafficState> = (0..levels)
        .map(|_| TrafficState {
            densities: vec![vec![f64::NAN; scenario.n_cells]; scenario.roads.len()],
            queues: vec![f64::NAN; scenario.access.len()],
            time: f64::NAN,
        })
        .collect();
    let mut rdr = csv::Reader::from_reader(densities);
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(format_err("density rows need 5 columns"));
        }
        let k: usize = parse(&rec[0], "time index")?;
        let id: u32 = parse(&rec[2], "road id")?;
        let n: usize = parse(&rec[3], "cell index")?;
        let e = scenario
            .road_index(id)
            .ok_or_else(|| format_err(format!("unknown road id {id}")))?;
        if k >= levels || n >= scenario.n_cells {
            return Err(format_err(format!("row ({k}, {id}, {n}) outside the scenario grid")));
        }
        snapshots[k].time = parse(&rec[1], "time")?;
        snapshots[k].densities[e][n] = parse(&rec[4], "density")?;
    }
    let mut rdr = csv::Reader::from_reader(queues);
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(format_err("queue rows need 4 columns"));
        }
        let k: usize = parse(&rec[0], "time index")?;
        let id: u32 = parse(&rec[2], "road id")?;
        let a = scenario
            .access
            .iter()
            .position(|b| b.road == id)
            .ok_or_else(|| format_err(format!("road {id} has no access boundary")))?;
        if k >= levels {
            return Err(format_err(format!("time index {k} outside the scenario grid")));
        }
        snapshots[k].queues[a] = parse(&rec[3], "queue")?;
    }
    let complete = snapshots.iter().all(|s| {
        !s.time.is_nan()
            && s.queues.iter().all(|q| !q.is_nan())
            && s.densities.iter().flatten().all(|r| !r.is_nan())
    });
    if !complete {
        return Err(format_err("trajectory tables are incomplete"));
    }
    Ok(TrafficTrajectory {
        snapshots,
        flows: Vec::new(),
        substeps: 0,
    })
}

/// One row of a front or evaluation table.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontRow {
    pub policy: Vec<f64>,
    pub j_flow: f64,
    pub j_diff: f64,
    pub j_queue: f64,
    pub j_poll: f64,
}

/// Front table with columns `V_1..V_d,J_flow,J_diff,J_queue,J_poll`, then
/// any extra columns given in `extra` (one vector per row).
pub fn write_front_csv<W: Write>(
    w: W,
    rows: &[FrontRow],
    road_ids: &[u32],
    extra_header: &[String],
    extra: &[Vec<f64>],
) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = road_ids.iter().map(|id| format!("V_{id}")).collect();
    header.extend(["J_flow", "J_diff", "J_queue", "J_poll"].map(String::from));
    header.extend(extra_header.iter().cloned());
    out.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        if row.policy.len() != road_ids.len() {
            return Err(format_err("policy length does not match road ids"));
        }
        let mut rec: Vec<String> = row.policy.iter().map(f64::to_string).collect();
        rec.extend([row.j_flow, row.j_diff, row.j_queue, row.j_poll].map(|v| v.to_string()));
        if let Some(e) = extra.get(i) {
            rec.extend(e.iter().map(f64::to_string));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a front table by column name; `V_*` columns form the policy.
pub fn read_front_csv<R: Read>(r: R) -> Result<Vec<FrontRow>, IoError> {
    Ok(read_front_table(r)?.1)
}

/// Like [`read_front_csv`], also returning the road ids named by the `V_*`
/// columns.
pub fn read_front_table<R: Read>(r: R) -> Result<(Vec<u32>, Vec<FrontRow>), IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format_err(format!("front file lacks column {name}")))
    };
    let (flow, diff, queue) = (find("J_flow")?, find("J_diff")?, find("J_queue")?);
    let poll = header.iter().position(|h| h == "J_poll");
    let policy_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("V_"))
        .map(|(i, _)| i)
        .collect();
    let road_ids = policy_cols
        .iter()
        .map(|&c| parse(&header[c][2..], "road id"))
        .collect::<Result<Vec<u32>, _>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let j_diff: f64 = parse(&rec[diff], "J_diff")?;
        let j_queue: f64 = parse(&rec[queue], "J_queue")?;
        rows.push(FrontRow {
            policy: policy_cols
                .iter()
                .map(|&c| parse(&rec[c], "speed limit"))
                .collect::<Result<_, _>>()?,
            j_flow: parse(&rec[flow], "J_flow")?,
            j_diff,
            j_queue,
            j_poll: match poll {
                Some(c) => parse(&rec[c], "J_poll")?,
                None => j_diff,
            },
        });
    }
    Ok((road_ids, rows))
}
