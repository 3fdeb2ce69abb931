use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;

use speedlimit::dispersion::{adjoint_cache_key, solve_adjoint, AdjointField};
use speedlimit::io::{
    content_hash, read_front_table, read_grid_series, write_densities_csv, write_fluxes_csv,
    write_front_csv, write_grid_series, write_queues_csv, FrontRow,
};
use speedlimit::moo::SearchDiagnostics;
use speedlimit::network::{validate_scenario, Finding, ObjectiveMode, ScenarioError};
use speedlimit::workflow::{front_rows, optimize as run_optimize, write_front_files, OptimizeConfig};
use speedlimit::{load_scenario, Evaluator, Scenario, SpeedLimitPolicy};

use crate::manifest::{now, RunManifest};
use crate::{Coords, Failure};

type CmdResult = Result<u8, Failure>;

struct LoadedScenario {
    scenario: Scenario,
    path: PathBuf,
    hash: String,
}

fn load(path: &Path) -> Result<LoadedScenario, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)?;
    let text = std::str::from_utf8(&bytes)
        .with_context(|| format!("{} is not UTF-8", path.display()))
        .map_err(Failure::input)?;
    let scenario = load_scenario(text).map_err(|e| {
        let err = anyhow!(e.clone()).context(format!("loading {}", path.display()));
        match e {
            ScenarioError::Parse { .. } => Failure::input(err),
            ScenarioError::Schema { .. } => Failure::domain(err),
        }
    })?;
    Ok(LoadedScenario {
        scenario,
        path: path.to_path_buf(),
        hash: content_hash(&bytes),
    })
}

/// Rejects scenarios that fail validation, listing the findings.
fn require_valid(scenario: &Scenario) -> Result<(), Failure> {
    let report = validate_scenario(scenario);
    if report.is_valid() {
        return Ok(());
    }
    let lines: Vec<String> = report.findings.iter().map(|f| f.to_string()).collect();
    Err(Failure::domain(anyhow!("invalid scenario:\n{}", lines.join("\n"))))
}

fn io_failure(e: impl Into<anyhow::Error>) -> Failure {
    Failure::input(e)
}

fn create_out_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(io_failure)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(io_failure)
}

/// Loads the cached adjoint from `out` when its key and shape match the
/// scenario, otherwise solves and stores it.
fn adjoint_for(scenario: &Scenario, out: &Path) -> Result<(AdjointField, PathBuf), Failure> {
    let path = out.join(format!("adjoint-{}.bin", adjoint_cache_key(scenario)));
    if let Ok(file) = File::open(&path) {
        if let Ok(values) = read_grid_series(BufReader::new(file), scenario.side) {
            if values.grid == scenario.grid() && values.n_time == scenario.n_time {
                return Ok((AdjointField { values }, path));
            }
        }
    }
    let adjoint = solve_adjoint(scenario).map_err(Failure::domain)?;
    let tmp = out.join(".adjoint.tmp");
    let mut w = create(&tmp)?;
    write_grid_series(&mut w, &adjoint.values).map_err(io_failure)?;
    w.flush().map_err(io_failure)?;
    drop(w);
    fs::rename(&tmp, &path).map_err(io_failure)?;
    Ok((adjoint, path))
}

pub fn validate(scenario: &Path) -> CmdResult {
    let loaded = load(scenario)?;
    let report = validate_scenario(&loaded.scenario);
    println!("{}", report.cfl_line());
    for finding in &report.findings {
        if !matches!(finding, Finding::Cfl(_)) {
            println!("{finding}");
        }
    }
    Ok(if report.is_valid() { 0 } else { 1 })
}

fn parse_policy(text: &str) -> Result<SpeedLimitPolicy, Failure> {
    let values = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::input(anyhow!("cannot parse speed limit {v:?} in --policy")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpeedLimitPolicy::new(values))
}

pub fn simulate(scenario: &Path, policy: &str, out: &Path) -> CmdResult {
    let started = now();
    let loaded = load(scenario)?;
    let s = &loaded.scenario;
    let policy = parse_policy(policy)?;
    policy.check_feasible(s).map_err(Failure::domain)?;
    require_valid(s)?;
    create_out_dir(out)?;

    let (adjoint, adjoint_path) = adjoint_for(s, out)?;
    let evaluator = Evaluator::with_adjoint(s.clone(), adjoint).map_err(Failure::domain)?;
    let detail = evaluator.evaluate_detailed(&policy).map_err(Failure::domain)?;

    let densities = out.join("trajectory_density.csv");
    write_densities_csv(create(&densities)?, &detail.trajectory, s).map_err(io_failure)?;
    let queues = out.join("trajectory_queue.csv");
    write_queues_csv(create(&queues)?, &detail.trajectory, s).map_err(io_failure)?;
    let fluxes = out.join("trajectory_flux.csv");
    write_fluxes_csv(create(&fluxes)?, &detail.trajectory, s).map_err(io_failure)?;
    let emission = out.join("emission.bin");
    let mut w = create(&emission)?;
    write_grid_series(&mut w, &detail.emission.values).map_err(io_failure)?;
    w.flush().map_err(io_failure)?;
    let objectives = out.join("objectives.csv");
    let road_ids: Vec<u32> = s.roads.iter().map(|r| r.id).collect();
    write_front_csv(
        create(&objectives)?,
        &front_rows(std::slice::from_ref(&detail.evaluation)),
        &road_ids,
        &[],
        &[],
    )
    .map_err(io_failure)?;

    let ev = &detail.evaluation;
    println!("objectives ({}): {}", s.mode, ev.objectives);
    println!(
        "J_flow={} J_diff={} J_queue={} J_poll={}",
        ev.j_flow, ev.j_diff, ev.j_queue, ev.j_poll
    );

    let mut manifest = RunManifest::new("simulate", started).with_outputs(
        out,
        &[densities, queues, fluxes, emission, objectives, adjoint_path],
    );
    manifest.scenario = Some(loaded.path.display().to_string());
    manifest.scenario_hash = Some(loaded.hash);
    manifest.write(out).map_err(io_failure)?;
    Ok(0)
}

pub struct OptimizeArgs {
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub mode: Option<String>,
    pub delta: Option<f64>,
    pub seed: u64,
    pub budget: i64,
    pub jobs: usize,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    mode: String,
    delta: f64,
    seed: u64,
    budget: u64,
    ideal: &'a [f64],
    search: &'a SearchDiagnostics,
}

pub fn optimize(args: &OptimizeArgs) -> CmdResult {
    let started = now();
    let loaded = load(&args.scenario)?;
    let s = &loaded.scenario;
    let mode = match &args.mode {
        Some(m) => m.parse::<ObjectiveMode>().map_err(|e| Failure::domain(anyhow!(e)))?,
        None => s.mode,
    };
    let delta = args.delta.unwrap_or(s.delta);
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Failure::domain(anyhow!("delta must be a finite nonnegative number, got {delta}")));
    }
    if args.budget <= 0 {
        return Err(Failure::domain(anyhow!("budget must be positive, got {}", args.budget)));
    }
    if args.jobs == 0 {
        return Err(Failure::domain(anyhow!("jobs must be at least 1")));
    }
    let budget = args.budget as u64;
    require_valid(s)?;
    create_out_dir(&args.out)?;

    let (adjoint, adjoint_path) = adjoint_for(s, &args.out)?;
    let evaluator = Evaluator::with_adjoint(s.clone(), adjoint).map_err(Failure::domain)?;
    let mut cfg = OptimizeConfig::new(mode, delta, args.seed, budget as usize);
    cfg.jobs = args.jobs;
    let run = run_optimize(&evaluator, &cfg).map_err(Failure::domain)?;

    let mut outputs = write_front_files(&args.out, &run).map_err(io_failure)?;
    let diagnostics = args.out.join("diagnostics.json");
    let text = serde_json::to_string_pretty(&Diagnostics {
        mode: mode.to_string(),
        delta,
        seed: args.seed,
        budget,
        ideal: &run.ideal,
        search: &run.diagnostics,
    })
    .map_err(io_failure)?;
    fs::write(&diagnostics, text + "\n").map_err(io_failure)?;
    outputs.push(diagnostics);
    outputs.push(adjoint_path);

    println!(
        "front: {} members after {} evaluations ({:?})",
        run.front.len(),
        run.diagnostics.evaluations,
        run.diagnostics.stop_reason
    );

    let mut manifest = RunManifest::new("optimize", started).with_outputs(&args.out, &outputs);
    manifest.scenario = Some(loaded.path.display().to_string());
    manifest.scenario_hash = Some(loaded.hash);
    manifest.seed = Some(args.seed);
    manifest.budget = Some(budget);
    manifest.write(&args.out).map_err(io_failure)?;
    Ok(0)
}

/// Two plotting coordinates of a front row.
fn coordinates(row: &FrontRow, coords: Coords, delta: Option<f64>) -> [f64; 2] {
    match coords {
        Coords::FlowPoll => {
            let poll = match delta {
                Some(d) => row.j_diff + d * row.j_queue,
                None => row.j_poll,
            };
            [row.j_flow, poll]
        }
        Coords::DiffQueue => [row.j_diff, row.j_queue],
    }
}

pub fn export(
    front: &Path,
    coords: Coords,
    delta: Option<f64>,
    out: &Path,
    scenario: Option<&Path>,
) -> CmdResult {
    let started = now();
    if let Some(d) = delta {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Failure::domain(anyhow!("delta must be a finite nonnegative number, got {d}")));
        }
    }
    let bytes = fs::read(front)
        .with_context(|| format!("reading {}", front.display()))
        .map_err(io_failure)?;
    // a front file without even a header is an empty front
    let (road_ids, rows) = if bytes.iter().all(u8::is_ascii_whitespace) {
        (Vec::new(), Vec::new())
    } else {
        read_front_table(bytes.as_slice())
            .with_context(|| format!("reading {}", front.display()))
            .map_err(io_failure)?
    };
    let loaded = scenario.map(load).transpose()?;
    create_out_dir(out)?;

    let (name, columns) = match coords {
        Coords::FlowPoll => ("flow-poll", ["J_flow", "J_poll"]),
        Coords::DiffQueue => ("diff-queue", ["J_diff", "J_queue"]),
    };
    let path = out.join(format!("export_{name}.csv"));
    let mut w = create(&path)?;
    let mut header: Vec<String> = road_ids.iter().map(|id| format!("V_{id}")).collect();
    header.extend(columns.map(String::from));
    let write = |w: &mut BufWriter<File>, fields: &[String]| -> Result<(), Failure> {
        writeln!(w, "{}", fields.join(",")).map_err(io_failure)
    };
    write(&mut w, &header)?;
    for row in &rows {
        let mut fields: Vec<String> = row.policy.iter().map(f64::to_string).collect();
        fields.extend(coordinates(row, coords, delta).map(|v| v.to_string()));
        write(&mut w, &fields)?;
    }
    w.flush().map_err(io_failure)?;
    println!("wrote {} rows to {}", rows.len(), path.display());

    let mut manifest = RunManifest::new("export", started).with_outputs(out, &[path]);
    if let Some(l) = loaded {
        manifest.scenario = Some(l.path.display().to_string());
        manifest.scenario_hash = Some(l.hash);
    }
    manifest.write(out).map_err(io_failure)?;
    Ok(0)
}
