use speedlimit::dispersion::solve_adjoint;
use speedlimit::io::{read_front_csv, read_grid_series, write_front_csv, write_grid_series};
use speedlimit::network::{
    serialize_scenario, validate_scenario, Inflow, InitialConcentration, ObjectiveMode,
};
use speedlimit::objectives::evaluate_policy;
use speedlimit::workflow::{front_rows, optimize, OptimizeConfig};
use speedlimit::{load_scenario, Evaluator, Scenario, SpeedLimitPolicy};

fn sample_file() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/diamond.json")).unwrap()
}

fn tiny() -> Scenario {
    let mut s = Scenario::sample();
    s.horizon = 0.5;
    s.n_time = 61;
    s.n_grid = 30;
    s.n_cells = 8;
    s.dispersion.mu = 1e-3;
    // sample densities are constant per road
    for road in &mut s.roads {
        road.rho0 = vec![road.rho0[0]; s.n_cells];
    }
    s
}

#[test]
fn shipped_file_is_the_sample() {
    let s = load_scenario(&sample_file()).unwrap();
    assert_eq!(s, Scenario::sample());
    assert!(validate_scenario(&s).is_valid());
    assert_eq!(load_scenario(&serialize_scenario(&s)).unwrap(), s);
}

#[test]
fn cached_adjoint_gives_identical_objectives() {
    let s = tiny();
    let adjoint = solve_adjoint(&s).unwrap();
    let mut bytes = Vec::new();
    write_grid_series(&mut bytes, &adjoint.values).unwrap();
    let reread = speedlimit::dispersion::AdjointField {
        values: read_grid_series(bytes.as_slice(), s.side).unwrap(),
    };
    let policy = SpeedLimitPolicy::new(vec![1.5, 0.5, 2.0, 1.0, 0.25, 2.0]);
    let a = evaluate_policy(&s, &policy, &adjoint).unwrap();
    let b = evaluate_policy(&s, &policy, &reread).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_inflow_leaves_only_the_initial_concentration() {
    let mut s = tiny();
    for road in &mut s.roads {
        road.rho0.fill(0.0);
    }
    for a in &mut s.access {
        a.inflow = Inflow::Constant(0.0);
    }
    s.phi0 = InitialConcentration::Constant(0.0);
    let ev = Evaluator::new(s.clone()).unwrap();
    let e = ev.evaluate(&SpeedLimitPolicy::uniform(&s, 1.0)).unwrap();
    assert_eq!((e.j_flow, e.j_diff, e.j_queue), (0.0, 0.0, 0.0));

    s.phi0 = InitialConcentration::Constant(1.0);
    let ev = Evaluator::new(s.clone()).unwrap();
    let e = ev.evaluate(&SpeedLimitPolicy::uniform(&s, 1.0)).unwrap();
    assert_eq!((e.j_flow, e.j_queue), (0.0, 0.0));
    assert!(e.j_diff > 0.0);
}

#[test]
fn front_survives_csv_round_trip() {
    let s = tiny();
    let ev = Evaluator::new(s.clone()).unwrap();
    let run = optimize(&ev, &OptimizeConfig::new(ObjectiveMode::ThreeObjective, 0.5, 2, 50)).unwrap();
    let rows = front_rows(&run.front);
    let mut buf = Vec::new();
    write_front_csv(&mut buf, &rows, &run.road_ids, &[], &[]).unwrap();
    assert_eq!(read_front_csv(buf.as_slice()).unwrap(), rows);
    for p in &run.front {
        assert!(p.policy.check_feasible(&s).is_ok());
        assert_eq!(p.objectives.as_slice(), &[-p.j_flow, p.j_diff, p.j_queue]);
    }
}
