//! Speed-limit policies for road networks, judged by traffic flow and air
//! pollution.
//!
//! The pipeline runs an LWR traffic model on a network of straight roads,
//! turns densities and flows into emission rates on a 2D grid, and measures
//! the average pollutant mass in the control area through the solution of an
//! adjoint advection-diffusion equation. The adjoint is solved once per
//! scenario; each policy evaluation only reruns the traffic model.
//!
//! ```
//! use speedlimit::network::{Scenario, SpeedLimitPolicy};
//! use speedlimit::traffic::simulate_traffic;
//!
//! let scenario = Scenario::sample();
//! let policy = SpeedLimitPolicy::uniform(&scenario, 1.0);
//! let traj = simulate_traffic(&scenario, &policy).unwrap();
//! assert_eq!(traj.snapshots.len(), scenario.n_time + 1);
//! ```

pub mod dispersion;
pub mod emission;
pub mod io;
pub mod moo;
pub mod network;
pub mod objectives;
pub mod traffic;
pub mod workflow;

pub use network::{load_scenario, Scenario, SpeedLimitPolicy};
pub use objectives::{Evaluator, ObjectiveVector, PolicyEvaluation};

// the guide's snippets run as doc-tests, one module per chapter
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/traffic.md")]
    mod traffic {}
    #[doc = include_str!("../../../book/src/emission.md")]
    mod emission {}
    #[doc = include_str!("../../../book/src/dispersion.md")]
    mod dispersion {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    mod objectives {}
    #[doc = include_str!("../../../book/src/pareto.md")]
    mod pareto {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
