//! Delayed, observer-based adaptive consensus for networked two-link arms
//! with uncertain kinematics and dynamics.

pub mod analysis;
pub mod controller;
pub mod error;
pub mod graph;
pub mod network;
pub mod presets;
pub mod robot;
pub mod scenario;
pub mod sim;

pub use analysis::{consensus_report, ConsensusReport, DampingRow, SweepRow};
pub use controller::{AgentState, ControllerGains, Measurement, NeighborSample, PiServoGains, TaskSpacePd};
pub use error::{Error, Result, Violation};
pub use graph::DirectedGraph;
pub use network::DelayChannel;
pub use robot::{DynamicParams, KinematicParams, Robot, RobotState};
pub use scenario::{Integrator, Scenario, ScenarioConfig};
pub use sim::{run_config, run_scenario, AgentSample, Simulator, Trace};

pub use nalgebra;
