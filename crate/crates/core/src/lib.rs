//! Link-quality OLSR routing with a speed-weighted ETX metric, plus a
//! discrete-event simulator for comparing it against plain ETX on UAV
//! relay scenarios.

pub mod metrics;
pub mod model;
pub mod routing;
pub mod scenarios;
pub mod sim;
pub mod wire;

pub use model::{MetricKind, NodeId, Position, ProtocolConfig, SimTime};
pub use routing::{OlsrNode, Route, RoutingTable};
pub use scenarios::{Algorithm, Scenario, ScenarioKind};
pub use sim::{ChannelModel, EventLog, MobilityTrace, TrafficPlan};
