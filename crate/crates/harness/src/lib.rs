//! Command-line harness for webvoice: launches the services, runs scripted
//! scenarios on a virtual clock, and simulates NATs between adaptors.

pub mod live;
pub mod nat;
pub mod scenario;
pub mod sim;
pub mod world;

pub use nat::{Direction, DropReason, Filtering, Mapping, NatBehavior, NatCounters, NatModel, Packet, Verdict as NatVerdict};
pub use scenario::{Report, Scenario, Step, Verdict};
pub use sim::{LinkConfig, NetCounters, SimHost, SimNetwork};
pub use world::{sim_runtime, Party, SimWorld, START_MS};
