//! Survivable provisioning in few-mode-fiber networks with mode-group
//! division multiplexing: shared and dedicated path protection with
//! spectrum- and MIMO-aware backup selection.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fmt;
pub mod oracle;
pub mod provision;
pub mod spp;
pub mod state;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
pub use fmt::{mimo_complexity, GroupSelector, MimoCost, ModeGroup, ReachTable, ScenarioKind};
pub use provision::{provision_all, provision_request, Assignment, Planner, Request};
pub use spp::{assign_backup, Objective, ProtectionMode};
pub use state::NetworkState;
pub use topology::{NodeId, Route, Topology};
