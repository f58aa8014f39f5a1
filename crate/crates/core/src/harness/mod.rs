//! Episode runner, agent transports, baseline agents and file formats.

pub mod endpoint;
pub mod files;
pub mod link;
pub mod oracle;
pub mod protocol;
pub mod random;
pub mod runner;

pub use endpoint::{Connector, Endpoint};
pub use link::{serve_policy, AgentLink, LocalLink, Policy, StreamLink};
pub use oracle::OraclePolicy;
pub use protocol::{Phase, ProtocolMessage, PROTOCOL_VERSION};
pub use random::RandomPolicy;
pub use runner::{
    replay_log, run_batch, run_episode, ActionLog, HarnessError, RunOptions, RunOutcome,
};
