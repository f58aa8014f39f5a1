//! Agent endpoint strings and the links they open.

use std::fmt;
use std::io;
use std::net::{SocketAddr, TcpListener};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::link::{AgentLink, LocalLink, StreamLink};
use super::oracle::OraclePolicy;
use super::random::RandomPolicy;
use crate::sim::BoundEpisode;

/// Where the agent for a run comes from.
///
/// - `random` or `random:SEED`: in-process random agent
/// - `oracle`: in-process privileged oracle
/// - `exec:CMD`: a subprocess speaking the protocol on its standard streams
/// - `tcp:ADDR`: the harness listens on `ADDR` and serves the first agent
///   to connect, once per episode
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Random(u64),
    Oracle,
    Exec(String),
    Tcp(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown agent endpoint `{0}` (expected random[:SEED], oracle, exec:CMD or tcp:ADDR)")]
pub struct EndpointError(String);

impl FromStr for Endpoint {
    type Err = EndpointError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EndpointError(s.to_string());
        match s.split_once(':') {
            None if s == "random" => Ok(Endpoint::Random(0)),
            None if s == "oracle" => Ok(Endpoint::Oracle),
            Some(("random", seed)) => seed.parse().map(Endpoint::Random).map_err(|_| bad()),
            Some(("exec", cmd)) if !cmd.trim().is_empty() => Ok(Endpoint::Exec(cmd.to_string())),
            Some(("tcp", addr)) if !addr.is_empty() => Ok(Endpoint::Tcp(addr.to_string())),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Random(seed) => write!(f, "random:{seed}"),
            Endpoint::Oracle => f.write_str("oracle"),
            Endpoint::Exec(cmd) => write!(f, "exec:{cmd}"),
            Endpoint::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

/// Opens one agent link per episode. A `tcp:` endpoint binds its listener
/// once, up front.
pub struct Connector {
    endpoint: Endpoint,
    listener: Option<TcpListener>,
    accept_timeout: Duration,
}

impl Connector {
    pub fn new(endpoint: Endpoint, accept_timeout: Duration) -> io::Result<Self> {
        let listener = match &endpoint {
            Endpoint::Tcp(addr) => Some(TcpListener::bind(addr.as_str())?),
            _ => None,
        };
        Ok(Self {
            endpoint,
            listener,
            accept_timeout,
        })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    /// Bound address of a `tcp:` endpoint; useful with port 0.
    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.listener.as_ref().and_then(|l| l.local_addr().ok())
    }

    pub fn open(&self, ep: &Arc<BoundEpisode>) -> io::Result<Box<dyn AgentLink + Send>> {
        Ok(match &self.endpoint {
            // Seed offset by the episode seed so batch runs differ per episode.
            Endpoint::Random(seed) => {
                Box::new(LocalLink::new(RandomPolicy::new(seed ^ ep.config.seed)))
            }
            Endpoint::Oracle => Box::new(LocalLink::new(OraclePolicy::new(ep.clone()))),
            Endpoint::Exec(cmd) => Box::new(StreamLink::exec(cmd)?),
            Endpoint::Tcp(_) => {
                let listener = self.listener.as_ref().expect("tcp endpoint has a listener");
                Box::new(StreamLink::accept(listener, self.accept_timeout)?)
            }
        })
    }
}
