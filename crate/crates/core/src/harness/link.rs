//! Connections between the runner and an agent.

use std::collections::VecDeque;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::protocol::{Phase, ProtocolMessage};
use crate::sim::{Action, Observation};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("agent silent for {0:?}")]
    Timeout(Duration),
    #[error("agent disconnected")]
    Closed,
    #[error("malformed message `{line}`: {reason}")]
    Malformed { line: String, reason: String },
}

/// The runner's view of an agent: it sends protocol messages and waits for
/// replies.
pub trait AgentLink {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<(), LinkError>;
    fn recv(&mut self, timeout: Duration) -> Result<ProtocolMessage, LinkError>;
}

/// A decision function, usable in-process or behind a wire client.
pub trait Policy: Send {
    /// Called with the harness `hello` before the first observation.
    fn start(&mut self, _hello: &ProtocolMessage) {}
    fn act(&mut self, phase: Phase, obs: &Observation) -> Action;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn start(&mut self, hello: &ProtocolMessage) {
        (**self).start(hello)
    }

    fn act(&mut self, phase: Phase, obs: &Observation) -> Action {
        (**self).act(phase, obs)
    }
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn start(&mut self, hello: &ProtocolMessage) {
        (**self).start(hello)
    }

    fn act(&mut self, phase: Phase, obs: &Observation) -> Action {
        (**self).act(phase, obs)
    }
}

/// Runs a policy in the runner's own thread, without serialisation.
pub struct LocalLink<P> {
    policy: P,
    outbox: VecDeque<ProtocolMessage>,
}

impl<P: Policy> LocalLink<P> {
    pub fn new(policy: P) -> Self {
        Self {
            policy,
            outbox: VecDeque::new(),
        }
    }
}

impl<P: Policy> AgentLink for LocalLink<P> {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<(), LinkError> {
        match msg {
            ProtocolMessage::Hello { .. } => {
                self.policy.start(msg);
                self.outbox.push_back(ProtocolMessage::client_hello());
            }
            ProtocolMessage::Observation { phase, observation } if !observation.done => {
                let action = self.policy.act(*phase, observation);
                self.outbox.push_back(ProtocolMessage::Action { action });
            }
            _ => {}
        }
        Ok(())
    }

    fn recv(&mut self, _timeout: Duration) -> Result<ProtocolMessage, LinkError> {
        self.outbox.pop_front().ok_or(LinkError::Closed)
    }
}

/// Newline-delimited messages over a byte stream. A reader thread feeds a
/// channel so receives can time out.
pub struct StreamLink {
    lines: Receiver<io::Result<String>>,
    writer: Option<Box<dyn Write + Send>>,
    child: Option<Child>,
}

impl StreamLink {
    pub fn new(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            lines: rx,
            writer: Some(Box::new(writer)),
            child: None,
        }
    }

    /// Starts `cmd` through the shell and talks over its standard streams.
    pub fn exec(cmd: &str) -> io::Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut link = Self::new(stdout, stdin);
        link.child = Some(child);
        Ok(link)
    }

    /// Waits up to `timeout` for one agent to connect.
    pub fn accept(listener: &TcpListener, timeout: Duration) -> io::Result<Self> {
        listener.set_nonblocking(true)?;
        let deadline = Instant::now() + timeout;
        loop {
            match listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    return Self::from_tcp(stream);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(io::Error::new(
                            io::ErrorKind::TimedOut,
                            "no agent connected",
                        ));
                    }
                    thread::sleep(Duration::from_millis(10));
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Self::from_tcp(TcpStream::connect(addr)?)
    }

    pub fn from_tcp(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::new(reader, stream))
    }
}

impl AgentLink for StreamLink {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<(), LinkError> {
        let w = self.writer.as_mut().ok_or(LinkError::Closed)?;
        let mut line = msg.to_line();
        line.push('\n');
        w.write_all(line.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| match e.kind() {
                io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset => LinkError::Closed,
                _ => LinkError::Io(e),
            })
    }

    fn recv(&mut self, timeout: Duration) -> Result<ProtocolMessage, LinkError> {
        loop {
            let line = match self.lines.recv_timeout(timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(LinkError::Io(e)),
                Err(RecvTimeoutError::Timeout) => return Err(LinkError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => return Err(LinkError::Closed),
            };
            if line.trim().is_empty() {
                continue;
            }
            return ProtocolMessage::from_line(&line).map_err(|e| LinkError::Malformed {
                line,
                reason: e.to_string(),
            });
        }
    }
}

impl Drop for StreamLink {
    fn drop(&mut self) {
        // Closing stdin tells a well-behaved agent to exit.
        self.writer = None;
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_secs(2);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("harness speaks protocol version {0}")]
    Version(u32),
    #[error("harness error: {0}")]
    Harness(String),
    #[error("unexpected message from harness")]
    Unexpected,
}

/// Agent side of the protocol: answers every observation with the
/// policy's action until the harness reports the result.
pub fn serve_policy<P: Policy>(
    policy: &mut P,
    link: &mut dyn AgentLink,
    timeout: Duration,
) -> Result<crate::eval::EvaluationReport, ClientError> {
    let hello = link.recv(timeout)?;
    match &hello {
        ProtocolMessage::Hello { version, .. } if *version == super::protocol::PROTOCOL_VERSION => {
        }
        ProtocolMessage::Hello { version, .. } => {
            link.send(&ProtocolMessage::error(
                super::protocol::ErrorCode::VersionMismatch,
                format!("agent speaks version {}", super::protocol::PROTOCOL_VERSION),
            ))?;
            return Err(ClientError::Version(*version));
        }
        _ => return Err(ClientError::Unexpected),
    }
    policy.start(&hello);
    link.send(&ProtocolMessage::client_hello())?;
    loop {
        match link.recv(timeout)? {
            ProtocolMessage::Observation { phase, observation } => {
                if !observation.done {
                    let action = policy.act(phase, &observation);
                    link.send(&ProtocolMessage::Action { action })?;
                }
            }
            ProtocolMessage::Done { report } => return Ok(report),
            ProtocolMessage::Error { text, .. } => return Err(ClientError::Harness(text)),
            _ => return Err(ClientError::Unexpected),
        }
    }
}
