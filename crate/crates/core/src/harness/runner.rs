//! Episode runner: drives one agent link through an episode and scores the
//! result.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::endpoint::Connector;
use super::link::{AgentLink, LinkError};
use super::protocol::{ErrorCode, Phase, ProtocolMessage, PROTOCOL_VERSION};
use crate::eval::{evaluate_final, Accounting, EvaluationReport, LatencyStats, ReportError};
use crate::goals::GoalSpec;
use crate::scene::{snapshot_hash, StateDoc};
use crate::sim::{Action, BoundEpisode, Env, SimError};

/// Default time an agent may stay silent before the run is aborted.
pub const DEFAULT_WATCHDOG: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub watchdog: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            watchdog: DEFAULT_WATCHDOG,
        }
    }
}

/// Everything needed to reproduce a run's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLog {
    pub episode_id: String,
    pub seed: u64,
    /// Actions of the unscored exploration phase, kept for reference.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exploration: Vec<Action>,
    /// Scored-phase actions in order.
    pub actions: Vec<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvaluationReport,
    pub log: ActionLog,
    pub final_state: StateDoc,
    pub final_hash: u64,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("could not reach agent: {0}")]
    Connect(#[from] std::io::Error),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("replay: {0}")]
    Sim(#[from] SimError),
    #[error("log is for episode `{log}`, not `{episode}`")]
    WrongEpisode { log: String, episode: String },
}

enum PhaseEnd {
    Finished,
    Aborted(String),
}

struct Session<'a> {
    link: &'a mut dyn AgentLink,
    watchdog: Duration,
    latencies: Vec<f64>,
}

impl Session<'_> {
    /// Best effort: the agent may already be gone.
    fn notify(&mut self, code: ErrorCode, text: &str) {
        let _ = self.link.send(&ProtocolMessage::error(code, text));
    }

    fn fail(&mut self, err: LinkError) -> PhaseEnd {
        match err {
            LinkError::Timeout(d) => {
                let text = format!("no message for {:.1} s", d.as_secs_f64());
                self.notify(ErrorCode::Timeout, &text);
                PhaseEnd::Aborted(format!("watchdog: {text}"))
            }
            LinkError::Malformed { line, reason } => {
                let text = format!("cannot parse `{line}`: {reason}");
                self.notify(ErrorCode::Malformed, &text);
                PhaseEnd::Aborted(format!("malformed message: {reason}"))
            }
            LinkError::Closed => PhaseEnd::Aborted("agent disconnected".into()),
            LinkError::Io(e) => PhaseEnd::Aborted(format!("transport: {e}")),
        }
    }

    fn handshake(&mut self, ep: &BoundEpisode) -> Result<(), PhaseEnd> {
        self.link
            .send(&ProtocolMessage::hello_for(ep))
            .map_err(|e| self.fail(e))?;
        match self.link.recv(self.watchdog) {
            Ok(ProtocolMessage::Hello { version, .. }) if version == PROTOCOL_VERSION => Ok(()),
            Ok(ProtocolMessage::Hello { version, .. }) => {
                let text = format!("harness speaks version {PROTOCOL_VERSION}, agent {version}");
                self.notify(ErrorCode::VersionMismatch, &text);
                Err(PhaseEnd::Aborted(text))
            }
            Ok(ProtocolMessage::Error { text, .. }) => {
                Err(PhaseEnd::Aborted(format!("agent error: {text}")))
            }
            Ok(_) => {
                self.notify(ErrorCode::UnexpectedMessage, "expected hello");
                Err(PhaseEnd::Aborted("agent skipped the handshake".into()))
            }
            Err(e) => Err(self.fail(e)),
        }
    }

    /// Exchanges observations and actions until the environment is done.
    fn drive(&mut self, env: &mut Env, phase: Phase, mut obs: crate::sim::Observation) -> PhaseEnd {
        loop {
            if let Err(e) = self.link.send(&ProtocolMessage::Observation {
                phase,
                observation: obs.clone(),
            }) {
                return self.fail(e);
            }
            if obs.done {
                return PhaseEnd::Finished;
            }
            let t0 = Instant::now();
            let msg = self.link.recv(self.watchdog);
            let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
            let action = match msg {
                Ok(ProtocolMessage::Action { action }) => action,
                Ok(ProtocolMessage::Error { text, .. }) => {
                    return PhaseEnd::Aborted(format!("agent error: {text}"))
                }
                Ok(_) => {
                    self.notify(ErrorCode::UnexpectedMessage, "expected action");
                    return PhaseEnd::Aborted("unexpected message instead of an action".into());
                }
                Err(e) => return self.fail(e),
            };
            if phase == Phase::Scored {
                self.latencies.push(elapsed_ms);
            }
            obs = match env.step(action) {
                Ok(o) => o,
                Err(e) => {
                    let text = e.to_string();
                    self.notify(ErrorCode::InvalidAction, &text);
                    return PhaseEnd::Aborted(text);
                }
            };
        }
    }
}

/// Runs one episode against `link`. Agent misbehaviour ends the run early
/// with an aborted report; the state reached so far is still scored.
pub fn run_episode(
    link: &mut dyn AgentLink,
    ep: Arc<BoundEpisode>,
    opts: &RunOptions,
) -> Result<RunOutcome, HarnessError> {
    let mut session = Session {
        link,
        watchdog: opts.watchdog,
        latencies: Vec::new(),
    };
    let mut env = Env::new();
    let mut exploration = Vec::new();
    let mut end = match session.handshake(&ep) {
        Ok(()) => PhaseEnd::Finished,
        Err(end) => end,
    };
    if let (
        PhaseEnd::Finished,
        GoalSpec::Experience {
            goal_state,
            exploration_budget,
        },
    ) = (&end, &ep.goal)
    {
        let mut world = goal_state.clone();
        world.agent = ep.initial.agent.clone();
        let obs = env.reset_to_state(ep.clone(), world, *exploration_budget);
        end = session.drive(&mut env, Phase::Exploration, obs);
        exploration = env.action_log().to_vec();
    }
    let obs = env.reset_bound(ep.clone());
    if let PhaseEnd::Finished = end {
        end = session.drive(&mut env, Phase::Scored, obs);
    }
    let state = env.state()?;
    let acct = Accounting {
        ticks: env.tick(),
        energy: env.energy(),
        path_length: env.path_length(),
    };
    let mut report = evaluate_final(&ep, state, acct)?;
    let abort_reason = match end {
        PhaseEnd::Finished => None,
        PhaseEnd::Aborted(reason) => {
            report.abort(reason.clone());
            Some(reason)
        }
    };
    report.decision_latency = LatencyStats::from_samples(&session.latencies);
    let _ = session.link.send(&ProtocolMessage::Done {
        report: report.clone(),
    });
    Ok(RunOutcome {
        log: ActionLog {
            episode_id: ep.config.id.clone(),
            seed: ep.config.seed,
            exploration,
            actions: env.action_log().to_vec(),
            abort_reason,
        },
        final_state: state.to_doc(),
        final_hash: snapshot_hash(state),
        report,
    })
}

/// Re-applies a log's scored actions and rebuilds the report.
pub fn replay_log(ep: Arc<BoundEpisode>, log: &ActionLog) -> Result<RunOutcome, HarnessError> {
    if log.episode_id != ep.config.id {
        return Err(HarnessError::WrongEpisode {
            log: log.episode_id.clone(),
            episode: ep.config.id.clone(),
        });
    }
    let env = Env::replay(ep.clone(), &log.actions)?;
    let state = env.state()?;
    let acct = Accounting {
        ticks: env.tick(),
        energy: env.energy(),
        path_length: env.path_length(),
    };
    let mut report = evaluate_final(&ep, state, acct)?;
    if let Some(reason) = &log.abort_reason {
        report.abort(reason.clone());
    }
    Ok(RunOutcome {
        report,
        log: log.clone(),
        final_state: state.to_doc(),
        final_hash: snapshot_hash(state),
    })
}

/// Runs every episode, up to `threads` at a time, each over its own link.
/// Results come back in input order.
pub fn run_batch(
    episodes: &[Arc<BoundEpisode>],
    connector: &Connector,
    opts: &RunOptions,
    threads: usize,
) -> Vec<Result<RunOutcome, HarnessError>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunOutcome, HarnessError>>>> =
        Mutex::new((0..episodes.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..threads.clamp(1, episodes.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(ep) = episodes.get(i) else { break };
                let r = connector
                    .open(ep)
                    .map_err(HarnessError::from)
                    .and_then(|mut link| run_episode(link.as_mut(), ep.clone(), opts));
                results.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every episode ran"))
        .collect()
}
