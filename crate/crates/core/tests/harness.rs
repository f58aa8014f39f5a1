mod common;

use std::collections::VecDeque;
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use common::{bind, geometric, one_object, room, target};
use rearrange_core::gen::{generate, DifficultyParams, GenGoalKind};
use rearrange_core::goals::GoalDoc;
use rearrange_core::harness::link::LinkError;
use rearrange_core::harness::protocol::{ErrorCode, GoalView, Phase};
use rearrange_core::harness::{
    replay_log, run_batch, run_episode, serve_policy, AgentLink, Connector, Endpoint, LocalLink,
    OraclePolicy, ProtocolMessage, RandomPolicy, RunOptions, StreamLink,
};
use rearrange_core::sim::{Action, BoundEpisode};

/// Agent that answers the handshake, then plays back fixed replies.
struct Scripted {
    hello_version: u32,
    replies: VecDeque<Result<ProtocolMessage, LinkError>>,
    pending: VecDeque<Result<ProtocolMessage, LinkError>>,
    received: Vec<ProtocolMessage>,
}

impl Scripted {
    fn new(replies: Vec<Result<ProtocolMessage, LinkError>>) -> Self {
        Self {
            hello_version: 1,
            replies: replies.into(),
            pending: VecDeque::new(),
            received: Vec::new(),
        }
    }

    fn errors(&self) -> Vec<ErrorCode> {
        self.received
            .iter()
            .filter_map(|m| match m {
                ProtocolMessage::Error { code, .. } => Some(*code),
                _ => None,
            })
            .collect()
    }
}

impl AgentLink for Scripted {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<(), LinkError> {
        self.received.push(msg.clone());
        match msg {
            ProtocolMessage::Hello { .. } => self.pending.push_back(Ok(ProtocolMessage::Hello {
                version: self.hello_version,
                episode: None,
                goal: None,
            })),
            ProtocolMessage::Observation { observation, .. } if !observation.done => {
                let next = self.replies.pop_front().unwrap_or(Err(LinkError::Closed));
                self.pending.push_back(next);
            }
            _ => {}
        }
        Ok(())
    }

    fn recv(&mut self, _timeout: Duration) -> Result<ProtocolMessage, LinkError> {
        self.pending.pop_front().unwrap_or(Err(LinkError::Closed))
    }
}

fn act(a: Action) -> Result<ProtocolMessage, LinkError> {
    Ok(ProtocolMessage::Action { action: a })
}

fn opts() -> RunOptions {
    RunOptions::default()
}

fn run_oracle(ep: &Arc<BoundEpisode>) -> rearrange_core::harness::RunOutcome {
    let mut link = LocalLink::new(OraclePolicy::new(ep.clone()));
    run_episode(&mut link, ep.clone(), &opts()).unwrap()
}

#[test]
fn oracle_solves_one_object_episode() {
    let ep = bind(&one_object());
    let out = run_oracle(&ep);
    let r = &out.report;
    assert!(r.success && r.completion == 1.0, "{r:?}");
    assert!(r.agent_path_length <= 1.3 * r.shortest_path_length, "{r:?}");
    assert_eq!(out.log.actions.last(), Some(&Action::Stop));
    r.check_invariants().unwrap();
}

#[test]
fn oracle_closes_the_fridge() {
    let w = room(6.0, 5.0)
        .agent(1.0, 1.0, 0.0)
        .fixture("fridge_0", [4.5, 3.5], 1.0);
    let mut t = target([4.5, 3.5, 0.9]);
    t.open_fraction = Some(0.0);
    let ep = bind(&w.episode("fridge", geometric(&[("fridge_0", t)])));
    let out = run_oracle(&ep);
    assert!(out.report.success, "{:?}", out.report);
    assert!(out.log.actions.iter().any(|a| matches!(
        a,
        Action::SetJoint { id, fraction } if id == "fridge_0" && *fraction == 0.0
    )));
}

#[test]
fn oracle_stops_at_once_when_goal_already_holds() {
    let mut ep = one_object();
    ep.goal = GoalDoc::Predicate {
        program: "(score (within_m cup_0 (2 3.4 0.81) 0.5))".into(),
    };
    let out = run_oracle(&bind(&ep));
    assert_eq!(out.log.actions, [Action::Stop]);
    assert_eq!(out.report.completion, 1.0);
    assert!(out.report.success);
}

#[test]
fn oracle_solves_generated_goal_kinds() {
    for kind in [
        GenGoalKind::Geometric,
        GenGoalKind::Predicate,
        GenGoalKind::Experience,
    ] {
        let params = DifficultyParams {
            goal_kind: kind,
            n_articulated: 1,
            ..DifficultyParams::default()
        };
        for seed in 0..5 {
            let ep = bind(&generate(seed, &params).unwrap());
            let r = run_oracle(&ep).report;
            assert!(r.success, "{kind:?} seed {seed}: {r:?}");
        }
    }
}

#[test]
fn malformed_action_aborts_the_run() {
    let ep = bind(&one_object());
    let mut link = Scripted::new(vec![
        act(Action::MoveForward),
        Err(LinkError::Malformed {
            line: "{\"type\":\"action\",\"action\":{\"type\":\"fly\"}}".into(),
            reason: "unknown variant".into(),
        }),
    ]);
    let out = run_episode(&mut link, ep, &opts()).unwrap();
    assert!(out.report.aborted && !out.report.success);
    assert_eq!(out.report.ticks, 1);
    assert_eq!(link.errors(), [ErrorCode::Malformed]);
    assert!(matches!(
        link.received.last(),
        Some(ProtocolMessage::Done { .. })
    ));
}

#[test]
fn invalid_action_aborts_the_run() {
    let ep = bind(&one_object());
    let mut link = Scripted::new(vec![act(Action::SetJoint {
        id: "cup_0".into(),
        fraction: 2.0,
    })]);
    let out = run_episode(&mut link, ep, &opts()).unwrap();
    assert!(out.report.aborted);
    assert_eq!(link.errors(), [ErrorCode::InvalidAction]);
}

#[test]
fn version_mismatch_is_refused() {
    let ep = bind(&one_object());
    let mut link = Scripted::new(vec![]);
    link.hello_version = 99;
    let out = run_episode(&mut link, ep, &opts()).unwrap();
    assert!(out.report.aborted);
    assert_eq!(out.report.ticks, 0);
    assert_eq!(link.errors(), [ErrorCode::VersionMismatch]);
}

#[test]
fn disconnect_scores_what_was_reached() {
    let ep = bind(&one_object());
    let mut link = Scripted::new(vec![act(Action::TurnLeft), act(Action::MoveForward)]);
    let out = run_episode(&mut link, ep, &opts()).unwrap();
    let r = &out.report;
    assert!(r.aborted && !r.success);
    assert_eq!(r.abort_reason.as_deref(), Some("agent disconnected"));
    assert_eq!(r.ticks, 2);
    assert_eq!(out.log.actions.len(), 2);
    r.check_invariants().unwrap();
}

#[test]
fn silent_agent_trips_the_watchdog() {
    let connector =
        Connector::new(Endpoint::Tcp("127.0.0.1:0".into()), Duration::from_secs(5)).unwrap();
    let addr = connector.local_addr().unwrap();
    let silent = thread::spawn(move || {
        let mut link = StreamLink::from_tcp(TcpStream::connect(addr).unwrap()).unwrap();
        let _hello = link.recv(Duration::from_secs(5)).unwrap();
        link.send(&ProtocolMessage::client_hello()).unwrap();
        // Read until the harness gives up, never answering.
        let mut seen = Vec::new();
        while let Ok(m) = link.recv(Duration::from_secs(5)) {
            seen.push(m);
        }
        seen
    });
    let ep = bind(&one_object());
    let mut link = connector.open(&ep).unwrap();
    let opts = RunOptions {
        watchdog: Duration::from_millis(200),
    };
    let out = run_episode(link.as_mut(), ep, &opts).unwrap();
    drop(link);
    assert!(out.report.aborted);
    assert!(out.report.abort_reason.unwrap().starts_with("watchdog"));
    let seen = silent.join().unwrap();
    assert!(seen.iter().any(|m| matches!(
        m,
        ProtocolMessage::Error {
            code: ErrorCode::Timeout,
            ..
        }
    )));
}

#[test]
fn socket_and_in_process_runs_agree() {
    let ep = bind(&generate(11, &DifficultyParams::default()).unwrap());
    let connector =
        Connector::new(Endpoint::Tcp("127.0.0.1:0".into()), Duration::from_secs(5)).unwrap();
    let addr = connector.local_addr().unwrap();
    let ep2 = ep.clone();
    let client = thread::spawn(move || {
        let mut policy = OraclePolicy::new(ep2);
        let mut link = StreamLink::connect(addr).unwrap();
        serve_policy(&mut policy, &mut link, Duration::from_secs(10)).unwrap()
    });
    let mut link = connector.open(&ep).unwrap();
    let remote = run_episode(link.as_mut(), ep.clone(), &opts()).unwrap();
    let client_report = client.join().unwrap();
    let local = run_oracle(&ep);
    assert_eq!(
        remote.report.without_latency(),
        local.report.without_latency()
    );
    assert_eq!(remote.final_hash, local.final_hash);
    assert_eq!(
        client_report.without_latency(),
        remote.report.without_latency()
    );
    assert!(remote.report.success);
}

#[test]
fn replay_reproduces_the_report() {
    let ep = bind(&generate(3, &DifficultyParams::default()).unwrap());
    for out in [
        run_episode(
            &mut LocalLink::new(RandomPolicy::new(9).with_stop_probability(0.002)),
            ep.clone(),
            &opts(),
        )
        .unwrap(),
        run_oracle(&ep),
    ] {
        let again = replay_log(ep.clone(), &out.log).unwrap();
        assert_eq!(again.report, out.report.without_latency());
        assert_eq!(again.final_hash, out.final_hash);
    }
}

#[test]
fn replay_keeps_the_abort() {
    let ep = bind(&one_object());
    let mut link = Scripted::new(vec![act(Action::TurnLeft)]);
    let out = run_episode(&mut link, ep.clone(), &opts()).unwrap();
    let again = replay_log(ep, &out.log).unwrap();
    assert_eq!(again.report, out.report.without_latency());
}

#[test]
fn random_agents_never_break_report_invariants() {
    // 50 episodes of 200 ticks: 10^4 steps.
    let params = DifficultyParams {
        n_articulated: 1,
        n_distractors: 3,
        ..DifficultyParams::default()
    };
    let eps: Vec<Arc<BoundEpisode>> = (0..50)
        .map(|seed| {
            let mut ep = generate(seed, &params).unwrap();
            ep.max_ticks = 200;
            bind(&ep)
        })
        .collect();
    let connector = Connector::new(Endpoint::Random(1), Duration::from_secs(1)).unwrap();
    let results = run_batch(&eps, &connector, &opts(), 4);
    let mut steps = 0;
    for (ep, r) in eps.iter().zip(results) {
        let out = r.unwrap();
        assert_eq!(out.report.episode_id, ep.config.id);
        out.report.check_invariants().unwrap();
        assert!(!out.report.aborted);
        steps += out.log.actions.len();
    }
    assert_eq!(steps, 10_000);
}

#[test]
fn experience_goals_explore_first() {
    let params = DifficultyParams {
        goal_kind: GenGoalKind::Experience,
        ..DifficultyParams::default()
    };
    let mut cfg = generate(2, &params).unwrap();
    cfg.max_ticks = 50;
    let GoalDoc::Experience {
        exploration_budget, ..
    } = &mut cfg.goal
    else {
        panic!("experience goal")
    };
    *exploration_budget = 30;
    let ep = bind(&cfg);
    let mut link = Scripted::new((0..80).map(|_| act(Action::TurnLeft)).collect());
    let out = run_episode(&mut link, ep, &opts()).unwrap();
    assert_eq!(out.log.exploration.len(), 30);
    assert_eq!(out.log.actions.len(), 50);
    let phases: Vec<Phase> = link
        .received
        .iter()
        .filter_map(|m| match m {
            ProtocolMessage::Observation { phase, .. } => Some(*phase),
            _ => None,
        })
        .collect();
    assert_eq!(
        phases.iter().filter(|p| **p == Phase::Exploration).count(),
        31
    );
    assert_eq!(phases.iter().filter(|p| **p == Phase::Scored).count(), 51);
    let ProtocolMessage::Hello {
        goal: Some(GoalView::Experience { exploration_budget }),
        ..
    } = &link.received[0]
    else {
        panic!("hello first")
    };
    assert_eq!(*exploration_budget, 30);
}

#[test]
fn hidden_thresholds_are_redacted_in_hello() {
    let mut cfg = one_object();
    cfg.goal = GoalDoc::Predicate {
        program: "(score (within_m cup_0 (4.3 1.2 0.81) 0.25))".into(),
    };
    cfg.hidden_params = true;
    let hello = ProtocolMessage::hello_for(&bind(&cfg));
    let ProtocolMessage::Hello {
        goal: Some(GoalView::Predicate { program }),
        ..
    } = hello
    else {
        panic!("predicate view")
    };
    assert!(!program.contains("0.25"), "{program}");
    assert!(program.contains("cup_0"));
}
