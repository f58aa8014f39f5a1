//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rearrange_core::eval::{score, score_verdicts, spl, tour_problem};
use rearrange_core::gen::{
    generate, generated_tolerance, DifficultyParams, NoisePreset, RoomLayout,
};
use rearrange_core::geom::{box_iou, OrientedBox, Pose, Vec3};
use rearrange_core::goals::{derive_task_set, GeometricTarget, GoalDoc, ToleranceSpec};
use rearrange_core::harness::{
    replay_log, run_batch, run_episode, ActionLog, Connector, Endpoint, LocalLink, RandomPolicy,
    RunOptions,
};
use rearrange_core::pdl::{BoxLit, PredExpr, PredicateProgram};
use rearrange_core::sim::{BoundEpisode, EpisodeConfig};

type Check = fn() -> Result<String, String>;

fn main() -> ExitCode {
    let checks: [(&str, Check, Duration); 9] = [
        (
            "iou_oracle_equivalence",
            iou_oracle,
            Duration::from_secs(60),
        ),
        ("spl_formula", spl_formula, Duration::MAX),
        (
            "tsp_oracle_equivalence",
            tsp_oracle,
            Duration::from_secs(120),
        ),
        ("harm_gating", harm_gating, Duration::MAX),
        ("threshold_semantics", threshold_semantics, Duration::MAX),
        ("determinism", determinism, Duration::from_secs(120)),
        (
            "end_to_end_oracle",
            end_to_end_oracle,
            Duration::from_secs(300),
        ),
        ("experience_task_set", experience_task_set, Duration::MAX),
        ("dsl_round_trip", dsl_round_trip, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, check, budget) in checks {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = t0.elapsed();
        let result = result.and_then(|detail| {
            if elapsed > budget {
                Err(format!(
                    "{detail}; took {:.1} s, budget {} s",
                    elapsed.as_secs_f64(),
                    budget.as_secs()
                ))
            } else {
                Ok(detail)
            }
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail} ({:.2} s)", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} ({:.2} s)", elapsed.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- IoU

/// Box given as centre, half extents and a unit quaternion `[w, x, y, z]`.
#[derive(Clone, Copy)]
struct RawBox {
    c: [f64; 3],
    h: [f64; 3],
    q: [f64; 4],
}

impl RawBox {
    /// Rotation matrix of the quaternion; columns are the box axes.
    fn matrix(&self) -> [[f64; 3]; 3] {
        let [w, x, y, z] = self.q;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    fn world_extent(&self) -> [f64; 3] {
        let m = self.matrix();
        std::array::from_fn(|i| (0..3).map(|j| m[i][j].abs() * self.h[j]).sum())
    }

    fn contains(&self, m: &[[f64; 3]; 3], p: [f64; 3]) -> bool {
        let d = [p[0] - self.c[0], p[1] - self.c[1], p[2] - self.c[2]];
        (0..3).all(|j| {
            let local = m[0][j] * d[0] + m[1][j] * d[1] + m[2][j] * d[2];
            local.abs() <= self.h[j]
        })
    }

    fn to_box(self) -> OrientedBox {
        OrientedBox::new(
            Pose::from_parts(self.c, self.q).unwrap(),
            Vec3::from(self.h),
        )
        .unwrap()
    }
}

fn random_quaternion(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return q.map(|c| c / n);
        }
    }
}

/// Monte-Carlo IoU over uniform points in the union's bounding box.
fn monte_carlo_iou(a: &RawBox, b: &RawBox, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (ea, eb) = (a.world_extent(), b.world_extent());
    let lo: [f64; 3] = std::array::from_fn(|i| (a.c[i] - ea[i]).min(b.c[i] - eb[i]));
    let hi: [f64; 3] = std::array::from_fn(|i| (a.c[i] + ea[i]).max(b.c[i] + eb[i]));
    let (ma, mb) = (a.matrix(), b.matrix());
    let (mut both, mut either) = (0u64, 0u64);
    for _ in 0..n {
        let p: [f64; 3] = std::array::from_fn(|i| rng.random_range(lo[i]..hi[i]));
        let (ia, ib) = (a.contains(&ma, p), b.contains(&mb, p));
        both += u64::from(ia && ib);
        either += u64::from(ia || ib);
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

fn closed_form_aligned(amin: [f64; 3], amax: [f64; 3], bmin: [f64; 3], bmax: [f64; 3]) -> f64 {
    let vol =
        |lo: [f64; 3], hi: [f64; 3]| (0..3).map(|i| (hi[i] - lo[i]).max(0.0)).product::<f64>();
    let ilo: [f64; 3] = std::array::from_fn(|i| amin[i].max(bmin[i]));
    let ihi: [f64; 3] = std::array::from_fn(|i| amax[i].min(bmax[i]));
    let inter = vol(ilo, ihi);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (vol(amin, amax) + vol(bmin, bmax) - inter)
}

fn iou_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10);
    let mut worst: f64 = 0.0;
    for pair in 0..100 {
        let a = RawBox {
            c: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            h: std::array::from_fn(|_| rng.random_range(0.05..0.5)),
            q: random_quaternion(&mut rng),
        };
        let b = RawBox {
            c: std::array::from_fn(|i| a.c[i] + rng.random_range(-0.3..0.3)),
            h: std::array::from_fn(|_| rng.random_range(0.05..0.5)),
            q: random_quaternion(&mut rng),
        };
        let oracle = monte_carlo_iou(&a, &b, 1_000_000, &mut rng);
        let got = box_iou(&a.to_box(), &b.to_box());
        let err = (got - oracle).abs();
        worst = worst.max(err);
        ensure(err <= 0.01, || {
            format!("pair {pair}: iou {got:.4}, oracle {oracle:.4}")
        })?;
    }

    let mut worst_aligned: f64 = 0.0;
    for case in 0..1000 {
        let corner = |rng: &mut ChaCha8Rng| -> ([f64; 3], [f64; 3]) {
            let lo: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let hi: [f64; 3] = std::array::from_fn(|i| lo[i] + rng.random_range(0.01..1.0));
            (lo, hi)
        };
        let (amin, amax) = corner(&mut rng);
        let (bmin, bmax) = corner(&mut rng);
        let expected = closed_form_aligned(amin, amax, bmin, bmax);
        let a = OrientedBox::from_min_max(Vec3::from(amin), Vec3::from(amax)).unwrap();
        let b = OrientedBox::from_min_max(Vec3::from(bmin), Vec3::from(bmax)).unwrap();
        // The same box stated with a quarter turn and swapped extents.
        let h = b.half_extents();
        let turned = OrientedBox::new(
            Pose::from_xyz_yaw(
                b.center().x,
                b.center().y,
                b.center().z,
                std::f64::consts::FRAC_PI_2,
            ),
            Vec3::new(h.y, h.x, h.z),
        )
        .unwrap();
        for got in [box_iou(&a, &b), box_iou(&a, &turned)] {
            let err = (got - expected).abs();
            worst_aligned = worst_aligned.max(err);
            ensure(err <= 1e-12, || {
                format!("aligned case {case}: {got} vs {expected}")
            })?;
        }
    }
    Ok(format!(
        "100 oriented pairs, max error {worst:.4} vs 1e6-point oracle; 1000 aligned pairs, max error {worst_aligned:.1e}"
    ))
}

// ---------------------------------------------------------------- SPL

fn spl_formula() -> Result<String, String> {
    ensure(spl(true, 10.0, 12.5) == 0.8, || {
        format!("spl(1, 10, 12.5) = {}", spl(true, 10.0, 12.5))
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5b1);
    for i in 0..10_000 {
        let s = rng.random_bool(0.5);
        let l = rng.random_range(0.01..50.0);
        let l_a = if i % 10 == 0 {
            l
        } else {
            rng.random_range(0.01..100.0)
        };
        let direct = f64::from(u8::from(s)) * l / l_a.max(l);
        let got = spl(s, l, l_a);
        ensure(got == direct, || {
            format!("spl({s}, {l}, {l_a}) = {got}, direct {direct}")
        })?;
    }
    Ok("spl(1, 10, 12.5) = 0.8; 10^4 random triples identical".into())
}

// ---------------------------------------------------------------- TSP

fn tsp_oracle() -> Result<String, String> {
    let mut counts = [0usize; 7];
    let mut worst_gap: f64 = 0.0;
    let mut check = |ep: &EpisodeConfig| -> Result<(), String> {
        let bound = ep.bind().map_err(|e| format!("{}: {e}", ep.id))?;
        let problem = tour_problem(&bound).map_err(|e| format!("{}: {e}", ep.id))?;
        let n = problem.tour.len();
        let (_, exact) = problem.tour.exact();
        let (_, heuristic) = problem.tour.heuristic();
        counts[n] += 1;
        if n <= 4 {
            ensure(heuristic == exact, || {
                format!(
                    "{} ({n} tasks): heuristic {heuristic}, exact {exact}",
                    ep.id
                )
            })
        } else {
            worst_gap = worst_gap.max(heuristic / exact - 1.0);
            ensure(heuristic <= 1.05 * exact, || {
                format!(
                    "{} ({n} tasks): heuristic {heuristic}, exact {exact}",
                    ep.id
                )
            })
        }
    };
    let mut seed = 20_000;
    let mut suite = 0;
    while suite < 200 {
        seed += 1;
        let params = DifficultyParams {
            n_task_objects: 1 + suite % 5,
            n_distractors: 3,
            room: if suite % 4 == 3 {
                RoomLayout::Multi { rooms: 2 }
            } else {
                RoomLayout::Single
            },
            ..DifficultyParams::default()
        };
        let Ok(ep) = generate(seed, &params) else {
            continue;
        };
        check(&ep)?;
        suite += 1;
        if params.n_task_objects == 5 {
            check(&with_extra_task(&ep))?;
        }
    }
    ensure(counts[5] > 0 && counts[6] > 0, || {
        format!("task counts {counts:?}")
    })?;
    Ok(format!(
        "tasks 1..6 counts {:?}; exact for <= 4, worst gap {:.2}% for 5-6",
        &counts[1..],
        worst_gap * 100.0
    ))
}

/// Adds a sixth task by requiring a distractor to stay where it is.
fn with_extra_task(ep: &EpisodeConfig) -> EpisodeConfig {
    let mut ep = ep.clone();
    let GoalDoc::Geometric { targets, .. } = &mut ep.goal else {
        return ep;
    };
    let extra = ep
        .scene
        .specs()
        .find(|s| s.movable && !targets.contains_key(&s.id))
        .map(|s| s.id.clone());
    if let Some(id) = extra {
        let pose = ep.initial.objects[&id].pose;
        targets.insert(
            id,
            GeometricTarget {
                pose,
                open_fraction: None,
            },
        );
        ep.task_ids = targets.keys().cloned().collect();
    }
    ep
}

// ---------------------------------------------------------------- harm

fn harm_gating() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4a2);
    let mut gated = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=8);
        let verdicts: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        let harm = rng.random_bool(0.5);
        let out = score_verdicts(&verdicts, harm).map_err(|e| format!("case {case}: {e}"))?;
        let passed = verdicts.iter().filter(|v| **v).count();
        if harm {
            ensure(out.completion == passed as f64 / n as f64, || {
                format!("case {case}: {out:?}")
            })?;
        } else {
            gated += 1;
            ensure(out.completion == 0.0 && !out.success, || {
                format!("case {case}: {out:?}")
            })?;
        }
    }
    Ok(format!(
        "1000 cases, {gated} with a failed harm test, all zeroed"
    ))
}

// ---------------------------------------------------------------- thresholds

fn program_passes(world: &common::World, program: &str) -> Result<bool, String> {
    let ep = world.episode(
        "threshold",
        GoalDoc::Predicate {
            program: program.into(),
        },
    );
    let bound = ep.bind().map_err(|e| e.to_string())?;
    let (out, _) = score(&bound, &bound.initial).map_err(|e| e.to_string())?;
    Ok(out.success)
}

fn threshold_semantics() -> Result<String, String> {
    // A 0.5 m cube standing on the floor; target boxes share its footprint
    // and differ only in height.
    let world = common::room(6.0, 5.0).object("cube_0", [0.25, 0.25, 0.25], [3.0, 2.5, 0.25]);
    let cube =
        OrientedBox::aligned(Vec3::new(3.0, 2.5, 0.25), Vec3::new(0.25, 0.25, 0.25)).unwrap();
    let target = |iou: f64| {
        let hz = 0.25 / iou;
        (format!("(box (3 2.5 {hz}) (0.25 0.25 {hz}))"), hz)
    };
    let (half, hz) = target(0.5);
    let exact = box_iou(
        &cube,
        &OrientedBox::aligned(Vec3::new(3.0, 2.5, hz), Vec3::new(0.25, 0.25, hz)).unwrap(),
    );
    ensure(exact == 0.5, || {
        format!("constructed IoU is {exact}, not 0.5")
    })?;
    ensure(
        !program_passes(&world, &format!("(score (iou_gt cube_0 {half} 0.5))"))?,
        || "IoU 0.5 passes iou_gt 0.5".into(),
    )?;
    let (above, _) = target(0.51);
    ensure(
        program_passes(&world, &format!("(score (iou_gt cube_0 {above} 0.5))"))?,
        || "IoU 0.51 fails iou_gt 0.5".into(),
    )?;

    let fridge = |f: f64| common::room(6.0, 5.0).fixture("fridge_0", [3.0, 2.5], f);
    let open = "(score (open_between fridge_0 0 0.2))";
    ensure(program_passes(&fridge(0.20), open)?, || {
        "open 0.20 fails open_between 0 0.2".into()
    })?;
    ensure(!program_passes(&fridge(0.21), open)?, || {
        "open 0.21 passes open_between 0 0.2".into()
    })?;
    Ok("iou 0.5 fails and 0.51 passes; open 0.20 passes and 0.21 fails".into())
}

// ---------------------------------------------------------------- determinism

fn determinism() -> Result<String, String> {
    let mut steps = 0;
    let mut aborted = 0;
    for i in 0..100u64 {
        let params = DifficultyParams {
            n_task_objects: 1 + (i as usize) % 4,
            n_articulated: usize::from(i % 3 == 0),
            room: if i % 5 == 4 {
                RoomLayout::Multi { rooms: 3 }
            } else {
                RoomLayout::Single
            },
            noise: [
                NoisePreset::Off,
                NoisePreset::Low,
                NoisePreset::Default,
                NoisePreset::High,
            ][i as usize % 4],
            carry_capacity: (i as usize) % 3,
            ..DifficultyParams::default()
        };
        let mut cfg = generate(30_000 + i, &params).map_err(|e| format!("rollout {i}: {e}"))?;
        cfg.max_ticks = 500;
        let ep = Arc::new(cfg.bind().map_err(|e| e.to_string())?);
        let live = run_random(&ep, i)?;
        let again = run_random(&ep, i)?;
        let text = serde_json::to_string(&live.log).unwrap();
        let log: ActionLog = serde_json::from_str(&text).unwrap();
        let replayed = replay_log(ep.clone(), &log).map_err(|e| format!("rollout {i}: {e}"))?;
        for (what, other) in [("second run", &again), ("replay", &replayed)] {
            ensure(other.final_hash == live.final_hash, || {
                format!("rollout {i}: {what} hash differs")
            })?;
            ensure(
                other.report.without_latency() == live.report.without_latency(),
                || format!("rollout {i}: {what} report differs"),
            )?;
            ensure(other.log == live.log, || {
                format!("rollout {i}: {what} log differs")
            })?;
        }
        steps += live.log.actions.len();
        aborted += usize::from(live.report.aborted);
    }
    ensure(aborted == 0, || format!("{aborted} rollouts aborted"))?;
    ensure(steps == 100 * 500, || {
        format!("{steps} steps over 100 rollouts")
    })?;
    Ok("100 rollouts x 500 steps: hashes, reports and logs identical on rerun and replay".into())
}

fn run_random(
    ep: &Arc<BoundEpisode>,
    i: u64,
) -> Result<rearrange_core::harness::RunOutcome, String> {
    let mut link = LocalLink::new(RandomPolicy::new(i).with_stop_probability(0.0));
    run_episode(&mut link, ep.clone(), &RunOptions::default())
        .map_err(|e| format!("rollout {i}: {e}"))
}

// ---------------------------------------------------------------- oracle

fn end_to_end_oracle() -> Result<String, String> {
    let mut episodes = Vec::new();
    let mut seed = 40_000;
    while episodes.len() < 100 {
        seed += 1;
        let params = DifficultyParams {
            n_task_objects: 1 + episodes.len() % 3,
            noise: NoisePreset::Off,
            ..DifficultyParams::default()
        };
        if let Ok(ep) = generate(seed, &params) {
            episodes.push(Arc::new(ep.bind().map_err(|e| e.to_string())?));
        }
    }
    let connector =
        Connector::new(Endpoint::Oracle, Duration::from_secs(30)).map_err(|e| e.to_string())?;
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
    let results = run_batch(&episodes, &connector, &RunOptions::default(), threads);
    let mut efficient = 0;
    let mut failures = Vec::new();
    for (ep, r) in episodes.iter().zip(results) {
        let report = r.map_err(|e| format!("{}: {e}", ep.config.id))?.report;
        if !(report.success && report.completion == 1.0) {
            failures.push(ep.config.id.clone());
        }
        if report.agent_path_length <= 1.3 * report.shortest_path_length {
            efficient += 1;
        }
    }
    ensure(failures.is_empty(), || format!("unsolved: {failures:?}"))?;
    ensure(efficient >= 90, || {
        format!("only {efficient}/100 within 1.3x of the shortest path")
    })?;
    Ok(format!(
        "100/100 solved; {efficient}/100 within 1.3x of the shortest path"
    ))
}

// ---------------------------------------------------------------- experience goals

fn experience_task_set() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe4);
    let mut seed = 50_000;
    for case in 0..100u64 {
        let params = DifficultyParams {
            n_task_objects: 1 + (case as usize) % 5,
            n_distractors: 4,
            n_articulated: usize::from(case % 4 == 0),
            ..DifficultyParams::default()
        };
        let cfg = loop {
            seed += 1;
            if let Ok(cfg) = generate(seed, &params) {
                break cfg;
            }
        };
        let ep = cfg.bind().map_err(|e| e.to_string())?;
        let s0 = &ep.initial;
        // Alternate a tight tolerance with the generated default.
        let tol = if case % 2 == 0 {
            ToleranceSpec {
                translation: 0.1,
                ..generated_tolerance()
            }
        } else {
            generated_tolerance()
        };
        let movable: Vec<String> = ep
            .scene
            .specs()
            .filter(|s| s.movable)
            .map(|s| s.id.clone())
            .collect();
        let mut goal = s0.clone();
        let mut expected = Vec::new();
        for id in &movable {
            let st = goal.objects.get_mut(id).unwrap();
            let dir = rng.random_range(0.0..std::f64::consts::TAU);
            let t = st.pose.translation();
            let moved = expected.is_empty() || rng.random_bool(0.4);
            let dist = if moved {
                rng.random_range(2.0 * tol.translation..2.0 * tol.translation + 1.5)
            } else {
                rng.random_range(0.0..0.5 * tol.translation)
            };
            st.pose = st
                .pose
                .with_translation(t + Vec3::new(dist * dir.cos(), dist * dir.sin(), 0.0));
            if moved {
                expected.push(id.clone());
            }
        }
        let mut got = derive_task_set(s0, &goal, &tol).map_err(|e| format!("case {case}: {e}"))?;
        got.sort();
        expected.sort();
        ensure(got == expected, || {
            format!("case {case}: derived {got:?}, perturbed {expected:?}")
        })?;
    }
    Ok("100/100 constructions recover exactly the perturbed ids".into())
}

// ---------------------------------------------------------------- DSL

const IDS: [&str; 6] = ["cup_0", "table_b", "fridge_0", "book_12", "shelf", "x"];

fn num(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    f64::from(rng.random_range(lo..=hi)) / 1000.0
}

fn point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    std::array::from_fn(|_| num(rng, -20_000, 20_000))
}

fn box_lit(rng: &mut ChaCha8Rng) -> BoxLit {
    BoxLit {
        center: point(rng),
        half_extents: std::array::from_fn(|_| num(rng, 1, 5000)),
    }
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> PredExpr {
    let id = |rng: &mut ChaCha8Rng| IDS[rng.random_range(0..IDS.len())].to_string();
    let pick = if depth == 0 {
        rng.random_range(0..8)
    } else {
        rng.random_range(0..11)
    };
    match pick {
        0 => PredExpr::WithinM {
            id: id(rng),
            point: point(rng),
            radius: num(rng, 1, 5000),
        },
        1 => PredExpr::IouGt {
            id: id(rng),
            target: box_lit(rng),
            threshold: num(rng, 1, 1000),
        },
        2 => PredExpr::On {
            a: id(rng),
            b: id(rng),
        },
        3 => PredExpr::Inside {
            a: id(rng),
            b: id(rng),
        },
        4 => {
            let lo = rng.random_range(0..=1000);
            let hi = rng.random_range(lo..=1000);
            PredExpr::OpenBetween {
                id: id(rng),
                lo: f64::from(lo) / 1000.0,
                hi: f64::from(hi) / 1000.0,
            }
        }
        5 => PredExpr::InRegion {
            id: id(rng),
            region: box_lit(rng),
        },
        6 => PredExpr::Unmoved { id: id(rng) },
        7 => PredExpr::RelWithinM {
            a: id(rng),
            b: id(rng),
            radius: num(rng, 1, 5000),
        },
        8 => PredExpr::All(
            (0..rng.random_range(1..4))
                .map(|_| random_expr(rng, depth - 1))
                .collect(),
        ),
        9 => PredExpr::Any(
            (0..rng.random_range(1..4))
                .map(|_| random_expr(rng, depth - 1))
                .collect(),
        ),
        _ => PredExpr::Not(Box::new(random_expr(rng, depth - 1))),
    }
}

/// Malformed programs and where their diagnostics must point.
const BAD_PROGRAMS: [(&str, (usize, usize)); 16] = [
    ("", (1, 1)),
    ("(score", (1, 7)),
    ("(score (on a b)", (1, 16)),
    ("(score (on a b)))", (1, 17)),
    ("(score)", (1, 7)),
    ("(scor (on a b))", (1, 2)),
    ("(score (flies a))", (1, 9)),
    ("(score (on a))", (1, 9)),
    ("(score (within_m a (1 2) 0.5))", (1, 24)),
    ("(score (iou_gt a (box (0 0 0)) 0.5))", (1, 30)),
    ("(score (not))", (1, 12)),
    ("(score (on a b)) (harm (on a b) (on b a))", (1, 33)),
    ("(score (on a b)) extra", (1, 18)),
    ("(score (on a b) #)", (1, 17)),
    ("(score\n  (on a b)\n  (open_between f 0 nan))", (3, 21)),
    ("(score (within_m a (1 2 3) 1e999))", (1, 28)),
];

fn dsl_round_trip() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd51);
    for case in 0..1000 {
        let program = PredicateProgram {
            scored: (0..rng.random_range(1..5))
                .map(|_| random_expr(&mut rng, 3))
                .collect(),
            harm: rng.random_bool(0.5).then(|| random_expr(&mut rng, 2)),
        };
        let text = program.to_string();
        let back: PredicateProgram = text
            .parse()
            .map_err(|e| format!("case {case}: {e} in {text}"))?;
        let differs = program
            .scored
            .iter()
            .chain(&program.harm)
            .zip(back.scored.iter().chain(&back.harm))
            .find(|(a, b)| a != b);
        ensure(back == program, || {
            format!("case {case}: {text} parses differently at {differs:?}")
        })?;
        ensure(back.to_string() == text, || {
            format!("case {case}: reprint differs")
        })?;
    }
    let mut positions = BTreeMap::new();
    for (src, at) in BAD_PROGRAMS {
        let err = match src.parse::<PredicateProgram>() {
            Ok(p) => return Err(format!("{src:?} parsed as {p}")),
            Err(e) => e,
        };
        ensure((err.line, err.col) == at, || {
            format!(
                "{src:?}: reported {}:{}, expected {at:?}",
                err.line, err.col
            )
        })?;
        ensure(
            err.to_string().starts_with(&format!("{}:{}:", at.0, at.1)),
            || format!("{src:?}: message `{err}` lacks its position"),
        )?;
        positions.insert(src, at);
    }
    Ok(format!(
        "1000 random programs round-trip; {} malformed programs report their line and column",
        positions.len()
    ))
}
