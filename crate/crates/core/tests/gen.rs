use rearrange_core::gen::{
    generate, generate_split, validate_solvable, DifficultyParams, RoomLayout, Split,
};
use rearrange_core::geom::{Pose, Vec3};
use rearrange_core::goals::GoalDoc;
use rearrange_core::scene::StaticBox;

fn multi() -> DifficultyParams {
    DifficultyParams {
        n_task_objects: 3,
        room: RoomLayout::Multi { rooms: 3 },
        ..DifficultyParams::default()
    }
}

/// Index of the room (rooms are laid out along x) containing `x`.
fn room_of(ep: &rearrange_core::EpisodeConfig, x: f64) -> usize {
    let mut walls: Vec<f64> = ep
        .scene
        .statics()
        .iter()
        .filter(|s| {
            s.id.starts_with("wall")
                && s.shape.half_extents().x < 0.1
                && s.shape.half_extents().y > 0.5
        })
        .map(|s| s.shape.center().x)
        .collect();
    walls.sort_by(f64::total_cmp);
    walls.iter().filter(|w| **w < x).count()
}

#[test]
fn generated_episodes_are_solvable() {
    for seed in 0..100 {
        for params in [DifficultyParams::default(), multi()] {
            let ep = generate(seed, &params).unwrap();
            let s = validate_solvable(&ep);
            assert!(s.solvable, "seed {seed}: {:?}", s.problems);
        }
    }
}

#[test]
fn multi_room_tasks_cross_rooms() {
    for seed in 0..20 {
        let ep = generate(seed, &multi()).unwrap();
        let GoalDoc::Geometric { targets, .. } = &ep.goal else {
            panic!("geometric goal")
        };
        let crosses = targets.iter().any(|(id, t)| {
            let from = ep.initial.objects[id].pose.translation().x;
            room_of(&ep, from) != room_of(&ep, t.pose.translation().x)
        });
        assert!(crosses, "seed {seed}");
    }
}

#[test]
fn goal_inside_a_wall_fails_validation() {
    let mut ep = generate(4, &DifficultyParams::default()).unwrap();
    let wall = ep.scene.statics()[0].shape.center();
    let GoalDoc::Geometric { targets, .. } = &mut ep.goal else {
        panic!("geometric goal")
    };
    let t = targets.values_mut().next().unwrap();
    t.pose = Pose::from_translation(Vec3::new(wall.x, wall.y, t.pose.translation().z));
    assert!(!validate_solvable(&ep).solvable);
}

#[test]
fn sealed_spawn_fails_validation() {
    let mut ep = generate(5, &DifficultyParams::default()).unwrap();
    let [x, y] = ep.initial.agent.position;
    let mut statics: Vec<StaticBox> = ep.scene.statics().to_vec();
    let cage = |id: &str, min: [f64; 3], max: [f64; 3]| StaticBox {
        id: id.into(),
        shape: rearrange_core::OrientedBox::from_min_max(Vec3::from(min), Vec3::from(max)).unwrap(),
    };
    statics.push(cage(
        "cage_s",
        [x - 0.5, y - 0.5, 0.0],
        [x + 0.5, y - 0.45, 2.5],
    ));
    statics.push(cage(
        "cage_n",
        [x - 0.5, y + 0.45, 0.0],
        [x + 0.5, y + 0.5, 2.5],
    ));
    statics.push(cage(
        "cage_w",
        [x - 0.5, y - 0.5, 0.0],
        [x - 0.45, y + 0.5, 2.5],
    ));
    statics.push(cage(
        "cage_e",
        [x + 0.45, y - 0.5, 0.0],
        [x + 0.5, y + 0.5, 2.5],
    ));
    let objects = ep.scene.specs().cloned().collect();
    ep.scene = rearrange_core::Scene::new(statics, objects).unwrap();
    assert!(!validate_solvable(&ep).solvable);
}

#[test]
fn distractors_stay_put_in_the_goal() {
    let params = DifficultyParams {
        n_distractors: 4,
        ..DifficultyParams::default()
    };
    for seed in 0..20 {
        let ep = generate(seed, &params).unwrap();
        let GoalDoc::Geometric { targets, .. } = &ep.goal else {
            panic!("geometric goal")
        };
        for id in ep.initial.objects.keys() {
            if !ep.task_ids.contains(id) {
                assert!(
                    !targets.contains_key(id),
                    "seed {seed}: distractor {id} has a target"
                );
            }
        }
        assert_eq!(ep.initial.objects.len(), ep.task_ids.len() + 4);
    }
}

#[test]
fn splits_use_disjoint_seeds_and_pools() {
    let p = DifficultyParams::default();
    let train = generate_split(Split::Train, 5, &p).unwrap();
    let test = generate_split(Split::Test, 5, &p).unwrap();
    assert!(train
        .iter()
        .all(|e| Split::of_seed(e.seed) == Some(Split::Train)));
    assert!(test
        .iter()
        .all(|e| Split::of_seed(e.seed) == Some(Split::Test)));
    let cats = |eps: &[rearrange_core::EpisodeConfig]| -> std::collections::BTreeSet<String> {
        eps.iter()
            .flat_map(|e| {
                e.scene
                    .specs()
                    .map(|s| s.category.clone())
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let seen = cats(&train);
    assert!(cats(&test)
        .iter()
        .all(|c| !seen.contains(c) || c == "fridge" || c == "cabinet" || c == "drawer"));
}
