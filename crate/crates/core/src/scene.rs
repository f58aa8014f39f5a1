//! World model: object specifications, per-object state, and the geometric
//! relations (support, containment, articulation) queried by goals and
//! evaluation programs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use std::hash::Hasher;
use thiserror::Error;

use crate::geom::{
    exceeds, rotation_angle, translation_distance, GeomError, OrientedBox, Pose, Vec3,
};
use crate::goals::ToleranceSpec;
use crate::sim::AgentState;

/// Default vertical slack for the `on` relation, in metres.
pub const DEFAULT_CONTACT_EPS: f64 = 0.02;

/// Vertical penetration tolerated when testing contact.
const CONTACT_SLOP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("unknown object id `{0}`")]
    UnknownId(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("object `{0}` is not articulated")]
    NotArticulated(String),
    #[error("object `{id}`: {reason}")]
    InvalidObject { id: String, reason: String },
    #[error("object id sets differ: only in first {left:?}, only in second {right:?}")]
    MismatchedIds {
        left: Vec<String>,
        right: Vec<String>,
    },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub kind: JointKind,
    /// `[lo, hi]` in radians (revolute) or metres (prismatic).
    pub limits: [f64; 2],
}

impl JointSpec {
    pub fn lo(&self) -> f64 {
        self.limits[0]
    }

    pub fn hi(&self) -> f64 {
        self.limits[1]
    }

    pub fn fraction_of(&self, position: f64) -> f64 {
        (position - self.lo()) / (self.hi() - self.lo())
    }

    pub fn position_at(&self, fraction: f64) -> f64 {
        self.lo() + fraction * (self.hi() - self.lo())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub category: String,
    pub half_extents: [f64; 3],
    /// kg
    pub mass: f64,
    pub movable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub articulation: Option<JointSpec>,
}

impl ObjectSpec {
    fn validate(&self) -> Result<(), SceneError> {
        let bad = |reason: &str| SceneError::InvalidObject {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if !self.half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(bad("half extents must be positive"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(bad("mass must be positive"));
        }
        if let Some(j) = &self.articulation {
            if !(j.lo().is_finite() && j.hi().is_finite() && j.lo() < j.hi()) {
                return Err(bad("joint limits must satisfy lo < hi"));
            }
        }
        Ok(())
    }

    pub fn half_extents_vec(&self) -> Vec3 {
        Vec3::from(self.half_extents)
    }
}

/// A fixed piece of layout: wall, floor slab or furniture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticBox {
    pub id: String,
    #[serde(rename = "box")]
    pub shape: OrientedBox,
}

/// Immutable scene description shared by every state of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneRepr", into = "SceneRepr")]
pub struct Scene {
    statics: Vec<StaticBox>,
    specs: BTreeMap<String, ObjectSpec>,
}

#[derive(Serialize, Deserialize)]
struct SceneRepr {
    statics: Vec<StaticBox>,
    objects: Vec<ObjectSpec>,
}

impl TryFrom<SceneRepr> for Scene {
    type Error = SceneError;

    fn try_from(r: SceneRepr) -> Result<Self, Self::Error> {
        Scene::new(r.statics, r.objects)
    }
}

impl From<Scene> for SceneRepr {
    fn from(s: Scene) -> Self {
        SceneRepr {
            statics: s.statics,
            objects: s.specs.into_values().collect(),
        }
    }
}

impl Scene {
    pub fn new(statics: Vec<StaticBox>, objects: Vec<ObjectSpec>) -> Result<Self, SceneError> {
        let mut seen = BTreeSet::new();
        for s in &statics {
            if !seen.insert(s.id.clone()) {
                return Err(SceneError::DuplicateId(s.id.clone()));
            }
        }
        let mut specs = BTreeMap::new();
        for o in objects {
            o.validate()?;
            if !seen.insert(o.id.clone()) {
                return Err(SceneError::DuplicateId(o.id));
            }
            specs.insert(o.id.clone(), o);
        }
        Ok(Self { statics, specs })
    }

    pub fn statics(&self) -> &[StaticBox] {
        &self.statics
    }

    pub fn specs(&self) -> impl Iterator<Item = &ObjectSpec> {
        self.specs.values()
    }

    pub fn spec(&self, id: &str) -> Result<&ObjectSpec, SceneError> {
        self.specs
            .get(id)
            .ok_or_else(|| SceneError::UnknownId(id.to_string()))
    }

    pub fn has_object(&self, id: &str) -> bool {
        self.specs.contains_key(id)
    }

    pub fn static_box(&self, id: &str) -> Option<&OrientedBox> {
        self.statics.iter().find(|s| s.id == id).map(|s| &s.shape)
    }

    /// True for ids naming an object or a static box.
    pub fn resolves(&self, id: &str) -> bool {
        self.has_object(id) || self.static_box(id).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_position: Option<f64>,
}

impl ObjectState {
    pub fn at(pose: Pose) -> Self {
        Self {
            pose,
            joint_position: None,
        }
    }
}

/// Serialised form of a world state: objects and agent, without the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub objects: BTreeMap<String, ObjectState>,
    #[serde(default)]
    pub agent: AgentState,
}

/// Full state `s`: one pose (and joint position) per object plus the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    scene: Arc<Scene>,
    pub objects: BTreeMap<String, ObjectState>,
    pub agent: AgentState,
}

impl WorldState {
    pub fn new(
        scene: Arc<Scene>,
        objects: BTreeMap<String, ObjectState>,
        agent: AgentState,
    ) -> Result<Self, SceneError> {
        let state = Self {
            scene,
            objects,
            agent,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn from_doc(scene: Arc<Scene>, doc: StateDoc) -> Result<Self, SceneError> {
        Self::new(scene, doc.objects, doc.agent)
    }

    pub fn to_doc(&self) -> StateDoc {
        StateDoc {
            objects: self.objects.clone(),
            agent: self.agent.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let spec_ids: BTreeSet<&str> = self.scene.specs.keys().map(String::as_str).collect();
        let state_ids: BTreeSet<&str> = self.objects.keys().map(String::as_str).collect();
        if spec_ids != state_ids {
            return Err(SceneError::MismatchedIds {
                left: spec_ids
                    .difference(&state_ids)
                    .map(|s| s.to_string())
                    .collect(),
                right: state_ids
                    .difference(&spec_ids)
                    .map(|s| s.to_string())
                    .collect(),
            });
        }
        for (id, st) in &self.objects {
            let spec = self.scene.spec(id)?;
            match (&spec.articulation, st.joint_position) {
                (Some(j), Some(q)) if q >= j.lo() && q <= j.hi() => {}
                (None, None) => {}
                _ => {
                    return Err(SceneError::InvalidObject {
                        id: id.clone(),
                        reason: "joint position missing, unexpected or outside limits".into(),
                    })
                }
            }
        }
        for id in self.agent.held.iter().chain(&self.agent.backpack) {
            if !self.objects.contains_key(id) {
                return Err(SceneError::UnknownId(id.clone()));
            }
        }
        Ok(())
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    pub fn object(&self, id: &str) -> Result<&ObjectState, SceneError> {
        self.objects
            .get(id)
            .ok_or_else(|| SceneError::UnknownId(id.to_string()))
    }

    /// True when the object is in the hand or the backpack.
    pub fn is_carried(&self, id: &str) -> bool {
        self.agent.held.as_deref() == Some(id) || self.agent.backpack.iter().any(|b| b == id)
    }

    /// Ids of objects resting in the world (not carried), in id order.
    pub fn placed_ids(&self) -> impl Iterator<Item = &str> {
        self.objects
            .keys()
            .map(String::as_str)
            .filter(|id| !self.is_carried(id))
    }

    pub fn object_box(&self, id: &str) -> Result<OrientedBox, SceneError> {
        let spec = self.scene.spec(id)?;
        let st = self.object(id)?;
        Ok(OrientedBox::new(st.pose, spec.half_extents_vec())?)
    }

    /// Box of an object or a static layout element.
    pub fn box_of(&self, id: &str) -> Result<OrientedBox, SceneError> {
        if self.scene.has_object(id) {
            return self.object_box(id);
        }
        self.scene
            .static_box(id)
            .copied()
            .ok_or_else(|| SceneError::UnknownId(id.to_string()))
    }

    /// Boxes of every static element and every placed object.
    pub fn solid_boxes(&self) -> Vec<(&str, OrientedBox)> {
        let mut out: Vec<(&str, OrientedBox)> = self
            .scene
            .statics
            .iter()
            .map(|s| (s.id.as_str(), s.shape))
            .collect();
        for id in self.placed_ids() {
            if let Ok(b) = self.object_box(id) {
                out.push((id, b));
            }
        }
        out
    }

    pub fn set_open_fraction(&mut self, id: &str, fraction: f64) -> Result<(), SceneError> {
        let joint = self
            .scene
            .spec(id)?
            .articulation
            .ok_or_else(|| SceneError::NotArticulated(id.to_string()))?;
        let st = self
            .objects
            .get_mut(id)
            .ok_or_else(|| SceneError::UnknownId(id.to_string()))?;
        st.joint_position = Some(
            joint
                .position_at(fraction.clamp(0.0, 1.0))
                .clamp(joint.lo(), joint.hi()),
        );
        Ok(())
    }
}

/// `a` rests on `b`: a's bottom is within `contact_eps` above b's top and a's
/// centre projects inside b's horizontal footprint.
pub fn is_on(a: &str, b: &str, state: &WorldState, contact_eps: f64) -> Result<bool, SceneError> {
    let ab = state.box_of(a)?;
    let bb = state.box_of(b)?;
    let gap = ab.bottom_z() - bb.top_z();
    if gap < -CONTACT_SLOP || gap > contact_eps {
        return Ok(false);
    }
    let c = ab.center();
    let (min, max) = bb.world_aabb();
    Ok(c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y)
}

/// `a`'s centre lies strictly inside `b`'s volume.
pub fn is_inside(a: &str, b: &str, state: &WorldState) -> Result<bool, SceneError> {
    let ab = state.box_of(a)?;
    let bb = state.box_of(b)?;
    Ok(bb.contains_point_strict(&ab.center()))
}

pub fn open_fraction(id: &str, state: &WorldState) -> Result<f64, SceneError> {
    let spec = state.scene.spec(id)?;
    let joint = spec
        .articulation
        .ok_or_else(|| SceneError::NotArticulated(id.to_string()))?;
    let q = state
        .object(id)?
        .joint_position
        .ok_or_else(|| SceneError::NotArticulated(id.to_string()))?;
    Ok(joint.fraction_of(q))
}

fn footprints_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let (amin, amax) = a.world_aabb();
    let (bmin, bmax) = b.world_aabb();
    amin.x < bmax.x && bmin.x < amax.x && amin.y < bmax.y && bmin.y < amax.y
}

/// Height of the highest supporting top face under the footprint's
/// horizontal projection. The floor plane at z = 0 always supports.
pub fn settle_height(footprint: &OrientedBox, state: &WorldState) -> f64 {
    state
        .solid_boxes()
        .iter()
        .filter(|(_, b)| footprints_overlap(footprint, b))
        .map(|(_, b)| b.top_z())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDiff {
    pub id: String,
    pub moved: bool,
    pub translation: f64,
    pub rotation: f64,
    pub open_delta: f64,
}

/// Per-object displacement between two states of the same scene.
pub fn state_diff(
    s0: &WorldState,
    s: &WorldState,
    tol: &ToleranceSpec,
) -> Result<Vec<ObjectDiff>, SceneError> {
    check_same_ids(s0, s)?;
    s0.objects
        .iter()
        .map(|(id, a)| {
            let b = &s.objects[id];
            let translation = translation_distance(&a.pose, &b.pose);
            let rotation = rotation_angle(&a.pose, &b.pose);
            let open_delta = match s0.scene.spec(id)?.articulation {
                Some(_) => (open_fraction(id, s0)? - open_fraction(id, s)?).abs(),
                None => 0.0,
            };
            Ok(ObjectDiff {
                id: id.clone(),
                moved: exceeds(translation, tol.translation)
                    || exceeds(rotation, tol.rotation)
                    || exceeds(open_delta, tol.open),
                translation,
                rotation,
                open_delta,
            })
        })
        .collect()
}

pub(crate) fn check_same_ids(a: &WorldState, b: &WorldState) -> Result<(), SceneError> {
    let ka: BTreeSet<&String> = a.objects.keys().collect();
    let kb: BTreeSet<&String> = b.objects.keys().collect();
    if ka != kb {
        return Err(SceneError::MismatchedIds {
            left: ka.difference(&kb).map(|s| s.to_string()).collect(),
            right: kb.difference(&ka).map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

fn quantize(x: f64) -> i64 {
    // -0.0 and 0.0 land on the same bucket.
    (x * 1e9).round() as i64
}

fn write_f64(h: &mut FnvHasher, x: f64) {
    h.write(&quantize(x).to_le_bytes());
}

fn write_str(h: &mut FnvHasher, s: &str) {
    h.write(&(s.len() as u64).to_le_bytes());
    h.write(s.as_bytes());
}

/// Stable 64-bit digest of the object and agent state, with every float
/// quantised to 1e-9 before hashing (FNV-1a).
pub fn snapshot_hash(state: &WorldState) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&(state.objects.len() as u64).to_le_bytes());
    for (id, st) in &state.objects {
        write_str(&mut h, id);
        let t = st.pose.translation();
        let q = st.pose.rotation();
        let q = q.quaternion();
        for v in [t.x, t.y, t.z, q.w, q.i, q.j, q.k] {
            write_f64(&mut h, v);
        }
        match st.joint_position {
            Some(j) => {
                h.write_u8(1);
                write_f64(&mut h, j);
            }
            None => h.write_u8(0),
        }
    }
    let a = &state.agent;
    for v in [a.position[0], a.position[1], a.heading, a.pitch] {
        write_f64(&mut h, v);
    }
    match &a.held {
        Some(id) => {
            h.write_u8(1);
            write_str(&mut h, id);
        }
        None => h.write_u8(0),
    }
    h.write(&(a.backpack.len() as u64).to_le_bytes());
    for id in &a.backpack {
        write_str(&mut h, id);
    }
    h.finish()
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn cube_at(x: f64, y: f64, z: f64) -> WorldState {
        world(
            vec![obj("c", [0.05; 3])],
            &[("c", Pose::from_translation(Vec3::new(x, y, z)))],
        )
    }

    #[test]
    fn on_table_cases() {
        let s = cube_at(0.1, 0.1, 0.85);
        assert!(is_on("c", "t1", &s, DEFAULT_CONTACT_EPS).unwrap());
        let s = cube_at(0.1, 0.1, 1.35);
        assert!(!is_on("c", "t1", &s, DEFAULT_CONTACT_EPS).unwrap());
        // Touching the side face: vertical range overlaps, centre outside.
        let s = cube_at(0.55, 0.0, 0.4);
        assert!(!is_on("c", "t1", &s, DEFAULT_CONTACT_EPS).unwrap());
        assert_eq!(
            is_on("c", "nope", &s, 0.02),
            Err(SceneError::UnknownId("nope".into()))
        );
    }

    #[test]
    fn inside_cases() {
        let small = obj("s", [0.1; 3]);
        let big = obj("b", [1.0; 3]);
        let s = world(
            vec![small, big],
            &[
                ("s", Pose::from_translation(Vec3::new(3.0, 0.0, 1.0))),
                ("b", Pose::from_translation(Vec3::new(3.0, 0.0, 1.0))),
            ],
        );
        assert!(is_inside("s", "b", &s).unwrap());

        let same = world(
            vec![obj("x", [0.5; 3]), obj("y", [0.5; 3])],
            &[
                ("x", Pose::from_translation(Vec3::new(2.0, 2.0, 0.5))),
                ("y", Pose::from_translation(Vec3::new(2.0, 2.0, 0.5))),
            ],
        );
        assert!(is_inside("x", "y", &same).unwrap());

        let face = world(
            vec![obj("s", [0.1; 3]), obj("b", [1.0; 3])],
            &[
                ("s", Pose::from_translation(Vec3::new(4.0, 0.0, 1.0))),
                ("b", Pose::from_translation(Vec3::new(3.0, 0.0, 1.0))),
            ],
        );
        assert!(!is_inside("s", "b", &face).unwrap());
    }

    #[test]
    fn open_fraction_cases() {
        let mut s = world(
            vec![fridge("f")],
            &[("f", Pose::from_translation(Vec3::new(3.0, 0.0, 0.9)))],
        );
        assert_eq!(open_fraction("f", &s).unwrap(), 0.0);
        s.objects.get_mut("f").unwrap().joint_position = Some(1.6);
        assert_eq!(open_fraction("f", &s).unwrap(), 1.0);
        s.objects.get_mut("f").unwrap().joint_position = Some(0.4);
        assert!((open_fraction("f", &s).unwrap() - 0.25).abs() < 1e-12);

        let c = cube_at(0.0, 0.0, 0.85);
        assert_eq!(
            open_fraction("c", &c),
            Err(SceneError::NotArticulated("c".into()))
        );
    }

    #[test]
    fn settle_height_cases() {
        let fp = |x: f64, y: f64| {
            OrientedBox::aligned(Vec3::new(x, y, 2.0), Vec3::new(0.05, 0.05, 0.05)).unwrap()
        };
        let empty = cube_at(5.0, 5.0, 0.05);
        assert_eq!(settle_height(&fp(-3.0, -3.0), &empty), 0.0);
        assert_eq!(settle_height(&fp(0.0, 0.0), &empty), 0.8);
        let book = world(
            vec![obj("book", [0.2, 0.15, 0.05])],
            &[("book", Pose::from_translation(Vec3::new(0.0, 0.0, 0.85)))],
        );
        assert!((settle_height(&fp(0.0, 0.0), &book) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn state_diff_cases() {
        let tol = ToleranceSpec::default();
        let s0 = cube_at(0.0, 0.0, 0.85);
        assert!(state_diff(&s0, &s0, &tol).unwrap().iter().all(|d| !d.moved));
        let s1 = cube_at(2.0, 0.0, 0.85);
        let d = state_diff(&s0, &s1, &tol).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d[0].moved && (d[0].translation - 2.0).abs() < 1e-12);

        let f0 = world(
            vec![fridge("f")],
            &[("f", Pose::from_translation(Vec3::new(3.0, 0.0, 0.9)))],
        );
        let mut f1 = f0.clone();
        f1.set_open_fraction("f", 0.3).unwrap();
        let d = state_diff(&f0, &f1, &ToleranceSpec { open: 0.2, ..tol }).unwrap();
        assert!(d[0].moved);
        assert!((d[0].open_delta - 0.3).abs() < 1e-12);

        assert!(matches!(
            state_diff(&s0, &f0, &tol),
            Err(SceneError::MismatchedIds { .. })
        ));
    }

    #[test]
    fn snapshot_hash_cases() {
        let s = cube_at(0.0, 0.0, 0.85);
        assert_eq!(snapshot_hash(&s), snapshot_hash(&s));
        assert_eq!(snapshot_hash(&s), snapshot_hash(&s.clone()));
        let moved = cube_at(0.001, 0.0, 0.85);
        assert_ne!(snapshot_hash(&s), snapshot_hash(&moved));
    }

    #[test]
    fn world_state_validation() {
        let scene = Arc::new(Scene::new(vec![], vec![obj("a", [0.1; 3])]).unwrap());
        assert!(WorldState::new(scene.clone(), BTreeMap::new(), AgentState::default()).is_err());
        let mut objects = BTreeMap::new();
        objects.insert(
            "a".to_string(),
            ObjectState {
                pose: Pose::identity(),
                joint_position: Some(0.1),
            },
        );
        assert!(WorldState::new(scene, objects, AgentState::default()).is_err());
        assert!(Scene::new(vec![], vec![obj("a", [0.1; 3]), obj("a", [0.1; 3])]).is_err());
        let mut bad = obj("m", [0.1; 3]);
        bad.mass = 0.0;
        assert!(Scene::new(vec![], vec![bad]).is_err());
    }

    proptest! {
        #[test]
        fn diff_of_self_is_unmoved(x in -5.0..5.0f64, y in -5.0..5.0f64, t in 1e-6..2.0f64, r in 1e-6..3.0f64, o in 1e-6..1.0f64) {
            let s = cube_at(x, y, 0.05);
            let tol = ToleranceSpec { translation: t, rotation: r, min_iou: None, open: o };
            prop_assert!(state_diff(&s, &s, &tol).unwrap().iter().all(|d| !d.moved));
        }

        #[test]
        fn on_is_antisymmetric(ax in -1.0..1.0f64, az in 0.1..2.0f64, bx in -1.0..1.0f64, bz in 0.1..2.0f64, ha in 0.01..0.5f64, hb in 0.01..0.5f64) {
            let s = world(
                vec![obj("a", [ha; 3]), obj("b", [hb; 3])],
                &[("a", Pose::from_translation(Vec3::new(ax, 3.0, az))), ("b", Pose::from_translation(Vec3::new(bx, 3.0, bz)))],
            );
            let ab = is_on("a", "b", &s, 0.05).unwrap();
            let ba = is_on("b", "a", &s, 0.05).unwrap();
            prop_assert!(!(ab && ba));
        }

        #[test]
        fn settle_height_is_monotone(x in -2.0..2.0f64, y in -2.0..2.0f64, h in 0.01..0.6f64, z in 0.0..2.0f64) {
            let base = cube_at(9.0, 9.0, 0.05);
            let fp = OrientedBox::aligned(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.3, 0.3, 0.1)).unwrap();
            let before = settle_height(&fp, &base);
            let more = world(
                vec![obj("c", [0.05; 3]), obj("x", [h; 3])],
                &[("c", Pose::from_translation(Vec3::new(9.0, 9.0, 0.05))), ("x", Pose::from_translation(Vec3::new(x, y, z + h)))],
            );
            prop_assert!(settle_height(&fp, &more) >= before);
        }

        #[test]
        fn open_fraction_round_trips(f in 0.0..=1.0f64) {
            let mut s = world(vec![fridge("f")], &[("f", Pose::from_translation(Vec3::new(3.0, 0.0, 0.9)))]);
            s.set_open_fraction("f", f).unwrap();
            prop_assert!((open_fraction("f", &s).unwrap() - f).abs() < 1e-9);
        }
    }
}
