//! Rigid-body poses, oriented boxes and the geometric norms built on them.
//!
//! Rotations are unit quaternions throughout; axis-angle only appears as the
//! scalar returned by [`rotation_angle`].

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Rotation = UnitQuaternion<f64>;

/// Number of cells per axis used when sampling the IoU of oriented boxes.
pub const IOU_GRID: usize = 64;

/// Tolerance used to recognise a rotation as a signed axis permutation.
const AXIS_ALIGNED_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("box half extents must be strictly positive, got {0:?}")]
    NonPositiveExtent([f64; 3]),
    #[error("ray direction has zero length")]
    ZeroDirection,
    #[error("ray range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Element of SE(3): a translation in metres and a unit-quaternion rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    translation: Vec3,
    rotation: Rotation,
}

/// Wire form of a pose: `{"t": [x, y, z], "q": [w, x, y, z]}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PoseRepr {
    t: [f64; 3],
    q: [f64; 4],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = GeomError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Pose::from_parts(r.t, r.q)
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.rotation.quaternion();
        PoseRepr {
            t: [p.translation.x, p.translation.y, p.translation.z],
            q: [q.w, q.i, q.j, q.k],
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: Rotation::identity(),
        }
    }

    pub fn new(translation: Vec3, rotation: Rotation) -> Result<Self, GeomError> {
        if !finite3(&translation) {
            return Err(GeomError::NonFinite("translation"));
        }
        if !rotation.coords.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NonFinite("rotation"));
        }
        Ok(Self {
            translation,
            rotation: renormalize(rotation),
        })
    }

    /// Builds a pose from raw `[x, y, z]` and `[w, x, y, z]` arrays; the
    /// quaternion is normalised.
    pub fn from_parts(t: [f64; 3], q: [f64; 4]) -> Result<Self, GeomError> {
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        if !q.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NonFinite("rotation"));
        }
        if quat.norm() == 0.0 {
            return Err(GeomError::ZeroQuaternion);
        }
        Self::new(Vec3::from(t), UnitQuaternion::new_unchecked(quat))
    }

    pub fn from_translation(t: Vec3) -> Self {
        assert!(finite3(&t), "non-finite translation");
        Self {
            translation: t,
            rotation: Rotation::identity(),
        }
    }

    /// Translation plus a rotation of `yaw` radians about the world z axis.
    pub fn from_xyz_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        let t = Vec3::new(x, y, z);
        assert!(finite3(&t) && yaw.is_finite(), "non-finite pose");
        Self {
            translation: t,
            rotation: Rotation::from_axis_angle(&Vec3::z_axis(), yaw),
        }
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn with_translation(&self, t: Vec3) -> Self {
        assert!(finite3(&t), "non-finite translation");
        Self {
            translation: t,
            rotation: self.rotation,
        }
    }

    pub fn with_rotation(&self, r: Rotation) -> Self {
        Self {
            translation: self.translation,
            rotation: renormalize(r),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.translation + self.rotation * other.translation,
            rotation: renormalize(self.rotation * other.rotation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.translation)
    }
}

fn renormalize(r: Rotation) -> Rotation {
    let q = r.into_inner();
    if (q.norm() - 1.0).abs() <= 1e-12 {
        return UnitQuaternion::new_unchecked(q);
    }
    UnitQuaternion::new_normalize(q)
}

/// Slack that absorbs floating-point round-off at threshold boundaries.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Inclusive threshold test `x ≤ limit`, up to round-off.
pub fn within(x: f64, limit: f64) -> bool {
    x <= limit + BOUNDARY_EPS
}

/// Strict threshold test `x > t`, up to round-off.
pub fn exceeds(x: f64, t: f64) -> bool {
    !within(x, t)
}

/// Euclidean distance between the two translations.
pub fn translation_distance(a: &Pose, b: &Pose) -> f64 {
    (a.translation - b.translation).norm()
}

/// Geodesic angle of the relative rotation, in `[0, π]`.
pub fn rotation_angle(a: &Pose, b: &Pose) -> f64 {
    let rel = a.rotation.inverse() * b.rotation;
    let q = rel.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

/// A cuboid given by its centre pose and half extents in its local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct OrientedBox {
    pose: Pose,
    half_extents: Vec3,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BoxRepr {
    pose: Pose,
    half_extents: [f64; 3],
}

impl TryFrom<BoxRepr> for OrientedBox {
    type Error = GeomError;

    fn try_from(r: BoxRepr) -> Result<Self, Self::Error> {
        OrientedBox::new(r.pose, Vec3::from(r.half_extents))
    }
}

impl From<OrientedBox> for BoxRepr {
    fn from(b: OrientedBox) -> Self {
        BoxRepr {
            pose: b.pose,
            half_extents: b.half_extents.into(),
        }
    }
}

impl OrientedBox {
    pub fn new(pose: Pose, half_extents: Vec3) -> Result<Self, GeomError> {
        if !finite3(&half_extents) {
            return Err(GeomError::NonFinite("half extents"));
        }
        if half_extents.iter().any(|h| *h <= 0.0) {
            return Err(GeomError::NonPositiveExtent(half_extents.into()));
        }
        Ok(Self { pose, half_extents })
    }

    /// Axis-aligned box from a centre and half extents.
    pub fn aligned(center: Vec3, half_extents: Vec3) -> Result<Self, GeomError> {
        if !finite3(&center) {
            return Err(GeomError::NonFinite("center"));
        }
        Self::new(Pose::from_translation(center), half_extents)
    }

    /// Axis-aligned box from its min and max corners.
    pub fn from_min_max(min: Vec3, max: Vec3) -> Result<Self, GeomError> {
        Self::aligned((min + max) * 0.5, (max - min) * 0.5)
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn half_extents(&self) -> Vec3 {
        self.half_extents
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.product()
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        Self {
            pose,
            half_extents: self.half_extents,
        }
    }

    /// World-frame half extents when the rotation is a signed permutation of
    /// the coordinate axes, i.e. the box is axis-aligned in the world.
    pub fn aligned_half_extents(&self) -> Option<Vec3> {
        let m: Matrix3<f64> = self.pose.rotation.to_rotation_matrix().into_inner();
        let mut out = Vec3::zeros();
        for row in 0..3 {
            let mut found = None;
            for col in 0..3 {
                let v = m[(row, col)].abs();
                if v > 1.0 - AXIS_ALIGNED_EPS {
                    if found.is_some() {
                        return None;
                    }
                    found = Some(col);
                } else if v > AXIS_ALIGNED_EPS {
                    return None;
                }
            }
            out[row] = self.half_extents[found?];
        }
        Some(out)
    }

    /// The same region expressed with an identity rotation, if axis-aligned.
    pub fn canonical_aligned(&self) -> Option<OrientedBox> {
        self.aligned_half_extents().map(|h| OrientedBox {
            pose: Pose::from_translation(self.pose.translation),
            half_extents: h,
        })
    }

    /// World-frame half extents of the enclosing axis-aligned box.
    pub fn world_half_extents(&self) -> Vec3 {
        if let Some(h) = self.aligned_half_extents() {
            return h;
        }
        let m = self.pose.rotation.to_rotation_matrix().into_inner().abs();
        m * self.half_extents
    }

    /// `(min, max)` corners of the enclosing world axis-aligned box.
    pub fn world_aabb(&self) -> (Vec3, Vec3) {
        let h = self.world_half_extents();
        let c = self.pose.translation;
        (c - h, c + h)
    }

    pub fn bottom_z(&self) -> f64 {
        self.world_aabb().0.z
    }

    pub fn top_z(&self) -> f64 {
        self.world_aabb().1.z
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.pose.inverse_transform_point(p)
    }

    /// Closed containment (boundary counts as inside).
    pub fn contains_point(&self, p: &Vec3) -> bool {
        let l = self.to_local(p);
        (0..3).all(|i| l[i].abs() <= self.half_extents[i])
    }

    /// Open containment (boundary counts as outside).
    pub fn contains_point_strict(&self, p: &Vec3) -> bool {
        let l = self.to_local(p);
        (0..3).all(|i| l[i].abs() < self.half_extents[i])
    }

    /// Closest point of the (solid) box to `p`.
    pub fn closest_point(&self, p: &Vec3) -> Vec3 {
        let l = self.to_local(p);
        let clamped = Vec3::from_fn(|i, _| l[i].clamp(-self.half_extents[i], self.half_extents[i]));
        self.pose.transform_point(&clamped)
    }

    pub fn distance_to_point(&self, p: &Vec3) -> f64 {
        (self.closest_point(p) - p).norm()
    }

    fn axes(&self) -> [Vec3; 3] {
        let m = self.pose.rotation.to_rotation_matrix().into_inner();
        [m.column(0).into(), m.column(1).into(), m.column(2).into()]
    }
}

/// Separating-axis overlap test. Boxes overlap when their interiors shrunk by
/// `margin` on every face still intersect, so touching faces do not count.
pub fn boxes_overlap(a: &OrientedBox, b: &OrientedBox, margin: f64) -> bool {
    let ha = a.half_extents.map(|h| (h - margin).max(0.0));
    let hb = b.half_extents.map(|h| (h - margin).max(0.0));
    let aa = a.axes();
    let ba = b.axes();
    let d = b.center() - a.center();
    let mut axes: Vec<Vec3> = Vec::with_capacity(15);
    axes.extend_from_slice(&aa);
    axes.extend_from_slice(&ba);
    for u in &aa {
        for v in &ba {
            let c = u.cross(v);
            if c.norm_squared() > 1e-18 {
                axes.push(c.normalize());
            }
        }
    }
    axes.iter().all(|axis| {
        let ra: f64 = (0..3).map(|i| ha[i] * aa[i].dot(axis).abs()).sum();
        let rb: f64 = (0..3).map(|i| hb[i] * ba[i].dot(axis).abs()).sum();
        d.dot(axis).abs() < ra + rb
    })
}

/// Volumetric intersection-over-union of two boxes.
///
/// Exact for boxes that are axis-aligned in the world frame. Otherwise the
/// union's bounding box is divided into `IOU_GRID³` cells and the ratio is
/// taken over cell centres falling inside each box.
pub fn box_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    match (a.canonical_aligned(), b.canonical_aligned()) {
        (Some(a), Some(b)) => aligned_iou(&a, &b),
        (ca, cb) => sampled_iou(&ca.unwrap_or(*a), &cb.unwrap_or(*b), IOU_GRID),
    }
}

fn aligned_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (amin, amax) = a.world_aabb();
    let (bmin, bmax) = b.world_aabb();
    let mut inter = 1.0;
    let mut va = 1.0;
    let mut vb = 1.0;
    for i in 0..3 {
        inter *= (amax[i].min(bmax[i]) - amin[i].max(bmin[i])).max(0.0);
        va *= amax[i] - amin[i];
        vb *= bmax[i] - bmin[i];
    }
    if inter <= 0.0 {
        return 0.0;
    }
    (inter / (va + vb - inter)).clamp(0.0, 1.0)
}

/// Grid-sampled IoU with `n³` cell centres over the union's bounding box.
pub fn sampled_iou(a: &OrientedBox, b: &OrientedBox, n: usize) -> f64 {
    let (amin, amax) = a.world_aabb();
    let (bmin, bmax) = b.world_aabb();
    if (0..3).any(|i| amax[i] <= bmin[i] || bmax[i] <= amin[i]) {
        return 0.0;
    }
    let lo = amin.inf(&bmin);
    let hi = amax.sup(&bmax);
    let step = (hi - lo) / n as f64;

    let ra = a.pose.rotation.inverse().to_rotation_matrix().into_inner();
    let rb = b.pose.rotation.inverse().to_rotation_matrix().into_inner();
    let (ca, cb) = (a.center(), b.center());
    let (ha, hb) = (a.half_extents, b.half_extents);
    let inside = |r: &Matrix3<f64>, c: &Vec3, h: &Vec3, p: &Vec3| {
        let l = r * (p - c);
        l.x.abs() <= h.x && l.y.abs() <= h.y && l.z.abs() <= h.z
    };

    let (mut na, mut nb, mut both) = (0u64, 0u64, 0u64);
    for i in 0..n {
        let x = lo.x + (i as f64 + 0.5) * step.x;
        for j in 0..n {
            let y = lo.y + (j as f64 + 0.5) * step.y;
            for k in 0..n {
                let p = Vec3::new(x, y, lo.z + (k as f64 + 0.5) * step.z);
                let ia = inside(&ra, &ca, &ha, &p);
                let ib = inside(&rb, &cb, &hb, &p);
                na += ia as u64;
                nb += ib as u64;
                both += (ia && ib) as u64;
            }
        }
    }
    let union = na + nb - both;
    if union == 0 {
        return 0.0;
    }
    both as f64 / union as f64
}

/// A half-line segment used for picking and occlusion tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
    max_range: f64,
}

impl Ray {
    /// The direction is normalised; it must be non-zero.
    pub fn new(origin: Vec3, direction: Vec3, max_range: f64) -> Result<Self, GeomError> {
        if !finite3(&origin) {
            return Err(GeomError::NonFinite("ray origin"));
        }
        if !finite3(&direction) {
            return Err(GeomError::NonFinite("ray direction"));
        }
        if max_range.is_nan() || max_range <= 0.0 {
            return Err(GeomError::NonPositiveRange(max_range));
        }
        let n = direction.norm();
        if n == 0.0 {
            return Err(GeomError::ZeroDirection);
        }
        Ok(Self {
            origin,
            direction: direction / n,
            max_range,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    /// Slab test against one box. An origin inside the box hits at 0.
    pub fn intersect(&self, b: &OrientedBox) -> Option<f64> {
        let rot = b.pose.rotation.inverse();
        let o = rot * (self.origin - b.center());
        let d = rot * self.direction;
        let h = b.half_extents;
        let mut t_min = f64::NEG_INFINITY;
        let mut t_max = f64::INFINITY;
        for i in 0..3 {
            if d[i].abs() < 1e-15 {
                if o[i].abs() > h[i] {
                    return None;
                }
                continue;
            }
            let t1 = (-h[i] - o[i]) / d[i];
            let t2 = (h[i] - o[i]) / d[i];
            let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            t_min = t_min.max(near);
            t_max = t_max.min(far);
        }
        let hit = t_min.max(0.0);
        (t_max >= hit && hit <= self.max_range).then_some(hit)
    }
}

/// Nearest box hit along the ray within its range. Ties keep the earlier
/// entry, so the result depends only on input order.
pub fn ray_cast<'a, K>(
    ray: &Ray,
    boxes: impl IntoIterator<Item = (K, &'a OrientedBox)>,
) -> Option<(K, f64)> {
    let mut best: Option<(K, f64)> = None;
    for (id, b) in boxes {
        if let Some(t) = ray.intersect(b) {
            if best.as_ref().is_none_or(|(_, bt)| t < *bt) {
                best = Some((id, t));
            }
        }
    }
    best
}

/// Signed angle difference `a - b` wrapped to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Distance from a planar point to the xy footprint of a box's world AABB.
pub fn planar_distance_to_footprint(p: [f64; 2], b: &OrientedBox) -> f64 {
    let (min, max) = b.world_aabb();
    let dx = (min.x - p[0]).max(0.0).max(p[0] - max.x);
    let dy = (min.y - p[1]).max(0.0).max(p[1] - max.y);
    dx.hypot(dy)
}
