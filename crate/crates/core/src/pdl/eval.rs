use thiserror::Error;

use super::{BoxLit, PredExpr, PredicateProgram};
use crate::geom::{
    box_iou, exceeds, rotation_angle, translation_distance, within, OrientedBox, Vec3,
};
use crate::goals::ToleranceSpec;
use crate::scene::{is_inside, is_on, open_fraction, SceneError, WorldState, DEFAULT_CONTACT_EPS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound id `{0}`")]
    Unbound(String),
    #[error("object `{0}` is not articulated")]
    NotArticulated(String),
    #[error("program has no scored tests")]
    EmptyProgram,
    #[error("goal state required but not supplied")]
    MissingGoalState,
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// States and thresholds a program is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    /// Initial state, the reference for `unmoved`.
    pub s0: &'a WorldState,
    /// State being scored.
    pub s: &'a WorldState,
    /// Goal state. No atom of the surface syntax reads it today.
    pub s_star: Option<&'a WorldState>,
    pub harm_tol: ToleranceSpec,
    pub contact_eps: f64,
}

impl<'a> EvalContext<'a> {
    pub fn new(s0: &'a WorldState, s: &'a WorldState) -> Self {
        Self {
            s0,
            s,
            s_star: None,
            harm_tol: ToleranceSpec::harm_default(),
            contact_eps: DEFAULT_CONTACT_EPS,
        }
    }
}

fn lit_box(b: &BoxLit) -> Result<OrientedBox, SceneError> {
    Ok(OrientedBox::aligned(
        Vec3::from(b.center),
        Vec3::from(b.half_extents),
    )?)
}

fn map_unbound(e: SceneError) -> EvalError {
    match e {
        SceneError::UnknownId(id) => EvalError::Unbound(id),
        SceneError::NotArticulated(id) => EvalError::NotArticulated(id),
        other => EvalError::Scene(other),
    }
}

/// Verdict of a single expression.
pub fn eval_expr(expr: &PredExpr, ctx: &EvalContext<'_>) -> Result<bool, EvalError> {
    let s = ctx.s;
    let center = |id: &str| -> Result<Vec3, EvalError> {
        Ok(s.object(id).map_err(map_unbound)?.pose.translation())
    };
    Ok(match expr {
        PredExpr::WithinM { id, point, radius } => {
            within((center(id)? - Vec3::from(*point)).norm(), *radius)
        }
        PredExpr::IouGt {
            id,
            target,
            threshold,
        } => {
            let b = s.object_box(id).map_err(map_unbound)?;
            exceeds(box_iou(&b, &lit_box(target)?), *threshold)
        }
        PredExpr::On { a, b } => is_on(a, b, s, ctx.contact_eps).map_err(map_unbound)?,
        PredExpr::Inside { a, b } => is_inside(a, b, s).map_err(map_unbound)?,
        PredExpr::OpenBetween { id, lo, hi } => {
            let f = open_fraction(id, s).map_err(map_unbound)?;
            within(*lo, f) && within(f, *hi)
        }
        PredExpr::InRegion { id, region } => lit_box(region)?.contains_point(&center(id)?),
        PredExpr::Unmoved { id } => {
            let a = ctx.s0.object(id).map_err(map_unbound)?;
            let b = s.object(id).map_err(map_unbound)?;
            let tol = &ctx.harm_tol;
            let mut moved = exceeds(translation_distance(&a.pose, &b.pose), tol.translation)
                || exceeds(rotation_angle(&a.pose, &b.pose), tol.rotation);
            if s.scene()
                .spec(id)
                .map_err(map_unbound)?
                .articulation
                .is_some()
            {
                let d = open_fraction(id, ctx.s0).map_err(map_unbound)?
                    - open_fraction(id, s).map_err(map_unbound)?;
                moved |= exceeds(d.abs(), tol.open);
            }
            !moved
        }
        PredExpr::RelWithinM { a, b, radius } => {
            let ca = s.box_of(a).map_err(map_unbound)?.center();
            let cb = s.box_of(b).map_err(map_unbound)?.center();
            within((ca - cb).norm(), *radius)
        }
        PredExpr::All(es) => {
            for e in es {
                if !eval_expr(e, ctx)? {
                    return Ok(false);
                }
            }
            true
        }
        PredExpr::Any(es) => {
            for e in es {
                if eval_expr(e, ctx)? {
                    return Ok(true);
                }
            }
            false
        }
        PredExpr::Not(e) => !eval_expr(e, ctx)?,
    })
}

/// One verdict per scored test, plus the harm verdict (true when absent).
pub fn evaluate(
    program: &PredicateProgram,
    ctx: &EvalContext<'_>,
) -> Result<(Vec<bool>, bool), EvalError> {
    program.bind(ctx.s.scene())?;
    let verdicts = program
        .scored
        .iter()
        .map(|e| eval_expr(e, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    let harm = match &program.harm {
        Some(h) => eval_expr(h, ctx)?,
        None => true,
    };
    Ok((verdicts, harm))
}
