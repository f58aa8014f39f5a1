//! Evaluation programs: a small prefix-expression language of scored binary
//! tests plus an optional do-no-harm clause.
//!
//! ```text
//! program  := score [harm]
//! score    := "(" "score" expr+ ")"
//! harm     := "(" "harm" expr ")"
//! expr     := atom | "(" ("all" | "any" | "not") expr+ ")"
//! atom     := "(" name arg* ")"
//! arg      := id | number | "(" number number number ")" | box
//! box      := "(" "box" point point ")"          ; centre, half extents
//! ```
//!
//! `;` starts a comment running to the end of the line.
//!
//! Boundary semantics per atom:
//!
//! | atom | passes when |
//! |------|-------------|
//! | `within_m id p r` | centre distance to `p` `<= r` |
//! | `rel_within_m a b r` | centre distance between `a` and `b` `<= r` |
//! | `iou_gt id box t` | IoU with the box `> t` |
//! | `open_between id lo hi` | `lo <= open fraction <= hi` |
//! | `in_region id box` | centre inside the closed box |
//! | `on a b` | `a` rests on `b` within the contact tolerance |
//! | `inside a b` | `a`'s centre strictly inside `b` |
//! | `unmoved id` | no displacement beyond the harm tolerance since reset |

mod eval;
mod parse;

use std::fmt;
use std::str::FromStr;

pub use eval::{eval_expr, evaluate, EvalContext, EvalError};
pub use parse::{parse, ParseError, ParseErrorKind};

use crate::scene::Scene;

/// Axis-aligned box literal: centre and half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxLit {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredExpr {
    WithinM {
        id: String,
        point: [f64; 3],
        radius: f64,
    },
    IouGt {
        id: String,
        target: BoxLit,
        threshold: f64,
    },
    On {
        a: String,
        b: String,
    },
    Inside {
        a: String,
        b: String,
    },
    OpenBetween {
        id: String,
        lo: f64,
        hi: f64,
    },
    InRegion {
        id: String,
        region: BoxLit,
    },
    Unmoved {
        id: String,
    },
    RelWithinM {
        a: String,
        b: String,
        radius: f64,
    },
    All(Vec<PredExpr>),
    Any(Vec<PredExpr>),
    Not(Box<PredExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateProgram {
    pub scored: Vec<PredExpr>,
    pub harm: Option<PredExpr>,
}

impl FromStr for PredicateProgram {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// How an id argument must resolve.
#[derive(Clone, Copy)]
enum IdRole {
    /// A scene object (something with a state).
    Object,
    /// An articulated scene object.
    Articulated,
    /// An object or a static layout box.
    Any,
}

impl PredExpr {
    fn visit_ids<'a>(&'a self, f: &mut impl FnMut(&'a str, IdRole)) {
        match self {
            PredExpr::WithinM { id, .. }
            | PredExpr::IouGt { id, .. }
            | PredExpr::InRegion { id, .. }
            | PredExpr::Unmoved { id } => f(id, IdRole::Object),
            PredExpr::OpenBetween { id, .. } => f(id, IdRole::Articulated),
            PredExpr::On { a, b }
            | PredExpr::Inside { a, b }
            | PredExpr::RelWithinM { a, b, .. } => {
                f(a, IdRole::Any);
                f(b, IdRole::Any);
            }
            PredExpr::All(es) | PredExpr::Any(es) => es.iter().for_each(|e| e.visit_ids(f)),
            PredExpr::Not(e) => e.visit_ids(f),
        }
    }

    /// Every id referenced, in order of appearance.
    pub fn ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_ids(&mut |id, _| out.push(id));
        out
    }

    pub fn is_atom(&self) -> bool {
        !matches!(self, PredExpr::All(_) | PredExpr::Any(_) | PredExpr::Not(_))
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, redact: bool) -> fmt::Result {
        let th = |x: f64| if redact { "_".to_string() } else { fmt_num(x) };
        match self {
            PredExpr::WithinM { id, point, radius } => {
                write!(f, "(within_m {id} {} {})", fmt_point(point), th(*radius))
            }
            PredExpr::IouGt {
                id,
                target,
                threshold,
            } => {
                write!(f, "(iou_gt {id} {} {})", fmt_box(target), th(*threshold))
            }
            PredExpr::On { a, b } => write!(f, "(on {a} {b})"),
            PredExpr::Inside { a, b } => write!(f, "(inside {a} {b})"),
            PredExpr::OpenBetween { id, lo, hi } => {
                write!(f, "(open_between {id} {} {})", th(*lo), th(*hi))
            }
            PredExpr::InRegion { id, region } => write!(f, "(in_region {id} {})", fmt_box(region)),
            PredExpr::Unmoved { id } => write!(f, "(unmoved {id})"),
            PredExpr::RelWithinM { a, b, radius } => {
                write!(f, "(rel_within_m {a} {b} {})", th(*radius))
            }
            PredExpr::All(es) | PredExpr::Any(es) => {
                let name = if matches!(self, PredExpr::All(_)) {
                    "all"
                } else {
                    "any"
                };
                write!(f, "({name}")?;
                for e in es {
                    f.write_str(" ")?;
                    e.write(f, redact)?;
                }
                f.write_str(")")
            }
            PredExpr::Not(e) => {
                f.write_str("(not ")?;
                e.write(f, redact)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for PredExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, false)
    }
}

impl PredicateProgram {
    /// Checks that every referenced id exists in the scene with the right
    /// kind (objects for state tests, articulated objects for joints).
    pub fn bind(&self, scene: &Scene) -> Result<(), EvalError> {
        if self.scored.is_empty() {
            return Err(EvalError::EmptyProgram);
        }
        let mut err = None;
        let mut check = |id: &str, role: IdRole| {
            if err.is_some() {
                return;
            }
            let ok = match role {
                IdRole::Object => scene.has_object(id),
                IdRole::Articulated => scene
                    .spec(id)
                    .map(|s| s.articulation.is_some())
                    .unwrap_or(false),
                IdRole::Any => scene.resolves(id),
            };
            if !ok {
                err = Some(match role {
                    IdRole::Articulated if scene.has_object(id) => {
                        EvalError::NotArticulated(id.into())
                    }
                    _ => EvalError::Unbound(id.into()),
                });
            }
        };
        for e in self.scored.iter().chain(&self.harm) {
            e.visit_ids(&mut check);
        }
        err.map_or(Ok(()), Err)
    }

    /// Canonical text with every threshold replaced by `_`.
    pub fn redacted(&self) -> String {
        struct Redacted<'a>(&'a PredicateProgram);
        impl fmt::Display for Redacted<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.write(f, true)
            }
        }
        Redacted(self).to_string()
    }

    /// Number of atoms (non-combinator nodes) across the scored tests.
    pub fn scored_atom_count(&self) -> usize {
        fn count(e: &PredExpr) -> usize {
            match e {
                PredExpr::All(es) | PredExpr::Any(es) => es.iter().map(count).sum(),
                PredExpr::Not(e) => count(e),
                _ => 1,
            }
        }
        self.scored.iter().map(count).sum()
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, redact: bool) -> fmt::Result {
        f.write_str("(score")?;
        for e in &self.scored {
            f.write_str(" ")?;
            e.write(f, redact)?;
        }
        f.write_str(")")?;
        if let Some(h) = &self.harm {
            f.write_str(" (harm ")?;
            h.write(f, redact)?;
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for PredicateProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, false)
    }
}

/// Shortest decimal form after rounding to 9 significant digits.
pub fn fmt_num(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    let a = rounded.abs();
    if a != 0.0 && !(1e-5..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

fn fmt_point(p: &[f64; 3]) -> String {
    format!("({} {} {})", fmt_num(p[0]), fmt_num(p[1]), fmt_num(p[2]))
}

fn fmt_box(b: &BoxLit) -> String {
    format!(
        "(box {} {})",
        fmt_point(&b.center),
        fmt_point(&b.half_extents)
    )
}
