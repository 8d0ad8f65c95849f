//! Regions of real n-space built from sublevel constraints `h_i(x) <= 0`.
//!
//! Every set is closed by construction: the only primitive is a finite
//! intersection of `<=` constraints, and finite unions of such
//! intersections. Open sets are handled as queries (strict membership with
//! a tolerance), never as first-class values.

use super::expr::{con, pow, var, Expr};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EPS_MEM: f64 = 1e-9;
pub const DEFAULT_EPS_ACT: f64 = 1e-7;

#[derive(Debug, Error, Clone)]
pub enum SetError {
    #[error("no point of the set found after {attempts} sampling attempts")]
    Empty { attempts: usize },
    #[error("set operation needs matching dims: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },
}

/// Structural form of a [`ConstraintSet`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SetKind {
    /// `{ x : h_i(x) <= 0 for all i }`.
    Intersection(Vec<Expr>),
    /// Finite union of closed sets.
    Union(Vec<ConstraintSet>),
    /// `{ x : normal . x <= offset }`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Axis-aligned box; `None` marks an unbounded side.
    Box { lower: Vec<Option<f64>>, upper: Vec<Option<f64>> },
    /// Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ x : v(x) <= r }`.
    Sublevel { v: Expr, r: f64 },
}

/// A closed region with membership, boundary and active-constraint queries.
///
/// Non-union kinds are normalized at construction into a flat list of
/// scalar constraints `h_i(x) <= 0`, which backs the generic geometry
/// (distance, projection, tangent cones). Analytic kinds keep their shape
/// for exact projections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub kind: SetKind,
    /// Membership tolerance: `x` is a member iff every `h_i(x) <= eps_mem`.
    pub eps_mem: f64,
    /// Activity tolerance: constraint `i` is active at `x` iff `|h_i(x)| <= eps_act`.
    pub eps_act: f64,
    #[serde(skip)]
    constraints: Vec<Expr>,
}

impl ConstraintSet {
    pub fn new(kind: SetKind) -> Self {
        let constraints = flatten(&kind);
        ConstraintSet { kind, eps_mem: DEFAULT_EPS_MEM, eps_act: DEFAULT_EPS_ACT, constraints }
    }

    pub fn with_tolerances(mut self, eps_mem: f64, eps_act: f64) -> Self {
        self.set_tolerances(eps_mem, eps_act);
        self
    }

    pub fn set_tolerances(&mut self, eps_mem: f64, eps_act: f64) {
        self.eps_mem = eps_mem;
        self.eps_act = eps_act;
        if let SetKind::Union(children) = &mut self.kind {
            for c in children {
                c.set_tolerances(eps_mem, eps_act);
            }
        }
    }

    /// Rebuild the normalized constraint list (after deserialization).
    pub fn normalize(&mut self) {
        if let SetKind::Union(children) = &mut self.kind {
            for c in children {
                c.normalize();
            }
        }
        self.constraints = flatten(&self.kind);
    }

    pub fn intersection(hs: Vec<Expr>) -> Self {
        Self::new(SetKind::Intersection(hs))
    }

    pub fn union(children: Vec<ConstraintSet>) -> Self {
        Self::new(SetKind::Union(children))
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Self {
        Self::new(SetKind::Halfspace { normal, offset })
    }

    pub fn bounded_box(bounds: &[(f64, f64)]) -> Self {
        Self::new(SetKind::Box {
            lower: bounds.iter().map(|b| Some(b.0)).collect(),
            upper: bounds.iter().map(|b| Some(b.1)).collect(),
        })
    }

    pub fn boxed(lower: Vec<Option<f64>>, upper: Vec<Option<f64>>) -> Self {
        Self::new(SetKind::Box { lower, upper })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Self::new(SetKind::Ball { center, radius })
    }

    pub fn sublevel(v: Expr, r: f64) -> Self {
        Self::new(SetKind::Sublevel { v, r })
    }

    /// The empty set (`1 <= 0` is never satisfied).
    pub fn empty() -> Self {
        Self::intersection(vec![con(1.0)])
    }

    /// Flat constraint views for non-union kinds; `None` for unions.
    pub fn constraints(&self) -> Option<&[Expr]> {
        match &self.kind {
            SetKind::Union(_) => None,
            _ => Some(&self.constraints),
        }
    }

    pub fn children(&self) -> Option<&[ConstraintSet]> {
        match &self.kind {
            SetKind::Union(cs) => Some(cs),
            _ => None,
        }
    }

    /// Signed constraint violation: `<= 0` (up to tolerance) means member.
    ///
    /// For an intersection this is `max_i h_i(x)`; for a union, the minimum
    /// over children. Unconstrained sets give `-inf`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SetKind::Union(children) => children
                .iter()
                .map(|c| c.violation(x))
                .fold(f64::INFINITY, f64::min),
            _ => self
                .constraints
                .iter()
                .map(|h| h.eval(x).unwrap_or(f64::INFINITY))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.violation(x) <= self.eps_mem
    }

    /// Strict interior query: member with every constraint below `-eps_act`.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        match &self.kind {
            SetKind::Union(children) => children.iter().any(|c| c.is_interior(x)),
            _ => self
                .constraints
                .iter()
                .all(|h| h.eval(x).map(|v| v < -self.eps_act).unwrap_or(false)),
        }
    }

    /// Boundary classification: member and not interior.
    ///
    /// For an intersection this means some constraint is active; a union
    /// member is on the boundary iff no child holds it in its interior.
    pub fn is_boundary(&self, x: &[f64]) -> bool {
        self.contains(x) && !self.is_interior(x)
    }

    /// Active constraints at `x`: `(index, value, gradient-or-kink)`.
    ///
    /// For a union, the active constraints of every child containing `x`
    /// are returned, tagged with the child index.
    pub fn active_constraints(&self, x: &[f64]) -> Vec<ActiveConstraint> {
        let mut out = Vec::new();
        self.collect_active(x, 0, &mut out);
        out
    }

    fn collect_active(&self, x: &[f64], child_tag: usize, out: &mut Vec<ActiveConstraint>) {
        match &self.kind {
            SetKind::Union(children) => {
                for (ci, c) in children.iter().enumerate() {
                    if c.contains(x) {
                        c.collect_active(x, ci, out);
                    }
                }
            }
            _ => {
                for (i, h) in self.constraints.iter().enumerate() {
                    if let Ok(v) = h.eval(x) {
                        if v.abs() <= self.eps_act {
                            out.push(ActiveConstraint {
                                child: child_tag,
                                index: i,
                                value: v,
                                gradient: h.grad(x).ok(),
                            });
                        }
                    }
                }
            }
        }
    }

    /// Intersection with another set, distributing over unions so the
    /// result stays in the closed-by-construction normal form.
    pub fn intersect(&self, other: &ConstraintSet) -> ConstraintSet {
        let tol = |mut s: ConstraintSet| -> ConstraintSet {
            s.set_tolerances(self.eps_mem.min(other.eps_mem), self.eps_act.min(other.eps_act));
            s
        };
        match (&self.kind, &other.kind) {
            (SetKind::Union(a), _) => tol(ConstraintSet::union(
                a.iter().map(|c| c.intersect(other)).collect(),
            )),
            (_, SetKind::Union(b)) => tol(ConstraintSet::union(
                b.iter().map(|c| self.intersect(c)).collect(),
            )),
            _ => {
                let mut hs = self.constraints.clone();
                hs.extend(other.constraints.iter().cloned());
                tol(ConstraintSet::intersection(hs))
            }
        }
    }

    /// Slice a joint-space set at fixed values for the trailing variables.
    ///
    /// Constraints mentioning only the fixed tail fold to constants; a
    /// folded constraint that is violated makes the slice empty.
    pub fn substitute_tail(&self, from_index: usize, values: &[f64]) -> ConstraintSet {
        let mut out = match &self.kind {
            SetKind::Union(children) => ConstraintSet::union(
                children.iter().map(|c| c.substitute_tail(from_index, values)).collect(),
            ),
            _ => ConstraintSet::intersection(
                self.constraints
                    .iter()
                    .map(|h| h.substitute_tail(from_index, values))
                    .collect(),
            ),
        };
        out.set_tolerances(self.eps_mem, self.eps_act);
        out
    }

    /// True when the set is bounded by construction: every coordinate is
    /// bounded above and below by some recognized constraint pattern
    /// (finite box faces, squared-coordinate terms, balls), or the set is a
    /// finite union of such sets.
    ///
    /// Sound but incomplete: a `false` only means boundedness could not be
    /// certified structurally.
    pub fn structurally_bounded(&self, dim: usize) -> bool {
        match &self.kind {
            SetKind::Union(children) => {
                !children.is_empty() && children.iter().all(|c| c.structurally_bounded(dim))
            }
            SetKind::Ball { center, .. } => center.len() >= dim,
            SetKind::Box { lower, upper } => {
                lower.len() >= dim
                    && upper.len() >= dim
                    && lower.iter().take(dim).all(|b| b.is_some())
                    && upper.iter().take(dim).all(|b| b.is_some())
            }
            SetKind::Halfspace { .. } => dim == 0,
            SetKind::Intersection(_) | SetKind::Sublevel { .. } => {
                let mut lo = vec![false; dim];
                let mut hi = vec![false; dim];
                for h in &self.constraints {
                    apply_bound_pattern(h, &mut lo, &mut hi);
                }
                lo.into_iter().zip(hi).all(|(a, b)| a && b)
            }
        }
    }
}

/// One active constraint at a query point.
#[derive(Debug, Clone)]
pub struct ActiveConstraint {
    /// Index of the union child the constraint belongs to (0 outside unions).
    pub child: usize,
    pub index: usize,
    pub value: f64,
    /// `None` when the constraint has a kink at the point.
    pub gradient: Option<Vec<f64>>,
}

fn flatten(kind: &SetKind) -> Vec<Expr> {
    match kind {
        SetKind::Intersection(hs) => hs.clone(),
        SetKind::Union(_) => Vec::new(),
        SetKind::Halfspace { normal, offset } => {
            vec![linear(normal) - con(*offset)]
        }
        SetKind::Box { lower, upper } => {
            let mut hs = Vec::new();
            for (i, b) in lower.iter().enumerate() {
                if let Some(lo) = b {
                    hs.push(con(*lo) - var(i));
                }
            }
            for (i, b) in upper.iter().enumerate() {
                if let Some(hi) = b {
                    hs.push(var(i) - con(*hi));
                }
            }
            hs
        }
        SetKind::Ball { center, radius } => vec![ball_constraint(center, *radius)],
        SetKind::Sublevel { v, r } => vec![v.clone() - con(*r)],
    }
}

fn linear(normal: &[f64]) -> Expr {
    let mut terms: Vec<Expr> = Vec::new();
    for (i, a) in normal.iter().enumerate() {
        if *a != 0.0 {
            terms.push(con(*a) * var(i));
        }
    }
    if terms.is_empty() {
        con(0.0)
    } else {
        Expr::Sum(terms)
    }
}

fn ball_constraint(center: &[f64], radius: f64) -> Expr {
    let mut terms: Vec<Expr> = Vec::new();
    for (i, c) in center.iter().enumerate() {
        let d = if *c == 0.0 { var(i) } else { var(i) - con(*c) };
        terms.push(pow(d, 2));
    }
    Expr::Sum(terms) - con(radius * radius)
}

/// Update per-coordinate bound flags when `h <= 0` matches a recognized
/// bounding pattern.
///
/// Recognized: box faces `lo - x_d` / `x_d - hi`, bare `x_d` / `-x_d`, and
/// sums of squared (optionally shifted or const-scaled) coordinates plus
/// constants, which bound every coordinate they mention in both directions.
fn apply_bound_pattern(h: &Expr, lo: &mut [bool], hi: &mut [bool]) {
    let mark = |flags: &mut [bool], d: usize| {
        if d < flags.len() {
            flags[d] = true;
        }
    };
    match h {
        // -x_d <= 0
        Expr::Neg(c) => {
            if let Expr::Var(d) = c.as_ref() {
                mark(lo, *d);
            }
        }
        // x_d <= 0
        Expr::Var(d) => mark(hi, *d),
        Expr::Sum(terms) => {
            // first try the box-face forms produced by `flatten`
            if let [a, b] = terms.as_slice() {
                match (a, b) {
                    (Expr::Const(_), Expr::Neg(v)) => {
                        if let Expr::Var(d) = v.as_ref() {
                            mark(lo, *d);
                            return;
                        }
                    }
                    (Expr::Var(d), Expr::Neg(c)) if matches!(c.as_ref(), Expr::Const(_)) => {
                        mark(hi, *d);
                        return;
                    }
                    _ => {}
                }
            }
            // sum of squares plus constants bounds each squared coordinate
            let mut squared = Vec::new();
            for t in terms {
                match t {
                    Expr::Const(_) => {}
                    Expr::Neg(c) if matches!(c.as_ref(), Expr::Const(_)) => {}
                    Expr::Pow(base, 2) => match squared_coordinate(base) {
                        Some(d) => squared.push(d),
                        None => return,
                    },
                    _ => return,
                }
            }
            for d in squared {
                mark(lo, d);
                mark(hi, d);
            }
        }
        _ => {}
    }
}

/// Coordinate index when `base` is `x_d`, `x_d - c`, or `a * x_d`.
fn squared_coordinate(base: &Expr) -> Option<usize> {
    match base {
        Expr::Var(d) => Some(*d),
        Expr::Sum(ts) => {
            let mut var = None;
            for t in ts {
                match t {
                    Expr::Var(d) if var.is_none() => var = Some(*d),
                    Expr::Const(_) => {}
                    Expr::Neg(c) if matches!(c.as_ref(), Expr::Const(_)) => {}
                    _ => return None,
                }
            }
            var
        }
        Expr::Product(ts) => {
            let mut var = None;
            for t in ts {
                match t {
                    Expr::Var(d) if var.is_none() => var = Some(*d),
                    Expr::Const(c) if *c != 0.0 => {}
                    _ => return None,
                }
            }
            var
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expr::{abs, pow, var};

    fn unit_disk() -> ConstraintSet {
        ConstraintSet::ball(vec![0.0, 0.0], 1.0)
    }

    #[test]
    fn membership_and_boundary() {
        let s = unit_disk();
        assert!(s.contains(&[0.5, 0.5]));
        assert!(!s.contains(&[1.0, 1.0]));
        assert!(s.is_boundary(&[1.0, 0.0]));
        assert!(!s.is_boundary(&[0.0, 0.0]));
        assert!(s.is_interior(&[0.3, -0.2]));
    }

    #[test]
    fn union_boundary_excludes_other_childs_interior() {
        // upper half disk united with the full horizontal diameter
        let upper = ConstraintSet::intersection(vec![
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
            -var(1),
        ]);
        let diameter = ConstraintSet::bounded_box(&[(-1.0, 1.0), (0.0, 0.0)]);
        let u = ConstraintSet::union(vec![upper, diameter]);
        // on the diameter but interior to the half disk: not a boundary point
        assert!(!u.is_boundary(&[0.2, 0.5]));
        assert!(u.is_boundary(&[0.2, 0.0]));
        assert!(u.is_boundary(&[0.0, 1.0]));
    }

    #[test]
    fn active_constraints_at_corner() {
        let s = ConstraintSet::boxed(
            vec![Some(0.0), Some(-1.0)],
            vec![None, Some(1.0)],
        );
        let act = s.active_constraints(&[0.0, 1.0]);
        assert_eq!(act.len(), 2);
        assert!(act.iter().all(|a| a.gradient.is_some()));
    }

    #[test]
    fn intersect_distributes_over_union() {
        let quadrants = ConstraintSet::union(vec![
            ConstraintSet::boxed(vec![Some(0.0), Some(0.0)], vec![None, None]),
            ConstraintSet::boxed(vec![None, None], vec![Some(0.0), Some(0.0)]),
        ]);
        let disk = unit_disk();
        let s = quadrants.intersect(&disk);
        assert!(s.contains(&[0.5, 0.5]));
        assert!(s.contains(&[-0.5, -0.5]));
        assert!(!s.contains(&[0.5, -0.5]));
        assert!(!s.contains(&[0.9, 0.9]));
    }

    #[test]
    fn empty_set() {
        let e = ConstraintSet::empty();
        assert!(!e.contains(&[0.0]));
        assert!(e.violation(&[1.0, 2.0]) > 0.0);
    }

    #[test]
    fn kinked_constraint_active_without_gradient() {
        let s = ConstraintSet::intersection(vec![abs(var(0)) - con(0.0)]);
        let act = s.active_constraints(&[0.0, 3.0]);
        assert_eq!(act.len(), 1);
        assert!(act[0].gradient.is_none());
    }

    #[test]
    fn structural_boundedness() {
        assert!(unit_disk().structurally_bounded(2));
        assert!(ConstraintSet::bounded_box(&[(0.0, 1.0)]).structurally_bounded(1));
        assert!(!ConstraintSet::boxed(vec![Some(0.0)], vec![None]).structurally_bounded(1));
        let ring = ConstraintSet::intersection(vec![
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
            con(1.0) - pow(var(0), 2) - pow(var(1), 2),
        ]);
        assert!(ring.structurally_bounded(2));
    }

    #[test]
    fn slice_joint_space_set() {
        // {(x, w) : x^2 + w^2 <= 1, w >= 0} sliced at w = 0
        let s = ConstraintSet::intersection(vec![
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
            -var(1),
        ]);
        let sliced = s.substitute_tail(1, &[0.0]);
        assert!(sliced.contains(&[0.9]));
        assert!(!sliced.contains(&[1.1]));
    }
}
