//! Distance, projection and tangent-cone queries on constraint sets.
//!
//! Membership of a direction in the tangent cone at a boundary point is
//! decided two ways:
//!
//! * a certificate path: at a point where constraints `h_i <= 0` are
//!   active with nonzero gradients, `<grad h_i(x), dir> <= 0` for every
//!   active `i` certifies cone membership (exact for regular sets,
//!   conservative at nonregular corners);
//! * a numerical path: the defining lim-inf of `|x + tau dir|_S / tau` is
//!   estimated on a geometric `tau` grid, with a three-band verdict so a
//!   borderline ratio is reported indeterminate rather than forced.
//!
//! Distances and projections are analytic for boxes, balls and halfspaces,
//! Newton-based for single smooth constraints, Dykstra-style alternating
//! projections for intersections, and best-child for unions.

use crate::model::expr::Expr;
use crate::model::sets::{ConstraintSet, SetKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ratio threshold separating "in cone" from "not in cone" on the tau grid.
pub const DELTA_CONE: f64 = 1e-3;
/// Indeterminate band multiplier above `DELTA_CONE`.
pub const CONE_BAND: f64 = 10.0;
/// Default strictness margin for strict-decrease certificates.
pub const EPS_STRICT: f64 = 1e-7;
/// Alternating-projection iteration cap.
pub const MAX_PROJ_ITER: usize = 500;

const TAU_GRID: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Error, Clone)]
pub enum GeometryError {
    #[error("projection did not converge after {iters} iterations (best distance bound {bound})")]
    NonConvergence { iters: usize, bound: f64, best: Vec<f64> },
    #[error("distance to an empty set is undefined")]
    EmptySet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeStatus {
    /// Backed by the inner-product certificate at every active constraint.
    InConeCertified,
    /// Tau-grid ratio fell below the in-cone threshold.
    InConeNumerical,
    /// Tau-grid ratio stayed above the out-of-cone threshold.
    NotInCone,
    Indeterminate,
}

/// Verdict of a cone membership query with its signed evidence: the worst
/// active-constraint inner product for certificates, or the minimal
/// distance ratio for numerical verdicts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub status: ConeStatus,
    pub margin: f64,
    /// Set when a certificate holds with margin below `-eps_strict`.
    pub strict: bool,
}

impl ConeVerdict {
    pub fn in_cone(&self) -> bool {
        matches!(self.status, ConeStatus::InConeCertified | ConeStatus::InConeNumerical)
    }

    pub fn certified(&self) -> bool {
        self.status == ConeStatus::InConeCertified
    }

    pub fn out_of_cone(&self) -> bool {
        self.status == ConeStatus::NotInCone
    }
}

// ---- distance and projection -------------------------------------------------

/// Euclidean distance from `x` to the set.
pub fn distance_to_set(set: &ConstraintSet, x: &[f64]) -> Result<f64, GeometryError> {
    if set.contains(x) {
        return Ok(0.0);
    }
    let p = project_onto_set(set, x)?;
    Ok(norm(&sub(x, &p)))
}

/// Nearest point of the set (exact for the analytic kinds and, in the
/// limit, for convex sets; best-effort otherwise).
pub fn project_onto_set(set: &ConstraintSet, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    match &set.kind {
        SetKind::Box { lower, upper } => {
            let mut p = x.to_vec();
            for (i, v) in p.iter_mut().enumerate() {
                if let Some(Some(lo)) = lower.get(i).map(|b| b.as_ref()) {
                    if *v < *lo {
                        *v = *lo;
                    }
                }
                if let Some(Some(hi)) = upper.get(i).map(|b| b.as_ref()) {
                    if *v > *hi {
                        *v = *hi;
                    }
                }
            }
            Ok(p)
        }
        SetKind::Ball { center, radius } => {
            let d = sub(x, center);
            let n = norm(&d);
            if n <= *radius {
                Ok(x.to_vec())
            } else {
                Ok(center.iter().zip(&d).map(|(c, di)| c + di * radius / n).collect())
            }
        }
        SetKind::Halfspace { normal, offset } => {
            let v = dot(normal, x) - offset;
            if v <= 0.0 {
                Ok(x.to_vec())
            } else {
                let n2 = dot(normal, normal);
                if n2 == 0.0 {
                    return Err(GeometryError::EmptySet);
                }
                Ok(x.iter().zip(normal).map(|(xi, ni)| xi - v * ni / n2).collect())
            }
        }
        SetKind::Union(children) => {
            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut soft_best: Option<(f64, Vec<f64>)> = None;
            for c in children {
                match project_onto_set(c, x) {
                    Ok(p) => {
                        let d = norm(&sub(x, &p));
                        if best.as_ref().map(|(bd, _)| d < *bd).unwrap_or(true) {
                            best = Some((d, p));
                        }
                    }
                    Err(GeometryError::NonConvergence { bound, best: p, .. }) => {
                        if soft_best.as_ref().map(|(bd, _)| bound < *bd).unwrap_or(true) {
                            soft_best = Some((bound, p));
                        }
                    }
                    Err(GeometryError::EmptySet) => {}
                }
            }
            match (best, soft_best) {
                (Some((_, p)), _) => Ok(p),
                (None, Some((bound, p))) => Err(GeometryError::NonConvergence {
                    iters: MAX_PROJ_ITER,
                    bound,
                    best: p,
                }),
                (None, None) => Err(GeometryError::EmptySet),
            }
        }
        SetKind::Intersection(_) | SetKind::Sublevel { .. } => {
            let hs = set.constraints().expect("non-union set has constraints");
            match hs.len() {
                0 => Ok(x.to_vec()),
                1 => project_single(&hs[0], x, set.eps_mem),
                _ => dykstra(&merge_equalities(hs), x, set.eps_mem, true),
            }
        }
    }
}

/// Cheap feasibility projection: lands on the set without insisting on the
/// nearest point (plain alternating projections, no correction terms).
/// Samplers use this; distance queries use [`project_onto_set`].
/// Test/bench hook for the landing projection.
pub fn settle_probe(set: &ConstraintSet, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    settle_onto_set(set, x)
}

pub(crate) fn settle_onto_set(set: &ConstraintSet, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    match &set.kind {
        SetKind::Union(children) => {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for c in children {
                if let Ok(p) = settle_onto_set(c, x) {
                    let d = norm(&sub(x, &p));
                    if best.as_ref().map(|(bd, _)| d < *bd).unwrap_or(true) {
                        best = Some((d, p));
                    }
                }
            }
            best.map(|(_, p)| p).ok_or(GeometryError::EmptySet)
        }
        SetKind::Intersection(_) | SetKind::Sublevel { .. } => {
            let hs = set.constraints().expect("non-union set has constraints");
            match hs.len() {
                0 => Ok(x.to_vec()),
                1 => project_single(&hs[0], x, set.eps_mem),
                _ => dykstra(&merge_equalities(hs), x, set.eps_mem, false),
            }
        }
        _ => project_onto_set(set, x),
    }
}

/// One projection operator of the alternating scheme.
enum ProjOp<'a> {
    /// `h <= 0`
    Ineq(&'a Expr),
    /// `h = 0` (detected from a complementary constraint pair)
    Surface(&'a Expr),
}

/// Detect complementary pairs `h <= 0`, `-h <= 0` and merge them into
/// surface operators; alternating projections with correction terms
/// oscillate on such pairs, while a direct Newton surface projection
/// converges immediately.
fn merge_equalities(hs: &[Expr]) -> Vec<ProjOp<'_>> {
    let mut used = vec![false; hs.len()];
    let mut ops = Vec::new();
    let probes: [&[f64]; 3] = [
        &[0.137, -0.291, 0.405, 0.513, -0.62, 0.18, 0.77, -0.35][..],
        &[-1.75, 0.66, -0.41, 1.02, 0.33, -1.2, 0.08, 0.91][..],
        &[3.13, -2.41, 1.77, -0.93, -0.27, 0.54, -1.61, 0.44][..],
    ];
    for i in 0..hs.len() {
        if used[i] {
            continue;
        }
        let mut merged = false;
        for j in (i + 1)..hs.len() {
            if used[j] {
                continue;
            }
            let complementary = probes.iter().all(|p| {
                match (hs[i].eval(p), hs[j].eval(p)) {
                    (Ok(a), Ok(b)) => (a + b).abs() <= 1e-10 * (1.0 + a.abs() + b.abs()),
                    _ => false,
                }
            });
            if complementary {
                used[i] = true;
                used[j] = true;
                ops.push(ProjOp::Surface(&hs[i]));
                merged = true;
                break;
            }
        }
        if !merged {
            used[i] = true;
            ops.push(ProjOp::Ineq(&hs[i]));
        }
    }
    ops
}

/// Projection onto one smooth sublevel constraint `{ h <= 0 }`.
///
/// Phase one drives `h` to (at most) `eps` by damped Newton along the
/// gradient; phase two polishes the point toward the query point with
/// bounded tangential pulls, keeping the best feasible iterate. The
/// returned point always satisfies the constraint within tolerance; only
/// exhausting the Newton budget produces an error.
fn project_single(h: &Expr, x: &[f64], eps: f64) -> Result<Vec<f64>, GeometryError> {
    let v0 = h.eval(x).unwrap_or(f64::INFINITY);
    if v0 <= eps {
        return Ok(x.to_vec());
    }
    if v0.is_infinite() {
        return Err(GeometryError::EmptySet);
    }
    let n = x.len();
    let tol = eps.max(1e-13);
    let newton = |start: &[f64]| -> Option<Vec<f64>> {
        let mut y = start.to_vec();
        for iter in 0..60 {
            let (v, g) = match h.eval_grad(&y) {
                Ok(vg) => vg,
                Err(_) => {
                    // kink: nudge deterministically and retry
                    y[iter % n] += 1e-9 * (1.0 + y[iter % n].abs());
                    continue;
                }
            };
            if v <= tol {
                return Some(y);
            }
            let g2 = dot(&g, &g);
            if g2 < 1e-30 {
                y[iter % n] += 1e-7 * (1.0 + y[iter % n].abs());
                continue;
            }
            for (yi, gi) in y.iter_mut().zip(&g) {
                *yi -= v / g2 * gi;
            }
        }
        None
    };

    let Some(mut y) = newton(x) else {
        return Err(GeometryError::NonConvergence {
            iters: 60,
            bound: f64::INFINITY,
            best: x.to_vec(),
        });
    };
    let mut best = (norm(&sub(x, &y)), y.clone());
    for _ in 0..25 {
        let Ok((_, g)) = h.eval_grad(&y) else { break };
        let gn = norm(&g);
        if gn < 1e-15 {
            break;
        }
        let d = sub(x, &y);
        let along = dot(&d, &g) / gn;
        let mut moved = 0.0;
        let mut y_next = y.clone();
        for ((yi, di), gi) in y_next.iter_mut().zip(&d).zip(&g) {
            let t = 0.8 * (di - along * gi / gn);
            moved += t * t;
            *yi += t;
        }
        if moved.sqrt() <= 1e-12 * (1.0 + best.0) {
            break;
        }
        match newton(&y_next) {
            Some(back) => {
                let dist = norm(&sub(x, &back));
                if dist < best.0 {
                    best = (dist, back.clone());
                }
                y = back;
            }
            None => break,
        }
    }
    Ok(best.1)
}

/// Alternating projections over the merged operator list.
///
/// With `corrections` enabled this is Dykstra's scheme (exact nearest
/// point in the limit for convex inequality systems); surface operators
/// always project plainly. A stagnation break returns the best feasible
/// point found once sweeps stop making progress.
fn dykstra(
    ops: &[ProjOp<'_>],
    x: &[f64],
    eps: f64,
    corrections: bool,
) -> Result<Vec<f64>, GeometryError> {
    let feasible = |y: &[f64]| -> f64 {
        ops.iter()
            .map(|op| match op {
                ProjOp::Ineq(h) => h.eval(y).unwrap_or(f64::INFINITY),
                ProjOp::Surface(h) => h.eval(y).map(|v| v.abs()).unwrap_or(f64::INFINITY),
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if feasible(x) <= eps {
        return Ok(x.to_vec());
    }
    let n = x.len();
    let mut y = x.to_vec();
    let mut increments = vec![vec![0.0; n]; ops.len()];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stagnant = 0usize;
    for _iter in 0..MAX_PROJ_ITER {
        let y_before = y.clone();
        for (i, op) in ops.iter().enumerate() {
            match op {
                ProjOp::Ineq(h) => {
                    let z: Vec<f64> = if corrections {
                        y.iter().zip(&increments[i]).map(|(a, b)| a + b).collect()
                    } else {
                        y.clone()
                    };
                    let p = match project_single(h, &z, eps * 0.01) {
                        Ok(p) => p,
                        Err(GeometryError::NonConvergence { best: p, .. }) => p,
                        Err(e) => return Err(e),
                    };
                    if corrections {
                        for k in 0..n {
                            increments[i][k] = z[k] - p[k];
                        }
                    }
                    y = p;
                }
                ProjOp::Surface(h) => {
                    if let Some(p) = newton_to_surface(h, &y, eps * 0.01) {
                        y = p;
                    }
                }
            }
        }
        let moved = norm(&sub(&y, &y_before));
        let w = feasible(&y);
        if w <= eps {
            let d = norm(&sub(x, &y));
            if best.as_ref().map(|(bd, _)| d < *bd).unwrap_or(true) {
                best = Some((d, y.clone()));
                stagnant = 0;
            } else {
                stagnant += 1;
            }
        }
        if w <= eps && (moved <= 1e-11 * (1.0 + norm(&y)) || stagnant >= 8 || !corrections) {
            return Ok(best.map(|(_, p)| p).unwrap_or(y));
        }
    }
    match best {
        Some((_, p)) => Ok(p),
        None => Err(GeometryError::NonConvergence {
            iters: MAX_PROJ_ITER,
            bound: norm(&sub(x, &y)),
            best: y,
        }),
    }
}

/// Newton projection onto the surface `h = 0` from either side, with a
/// tangential pull toward the start point.
fn newton_to_surface(h: &Expr, x: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut y = x.to_vec();
    let n = x.len();
    for iter in 0..40 {
        let (v, g) = match h.eval_grad(&y) {
            Ok(vg) => vg,
            Err(_) => {
                y[iter % n] += 1e-9 * (1.0 + y[iter % n].abs());
                continue;
            }
        };
        let g2 = dot(&g, &g);
        if g2 < 1e-30 {
            y[iter % n] += 1e-7 * (1.0 + y[iter % n].abs());
            continue;
        }
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi -= v / g2 * gi;
        }
        if v.abs() <= tol.max(1e-13) {
            return Some(y);
        }
    }
    None
}

// ---- tangent cones -------------------------------------------------------------

/// Does `dir` belong to the tangent cone of `set` at `x`?
///
/// Tries the certificate path first (on every union child containing `x`);
/// falls back to the tau-grid distance-ratio estimate. The zero direction
/// is trivially in every cone.
pub fn tangent_cone_contains(set: &ConstraintSet, x: &[f64], dir: &[f64]) -> ConeVerdict {
    let dn = norm(dir);
    if dn == 0.0 {
        return ConeVerdict { status: ConeStatus::InConeCertified, margin: 0.0, strict: false };
    }
    if set.violation(x) > 10.0 * set.eps_mem {
        return ConeVerdict { status: ConeStatus::Indeterminate, margin: f64::NAN, strict: false };
    }
    if let Some(v) = certificate_verdict(set, x, dir) {
        return v;
    }
    numerical_cone_test(set, x, dir)
}

/// Certificate attempt; `None` means the certificate path is unavailable
/// (kinked or vanishing gradients) or inconclusive at every union child.
fn certificate_verdict(set: &ConstraintSet, x: &[f64], dir: &[f64]) -> Option<ConeVerdict> {
    match &set.kind {
        SetKind::Union(children) => {
            let mut any_containing = false;
            let mut best: Option<ConeVerdict> = None;
            for c in children {
                if !c.contains(x) {
                    continue;
                }
                any_containing = true;
                if let Some(v) = certificate_verdict(c, x, dir) {
                    if v.certified() {
                        // membership in one child's cone is enough
                        if best.map(|b| v.margin < b.margin).unwrap_or(true) {
                            best = Some(v);
                        }
                    }
                }
            }
            if !any_containing {
                return None;
            }
            best
        }
        _ => {
            let active = set.active_constraints(x);
            if active.is_empty() {
                // interior point: the cone is the whole space
                return Some(ConeVerdict {
                    status: ConeStatus::InConeCertified,
                    margin: f64::NEG_INFINITY,
                    strict: true,
                });
            }
            let mut worst = f64::NEG_INFINITY;
            for a in &active {
                let g = a.gradient.as_ref()?;
                let gn = norm(g);
                if gn < 1e-14 {
                    // vanishing gradient disables the certificate
                    return None;
                }
                let ip = dot(g, dir);
                worst = worst.max(ip);
                if ip > 1e-12 * gn * norm(dir) {
                    // a positive inner product means the certificate cannot
                    // hold; let the numerical path decide
                    return None;
                }
            }
            Some(ConeVerdict {
                status: ConeStatus::InConeCertified,
                margin: worst,
                strict: worst < -EPS_STRICT,
            })
        }
    }
}

/// Lim-inf estimate of `|x + tau dir|_S / tau` over the geometric tau grid.
fn numerical_cone_test(set: &ConstraintSet, x: &[f64], dir: &[f64]) -> ConeVerdict {
    let dn = norm(dir);
    let unit: Vec<f64> = dir.iter().map(|d| d / dn).collect();
    let base = distance_to_set(set, x).unwrap_or(0.0);
    let mut min_ratio = f64::INFINITY;
    for tau in TAU_GRID {
        let probe: Vec<f64> = x.iter().zip(&unit).map(|(xi, ui)| xi + tau * ui).collect();
        let d = match distance_to_set(set, &probe) {
            Ok(d) => d,
            Err(GeometryError::NonConvergence { bound, .. }) => bound,
            Err(_) => continue,
        };
        let ratio = ((d - base).max(0.0)) / tau;
        min_ratio = min_ratio.min(ratio);
    }
    let status = if !min_ratio.is_finite() {
        ConeStatus::Indeterminate
    } else if min_ratio <= DELTA_CONE {
        ConeStatus::InConeNumerical
    } else if min_ratio >= CONE_BAND * DELTA_CONE {
        ConeStatus::NotInCone
    } else {
        ConeStatus::Indeterminate
    };
    ConeVerdict { status, margin: min_ratio, strict: false }
}

/// Inner-product certificate for the sublevel set `{h <= 0}` at a point of
/// its zero level: `y` is tangent when `<grad h(x), y> <= 0`, with a strict
/// flag when the product clears `-eps_strict`.
pub fn inner_product_certificate(h: &Expr, x: &[f64], y: &[f64]) -> ConeVerdict {
    inner_product_certificate_with(h, x, y, 1e-7, EPS_STRICT)
}

pub fn inner_product_certificate_with(
    h: &Expr,
    x: &[f64],
    y: &[f64],
    eps_act: f64,
    eps_strict: f64,
) -> ConeVerdict {
    let (v, g) = match h.eval_grad(x) {
        Ok(vg) => vg,
        Err(_) => {
            return ConeVerdict { status: ConeStatus::Indeterminate, margin: f64::NAN, strict: false }
        }
    };
    if v.abs() > eps_act {
        return ConeVerdict { status: ConeStatus::Indeterminate, margin: v, strict: false };
    }
    let gn = norm(&g);
    if gn < 1e-14 {
        return ConeVerdict { status: ConeStatus::Indeterminate, margin: 0.0, strict: false };
    }
    let ip = dot(&g, y);
    if ip <= 1e-12 * gn * norm(y).max(1.0) {
        ConeVerdict {
            status: ConeStatus::InConeCertified,
            margin: ip,
            strict: ip < -eps_strict,
        }
    } else {
        ConeVerdict { status: ConeStatus::NotInCone, margin: ip, strict: false }
    }
}

// ---- small vector helpers ------------------------------------------------------

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expr::{con, pow, var};

    fn unit_disk() -> ConstraintSet {
        ConstraintSet::ball(vec![0.0, 0.0], 1.0)
    }

    #[test]
    fn analytic_distances() {
        assert_eq!(distance_to_set(&unit_disk(), &[2.0, 0.0]).unwrap(), 1.0);
        let strip = ConstraintSet::boxed(vec![Some(0.0), Some(-1.0)], vec![None, Some(1.0)]);
        assert_eq!(distance_to_set(&strip, &[0.0, 2.0]).unwrap(), 1.0);
        let hs = ConstraintSet::halfspace(vec![1.0, 0.0], 0.0);
        assert_eq!(project_onto_set(&hs, &[3.0, 4.0]).unwrap(), vec![0.0, 4.0]);
    }

    #[test]
    fn member_projects_to_itself() {
        let s = unit_disk();
        assert_eq!(project_onto_set(&s, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let strip = ConstraintSet::boxed(vec![Some(0.0), Some(-1.0)], vec![None, Some(1.0)]);
        assert_eq!(project_onto_set(&strip, &[2.0, 2.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn intersection_distance_via_dykstra() {
        // unit disk intersected with upper half plane, queried from below
        let s = ConstraintSet::intersection(vec![
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
            -var(1),
        ]);
        let d = distance_to_set(&s, &[0.0, -0.5]).unwrap();
        assert!((d - 0.5).abs() < 1e-6, "d = {d}");
        let p = project_onto_set(&s, &[0.0, -0.5]).unwrap();
        assert!(norm(&sub(&p, &[0.0, 0.0])) < 1e-6);
    }

    #[test]
    fn quadrant_cone_certificates() {
        let strip = ConstraintSet::boxed(vec![Some(0.0), Some(-1.0)], vec![None, Some(1.0)]);
        let v = tangent_cone_contains(&strip, &[0.0, 1.0], &[1.0, -1.0]);
        assert!(v.certified(), "{v:?}");
        // interior point: everything is tangent
        let v = tangent_cone_contains(&strip, &[0.5, 0.0], &[-3.0, 7.0]);
        assert!(v.certified());
    }

    #[test]
    fn disk_cone_tangent_and_outward() {
        let s = unit_disk();
        let t = tangent_cone_contains(&s, &[1.0, 0.0], &[0.0, 1.0]);
        assert!(t.in_cone(), "{t:?}");
        let o = tangent_cone_contains(&s, &[1.0, 0.0], &[1.0, 0.0]);
        assert!(o.out_of_cone(), "{o:?}");
    }

    #[test]
    fn union_cone_at_origin_corner() {
        // {x1 x2 >= 0} as the union of the closed first and third quadrants
        let c = ConstraintSet::union(vec![
            ConstraintSet::boxed(vec![Some(0.0), Some(0.0)], vec![None, None]),
            ConstraintSet::boxed(vec![None, None], vec![Some(0.0), Some(0.0)]),
        ]);
        let down = tangent_cone_contains(&c, &[0.0, 0.0], &[0.0, -1.0]);
        assert!(down.in_cone(), "{down:?}");
        let q1 = ConstraintSet::boxed(vec![Some(0.0), Some(0.0)], vec![None, None]);
        let down1 = tangent_cone_contains(&q1, &[0.0, 0.0], &[0.0, -1.0]);
        assert!(down1.out_of_cone(), "{down1:?}");
    }

    #[test]
    fn certificate_margins() {
        // h = x1^2 + x2^2 - 1 at (0,1) with rotation field (1, 0)
        let h = pow(var(0), 2) + pow(var(1), 2) - con(1.0);
        let v = inner_product_certificate(&h, &[0.0, 1.0], &[1.0, 0.0]);
        assert!(v.certified());
        assert_eq!(v.margin, 0.0);
        assert!(!v.strict);
        // h = x1 at (0, 7) with direction (-1, 5): margin -1, strict
        let h = var(0);
        let v = inner_product_certificate(&h, &[0.0, 7.0], &[-1.0, 5.0]);
        assert!(v.certified());
        assert_eq!(v.margin, -1.0);
        assert!(v.strict);
    }

    #[test]
    fn vanishing_gradient_gives_indeterminate() {
        let h = pow(var(0), 2) + pow(var(1), 2);
        let v = inner_product_certificate(&h, &[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(v.status, ConeStatus::Indeterminate);
    }

    #[test]
    fn zero_direction_always_in_cone() {
        let v = tangent_cone_contains(&unit_disk(), &[1.0, 0.0], &[0.0, 0.0]);
        assert!(v.certified());
    }
}
