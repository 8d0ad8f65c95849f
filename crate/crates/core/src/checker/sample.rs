//! Deterministic samplers for regions, boundaries and constraint corners.
//!
//! All sampling draws from a seeded stream, and accepted points are a
//! prefix-stable function of the request size: asking for more samples
//! extends the set rather than reshuffling it, so a violation found at a
//! small budget is still found at a larger one.

use crate::geometry::settle_onto_set;
use crate::model::expr::Expr;
use crate::model::sets::ConstraintSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_REJECTIONS: usize = 100_000;
const DEDUPE_TOL: f64 = 1e-9;

pub struct Sampler {
    rng: ChaCha8Rng,
    bx: Vec<(f64, f64)>,
}

impl Sampler {
    pub fn new(seed: u64, ambient: &[(f64, f64)]) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), bx: ambient.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.bx.len()
    }

    fn raw(&mut self) -> Vec<f64> {
        self.bx
            .iter()
            .map(|&(lo, hi)| self.rng.gen_range(0.0..=1.0) * (hi - lo) + lo)
            .collect()
    }

    /// Deterministic probe points: the box center and the origin, each
    /// projected onto the set when possible.
    pub fn anchors(&self, set: &ConstraintSet) -> Vec<Vec<f64>> {
        let center: Vec<f64> = self.bx.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        let origin = vec![0.0; self.bx.len()];
        let mut out = Vec::new();
        for p in [origin, center] {
            if set.contains(&p) {
                out.push(p);
            } else if let Ok(q) = settle_onto_set(set, &p) {
                if set.contains(&q) {
                    out.push(q);
                }
            }
        }
        out
    }

    /// Up to `n` points of the set by rejection over the ambient box,
    /// seeded with the anchors. Empty result means nothing was found
    /// within the rejection budget.
    pub fn region(&mut self, set: &ConstraintSet, n: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for a in self.anchors(set) {
            push_unique(&mut out, a, usize::MAX);
        }
        let mut attempts = 0;
        let seeded = out.len();
        while out.len() < n && attempts < MAX_REJECTIONS {
            attempts += 1;
            let p = self.raw();
            if set.contains(&p) {
                out.push(p);
            }
            // a set rejection never hits is thin; switch to projections
            if attempts >= 2000 && out.len() == seeded {
                break;
            }
        }
        // thin sets never pass rejection; fall back to projections
        if out.len() < n.min(16) {
            let mut attempts = 0;
            let budget = (4 * n).max(256);
            while out.len() < n && attempts < budget {
                attempts += 1;
                let p = self.raw();
                if let Ok(q) = settle_onto_set(set, &p) {
                    if set.contains(&q) && inside_box(&self.bx, &q) {
                        push_unique(&mut out, q, 64);
                    }
                }
            }
        }
        out.truncate(n.max(2));
        out
    }

    /// Up to `n` boundary points: synthesized constraint corners first,
    /// then projections of rejected ambient samples that land on the
    /// boundary. Thin (measure-zero) sets are handled by the projection
    /// path, where every member is a boundary point.
    pub fn boundary(&mut self, set: &ConstraintSet, n: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for c in self.corners(set) {
            push_unique(&mut out, c, usize::MAX);
        }
        let mut attempts = 0;
        let budget = (6 * n).max(512);
        while out.len() < n && attempts < budget {
            attempts += 1;
            let p = self.raw();
            let q = match settle_onto_set(set, &p) {
                Ok(q) => q,
                Err(_) => continue,
            };
            if set.is_boundary(&q) && inside_box_loose(&self.bx, &q) {
                push_unique(&mut out, q, 64);
            }
        }
        out
    }

    /// Roots of single active constraints and of pairs of constraints,
    /// found by damped Newton from deterministic starts; corner points of
    /// intersections (where two constraints are active) are exactly what
    /// boundary projection tends to miss.
    pub fn corners(&mut self, set: &ConstraintSet) -> Vec<Vec<f64>> {
        let mut pool: Vec<&Expr> = Vec::new();
        collect_constraints(set, &mut pool);
        let dim = self.bx.len();
        let center: Vec<f64> = self.bx.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        let mut starts: Vec<Vec<f64>> = vec![center.clone()];
        // orthant lattice around the center so every sign combination of
        // offsets is tried (capped for higher dimensions)
        let lattice = 1usize << dim.min(4);
        for mask in 0..lattice {
            let p: Vec<f64> = self
                .bx
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| {
                    let half = 0.35 * (hi - lo);
                    if mask >> i & 1 == 1 {
                        center[i] + half
                    } else {
                        center[i] - half
                    }
                })
                .collect();
            starts.push(p);
        }
        let mut fork = ChaCha8Rng::seed_from_u64(0xC04E);
        for _ in 0..4 {
            starts.push(
                self.bx
                    .iter()
                    .map(|&(lo, hi)| fork.gen_range(0.0..=1.0) * (hi - lo) + lo)
                    .collect(),
            );
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        let consider = |point: Option<Vec<f64>>, out: &mut Vec<Vec<f64>>| {
            if let Some(p) = point {
                if set.contains(&p) && set.is_boundary(&p) && inside_box_loose(&self.bx, &p) {
                    push_unique(out, p, usize::MAX);
                }
            }
        };
        for (i, hi_expr) in pool.iter().enumerate() {
            for start in &starts {
                consider(newton_system(&[hi_expr], start, dim), &mut out);
            }
            for hj_expr in pool.iter().skip(i + 1) {
                for start in &starts {
                    consider(newton_system(&[hi_expr, hj_expr], start, dim), &mut out);
                }
            }
        }
        out
    }
}

fn inside_box(bx: &[(f64, f64)], p: &[f64]) -> bool {
    p.iter().zip(bx).all(|(v, &(lo, hi))| *v >= lo && *v <= hi)
}

fn inside_box_loose(bx: &[(f64, f64)], p: &[f64]) -> bool {
    p.iter()
        .zip(bx)
        .all(|(v, &(lo, hi))| *v >= lo - 1e-6 && *v <= hi + 1e-6)
}

fn push_unique(out: &mut Vec<Vec<f64>>, p: Vec<f64>, dedupe_window: usize) {
    let start = out.len().saturating_sub(dedupe_window);
    for q in &out[start..] {
        let d2: f64 = q.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < DEDUPE_TOL * DEDUPE_TOL {
            return;
        }
    }
    out.push(p);
}

pub(crate) fn collect_constraints<'a>(set: &'a ConstraintSet, out: &mut Vec<&'a Expr>) {
    match set.children() {
        Some(children) => {
            for c in children {
                collect_constraints(c, out);
            }
        }
        None => {
            if let Some(hs) = set.constraints() {
                out.extend(hs.iter());
            }
        }
    }
}

/// Damped min-norm Newton for `h_k(x) = 0` (one or two equations).
fn newton_system(hs: &[&&Expr], start: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    for _ in 0..60 {
        let mut vals = Vec::with_capacity(hs.len());
        let mut grads = Vec::with_capacity(hs.len());
        for h in hs {
            let (v, g) = h.eval_grad(&x).ok()?;
            vals.push(v);
            grads.push(g);
        }
        if vals.iter().all(|v| v.abs() < 1e-12) {
            return Some(x);
        }
        // min-norm step: dx = J^T (J J^T)^{-1} (-vals)
        match hs.len() {
            1 => {
                let g = &grads[0];
                let g2: f64 = g.iter().map(|v| v * v).sum();
                if g2 < 1e-30 {
                    return None;
                }
                for (xi, gi) in x.iter_mut().zip(g) {
                    *xi -= vals[0] / g2 * gi;
                }
            }
            2 => {
                let (ga, gb) = (&grads[0], &grads[1]);
                let a11: f64 = ga.iter().map(|v| v * v).sum();
                let a12: f64 = ga.iter().zip(gb).map(|(u, v)| u * v).sum();
                let a22: f64 = gb.iter().map(|v| v * v).sum();
                let det = a11 * a22 - a12 * a12;
                if det.abs() < 1e-24 {
                    return None;
                }
                let b1 = -vals[0];
                let b2 = -vals[1];
                let l1 = (a22 * b1 - a12 * b2) / det;
                let l2 = (a11 * b2 - a12 * b1) / det;
                for k in 0..dim {
                    x[k] += l1 * ga[k] + l2 * gb[k];
                }
            }
            _ => return None,
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expr::{con, pow, var};

    #[test]
    fn region_prefix_stability() {
        let disk = ConstraintSet::ball(vec![0.0, 0.0], 1.0);
        let bx = [(-2.0, 2.0), (-2.0, 2.0)];
        let a = Sampler::new(7, &bx).region(&disk, 50);
        let b = Sampler::new(7, &bx).region(&disk, 120);
        assert_eq!(&b[..a.len()], &a[..]);
    }

    #[test]
    fn boundary_of_disk_is_on_circle() {
        let disk = ConstraintSet::ball(vec![0.0, 0.0], 1.0);
        let pts = Sampler::new(3, &[(-2.0, 2.0), (-2.0, 2.0)]).boundary(&disk, 100);
        assert!(pts.len() >= 50);
        for p in &pts {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-6, "not on circle: {p:?}");
        }
    }

    #[test]
    fn corners_find_constraint_pairs() {
        // quarter disk: corners at (0,0), (1,0), (0,1)
        let s = ConstraintSet::intersection(vec![
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
            -var(0),
            -var(1),
        ]);
        let pts = Sampler::new(11, &[(-2.0, 2.0), (-2.0, 2.0)]).corners(&s);
        let expect = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for e in expect {
            assert!(
                pts.iter().any(|p| ((p[0] - e[0]).powi(2) + (p[1] - e[1]).powi(2)).sqrt() < 1e-6),
                "missing corner {e:?} in {pts:?}"
            );
        }
    }

    #[test]
    fn thin_set_sampled_by_projection() {
        // the single point {(-1, 0)} as disk ∩ {x1 <= -1}
        let s = ConstraintSet::intersection(vec![
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
            var(0) + con(1.0),
        ]);
        let pts = Sampler::new(5, &[(-4.0, 4.0), (-4.0, 4.0)]).boundary(&s, 40);
        assert!(!pts.is_empty());
        for p in &pts {
            assert!((p[0] + 1.0).abs() < 1e-5 && p[1].abs() < 1e-5, "stray point {p:?}");
        }
    }

    #[test]
    fn empty_set_yields_nothing() {
        let e = ConstraintSet::empty();
        let pts = Sampler::new(1, &[(-1.0, 1.0)]).region(&e, 10);
        assert!(pts.is_empty());
    }
}
