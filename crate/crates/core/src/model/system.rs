//! Hybrid systems, hybrid time domains and solution records.

use super::maps::SetValuedMap;
use super::sets::ConstraintSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone)]
pub enum SystemError {
    #[error("flow map references variable {var} but state dimension is {dim}")]
    FlowMapDim { var: usize, dim: usize },
    #[error("map output dimension {out} does not match state dimension {dim}")]
    OutputDim { out: usize, dim: usize },
    #[error("{map} map has no active selection at sampled point {point:?}")]
    DomainGap { map: &'static str, point: Vec<f64> },
    #[error("hybrid time domain malformed: {0}")]
    Domain(String),
}

/// Nominal hybrid system: flow set/map and jump set/map over `R^dim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridSystem {
    pub dim: usize,
    pub flow_set: ConstraintSet,
    pub flow_map: SetValuedMap,
    pub jump_set: ConstraintSet,
    pub jump_map: SetValuedMap,
}

impl HybridSystem {
    pub fn new(
        dim: usize,
        flow_set: ConstraintSet,
        flow_map: SetValuedMap,
        jump_set: ConstraintSet,
        jump_map: SetValuedMap,
    ) -> Result<Self, SystemError> {
        let sys = HybridSystem { dim, flow_set, flow_map, jump_set, jump_map };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        for map in [&self.flow_map, &self.jump_map] {
            if let Some(v) = map.max_var() {
                if v >= self.dim {
                    return Err(SystemError::FlowMapDim { var: v, dim: self.dim });
                }
            }
            if map.out_dim() != self.dim {
                return Err(SystemError::OutputDim { out: map.out_dim(), dim: self.dim });
            }
        }
        Ok(())
    }

    /// `x` is a legal initial point iff it lies in `C ∪ D` (both closed).
    pub fn admits_initial(&self, x: &[f64]) -> bool {
        self.flow_set.contains(x) || self.jump_set.contains(x)
    }

    /// Sampled domain-coverage check: every sampled point of `C` has a
    /// guard-active flow selection, every sampled point of `D` a jump one.
    pub fn validate_domains(&self, samples_c: &[Vec<f64>], samples_d: &[Vec<f64>]) -> Result<(), SystemError> {
        for x in samples_c {
            if self.flow_map.values_at(x).is_err() {
                return Err(SystemError::DomainGap { map: "flow", point: x.clone() });
            }
        }
        for x in samples_d {
            if self.jump_map.values_at(x).is_err() {
                return Err(SystemError::DomainGap { map: "jump", point: x.clone() });
            }
        }
        Ok(())
    }
}

/// Hybrid system with disturbances entering flows and jumps.
///
/// The flow constraint lives in `R^(dim+dc)` over `(x, w_c)`, the jump
/// constraint in `R^(dim+dd)` over `(x, w_d)`; disturbance variables use
/// the trailing indices. `w_box_c`/`w_box_d` are the ambient value boxes
/// for the two disturbance channels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisturbedHybridSystem {
    pub dim: usize,
    pub dc: usize,
    pub dd: usize,
    pub flow_set_w: ConstraintSet,
    pub flow_map_w: SetValuedMap,
    pub jump_set_w: ConstraintSet,
    pub jump_map_w: SetValuedMap,
    pub w_box_c: Vec<(f64, f64)>,
    pub w_box_d: Vec<(f64, f64)>,
}

impl DisturbedHybridSystem {
    /// Admissible flow disturbances at `x`: membership of `(x, w_c)`.
    pub fn wc_admissible(&self, x: &[f64], w: &[f64]) -> bool {
        let joint: Vec<f64> = x.iter().chain(w.iter()).copied().collect();
        self.flow_set_w.contains(&joint)
    }

    pub fn wd_admissible(&self, x: &[f64], w: &[f64]) -> bool {
        let joint: Vec<f64> = x.iter().chain(w.iter()).copied().collect();
        self.jump_set_w.contains(&joint)
    }

    /// Uniform grid over a disturbance box including endpoints; `0` is
    /// inserted per dimension when the box straddles it.
    pub fn grid(bx: &[(f64, f64)], per_dim: usize) -> Vec<Vec<f64>> {
        let mut axes: Vec<Vec<f64>> = Vec::new();
        for &(lo, hi) in bx {
            let mut pts = Vec::new();
            if per_dim <= 1 || hi <= lo {
                pts.push(lo.max(0.0).min(hi).max(lo));
            } else {
                for k in 0..per_dim {
                    pts.push(lo + (hi - lo) * (k as f64) / ((per_dim - 1) as f64));
                }
            }
            if lo <= 0.0 && hi >= 0.0 && !pts.iter().any(|p| *p == 0.0) {
                pts.push(0.0);
            }
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.dedup();
            axes.push(pts);
        }
        // cartesian product
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for base in &out {
                for v in &axis {
                    let mut b = base.clone();
                    b.push(*v);
                    next.push(b);
                }
            }
            out = next;
        }
        out
    }

    /// Grid points of `Psi_c(x)`: admissible flow disturbances at `x`.
    pub fn psi_c_grid(&self, x: &[f64], per_dim: usize) -> Vec<Vec<f64>> {
        Self::grid(&self.w_box_c, per_dim)
            .into_iter()
            .filter(|w| self.wc_admissible(x, w))
            .collect()
    }

    pub fn psi_d_grid(&self, x: &[f64], per_dim: usize) -> Vec<Vec<f64>> {
        Self::grid(&self.w_box_d, per_dim)
            .into_iter()
            .filter(|w| self.wd_admissible(x, w))
            .collect()
    }

    /// Projection of the flow constraint onto the state space, computed as
    /// the zero-disturbance slice. Exact whenever `0 ∈ Psi_c(x)` holds on
    /// the projection, which is the standing zero-admissibility assumption
    /// for disturbed systems here.
    pub fn flow_projection(&self) -> ConstraintSet {
        self.flow_set_w.substitute_tail(self.dim, &vec![0.0; self.dc])
    }

    /// Projection of the jump constraint onto the state space: union of
    /// slices over a small disturbance grid (endpoints and zero).
    pub fn jump_projection(&self) -> ConstraintSet {
        let slices: Vec<ConstraintSet> = Self::grid(&self.w_box_d, 3)
            .into_iter()
            .map(|w| self.jump_set_w.substitute_tail(self.dim, &w))
            .collect();
        if slices.len() == 1 {
            slices.into_iter().next().unwrap()
        } else {
            ConstraintSet::union(slices)
        }
    }

    /// Nominal restriction: dynamics and constraints at `w ≡ 0`.
    pub fn nominal_restriction(&self) -> Result<HybridSystem, SystemError> {
        let zc = vec![0.0; self.dc];
        let zd = vec![0.0; self.dd];
        HybridSystem::new(
            self.dim,
            self.flow_set_w.substitute_tail(self.dim, &zc),
            self.flow_map_w.substitute_tail(self.dim, &zc),
            self.jump_set_w.substitute_tail(self.dim, &zd),
            self.jump_map_w.substitute_tail(self.dim, &zd),
        )
    }

    /// Embed a nominal system as a disturbed one with singleton zero
    /// disturbance boxes.
    pub fn from_nominal(sys: &HybridSystem) -> Self {
        DisturbedHybridSystem {
            dim: sys.dim,
            dc: 1,
            dd: 1,
            flow_set_w: sys
                .flow_set
                .intersect(&ConstraintSet::bounded_box_at(sys.dim, (0.0, 0.0))),
            flow_map_w: sys.flow_map.clone(),
            jump_set_w: sys
                .jump_set
                .intersect(&ConstraintSet::bounded_box_at(sys.dim, (0.0, 0.0))),
            jump_map_w: sys.jump_map.clone(),
            w_box_c: vec![(0.0, 0.0)],
            w_box_d: vec![(0.0, 0.0)],
        }
    }

    pub fn admits_initial(&self, x: &[f64]) -> bool {
        self.flow_projection().contains(x) || self.jump_projection().contains(x)
    }
}

impl ConstraintSet {
    /// Box constraint pinning a single trailing coordinate, used when
    /// embedding nominal systems in the disturbed form.
    fn bounded_box_at(index: usize, bound: (f64, f64)) -> ConstraintSet {
        let mut lower = vec![None; index + 1];
        let mut upper = vec![None; index + 1];
        lower[index] = Some(bound.0);
        upper[index] = Some(bound.1);
        ConstraintSet::boxed(lower, upper)
    }
}

// ---- solution records -------------------------------------------------------

/// Hybrid time domain: a list of flow intervals `[t_start, t_end] x {j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridTimeDomain {
    pub intervals: Vec<(f64, f64, u32)>,
}

impl HybridTimeDomain {
    pub fn validate(&self) -> Result<(), SystemError> {
        for (k, w) in self.intervals.windows(2).enumerate() {
            let (_, e0, j0) = w[0];
            let (s1, _, j1) = w[1];
            if j1 != j0 + 1 {
                return Err(SystemError::Domain(format!(
                    "jump counter not contiguous at interval {k}: {j0} -> {j1}"
                )));
            }
            if s1 != e0 {
                return Err(SystemError::Domain(format!(
                    "interval {k} ends at t={e0} but next starts at t={s1}"
                )));
            }
        }
        for (k, &(s, e, _)) in self.intervals.iter().enumerate() {
            if !(s <= e) {
                return Err(SystemError::Domain(format!("interval {k} has t_start > t_end")));
            }
        }
        Ok(())
    }

    pub fn sup(&self) -> (f64, u32) {
        self.intervals
            .last()
            .map(|&(_, e, j)| (e, j))
            .unwrap_or((0.0, 0))
    }
}

/// How a computed maximal solution ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TerminationClass {
    /// Reserved for genuinely complete solutions; the solver reports
    /// `HorizonReached` with a completeness-consistent flag instead.
    Complete,
    /// Hit the simulation horizon; `complete_consistent` records whether
    /// the solution could still be extended at the final point.
    HorizonReached { complete_consistent: bool },
    /// Flow reached the closure of the flow set outside flow and jump sets.
    EndsFlowBoundary,
    /// Flow reached a point where no flow direction is admissible and the
    /// point is not in the jump set.
    EndsFlowStuck,
    /// State norm blew past the escape threshold during flow.
    FiniteEscape { escape_time: f64 },
    /// A jump landed outside the union of flow and jump sets.
    EndsJumpOutside,
    /// A jump landed where neither flowing nor jumping is possible.
    EndsJumpStuck,
    /// Only the trivial solution exists from the initial point.
    NoNontrivialSolution,
}

/// One recorded jump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    pub j: u32,
    pub x_before: Vec<f64>,
    pub x_after: Vec<f64>,
    pub selection: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_d: Option<Vec<f64>>,
}

/// A computed solution over a hybrid time domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridArc {
    pub domain: HybridTimeDomain,
    /// Per interval, samples `(t, x)` with strictly increasing `t`
    /// (a single sample for zero-length intervals).
    pub samples: Vec<Vec<(f64, Vec<f64>)>>,
    pub jumps: Vec<JumpRecord>,
    /// Per interval, flow disturbance samples `(t, w_c)`; empty for
    /// nominal simulations.
    pub disturbance_trace: Vec<Vec<(f64, Vec<f64>)>>,
    pub termination: TerminationClass,
    /// Set when the zeno guard saw a long run of zero-flow-time jumps.
    pub eventually_discrete: bool,
    /// Number of disturbance values clamped to the admissible set.
    pub clamped_disturbances: usize,
}

impl HybridArc {
    pub fn final_state(&self) -> Option<&Vec<f64>> {
        self.samples.last().and_then(|iv| iv.last()).map(|(_, x)| x)
    }

    pub fn final_time(&self) -> (f64, u32) {
        self.domain.sup()
    }

    pub fn total_jumps(&self) -> usize {
        self.jumps.len()
    }

    /// All samples flattened as `(t, j, x)`.
    pub fn all_samples(&self) -> impl Iterator<Item = (f64, u32, &Vec<f64>)> {
        self.samples.iter().enumerate().flat_map(move |(k, iv)| {
            let j = self.domain.intervals.get(k).map(|&(_, _, j)| j).unwrap_or(k as u32);
            iv.iter().map(move |(t, x)| (*t, j, x))
        })
    }

    /// Structural validation of the recorded domain and sample arrays.
    pub fn validate(&self) -> Result<(), SystemError> {
        self.domain.validate()?;
        if self.samples.len() != self.domain.intervals.len() {
            return Err(SystemError::Domain(format!(
                "{} sample arrays for {} intervals",
                self.samples.len(),
                self.domain.intervals.len()
            )));
        }
        for (k, iv) in self.samples.iter().enumerate() {
            let (s, e, _) = self.domain.intervals[k];
            if iv.is_empty() {
                return Err(SystemError::Domain(format!("interval {k} has no samples")));
            }
            if (iv[0].0 - s).abs() > 1e-12 || (iv[iv.len() - 1].0 - e).abs() > 1e-12 {
                return Err(SystemError::Domain(format!(
                    "interval {k} samples span [{}, {}], domain says [{s}, {e}]",
                    iv[0].0,
                    iv[iv.len() - 1].0
                )));
            }
            for w in iv.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(SystemError::Domain(format!(
                        "non-increasing sample times in interval {k}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_validation() {
        let good = HybridTimeDomain {
            intervals: vec![(0.0, 1.0, 0), (1.0, 1.0, 1), (1.0, 2.5, 2)],
        };
        assert!(good.validate().is_ok());
        assert_eq!(good.sup(), (2.5, 2));

        let bad = HybridTimeDomain { intervals: vec![(0.0, 1.0, 0), (1.5, 2.0, 1)] };
        assert!(bad.validate().is_err());
        let bad_j = HybridTimeDomain { intervals: vec![(0.0, 1.0, 0), (1.0, 2.0, 2)] };
        assert!(bad_j.validate().is_err());
    }

    #[test]
    fn grid_contains_endpoints_and_zero() {
        let g = DisturbedHybridSystem::grid(&[(-1.0, 1.0)], 4);
        let flat: Vec<f64> = g.into_iter().map(|v| v[0]).collect();
        assert!(flat.contains(&-1.0));
        assert!(flat.contains(&1.0));
        assert!(flat.contains(&0.0));
    }
}
