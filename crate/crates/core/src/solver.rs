//! Hybrid-arc computation.
//!
//! The solver integrates one selection of the flow map with a classical
//! explicit fourth-order scheme, localizes flow/jump events by bisection
//! on constraint values, applies the jump map according to a selection
//! policy, and classifies how the computed maximal solution ended.
//!
//! One arc is computed per (priority policy, selection policy) pair: weak
//! invariance notions are demonstrated by exhibiting a staying policy,
//! strong notions are the checker's job. Step sizes are capped both by
//! `dt_max` and by a relative state-change bound, so stiff episodes (e.g.
//! finite-time blowup) shrink the step geometrically instead of losing
//! the trajectory.

use crate::geometry::{norm, tangent_cone_contains};
use crate::model::maps::MapError;
use crate::model::sets::ConstraintSet;
use crate::model::system::{
    DisturbedHybridSystem, HybridArc, HybridSystem, HybridTimeDomain, JumpRecord,
    TerminationClass,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("initial point {0:?} lies outside the closure of the flow set and the jump set")]
    NoNontrivialSolution(Vec<f64>),
    #[error("selection index {index} out of range ({available} selections)")]
    SelectionOutOfRange { index: usize, available: usize },
    #[error("no admissible disturbance at state {state:?}: requested {requested:?}")]
    InadmissibleDisturbance { state: Vec<f64>, requested: Vec<f64> },
    #[error("map evaluation failed: {0}")]
    Map(#[from] MapError),
    #[error("unknown priority strategy `{0}`")]
    UnknownStrategy(String),
}

/// Ordering between flows and jumps on the overlap `C ∩ D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Priority {
    /// Jump whenever the jump set is reached (default).
    JumpFirst,
    /// Flow as long as flowing is viable; jump only when it is not.
    FlowFirst,
    /// Named strategy; `"jump_first"` and `"flow_first"` are built in.
    Strategy(String),
}

/// Which point of a set-valued flow to integrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FlowSelection {
    Index(usize),
    /// Fixed convex combination of all selections.
    Weights(Vec<f64>),
}

/// Which jump selection to apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JumpSelection {
    Index(usize),
    /// First guard-active selection whose image stays in `C ∪ D`, falling
    /// back to the first guard-active one.
    FirstAdmissible,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt_max: f64,
    pub event_tol: f64,
    /// Horizon `(T, J)`: stop once `t >= T` or `j >= J`.
    pub t_horizon: f64,
    pub j_horizon: u32,
    pub priority: Priority,
    pub flow_selection: FlowSelection,
    pub jump_selection: JumpSelection,
    /// `|x|` beyond which a flow is declared escaping.
    pub escape_threshold: f64,
    /// Consecutive zero-flow-time jumps before the arc is annotated
    /// eventually discrete (informational; the jump horizon still rules).
    pub zeno_guard: u32,
    /// Seed reserved for randomized policies; the built-in policies are
    /// deterministic and ignore it.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_max: 1e-3,
            event_tol: 1e-9,
            t_horizon: 10.0,
            j_horizon: 100,
            priority: Priority::JumpFirst,
            flow_selection: FlowSelection::Index(0),
            jump_selection: JumpSelection::FirstAdmissible,
            escape_threshold: 1e9,
            zeno_guard: 50,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_horizon(mut self, t: f64, j: u32) -> Self {
        self.t_horizon = t;
        self.j_horizon = j;
        self
    }

    fn resolved_priority(&self) -> Result<Priority, SolverError> {
        match &self.priority {
            Priority::Strategy(name) => match name.as_str() {
                "jump_first" => Ok(Priority::JumpFirst),
                "flow_first" => Ok(Priority::FlowFirst),
                other => Err(SolverError::UnknownStrategy(other.to_string())),
            },
            p => Ok(p.clone()),
        }
    }
}

/// Disturbance signal shape for one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SignalPolicy {
    Zero,
    Constant(Vec<f64>),
    /// `(t_from, value)` entries; the value applies from `t_from` onward.
    PiecewiseConstant(Vec<(f64, Vec<f64>)>),
    /// Per-state worst case over a uniform grid of the disturbance box,
    /// ranked by the norm of the resulting flow value / jump displacement.
    GridWorstCase(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbancePolicy {
    pub flow: SignalPolicy,
    pub jump: SignalPolicy,
}

impl DisturbancePolicy {
    pub fn zero() -> Self {
        DisturbancePolicy { flow: SignalPolicy::Zero, jump: SignalPolicy::Zero }
    }
}

impl SignalPolicy {
    /// Scheduled value at ordinary time `t`, when state-independent.
    fn scheduled(&self, t: f64, dim: usize) -> Option<Vec<f64>> {
        match self {
            SignalPolicy::Zero => Some(vec![0.0; dim]),
            SignalPolicy::Constant(w) => Some(w.clone()),
            SignalPolicy::PiecewiseConstant(entries) => {
                let mut current = vec![0.0; dim];
                for (from, w) in entries {
                    if t >= *from {
                        current = w.clone();
                    }
                }
                Some(current)
            }
            SignalPolicy::GridWorstCase(_) => None,
        }
    }

    /// Next schedule switch strictly after `t`, to keep the signal constant
    /// within an integration step.
    fn next_switch_after(&self, t: f64) -> Option<f64> {
        match self {
            SignalPolicy::PiecewiseConstant(entries) => entries
                .iter()
                .map(|(from, _)| *from)
                .filter(|from| *from > t + 1e-15)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
            _ => None,
        }
    }
}

// ---- engine ---------------------------------------------------------------------

/// Internal view unifying nominal and disturbed simulation.
struct Engine<'a> {
    flow_set: &'a ConstraintSet,
    flow_map: &'a crate::model::maps::SetValuedMap,
    jump_map: &'a crate::model::maps::SetValuedMap,
    /// Jump set in state space (projection for disturbed systems).
    jump_set_x: ConstraintSet,
    /// Flow set in state space (projection for disturbed systems).
    flow_set_x: ConstraintSet,
    disturbed: Option<(&'a DisturbedHybridSystem, &'a DisturbancePolicy)>,
    cfg: &'a SolverConfig,
    priority: Priority,
    clamped: usize,
}

const REL_STEP: f64 = 0.01;
const MIN_DT: f64 = 1e-12;
const STUCK_STRIKES: u32 = 3;

enum FlowOutcome {
    /// Step committed up to `(t, x)`; `entered_jump_set` marks an event.
    Step { t: f64, x: Vec<f64>, entered_jump_set: bool },
    /// No forward progress possible from this boundary point.
    Blocked,
    Escape { t: f64, x: Vec<f64> },
}

/// What the main loop should do next after a committed action.
enum Advance {
    Continue,
    Stop(TerminationClass),
}

impl<'a> Engine<'a> {
    fn wc_at(&mut self, t: f64, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        let Some((sys, pol)) = self.disturbed else {
            return Ok(Vec::new());
        };
        let requested = match pol.flow.scheduled(t, sys.dc) {
            Some(w) => w,
            None => {
                let res = match pol.flow {
                    SignalPolicy::GridWorstCase(r) => r,
                    _ => unreachable!(),
                };
                let mut best: Option<(f64, Vec<f64>)> = None;
                for w in sys.psi_c_grid(x, res) {
                    let joint: Vec<f64> = x.iter().chain(w.iter()).copied().collect();
                    if let Ok(vals) = self.flow_map.values_at(&joint) {
                        let speed = vals.iter().map(|(_, v)| norm(v)).fold(0.0_f64, f64::max);
                        if best.as_ref().map(|(b, _)| speed > *b).unwrap_or(true) {
                            best = Some((speed, w));
                        }
                    }
                }
                return best.map(|(_, w)| w).ok_or_else(|| {
                    SolverError::InadmissibleDisturbance { state: x.to_vec(), requested: vec![] }
                });
            }
        };
        if sys.wc_admissible(x, &requested) {
            return Ok(requested);
        }
        // clamp to an admissible value (zero is tried first)
        let mut candidates = vec![vec![0.0; sys.dc]];
        candidates.extend(sys.psi_c_grid(x, 9));
        for w in candidates {
            if sys.wc_admissible(x, &w) {
                self.clamped += 1;
                return Ok(w);
            }
        }
        Err(SolverError::InadmissibleDisturbance { state: x.to_vec(), requested })
    }

    fn wd_at(&mut self, t: f64, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        let Some((sys, pol)) = self.disturbed else {
            return Ok(Vec::new());
        };
        let requested = match pol.jump.scheduled(t, sys.dd) {
            Some(w) => w,
            None => {
                let res = match pol.jump {
                    SignalPolicy::GridWorstCase(r) => r,
                    _ => unreachable!(),
                };
                let mut best: Option<(f64, Vec<f64>)> = None;
                for w in sys.psi_d_grid(x, res) {
                    let joint: Vec<f64> = x.iter().chain(w.iter()).copied().collect();
                    if let Ok(vals) = self.jump_map.values_at(&joint) {
                        let disp = vals
                            .iter()
                            .map(|(_, v)| {
                                norm(&v.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>())
                            })
                            .fold(0.0_f64, f64::max);
                        if best.as_ref().map(|(b, _)| disp > *b).unwrap_or(true) {
                            best = Some((disp, w));
                        }
                    }
                }
                return best.map(|(_, w)| w).ok_or_else(|| {
                    SolverError::InadmissibleDisturbance { state: x.to_vec(), requested: vec![] }
                });
            }
        };
        if sys.wd_admissible(x, &requested) {
            return Ok(requested);
        }
        let mut candidates = vec![vec![0.0; sys.dd]];
        candidates.extend(sys.psi_d_grid(x, 9));
        for w in candidates {
            if sys.wd_admissible(x, &w) {
                self.clamped += 1;
                return Ok(w);
            }
        }
        Err(SolverError::InadmissibleDisturbance { state: x.to_vec(), requested })
    }

    /// Flow-set violation of `x` given the current disturbance.
    fn c_violation(&self, x: &[f64], wc: &[f64]) -> f64 {
        if self.disturbed.is_some() {
            let joint: Vec<f64> = x.iter().chain(wc.iter()).copied().collect();
            self.flow_set.violation(&joint)
        } else {
            self.flow_set.violation(x)
        }
    }

    fn in_flow_set(&self, x: &[f64], wc: &[f64]) -> bool {
        self.c_violation(x, wc) <= self.flow_set.eps_mem
    }

    fn in_jump_set(&self, x: &[f64]) -> bool {
        self.jump_set_x.contains(x)
    }

    fn in_state_space(&self, x: &[f64]) -> bool {
        self.flow_set_x.contains(x) || self.in_jump_set(x)
    }

    fn flow_dir(&self, x: &[f64], wc: &[f64]) -> Result<Vec<f64>, SolverError> {
        let joint: Vec<f64>;
        let arg: &[f64] = if self.disturbed.is_some() {
            joint = x.iter().chain(wc.iter()).copied().collect();
            &joint
        } else {
            x
        };
        match &self.cfg.flow_selection {
            FlowSelection::Index(i) => {
                if *i >= self.flow_map.selections.len() {
                    return Err(SolverError::SelectionOutOfRange {
                        index: *i,
                        available: self.flow_map.selections.len(),
                    });
                }
                Ok(self.flow_map.selection_value(*i, arg)?)
            }
            FlowSelection::Weights(w) => Ok(self.flow_map.hull_point(w, arg)?),
        }
    }

    /// One RK4 step of size `dt` from `x` with frozen disturbance.
    fn rk4(&self, x: &[f64], wc: &[f64], dt: f64) -> Result<Vec<f64>, SolverError> {
        let k1 = self.flow_dir(x, wc)?;
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
        let k2 = self.flow_dir(&x2, wc)?;
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
        let k3 = self.flow_dir(&x3, wc)?;
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
        let k4 = self.flow_dir(&x4, wc)?;
        Ok(x.iter()
            .enumerate()
            .map(|(i, a)| a + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    }

    /// Attempt one flow step from `(t, x)`, localizing the earliest event.
    fn flow_step(
        &mut self,
        t: f64,
        x: &[f64],
        watch_jump_set: bool,
    ) -> Result<FlowOutcome, SolverError> {
        if norm(x) > self.cfg.escape_threshold {
            return Ok(FlowOutcome::Escape { t, x: x.to_vec() });
        }
        let wc = self.wc_at(t, x)?;
        let f = self.flow_dir(x, &wc)?;
        let speed = norm(&f);
        let mut dt = self
            .cfg
            .dt_max
            .min(REL_STEP * (1.0 + norm(x)) / (speed + 1e-300))
            .min(self.cfg.t_horizon - t);
        if let Some((_, pol)) = self.disturbed {
            if let Some(ts) = pol.flow.next_switch_after(t) {
                dt = dt.min(ts - t);
            }
        }
        if dt < MIN_DT {
            // step collapse under a huge velocity reads as finite escape
            return if speed * MIN_DT > 1.0 {
                Ok(FlowOutcome::Escape { t, x: x.to_vec() })
            } else {
                Ok(FlowOutcome::Blocked)
            };
        }

        let state_at = |s: f64| -> Result<Vec<f64>, SolverError> {
            if s == 0.0 {
                Ok(x.to_vec())
            } else {
                self.rk4(x, &wc, s * dt)
            }
        };
        let x_full = state_at(1.0)?;

        let exits_c = self.c_violation(&x_full, &wc) > self.flow_set.eps_mem;
        let d_tol = self.cfg.event_tol.max(self.jump_set_x.eps_mem);
        let enters_d = watch_jump_set && !self.in_jump_set(x) && self.in_jump_set(&x_full);
        let mut event_s: Option<(f64, bool)> = None; // (s, is_jump_entry)

        if exits_c {
            // last step fraction still inside the flow set
            let s = bisect_last_false(|s| {
                Ok(self.c_violation(&state_at(s)?, &wc) > self.flow_set.eps_mem)
            })?;
            event_s = Some((s, false));
        }
        if enters_d {
            // first step fraction inside the jump set
            let s = bisect_first_true(|s| {
                Ok(self.jump_set_x.violation(&state_at(s)?) <= d_tol)
            })?;
            if event_s.map(|(es, _)| s < es).unwrap_or(true) {
                event_s = Some((s, true));
            }
        }
        if watch_jump_set && !enters_d {
            // transversal crossings of equality-shaped jump constraints can
            // enter and leave the jump set within one step; watch the
            // individual constraints for sign changes
            if let Some(s) = self.jump_crossing(&state_at, x, &x_full, d_tol)? {
                if event_s.map(|(es, _)| s < es).unwrap_or(true) {
                    event_s = Some((s, true));
                }
            }
        }

        match event_s {
            None => Ok(FlowOutcome::Step { t: t + dt, x: x_full, entered_jump_set: false }),
            Some((s, is_jump)) => {
                if s * dt < MIN_DT {
                    return Ok(if is_jump || self.in_jump_set(x) {
                        FlowOutcome::Step { t, x: x.to_vec(), entered_jump_set: true }
                    } else {
                        FlowOutcome::Blocked
                    });
                }
                let y = state_at(s)?;
                let entered = is_jump || self.in_jump_set(&y);
                Ok(FlowOutcome::Step { t: t + s * dt, x: y, entered_jump_set: entered })
            }
        }
    }

    /// Earliest interior crossing of a jump-set constraint within the step.
    fn jump_crossing(
        &self,
        state_at: &dyn Fn(f64) -> Result<Vec<f64>, SolverError>,
        x0: &[f64],
        x1: &[f64],
        d_tol: f64,
    ) -> Result<Option<f64>, SolverError> {
        let mut hs: Vec<&crate::model::expr::Expr> = Vec::new();
        collect_constraints(&self.jump_set_x, &mut hs);
        let mut best: Option<f64> = None;
        for h in hs {
            let (Ok(a), Ok(b)) = (h.eval(x0), h.eval(x1)) else { continue };
            if a == 0.0 || b == 0.0 || a.signum() == b.signum() {
                continue;
            }
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            let target_sign = b.signum();
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                let v = h.eval(&state_at(mid)?).unwrap_or(f64::NAN);
                if v.signum() == target_sign {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let y = state_at(hi)?;
            if self.jump_set_x.violation(&y) <= d_tol && best.map(|bs| hi < bs).unwrap_or(true) {
                best = Some(hi);
            }
        }
        Ok(best)
    }

    /// Apply one jump at `(t, x)`. `None` when no selection is guard-active.
    fn jump(&mut self, t: f64, j: u32, x: &[f64]) -> Result<Option<JumpRecord>, SolverError> {
        let wd = self.wd_at(t, x)?;
        let joint: Vec<f64>;
        let arg: &[f64] = if self.disturbed.is_some() {
            joint = x.iter().chain(wd.iter()).copied().collect();
            &joint
        } else {
            x
        };
        let candidates = match self.jump_map.values_at(arg) {
            Ok(c) => c,
            Err(MapError::NoActiveSelection) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let (selection, x_after) = match &self.cfg.jump_selection {
            JumpSelection::Index(i) => {
                if *i >= self.jump_map.selections.len() {
                    return Err(SolverError::SelectionOutOfRange {
                        index: *i,
                        available: self.jump_map.selections.len(),
                    });
                }
                (*i, self.jump_map.selection_value(*i, arg)?)
            }
            JumpSelection::FirstAdmissible => {
                match candidates.iter().find(|(_, v)| self.in_state_space(v)) {
                    Some((i, v)) => (*i, v.clone()),
                    None => (candidates[0].0, candidates[0].1.clone()),
                }
            }
        };
        Ok(Some(JumpRecord {
            t,
            j,
            x_before: x.to_vec(),
            x_after,
            selection,
            w_d: if self.disturbed.is_some() { Some(wd) } else { None },
        }))
    }

    /// Sampled test whether any flow selection points into the tangent cone
    /// of the flow set at `x` (zero disturbance for disturbed systems).
    fn can_flow_from(&self, x: &[f64]) -> bool {
        let wc = vec![0.0; self.disturbed.map(|(s, _)| s.dc).unwrap_or(0)];
        if !self.in_flow_set(x, &wc) {
            return false;
        }
        let joint: Vec<f64>;
        let arg: &[f64] = if self.disturbed.is_some() {
            joint = x.iter().chain(wc.iter()).copied().collect();
            &joint
        } else {
            x
        };
        let Ok(values) = self.flow_map.values_at(arg) else {
            return false;
        };
        values
            .iter()
            .any(|(_, v)| tangent_cone_contains(&self.flow_set_x, x, v).in_cone())
    }
}

/// Bisection over the step fraction `s` for a predicate that is false at
/// `s = 0` and true at `s = 1`. 60 halvings pin the switch to a relative
/// resolution of `2^-60`, far below every constraint tolerance in use.
fn bisect_switch(
    pred: impl Fn(f64) -> Result<bool, SolverError>,
) -> Result<(f64, f64), SolverError> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// Largest step fraction where `pred` is still false (e.g. last point
/// inside the flow set before an exit).
fn bisect_last_false(
    pred: impl Fn(f64) -> Result<bool, SolverError>,
) -> Result<f64, SolverError> {
    Ok(bisect_switch(pred)?.0)
}

/// Smallest step fraction where `pred` holds (e.g. first point inside the
/// jump set).
fn bisect_first_true(
    pred: impl Fn(f64) -> Result<bool, SolverError>,
) -> Result<f64, SolverError> {
    Ok(bisect_switch(pred)?.1)
}

fn collect_constraints<'a>(set: &'a ConstraintSet, out: &mut Vec<&'a crate::model::expr::Expr>) {
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

// ---- public entry points ---------------------------------------------------------

/// Simulate the nominal system from `x0`.
pub fn simulate(
    sys: &HybridSystem,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<HybridArc, SolverError> {
    if !sys.admits_initial(x0) {
        return Err(SolverError::NoNontrivialSolution(x0.to_vec()));
    }
    let mut engine = Engine {
        flow_set: &sys.flow_set,
        flow_map: &sys.flow_map,
        jump_map: &sys.jump_map,
        jump_set_x: sys.jump_set.clone(),
        flow_set_x: sys.flow_set.clone(),
        disturbed: None,
        cfg,
        priority: cfg.resolved_priority()?,
        clamped: 0,
    };
    run(&mut engine, x0)
}

/// Simulate the disturbed system from `x0` under a disturbance policy.
pub fn simulate_disturbed(
    sys: &DisturbedHybridSystem,
    x0: &[f64],
    policy: &DisturbancePolicy,
    cfg: &SolverConfig,
) -> Result<HybridArc, SolverError> {
    let flow_proj = sys.flow_projection();
    let jump_proj = sys.jump_projection();
    if !(flow_proj.contains(x0) || jump_proj.contains(x0)) {
        return Err(SolverError::NoNontrivialSolution(x0.to_vec()));
    }
    let mut engine = Engine {
        flow_set: &sys.flow_set_w,
        flow_map: &sys.flow_map_w,
        jump_map: &sys.jump_map_w,
        jump_set_x: jump_proj,
        flow_set_x: flow_proj,
        disturbed: Some((sys, policy)),
        cfg,
        priority: cfg.resolved_priority()?,
        clamped: 0,
    };
    run(&mut engine, x0)
}

/// Mutable bookkeeping of the arc under construction.
struct ArcBuilder {
    intervals: Vec<(f64, f64, u32)>,
    samples: Vec<Vec<(f64, Vec<f64>)>>,
    dist_trace: Vec<Vec<(f64, Vec<f64>)>>,
    jumps: Vec<JumpRecord>,
    interval_start: f64,
    zero_flow_jumps: u32,
    eventually_discrete: bool,
    made_progress: bool,
    last_action_was_jump: bool,
}

impl ArcBuilder {
    fn apply_jump(
        &mut self,
        engine: &Engine<'_>,
        rec: JumpRecord,
        t: f64,
        j: &mut u32,
        x: &mut Vec<f64>,
    ) -> Advance {
        self.intervals.push((self.interval_start, t, *j));
        *x = rec.x_after.clone();
        self.jumps.push(rec);
        *j += 1;
        self.interval_start = t;
        self.samples.push(vec![(t, x.clone())]);
        self.dist_trace.push(Vec::new());
        self.made_progress = true;
        self.last_action_was_jump = true;
        self.zero_flow_jumps += 1;
        if self.zero_flow_jumps >= engine.cfg.zeno_guard {
            self.eventually_discrete = true;
        }
        if !engine.in_state_space(x) {
            Advance::Stop(TerminationClass::EndsJumpOutside)
        } else {
            Advance::Continue
        }
    }
}

fn run(engine: &mut Engine<'_>, x0: &[f64]) -> Result<HybridArc, SolverError> {
    let cfg = engine.cfg;
    let mut t = 0.0_f64;
    let mut j = 0_u32;
    let mut x = x0.to_vec();

    let mut b = ArcBuilder {
        intervals: Vec::new(),
        samples: vec![vec![(t, x.clone())]],
        dist_trace: vec![Vec::new()],
        jumps: Vec::new(),
        interval_start: 0.0,
        zero_flow_jumps: 0,
        eventually_discrete: false,
        made_progress: false,
        last_action_was_jump: false,
    };
    let mut blocked_strikes = 0_u32;
    let termination: TerminationClass;

    if engine.disturbed.is_some() {
        let wc = engine.wc_at(t, &x)?;
        b.dist_trace[0].push((t, wc));
    }

    'outer: loop {
        if t >= cfg.t_horizon - 1e-15 || j >= cfg.j_horizon {
            termination = TerminationClass::HorizonReached {
                complete_consistent: engine.in_jump_set(&x) || engine.can_flow_from(&x),
            };
            break 'outer;
        }

        // jump-first priority takes the jump immediately
        if matches!(engine.priority, Priority::JumpFirst) && engine.in_jump_set(&x) {
            match engine.jump(t, j, &x)? {
                Some(rec) => match b.apply_jump(engine, rec, t, &mut j, &mut x) {
                    Advance::Continue => continue 'outer,
                    Advance::Stop(tc) => {
                        termination = tc;
                        break 'outer;
                    }
                },
                None => {
                    termination = TerminationClass::EndsJumpStuck;
                    break 'outer;
                }
            }
        }

        // try to flow
        let wc_now = engine.wc_at(t, &x)?;
        if engine.in_flow_set(&x, &wc_now) {
            match engine.flow_step(t, &x, matches!(engine.priority, Priority::JumpFirst))? {
                FlowOutcome::Step { t: t_new, x: x_new, entered_jump_set } => {
                    if t_new > t {
                        t = t_new;
                        x = x_new;
                        b.samples.last_mut().unwrap().push((t, x.clone()));
                        if engine.disturbed.is_some() {
                            let wc = engine.wc_at(t, &x)?;
                            b.dist_trace.last_mut().unwrap().push((t, wc));
                        }
                        b.zero_flow_jumps = 0;
                        blocked_strikes = 0;
                        b.made_progress = true;
                        b.last_action_was_jump = false;
                        if norm(&x) > cfg.escape_threshold {
                            termination = TerminationClass::FiniteEscape { escape_time: t };
                            break 'outer;
                        }
                        continue 'outer;
                    }
                    // zero-length step against the boundary
                    if entered_jump_set || engine.in_jump_set(&x) {
                        if let Some(rec) = engine.jump(t, j, &x)? {
                            match b.apply_jump(engine, rec, t, &mut j, &mut x) {
                                Advance::Continue => continue 'outer,
                                Advance::Stop(tc) => {
                                    termination = tc;
                                    break 'outer;
                                }
                            }
                        }
                    }
                    blocked_strikes += 1;
                    if blocked_strikes >= STUCK_STRIKES {
                        termination = stuck_class(engine, &x, &b);
                        break 'outer;
                    }
                    // nudge back onto the flow set and retry once or twice
                    if let Ok(p) = crate::geometry::project_onto_set(&engine.flow_set_x, &x) {
                        if norm(&crate::geometry::sub(&p, &x)) <= 100.0 * engine.flow_set_x.eps_mem
                        {
                            x = p;
                        }
                    }
                    continue 'outer;
                }
                FlowOutcome::Blocked => {
                    if engine.in_jump_set(&x) {
                        // flowing is impossible; jump regardless of priority
                        if let Some(rec) = engine.jump(t, j, &x)? {
                            match b.apply_jump(engine, rec, t, &mut j, &mut x) {
                                Advance::Continue => continue 'outer,
                                Advance::Stop(tc) => {
                                    termination = tc;
                                    break 'outer;
                                }
                            }
                        }
                    }
                    termination = stuck_class(engine, &x, &b);
                    break 'outer;
                }
                FlowOutcome::Escape { t: te, x: xe } => {
                    if te > t {
                        t = te;
                        x = xe;
                        b.samples.last_mut().unwrap().push((t, x.clone()));
                    }
                    termination = TerminationClass::FiniteEscape { escape_time: t };
                    break 'outer;
                }
            }
        }

        // cannot flow here; jump if possible
        if engine.in_jump_set(&x) {
            match engine.jump(t, j, &x)? {
                Some(rec) => match b.apply_jump(engine, rec, t, &mut j, &mut x) {
                    Advance::Continue => continue 'outer,
                    Advance::Stop(tc) => {
                        termination = tc;
                        break 'outer;
                    }
                },
                None => {
                    termination = TerminationClass::EndsJumpStuck;
                    break 'outer;
                }
            }
        }
        termination = stuck_class(engine, &x, &b);
        break 'outer;
    }

    b.intervals.push((b.interval_start, t, j));
    let arc = HybridArc {
        domain: HybridTimeDomain { intervals: b.intervals },
        samples: b.samples,
        jumps: b.jumps,
        disturbance_trace: b.dist_trace,
        termination,
        eventually_discrete: b.eventually_discrete,
        clamped_disturbances: engine.clamped,
    };
    debug_assert!(arc.validate().is_ok(), "{:?}", arc.validate());
    Ok(arc)
}

fn stuck_class(engine: &Engine<'_>, x: &[f64], b: &ArcBuilder) -> TerminationClass {
    if !b.made_progress {
        return TerminationClass::NoNontrivialSolution;
    }
    if !engine.in_state_space(x) {
        return TerminationClass::EndsJumpOutside;
    }
    if !engine.flow_set_x.contains(x) {
        // inside the jump-set projection only, but jumping was impossible
        return TerminationClass::EndsJumpStuck;
    }
    if b.last_action_was_jump {
        TerminationClass::EndsJumpStuck
    } else {
        TerminationClass::EndsFlowStuck
    }
}

/// Post-hoc termination classification from a recorded arc.
///
/// Recomputes the ending class from the final point and the system data;
/// total on solver-produced arcs.
pub fn classify_termination(
    arc: &HybridArc,
    sys: &HybridSystem,
    cfg: &SolverConfig,
) -> TerminationClass {
    let Some(x) = arc.final_state() else {
        return TerminationClass::NoNontrivialSolution;
    };
    if norm(x) > cfg.escape_threshold {
        let (t, _) = arc.final_time();
        return TerminationClass::FiniteEscape { escape_time: t };
    }
    let (t, j) = arc.final_time();
    if !(sys.flow_set.contains(x) || sys.jump_set.contains(x)) {
        return TerminationClass::EndsJumpOutside;
    }
    if t >= cfg.t_horizon - 1e-12 || j >= cfg.j_horizon {
        let can_continue = sys.jump_set.contains(x) || can_flow(sys, x);
        return TerminationClass::HorizonReached { complete_consistent: can_continue };
    }
    let singleton_final = arc.samples.last().map(|iv| iv.len() == 1).unwrap_or(true);
    if arc.domain.intervals.len() == 1 && singleton_final {
        return TerminationClass::NoNontrivialSolution;
    }
    if sys.flow_set.contains(x) && !can_flow(sys, x) && !sys.jump_set.contains(x) {
        let after_jump = singleton_final && !arc.jumps.is_empty();
        return if after_jump {
            TerminationClass::EndsJumpStuck
        } else {
            TerminationClass::EndsFlowStuck
        };
    }
    arc.termination.clone()
}

fn can_flow(sys: &HybridSystem, x: &[f64]) -> bool {
    if !sys.flow_set.contains(x) {
        return false;
    }
    match sys.flow_map.values_at(x) {
        Ok(values) => values
            .iter()
            .any(|(_, v)| tangent_cone_contains(&sys.flow_set, x, v).in_cone()),
        Err(_) => false,
    }
}

// ---- export ------------------------------------------------------------------------

/// CSV rows `(t, j, x_1..x_n, w_c.., flag)`; `flag` is `flow` for samples
/// inside an interval and `post_jump` for the first sample after a jump.
pub fn arc_to_csv(arc: &HybridArc, dim: usize) -> String {
    let wc_dim = arc
        .disturbance_trace
        .iter()
        .flat_map(|iv| iv.iter())
        .map(|(_, w)| w.len())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    out.push_str("t,j");
    for i in 1..=dim {
        out.push_str(&format!(",x{i}"));
    }
    for i in 1..=wc_dim {
        out.push_str(&format!(",wc{i}"));
    }
    out.push_str(",flag\n");
    for (k, iv) in arc.samples.iter().enumerate() {
        let j = arc.domain.intervals.get(k).map(|&(_, _, j)| j).unwrap_or(k as u32);
        for (si, (t, x)) in iv.iter().enumerate() {
            out.push_str(&format!("{t},{j}"));
            for v in x {
                out.push_str(&format!(",{v}"));
            }
            if wc_dim > 0 {
                let w = arc
                    .disturbance_trace
                    .get(k)
                    .and_then(|tr| tr.iter().rev().find(|(tw, _)| *tw <= *t + 1e-15))
                    .map(|(_, w)| w.clone())
                    .unwrap_or_else(|| vec![0.0; wc_dim]);
                for v in w.iter().chain(std::iter::repeat(&0.0)).take(wc_dim) {
                    out.push_str(&format!(",{v}"));
                }
            }
            let flag = if si == 0 && k > 0 { "post_jump" } else { "flow" };
            out.push_str(&format!(",{flag}\n"));
        }
    }
    out
}

/// JSON sidecar with jumps and the termination class.
pub fn arc_sidecar_json(arc: &HybridArc) -> String {
    #[derive(Serialize)]
    struct Sidecar<'a> {
        termination: &'a TerminationClass,
        eventually_discrete: bool,
        clamped_disturbances: usize,
        total_jumps: usize,
        final_time: (f64, u32),
        jumps: &'a [JumpRecord],
    }
    serde_json::to_string_pretty(&Sidecar {
        termination: &arc.termination,
        eventually_discrete: arc.eventually_discrete,
        clamped_disturbances: arc.clamped_disturbances,
        total_jumps: arc.total_jumps(),
        final_time: arc.final_time(),
        jumps: &arc.jumps,
    })
    .expect("arc sidecar serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expr::{abs, con, pow, var};
    use crate::model::maps::SetValuedMap;
    use crate::model::sets::ConstraintSet;

    /// Flow `(1 + x1^2, 0)` on the right half strip, jump set on the
    /// positive x1 axis with `x1 + [-1, 1]` jumps.
    fn finite_escape_system() -> HybridSystem {
        let c = ConstraintSet::boxed(vec![Some(0.0), Some(-1.0)], vec![None, Some(1.0)]);
        let f = SetValuedMap::single(vec![con(1.0) + pow(var(0), 2), con(0.0)]);
        let d = ConstraintSet::boxed(vec![Some(0.0), Some(0.0)], vec![None, Some(0.0)]);
        let g = SetValuedMap::from_components(vec![
            vec![var(0) - con(1.0), var(1)],
            vec![var(0), var(1)],
            vec![var(0) + con(1.0), var(1)],
        ])
        .unwrap();
        HybridSystem::new(2, c, f, d, g).unwrap()
    }

    fn circle_system() -> HybridSystem {
        // clockwise rotation on the closed upper half disk
        let c = ConstraintSet::intersection(vec![
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
            -var(1),
        ]);
        let f = SetValuedMap::single(vec![var(1), -var(0)]);
        let d = ConstraintSet::boxed(vec![Some(-1.0), Some(0.0)], vec![None, Some(0.0)]);
        let g = SetValuedMap::single(vec![con(-0.9) * var(0), var(1)]);
        HybridSystem::new(2, c, f, d, g).unwrap()
    }

    #[test]
    fn finite_escape_from_tan_solution() {
        let sys = finite_escape_system();
        let cfg = SolverConfig { t_horizon: 5.0, ..Default::default() };
        let arc = simulate(&sys, &[0.0, 1.0], &cfg).unwrap();
        match arc.termination {
            TerminationClass::FiniteEscape { escape_time } => {
                let half_pi = std::f64::consts::FRAC_PI_2;
                assert!(
                    (escape_time - half_pi).abs() < 0.01,
                    "escape at {escape_time}, want ~{half_pi}"
                );
            }
            ref other => panic!("expected finite escape, got {other:?}"),
        }
        // x2 stays frozen at 1
        for (_, _, x) in arc.all_samples() {
            assert!((x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_point_outside_errors() {
        let sys = finite_escape_system();
        let err = simulate(&sys, &[-5.0, -5.0], &SolverConfig::default());
        assert!(matches!(err, Err(SolverError::NoNontrivialSolution(_))));
    }

    #[test]
    fn jump_outside_with_fixed_selection() {
        let sys = finite_escape_system();
        let cfg = SolverConfig {
            jump_selection: JumpSelection::Index(0),
            ..Default::default()
        };
        // start on the jump set at x1 = 0.5; selection 0 maps to x1 = -0.5
        let arc = simulate(&sys, &[0.5, 0.0], &cfg).unwrap();
        assert_eq!(arc.termination, TerminationClass::EndsJumpOutside);
        assert_eq!(arc.jumps.len(), 1);
        assert!((arc.jumps[0].x_after[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn circle_flows_then_becomes_discrete() {
        let sys = circle_system();
        let cfg = SolverConfig {
            t_horizon: 10.0,
            j_horizon: 120,
            ..Default::default()
        };
        let arc = simulate(&sys, &[0.0, 1.0], &cfg).unwrap();
        // flowed a quarter turn (roughly pi/2 time units), then only jumps
        let (t_end, j_end) = arc.final_time();
        assert!((t_end - std::f64::consts::FRAC_PI_2).abs() < 0.01, "t_end = {t_end}");
        assert_eq!(j_end, 120);
        assert!(arc.eventually_discrete);
        assert!(matches!(
            arc.termination,
            TerminationClass::HorizonReached { complete_consistent: true }
        ));
        // jump cascade contracts toward the origin along the diameter
        assert!((arc.jumps[0].x_before[0] - 1.0).abs() < 1e-6);
        assert!((arc.jumps[0].x_after[0] + 0.9).abs() < 1e-6);
        // energy stays put during the flow phase
        for (_, jj, x) in arc.all_samples() {
            if jj == 0 {
                let e = x[0] * x[0] + x[1] * x[1];
                assert!((e - 1.0).abs() < 1e-6, "energy drifted to {e}");
            }
        }
    }

    #[test]
    fn equilibrium_flows_to_horizon() {
        // zero flow on a disk with empty jump set
        let c = ConstraintSet::ball(vec![0.0, 0.0], 1.0);
        let f = SetValuedMap::single(vec![con(0.0), con(0.0)]);
        let sys = HybridSystem::new(
            2,
            c,
            f,
            ConstraintSet::empty(),
            SetValuedMap::single(vec![var(0), var(1)]),
        )
        .unwrap();
        let cfg = SolverConfig { t_horizon: 1.0, ..Default::default() };
        let arc = simulate(&sys, &[0.2, 0.1], &cfg).unwrap();
        assert!(matches!(
            arc.termination,
            TerminationClass::HorizonReached { complete_consistent: true }
        ));
        assert_eq!(arc.final_state().unwrap(), &vec![0.2, 0.1]);
    }

    #[test]
    fn oscillator_flow_stops_at_quadrant_boundary() {
        // flow (-|x1| x2, 0) on the first/third quadrant disk; no jump set
        let q1 = ConstraintSet::intersection(vec![
            -var(0),
            -var(1),
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
        ]);
        let q3 = ConstraintSet::intersection(vec![
            var(0),
            var(1),
            pow(var(0), 2) + pow(var(1), 2) - con(1.0),
        ]);
        let c = ConstraintSet::union(vec![q1, q3]);
        let f = SetValuedMap::single(vec![-abs(var(0)) * var(1), con(0.0)]);
        let sys = HybridSystem::new(
            2,
            c,
            f,
            ConstraintSet::empty(),
            SetValuedMap::single(vec![var(0), var(1)]),
        )
        .unwrap();
        let cfg = SolverConfig { t_horizon: 50.0, ..Default::default() };
        let arc = simulate(&sys, &[0.8, 0.5], &cfg).unwrap();
        // x1 decays toward the x2 axis and cannot cross it; the run should
        // reach the horizon while staying in the first quadrant
        let (t_end, _) = arc.final_time();
        let xf = arc.final_state().unwrap();
        assert!(xf[0] >= -1e-9, "left the quadrant: {xf:?}");
        assert!(t_end > 1.0);
    }

    #[test]
    fn determinism_bitwise() {
        let sys = circle_system();
        let cfg = SolverConfig::default().with_horizon(3.0, 40);
        let a = simulate(&sys, &[0.0, 1.0], &cfg).unwrap();
        let b = simulate(&sys, &[0.0, 1.0], &cfg).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (ia, ib) in a.samples.iter().zip(&b.samples) {
            assert_eq!(ia.len(), ib.len());
            for ((ta, xa), (tb, xb)) in ia.iter().zip(ib) {
                assert_eq!(ta.to_bits(), tb.to_bits());
                for (va, vb) in xa.iter().zip(xb) {
                    assert_eq!(va.to_bits(), vb.to_bits());
                }
            }
        }
    }

    #[test]
    fn csv_schema() {
        let sys = circle_system();
        let cfg = SolverConfig::default().with_horizon(0.01, 5);
        let arc = simulate(&sys, &[0.0, 1.0], &cfg).unwrap();
        let csv = arc_to_csv(&arc, 2);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,j,x1,x2,flag");
        assert!(csv.ends_with('\n'));
        let sidecar = arc_sidecar_json(&arc);
        assert!(sidecar.contains("termination"));
    }
}
