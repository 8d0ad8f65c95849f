//! Built-in example systems with their expected check verdicts.
//!
//! Each entry is a fully constructed system plus named candidate sets,
//! optional Lyapunov data, an ambient sampling box, and the verdicts the
//! checker is expected to reproduce under the default configuration. The
//! entries double as documentation of what each sufficient condition does
//! and as regression fixtures.

use crate::checker::{LyapunovSpec, Verdict};
use crate::model::expr::{abs, con, cos, max2, min2, pow, sin, var, Expr};
use crate::model::maps::{Selection, SetValuedMap};
use crate::model::scenario::Scenario;
use crate::model::sets::ConstraintSet;
use crate::model::system::{DisturbedHybridSystem, HybridSystem};
use std::collections::BTreeMap;
use thiserror::Error;

pub const IDS: [&str; 8] = [
    "ex_finite_escape",
    "ex_wfi_circle",
    "ex_oscillator_nominal",
    "ex_oscillator_disturbed",
    "ex_gamma_corner",
    "ex_marchaud_1d",
    "ex_ly_failure",
    "ex_inverter",
];

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown example `{0}`; available: {}", IDS.join(", "))]
    UnknownId(String),
    #[error("unknown variant `{variant}` of `{id}`")]
    UnknownVariant { id: String, variant: String },
}

/// Which checking suite an expected verdict refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Weak,
    Forward,
    ForwardAlt,
    RobustWeak,
    RobustForward,
    Lyapunov,
}

/// One frozen regression expectation: running `check` of `kind` on the
/// named candidate set must yield `verdict` for `condition` (a condition
/// id or a conclusion name).
#[derive(Debug, Clone)]
pub struct Expectation {
    pub kind: CheckKind,
    pub set: &'static str,
    /// Use the system variant of this name instead of the default one.
    pub variant: Option<&'static str>,
    pub condition: &'static str,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub id: &'static str,
    /// What the example demonstrates.
    pub provenance: &'static str,
    pub nominal: Option<HybridSystem>,
    pub disturbed: Option<DisturbedHybridSystem>,
    pub candidate_sets: BTreeMap<String, ConstraintSet>,
    pub lyapunov: Option<LyapunovSpec>,
    pub ambient: Vec<(f64, f64)>,
    /// Alternative system builds (e.g. a restricted jump map).
    pub variants: BTreeMap<String, HybridSystem>,
    pub expected: Vec<Expectation>,
    pub notes: Vec<String>,
}

impl CatalogEntry {
    pub fn system(&self, variant: Option<&str>) -> Result<&HybridSystem, CatalogError> {
        match variant {
            None => self.nominal.as_ref().ok_or_else(|| CatalogError::UnknownVariant {
                id: self.id.into(),
                variant: "default nominal".into(),
            }),
            Some(v) => self.variants.get(v).ok_or_else(|| CatalogError::UnknownVariant {
                id: self.id.into(),
                variant: v.into(),
            }),
        }
    }

    pub fn set(&self, name: &str) -> Option<&ConstraintSet> {
        self.candidate_sets.get(name)
    }

    /// Entry as a scenario (exportable to the JSON format).
    pub fn to_scenario(&self) -> Scenario {
        Scenario {
            nominal: self.nominal.clone(),
            disturbed: self.disturbed.clone(),
            candidate_sets: self.candidate_sets.clone(),
            lyapunov: self.lyapunov.as_ref().map(|l| (l.v.clone(), l.r, l.r_star)),
            ambient: Some(self.ambient.clone()),
        }
    }
}

pub fn load_example(id: &str) -> Result<CatalogEntry, CatalogError> {
    match id {
        "ex_finite_escape" => Ok(finite_escape()),
        "ex_wfi_circle" => Ok(wfi_circle()),
        "ex_oscillator_nominal" => Ok(oscillator_nominal()),
        "ex_oscillator_disturbed" => Ok(oscillator_disturbed()),
        "ex_gamma_corner" => Ok(gamma_corner()),
        "ex_marchaud_1d" => Ok(marchaud_1d()),
        "ex_ly_failure" => Ok(ly_failure()),
        "ex_inverter" => Ok(inverter(InverterParams::default())),
        other => Err(CatalogError::UnknownId(other.to_string())),
    }
}

// ---- shared set builders -----------------------------------------------------------

fn sq_norm2() -> Expr {
    pow(var(0), 2) + pow(var(1), 2)
}

/// Closed quadrant of the plane intersected with the unit disk.
/// `sx`/`sy` are +1 for the nonnegative side, -1 for the nonpositive one.
fn quadrant_disk(sx: f64, sy: f64) -> ConstraintSet {
    ConstraintSet::intersection(vec![
        con(-sx) * var(0),
        con(-sy) * var(1),
        sq_norm2() - con(1.0),
    ])
}

fn identity_map2() -> SetValuedMap {
    SetValuedMap::single(vec![var(0), var(1)])
}

// ---- entries -------------------------------------------------------------------------

/// Horizontal flow `(1 + x1^2, 0)` on the right half strip: solutions from
/// the interior blow up in finite time (the tangent solution), and the
/// unrestricted jump map can thrust the state out of the strip.
fn finite_escape() -> CatalogEntry {
    let c = ConstraintSet::boxed(vec![Some(0.0), Some(-1.0)], vec![None, Some(1.0)]);
    let f = SetValuedMap::single(vec![con(1.0) + pow(var(0), 2), con(0.0)]);
    let d = ConstraintSet::boxed(vec![Some(0.0), Some(0.0)], vec![None, Some(0.0)]);
    // x1 + [-1, 1] represented by its extreme and central selections
    let g = SetValuedMap::from_components(vec![
        vec![var(0) - con(1.0), var(1)],
        vec![var(0), var(1)],
        vec![var(0) + con(1.0), var(1)],
    ])
    .unwrap();
    // restricted jump map: the same interval clipped to x1 >= 0
    let g_restricted = SetValuedMap::from_components(vec![
        vec![max2(var(0) - con(1.0), con(0.0)), var(1)],
        vec![var(0), var(1)],
        vec![var(0) + con(1.0), var(1)],
    ])
    .unwrap();
    let sys = HybridSystem::new(2, c.clone(), f.clone(), d.clone(), g).unwrap();
    let restricted = HybridSystem::new(2, c.clone(), f, d, g_restricted).unwrap();

    let mut candidate_sets = BTreeMap::new();
    candidate_sets.insert("K".to_string(), c);

    use CheckKind::*;
    use Verdict::*;
    let expected = vec![
        exp(Weak, "K", None, "wfi.1", SampledPass),
        exp(Weak, "K", None, "wfi.2", CertifiedPass),
        exp(Weak, "K", None, "Nstar.compact", Violated),
        exp(Weak, "K", None, "Nstar.growth", Violated),
        exp(Weak, "K", None, "weakly forward pre-invariant", SampledPass),
        exp(Weak, "K", None, "weakly forward invariant", Violated),
        exp(Forward, "K", Some("restricted_jumps"), "fi.1", SampledPass),
        exp(Forward, "K", Some("restricted_jumps"), "fi.2", CertifiedPass),
        exp(Forward, "K", Some("restricted_jumps"), "forward pre-invariant", SampledPass),
        exp(Forward, "K", Some("restricted_jumps"), "forward invariant", Violated),
        exp(Forward, "K", None, "fi.1", Violated),
    ];

    let mut variants = BTreeMap::new();
    variants.insert("restricted_jumps".to_string(), restricted);

    CatalogEntry {
        id: "ex_finite_escape",
        provenance: "strip with horizontal quadratic flow: finite escape time during flow; \
                     unrestricted jumps can exit, the restricted variant cannot",
        nominal: Some(sys),
        disturbed: None,
        candidate_sets,
        lyapunov: None,
        ambient: vec![(-1.0, 10.0), (-2.0, 2.0)],
        variants,
        expected,
        notes: vec![],
    }
}

/// Clockwise rotation on the upper half disk with a contracting jump on
/// the horizontal diameter: the topological boundary of the flow set is
/// weakly forward invariant, the half disk itself is forward invariant.
fn wfi_circle() -> CatalogEntry {
    let c = ConstraintSet::intersection(vec![sq_norm2() - con(1.0), -var(1)]);
    let f = SetValuedMap::single(vec![var(1), -var(0)]);
    let d = ConstraintSet::boxed(vec![Some(-1.0), Some(0.0)], vec![None, Some(0.0)]);
    let g = SetValuedMap::single(vec![con(-0.9) * var(0), var(1)]);
    let sys = HybridSystem::new(2, c.clone(), f, d, g).unwrap();

    // the boundary: unit half circle united with the diameter
    let ring = ConstraintSet::intersection(vec![
        sq_norm2() - con(1.0),
        con(1.0) - sq_norm2(),
        -var(1),
    ]);
    let diameter = ConstraintSet::bounded_box(&[(-1.0, 1.0), (0.0, 0.0)]);
    let k1 = ConstraintSet::union(vec![ring, diameter]);

    let mut candidate_sets = BTreeMap::new();
    candidate_sets.insert("K1".to_string(), k1);
    candidate_sets.insert("K2".to_string(), c);

    use CheckKind::*;
    use Verdict::*;
    let expected = vec![
        exp(Weak, "K1", None, "wfi.1", SampledPass),
        exp(Weak, "K1", None, "wfi.2", CertifiedPass),
        exp(Weak, "K1", None, "KL", SampledPass),
        exp(Weak, "K1", None, "Nstar.compact", CertifiedPass),
        exp(Weak, "K1", None, "weakly forward invariant", SampledPass),
        exp(Forward, "K2", None, "fi.1", SampledPass),
        exp(Forward, "K2", None, "fi.2", CertifiedPass),
        exp(Forward, "K2", None, "KL", SampledPass),
        exp(Forward, "K2", None, "Nstar.compact", CertifiedPass),
        exp(Forward, "K2", None, "forward invariant", SampledPass),
    ];

    CatalogEntry {
        id: "ex_wfi_circle",
        provenance: "upper half disk with clockwise rotation and contracting diameter jumps: \
                     the boundary ring-plus-diameter is weakly forward invariant, the half \
                     disk is forward invariant",
        nominal: Some(sys),
        disturbed: None,
        candidate_sets,
        lyapunov: None,
        ambient: vec![(-2.0, 2.0), (-2.0, 2.0)],
        variants: BTreeMap::new(),
        expected,
        notes: vec![],
    }
}

/// Quadrant oscillator `(-|x1| x2, 0)` with identity jumps: the union of
/// the first flow quadrant and the adjacent jump quadrant is forward
/// invariant for the nominal system.
fn oscillator_nominal() -> CatalogEntry {
    let c = ConstraintSet::union(vec![quadrant_disk(1.0, 1.0), quadrant_disk(-1.0, -1.0)]);
    let d = ConstraintSet::union(vec![quadrant_disk(-1.0, 1.0), quadrant_disk(1.0, -1.0)]);
    let f = SetValuedMap::single(vec![-abs(var(0)) * var(1), con(0.0)]);
    let sys = HybridSystem::new(2, c, f, d, identity_map2()).unwrap();

    let k1 = ConstraintSet::union(vec![quadrant_disk(1.0, 1.0), quadrant_disk(-1.0, 1.0)]);
    let mut candidate_sets = BTreeMap::new();
    candidate_sets.insert("K1".to_string(), k1);

    use CheckKind::*;
    use Verdict::*;
    let expected = vec![
        exp(Forward, "K1", None, "fi.1", SampledPass),
        exp(Forward, "K1", None, "fi.2", CertifiedPass),
        exp(Forward, "K1", None, "Nstar.compact", CertifiedPass),
        exp(Forward, "K1", None, "forward invariant", SampledPass),
    ];

    CatalogEntry {
        id: "ex_oscillator_nominal",
        provenance: "quadrant oscillator with identity jumps: upper half-disk union of flow \
                     and jump quadrants is forward invariant; boundary margins are the signed \
                     inner products -2|x1| x1 x2",
        nominal: Some(sys),
        disturbed: None,
        candidate_sets,
        lyapunov: None,
        ambient: vec![(-2.0, 2.0), (-2.0, 2.0)],
        variants: BTreeMap::new(),
        expected,
        notes: vec![],
    }
}

/// Disturbed quadrant oscillator: flow tilt `w_c x1 |x1|` and rotation
/// jumps by any angle in `[w_d, -w_d]`. The upper half union is only
/// robustly *weakly* forward invariant (a rotation can exit it); the full
/// disk is robustly forward invariant.
fn oscillator_disturbed() -> CatalogEntry {
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    // joint flow constraint over (x1, x2, w_c): quadrant disks and
    // 0 <= w_c <= |x|
    let flow_branch = |sx: f64, sy: f64| {
        ConstraintSet::intersection(vec![
            con(-sx) * var(0),
            con(-sy) * var(1),
            sq_norm2() - con(1.0),
            -var(2),
            pow(var(2), 2) - sq_norm2(),
        ])
    };
    let c_w = ConstraintSet::union(vec![flow_branch(1.0, 1.0), flow_branch(-1.0, -1.0)]);
    let f_w = SetValuedMap::single(vec![
        -abs(var(0)) * var(1),
        var(2) * var(0) * abs(var(0)),
    ]);
    // joint jump constraint over (x1, x2, w_d): opposite quadrant disks
    // and -pi/4 <= w_d <= 0
    let jump_branch = |sx: f64, sy: f64| {
        ConstraintSet::intersection(vec![
            con(-sx) * var(0),
            con(-sy) * var(1),
            sq_norm2() - con(1.0),
            var(2),
            -var(2) - con(quarter_pi),
        ])
    };
    let d_w = ConstraintSet::union(vec![jump_branch(-1.0, 1.0), jump_branch(1.0, -1.0)]);
    // rotations by theta = 0, theta = w_d and theta = -w_d
    let rot_pos = vec![
        var(0) * cos(var(2)) + var(1) * sin(var(2)),
        -(var(0) * sin(var(2))) + var(1) * cos(var(2)),
    ];
    let rot_neg = vec![
        var(0) * cos(var(2)) - var(1) * sin(var(2)),
        var(0) * sin(var(2)) + var(1) * cos(var(2)),
    ];
    let g_w = SetValuedMap::new(vec![
        Selection::new(vec![var(0), var(1)]),
        Selection::new(rot_pos),
        Selection::new(rot_neg),
    ])
    .unwrap();
    let sys = DisturbedHybridSystem {
        dim: 2,
        dc: 1,
        dd: 1,
        flow_set_w: c_w,
        flow_map_w: f_w,
        jump_set_w: d_w,
        jump_map_w: g_w,
        w_box_c: vec![(0.0, 1.0)],
        w_box_d: vec![(-quarter_pi, 0.0)],
    };

    let k1 = ConstraintSet::union(vec![quadrant_disk(1.0, 1.0), quadrant_disk(-1.0, 1.0)]);
    let k2 = ConstraintSet::ball(vec![0.0, 0.0], 1.0);
    let mut candidate_sets = BTreeMap::new();
    candidate_sets.insert("K1".to_string(), k1);
    candidate_sets.insert("K2".to_string(), k2);

    use CheckKind::*;
    use Verdict::*;
    let expected = vec![
        exp(RobustWeak, "K1", None, "rwFI.1", SampledPass),
        exp(RobustWeak, "K1", None, "rwFI.2", CertifiedPass),
        exp(RobustWeak, "K1", None, "robustly weakly forward invariant", SampledPass),
        exp(RobustForward, "K1", None, "rFI.1", Violated),
        exp(RobustForward, "K2", None, "rFI.1", SampledPass),
        exp(RobustForward, "K2", None, "rFI.2", CertifiedPass),
        exp(RobustForward, "K2", None, "robustly forward invariant", SampledPass),
    ];

    CatalogEntry {
        id: "ex_oscillator_disturbed",
        provenance: "disturbed quadrant oscillator with rotation jumps: the upper half union \
                     is robustly weakly forward invariant (the identity rotation stays), but a \
                     nonzero rotation can leave it; the whole unit disk is robustly forward \
                     invariant with margins 2 x1 x2 (w_c - 1) |x1|",
        nominal: None,
        disturbed: Some(sys),
        candidate_sets,
        lyapunov: None,
        ambient: vec![(-2.0, 2.0), (-2.0, 2.0)],
        variants: BTreeMap::new(),
        expected,
        notes: vec![],
    }
}

/// Corner counterexample: flow `(x2, -1)` on `{x1 x2 >= 0}` with identity
/// jumps on the nonnegative x1 axis. The closed first quadrant satisfies
/// the plain boundary inclusion away from `∂C ∩ D` but fails the corner
/// exclusion at the origin, where the flow points into the third quadrant.
fn gamma_corner() -> CatalogEntry {
    let q1 = ConstraintSet::boxed(vec![Some(0.0), Some(0.0)], vec![None, None]);
    let q3 = ConstraintSet::boxed(vec![None, None], vec![Some(0.0), Some(0.0)]);
    let c = ConstraintSet::union(vec![q1.clone(), q3]);
    let f = SetValuedMap::single(vec![var(1), con(-1.0)]);
    let d = ConstraintSet::boxed(vec![Some(0.0), Some(0.0)], vec![None, Some(0.0)]);
    let sys = HybridSystem::new(2, c, f, d, identity_map2()).unwrap();

    let mut candidate_sets = BTreeMap::new();
    candidate_sets.insert("K".to_string(), q1);

    use CheckKind::*;
    use Verdict::*;
    let expected = vec![
        exp(ForwardAlt, "K", None, "fi.2''", SampledPass),
        exp(ForwardAlt, "K", None, "fi.2''s", Violated),
        exp(Forward, "K", None, "fi.2", Violated),
        exp(Weak, "K", None, "weakly forward invariant", SampledPass),
    ];

    CatalogEntry {
        id: "ex_gamma_corner",
        provenance: "corner counterexample (unit downward drift): the split boundary condition \
                     is violated exactly at the origin, where the flow direction lies in the \
                     cone of the flow set but not in the cone of the candidate set",
        nominal: Some(sys),
        disturbed: None,
        candidate_sets,
        lyapunov: None,
        ambient: vec![(-3.0, 3.0), (-3.0, 3.0)],
        variants: BTreeMap::new(),
        expected,
        notes: vec![],
    }
}

/// One-dimensional interval with a set-valued endpoint: forward invariant
/// by inspection although the universal flow-cone condition fails at the
/// left endpoint — the sufficient conditions are not necessary.
fn marchaud_1d() -> CatalogEntry {
    let c = ConstraintSet::bounded_box(&[(-1.0, 1.0)]);
    // F(x) = 1 for x > -1 and [-1, 1] at x = -1: the second selection
    // ramps from -1 at the endpoint with a steep slope, so the hull is
    // [-1, 1] exactly at x = -1 and contains 1 everywhere
    let steep = min2(con(1.0), con(2000.0) * (var(0) + con(1.0)) - con(1.0));
    let f = SetValuedMap::from_components(vec![vec![con(1.0)], vec![steep]]).unwrap();
    let d = ConstraintSet::bounded_box(&[(1.0, 1.0)]);
    let g = SetValuedMap::from_components(vec![vec![con(-1.0)], vec![con(0.0)]]).unwrap();
    let sys = HybridSystem::new(1, c.clone(), f, d, g).unwrap();

    let mut candidate_sets = BTreeMap::new();
    candidate_sets.insert("K".to_string(), c);

    use CheckKind::*;
    use Verdict::*;
    let expected = vec![
        exp(Weak, "K", None, "wfi.1", SampledPass),
        exp(Weak, "K", None, "wfi.2", SampledPass),
        exp(Weak, "K", None, "weakly forward invariant", SampledPass),
        exp(Forward, "K", None, "fi.1", SampledPass),
        exp(Forward, "K", None, "fi.2", Violated),
    ];

    CatalogEntry {
        id: "ex_marchaud_1d",
        provenance: "interval with a set-valued left endpoint: forward invariant by \
                     inspection, yet the universal flow-cone condition fails at the endpoint \
                     (sufficiency, not necessity)",
        nominal: Some(sys),
        disturbed: None,
        candidate_sets,
        lyapunov: None,
        ambient: vec![(-2.0, 2.0)],
        variants: BTreeMap::new(),
        expected,
        notes: vec![],
    }
}

/// Rotation restricted to a left half plane: the strict-decrease condition
/// of the sublevel suite fails at the single contact point of the level
/// circle with the boundary of the flow set.
fn ly_failure() -> CatalogEntry {
    let c = ConstraintSet::halfspace(vec![1.0, 0.0], -1.0);
    let f = SetValuedMap::single(vec![var(1), -var(0)]);
    let sys = HybridSystem::new(2, c.clone(), f, ConstraintSet::empty(), identity_map2()).unwrap();

    let v = sq_norm2();
    let m_r = ConstraintSet::sublevel(v.clone(), 1.0).intersect(&c);
    let mut candidate_sets = BTreeMap::new();
    candidate_sets.insert("Mr".to_string(), m_r);

    use CheckKind::*;
    use Verdict::*;
    let expected = vec![
        exp(Lyapunov, "Mr", None, "lya.1", CertifiedPass),
        exp(Lyapunov, "Mr", None, "Ly.2", SampledPass),
        exp(Lyapunov, "Mr", None, "Ly.3", Violated),
        exp(Lyapunov, "Mr", None, "M_r weakly forward invariant", Violated),
    ];

    CatalogEntry {
        id: "ex_ly_failure",
        provenance: "rotation on a left half plane with squared-norm candidate function: the \
                     strict decrease needed at the level-set contact point fails (zero inner \
                     product), so sublevel invariance cannot be concluded",
        nominal: Some(sys),
        disturbed: None,
        candidate_sets,
        lyapunov: Some(LyapunovSpec { v, r: 1.0, r_star: 2.0 }),
        ambient: vec![(-4.0, 4.0), (-4.0, 4.0)],
        variants: BTreeMap::new(),
        expected,
        notes: vec![],
    }
}

// ---- inverter --------------------------------------------------------------------------

/// Circuit and controller parameters of the switched DC/AC inverter.
#[derive(Debug, Clone)]
pub struct InverterParams {
    pub r: f64,
    pub l: f64,
    pub c_a: f64,
    pub v_dc: f64,
    pub b: f64,
    pub omega: f64,
    pub c_i: f64,
    pub c_o: f64,
    /// Switching hysteresis half-width for the zero-state corners.
    pub eps: f64,
}

impl Default for InverterParams {
    fn default() -> Self {
        InverterParams {
            r: 1.0,
            l: 0.1,
            c_a: 66.6e-6,
            v_dc: 220.0,
            b: 120.0,
            omega: 120.0 * std::f64::consts::PI,
            c_i: 0.9,
            c_o: 1.1,
            eps: 0.3,
        }
    }
}

impl InverterParams {
    /// Variant with the larger filter capacitance that satisfies the
    /// `L C_a w^2 > 1` hypothesis.
    pub fn compliant() -> Self {
        InverterParams { c_a: 80.0e-6, ..Default::default() }
    }

    /// Current scale of the normalized ellipse: `a = C_a w b`.
    pub fn a(&self) -> f64 {
        self.c_a * self.omega * self.b
    }

    pub fn lcw2(&self) -> f64 {
        self.l * self.c_a * self.omega * self.omega
    }

    /// `V(z) = (i_L / a)^2 + (v_C / b)^2` over the state `(q, i_L, v_C)`.
    pub fn v_expr(&self) -> Expr {
        pow(var(1) * con(1.0 / self.a()), 2) + pow(var(2) * con(1.0 / self.b), 2)
    }

    /// The admissible-slope band `Γ` as a constraint set over the state.
    pub fn gamma_set(&self) -> ConstraintSet {
        let a = self.a();
        let alpha = 2.0 / (a * a * self.l);
        let beta = 2.0 / (self.b * self.b * self.c_a);
        let lin = con(-alpha * self.r) * var(1) + con(beta - alpha) * var(2);
        ConstraintSet::intersection(vec![
            lin.clone() - con(alpha * self.v_dc),
            con(-alpha * self.v_dc) - lin,
        ])
    }
}

fn pin_q(qv: f64) -> Vec<Expr> {
    vec![var(0) - con(qv), con(qv) - var(0)]
}

fn level_pair(v: &Expr, level: f64) -> Vec<Expr> {
    vec![v.clone() - con(level), con(level) - v.clone()]
}

/// Switched full-bridge inverter with an RLC filter: the logic variable
/// `q ∈ {-1, 0, 1}` is embedded as the first state coordinate (pinned by
/// equality constraints), `z = (i_L, v_C)` are the circuit states. The
/// flow set is the band `c_i <= V(z) <= c_o`; the jump logic switches `q`
/// on the band boundaries so that the band stays forward invariant.
pub fn inverter(p: InverterParams) -> CatalogEntry {
    let v = p.v_expr();
    let band = vec![v.clone() - con(p.c_o), con(p.c_i) - v.clone()];

    // flow set: band x {q pinned to -1, 0, or 1}
    let c = ConstraintSet::union(
        [-1.0, 0.0, 1.0]
            .into_iter()
            .map(|qv| {
                let mut hs = pin_q(qv);
                hs.extend(band.clone());
                ConstraintSet::intersection(hs)
            })
            .collect(),
    );

    // plant: q frozen during flow, z follows the switched RLC dynamics
    let f = SetValuedMap::single(vec![
        con(0.0),
        con(p.v_dc / p.l) * var(0) + con(-p.r / p.l) * var(1) + con(-1.0 / p.l) * var(2),
        con(1.0 / p.c_a) * var(1),
    ]);

    // jump set: inner boundary with i_L q <= 0 (or q = 0), outer boundary
    // with i_L q >= 0
    let mut d_branches = Vec::new();
    for qv in [-1.0, 1.0] {
        let mut inner = pin_q(qv);
        inner.extend(level_pair(&v, p.c_i));
        inner.push(con(qv) * var(1)); // i_L qv <= 0
        d_branches.push(ConstraintSet::intersection(inner));
        let mut outer = pin_q(qv);
        outer.extend(level_pair(&v, p.c_o));
        outer.push(con(-qv) * var(1)); // i_L qv >= 0
        d_branches.push(ConstraintSet::intersection(outer));
    }
    let mut zero = pin_q(0.0);
    zero.extend(level_pair(&v, p.c_i));
    d_branches.push(ConstraintSet::intersection(zero));
    let d = ConstraintSet::union(d_branches);

    // switching logic as guarded selections of the jump map
    let branch = |qv: f64, level: f64, extra: Vec<Expr>| {
        let mut hs = pin_q(qv);
        hs.extend(level_pair(&v, level));
        hs.extend(extra);
        ConstraintSet::intersection(hs)
    };
    // q+ = -1: on the outer boundary with i_L >= 0 away from the corner
    // region, or on the inner boundary with i_L <= 0; never from q = -1
    let guard_minus = ConstraintSet::union(
        [0.0, 1.0]
            .into_iter()
            .flat_map(|qv| {
                [
                    branch(qv, p.c_o, vec![con(p.eps) - var(1)]), // i_L >= eps
                    branch(qv, p.c_o, vec![-var(1), -var(2)]),    // i_L >= 0, v_C >= 0
                    branch(qv, p.c_i, vec![var(1)]),              // i_L <= 0
                ]
            })
            .collect(),
    );
    // q+ = +1: mirror image
    let guard_plus = ConstraintSet::union(
        [0.0, -1.0]
            .into_iter()
            .flat_map(|qv| {
                [
                    branch(qv, p.c_o, vec![var(1) + con(p.eps)]), // i_L <= -eps
                    branch(qv, p.c_o, vec![var(1), var(2)]),      // i_L <= 0, v_C <= 0
                    branch(qv, p.c_i, vec![-var(1)]),             // i_L >= 0
                ]
            })
            .collect(),
    );
    // q+ = 0: the outer-boundary corner regions near i_L = 0
    let guard_zero = ConstraintSet::union(vec![
        branch(1.0, p.c_o, vec![-var(1), var(1) - con(p.eps), var(2)]),
        branch(-1.0, p.c_o, vec![var(1), -var(1) - con(p.eps), -var(2)]),
    ]);
    let g = SetValuedMap::new(vec![
        Selection::guarded(vec![con(-1.0), var(1), var(2)], guard_minus),
        Selection::guarded(vec![con(0.0), var(1), var(2)], guard_zero),
        Selection::guarded(vec![con(1.0), var(1), var(2)], guard_plus),
    ])
    .unwrap();

    let sys = HybridSystem::new(3, c.clone(), f, d, g).unwrap();

    let mut candidate_sets = BTreeMap::new();
    candidate_sets.insert("T".to_string(), c);

    let compliant = {
        let cp = InverterParams::compliant();
        if (p.c_a - cp.c_a).abs() < 1e-12 {
            None
        } else {
            Some(inverter_system(&cp))
        }
    };
    let mut variants = BTreeMap::new();
    if let Some(sysc) = compliant {
        variants.insert("compliant".to_string(), sysc);
    }

    use CheckKind::*;
    use Verdict::*;
    let expected = vec![
        exp(Forward, "T", None, "fi.1", SampledPass),
        exp(Forward, "T", None, "fi.2", CertifiedPass),
        exp(Forward, "T", None, "forward invariant", SampledPass),
    ];

    let lcw2 = p.lcw2();
    let notes = vec![
        format!(
            "published parameters give L*C_a*w^2 = {lcw2:.4}, below the > 1 hypothesis of the \
             band-invariance proposition; the `compliant` variant (C_a = 80 uF, \
             L*C_a*w^2 = {:.4}) satisfies it. Flagged, not silently fixed.",
            InverterParams::compliant().lcw2()
        ),
        format!("hysteresis width eps = {} A (configurable)", p.eps),
    ];

    CatalogEntry {
        id: "ex_inverter",
        provenance: "switched full-bridge DC/AC inverter with series RLC filter: hysteretic \
                     switching keeps the normalized energy band forward invariant and the \
                     output voltage tracks the reference frequency",
        nominal: Some(sys),
        disturbed: None,
        candidate_sets,
        lyapunov: Some(LyapunovSpec { v: p.v_expr(), r: p.c_o, r_star: p.c_o * 2.0 }),
        ambient: vec![(-1.5, 1.5), (-6.0, 6.0), (-160.0, 160.0)],
        variants,
        expected,
        notes,
    }
}

fn inverter_system(p: &InverterParams) -> HybridSystem {
    inverter(p.clone()).nominal.unwrap()
}

fn exp(
    kind: CheckKind,
    set: &'static str,
    variant: Option<&'static str>,
    condition: &'static str,
    verdict: Verdict,
) -> Expectation {
    Expectation { kind, set, variant, condition, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ids_load() {
        for id in IDS {
            let entry = load_example(id).unwrap();
            assert_eq!(entry.id, id);
            assert!(!entry.candidate_sets.is_empty() || entry.lyapunov.is_some());
        }
    }

    #[test]
    fn unknown_id_lists_available() {
        let err = load_example("nope").unwrap_err();
        let msg = err.to_string();
        for id in IDS {
            assert!(msg.contains(id), "{msg}");
        }
    }

    #[test]
    fn inverter_initial_energy_is_unitary() {
        let p = InverterParams::default();
        let v = p.v_expr();
        // z0 = (a, 0) normalizes to V = 1
        let val = v.eval(&[0.0, p.a(), 0.0]).unwrap();
        assert!((val - 1.0).abs() < 1e-12);
        // the quoted current scale
        assert!((p.a() - 3.013).abs() < 1e-3, "a = {}", p.a());
        // parameter discrepancy is real and flagged
        assert!(p.lcw2() < 1.0);
        assert!(InverterParams::compliant().lcw2() > 1.0);
        let entry = load_example("ex_inverter").unwrap();
        assert!(entry.notes.iter().any(|n| n.contains("below the > 1 hypothesis")));
        assert!(entry.variants.contains_key("compliant"));
    }

    #[test]
    fn inverter_jump_logic_total_on_jump_set() {
        // enumerate a 10^4-point grid of the jump set by parameterizing
        // each branch ellipse V(z) = level by angle; every grid point must
        // admit at least one successor that only moves q
        let p = InverterParams::default();
        let entry = load_example("ex_inverter").unwrap();
        let sys = entry.nominal.as_ref().unwrap();
        let (a, b) = (p.a(), p.b);
        let mut total = 0usize;
        for (qv, level) in [
            (-1.0, p.c_i),
            (-1.0, p.c_o),
            (1.0, p.c_i),
            (1.0, p.c_o),
            (0.0, p.c_i),
        ] {
            let s = level.sqrt();
            for k in 0..2000 {
                let phi = 2.0 * std::f64::consts::PI * (k as f64) / 2000.0;
                let x = vec![qv, a * s * phi.cos(), b * s * phi.sin()];
                if !sys.jump_set.contains(&x) {
                    continue; // outside the sign-condition arc of this branch
                }
                total += 1;
                let values = sys.jump_map.values_at(&x);
                assert!(values.is_ok(), "no successor at {x:?}");
                for (_, v) in values.unwrap() {
                    assert_eq!(v[1], x[1]);
                    assert_eq!(v[2], x[2]);
                    assert!(v[0] == -1.0 || v[0] == 0.0 || v[0] == 1.0);
                    assert!(v[0] != x[0], "switch must change q at {x:?}");
                }
            }
        }
        assert!(total >= 5000, "grid degenerate: only {total} points in D");
    }

    #[test]
    fn band_is_inside_gamma() {
        let p = InverterParams::default();
        let entry = load_example("ex_inverter").unwrap();
        let sys = entry.nominal.as_ref().unwrap();
        let gamma = p.gamma_set();
        let mut sampler =
            crate::checker::sample::Sampler::new(0xD1, &entry.ambient);
        for x in sampler.region(&sys.flow_set, 2000) {
            assert!(gamma.contains(&x), "band point outside the slope band: {x:?}");
        }
    }

    #[test]
    fn disturbed_oscillator_projections() {
        let entry = load_example("ex_oscillator_disturbed").unwrap();
        let sys = entry.disturbed.as_ref().unwrap();
        let proj_c = sys.flow_projection();
        assert!(proj_c.contains(&[0.5, 0.5]));
        assert!(proj_c.contains(&[-0.5, -0.5]));
        assert!(!proj_c.contains(&[-0.5, 0.5]));
        let proj_d = sys.jump_projection();
        assert!(proj_d.contains(&[-0.5, 0.5]));
        assert!(proj_d.contains(&[0.5, -0.5]));
        assert!(!proj_d.contains(&[0.5, 0.5]) || proj_d.contains(&[0.0, 0.0]));
        // admissible disturbances: 0 <= w_c <= |x|
        assert!(sys.wc_admissible(&[0.6, 0.8], &[0.9]));
        assert!(!sys.wc_admissible(&[0.3, 0.0], &[0.5]));
        assert!(sys.wd_admissible(&[-0.5, 0.5], &[-0.7]));
        assert!(!sys.wd_admissible(&[-0.5, 0.5], &[0.2]));
    }

    #[test]
    fn marchaud_hull_at_endpoint() {
        let entry = load_example("ex_marchaud_1d").unwrap();
        let sys = entry.nominal.as_ref().unwrap();
        let values = sys.flow_map.values_at(&[-1.0]).unwrap();
        let mut vals: Vec<f64> = values.into_iter().map(|(_, v)| v[0]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vals, vec![-1.0, 1.0]);
    }
}
