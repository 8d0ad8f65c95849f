//! Nominal suite: data assumptions, weak and strong forward invariance,
//! completeness clauses and Lipschitz estimation.
//!
//! Condition naming: `wfi.1`/`wfi.2` are the weak jump/flow conditions,
//! `fi.1`/`fi.2` the strong ones (`fi.2''` / `fi.2''s` in the alternate
//! boundary-split mode), `KL` is the requirement that flow-blocked points
//! of the candidate set lie in the jump set, and `Nstar.compact` /
//! `Nstar.growth` are the two completeness clauses (either suffices).

use super::sample::Sampler;
use super::{
    combine, combine_any, CheckConfig, CheckError, CheckReport, ConditionReport, Verdict, Witness,
};
use crate::geometry::{norm, tangent_cone_contains, ConeStatus, ConeVerdict};
use crate::model::maps::{MapError, SetValuedMap};
use crate::model::sets::ConstraintSet;
use crate::model::system::HybridSystem;

/// Completeness domain selector: the weak theorem argues on `K \ D`, the
/// strong one on `K ∩ C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KStar {
    WeakTheorem,
    StrongTheorem,
}

impl KStar {
    pub fn label(self) -> &'static str {
        match self {
            KStar::WeakTheorem => "K \\ D (weak theorem)",
            KStar::StrongTheorem => "K ∩ C (strong theorem)",
        }
    }
}

/// Boundary condition family for the strong flow condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiMode {
    Standard,
    /// Replacement pair: the plain inclusion away from `∂C ∩ D`, and the
    /// exclusion `F(x) ∩ (T_C(x) \ T_{K∩C}(x)) = ∅` on `∂C ∩ D`.
    AltCondition2Prime,
}

#[derive(Debug, Clone)]
pub struct LipschitzEstimate {
    pub lambda_hat: f64,
    pub pairs: usize,
    /// Set when the estimate exceeds 1e6 (effectively unbounded slope).
    pub flagged: bool,
}

// ---- shared helpers -------------------------------------------------------------

/// Per-selection classification of a flow candidate at one point.
pub(crate) struct FlowPointClass {
    /// Cone verdicts on the target set (e.g. `K ∩ C`), per selection.
    pub target: Vec<(usize, ConeVerdict, Vec<f64>)>,
    /// True when every selection is numerically out of the cone of the
    /// flow set itself, i.e. the point is flow-blocked (in `L`).
    pub blocked: bool,
    /// True when blockedness could not be decided.
    pub blocked_unclear: bool,
}

pub(crate) fn classify_flow_point(
    flow_set: &ConstraintSet,
    target_set: &ConstraintSet,
    x: &[f64],
    selections: &[(usize, Vec<f64>)],
) -> FlowPointClass {
    let mut target = Vec::with_capacity(selections.len());
    let mut all_out = true;
    let mut any_unclear = false;
    for (idx, v) in selections {
        let on_c = tangent_cone_contains(flow_set, x, v);
        match on_c.status {
            ConeStatus::NotInCone => {}
            ConeStatus::Indeterminate => {
                all_out = false;
                any_unclear = true;
            }
            _ => all_out = false,
        }
        let on_target = tangent_cone_contains(target_set, x, v);
        target.push((*idx, on_target, v.clone()));
    }
    FlowPointClass { target, blocked: all_out, blocked_unclear: !all_out && any_unclear }
}

/// Enumerate jump images at `x` (nominal: selections only), capped.
fn jump_images(
    map: &SetValuedMap,
    x: &[f64],
    cap: usize,
) -> Result<(Vec<(usize, Vec<f64>)>, bool), MapError> {
    let values = map.values_at(x)?;
    let saturated = values.len() > cap;
    Ok((values.into_iter().take(cap).collect(), saturated))
}

fn track_worst(report: &mut ConditionReport, margin: f64, witness: impl FnOnce() -> Witness) {
    match report.worst_margin {
        Some(m) if margin <= m => {}
        _ => {
            report.worst_margin = Some(margin);
            if report.verdict != Verdict::Violated {
                report.witnesses = vec![witness()];
            }
        }
    }
}

fn record_violation(report: &mut ConditionReport, witness: Witness) {
    if report.verdict != Verdict::Violated {
        report.verdict = Verdict::Violated;
        report.witnesses.clear();
    }
    if report.witnesses.len() < 8 {
        report.witnesses.push(witness);
    }
}

fn finish_pass(report: &mut ConditionReport, all_certified: bool, unclear: bool) {
    if report.verdict == Verdict::Violated {
        return;
    }
    report.verdict = if report.samples == 0 {
        Verdict::NotApplicable
    } else if unclear {
        Verdict::Indeterminate
    } else if all_certified {
        Verdict::CertifiedPass
    } else {
        Verdict::SampledPass
    };
}

// ---- assumption check -------------------------------------------------------------

/// Sampled check of the standing data assumption: `K ⊂ closure(C) ∪ D`,
/// closedness of `K ∩ C` (structural here), and local boundedness of the
/// flow map on `K ∩ C`.
pub fn check_assumption_data(
    sys: &HybridSystem,
    k: &ConstraintSet,
    cfg: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed, &ambient);
    let mut conditions = Vec::new();

    let k_samples = sampler.region(k, cfg.boundary_samples);
    if k_samples.is_empty() {
        return Err(CheckError::EmptySet("K".into(), 100_000));
    }

    let mut containment = ConditionReport::new("AD.containment");
    containment.samples = k_samples.len();
    for x in &k_samples {
        if !(sys.flow_set.contains(x) || sys.jump_set.contains(x)) {
            record_violation(
                &mut containment,
                Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: sys.flow_set.violation(x).min(sys.jump_set.violation(x)),
                },
            );
        }
    }
    finish_pass(&mut containment, false, false);
    containment.note = "K ⊂ C ∪ D on samples".into();
    conditions.push(containment);

    let mut closed = ConditionReport::new("AD.closed");
    closed.verdict = Verdict::CertifiedPass;
    closed.note = "sets are closed by construction (nonstrict constraints only)".into();
    conditions.push(closed);

    let mut bounded = ConditionReport::new("AD.bounded");
    let kc = k.intersect(&sys.flow_set);
    let kc_samples = sampler.region(&kc, cfg.boundary_samples / 2);
    bounded.samples = kc_samples.len();
    let mut sup = 0.0_f64;
    for x in &kc_samples {
        if let Ok(values) = sys.flow_map.values_at(x) {
            for (_, v) in values {
                let n = norm(&v);
                if !n.is_finite() {
                    record_violation(
                        &mut bounded,
                        Witness {
                            point: x.clone(),
                            direction: Some(v.clone()),
                            disturbance: None,
                            selection: None,
                            margin: f64::INFINITY,
                        },
                    );
                } else {
                    sup = sup.max(n);
                }
            }
        }
    }
    finish_pass(&mut bounded, false, false);
    bounded.worst_margin = Some(sup);
    bounded.note = format!("sup |F| over K ∩ C samples = {sup:.4e}");
    conditions.push(bounded);

    let overall = combine(conditions.iter().map(|c| c.verdict));
    Ok(CheckReport {
        subject: "assumption data (K, C, D, F)".into(),
        conditions,
        conclusions: vec![("assumption data".into(), overall)],
        kstar: None,
    })
}

// ---- completeness ------------------------------------------------------------------

/// The two solution-independent completeness clauses: compactness of the
/// completeness domain, or linear growth of the flow map on it.
pub fn check_completeness(
    sys: &HybridSystem,
    k: &ConstraintSet,
    kstar: KStar,
    cfg: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed ^ 0x57a2, &ambient);

    // base set and per-sample filter describing K*
    let (base, exclude_jump_set): (ConstraintSet, bool) = match kstar {
        KStar::WeakTheorem => (k.clone(), true),
        KStar::StrongTheorem => (k.intersect(&sys.flow_set), false),
    };
    let mut samples = sampler.region(&base, cfg.boundary_samples);
    samples.extend(sampler.boundary(&base, cfg.boundary_samples / 4));
    if exclude_jump_set {
        samples.retain(|x| !sys.jump_set.contains(x));
    }

    // compactness clause
    let mut compact = ConditionReport::new("Nstar.compact");
    compact.samples = samples.len();
    if samples.is_empty() {
        compact.verdict = Verdict::NotApplicable;
        compact.note = "completeness domain empty on samples".into();
    } else if base.structurally_bounded(sys.dim) {
        compact.verdict = Verdict::CertifiedPass;
        let sup = samples.iter().map(|x| norm(x)).fold(0.0_f64, f64::max);
        compact.worst_margin = Some(sup);
        compact.note = format!("bounded by construction; sup |x| over samples = {sup:.4e}");
    } else {
        // probe the ambient box faces: if the domain reaches them, its
        // boundedness cannot be asserted from samples
        let mut reaches = None;
        'faces: for d in 0..sys.dim {
            for side in [0, 1] {
                for p in face_grid(&ambient, d, side, 7) {
                    let in_kstar =
                        base.contains(&p) && !(exclude_jump_set && sys.jump_set.contains(&p));
                    if in_kstar {
                        reaches = Some(p);
                        break 'faces;
                    }
                }
            }
        }
        match reaches {
            Some(p) => {
                compact.verdict = Verdict::Violated;
                compact.note =
                    "completeness domain reaches the ambient box boundary (unbounded?)".into();
                compact.witnesses.push(Witness {
                    point: p,
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: f64::INFINITY,
                });
            }
            None => {
                compact.verdict = Verdict::SampledPass;
                let sup = samples.iter().map(|x| norm(x)).fold(0.0_f64, f64::max);
                compact.worst_margin = Some(sup);
                compact.note = format!("bounded within ambient box; sup |x| = {sup:.4e}");
            }
        }
    }

    // linear growth clause: on a bounded domain any locally bounded map
    // has linear growth trivially; on an unbounded one, fit
    // max |F(x)| <= c (1 + |x|) on an inner shell and insist the fit does
    // not escalate on the outer shell
    let mut growth = ConditionReport::new("Nstar.growth");
    growth.samples = samples.len();
    if samples.is_empty() {
        growth.verdict = Verdict::NotApplicable;
    } else {
        let mut ratios: Vec<(f64, f64, &Vec<f64>)> = Vec::new();
        for x in &samples {
            if let Ok(values) = sys.flow_map.values_at(x) {
                let speed = values.iter().map(|(_, v)| norm(v)).fold(0.0_f64, f64::max);
                ratios.push((norm(x), speed / (1.0 + norm(x)), x));
            }
        }
        let c_hat = ratios.iter().map(|(_, c, _)| *c).fold(0.0_f64, f64::max);
        growth.worst_margin = Some(c_hat);
        if compact.verdict.passed() && compact.verdict != Verdict::NotApplicable {
            growth.verdict = Verdict::SampledPass;
            growth.note =
                format!("domain bounded, so |F(x)| <= c (1+|x|) with c ≈ {c_hat:.4e}");
        } else {
            let r_max = ratios.iter().map(|(r, _, _)| *r).fold(0.0_f64, f64::max);
            let split = 0.5 * r_max;
            let c_inner = ratios
                .iter()
                .filter(|(r, _, _)| *r <= split)
                .map(|(_, c, _)| *c)
                .fold(0.0_f64, f64::max);
            let mut c_outer = 0.0_f64;
            let mut argmax: Option<&Vec<f64>> = None;
            for (_, c, x) in ratios.iter().filter(|(r, _, _)| *r > split) {
                if *c > c_outer {
                    c_outer = *c;
                    argmax = Some(x);
                }
            }
            if c_outer <= 1.25 * c_inner + 1e-9 {
                growth.verdict = Verdict::SampledPass;
                growth.note =
                    format!("|F(x)| <= c (1+|x|) with c ≈ {c_hat:.4e} (stable across shells)");
            } else {
                growth.verdict = Verdict::Violated;
                growth.note = format!(
                    "growth ratio escalates with |x| (inner c ≈ {c_inner:.4e}, outer c ≈ {c_outer:.4e})"
                );
                if let Some(x) = argmax {
                    growth.witnesses.push(Witness {
                        point: x.clone(),
                        direction: None,
                        disturbance: None,
                        selection: None,
                        margin: c_outer,
                    });
                }
            }
        }
    }

    let overall = combine_any([compact.verdict, growth.verdict]);
    let which = if compact.verdict.passed() && compact.verdict != Verdict::NotApplicable {
        "compactness clause"
    } else if growth.verdict.passed() && growth.verdict != Verdict::NotApplicable {
        "linear growth clause"
    } else {
        "no clause established"
    };
    Ok(CheckReport {
        subject: format!("completeness (N*) on {}", kstar.label()),
        conditions: vec![compact, growth],
        conclusions: vec![(format!("N* via {which}"), overall)],
        kstar: Some(kstar.label().to_string()),
    })
}

fn face_grid(ambient: &[(f64, f64)], d: usize, side: usize, res: usize) -> Vec<Vec<f64>> {
    let fixed = if side == 0 { ambient[d].0 } else { ambient[d].1 };
    let mut pts = vec![vec![0.0; ambient.len()]];
    for (i, &(lo, hi)) in ambient.iter().enumerate() {
        let axis: Vec<f64> = if i == d {
            vec![fixed]
        } else {
            (0..res).map(|k| lo + (hi - lo) * (k as f64) / ((res - 1) as f64)).collect()
        };
        let mut next = Vec::with_capacity(pts.len() * axis.len());
        for base in &pts {
            for v in &axis {
                let mut b = base.clone();
                b[i] = *v;
                next.push(b);
            }
        }
        pts = next;
    }
    pts
}

// ---- Lipschitz estimate -------------------------------------------------------------

/// Sampled Lipschitz constant of a set-valued map over a region: the
/// maximum of `|f(x,w) - f(ξ,w)| / |x - ξ|` over close sample pairs,
/// selections and (when given) a disturbance grid.
///
/// Pairs are generated by jittering region samples, half along coordinate
/// axes and half in random directions, which inflates the estimation
/// domain slightly beyond the region.
pub fn lipschitz_estimate(
    map: &SetValuedMap,
    region: &ConstraintSet,
    wbox: Option<&[(f64, f64)]>,
    cfg: &CheckConfig,
    ambient: &[(f64, f64)],
) -> LipschitzEstimate {
    let mut sampler = Sampler::new(cfg.seed ^ 0x11b5, ambient);
    let base = sampler.region(region, cfg.lipschitz_samples);
    let mut jitter_rng = Sampler::new(cfg.seed ^ 0x11b6, ambient);
    let dim = ambient.len();
    let w_grid: Vec<Vec<f64>> = match wbox {
        Some(bx) => crate::model::system::DisturbedHybridSystem::grid(bx, cfg.disturbance_grid),
        None => vec![Vec::new()],
    };
    let mut lambda = 0.0_f64;
    let mut pairs = 0;
    for (i, x) in base.iter().enumerate() {
        let scale = 1e-3 * (1.0 + norm(x));
        let partner: Vec<f64> = if i % 2 == 0 {
            let axis = (i / 2) % dim;
            let mut p = x.clone();
            p[axis] += scale;
            p
        } else {
            let dir = jitter_rng.region(&ConstraintSet::bounded_box(ambient), 1);
            let d = dir.first().cloned().unwrap_or_else(|| vec![1.0; dim]);
            let dn = norm(&d).max(1e-12);
            x.iter().zip(&d).map(|(xi, di)| xi + scale * di / dn).collect()
        };
        let gap = norm(&crate::geometry::sub(&partner, x));
        if gap < 1e-12 {
            continue;
        }
        for w in &w_grid {
            let xa: Vec<f64> = x.iter().chain(w.iter()).copied().collect();
            let xb: Vec<f64> = partner.iter().chain(w.iter()).copied().collect();
            for sel in 0..map.selections.len() {
                let (Ok(fa), Ok(fb)) =
                    (map.selection_value(sel, &xa), map.selection_value(sel, &xb))
                else {
                    continue;
                };
                let diff = norm(&crate::geometry::sub(&fa, &fb));
                lambda = lambda.max(diff / gap);
                pairs += 1;
            }
        }
    }
    LipschitzEstimate { lambda_hat: lambda, pairs, flagged: lambda > 1e6 }
}

// ---- weak forward invariance ---------------------------------------------------------

/// Weak forward (pre-)invariance: existential jump and flow conditions,
/// the `K ∩ L ⊂ D` requirement, and the completeness clauses.
pub fn check_weak_forward_invariance(
    sys: &HybridSystem,
    k: &ConstraintSet,
    cfg: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    let ad = check_assumption_data(sys, k, cfg)?;
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed ^ 0x3f1, &ambient);
    let mut conditions = ad.conditions.clone();
    let ad_verdict = ad.overall();

    // wfi.1: for x in K ∩ D some jump image stays in K
    let mut wfi1 = ConditionReport::new("wfi.1");
    let kd = k.intersect(&sys.jump_set);
    let kd_samples = sampler.region(&kd, cfg.boundary_samples);
    wfi1.samples = kd_samples.len();
    let mut wfi1_unclear = false;
    for x in &kd_samples {
        match jump_images(&sys.jump_map, x, cfg.jump_enumeration_cap) {
            Ok((images, saturated)) => {
                if saturated {
                    wfi1.note = "enumeration cap saturated at some samples".into();
                }
                let mut best: Option<(usize, &Vec<f64>, f64)> = None;
                for (sel, v) in &images {
                    let margin = k.violation(v);
                    if margin <= k.eps_mem {
                        if best.map(|(_, _, m)| margin < m).unwrap_or(true) {
                            best = Some((*sel, v, margin));
                        }
                    }
                }
                match best {
                    Some((sel, v, m)) => track_worst(&mut wfi1, m, || Witness {
                        point: x.clone(),
                        direction: Some(v.clone()),
                        disturbance: None,
                        selection: Some(sel),
                        margin: m,
                    }),
                    None => record_violation(
                        &mut wfi1,
                        Witness {
                            point: x.clone(),
                            direction: images.first().map(|(_, v)| v.clone()),
                            disturbance: None,
                            selection: images.first().map(|(s, _)| *s),
                            margin: images
                                .iter()
                                .map(|(_, v)| k.violation(v))
                                .fold(f64::INFINITY, f64::min),
                        },
                    ),
                }
            }
            Err(MapError::NoActiveSelection) => record_violation(
                &mut wfi1,
                Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: f64::INFINITY,
                },
            ),
            Err(_) => wfi1_unclear = true,
        }
    }
    finish_pass(&mut wfi1, false, wfi1_unclear);
    conditions.push(wfi1);

    // wfi.2 on the boundary of K ∩ C, excluding D and flow-blocked points
    let kc = k.intersect(&sys.flow_set);
    let boundary = sampler.boundary(&kc, cfg.boundary_samples);
    let mut wfi2 = ConditionReport::new("wfi.2");
    let mut kl = ConditionReport::new("KL");
    let mut wfi2_all_certified = true;
    let mut wfi2_unclear = false;
    let mut kl_unclear = false;
    for x in &boundary {
        let Ok(selections) = sys.flow_map.values_at(x) else {
            wfi2_unclear = true;
            continue;
        };
        let class = classify_flow_point(&sys.flow_set, &kc, x, &selections);
        if class.blocked {
            // candidate member of L: it must lie in the jump set
            kl.samples += 1;
            if sys.jump_set.contains(x) {
                track_worst(&mut kl, sys.jump_set.violation(x), || Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: sys.jump_set.violation(x),
                });
            } else {
                record_violation(
                    &mut kl,
                    Witness {
                        point: x.clone(),
                        direction: selections.first().map(|(_, v)| v.clone()),
                        disturbance: None,
                        selection: None,
                        margin: sys.jump_set.violation(x),
                    },
                );
            }
            continue;
        }
        if class.blocked_unclear {
            kl_unclear = true;
        }
        if sys.jump_set.contains(x) {
            continue; // the weak flow condition excludes D
        }
        wfi2.samples += 1;
        let mut best: Option<(usize, &ConeVerdict, &Vec<f64>)> = None;
        let mut any_indeterminate = false;
        for (sel, verdict, v) in &class.target {
            match verdict.status {
                ConeStatus::InConeCertified | ConeStatus::InConeNumerical => {
                    if best
                        .map(|(_, b, _)| verdict.certified() && !b.certified())
                        .unwrap_or(true)
                    {
                        best = Some((*sel, verdict, v));
                    }
                }
                ConeStatus::Indeterminate => any_indeterminate = true,
                ConeStatus::NotInCone => {}
            }
        }
        match best {
            Some((sel, verdict, v)) => {
                if !verdict.certified() {
                    wfi2_all_certified = false;
                }
                track_worst(&mut wfi2, verdict.margin, || Witness {
                    point: x.clone(),
                    direction: Some(v.clone()),
                    disturbance: None,
                    selection: Some(sel),
                    margin: verdict.margin,
                });
            }
            None if any_indeterminate => wfi2_unclear = true,
            None => record_violation(
                &mut wfi2,
                Witness {
                    point: x.clone(),
                    direction: class.target.first().map(|(_, _, v)| v.clone()),
                    disturbance: None,
                    selection: class.target.first().map(|(s, _, _)| *s),
                    margin: class
                        .target
                        .iter()
                        .map(|(_, cv, _)| cv.margin)
                        .fold(f64::INFINITY, f64::min),
                },
            ),
        }
    }
    finish_pass(&mut wfi2, wfi2_all_certified, wfi2_unclear);
    if kl.samples == 0 && kl.verdict != Verdict::Violated {
        kl.verdict = Verdict::NotApplicable;
        kl.note = "no flow-blocked boundary points sampled".into();
    } else {
        finish_pass(&mut kl, false, kl_unclear);
        kl.note = "sampled flow-blocked points lie in the jump set".into();
    }
    conditions.push(wfi2);
    conditions.push(kl.clone());

    let completeness = check_completeness(sys, k, KStar::WeakTheorem, cfg)?;
    conditions.extend(completeness.conditions.clone());
    let nstar = completeness.overall();

    let wfi1_v = conditions.iter().find(|c| c.id == "wfi.1").unwrap().verdict;
    let wfi2_v = conditions.iter().find(|c| c.id == "wfi.2").unwrap().verdict;
    let pre = combine([ad_verdict, wfi1_v, wfi2_v]);
    let full = combine([pre, kl.verdict, nstar]);
    Ok(CheckReport {
        subject: "weak forward invariance".into(),
        conditions,
        conclusions: vec![
            ("weakly forward pre-invariant".into(), pre),
            ("weakly forward invariant".into(), full),
        ],
        kstar: Some(KStar::WeakTheorem.label().into()),
    })
}

// ---- strong forward invariance ---------------------------------------------------------

/// Forward (pre-)invariance: universal jump containment and universal
/// flow-cone inclusion on the boundary of `K ∩ C` (minus flow-blocked
/// points), in either the standard or the split boundary formulation.
pub fn check_forward_invariance(
    sys: &HybridSystem,
    k: &ConstraintSet,
    cfg: &CheckConfig,
    mode: FiMode,
) -> Result<CheckReport, CheckError> {
    let ad = check_assumption_data(sys, k, cfg)?;
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed ^ 0x3f2, &ambient);
    let mut conditions = ad.conditions.clone();
    let ad_verdict = ad.overall();

    // local Lipschitz estimate on K ∩ C (jitter inflates the domain)
    let kc = k.intersect(&sys.flow_set);
    let lip = lipschitz_estimate(&sys.flow_map, &kc, None, cfg, &ambient);
    let mut lip_cond = ConditionReport::new("lipschitz");
    lip_cond.samples = lip.pairs;
    lip_cond.worst_margin = Some(lip.lambda_hat);
    lip_cond.verdict = if lip.flagged { Verdict::Indeterminate } else { Verdict::SampledPass };
    lip_cond.note = format!("estimated λ ≈ {:.4e} on K ∩ C (inflated)", lip.lambda_hat);
    let lip_verdict = lip_cond.verdict;
    conditions.push(lip_cond);

    // fi.1: all jump images from K ∩ D stay in K
    let mut fi1 = ConditionReport::new("fi.1");
    let kd = k.intersect(&sys.jump_set);
    let kd_samples = sampler.region(&kd, cfg.boundary_samples);
    fi1.samples = kd_samples.len();
    let mut fi1_unclear = false;
    for x in &kd_samples {
        match jump_images(&sys.jump_map, x, cfg.jump_enumeration_cap) {
            Ok((images, saturated)) => {
                if saturated {
                    fi1.note = "enumeration cap saturated at some samples".into();
                }
                for (sel, v) in &images {
                    let margin = k.violation(v);
                    if margin > k.eps_mem {
                        record_violation(
                            &mut fi1,
                            Witness {
                                point: x.clone(),
                                direction: Some(v.clone()),
                                disturbance: None,
                                selection: Some(*sel),
                                margin,
                            },
                        );
                    } else {
                        track_worst(&mut fi1, margin, || Witness {
                            point: x.clone(),
                            direction: Some(v.clone()),
                            disturbance: None,
                            selection: Some(*sel),
                            margin,
                        });
                    }
                }
            }
            Err(MapError::NoActiveSelection) => record_violation(
                &mut fi1,
                Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: f64::INFINITY,
                },
            ),
            Err(_) => fi1_unclear = true,
        }
    }
    finish_pass(&mut fi1, false, fi1_unclear);
    conditions.push(fi1);

    // strong flow condition on ∂(K ∩ C) \ L
    let boundary = sampler.boundary(&kc, cfg.boundary_samples);
    let mut main = ConditionReport::new(match mode {
        FiMode::Standard => "fi.2",
        FiMode::AltCondition2Prime => "fi.2''",
    });
    let mut corner = ConditionReport::new("fi.2''s");
    let mut kl = ConditionReport::new("KL");
    let mut main_certified = true;
    let mut main_unclear = false;
    let mut corner_unclear = false;
    let mut kl_unclear = false;
    for x in &boundary {
        let Ok(selections) = sys.flow_map.values_at(x) else {
            main_unclear = true;
            continue;
        };
        let class = classify_flow_point(&sys.flow_set, &kc, x, &selections);
        if class.blocked {
            kl.samples += 1;
            if sys.jump_set.contains(x) {
                track_worst(&mut kl, sys.jump_set.violation(x), || Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: sys.jump_set.violation(x),
                });
            } else {
                record_violation(
                    &mut kl,
                    Witness {
                        point: x.clone(),
                        direction: selections.first().map(|(_, v)| v.clone()),
                        disturbance: None,
                        selection: None,
                        margin: sys.jump_set.violation(x),
                    },
                );
            }
            continue;
        }
        if class.blocked_unclear {
            kl_unclear = true;
        }

        let corner_case = mode == FiMode::AltCondition2Prime
            && sys.flow_set.is_boundary(x)
            && sys.jump_set.contains(x);
        if corner_case {
            // exclusion form: no selection may lie in T_C(x) \ T_{K∩C}(x)
            corner.samples += 1;
            for (sel, kc_verdict, v) in &class.target {
                let on_c = tangent_cone_contains(&sys.flow_set, x, v);
                match (on_c.in_cone(), kc_verdict.status) {
                    (true, ConeStatus::NotInCone) => record_violation(
                        &mut corner,
                        Witness {
                            point: x.clone(),
                            direction: Some(v.clone()),
                            disturbance: None,
                            selection: Some(*sel),
                            margin: kc_verdict.margin,
                        },
                    ),
                    (true, ConeStatus::Indeterminate) => corner_unclear = true,
                    _ => {
                        if on_c.status == ConeStatus::Indeterminate
                            && kc_verdict.status == ConeStatus::NotInCone
                        {
                            corner_unclear = true;
                        } else {
                            track_worst(&mut corner, kc_verdict.margin, || Witness {
                                point: x.clone(),
                                direction: Some(v.clone()),
                                disturbance: None,
                                selection: Some(*sel),
                                margin: kc_verdict.margin,
                            });
                        }
                    }
                }
            }
            continue;
        }

        main.samples += 1;
        for (sel, verdict, v) in &class.target {
            match verdict.status {
                ConeStatus::NotInCone => record_violation(
                    &mut main,
                    Witness {
                        point: x.clone(),
                        direction: Some(v.clone()),
                        disturbance: None,
                        selection: Some(*sel),
                        margin: verdict.margin,
                    },
                ),
                ConeStatus::Indeterminate => main_unclear = true,
                ConeStatus::InConeNumerical => {
                    main_certified = false;
                    track_worst(&mut main, verdict.margin, || Witness {
                        point: x.clone(),
                        direction: Some(v.clone()),
                        disturbance: None,
                        selection: Some(*sel),
                        margin: verdict.margin,
                    });
                }
                ConeStatus::InConeCertified => track_worst(&mut main, verdict.margin, || Witness {
                    point: x.clone(),
                    direction: Some(v.clone()),
                    disturbance: None,
                    selection: Some(*sel),
                    margin: verdict.margin,
                }),
            }
        }
    }
    finish_pass(&mut main, main_certified, main_unclear);
    let main_v = main.verdict;
    conditions.push(main);
    let mut corner_v = None;
    if mode == FiMode::AltCondition2Prime {
        finish_pass(&mut corner, false, corner_unclear);
        if corner.samples == 0 && corner.verdict != Verdict::Violated {
            corner.verdict = Verdict::NotApplicable;
            corner.note = "no boundary-of-C jump-set points sampled".into();
        }
        corner_v = Some(corner.verdict);
        conditions.push(corner);
    }
    if kl.samples == 0 && kl.verdict != Verdict::Violated {
        kl.verdict = Verdict::NotApplicable;
        kl.note = "no flow-blocked boundary points sampled".into();
    } else {
        finish_pass(&mut kl, false, kl_unclear);
        kl.note = "sampled flow-blocked points lie in the jump set".into();
    }
    let kl_v = kl.verdict;
    conditions.push(kl);

    let completeness = check_completeness(sys, k, KStar::StrongTheorem, cfg)?;
    conditions.extend(completeness.conditions.clone());
    let nstar = completeness.overall();

    let fi1_v = conditions.iter().find(|c| c.id == "fi.1").unwrap().verdict;
    let mut pre_parts = vec![ad_verdict, lip_verdict, fi1_v, main_v];
    if let Some(cv) = corner_v {
        pre_parts.push(cv);
    }
    let pre = combine(pre_parts);
    let full = combine([pre, kl_v, nstar]);
    Ok(CheckReport {
        subject: match mode {
            FiMode::Standard => "forward invariance (standard boundary condition)".into(),
            FiMode::AltCondition2Prime => "forward invariance (split boundary condition)".into(),
        },
        conditions,
        conclusions: vec![
            ("forward pre-invariant".into(), pre),
            ("forward invariant".into(), full),
        ],
        kstar: Some(KStar::StrongTheorem.label().into()),
    })
}
