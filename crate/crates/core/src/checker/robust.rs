//! Robust suite: disturbance-aware analogues of the nominal conditions.
//!
//! The flow and jump constraints live in joint (state, disturbance)
//! space. State-space projections are computed as the zero-disturbance
//! slice (flows; exact under the standing zero-admissibility assumption)
//! and as a union of slices over a small grid (jumps). Disturbance
//! quantifiers are evaluated on uniform grids of the value boxes filtered
//! through the admissibility maps.

use super::nominal::classify_flow_point;
use super::sample::Sampler;
use super::{
    combine, combine_any, CheckConfig, CheckError, CheckReport, ConditionReport, Verdict, Witness,
};
use crate::geometry::{norm, tangent_cone_contains, ConeStatus};
use crate::model::sets::ConstraintSet;
use crate::model::system::DisturbedHybridSystem;

fn joint(x: &[f64], w: &[f64]) -> Vec<f64> {
    x.iter().chain(w.iter()).copied().collect()
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

/// Grid-union projection of the flow constraint (over the `W_c` grid);
/// used to test zero-admissibility against the zero slice.
fn flow_projection_grid(sys: &DisturbedHybridSystem, res: usize) -> ConstraintSet {
    let slices: Vec<ConstraintSet> = DisturbedHybridSystem::grid(&sys.w_box_c, res)
        .into_iter()
        .map(|w| sys.flow_set_w.substitute_tail(sys.dim, &w))
        .collect();
    if slices.len() == 1 {
        slices.into_iter().next().unwrap()
    } else {
        ConstraintSet::union(slices)
    }
}

/// Standing data assumption with disturbances: containment of `K` in the
/// projections, closedness (structural), regularity of the flow map
/// (structural for the selection representation), and zero-admissibility
/// of the flow disturbance.
pub fn check_assumption_wdata(
    sys: &DisturbedHybridSystem,
    k: &ConstraintSet,
    cfg: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed ^ 0x7da, &ambient);
    let mut conditions = Vec::new();
    let proj_c = sys.flow_projection();
    let proj_d = sys.jump_projection();

    let k_samples = sampler.region(k, cfg.boundary_samples);
    if k_samples.is_empty() {
        return Err(CheckError::EmptySet("K".into(), 100_000));
    }
    let mut containment = ConditionReport::new("wdata.containment");
    containment.samples = k_samples.len();
    for x in &k_samples {
        if !(proj_c.contains(x) || proj_d.contains(x)) {
            record_violation(
                &mut containment,
                Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: proj_c.violation(x).min(proj_d.violation(x)),
                },
            );
        }
    }
    finish_pass(&mut containment, false, false);
    containment.note = "K ⊂ Π_c(C_w) ∪ Π_d(D_w) on samples".into();
    conditions.push(containment);

    let mut closed = ConditionReport::new("wdata.closed");
    closed.verdict = Verdict::CertifiedPass;
    closed.note = "joint constraint sets closed by construction".into();
    conditions.push(closed);

    // zero-admissibility: membership in any grid slice implies membership
    // of the zero slice
    let mut zero = ConditionReport::new("wdata.zero");
    let grid_proj = flow_projection_grid(sys, 3);
    let proj_samples = sampler.region(&grid_proj, cfg.boundary_samples / 2);
    zero.samples = proj_samples.len();
    for x in &proj_samples {
        if !proj_c.contains(x) {
            record_violation(
                &mut zero,
                Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: Some(vec![0.0; sys.dc]),
                    selection: None,
                    margin: proj_c.violation(x),
                },
            );
        }
    }
    finish_pass(&mut zero, false, false);
    zero.note = "0 ∈ Ψ_c(x) on sampled projection points".into();
    conditions.push(zero);

    let overall = combine(conditions.iter().map(|c| c.verdict));
    Ok(CheckReport {
        subject: "assumption data with disturbances".into(),
        conditions,
        conclusions: vec![("assumption data (disturbed)".into(), overall)],
        kstar: None,
    })
}

/// Neighborhood monotonicity of admissible flow disturbances: near a
/// boundary point `ξ` of `K`, `Ψ_c(x) ⊂ Ψ_c(ξ)` must hold.
fn check_wbound(
    sys: &DisturbedHybridSystem,
    k: &ConstraintSet,
    cfg: &CheckConfig,
    sampler: &mut Sampler,
) -> ConditionReport {
    let mut cond = ConditionReport::new("wbound");
    let proj_c = sys.flow_projection();
    let boundary = sampler.boundary(k, cfg.boundary_samples / 2);
    let dim = sys.dim;
    for xi in &boundary {
        if !proj_c.contains(xi) {
            continue;
        }
        cond.samples += 1;
        let scale = 1e-3 * (1.0 + norm(xi));
        for axis in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut x = xi.clone();
                x[axis] += sign * scale;
                if !proj_c.contains(&x) {
                    continue;
                }
                for w in sys.psi_c_grid(&x, cfg.disturbance_grid) {
                    if !sys.wc_admissible(xi, &w) {
                        record_violation(
                            &mut cond,
                            Witness {
                                point: xi.clone(),
                                direction: Some(x.clone()),
                                disturbance: Some(w.clone()),
                                selection: None,
                                margin: 0.0,
                            },
                        );
                    }
                }
            }
        }
    }
    finish_pass(&mut cond, false, false);
    cond.note = "Ψ_c monotone into boundary points (sampled neighborhoods)".into();
    cond
}

/// Completeness clauses on the joint completeness domain.
fn robust_completeness(
    sys: &DisturbedHybridSystem,
    k: &ConstraintSet,
    exclude_jump_proj: bool,
    cfg: &CheckConfig,
) -> Result<(Vec<ConditionReport>, Verdict), CheckError> {
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed ^ 0x57a3, &ambient);
    let proj_c = sys.flow_projection();
    let proj_d = sys.jump_projection();
    let base = if exclude_jump_proj { k.clone() } else { k.intersect(&proj_c) };
    let mut samples = sampler.region(&base, cfg.boundary_samples);
    samples.extend(sampler.boundary(&base, cfg.boundary_samples / 4));
    if exclude_jump_proj {
        samples.retain(|x| !proj_d.contains(x));
    }
    samples.retain(|x| proj_c.contains(x));

    let w_bounded = sys.w_box_c.iter().all(|(lo, hi)| lo.is_finite() && hi.is_finite());
    let mut compact = ConditionReport::new("rstar.compact");
    compact.samples = samples.len();
    if samples.is_empty() {
        compact.verdict = Verdict::NotApplicable;
        compact.note = "joint completeness domain empty on samples".into();
    } else if base.structurally_bounded(sys.dim) && w_bounded {
        compact.verdict = Verdict::CertifiedPass;
        compact.note = "state part bounded by construction; disturbance box finite".into();
    } else {
        let mut reaches = None;
        'faces: for d in 0..sys.dim {
            for side in [0usize, 1] {
                let fixed = if side == 0 { ambient[d].0 } else { ambient[d].1 };
                let mut probe = samples[0].clone();
                probe[d] = fixed;
                if base.contains(&probe) && !(exclude_jump_proj && proj_d.contains(&probe)) {
                    reaches = Some(probe);
                    break 'faces;
                }
            }
        }
        match reaches {
            Some(p) => {
                compact.verdict = Verdict::Violated;
                compact.note = "domain reaches the ambient box boundary".into();
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
                compact.note = "bounded within ambient box (sampled)".into();
            }
        }
    }

    let mut growth = ConditionReport::new("rstar.growth");
    growth.samples = samples.len();
    if samples.is_empty() {
        growth.verdict = Verdict::NotApplicable;
    } else {
        let mut c_hat = 0.0_f64;
        for x in &samples {
            for w in sys.psi_c_grid(x, cfg.disturbance_grid) {
                if let Ok(values) = sys.flow_map_w.values_at(&joint(x, &w)) {
                    for (_, v) in values {
                        c_hat = c_hat.max(norm(&v) / (1.0 + norm(x)));
                    }
                }
            }
        }
        growth.verdict = Verdict::SampledPass;
        growth.worst_margin = Some(c_hat);
        growth.note = format!("|F_w(x,w)| <= c (1+|x|) with c ≈ {c_hat:.4e} on samples");
    }

    let overall = combine_any([compact.verdict, growth.verdict]);
    Ok((vec![compact, growth], overall))
}

/// Robust weak forward (pre-)invariance: existential jump condition over
/// the admissible disturbance grid, zero-disturbance flow condition, the
/// flow-blocked containment, and completeness.
pub fn check_robust_weak(
    sys: &DisturbedHybridSystem,
    k: &ConstraintSet,
    cfg: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    let wdata = check_assumption_wdata(sys, k, cfg)?;
    let wdata_v = wdata.overall();
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed ^ 0x4f1, &ambient);
    let mut conditions = wdata.conditions.clone();
    let proj_c = sys.flow_projection();
    let proj_d = sys.jump_projection();

    // rwFI.1: some admissible (w_d, selection) jumps back into K
    let mut r1 = ConditionReport::new("rwFI.1");
    let kd = k.intersect(&proj_d);
    let kd_samples = sampler.region(&kd, cfg.boundary_samples);
    r1.samples = kd_samples.len();
    for x in &kd_samples {
        let wds = sys.psi_d_grid(x, cfg.disturbance_grid);
        if wds.is_empty() {
            continue;
        }
        let mut best: Option<(usize, Vec<f64>, Vec<f64>, f64)> = None;
        let mut enumerated = 0usize;
        let mut last: Option<(usize, Vec<f64>, Vec<f64>, f64)> = None;
        'outer: for wd in &wds {
            let Ok(values) = sys.jump_map_w.values_at(&joint(x, wd)) else { continue };
            for (sel, v) in values {
                enumerated += 1;
                let margin = k.violation(&v);
                last = Some((sel, v.clone(), wd.clone(), margin));
                if margin <= k.eps_mem && best.as_ref().map(|b| margin < b.3).unwrap_or(true) {
                    best = Some((sel, v, wd.clone(), margin));
                }
                if enumerated >= cfg.jump_enumeration_cap {
                    r1.note = "enumeration cap saturated at some samples".into();
                    break 'outer;
                }
            }
        }
        match best {
            Some((sel, v, wd, m)) => track_worst(&mut r1, m, || Witness {
                point: x.clone(),
                direction: Some(v),
                disturbance: Some(wd),
                selection: Some(sel),
                margin: m,
            }),
            None => record_violation(
                &mut r1,
                Witness {
                    point: x.clone(),
                    direction: last.as_ref().map(|(_, v, _, _)| v.clone()),
                    disturbance: last.as_ref().map(|(_, _, w, _)| w.clone()),
                    selection: last.as_ref().map(|(s, _, _, _)| *s),
                    margin: last.map(|(_, _, _, m)| m).unwrap_or(f64::INFINITY),
                },
            ),
        }
    }
    finish_pass(&mut r1, false, false);
    conditions.push(r1);

    // rwFI.2: the zero-disturbance flow map intersects the tangent cone of
    // K ∩ Π_c on its boundary (outside Π_d and flow-blocked points)
    let nominal_flow = sys.flow_map_w.substitute_tail(sys.dim, &vec![0.0; sys.dc]);
    let kc = k.intersect(&proj_c);
    let boundary = sampler.boundary(&kc, cfg.boundary_samples);
    let mut r2 = ConditionReport::new("rwFI.2");
    let mut kl = ConditionReport::new("rKL");
    let mut r2_certified = true;
    let mut r2_unclear = false;
    for x in &boundary {
        let Ok(selections) = nominal_flow.values_at(x) else {
            r2_unclear = true;
            continue;
        };
        // flow-blockedness in the joint sense: every admissible disturbance
        // leaves every selection outside the cone of the projection closure
        let mut blocked_joint = true;
        'wloop: for w in sys.psi_c_grid(x, cfg.disturbance_grid) {
            let Ok(values) = sys.flow_map_w.values_at(&joint(x, &w)) else { continue };
            for (_, v) in values {
                if !tangent_cone_contains(&proj_c, x, &v).out_of_cone() {
                    blocked_joint = false;
                    break 'wloop;
                }
            }
        }
        if blocked_joint && proj_c.is_boundary(x) {
            kl.samples += 1;
            if proj_d.contains(x) {
                track_worst(&mut kl, proj_d.violation(x), || Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: proj_d.violation(x),
                });
            } else {
                record_violation(
                    &mut kl,
                    Witness {
                        point: x.clone(),
                        direction: None,
                        disturbance: None,
                        selection: None,
                        margin: proj_d.violation(x),
                    },
                );
            }
            continue;
        }
        if proj_d.contains(x) {
            continue;
        }
        r2.samples += 1;
        let class = classify_flow_point(&proj_c, &kc, x, &selections);
        let mut best: Option<(usize, f64, bool, Vec<f64>)> = None;
        let mut any_indeterminate = false;
        for (sel, verdict, v) in &class.target {
            match verdict.status {
                ConeStatus::InConeCertified | ConeStatus::InConeNumerical => {
                    if best.as_ref().map(|b| verdict.certified() && !b.2).unwrap_or(true) {
                        best = Some((*sel, verdict.margin, verdict.certified(), v.clone()));
                    }
                }
                ConeStatus::Indeterminate => any_indeterminate = true,
                ConeStatus::NotInCone => {}
            }
        }
        match best {
            Some((sel, margin, certified, v)) => {
                if !certified {
                    r2_certified = false;
                }
                track_worst(&mut r2, margin, || Witness {
                    point: x.clone(),
                    direction: Some(v),
                    disturbance: Some(vec![0.0; sys.dc]),
                    selection: Some(sel),
                    margin,
                });
            }
            None if any_indeterminate => r2_unclear = true,
            None => record_violation(
                &mut r2,
                Witness {
                    point: x.clone(),
                    direction: class.target.first().map(|(_, _, v)| v.clone()),
                    disturbance: Some(vec![0.0; sys.dc]),
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
    finish_pass(&mut r2, r2_certified, r2_unclear);
    if kl.samples == 0 && kl.verdict != Verdict::Violated {
        kl.verdict = Verdict::NotApplicable;
        kl.note = "no flow-blocked boundary points sampled".into();
    } else if kl.verdict != Verdict::Violated {
        finish_pass(&mut kl, false, false);
        kl.note = "sampled flow-blocked points lie in Π_d(D_w)".into();
    }
    let r1_v = conditions.iter().find(|c| c.id == "rwFI.1").unwrap().verdict;
    let r2_v = r2.verdict;
    let kl_v = kl.verdict;
    conditions.push(r2);
    conditions.push(kl);

    let (star_conditions, star_v) = robust_completeness(sys, k, true, cfg)?;
    conditions.extend(star_conditions);

    let pre = combine([wdata_v, r1_v, r2_v]);
    let full = combine([pre, kl_v, star_v]);
    Ok(CheckReport {
        subject: "robust weak forward invariance".into(),
        conditions,
        conclusions: vec![
            ("robustly weakly forward pre-invariant".into(), pre),
            ("robustly weakly forward invariant".into(), full),
        ],
        kstar: Some("(K \\ Π_d(D_w)) joint with W_c".into()),
    })
}

/// Robust forward (pre-)invariance: universal jump containment over the
/// admissible disturbance grid and universal flow-cone inclusion over the
/// admissible flow disturbances.
pub fn check_robust_forward(
    sys: &DisturbedHybridSystem,
    k: &ConstraintSet,
    cfg: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    let wdata = check_assumption_wdata(sys, k, cfg)?;
    let wdata_v = wdata.overall();
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed ^ 0x4f2, &ambient);
    let mut conditions = wdata.conditions.clone();
    let proj_c = sys.flow_projection();
    let proj_d = sys.jump_projection();

    let wbound = check_wbound(sys, k, cfg, &mut sampler);
    let wbound_v = wbound.verdict;
    conditions.push(wbound);

    let kc = k.intersect(&proj_c);
    let lip = super::nominal::lipschitz_estimate(
        &sys.flow_map_w,
        &kc,
        Some(&sys.w_box_c),
        cfg,
        &ambient,
    );
    let mut lip_cond = ConditionReport::new("lipschitz");
    lip_cond.samples = lip.pairs;
    lip_cond.worst_margin = Some(lip.lambda_hat);
    lip_cond.verdict = if lip.flagged { Verdict::Indeterminate } else { Verdict::SampledPass };
    lip_cond.note =
        format!("estimated λ ≈ {:.4e} uniformly over the disturbance grid", lip.lambda_hat);
    let lip_v = lip_cond.verdict;
    conditions.push(lip_cond);

    // rFI.1: every admissible jump image stays in K
    let mut r1 = ConditionReport::new("rFI.1");
    let kd = k.intersect(&proj_d);
    let kd_samples = sampler.region(&kd, cfg.boundary_samples);
    r1.samples = kd_samples.len();
    for x in &kd_samples {
        let mut enumerated = 0usize;
        'outer: for wd in sys.psi_d_grid(x, cfg.disturbance_grid) {
            let Ok(values) = sys.jump_map_w.values_at(&joint(x, &wd)) else { continue };
            for (sel, v) in values {
                enumerated += 1;
                let margin = k.violation(&v);
                if margin > k.eps_mem {
                    record_violation(
                        &mut r1,
                        Witness {
                            point: x.clone(),
                            direction: Some(v),
                            disturbance: Some(wd.clone()),
                            selection: Some(sel),
                            margin,
                        },
                    );
                } else {
                    track_worst(&mut r1, margin, || Witness {
                        point: x.clone(),
                        direction: Some(v.clone()),
                        disturbance: Some(wd.clone()),
                        selection: Some(sel),
                        margin,
                    });
                }
                if enumerated >= cfg.jump_enumeration_cap {
                    r1.note = "enumeration cap saturated at some samples".into();
                    break 'outer;
                }
            }
        }
    }
    finish_pass(&mut r1, false, false);
    let r1_v = r1.verdict;
    conditions.push(r1);

    // rFI.2: every selection under every admissible disturbance lies in
    // the tangent cone of K ∩ Π_c on its boundary
    let boundary = sampler.boundary(&kc, cfg.boundary_samples);
    let mut r2 = ConditionReport::new("rFI.2");
    let mut kl = ConditionReport::new("rKL");
    let mut r2_certified = true;
    let mut r2_unclear = false;
    for x in &boundary {
        let wcs = sys.psi_c_grid(x, cfg.disturbance_grid);
        if wcs.is_empty() {
            continue;
        }
        // blocked pairs belong to the rKL condition, not to rFI.2
        let mut fully_blocked = true;
        let mut per_w: Vec<(Vec<f64>, Vec<(usize, Vec<f64>)>)> = Vec::new();
        for w in &wcs {
            let Ok(values) = sys.flow_map_w.values_at(&joint(x, w)) else { continue };
            let blocked = values
                .iter()
                .all(|(_, v)| tangent_cone_contains(&proj_c, x, v).out_of_cone());
            if !blocked {
                fully_blocked = false;
                per_w.push((w.clone(), values));
            }
        }
        if fully_blocked && proj_c.is_boundary(x) {
            kl.samples += 1;
            if proj_d.contains(x) {
                track_worst(&mut kl, proj_d.violation(x), || Witness {
                    point: x.clone(),
                    direction: None,
                    disturbance: None,
                    selection: None,
                    margin: proj_d.violation(x),
                });
            } else {
                record_violation(
                    &mut kl,
                    Witness {
                        point: x.clone(),
                        direction: None,
                        disturbance: None,
                        selection: None,
                        margin: proj_d.violation(x),
                    },
                );
            }
            continue;
        }
        r2.samples += 1;
        for (w, values) in per_w {
            for (sel, v) in values {
                let verdict = tangent_cone_contains(&kc, x, &v);
                match verdict.status {
                    ConeStatus::NotInCone => record_violation(
                        &mut r2,
                        Witness {
                            point: x.clone(),
                            direction: Some(v),
                            disturbance: Some(w.clone()),
                            selection: Some(sel),
                            margin: verdict.margin,
                        },
                    ),
                    ConeStatus::Indeterminate => r2_unclear = true,
                    ConeStatus::InConeNumerical => {
                        r2_certified = false;
                        track_worst(&mut r2, verdict.margin, || Witness {
                            point: x.clone(),
                            direction: Some(v.clone()),
                            disturbance: Some(w.clone()),
                            selection: Some(sel),
                            margin: verdict.margin,
                        });
                    }
                    ConeStatus::InConeCertified => {
                        track_worst(&mut r2, verdict.margin, || Witness {
                            point: x.clone(),
                            direction: Some(v.clone()),
                            disturbance: Some(w.clone()),
                            selection: Some(sel),
                            margin: verdict.margin,
                        });
                    }
                }
            }
        }
    }
    finish_pass(&mut r2, r2_certified, r2_unclear);
    if kl.samples == 0 && kl.verdict != Verdict::Violated {
        kl.verdict = Verdict::NotApplicable;
        kl.note = "no flow-blocked boundary points sampled".into();
    } else if kl.verdict != Verdict::Violated {
        finish_pass(&mut kl, false, false);
        kl.note = "sampled flow-blocked points lie in Π_d(D_w)".into();
    }
    let r2_v = r2.verdict;
    let kl_v = kl.verdict;
    conditions.push(r2);
    conditions.push(kl);

    let (star_conditions, star_v) = robust_completeness(sys, k, false, cfg)?;
    conditions.extend(star_conditions);

    // an unmet neighborhood-monotonicity assumption leaves the theorem
    // inapplicable: degrade to indeterminate rather than violated
    let wbound_adj = if wbound_v == Verdict::Violated { Verdict::Indeterminate } else { wbound_v };
    let pre = combine([wdata_v, wbound_adj, lip_v, r1_v, r2_v]);
    let full = combine([pre, kl_v, star_v]);
    Ok(CheckReport {
        subject: "robust forward invariance".into(),
        conditions,
        conclusions: vec![
            ("robustly forward pre-invariant".into(), pre),
            ("robustly forward invariant".into(), full),
        ],
        kstar: Some("(K ∩ Π_c(C_w)) joint with W_c".into()),
    })
}
