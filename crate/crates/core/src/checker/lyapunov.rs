//! Lyapunov sublevel suite: invariance of `M_r = L_V(r) ∩ (C ∪ D)`.
//!
//! The flow side combines a nonincrease condition on the shell
//! `{r <= V <= r*} ∩ C` with tangent-cone conditions on the pieces of the
//! boundary of `M_r`; the jump side requires the jump map to re-enter the
//! sublevel set and (for the strong conclusion) to stay inside `C ∪ D`.
//! Regularity of `C` at the relevant boundary points is taken as declared
//! scenario metadata; it is not checkable numerically here.

use super::sample::Sampler;
use super::{
    combine, CheckConfig, CheckError, CheckReport, ConditionReport, Verdict, Witness,
};
use crate::checker::nominal::{check_completeness, KStar};
use crate::geometry::{
    inner_product_certificate_with, norm, tangent_cone_contains, ConeStatus,
};
use crate::model::expr::{con, Expr};
use crate::model::sets::ConstraintSet;
use crate::model::system::HybridSystem;

/// Candidate function with its inner and outer levels `r < r*`.
#[derive(Debug, Clone)]
pub struct LyapunovSpec {
    pub v: Expr,
    pub r: f64,
    pub r_star: f64,
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

/// Verify the sublevel-set invariance conditions for `M_r`.
pub fn check_lyapunov_sublevel(
    sys: &HybridSystem,
    spec: &LyapunovSpec,
    cfg: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    if !(spec.r < spec.r_star) {
        return Err(CheckError::BadLyapunov(format!(
            "need r < r_star, got r = {} and r_star = {}",
            spec.r, spec.r_star
        )));
    }
    let ambient = cfg.ambient_or(sys.dim);
    let mut sampler = Sampler::new(cfg.seed ^ 0x17a, &ambient);
    let mut conditions = Vec::new();

    let lv_r = ConstraintSet::sublevel(spec.v.clone(), spec.r);
    let lv_rstar = ConstraintSet::sublevel(spec.v.clone(), spec.r_star);
    let c_or_d = ConstraintSet::union(vec![sys.flow_set.clone(), sys.jump_set.clone()]);
    let m_r = lv_r.intersect(&c_or_d);
    let level_expr = spec.v.clone() - con(spec.r);

    // the candidate set must be nonempty
    let m_r_witnesses = sampler.region(&m_r, 16);
    if m_r_witnesses.is_empty() {
        return Err(CheckError::EmptySet("M_r".into(), 100_000));
    }

    // smoothness spot check of V on a neighborhood of L_V(r*)
    let mut smooth = ConditionReport::new("V.smooth");

    {
        let mut pts = sampler.region(&lv_rstar, cfg.boundary_samples / 2);
        pts.extend(sampler.boundary(&lv_rstar, cfg.boundary_samples / 4));
        smooth.samples = pts.len();
        let mut kinks = 0usize;
        for x in &pts {
            if spec.v.eval_grad(x).is_err() {
                kinks += 1;
                if smooth.witnesses.len() < 4 {
                    smooth.witnesses.push(Witness {
                        point: x.clone(),
                        direction: None,
                        disturbance: None,
                        selection: None,
                        margin: f64::NAN,
                    });
                }
            }
        }
        if kinks > 0 {
            smooth.verdict = Verdict::Indeterminate;
            smooth.note = format!("{kinks} sampled points hit a kink of V");

        } else {
            smooth.verdict = Verdict::SampledPass;
            smooth.note = "V differentiable at all samples".into();
        }
    }
    let smooth_v = smooth.verdict;
    conditions.push(smooth);

    // nonincrease on the shell {r <= V <= r*} ∩ C
    let mut lya1 = ConditionReport::new("lya.1");
    {
        let shell = ConstraintSet::intersection(vec![
            spec.v.clone() - con(spec.r_star),
            con(spec.r) - spec.v.clone(),
        ])
        .intersect(&sys.flow_set);
        let mut pts = sampler.region(&shell, cfg.boundary_samples);
        pts.extend(sampler.boundary(&shell, cfg.boundary_samples / 2));
        let mut unclear = false;
        for x in &pts {
            let Ok((_, grad)) = spec.v.eval_grad(x) else {
                unclear = true;
                continue;
            };
            lya1.samples += 1;
            let Ok(values) = sys.flow_map.values_at(x) else {
                unclear = true;
                continue;
            };
            for (sel, eta) in values {
                let ip: f64 = grad.iter().zip(&eta).map(|(a, b)| a * b).sum();
                if ip > cfg.eps_strict {
                    record_violation(
                        &mut lya1,
                        Witness {
                            point: x.clone(),
                            direction: Some(eta.clone()),
                            disturbance: None,
                            selection: Some(sel),
                            margin: ip,
                        },
                    );
                } else {
                    track_worst(&mut lya1, ip, || Witness {
                        point: x.clone(),
                        direction: Some(eta.clone()),
                        disturbance: None,
                        selection: Some(sel),
                        margin: ip,
                    });
                }
            }
        }
        finish_pass(&mut lya1, true, unclear);
        lya1.note = "<∇V, η> <= 0 on {r <= V <= r*} ∩ C".into();
    }
    let lya1_v = lya1.verdict;
    conditions.push(lya1);

    // jumps from the sublevel set land back in it
    let mut lya2 = ConditionReport::new("lya.2");
    {
        let dom = lv_r.intersect(&sys.jump_set);
        let pts = sampler.region(&dom, cfg.boundary_samples);
        lya2.samples = pts.len();
        for x in &pts {
            let Ok(values) = sys.jump_map.values_at(x) else { continue };
            for (sel, eta) in values.into_iter().take(cfg.jump_enumeration_cap) {
                let veta = spec.v.eval(&eta).unwrap_or(f64::INFINITY);
                let margin = veta - spec.r;
                if margin > lv_r.eps_mem {
                    record_violation(
                        &mut lya2,
                        Witness {
                            point: x.clone(),
                            direction: Some(eta),
                            disturbance: None,
                            selection: Some(sel),
                            margin,
                        },
                    );
                } else {
                    track_worst(&mut lya2, margin, || Witness {
                        point: x.clone(),
                        direction: Some(eta.clone()),
                        disturbance: None,
                        selection: Some(sel),
                        margin,
                    });
                }
            }
        }
        finish_pass(&mut lya2, false, false);
        lya2.note = "V(η) <= r for jump images of L_V(r) ∩ D".into();
    }
    let lya2_v = lya2.verdict;
    conditions.push(lya2);

    // nonvanishing gradient on the level set
    let mut ly1 = ConditionReport::new("Ly.1");
    {
        let pts = sampler.boundary(&lv_r, cfg.boundary_samples / 2);
        for x in &pts {
            let val = spec.v.eval(x).unwrap_or(f64::NAN);
            if (val - spec.r).abs() > lv_r.eps_act {
                continue;
            }
            ly1.samples += 1;
            match spec.v.eval_grad(x) {
                Ok((_, g)) => {
                    let gn = norm(&g);
                    if gn <= cfg.eps_strict {
                        record_violation(
                            &mut ly1,
                            Witness {
                                point: x.clone(),
                                direction: Some(g),
                                disturbance: None,
                                selection: None,
                                margin: gn,
                            },
                        );
                    } else {
                        // worst margin: smallest gradient norm seen
                        track_worst(&mut ly1, -gn, || Witness {
                            point: x.clone(),
                            direction: Some(g.clone()),
                            disturbance: None,
                            selection: None,
                            margin: gn,
                        });
                    }
                }
                Err(_) => {
                    record_violation(
                        &mut ly1,
                        Witness {
                            point: x.clone(),
                            direction: None,
                            disturbance: None,
                            selection: None,
                            margin: f64::NAN,
                        },
                    );
                }
            }
        }
        finish_pass(&mut ly1, false, false);
        ly1.note = "∇V ≠ 0 on the r-level set".into();
    }
    let ly1_v = ly1.verdict;
    conditions.push(ly1);

    // boundary-of-C samples of the sublevel set, for Ly.2 and Ly.3
    let lvc = lv_r.intersect(&sys.flow_set);
    let lvc_boundary = sampler.boundary(&lvc, cfg.boundary_samples);

    let mut ly2 = ConditionReport::new("Ly.2");
    let mut ly3 = ConditionReport::new("Ly.3");
    {
        let mut ly2_unclear = false;
        let mut ly3_unclear = false;
        for x in &lvc_boundary {
            if !sys.flow_set.is_boundary(x) || sys.jump_set.contains(x) {
                continue;
            }
            let Ok(values) = sys.flow_map.values_at(x) else {
                ly2_unclear = true;
                continue;
            };
            let on_level = (spec.v.eval(x).unwrap_or(f64::NAN) - spec.r).abs() <= lv_r.eps_act;

            // Ly.2: some flow direction tangent to C
            ly2.samples += 1;
            let mut found = None;
            let mut unclear_here = false;
            for (sel, v) in &values {
                let verdict = tangent_cone_contains(&sys.flow_set, x, v);
                match verdict.status {
                    ConeStatus::InConeCertified | ConeStatus::InConeNumerical => {
                        found = Some((*sel, v.clone(), verdict.margin));
                        break;
                    }
                    ConeStatus::Indeterminate => unclear_here = true,
                    ConeStatus::NotInCone => {}
                }
            }
            match found.clone() {
                Some((sel, v, m)) => track_worst(&mut ly2, m, || Witness {
                    point: x.clone(),
                    direction: Some(v),
                    disturbance: None,
                    selection: Some(sel),
                    margin: m,
                }),
                None if unclear_here => ly2_unclear = true,
                None => record_violation(
                    &mut ly2,
                    Witness {
                        point: x.clone(),
                        direction: values.first().map(|(_, v)| v.clone()),
                        disturbance: None,
                        selection: values.first().map(|(s, _)| *s),
                        margin: f64::NAN,
                    },
                ),
            }

            // Ly.3: on the level set, additionally a strict decrease
            // direction inside the cone of C
            if on_level {
                ly3.samples += 1;
                let mut strict_found = None;
                let mut best_ip = f64::INFINITY;
                let mut unclear3 = false;
                for (sel, v) in &values {
                    let in_c = tangent_cone_contains(&sys.flow_set, x, v);
                    if in_c.status == ConeStatus::Indeterminate {
                        unclear3 = true;
                        continue;
                    }
                    if !in_c.in_cone() {
                        continue;
                    }
                    let cert = inner_product_certificate_with(
                        &level_expr,
                        x,
                        v,
                        lv_r.eps_act,
                        cfg.eps_strict,
                    );
                    best_ip = best_ip.min(cert.margin);
                    if cert.strict {
                        strict_found = Some((*sel, v.clone(), cert.margin));
                        break;
                    }
                }
                match strict_found {
                    Some((sel, v, m)) => track_worst(&mut ly3, m, || Witness {
                        point: x.clone(),
                        direction: Some(v),
                        disturbance: None,
                        selection: Some(sel),
                        margin: m,
                    }),
                    None if unclear3 => ly3_unclear = true,
                    None => record_violation(
                        &mut ly3,
                        Witness {
                            point: x.clone(),
                            direction: values.first().map(|(_, v)| v.clone()),
                            disturbance: None,
                            selection: values.first().map(|(s, _)| *s),
                            margin: if best_ip.is_finite() { best_ip } else { f64::NAN },
                        },
                    ),
                }
            }
        }
        finish_pass(&mut ly2, false, ly2_unclear);
        ly2.note = "some flow direction tangent to C on L_V(r) ∩ ∂C \\ D".into();
        finish_pass(&mut ly3, false, ly3_unclear);
        ly3.note = "strict decrease direction inside T_C on V⁻¹(r) ∩ ∂C \\ D".into();
    }
    let ly2_v = ly2.verdict;
    let ly3_v = ly3.verdict;
    conditions.push(ly2);
    conditions.push(ly3);

    // completeness on M_r ∩ C
    let completeness = check_completeness(sys, &m_r, KStar::StrongTheorem, cfg)?;
    let ly4_v = completeness.overall();
    let mut ly4 = ConditionReport::new("Ly.4");
    ly4.verdict = ly4_v;
    ly4.note = completeness
        .conclusions
        .first()
        .map(|(n, _)| n.clone())
        .unwrap_or_default();
    conditions.push(ly4);
    conditions.extend(completeness.conditions.clone());

    // jump images stay in C ∪ D: existentially (Ly.5) and universally (Ly.6)
    let mut ly5 = ConditionReport::new("Ly.5");
    let mut ly6 = ConditionReport::new("Ly.6");
    {
        let dom = m_r.intersect(&sys.jump_set);
        let pts = sampler.region(&dom, cfg.boundary_samples / 2);
        ly5.samples = pts.len();
        ly6.samples = pts.len();
        for x in &pts {
            let Ok(values) = sys.jump_map.values_at(x) else { continue };
            let mut any_inside = false;
            for (sel, eta) in values.into_iter().take(cfg.jump_enumeration_cap) {
                let margin = c_or_d.violation(&eta);
                if margin <= c_or_d.eps_mem {
                    any_inside = true;
                    track_worst(&mut ly6, margin, || Witness {
                        point: x.clone(),
                        direction: Some(eta.clone()),
                        disturbance: None,
                        selection: Some(sel),
                        margin,
                    });
                } else {
                    record_violation(
                        &mut ly6,
                        Witness {
                            point: x.clone(),
                            direction: Some(eta),
                            disturbance: None,
                            selection: Some(sel),
                            margin,
                        },
                    );
                }
            }
            if !any_inside {
                record_violation(
                    &mut ly5,
                    Witness {
                        point: x.clone(),
                        direction: None,
                        disturbance: None,
                        selection: None,
                        margin: f64::NAN,
                    },
                );
            }
        }
        finish_pass(&mut ly5, false, false);
        ly5.note = "some jump image stays in C ∪ D".into();
        finish_pass(&mut ly6, false, false);
        ly6.note = "every jump image stays in C ∪ D".into();
    }
    let ly5_v = ly5.verdict;
    let ly6_v = ly6.verdict;
    conditions.push(ly5);
    conditions.push(ly6);

    let weak_parts = [smooth_v, lya1_v, lya2_v, ly1_v, ly2_v, ly3_v, ly4_v, ly5_v];
    let weak = combine(weak_parts);
    let strong = combine(weak_parts.into_iter().chain([ly6_v]));
    Ok(CheckReport {
        subject: format!("Lyapunov sublevel invariance (r = {}, r* = {})", spec.r, spec.r_star),
        conditions,
        conclusions: vec![
            ("M_r weakly forward invariant".into(), weak),
            ("M_r forward invariant".into(), strong),
        ],
        kstar: Some("M_r ∩ C".into()),
    })
}
