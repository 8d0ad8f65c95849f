//! Textual scenario format.
//!
//! A scenario file is a JSON document describing either a nominal system
//! `{dim, C, F, D, G, ...}` or a disturbed one
//! `{dim, dc, dd, C_w, F_w, D_w, G_w, W_c, W_d, ...}`, plus the candidate
//! set(s) `K`, an optional Lyapunov triple `V`/`r`/`r_star`, an optional
//! ambient sampling box, and optional tolerance overrides.
//!
//! Expressions are prefix s-expressions over `(var i)`:
//!
//! ```text
//! expr  := number | "pi" | "inf" | "-inf"
//!        | (var <int>) | (+ e...) | (* e...) | (- e...) | (neg e)
//!        | (pow e <int>) | (abs e) | (min e...) | (max e...)
//!        | (sin e) | (cos e)
//! ```
//!
//! Sets are JSON objects with a `kind` tag:
//!
//! ```text
//! {"kind":"intersection","constraints":["<expr>", ...]}   all h_i(x) <= 0
//! {"kind":"union","children":[<set>, ...]}
//! {"kind":"halfspace","normal":[...],"offset":b}          n.x <= b
//! {"kind":"box","lower":[l|null,...],"upper":[u|null,...]}
//! {"kind":"ball","center":[...],"radius":r}
//! {"kind":"sublevel","v":"<expr>","r":r}
//! ```
//!
//! Maps are `{"selections":[{"components":["<expr>",...],"guard":<set>?}, ...]}`.

use super::expr::Expr;
use super::maps::{Selection, SetValuedMap};
use super::sets::{ConstraintSet, SetKind};
use super::system::{DisturbedHybridSystem, HybridSystem};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("json error at line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error("in {context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: super::expr::ExprError,
    },
    #[error("scenario is missing field `{0}`")]
    Missing(&'static str),
    #[error("scenario mixes nominal and disturbed fields")]
    MixedKind,
    #[error("{0}")]
    Invalid(String),
}

fn json_err(e: serde_json::Error) -> ScenarioError {
    ScenarioError::Json { line: e.line(), column: e.column(), msg: e.to_string() }
}

// ---- wire types --------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetDto {
    Intersection { constraints: Vec<String> },
    Union { children: Vec<SetDto> },
    Halfspace { normal: Vec<f64>, offset: f64 },
    Box { lower: Vec<Option<f64>>, upper: Vec<Option<f64>> },
    Ball { center: Vec<f64>, radius: f64 },
    Sublevel { v: String, r: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionDto {
    pub components: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<SetDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapDto {
    pub selections: Vec<SelectionDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ScenarioDto {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dc: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dd: Option<usize>,
    #[serde(default, rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<SetDto>,
    #[serde(default, rename = "F", skip_serializing_if = "Option::is_none")]
    pub f: Option<MapDto>,
    #[serde(default, rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<SetDto>,
    #[serde(default, rename = "G", skip_serializing_if = "Option::is_none")]
    pub g: Option<MapDto>,
    #[serde(default, rename = "C_w", skip_serializing_if = "Option::is_none")]
    pub c_w: Option<SetDto>,
    #[serde(default, rename = "F_w", skip_serializing_if = "Option::is_none")]
    pub f_w: Option<MapDto>,
    #[serde(default, rename = "D_w", skip_serializing_if = "Option::is_none")]
    pub d_w: Option<SetDto>,
    #[serde(default, rename = "G_w", skip_serializing_if = "Option::is_none")]
    pub g_w: Option<MapDto>,
    #[serde(default, rename = "W_c", skip_serializing_if = "Option::is_none")]
    pub w_c: Option<Vec<(f64, f64)>>,
    #[serde(default, rename = "W_d", skip_serializing_if = "Option::is_none")]
    pub w_d: Option<Vec<(f64, f64)>>,
    /// Candidate sets by name (a bare set object is accepted and named "K").
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<serde_json::Value>,
    #[serde(default, rename = "V", skip_serializing_if = "Option::is_none")]
    pub v: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_star: Option<f64>,
    /// Ambient sampling box, one `(lo, hi)` per state dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_mem: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_act: Option<f64>,
}

// ---- conversions ---------------------------------------------------------------

fn parse_expr(src: &str, context: &str) -> Result<Expr, ScenarioError> {
    Expr::parse(src).map_err(|source| ScenarioError::Expr { context: context.into(), source })
}

pub fn set_from_dto(dto: &SetDto, context: &str) -> Result<ConstraintSet, ScenarioError> {
    let kind = match dto {
        SetDto::Intersection { constraints } => SetKind::Intersection(
            constraints
                .iter()
                .enumerate()
                .map(|(i, s)| parse_expr(s, &format!("{context}.constraints[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        SetDto::Union { children } => SetKind::Union(
            children
                .iter()
                .enumerate()
                .map(|(i, c)| set_from_dto(c, &format!("{context}.children[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        SetDto::Halfspace { normal, offset } => {
            SetKind::Halfspace { normal: normal.clone(), offset: *offset }
        }
        SetDto::Box { lower, upper } => SetKind::Box { lower: lower.clone(), upper: upper.clone() },
        SetDto::Ball { center, radius } => {
            SetKind::Ball { center: center.clone(), radius: *radius }
        }
        SetDto::Sublevel { v, r } => {
            SetKind::Sublevel { v: parse_expr(v, &format!("{context}.v"))?, r: *r }
        }
    };
    Ok(ConstraintSet::new(kind))
}

pub fn set_to_dto(set: &ConstraintSet) -> SetDto {
    match &set.kind {
        SetKind::Intersection(hs) => {
            SetDto::Intersection { constraints: hs.iter().map(|h| h.to_string()).collect() }
        }
        SetKind::Union(children) => {
            SetDto::Union { children: children.iter().map(set_to_dto).collect() }
        }
        SetKind::Halfspace { normal, offset } => {
            SetDto::Halfspace { normal: normal.clone(), offset: *offset }
        }
        SetKind::Box { lower, upper } => SetDto::Box { lower: lower.clone(), upper: upper.clone() },
        SetKind::Ball { center, radius } => {
            SetDto::Ball { center: center.clone(), radius: *radius }
        }
        SetKind::Sublevel { v, r } => SetDto::Sublevel { v: v.to_string(), r: *r },
    }
}

pub fn map_from_dto(dto: &MapDto, context: &str) -> Result<SetValuedMap, ScenarioError> {
    let mut selections = Vec::new();
    for (i, s) in dto.selections.iter().enumerate() {
        let components = s
            .components
            .iter()
            .enumerate()
            .map(|(ci, e)| parse_expr(e, &format!("{context}.selections[{i}].components[{ci}]")))
            .collect::<Result<_, _>>()?;
        let guard = match &s.guard {
            Some(g) => Some(set_from_dto(g, &format!("{context}.selections[{i}].guard"))?),
            None => None,
        };
        selections.push(Selection { components, guard });
    }
    SetValuedMap::new(selections)
        .map_err(|e| ScenarioError::Invalid(format!("{context}: {e}")))
}

pub fn map_to_dto(map: &SetValuedMap) -> MapDto {
    MapDto {
        selections: map
            .selections
            .iter()
            .map(|s| SelectionDto {
                components: s.components.iter().map(|e| e.to_string()).collect(),
                guard: s.guard.as_ref().map(set_to_dto),
            })
            .collect(),
    }
}

/// A loaded scenario: one system, named candidate sets, optional Lyapunov
/// data and sampling metadata.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub nominal: Option<HybridSystem>,
    pub disturbed: Option<DisturbedHybridSystem>,
    pub candidate_sets: BTreeMap<String, ConstraintSet>,
    pub lyapunov: Option<(Expr, f64, f64)>,
    pub ambient: Option<Vec<(f64, f64)>>,
}

impl Scenario {
    pub fn from_json(src: &str) -> Result<Scenario, ScenarioError> {
        let dto: ScenarioDto = serde_json::from_str(src).map_err(json_err)?;
        Scenario::from_dto(&dto)
    }

    pub fn from_dto(dto: &ScenarioDto) -> Result<Scenario, ScenarioError> {
        let nominal_fields = dto.c.is_some() || dto.f.is_some() || dto.d.is_some() || dto.g.is_some();
        let disturbed_fields =
            dto.c_w.is_some() || dto.f_w.is_some() || dto.d_w.is_some() || dto.g_w.is_some();
        if nominal_fields && disturbed_fields {
            return Err(ScenarioError::MixedKind);
        }

        let apply_tol = |mut s: ConstraintSet| -> ConstraintSet {
            let mem = dto.eps_mem.unwrap_or(s.eps_mem);
            let act = dto.eps_act.unwrap_or(s.eps_act);
            s.set_tolerances(mem, act);
            s
        };

        let nominal = if nominal_fields {
            let c = apply_tol(set_from_dto(dto.c.as_ref().ok_or(ScenarioError::Missing("C"))?, "C")?);
            let f = map_from_dto(dto.f.as_ref().ok_or(ScenarioError::Missing("F"))?, "F")?;
            let d = apply_tol(set_from_dto(dto.d.as_ref().ok_or(ScenarioError::Missing("D"))?, "D")?);
            let g = map_from_dto(dto.g.as_ref().ok_or(ScenarioError::Missing("G"))?, "G")?;
            Some(
                HybridSystem::new(dto.dim, c, f, d, g)
                    .map_err(|e| ScenarioError::Invalid(e.to_string()))?,
            )
        } else {
            None
        };

        let disturbed = if disturbed_fields {
            let dc = dto.dc.ok_or(ScenarioError::Missing("dc"))?;
            let dd = dto.dd.ok_or(ScenarioError::Missing("dd"))?;
            Some(DisturbedHybridSystem {
                dim: dto.dim,
                dc,
                dd,
                flow_set_w: apply_tol(set_from_dto(
                    dto.c_w.as_ref().ok_or(ScenarioError::Missing("C_w"))?,
                    "C_w",
                )?),
                flow_map_w: map_from_dto(
                    dto.f_w.as_ref().ok_or(ScenarioError::Missing("F_w"))?,
                    "F_w",
                )?,
                jump_set_w: apply_tol(set_from_dto(
                    dto.d_w.as_ref().ok_or(ScenarioError::Missing("D_w"))?,
                    "D_w",
                )?),
                jump_map_w: map_from_dto(
                    dto.g_w.as_ref().ok_or(ScenarioError::Missing("G_w"))?,
                    "G_w",
                )?,
                w_box_c: dto.w_c.clone().ok_or(ScenarioError::Missing("W_c"))?,
                w_box_d: dto.w_d.clone().ok_or(ScenarioError::Missing("W_d"))?,
            })
        } else {
            None
        };

        if nominal.is_none() && disturbed.is_none() {
            return Err(ScenarioError::Missing("C"));
        }

        let mut candidate_sets = BTreeMap::new();
        if let Some(kval) = &dto.k {
            if kval.get("kind").is_some() {
                let kd: SetDto = serde_json::from_value(kval.clone()).map_err(json_err)?;
                candidate_sets.insert("K".to_string(), apply_tol(set_from_dto(&kd, "K")?));
            } else {
                let named: BTreeMap<String, SetDto> =
                    serde_json::from_value(kval.clone()).map_err(json_err)?;
                for (name, kd) in named {
                    let s = apply_tol(set_from_dto(&kd, &format!("K.{name}"))?);
                    candidate_sets.insert(name, s);
                }
            }
        }

        let lyapunov = match (&dto.v, dto.r, dto.r_star) {
            (Some(v), Some(r), Some(rs)) => Some((parse_expr(v, "V")?, r, rs)),
            (None, _, _) => None,
            _ => return Err(ScenarioError::Missing("r / r_star")),
        };

        Ok(Scenario {
            nominal,
            disturbed,
            candidate_sets,
            lyapunov,
            ambient: dto.ambient.clone(),
        })
    }

    pub fn to_dto(&self) -> ScenarioDto {
        let mut dto = ScenarioDto::default();
        if let Some(sys) = &self.nominal {
            dto.dim = sys.dim;
            dto.c = Some(set_to_dto(&sys.flow_set));
            dto.f = Some(map_to_dto(&sys.flow_map));
            dto.d = Some(set_to_dto(&sys.jump_set));
            dto.g = Some(map_to_dto(&sys.jump_map));
        }
        if let Some(sys) = &self.disturbed {
            dto.dim = sys.dim;
            dto.dc = Some(sys.dc);
            dto.dd = Some(sys.dd);
            dto.c_w = Some(set_to_dto(&sys.flow_set_w));
            dto.f_w = Some(map_to_dto(&sys.flow_map_w));
            dto.d_w = Some(set_to_dto(&sys.jump_set_w));
            dto.g_w = Some(map_to_dto(&sys.jump_map_w));
            dto.w_c = Some(sys.w_box_c.clone());
            dto.w_d = Some(sys.w_box_d.clone());
        }
        if !self.candidate_sets.is_empty() {
            let named: BTreeMap<String, SetDto> = self
                .candidate_sets
                .iter()
                .map(|(n, s)| (n.clone(), set_to_dto(s)))
                .collect();
            dto.k = Some(serde_json::to_value(named).expect("set dto serializes"));
        }
        if let Some((v, r, rs)) = &self.lyapunov {
            dto.v = Some(v.to_string());
            dto.r = Some(*r);
            dto.r_star = Some(*rs);
        }
        dto.ambient = self.ambient.clone();
        dto
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_dto()).expect("scenario dto serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOMINAL: &str = r#"{
        "dim": 2,
        "C": {"kind": "box", "lower": [0.0, -1.0], "upper": [null, 1.0]},
        "F": {"selections": [{"components": ["(+ 1 (pow (var 0) 2))", "0"]}]},
        "D": {"kind": "box", "lower": [0.0, 0.0], "upper": [null, 0.0]},
        "G": {"selections": [
            {"components": ["(- (var 0) 1)", "(var 1)"]},
            {"components": ["(+ (var 0) 1)", "(var 1)"]}
        ]},
        "K": {"kind": "box", "lower": [0.0, -1.0], "upper": [null, 1.0]},
        "ambient": [[-1.0, 10.0], [-2.0, 2.0]]
    }"#;

    #[test]
    fn load_nominal() {
        let sc = Scenario::from_json(NOMINAL).unwrap();
        let sys = sc.nominal.as_ref().unwrap();
        assert!(sys.flow_set.contains(&[3.0, 0.5]));
        assert!(!sys.flow_set.contains(&[-1.0, 0.0]));
        assert_eq!(sc.candidate_sets.len(), 1);
        let f = sys.flow_map.selection_value(0, &[2.0, 0.0]).unwrap();
        assert_eq!(f, vec![5.0, 0.0]);
    }

    #[test]
    fn round_trip_preserves_evaluation() {
        let sc = Scenario::from_json(NOMINAL).unwrap();
        let back = Scenario::from_json(&sc.to_json_pretty()).unwrap();
        let a = sc.nominal.as_ref().unwrap();
        let b = back.nominal.as_ref().unwrap();
        for x in [[0.0, 0.0], [1.5, -0.5], [7.25, 1.0]] {
            let fa = a.flow_map.selection_value(0, &x).unwrap();
            let fb = b.flow_map.selection_value(0, &x).unwrap();
            assert_eq!(fa[0].to_bits(), fb[0].to_bits());
            assert_eq!(a.flow_set.violation(&x).to_bits(), b.flow_set.violation(&x).to_bits());
        }
    }

    #[test]
    fn bad_expression_reports_context() {
        let src = NOMINAL.replace("(+ 1 (pow (var 0) 2))", "(oops 1)");
        let err = Scenario::from_json(&src).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("F.selections[0]"), "{msg}");
    }

    #[test]
    fn json_error_carries_position() {
        let err = Scenario::from_json("{ \"dim\": }").unwrap_err();
        match err {
            ScenarioError::Json { line, column, .. } => {
                assert!(line >= 1 && column >= 1);
            }
            other => panic!("expected json error, got {other:?}"),
        }
    }
}
