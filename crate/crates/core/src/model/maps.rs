//! Set-valued maps as finite families of selections.
//!
//! A flow map's value at `x` is the convex hull of its selections' values;
//! a jump map's value is the finite set of selection values. A selection
//! may carry a guard restricting where it participates, which is how
//! piecewise-defined jump logic (e.g. switch selection rules) is encoded
//! without leaving the closed-set representation.

use super::expr::Expr;
use super::sets::ConstraintSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone)]
pub enum MapError {
    #[error("selection {selection} component {component}: {source}")]
    Eval {
        selection: usize,
        component: usize,
        #[source]
        source: super::expr::ExprError,
    },
    #[error("map has no selections")]
    NoSelections,
    #[error("selection {0} has {1} components, expected {2}")]
    MixedDims(usize, usize, usize),
    #[error("no selection is defined (guard-active) at the query point")]
    NoActiveSelection,
}

/// One single-valued branch of a set-valued map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub components: Vec<Expr>,
    /// Where this selection participates; `None` means everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<ConstraintSet>,
}

impl Selection {
    pub fn new(components: Vec<Expr>) -> Self {
        Selection { components, guard: None }
    }

    pub fn guarded(components: Vec<Expr>, guard: ConstraintSet) -> Self {
        Selection { components, guard: Some(guard) }
    }

    pub fn active_at(&self, x: &[f64]) -> bool {
        self.guard.as_ref().map(|g| g.contains(x)).unwrap_or(true)
    }

    pub fn eval(&self, x: &[f64], selection_idx: usize) -> Result<Vec<f64>, MapError> {
        self.components
            .iter()
            .enumerate()
            .map(|(ci, e)| {
                e.eval(x).map_err(|source| MapError::Eval {
                    selection: selection_idx,
                    component: ci,
                    source,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetValuedMap {
    pub selections: Vec<Selection>,
}

impl SetValuedMap {
    pub fn new(selections: Vec<Selection>) -> Result<Self, MapError> {
        let m = SetValuedMap { selections };
        m.validate()?;
        Ok(m)
    }

    /// Unguarded map from plain component lists.
    pub fn from_components(selections: Vec<Vec<Expr>>) -> Result<Self, MapError> {
        Self::new(selections.into_iter().map(Selection::new).collect())
    }

    pub fn single(components: Vec<Expr>) -> Self {
        SetValuedMap { selections: vec![Selection::new(components)] }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if self.selections.is_empty() {
            return Err(MapError::NoSelections);
        }
        let dim = self.selections[0].components.len();
        for (i, s) in self.selections.iter().enumerate() {
            if s.components.len() != dim {
                return Err(MapError::MixedDims(i, s.components.len(), dim));
            }
        }
        Ok(())
    }

    pub fn out_dim(&self) -> usize {
        self.selections.first().map(|s| s.components.len()).unwrap_or(0)
    }

    /// Values of all guard-active selections at `x`, with selection indices.
    pub fn values_at(&self, x: &[f64]) -> Result<Vec<(usize, Vec<f64>)>, MapError> {
        let mut out = Vec::new();
        for (i, s) in self.selections.iter().enumerate() {
            if s.active_at(x) {
                out.push((i, s.eval(x, i)?));
            }
        }
        if out.is_empty() {
            return Err(MapError::NoActiveSelection);
        }
        Ok(out)
    }

    /// Value of one selection by index, ignoring guards.
    pub fn selection_value(&self, idx: usize, x: &[f64]) -> Result<Vec<f64>, MapError> {
        let s = self.selections.get(idx).ok_or(MapError::NoSelections)?;
        s.eval(x, idx)
    }

    /// Fixed convex combination of all selections (hull point for flows).
    pub fn hull_point(&self, weights: &[f64], x: &[f64]) -> Result<Vec<f64>, MapError> {
        let dim = self.out_dim();
        let mut acc = vec![0.0; dim];
        let total: f64 = weights.iter().take(self.selections.len()).sum();
        for (i, s) in self.selections.iter().enumerate() {
            let w = weights.get(i).copied().unwrap_or(0.0) / total;
            let v = s.eval(x, i)?;
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += w * vi;
            }
        }
        Ok(acc)
    }

    /// Slice a joint-space map at fixed trailing variables.
    pub fn substitute_tail(&self, from_index: usize, values: &[f64]) -> SetValuedMap {
        SetValuedMap {
            selections: self
                .selections
                .iter()
                .map(|s| Selection {
                    components: s
                        .components
                        .iter()
                        .map(|e| e.substitute_tail(from_index, values))
                        .collect(),
                    guard: s.guard.as_ref().map(|g| g.substitute_tail(from_index, values)),
                })
                .collect(),
        }
    }

    /// Largest variable index referenced by any component or guard.
    pub fn max_var(&self) -> Option<usize> {
        self.selections
            .iter()
            .flat_map(|s| s.components.iter().filter_map(|e| e.max_var()))
            .max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expr::{con, var};
    use crate::model::sets::ConstraintSet;

    #[test]
    fn values_and_hull() {
        let m = SetValuedMap::from_components(vec![
            vec![var(0) - con(1.0), var(1)],
            vec![var(0) + con(1.0), var(1)],
        ])
        .unwrap();
        let vals = m.values_at(&[2.0, 0.5]).unwrap();
        assert_eq!(vals.len(), 2);
        assert_eq!(vals[0].1, vec![1.0, 0.5]);
        let mid = m.hull_point(&[1.0, 1.0], &[2.0, 0.5]).unwrap();
        assert_eq!(mid, vec![2.0, 0.5]);
    }

    #[test]
    fn guards_filter_selections() {
        let left = ConstraintSet::boxed(vec![None], vec![Some(0.0)]);
        let right = ConstraintSet::boxed(vec![Some(0.0)], vec![None]);
        let m = SetValuedMap::new(vec![
            Selection::guarded(vec![con(-1.0)], left),
            Selection::guarded(vec![con(1.0)], right),
        ])
        .unwrap();
        let vals = m.values_at(&[-2.0]).unwrap();
        assert_eq!(vals, vec![(0, vec![-1.0])]);
        let vals = m.values_at(&[0.0]).unwrap();
        assert_eq!(vals.len(), 2);
    }

    #[test]
    fn mixed_dims_rejected() {
        let err = SetValuedMap::from_components(vec![vec![var(0)], vec![var(0), var(1)]]);
        assert!(matches!(err, Err(MapError::MixedDims(1, 2, 1))));
    }
}
