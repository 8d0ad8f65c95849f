//! Sampled and certificate-based verification of the sufficient
//! conditions for forward invariance.
//!
//! Every universal condition is checked on samples, so a clean result is
//! reported as `SampledPass`, never as a proof. The only `CertifiedPass`
//! entries are those where an inner-product certificate with symbolic
//! gradients held at every sample (or the property is structural, like
//! closedness of the represented sets). Violations always carry at least
//! one concrete witness; geometry indeterminacy degrades a pass to
//! `Indeterminate`, never to `Violated`.

pub mod lyapunov;
pub mod nominal;
pub mod robust;
pub mod sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lyapunov::{check_lyapunov_sublevel, LyapunovSpec};
pub use nominal::{
    check_assumption_data, check_completeness, check_forward_invariance,
    check_weak_forward_invariance, lipschitz_estimate, FiMode, KStar, LipschitzEstimate,
};
pub use robust::{check_assumption_wdata, check_robust_forward, check_robust_weak};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("no sample of the set `{0}` found after {1} attempts (set empty within the ambient box?)")]
    EmptySet(String, usize),
    #[error("check configuration needs an ambient sampling box (none given and none derivable)")]
    MissingAmbient,
    #[error("candidate Lyapunov data invalid: {0}")]
    BadLyapunov(String),
}

/// Verdict for one condition or for a conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CertifiedPass,
    SampledPass,
    Violated,
    NotApplicable,
    Indeterminate,
}

impl Verdict {
    pub fn passed(self) -> bool {
        matches!(self, Verdict::CertifiedPass | Verdict::SampledPass | Verdict::NotApplicable)
    }
}

/// Conjunction with the theorem's logic: any violation dominates, then
/// indeterminacy; a conjunction is certified only when nothing in it was
/// merely sampled.
pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut saw_sampled = false;
    let mut saw_certified = false;
    let mut saw_indeterminate = false;
    for v in verdicts {
        match v {
            Verdict::Violated => return Verdict::Violated,
            Verdict::Indeterminate => saw_indeterminate = true,
            Verdict::SampledPass => saw_sampled = true,
            Verdict::CertifiedPass => saw_certified = true,
            Verdict::NotApplicable => {}
        }
    }
    if saw_indeterminate {
        Verdict::Indeterminate
    } else if saw_sampled {
        Verdict::SampledPass
    } else if saw_certified {
        Verdict::CertifiedPass
    } else {
        Verdict::NotApplicable
    }
}

/// Disjunction: used where a theorem offers alternative clauses (e.g. the
/// completeness lemma's compactness-or-growth).
pub fn combine_any(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut best = Verdict::NotApplicable;
    for v in verdicts {
        best = match (best, v) {
            (_, Verdict::CertifiedPass) | (Verdict::CertifiedPass, _) => Verdict::CertifiedPass,
            (_, Verdict::SampledPass) | (Verdict::SampledPass, _) => Verdict::SampledPass,
            (_, Verdict::Indeterminate) | (Verdict::Indeterminate, _) => Verdict::Indeterminate,
            (_, Verdict::Violated) | (Verdict::Violated, _) => Verdict::Violated,
            (Verdict::NotApplicable, Verdict::NotApplicable) => Verdict::NotApplicable,
        };
        if best == Verdict::CertifiedPass {
            break;
        }
    }
    best
}

/// One concrete data point supporting a verdict: a violating sample, or
/// the worst margin seen by a passing condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    /// Flow direction tested or jump image reached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<usize>,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub id: String,
    pub verdict: Verdict,
    pub samples: usize,
    /// Violating samples (bounded count), or the worst-margin sample for a
    /// passing condition.
    pub witnesses: Vec<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_margin: Option<f64>,
    pub note: String,
}

impl ConditionReport {
    pub fn new(id: &str) -> Self {
        ConditionReport {
            id: id.to_string(),
            verdict: Verdict::NotApplicable,
            samples: 0,
            witnesses: Vec::new(),
            worst_margin: None,
            note: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    /// Short label of what was checked (system / set / suite).
    pub subject: String,
    pub conditions: Vec<ConditionReport>,
    /// Named conclusions in the theorem's own terms, e.g.
    /// `("weakly forward pre-invariant", SampledPass)`.
    pub conclusions: Vec<(String, Verdict)>,
    /// Which completeness domain was used, when applicable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kstar: Option<String>,
}

impl CheckReport {
    pub fn condition(&self, id: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn verdict_of(&self, id: &str) -> Option<Verdict> {
        self.condition(id).map(|c| c.verdict)
    }

    pub fn conclusion(&self, name: &str) -> Option<Verdict> {
        self.conclusions.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn overall(&self) -> Verdict {
        self.conclusions
            .last()
            .map(|(_, v)| *v)
            .unwrap_or(Verdict::NotApplicable)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary with one line per condition.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("check report: {}\n", self.subject));
        if let Some(k) = &self.kstar {
            out.push_str(&format!("  completeness domain: {k}\n"));
        }
        for c in &self.conditions {
            let margin = c
                .worst_margin
                .map(|m| format!(" worst_margin={m:.3e}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "  [{:<13}] {:32} samples={}{}{}\n",
                format!("{:?}", c.verdict),
                c.id,
                c.samples,
                margin,
                if c.note.is_empty() { String::new() } else { format!("  ({})", c.note) }
            ));
            for w in c.witnesses.iter().take(3) {
                if c.verdict == Verdict::Violated {
                    out.push_str(&format!(
                        "      witness x={:?} dir={:?} w={:?} margin={:.3e}\n",
                        w.point, w.direction, w.disturbance, w.margin
                    ));
                }
            }
        }
        for (name, v) in &self.conclusions {
            out.push_str(&format!("  => {name}: {v:?}\n"));
        }
        out
    }
}

/// Sampling and enumeration budget for the checking routines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Boundary points per sampled condition (rejection + projection).
    pub boundary_samples: usize,
    /// Disturbance grid resolution per box dimension (endpoints and zero
    /// are always included).
    pub disturbance_grid: usize,
    /// Cap on jump selections x disturbance grid points enumerated per
    /// check point; saturation is reported.
    pub jump_enumeration_cap: usize,
    /// Strictness threshold for strict-inequality certificates.
    pub eps_strict: f64,
    /// Sample pairs for Lipschitz estimation.
    pub lipschitz_samples: usize,
    /// Ambient sampling box, one pair per state dimension.
    pub ambient: Option<Vec<(f64, f64)>>,
    /// RNG seed; fixed default keeps reports reproducible.
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            boundary_samples: 2000,
            disturbance_grid: 9,
            jump_enumeration_cap: 64,
            eps_strict: 1e-7,
            lipschitz_samples: 500,
            ambient: None,
            seed: 0x5eed,
        }
    }
}

impl CheckConfig {
    pub fn with_ambient(mut self, ambient: &[(f64, f64)]) -> Self {
        self.ambient = Some(ambient.to_vec());
        self
    }

    pub fn ambient_or(&self, dim: usize) -> Vec<(f64, f64)> {
        self.ambient
            .clone()
            .unwrap_or_else(|| vec![(-10.0, 10.0); dim])
    }
}
