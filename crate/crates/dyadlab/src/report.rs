//! Per-check verification records.
//!
//! Every suite in the crate reduces to rows of "computed left-hand side vs
//! computed right-hand side under a tolerance". A [`Check`] records one such
//! row; the CLI serializes arrays of them. Each row carries an `anchor`, a
//! stable identifier of the mathematical claim being exercised, drawn from
//! the registry in [`anchors`].

use serde::{Deserialize, Serialize};

/// Outcome of a single check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// One verification row: the claim identifier, both computed sides, their
/// ratio, the tolerance, and the outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
    pub notes: String,
}

impl Check {
    /// An inequality check: passes iff `lhs <= rhs * (1 + tolerance)`.
    pub fn inequality(id: impl Into<String>, anchor: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let status = if lhs <= rhs * (1.0 + tol) || (lhs == 0.0 && rhs == 0.0) {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            id: id.into(),
            anchor: anchor.to_string(),
            lhs,
            rhs,
            ratio: ratio(lhs, rhs),
            tolerance: tol,
            status,
            notes: String::new(),
        }
    }

    /// An identity check: passes iff `|lhs - rhs| <= tol * max(1, |rhs|)`.
    pub fn identity(id: impl Into<String>, anchor: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let status = if (lhs - rhs).abs() <= tol * rhs.abs().max(1.0) {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            id: id.into(),
            anchor: anchor.to_string(),
            lhs,
            rhs,
            ratio: ratio(lhs, rhs),
            tolerance: tol,
            status,
            notes: String::new(),
        }
    }

    /// A check that was not run, with the reason recorded in the notes.
    pub fn skipped(id: impl Into<String>, anchor: &str, notes: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            anchor: anchor.to_string(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            ratio: f64::NAN,
            tolerance: 0.0,
            status: CheckStatus::Skipped,
            notes: notes.into(),
        }
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs != 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Registry of claim identifiers used in reports.
pub mod anchors {
    pub const A1_DUAL_OPERATOR_NORM: &str = "a1-dual-operator-norm";
    pub const A1_DOMINATES_AINFTY: &str = "a1-dominates-ainfty";
    pub const AP_AT_LEAST_ONE: &str = "ap-at-least-one";
    pub const CARLESON_EMBEDDING: &str = "carleson-embedding";
    pub const SHRINKING_AVERAGE: &str = "shrinking-average";
    pub const SHRINKING_OSCILLATION: &str = "shrinking-oscillation";
    pub const HEIGHT_IDENTITY: &str = "height-identity";
    pub const GROWING_UNBOUNDED: &str = "growing-unbounded";
    pub const SPARSITY_WITNESS: &str = "sparsity-witness";
    pub const BMO_INCLUSION_ONE_INFTY: &str = "bmo-inclusion-one-infty";
    pub const BMO_INCLUSION_INFTY_ONE: &str = "bmo-inclusion-infty-one";
    pub const BMO_FROM_BOUNDED: &str = "bmo-from-bounded";
    pub const BMO_RECENTERING_FACTOR_TWO: &str = "bmo-recentering-factor-two";
    pub const BMO_SHARP_IDENTITY: &str = "bmo-sharp-identity";
    pub const BMO_WEAK_SHARP_IDENTITY: &str = "bmo-weak-sharp-identity";
    pub const BMO_WEAK_STRONG_EQUIV: &str = "bmo-weak-strong-equivalence";
    pub const SPARSE_BMO_ONE: &str = "sparse-bmo-one";
    pub const SPARSE_BMO_INFTY: &str = "sparse-bmo-infty";
    pub const SPARSE_BMO_ONE_WEAK: &str = "sparse-bmo-one-weak";
    pub const SPARSE_BMO_INFTY_WEAK: &str = "sparse-bmo-infty-weak";
    pub const SPARSE_BMO_PROOF_STEP: &str = "sparse-bmo-proof-step";
    pub const RDF_MAJORANT: &str = "rdf-majorant";
    pub const RDF_A1_BOUND: &str = "rdf-a1-bound";
    pub const RDF_NORM_DOUBLING: &str = "rdf-norm-doubling";
    pub const RDF_PAIRING: &str = "rdf-pairing";
    pub const FEFFERMAN_STEIN_ORDER: &str = "fefferman-stein-order";
    pub const EXTRAPOLATION_DUAL_CHAIN: &str = "extrapolation-dual-chain";
    pub const EXTRAPOLATION_NORM_CHAIN: &str = "extrapolation-norm-chain";
    pub const EXTRAPOLATION_HYPOTHESIS: &str = "extrapolation-hypothesis";
    pub const DOMINATION_MARGIN: &str = "domination-margin";
    pub const DOMINATION_SPARSITY: &str = "domination-sparsity";
    pub const OSCILLATION_DECAY: &str = "oscillation-decay";
    pub const POINTWISE_DILATED_SUM: &str = "pointwise-dilated-sum";
    pub const KERNEL_SMOOTHNESS: &str = "kernel-smoothness";
    pub const ANNULUS_DOMINATION: &str = "annulus-domination";
    pub const B_OMEGA_EMBEDDING: &str = "b-omega-embedding";
    pub const CZO_BMO_ONE: &str = "czo-bmo-one";
    pub const CZO_BMO_INFTY: &str = "czo-bmo-infty";
    pub const CONSTANT_IDENTITY: &str = "constant-identity";
    pub const DETERMINISM: &str = "determinism";

    /// Every anchor that may appear in a report.
    pub const ALL: &[&str] = &[
        A1_DUAL_OPERATOR_NORM,
        A1_DOMINATES_AINFTY,
        AP_AT_LEAST_ONE,
        CARLESON_EMBEDDING,
        SHRINKING_AVERAGE,
        SHRINKING_OSCILLATION,
        HEIGHT_IDENTITY,
        GROWING_UNBOUNDED,
        SPARSITY_WITNESS,
        BMO_INCLUSION_ONE_INFTY,
        BMO_INCLUSION_INFTY_ONE,
        BMO_FROM_BOUNDED,
        BMO_RECENTERING_FACTOR_TWO,
        BMO_SHARP_IDENTITY,
        BMO_WEAK_SHARP_IDENTITY,
        BMO_WEAK_STRONG_EQUIV,
        SPARSE_BMO_ONE,
        SPARSE_BMO_INFTY,
        SPARSE_BMO_ONE_WEAK,
        SPARSE_BMO_INFTY_WEAK,
        SPARSE_BMO_PROOF_STEP,
        RDF_MAJORANT,
        RDF_A1_BOUND,
        RDF_NORM_DOUBLING,
        RDF_PAIRING,
        FEFFERMAN_STEIN_ORDER,
        EXTRAPOLATION_DUAL_CHAIN,
        EXTRAPOLATION_NORM_CHAIN,
        EXTRAPOLATION_HYPOTHESIS,
        DOMINATION_MARGIN,
        DOMINATION_SPARSITY,
        OSCILLATION_DECAY,
        POINTWISE_DILATED_SUM,
        KERNEL_SMOOTHNESS,
        ANNULUS_DOMINATION,
        B_OMEGA_EMBEDDING,
        CZO_BMO_ONE,
        CZO_BMO_INFTY,
        CONSTANT_IDENTITY,
        DETERMINISM,
    ];

    pub fn is_known(anchor: &str) -> bool {
        ALL.contains(&anchor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inequality_semantics() {
        assert!(Check::inequality("t", anchors::CARLESON_EMBEDDING, 1.0, 1.0, 1e-12).passed());
        assert!(!Check::inequality("t", anchors::CARLESON_EMBEDDING, 1.1, 1.0, 1e-12).passed());
        // 0 <= 0 is a vacuous pass
        assert!(Check::inequality("t", anchors::CARLESON_EMBEDDING, 0.0, 0.0, 0.0).passed());
    }

    #[test]
    fn identity_semantics() {
        assert!(Check::identity("t", anchors::A1_DUAL_OPERATOR_NORM, 1.0 + 5e-13, 1.0, 1e-12).passed());
        assert!(!Check::identity("t", anchors::A1_DUAL_OPERATOR_NORM, 1.0 + 5e-12, 1.0, 1e-12).passed());
    }

    #[test]
    fn anchors_resolve() {
        assert!(anchors::is_known(anchors::RDF_MAJORANT));
        assert!(!anchors::is_known("made-up"));
    }
}
