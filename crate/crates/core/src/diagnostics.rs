//! Non-fatal conditions reported alongside results.
//!
//! Every diagnostic is also forwarded to the `log` facade at `warn` level
//! when it is raised through [`Diagnostics::push`].

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    /// Training labels were all one class and no ridge was requested.
    SingleClassLabels { label: u8, ridge_used: f64 },
    /// A policy update was requested on a dataset without labeled positives.
    EmptyLabeledSet,
    /// Minibatch iterations skipped because no decision was sampled positive.
    SkippedIterations { count: usize },
    /// An IPS normalizer was zero; the estimate was reported as 0.
    ZeroNormalizer,
    /// The fair-threshold search bracket did not change sign.
    NoSignChange { gap_low: f64, gap_high: f64 },
    /// The lending-sweep collection produced no labels.
    NoLabels { threshold: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::SingleClassLabels { label, ridge_used } => write!(
                f,
                "all training labels are {label}; fitted with ridge {ridge_used}"
            ),
            Diagnostic::EmptyLabeledSet => write!(f, "no labeled positives; parameters unchanged"),
            Diagnostic::SkippedIterations { count } => {
                write!(f, "{count} iterations skipped (no sampled positive decisions)")
            }
            Diagnostic::ZeroNormalizer => write!(f, "IPS normalizer is zero; estimate set to 0"),
            Diagnostic::NoSignChange { gap_low, gap_high } => write!(
                f,
                "benefit gap does not change sign over the bracket ({gap_low}, {gap_high}); using unconstrained thresholds"
            ),
            Diagnostic::NoLabels { threshold } => {
                write!(f, "collection at threshold {threshold} produced no labels")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn push(&mut self, d: Diagnostic) {
        log::warn!("{d}");
        self.0.push(d);
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.0.extend(other.0);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter()
    }

    pub fn contains(&self, pred: impl Fn(&Diagnostic) -> bool) -> bool {
        self.0.iter().any(pred)
    }
}

/// A result value with the diagnostics raised while producing it.
#[derive(Debug, Clone)]
pub struct Fitted<T> {
    pub value: T,
    pub diagnostics: Diagnostics,
}

impl<T> Fitted<T> {
    pub fn new(value: T, diagnostics: Diagnostics) -> Self {
        Self { value, diagnostics }
    }
}
