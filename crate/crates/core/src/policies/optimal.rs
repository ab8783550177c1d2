use super::Policy;
use crate::diagnostics::{Diagnostic, Diagnostics, Fitted};
use crate::environments::{Environment, Individual};
use crate::error::{Error, Result};
use crate::learning::BenefitKind;
use crate::metrics::{fairness_violation, EvalSample};
use std::sync::Arc;

const GAP_TOLERANCE: f64 = 1e-3;
const MAX_BISECTIONS: usize = 60;

/// `1[P(y=1|x,s) ≥ c_s]` using the environment's true conditional.
#[derive(Debug, Clone)]
pub struct OptimalPolicy {
    env: Arc<Environment>,
    pub cost: f64,
    pub group_thresholds: [f64; 2],
    pub benefit: Option<BenefitKind>,
}

impl OptimalPolicy {
    /// Offsets `δ_s = c_s − c`.
    pub fn offsets(&self) -> [f64; 2] {
        [self.group_thresholds[0] - self.cost, self.group_thresholds[1] - self.cost]
    }

    pub(crate) fn decide(&self, individual: &Individual) -> f64 {
        let p = self
            .env
            .true_conditional(individual)
            .expect("individual outside the optimal policy's environment");
        if p >= self.group_thresholds[individual.s as usize] {
            1.0
        } else {
            0.0
        }
    }

    fn with_thresholds(&self, thresholds: [f64; 2]) -> Self {
        Self {
            group_thresholds: thresholds,
            ..self.clone()
        }
    }
}

/// Threshold rule on the true conditional. Without a benefit kind the
/// thresholds are `(c, c)`; with one, a shared offset `δ` is applied as
/// `(c + δ, c − δ)` and bisected until the benefit gap on `eval_sample` is
/// within `1e-3` (or 60 halvings).
pub fn make_optimal_policy(
    env: &Environment,
    cost: f64,
    benefit: Option<BenefitKind>,
    eval_sample: &EvalSample,
) -> Result<Fitted<OptimalPolicy>> {
    if !env.has_conditional() {
        return Err(Error::ConditionalUnavailable);
    }
    if !(cost > 0.0 && cost < 1.0) {
        return Err(Error::config("cost must lie in (0, 1)"));
    }
    let base = OptimalPolicy {
        env: Arc::new(env.clone()),
        cost,
        group_thresholds: [cost, cost],
        benefit,
    };
    let mut diagnostics = Diagnostics::default();
    let Some(kind) = benefit else {
        return Ok(Fitted::new(base, diagnostics));
    };

    let gap = |delta: f64| -> Result<f64> {
        let policy = Policy::Optimal(base.with_thresholds([cost + delta, cost - delta]));
        fairness_violation(&policy, eval_sample, kind)
    };
    let reach = cost.min(1.0 - cost) * (1.0 - 1e-9);
    let (mut lo, mut hi) = (-reach, reach);
    let (g_lo, g_hi) = (gap(lo)?, gap(hi)?);
    if g_lo.abs() > GAP_TOLERANCE && g_hi.abs() > GAP_TOLERANCE && g_lo.signum() == g_hi.signum() {
        diagnostics.push(Diagnostic::NoSignChange {
            gap_low: g_lo,
            gap_high: g_hi,
        });
        return Ok(Fitted::new(base, diagnostics));
    }
    // the gap is nonincreasing in δ: raising c₀ lowers b⁰, lowering c₁ raises b¹
    let mut best = if g_lo.abs() <= g_hi.abs() { (lo, g_lo) } else { (hi, g_hi) };
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid)?;
        if g.abs() < best.1.abs() || (g.abs() == best.1.abs() && mid.abs() < best.0.abs()) {
            best = (mid, g);
        }
        if g.abs() <= GAP_TOLERANCE {
            best = (mid, g);
            break;
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = best.0;
    Ok(Fitted::new(base.with_thresholds([cost + delta, cost - delta]), diagnostics))
}
