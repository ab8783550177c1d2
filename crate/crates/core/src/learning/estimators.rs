use super::{BenefitKind, ExperimentConfig, Normalization};
use crate::diagnostics::{Diagnostic, Diagnostics, Fitted};
use crate::environments::{CollectedData, LabeledExample};
use crate::error::{Error, Result};
use crate::math::{axpy, dot};
use crate::policies::{FeatureMap, Policy, PolicyParams};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Labeled positives with their collection propensities and the factors
/// that turn per-example terms into IPS estimates.
#[derive(Debug, Clone, Copy)]
pub struct Entry<'a> {
    pub example: &'a LabeledExample,
    pub propensity: f64,
    /// Index of the collected dataset the example came from.
    pub dataset: usize,
    pub utility_scale: f64,
    pub benefit_scale: f64,
}

/// The labeled data an update consumes: one collected dataset (iterative)
/// or a mixture of several (aggregated).
#[derive(Debug, Clone)]
pub struct TrainingData<'a> {
    entries: Vec<Entry<'a>>,
    normalization: Normalization,
    /// Proposals per group for every source dataset.
    proposed: Vec<[usize; 2]>,
}

impl<'a> TrainingData<'a> {
    pub fn iterative(data: &'a CollectedData, normalization: Normalization) -> Result<Self> {
        Self::aggregated(std::slice::from_ref(data), normalization)
    }

    /// In `proposed` mode the estimate is the uniform mixture of the
    /// per-dataset estimators; in `positives` mode the datasets are pooled.
    pub fn aggregated(datasets: &'a [CollectedData], normalization: Normalization) -> Result<Self> {
        let k = datasets.len() as f64;
        let total_labeled: usize = datasets.iter().map(|d| d.labeled.len()).sum();
        let mut entries = Vec::with_capacity(total_labeled);
        let mut index = 0;
        for (j, data) in datasets.iter().enumerate() {
            for p in &data.labeled {
                if !(p.propensity > 0.0) {
                    return Err(Error::ZeroPropensity {
                        index,
                        propensity: p.propensity,
                    });
                }
                let (u, b) = match normalization {
                    Normalization::Proposed => (
                        1.0 / (k * data.proposed() as f64),
                        1.0 / (k * data.per_group_proposed[p.example.individual.s as usize] as f64),
                    ),
                    Normalization::Positives => {
                        let n = total_labeled as f64;
                        (1.0 / n, 1.0 / n)
                    }
                };
                entries.push(Entry {
                    example: &p.example,
                    propensity: p.propensity,
                    dataset: j,
                    utility_scale: u,
                    benefit_scale: b,
                });
                index += 1;
            }
        }
        Ok(Self {
            entries,
            normalization,
            proposed: datasets.iter().map(|d| d.per_group_proposed).collect(),
        })
    }

    pub fn entries(&self) -> &[Entry<'a>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn datasets(&self) -> usize {
        self.proposed.len()
    }
}

/// Estimator knobs shared by value and gradient estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub cost: f64,
    pub benefit: BenefitKind,
    pub weight_clip: Option<f64>,
    pub exact_inner_expectation: bool,
}

impl From<&ExperimentConfig> for EstimatorSettings {
    fn from(c: &ExperimentConfig) -> Self {
        Self {
            cost: c.cost,
            benefit: c.benefit,
            weight_clip: c.weight_clip,
            exact_inner_expectation: c.exact_inner_expectation,
        }
    }
}

impl EstimatorSettings {
    pub fn new(cost: f64, benefit: BenefitKind) -> Self {
        Self {
            cost,
            benefit,
            weight_clip: None,
            exact_inner_expectation: false,
        }
    }

    #[inline]
    fn weight(&self, propensity: f64) -> f64 {
        let w = 1.0 / propensity;
        match self.weight_clip {
            Some(clip) => w.min(clip),
            None => w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpsValue {
    pub utility: f64,
    pub benefits: [f64; 2],
    pub utility_se: f64,
    pub benefit_se: [f64; 2],
}

#[derive(Default, Clone, Copy)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    /// Variance of the mean of `m` terms whose nonzero entries were added.
    fn var_of_mean(&self, m: usize) -> f64 {
        if m < 2 {
            return 0.0;
        }
        let m = m as f64;
        let mean = self.sum / m;
        ((self.sum_sq - m * mean * mean) / (m - 1.0)).max(0.0) / m
    }
}

/// Off-policy estimates of `u(π)` and `b^s(π)` from selectively labeled
/// data, with standard errors treating proposals as i.i.d.
pub fn ips_value(data: &TrainingData, target: &Policy, settings: &EstimatorSettings) -> Fitted<IpsValue> {
    let mut diagnostics = Diagnostics::default();
    let mut value = IpsValue {
        utility: 0.0,
        benefits: [0.0; 2],
        utility_se: 0.0,
        benefit_se: [0.0; 2],
    };
    if data.is_empty() {
        if data.normalization == Normalization::Positives {
            diagnostics.push(Diagnostic::ZeroNormalizer);
        }
        return Fitted::new(value, diagnostics);
    }
    let k = data.datasets();
    let mut utility = vec![Moments::default(); k];
    let mut benefit = vec![[Moments::default(); 2]; k];
    let mut pooled_u = Moments::default();
    let mut pooled_b = [Moments::default(); 2];
    for e in &data.entries {
        let p = target.prob_positive(&e.example.individual);
        let y = e.example.y as f64;
        let s = e.example.individual.s as usize;
        let w = settings.weight(e.propensity);
        let gu = w * p * (y - settings.cost);
        let gb = w * settings.benefit.expected(p, y);
        value.utility += e.utility_scale * gu;
        value.benefits[s] += e.benefit_scale * gb;
        utility[e.dataset].add(gu);
        benefit[e.dataset][s].add(gb);
        pooled_u.add(gu);
        pooled_b[s].add(gb);
    }
    match data.normalization {
        Normalization::Proposed => {
            let kf = (k * k) as f64;
            let mut var_u = 0.0;
            let mut var_b = [0.0; 2];
            for (j, counts) in data.proposed.iter().enumerate() {
                var_u += utility[j].var_of_mean(counts[0] + counts[1]) / kf;
                for s in 0..2 {
                    var_b[s] += benefit[j][s].var_of_mean(counts[s]) / kf;
                }
            }
            value.utility_se = var_u.sqrt();
            value.benefit_se = [var_b[0].sqrt(), var_b[1].sqrt()];
        }
        Normalization::Positives => {
            let n = data.len();
            value.utility_se = pooled_u.var_of_mean(n).sqrt();
            for s in 0..2 {
                value.benefit_se[s] = pooled_b[s].var_of_mean(n).sqrt();
            }
        }
    }
    Fitted::new(value, diagnostics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub grad_utility: Vec<f64>,
    pub grad_benefit: [Vec<f64>; 2],
    pub benefit_estimates: [f64; 2],
    /// Examples whose sampled decision `d ~ π_θ` was positive.
    pub positives_used: usize,
}

impl GradientEstimate {
    fn zeros(m: usize) -> Self {
        Self {
            grad_utility: vec![0.0; m],
            grad_benefit: [vec![0.0; m], vec![0.0; m]],
            benefit_estimates: [0.0; 2],
            positives_used: 0,
        }
    }

    fn scale(&mut self, factor: f64) {
        let [g0, g1] = &mut self.grad_benefit;
        for v in self
            .grad_utility
            .iter_mut()
            .chain(g0.iter_mut())
            .chain(g1.iter_mut())
            .chain(self.benefit_estimates.iter_mut())
        {
            *v *= factor;
        }
    }
}

/// Scratch space reused across gradient evaluations.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    phi: Vec<f64>,
}

/// Sums of scaled per-example gradient terms over `rows`.
pub(crate) fn accumulate<R: Rng + ?Sized>(
    data: &TrainingData,
    rows: impl Iterator<Item = usize>,
    params: &PolicyParams,
    fmap: &FeatureMap,
    settings: &EstimatorSettings,
    work: &mut Workspace,
    rng: &mut R,
) -> GradientEstimate {
    let m = params.theta.len();
    let mut est = GradientEstimate::zeros(m);
    for i in rows {
        let e = &data.entries[i];
        fmap.apply_into(&e.example.individual, &mut work.phi);
        let phi = &work.phi;
        let z = dot(phi, &params.theta);
        let p = params.prob_from_score(z);
        let a = params.score_factor(z);
        let d = u8::from(p >= 1.0 || rng.random::<f64>() < p);
        est.positives_used += usize::from(d);
        let y = e.example.y;
        let s = e.example.individual.s as usize;
        let w = settings.weight(e.propensity);
        // E_d[d]·(y − c)·∇log π = π·(y − c)·a·φ
        let gu = e.utility_scale * w * p * (y as f64 - settings.cost) * a;
        if gu != 0.0 {
            axpy(&mut est.grad_utility, gu, phi);
        }
        let f = if settings.exact_inner_expectation {
            settings.benefit.expected(p, y as f64)
        } else {
            settings.benefit.f(d, y)
        };
        if f != 0.0 {
            let fb = e.benefit_scale * w * f;
            est.benefit_estimates[s] += fb;
            if a != 0.0 {
                axpy(&mut est.grad_benefit[s], fb * a, phi);
            }
        }
    }
    est
}

/// Score-function estimate of `∇u` and `∇b^s` at `params` over all of
/// `data`. Benefit terms use a decision sampled from `π_θ` per example
/// unless `exact_inner_expectation` is set.
pub fn ips_gradient<R: Rng + ?Sized>(
    data: &TrainingData,
    params: &PolicyParams,
    fmap: &FeatureMap,
    settings: &EstimatorSettings,
    rng: &mut R,
) -> Fitted<GradientEstimate> {
    let mut diagnostics = Diagnostics::default();
    if data.is_empty() && data.normalization == Normalization::Positives {
        diagnostics.push(Diagnostic::ZeroNormalizer);
    }
    let mut work = Workspace::default();
    let est = accumulate(data, 0..data.len(), params, fmap, settings, &mut work, rng);
    Fitted::new(est, diagnostics)
}

/// `∇u − λ(b⁰ − b¹)(∇b⁰ − ∇b¹)`, the ascent direction of `u − (λ/2)(b⁰ − b¹)²`.
pub fn grad_objective(est: &GradientEstimate, lambda: f64) -> Vec<f64> {
    let gap = est.benefit_estimates[0] - est.benefit_estimates[1];
    let k = lambda * gap;
    est.grad_utility
        .iter()
        .zip(est.grad_benefit[0].iter().zip(&est.grad_benefit[1]))
        .map(|(gu, (g0, g1))| gu - k * (g0 - g1))
        .collect()
}

/// Objective gradient from two independent estimates: the penalty pairs the
/// gap of one half with the benefit gradient of the other, so the product
/// carries no covariance bias.
pub fn grad_objective_cross_fit(a: &GradientEstimate, b: &GradientEstimate, lambda: f64) -> Vec<f64> {
    let gap_a = a.benefit_estimates[0] - a.benefit_estimates[1];
    let gap_b = b.benefit_estimates[0] - b.benefit_estimates[1];
    (0..a.grad_utility.len())
        .map(|i| {
            let gu = 0.5 * (a.grad_utility[i] + b.grad_utility[i]);
            let da = a.grad_benefit[0][i] - a.grad_benefit[1][i];
            let db = b.grad_benefit[0][i] - b.grad_benefit[1][i];
            gu - 0.5 * lambda * (gap_a * db + gap_b * da)
        })
        .collect()
}

pub(crate) fn scaled(mut est: GradientEstimate, factor: f64) -> GradientEstimate {
    est.scale(factor);
    est
}
