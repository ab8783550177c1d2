//! Exact evaluation by enumeration on finite discrete environments.
//!
//! This is the ground truth used to check the Monte Carlo estimators.

use crate::environments::Individual;
use crate::error::{Error, Result};
use crate::learning::BenefitKind;
use crate::policies::Policy;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

const MASS_TOLERANCE: f64 = 1e-12;
/// Largest support for exhaustive enumeration of deterministic policies.
pub const MAX_EXHAUSTIVE_SUPPORT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePoint {
    pub x: Vec<f64>,
    pub s: u8,
    /// `P(x, s)`.
    pub prob: f64,
    /// `P(y=1 | x, s)`.
    pub p_y1: f64,
}

impl DiscretePoint {
    pub fn new(x: Vec<f64>, s: u8, prob: f64, p_y1: f64) -> Self {
        Self { x, s, prob, p_y1 }
    }

    pub fn individual(&self) -> Individual {
        Individual::new(self.x.clone(), self.s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<DiscretePoint>", into = "Vec<DiscretePoint>")]
pub struct DiscreteEnv {
    points: Vec<DiscretePoint>,
    sampler: WeightedIndex<f64>,
}

impl TryFrom<Vec<DiscretePoint>> for DiscreteEnv {
    type Error = Error;
    fn try_from(points: Vec<DiscretePoint>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<DiscreteEnv> for Vec<DiscretePoint> {
    fn from(env: DiscreteEnv) -> Self {
        env.points
    }
}

impl PartialEq for DiscreteEnv {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
    }
}

impl DiscreteEnv {
    pub fn new(points: Vec<DiscretePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("discrete environment has no support points"));
        }
        let dim = points[0].x.len();
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != dim {
                return Err(Error::config(format!("support point {i} has {} features, expected {dim}", p.x.len())));
            }
            if p.s > 1 {
                return Err(Error::config(format!("support point {i} has group {}", p.s)));
            }
            if !(p.prob >= 0.0 && p.prob.is_finite()) {
                return Err(Error::config(format!("support point {i} has probability {}", p.prob)));
            }
            if !(0.0..=1.0).contains(&p.p_y1) {
                return Err(Error::config(format!("support point {i} has conditional {}", p.p_y1)));
            }
            if p.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("support point {i} has a non-finite feature")));
            }
        }
        let total: f64 = points.iter().map(|p| p.prob).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::config(format!("support probabilities sum to {total}, not 1")));
        }
        let sampler = WeightedIndex::new(points.iter().map(|p| p.prob))
            .map_err(|e| Error::config(format!("support probabilities: {e}")))?;
        Ok(Self { points, sampler })
    }

    pub fn points(&self) -> &[DiscretePoint] {
        &self.points
    }

    pub fn feature_dim(&self) -> usize {
        self.points[0].x.len()
    }

    pub fn group_mass(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for p in &self.points {
            m[p.s as usize] += p.prob;
        }
        m
    }

    pub fn sample_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> Individual {
        self.points[self.sampler.sample(rng)].individual()
    }

    fn index_of(&self, individual: &Individual) -> Option<usize> {
        self.points
            .iter()
            .position(|p| p.s == individual.s && p.x == individual.x)
    }

    pub fn conditional(&self, individual: &Individual) -> Result<f64> {
        self.index_of(individual)
            .map(|i| self.points[i].p_y1)
            .ok_or_else(|| Error::config(format!("individual {:?} is not in the support", individual.x)))
    }

    /// `π(d=1|x,s)` at every support point.
    pub fn decision_probs(&self, policy: &Policy) -> Vec<f64> {
        self.points.iter().map(|p| policy.prob_positive(&p.individual())).collect()
    }

    /// Every support point replicated `scale·P(x,s)·P(y|x,s)` times per
    /// label, for full-support evaluation samples. Masses must be
    /// multiples of `1/scale` for the frequencies to be exact.
    pub fn enumerate_sample(&self, scale: usize) -> Vec<crate::environments::LabeledExample> {
        let mut out = Vec::new();
        for p in &self.points {
            let n1 = (p.prob * p.p_y1 * scale as f64).round() as usize;
            let n0 = (p.prob * (1.0 - p.p_y1) * scale as f64).round() as usize;
            for (y, n) in [(1u8, n1), (0u8, n0)] {
                for _ in 0..n {
                    out.push(crate::environments::LabeledExample {
                        individual: p.individual(),
                        y,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub utility: f64,
    pub benefits: [f64; 2],
    /// `u − (λ/2)(b⁰ − b¹)²`.
    pub objective: f64,
}

impl ExactValue {
    pub fn gap(&self) -> f64 {
        self.benefits[0] - self.benefits[1]
    }
}

/// Exact value of per-point decision probabilities. A group without mass
/// gets benefit 0.
pub fn exact_value_of(probs: &[f64], env: &DiscreteEnv, cost: f64, lambda: f64, kind: BenefitKind) -> ExactValue {
    let mut utility = 0.0;
    let mut benefit = [0.0; 2];
    for (p, &pi) in env.points.iter().zip(probs) {
        utility += p.prob * pi * (p.p_y1 - cost);
        benefit[p.s as usize] += p.prob * kind.expected(pi, p.p_y1);
    }
    let mass = env.group_mass();
    for s in 0..2 {
        benefit[s] = if mass[s] > 0.0 { benefit[s] / mass[s] } else { 0.0 };
    }
    let gap = benefit[0] - benefit[1];
    ExactValue {
        utility,
        benefits: benefit,
        objective: utility - 0.5 * lambda * gap * gap,
    }
}

/// `(u, b⁰, b¹, v)` of `policy` by enumeration.
pub fn exact_value(policy: &Policy, env: &DiscreteEnv, cost: f64, lambda: f64, kind: BenefitKind) -> ExactValue {
    exact_value_of(&env.decision_probs(policy), env, cost, lambda, kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedAtom {
    pub point: usize,
    pub y: u8,
    pub mass: f64,
}

/// The distribution of labeled triples observed under a collecting policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Induced {
    /// Atoms with positive mass, normalized to sum to 1.
    pub atoms: Vec<InducedAtom>,
    /// `Z = Σ P(x,s) π₀(1|x,s)`.
    pub normalizer: f64,
    /// `Z_s = E[π₀(1|x,s) | s]`.
    pub group_normalizers: [f64; 2],
}

/// `P_π₀(x,s,y) ∝ P(y|x,s) π₀(1|x,s) P(x,s)`.
pub fn exact_induced(env: &DiscreteEnv, policy: &Policy) -> Result<Induced> {
    exact_induced_of(env, &env.decision_probs(policy))
}

/// [`exact_induced`] for explicit per-point decision probabilities.
pub fn exact_induced_of(env: &DiscreteEnv, probs: &[f64]) -> Result<Induced> {
    let z: f64 = env.points.iter().zip(probs).map(|(p, pi)| p.prob * pi).sum();
    if z <= 0.0 {
        return Err(Error::EmptyData("collecting policy never decides positively on the support".into()));
    }
    let mass = env.group_mass();
    let mut zs = [0.0; 2];
    let mut atoms = Vec::new();
    for (i, (p, &pi)) in env.points.iter().zip(probs).enumerate() {
        zs[p.s as usize] += p.prob * pi;
        for (y, py) in [(0u8, 1.0 - p.p_y1), (1u8, p.p_y1)] {
            let m = py * pi * p.prob;
            if m > 0.0 {
                atoms.push(InducedAtom { point: i, y, mass: m / z });
            }
        }
    }
    for s in 0..2 {
        zs[s] = if mass[s] > 0.0 { zs[s] / mass[s] } else { 0.0 };
    }
    Ok(Induced {
        atoms,
        normalizer: z,
        group_normalizers: zs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactOptimal {
    /// `π*(1|x,s) = 1[P(y=1|x,s) ≥ c]` per support point.
    pub decisions: Vec<u8>,
    /// Support indices with `π* = 0`.
    pub w0: Vec<usize>,
    /// Support indices with `π* = 1`.
    pub w1: Vec<usize>,
    pub utility: f64,
}

impl ExactOptimal {
    pub fn probs(&self) -> Vec<f64> {
        self.decisions.iter().map(|&d| d as f64).collect()
    }

    /// 1 on `W₁`, `1/n` elsewhere: an exploring policy approaching `π*`.
    pub fn exploring_approximation(&self, n: usize) -> Vec<f64> {
        let eps = 1.0 / n as f64;
        self.decisions.iter().map(|&d| if d == 1 { 1.0 } else { eps }).collect()
    }
}

pub fn exact_optimal(env: &DiscreteEnv, cost: f64) -> ExactOptimal {
    let decisions: Vec<u8> = env.points.iter().map(|p| u8::from(p.p_y1 >= cost)).collect();
    let (w1, w0): (Vec<usize>, Vec<usize>) = (0..decisions.len()).partition(|&i| decisions[i] == 1);
    let probs: Vec<f64> = decisions.iter().map(|&d| d as f64).collect();
    let utility = exact_value_of(&probs, env, cost, 0.0, BenefitKind::DemographicParity).utility;
    ExactOptimal {
        decisions,
        w0,
        w1,
        utility,
    }
}

/// Best utility over all `2^|support|` deterministic policies.
pub fn best_deterministic_utility(env: &DiscreteEnv, cost: f64) -> Result<f64> {
    let n = env.points.len();
    if n > MAX_EXHAUSTIVE_SUPPORT {
        return Err(Error::config(format!(
            "support of {n} points exceeds the exhaustive limit {MAX_EXHAUSTIVE_SUPPORT}"
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        let probs: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
        best = best.max(exact_value_of(&probs, env, cost, 0.0, BenefitKind::DemographicParity).utility);
    }
    Ok(best)
}

/// A random environment with `support` distinct one-dimensional points
/// (both groups present when `support ≥ 2`) and conditionals in
/// `[0.05, 0.95]`.
pub fn random_discrete_env<R: Rng + ?Sized>(support: usize, rng: &mut R) -> Result<DiscreteEnv> {
    if support == 0 {
        return Err(Error::config("support must hold at least one point"));
    }
    let raw: Vec<f64> = (0..support).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let points = raw
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let x = -2.0 + 4.0 * (i as f64 + rng.random_range(0.0..0.9)) / support as f64;
            let s = if i < 2 { i as u8 } else { u8::from(rng.random_bool(0.5)) };
            DiscretePoint::new(vec![x], s, w / total, rng.random_range(0.05..0.95))
        })
        .collect();
    DiscreteEnv::new(points)
}
