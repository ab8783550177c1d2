use super::Individual;
use crate::error::{Error, Result};
use crate::math::{logit, sigmoid};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Cost at which the first synthetic setting's optimal boundary sits at `x = -0.3`.
pub const SETTING1_COST: f64 = 0.142;
pub const SETTING1_BOUNDARY: f64 = -0.3;
pub const SETTING2_COST: f64 = 0.55;

/// Named parametric forms for `P(y=1|x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "snake_case")]
pub enum ConditionalCurve {
    /// `σ(slope·(x − midpoint))^exponent`. Monotone; an exponent above one
    /// makes the log-odds concave, so a logistic fit is miscalibrated.
    PoweredSigmoid {
        slope: f64,
        midpoint: f64,
        exponent: f64,
    },
    /// `ramp_height·σ(ramp_slope·(x − ramp_midpoint)) + bump_height·exp(−(x − bump_center)²/(2·bump_width²))`.
    BumpAndRamp {
        ramp_height: f64,
        ramp_slope: f64,
        ramp_midpoint: f64,
        bump_height: f64,
        bump_center: f64,
        bump_width: f64,
    },
    /// `σ(logit(anchor_value) + linear·u + amplitude·(e^{rate·u} − 1))` with
    /// `u = x − anchor`. Increasing with convex log-odds, so a logistic fit
    /// on the upper tail underestimates the lower tail.
    ConvexLogit {
        anchor: f64,
        anchor_value: f64,
        linear: f64,
        amplitude: f64,
        rate: f64,
    },
    /// `intercept + slope·x`, valid only where it stays inside `[0, 1]`.
    Linear { intercept: f64, slope: f64 },
    Constant { p: f64 },
}

impl ConditionalCurve {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ConditionalCurve::PoweredSigmoid {
                slope,
                midpoint,
                exponent,
            } => sigmoid(slope * (x - midpoint)).powf(exponent),
            ConditionalCurve::BumpAndRamp {
                ramp_height,
                ramp_slope,
                ramp_midpoint,
                bump_height,
                bump_center,
                bump_width,
            } => {
                let z = (x - bump_center) / bump_width;
                ramp_height * sigmoid(ramp_slope * (x - ramp_midpoint))
                    + bump_height * (-0.5 * z * z).exp()
            }
            ConditionalCurve::ConvexLogit {
                anchor,
                anchor_value,
                linear,
                amplitude,
                rate,
            } => {
                let u = x - anchor;
                sigmoid(logit(anchor_value) + linear * u + amplitude * (rate * u).exp_m1())
            }
            ConditionalCurve::Linear { intercept, slope } => intercept + slope * x,
            ConditionalCurve::Constant { p } => p,
        }
    }

    /// Powered sigmoid whose midpoint is solved so that `eval(at) == value`.
    pub fn powered_sigmoid_through(slope: f64, exponent: f64, at: f64, value: f64) -> Self {
        let midpoint = at - logit(value.powf(1.0 / exponent)) / slope;
        ConditionalCurve::PoweredSigmoid {
            slope,
            midpoint,
            exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSettingSpec {
    pub group_means: [f64; 2],
    pub group_sd: f64,
    pub truncation: Option<(f64, f64)>,
    pub conditional: ConditionalCurve,
    /// Probability of `s = 1`.
    pub group_prior: f64,
}

impl SyntheticSettingSpec {
    /// Single-feature setting with a monotone but miscalibrated conditional
    /// whose optimal boundary under [`SETTING1_COST`] is `x = -0.3`.
    pub fn setting1() -> Self {
        Self {
            group_means: [-0.5, 0.5],
            group_sd: 3.5,
            truncation: Some((-0.8, 0.8)),
            conditional: ConditionalCurve::ConvexLogit {
                anchor: SETTING1_BOUNDARY,
                anchor_value: SETTING1_COST,
                linear: 1.0,
                amplitude: 0.005,
                rate: 6.0,
            },
            group_prior: 0.5,
        }
    }

    /// Single-feature setting whose conditional exceeds [`SETTING2_COST`] on
    /// two disjoint intervals.
    pub fn setting2() -> Self {
        Self {
            group_means: [-1.5, 1.5],
            group_sd: 3.5,
            truncation: None,
            conditional: ConditionalCurve::BumpAndRamp {
                ramp_height: 0.9,
                ramp_slope: 1.5,
                ramp_midpoint: 5.0,
                bump_height: 0.65,
                bump_center: -0.5,
                bump_width: 1.2,
            },
            group_prior: 0.5,
        }
    }

    /// Interval on which the conditional must stay inside `[0, 1]`.
    pub fn reachable_range(&self) -> (f64, f64) {
        match self.truncation {
            Some(r) => r,
            None => {
                let lo = self.group_means[0].min(self.group_means[1]) - 10.0 * self.group_sd;
                let hi = self.group_means[0].max(self.group_means[1]) + 10.0 * self.group_sd;
                (lo, hi)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.group_sd > 0.0 && self.group_sd.is_finite()) {
            return Err(Error::config("group_sd must be positive"));
        }
        if !(self.group_prior > 0.0 && self.group_prior < 1.0) {
            return Err(Error::config("group_prior must lie in (0, 1)"));
        }
        if let Some((lo, hi)) = self.truncation {
            if !(lo < hi) {
                return Err(Error::config("truncation interval is empty"));
            }
        }
        let (lo, hi) = self.reachable_range();
        let steps = 10_000;
        for i in 0..=steps {
            let x = lo + (hi - lo) * i as f64 / steps as f64;
            let p = self.conditional.eval(x);
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::config(format!(
                    "conditional evaluates to {p} at x = {x}, outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    spec: SyntheticSettingSpec,
    normals: [Normal<f64>; 2],
    group: Bernoulli,
}

impl SyntheticEnv {
    pub fn spec(&self) -> &SyntheticSettingSpec {
        &self.spec
    }

    pub(crate) fn sample_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> Individual {
        let s = u8::from(self.group.sample(rng));
        let normal = &self.normals[s as usize];
        let x = match self.spec.truncation {
            // rejection keeps the draw exact
            Some((lo, hi)) => loop {
                let x = normal.sample(rng);
                if (lo..=hi).contains(&x) {
                    break x;
                }
            },
            None => normal.sample(rng),
        };
        Individual::new(vec![x], s)
    }

    pub(crate) fn conditional(&self, individual: &Individual) -> f64 {
        self.spec.conditional.eval(individual.x[0]).clamp(0.0, 1.0)
    }
}

pub fn make_synthetic_env(spec: SyntheticSettingSpec) -> Result<super::Environment> {
    spec.validate()?;
    let normals = [
        Normal::new(spec.group_means[0], spec.group_sd).map_err(|e| Error::config(e.to_string()))?,
        Normal::new(spec.group_means[1], spec.group_sd).map_err(|e| Error::config(e.to_string()))?,
    ];
    let group = Bernoulli::new(spec.group_prior).map_err(|e| Error::config(e.to_string()))?;
    Ok(super::Environment::Synthetic(SyntheticEnv {
        spec,
        normals,
        group,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cond(env: &super::super::Environment, x: f64) -> f64 {
        env.true_conditional(&Individual::new(vec![x], 0)).unwrap()
    }

    #[test]
    fn setting1_pinned_at_boundary() {
        let env = make_synthetic_env(SyntheticSettingSpec::setting1()).unwrap();
        assert!((cond(&env, -0.3) - SETTING1_COST).abs() < 1e-12);
        // strictly monotone, single crossing at the boundary
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1600 {
            let x = -0.8 + i as f64 * 0.001;
            let p = cond(&env, x);
            assert!(p > prev);
            if (x - SETTING1_BOUNDARY).abs() > 1e-9 {
                assert_eq!(p >= SETTING1_COST, x > SETTING1_BOUNDARY, "x = {x}");
            }
            prev = p;
        }
    }

    #[test]
    fn setting1_samples_truncated() {
        let env = make_synthetic_env(SyntheticSettingSpec::setting1()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = env.sample_individuals(100_000, &mut rng).unwrap();
        assert!(xs.iter().all(|i| (-0.8..=0.8).contains(&i.x[0])));
        let frac1 = xs.iter().filter(|i| i.s == 1).count() as f64 / xs.len() as f64;
        assert!((frac1 - 0.5).abs() <= 3.0 * (0.25f64 / 1e5).sqrt());
    }

    #[test]
    fn setting2_has_two_positive_intervals() {
        let env = make_synthetic_env(SyntheticSettingSpec::setting2()).unwrap();
        let (lo, hi) = (-30.0, 30.0);
        let mut intervals = 0;
        let mut inside = false;
        let n = 60_000;
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let above = cond(&env, x) >= SETTING2_COST;
            if above && !inside {
                intervals += 1;
            }
            inside = above;
        }
        assert_eq!(intervals, 2);
    }

    #[test]
    fn rejects_out_of_range_conditional() {
        let mut spec = SyntheticSettingSpec::setting1();
        spec.conditional = ConditionalCurve::Linear {
            intercept: 0.5,
            slope: 1.0,
        };
        assert!(make_synthetic_env(spec).is_err());
        let mut spec = SyntheticSettingSpec::setting1();
        spec.group_sd = 0.0;
        assert!(make_synthetic_env(spec).is_err());
    }

    #[test]
    fn constant_conditional() {
        let mut spec = SyntheticSettingSpec::setting2();
        spec.conditional = ConditionalCurve::Constant { p: 1.0 };
        let env = make_synthetic_env(spec).unwrap();
        for x in [-5.0, 0.0, 7.0] {
            assert_eq!(cond(&env, x), 1.0);
        }
    }

    #[test]
    fn seeded_determinism() {
        let env = make_synthetic_env(SyntheticSettingSpec::setting2()).unwrap();
        let a = env
            .sample_individuals(500, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let b = env
            .sample_individuals(500, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(a, b);
    }
}
