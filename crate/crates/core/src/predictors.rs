//! Logistic predictive models `Q(y=1|x,s) = σ(φᵀw)` fit by L2-regularized
//! maximum likelihood, with k-fold cross-validation over the ridge strength.

use crate::diagnostics::{Diagnostic, Diagnostics, Fitted};
use crate::environments::{Individual, LabeledExample};
use crate::error::{Error, Result};
use crate::math::{axpy, dot, log_sigmoid, sigmoid};
use crate::policies::FeatureMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Ridge used when labels are single-class and no regularization was asked for.
pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub weights: Vec<f64>,
    pub regularization: f64,
}

impl Predictor {
    pub fn new(weights: Vec<f64>) -> Self {
        Self {
            weights,
            regularization: 0.0,
        }
    }

    pub fn predict_prob(&self, fmap: &FeatureMap, individual: &Individual) -> f64 {
        sigmoid(dot(&fmap.apply(individual), &self.weights))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub steps: usize,
    /// Step size, capped at the inverse smoothness constant of the objective.
    pub rate: f64,
    /// `None` runs full-batch gradient ascent.
    pub minibatch: Option<usize>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            steps: 500,
            rate: 0.5,
            minibatch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub optimizer: OptimizerSettings,
    pub ridge: f64,
    /// Candidate ridge strengths for [`train_cv`].
    pub grid: Vec<f64>,
    pub folds: usize,
    /// Starting weights; zeros when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings::default(),
            ridge: 0.0,
            grid: Vec::new(),
            folds: 5,
            init: None,
        }
    }
}

impl TrainSpec {
    /// Log-spaced grid `10⁻⁴ … 10²`.
    pub fn default_grid() -> Vec<f64> {
        (-4..=2).map(|e| 10f64.powi(e)).collect()
    }
}

struct Design {
    phi: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Design {
    fn new(data: &[LabeledExample], fmap: &FeatureMap) -> Self {
        Self {
            phi: data.iter().map(|e| fmap.apply(&e.individual)).collect(),
            y: data.iter().map(|e| e.y as f64).collect(),
        }
    }

    fn dim(&self) -> usize {
        self.phi[0].len()
    }

    fn objective(&self, w: &[f64], ridge: f64, rows: impl Iterator<Item = usize>) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for i in rows {
            let z = dot(&self.phi[i], w);
            total += if self.y[i] > 0.5 { log_sigmoid(z) } else { log_sigmoid(-z) };
            n += 1;
        }
        total / n as f64 - 0.5 * ridge * dot(w, w)
    }

    fn gradient_into(&self, w: &[f64], ridge: f64, rows: &[usize], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &i in rows {
            let r = self.y[i] - sigmoid(dot(&self.phi[i], w));
            axpy(grad, r, &self.phi[i]);
        }
        let n = rows.len() as f64;
        for (g, wk) in grad.iter_mut().zip(w) {
            *g = *g / n - ridge * wk;
        }
    }
}

/// Regularized mean log-likelihood `(1/n)Σ log Q(yᵢ|xᵢ) − (ridge/2)‖w‖²`.
pub fn regularized_log_likelihood(data: &[LabeledExample], fmap: &FeatureMap, weights: &[f64], ridge: f64) -> f64 {
    let design = Design::new(data, fmap);
    design.objective(weights, ridge, 0..data.len())
}

/// Gradient of [`regularized_log_likelihood`].
pub fn log_likelihood_gradient(data: &[LabeledExample], fmap: &FeatureMap, weights: &[f64], ridge: f64) -> Vec<f64> {
    let design = Design::new(data, fmap);
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut g = vec![0.0; weights.len()];
    design.gradient_into(weights, ridge, &rows, &mut g);
    g
}

/// Result of a training run including objective checkpoints.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub predictor: Predictor,
    /// Full-data objective after every `checkpoint_every` steps (and at step 0).
    pub checkpoints: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Like [`train_mle`] but records the objective every `checkpoint_every` steps.
pub fn train_mle_traced<R: Rng + ?Sized>(
    data: &[LabeledExample],
    fmap: &FeatureMap,
    spec: &TrainSpec,
    checkpoint_every: usize,
    rng: &mut R,
) -> Result<TrainTrace> {
    if data.is_empty() {
        return Err(Error::EmptyData("no training examples".into()));
    }
    let mut diagnostics = Diagnostics::default();
    let mut ridge = spec.ridge;
    let positives = data.iter().filter(|e| e.y == 1).count();
    if ridge == 0.0 && (positives == 0 || positives == data.len()) {
        ridge = DEFAULT_RIDGE;
        diagnostics.push(Diagnostic::SingleClassLabels {
            label: data[0].y,
            ridge_used: ridge,
        });
    }
    let design = Design::new(data, fmap);
    let dim = design.dim();
    let mut w = match &spec.init {
        Some(init) if init.len() == dim => init.clone(),
        Some(init) => {
            return Err(Error::config(format!(
                "initial weights have length {}, feature map yields {dim}",
                init.len()
            )))
        }
        None => vec![0.0; dim],
    };
    // cap the step at 1/L for the smoothness bound L = max‖φ‖²/4 + ridge
    let smoothness = 0.25 * design.phi.iter().map(|p| dot(p, p)).fold(0.0, f64::max) + ridge;
    let rate = spec.optimizer.rate.min(1.0 / smoothness);
    let all_rows: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::new();
    let mut grad = vec![0.0; dim];
    let mut checkpoints = Vec::new();
    let every = checkpoint_every.max(1);
    if checkpoint_every > 0 {
        checkpoints.push(design.objective(&w, ridge, 0..data.len()));
    }
    for step in 1..=spec.optimizer.steps {
        let rows: &[usize] = match spec.optimizer.minibatch {
            Some(b) if b < data.len() => {
                batch.clear();
                batch.extend((0..b).map(|_| rng.random_range(0..data.len())));
                &batch
            }
            _ => &all_rows,
        };
        design.gradient_into(&w, ridge, rows, &mut grad);
        axpy(&mut w, rate, &grad);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: step,
                message: "predictor weights diverged".into(),
            });
        }
        if checkpoint_every > 0 && step % every == 0 {
            checkpoints.push(design.objective(&w, ridge, 0..data.len()));
        }
    }
    Ok(TrainTrace {
        predictor: Predictor {
            weights: w,
            regularization: ridge,
        },
        checkpoints,
        diagnostics,
    })
}

/// Fit `Q` by regularized maximum likelihood with gradient ascent.
pub fn train_mle<R: Rng + ?Sized>(
    data: &[LabeledExample],
    fmap: &FeatureMap,
    spec: &TrainSpec,
    rng: &mut R,
) -> Result<Fitted<Predictor>> {
    let trace = train_mle_traced(data, fmap, spec, 0, rng)?;
    Ok(Fitted::new(trace.predictor, trace.diagnostics))
}

/// Mean held-out log-likelihood (no penalty).
pub fn mean_log_likelihood(data: &[LabeledExample], fmap: &FeatureMap, predictor: &Predictor) -> f64 {
    regularized_log_likelihood(data, fmap, &predictor.weights, 0.0)
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub predictor: Predictor,
    pub selected: f64,
    /// Mean held-out log-likelihood per grid entry.
    pub scores: Vec<f64>,
    /// Fold index of every training example.
    pub folds: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Seeded fold assignment: a shuffled round-robin over `k` folds.
pub fn assign_folds<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

/// Select the ridge strength with the best mean held-fold log-likelihood,
/// then refit on all data. Ties go to the earliest grid entry.
pub fn train_cv<R: Rng + ?Sized>(
    data: &[LabeledExample],
    fmap: &FeatureMap,
    spec: &TrainSpec,
    rng: &mut R,
) -> Result<CvOutcome> {
    if spec.grid.is_empty() {
        let fit = train_mle(data, fmap, spec, rng)?;
        let selected = spec.ridge;
        return Ok(CvOutcome {
            predictor: fit.value,
            selected,
            scores: Vec::new(),
            folds: Vec::new(),
            diagnostics: fit.diagnostics,
        });
    }
    if spec.folds < 2 {
        return Err(Error::config("cross-validation needs at least 2 folds"));
    }
    if data.len() < spec.folds {
        return Err(Error::EmptyData(format!(
            "{} examples cannot fill {} folds",
            data.len(),
            spec.folds
        )));
    }
    let folds = assign_folds(data.len(), spec.folds, rng);
    let mut scores = Vec::with_capacity(spec.grid.len());
    let mut diagnostics = Diagnostics::default();
    for &ridge in &spec.grid {
        let mut total = 0.0;
        for k in 0..spec.folds {
            let (train, held): (Vec<_>, Vec<_>) = data
                .iter()
                .zip(&folds)
                .partition(|(_, &f)| f != k);
            let train: Vec<LabeledExample> = train.into_iter().map(|(e, _)| e.clone()).collect();
            let held: Vec<LabeledExample> = held.into_iter().map(|(e, _)| e.clone()).collect();
            let fold_spec = TrainSpec {
                ridge,
                ..spec.clone()
            };
            let fit = train_mle(&train, fmap, &fold_spec, rng)?;
            total += mean_log_likelihood(&held, fmap, &fit.value);
        }
        scores.push(total / spec.folds as f64);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    let selected = spec.grid[best];
    let fit = train_mle(
        data,
        fmap,
        &TrainSpec {
            ridge: selected,
            ..spec.clone()
        },
        rng,
    )?;
    diagnostics.extend(fit.diagnostics);
    Ok(CvOutcome {
        predictor: fit.value,
        selected,
        scores,
        folds,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::norm;
    use crate::policies::Policy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ex(x: Vec<f64>, y: u8) -> LabeledExample {
        LabeledExample {
            individual: Individual::new(x, 0),
            y,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn intercept_only_recovers_rate() {
        let data: Vec<_> = (0..100).map(|i| ex(vec![], u8::from(i < 70))).collect();
        let fit = train_mle(&data, &FeatureMap::default(), &TrainSpec::default(), &mut rng()).unwrap();
        let q = fit.value.predict_prob(&FeatureMap::default(), &Individual::new(vec![], 0));
        assert!((q - 0.7).abs() < 1e-3, "q = {q}");
        assert!(fit.diagnostics.is_empty());
    }

    #[test]
    fn separable_data_classified() {
        let data: Vec<_> = (0..40)
            .map(|i| {
                let x = -1.0 + i as f64 / 20.0;
                ex(vec![x], u8::from(x > 0.0))
            })
            .collect();
        let spec = TrainSpec {
            ridge: 1e-4,
            ..TrainSpec::default()
        };
        let fmap = FeatureMap::default();
        let fit = train_mle(&data, &fmap, &spec, &mut rng()).unwrap();
        let acc = data
            .iter()
            .filter(|e| u8::from(fit.value.predict_prob(&fmap, &e.individual) >= 0.5) == e.y)
            .count();
        assert_eq!(acc, data.len());
    }

    #[test]
    fn single_class_uses_default_ridge() {
        let data: Vec<_> = (0..30).map(|i| ex(vec![i as f64 / 30.0], 1)).collect();
        let fmap = FeatureMap::default();
        let fit = train_mle(&data, &fmap, &TrainSpec::default(), &mut rng()).unwrap();
        assert!(fit
            .diagnostics
            .contains(|d| matches!(d, Diagnostic::SingleClassLabels { .. })));
        assert_eq!(fit.value.regularization, DEFAULT_RIDGE);
        for e in &data {
            assert!(fit.value.predict_prob(&fmap, &e.individual) > 0.99);
        }
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(train_mle(&[], &FeatureMap::default(), &TrainSpec::default(), &mut rng()).is_err());
    }

    #[test]
    fn predict_prob_matches_logistic_policy() {
        let fmap = FeatureMap::default();
        let w = vec![0.3, -1.2];
        let p = Predictor::new(w.clone());
        let pol = Policy::logistic(w, fmap.clone());
        for x in [-2.0, 0.0, 0.7] {
            let i = Individual::new(vec![x], 1);
            assert_eq!(p.predict_prob(&fmap, &i), pol.prob_positive(&i));
        }
        assert_eq!(Predictor::new(vec![0.0, 0.0]).predict_prob(&fmap, &Individual::new(vec![3.0], 0)), 0.5);
        assert!(Predictor::new(vec![10.0, 0.0]).predict_prob(&fmap, &Individual::new(vec![3.0], 0)) > 0.999);
    }

    fn noisy(n: usize, seed: u64) -> Vec<LabeledExample> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: f64 = r.random_range(-1.0..1.0);
                let y = u8::from(r.random::<f64>() < sigmoid(1.5 * x - 0.2));
                ex(vec![x], y)
            })
            .collect()
    }

    #[test]
    fn full_batch_is_monotone_and_stationary() {
        let data = noisy(60, 3);
        let fmap = FeatureMap::default();
        let spec = TrainSpec {
            ridge: 1e-2,
            optimizer: OptimizerSettings {
                steps: 3000,
                ..OptimizerSettings::default()
            },
            ..TrainSpec::default()
        };
        let trace = train_mle_traced(&data, &fmap, &spec, 50, &mut rng()).unwrap();
        for w in trace.checkpoints.windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "{} < {}", w[1], w[0]);
        }
        let g = log_likelihood_gradient(&data, &fmap, &trace.predictor.weights, 1e-2);
        assert!(norm(&g) <= 1e-5, "gradient norm {}", norm(&g));
    }

    #[test]
    fn cv_single_grid_value_equals_mle() {
        let data = noisy(50, 5);
        let fmap = FeatureMap::default();
        let spec = TrainSpec {
            grid: vec![0.1],
            ..TrainSpec::default()
        };
        let cv = train_cv(&data, &fmap, &spec, &mut rng()).unwrap();
        let mle = train_mle(&data, &fmap, &TrainSpec { ridge: 0.1, ..TrainSpec::default() }, &mut rng()).unwrap();
        assert_eq!(cv.predictor, mle.value);
    }

    #[test]
    fn cv_duplicate_grid_entries() {
        let data = noisy(80, 6);
        let fmap = FeatureMap::default();
        let grid = TrainSpec::default_grid();
        let mut dup = Vec::new();
        for g in &grid {
            dup.push(*g);
            dup.push(*g);
        }
        let a = train_cv(&data, &fmap, &TrainSpec { grid, ..TrainSpec::default() }, &mut rng()).unwrap();
        let b = train_cv(&data, &fmap, &TrainSpec { grid: dup, ..TrainSpec::default() }, &mut rng()).unwrap();
        assert_eq!(a.selected, b.selected);
    }

    #[test]
    fn cv_empty_grid_falls_back() {
        let data = noisy(20, 7);
        let cv = train_cv(&data, &FeatureMap::default(), &TrainSpec::default(), &mut rng()).unwrap();
        assert!(cv.scores.is_empty());
        assert!(train_cv(
            &data[..3],
            &FeatureMap::default(),
            &TrainSpec { grid: vec![1.0], ..TrainSpec::default() },
            &mut rng()
        )
        .is_err());
    }
}
