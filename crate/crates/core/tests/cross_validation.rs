//! Cross-validated ridge selection against a Newton-method reference fit
//! on the recorded folds.

use conseq::environments::{make_synthetic_env, LabeledExample, SyntheticSettingSpec};
use conseq::policies::FeatureMap;
use conseq::predictors::{train_cv, OptimizerSettings, TrainSpec};
use conseq::rng::derive_rng;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Maximizer of `(1/n)Σ log Q(y|x) − (ridge/2)‖w‖²` for `φ = (1, x)`.
fn newton_fit(data: &[(f64, f64)], ridge: f64) -> [f64; 2] {
    let n = data.len() as f64;
    let mut w = [0.0f64; 2];
    for _ in 0..100 {
        let mut g = [-ridge * w[0], -ridge * w[1]];
        let mut h = [[ridge, 0.0], [0.0, ridge]];
        for &(x, y) in data {
            let phi = [1.0, x];
            let p = sigmoid(w[0] + w[1] * x);
            for a in 0..2 {
                g[a] += (y - p) * phi[a] / n;
                for b in 0..2 {
                    h[a][b] += p * (1.0 - p) * phi[a] * phi[b] / n;
                }
            }
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = [
            (h[1][1] * g[0] - h[0][1] * g[1]) / det,
            (h[0][0] * g[1] - h[1][0] * g[0]) / det,
        ];
        w[0] += step[0];
        w[1] += step[1];
        if step[0].abs() + step[1].abs() < 1e-13 {
            break;
        }
    }
    w
}

fn mean_ll(data: &[(f64, f64)], w: [f64; 2]) -> f64 {
    data.iter()
        .map(|&(x, y)| {
            let p = sigmoid(w[0] + w[1] * x);
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum::<f64>()
        / data.len() as f64
}

fn sample() -> Vec<LabeledExample> {
    let env = make_synthetic_env(SyntheticSettingSpec::setting1()).unwrap();
    env.sample_labeled(120, &mut derive_rng("cv-sample", &[0])).unwrap()
}

#[test]
fn scores_and_selection_match_reference() {
    let data = sample();
    let spec = TrainSpec {
        optimizer: OptimizerSettings {
            steps: 4000,
            ..Default::default()
        },
        grid: vec![1e-3, 1e-1, 1.0, 10.0],
        folds: 4,
        ..Default::default()
    };
    let cv = train_cv(&data, &FeatureMap::default(), &spec, &mut derive_rng("cv", &[0])).unwrap();
    assert_eq!(cv.folds.len(), data.len());
    let pairs: Vec<(f64, f64)> = data.iter().map(|e| (e.individual.x[0], e.y as f64)).collect();
    let mut reference = Vec::new();
    for &ridge in &spec.grid {
        let mut total = 0.0;
        for k in 0..spec.folds {
            let train: Vec<_> = pairs.iter().zip(&cv.folds).filter(|(_, &f)| f != k).map(|(p, _)| *p).collect();
            let held: Vec<_> = pairs.iter().zip(&cv.folds).filter(|(_, &f)| f == k).map(|(p, _)| *p).collect();
            total += mean_ll(&held, newton_fit(&train, ridge));
        }
        reference.push(total / spec.folds as f64);
    }
    for (got, want) in cv.scores.iter().zip(&reference) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
    let best = (0..reference.len())
        .max_by(|&a, &b| reference[a].partial_cmp(&reference[b]).unwrap())
        .unwrap();
    assert_eq!(cv.selected, spec.grid[best]);
    let w = newton_fit(&pairs, cv.selected);
    assert!((cv.predictor.weights[0] - w[0]).abs() < 1e-5);
    assert!((cv.predictor.weights[1] - w[1]).abs() < 1e-5);
}

#[test]
fn folds_are_balanced_and_seeded() {
    let data = sample();
    let spec = TrainSpec {
        grid: vec![0.1],
        folds: 7,
        ..Default::default()
    };
    let a = train_cv(&data, &FeatureMap::default(), &spec, &mut derive_rng("cv", &[1])).unwrap();
    let b = train_cv(&data, &FeatureMap::default(), &spec, &mut derive_rng("cv", &[1])).unwrap();
    assert_eq!(a.folds, b.folds);
    let mut counts = [0usize; 7];
    for &f in &a.folds {
        counts[f] += 1;
    }
    let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
    assert!(hi - lo <= 1, "{counts:?}");
}
