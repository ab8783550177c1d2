use crate::environments::{Individual, LabeledExample};
use serde::{Deserialize, Serialize};

/// `φ(x, s)`: a constant offset followed by (optionally standardized)
/// features, their higher powers, and optionally the group indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    /// Highest power of each raw feature; 1 gives `(1, x)`.
    pub degree: usize,
    pub include_group: bool,
    /// Per-feature `(center, scale)`; empty means no standardization.
    #[serde(default)]
    pub standardize: Vec<(f64, f64)>,
}

impl Default for FeatureMap {
    fn default() -> Self {
        Self {
            degree: 1,
            include_group: false,
            standardize: Vec::new(),
        }
    }
}

impl FeatureMap {
    pub fn offset() -> Self {
        Self::default()
    }

    pub fn with_group(mut self, include: bool) -> Self {
        self.include_group = include;
        self
    }

    pub fn with_standardization(mut self, params: Vec<(f64, f64)>) -> Self {
        self.standardize = params;
        self
    }

    /// Standardization parameters (mean, sd) estimated from examples.
    pub fn fit_standardization(examples: &[LabeledExample]) -> Vec<(f64, f64)> {
        let Some(first) = examples.first() else {
            return Vec::new();
        };
        let dim = first.individual.x.len();
        let n = examples.len() as f64;
        (0..dim)
            .map(|j| {
                let mean = examples.iter().map(|e| e.individual.x[j]).sum::<f64>() / n;
                let var = examples.iter().map(|e| (e.individual.x[j] - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                (mean, if sd > 0.0 { sd } else { 1.0 })
            })
            .collect()
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        1 + input_dim * self.degree.max(1) + usize::from(self.include_group)
    }

    pub fn apply(&self, individual: &Individual) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.output_dim(individual.x.len()));
        self.apply_into(individual, &mut out);
        out
    }

    pub fn apply_into(&self, individual: &Individual, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        for (j, &raw) in individual.x.iter().enumerate() {
            let v = match self.standardize.get(j) {
                Some(&(c, s)) => (raw - c) / s,
                None => raw,
            };
            let mut p = v;
            for _ in 0..self.degree.max(1) {
                out.push(p);
                p *= v;
            }
        }
        if self.include_group {
            out.push(individual.s as f64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_offset_augmentation() {
        let phi = FeatureMap::default().apply(&Individual::new(vec![0.4], 1));
        assert_eq!(phi, vec![1.0, 0.4]);
        assert_eq!(FeatureMap::default().output_dim(1), 2);
    }

    #[test]
    fn polynomial_group_and_scaling() {
        let fmap = FeatureMap {
            degree: 2,
            include_group: true,
            standardize: vec![(1.0, 2.0)],
        };
        let phi = fmap.apply(&Individual::new(vec![5.0], 1));
        assert_eq!(phi, vec![1.0, 2.0, 4.0, 1.0]);
        assert_eq!(fmap.output_dim(1), phi.len());
    }
}
