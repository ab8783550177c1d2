use super::{Environment, Individual};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

/// Integer score domain with per-group CDFs and repayment probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTableSpec {
    /// Strictly increasing scores.
    pub scores: Vec<i64>,
    pub cdf: [Vec<f64>; 2],
    pub repay: [Vec<f64>; 2],
    pub group_weights: [f64; 2],
}

const CDF_TOL: f64 = 1e-6;

impl ScoreTableSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.scores.len();
        if n == 0 {
            return Err(Error::config("score table is empty"));
        }
        if self.scores.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("scores must be strictly increasing"));
        }
        for g in 0..2 {
            if self.cdf[g].len() != n || self.repay[g].len() != n {
                return Err(Error::config(format!("group {g} table length differs from score domain")));
            }
            let mut prev = 0.0;
            for (i, &c) in self.cdf[g].iter().enumerate() {
                if !(0.0..=1.0 + CDF_TOL).contains(&c) {
                    return Err(Error::config(format!("cdf_group{g} at score {} is {c}", self.scores[i])));
                }
                if c + CDF_TOL < prev {
                    return Err(Error::config(format!(
                        "cdf_group{g} decreases at score {}",
                        self.scores[i]
                    )));
                }
                prev = prev.max(c);
            }
            let last = *self.cdf[g].last().unwrap();
            if (last - 1.0).abs() > CDF_TOL {
                return Err(Error::config(format!("cdf_group{g} ends at {last}, expected 1")));
            }
            if let Some((i, p)) = self.repay[g].iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
                return Err(Error::config(format!(
                    "p_repay_group{g} at score {} is {p}",
                    self.scores[i]
                )));
            }
        }
        let [w0, w1] = self.group_weights;
        if w0 < 0.0 || w1 < 0.0 || ((w0 + w1) - 1.0).abs() > 1e-9 {
            return Err(Error::config("group weights must be nonnegative and sum to 1"));
        }
        Ok(())
    }

    /// Read `score,cdf_group0,cdf_group1,p_repay_group0,p_repay_group1`.
    pub fn from_csv_reader<R: Read>(reader: R, group_weights: [f64; 2]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
        let wanted = ["score", "cdf_group0", "cdf_group1", "p_repay_group0", "p_repay_group1"];
        let mut idx = [0usize; 5];
        for (k, name) in wanted.iter().enumerate() {
            idx[k] = headers.iter().position(|h| h == *name).ok_or_else(|| Error::Ingest {
                row: 1,
                column: name.to_string(),
                message: "missing column".into(),
            })?;
        }
        let mut spec = ScoreTableSpec {
            scores: vec![],
            cdf: [vec![], vec![]],
            repay: [vec![], vec![]],
            group_weights,
        };
        for (r, rec) in rdr.records().enumerate() {
            let row = r + 2;
            let rec = rec.map_err(|e| Error::Ingest {
                row,
                column: String::new(),
                message: e.to_string(),
            })?;
            let field = |k: usize| -> Result<&str> {
                rec.get(idx[k]).ok_or_else(|| Error::Ingest {
                    row,
                    column: wanted[k].into(),
                    message: "missing value".into(),
                })
            };
            let num = |k: usize| -> Result<f64> {
                let raw = field(k)?;
                raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Ingest {
                    row,
                    column: wanted[k].into(),
                    message: format!("`{raw}` is not a finite number"),
                })
            };
            let raw_score = field(0)?;
            let score = raw_score.parse::<i64>().map_err(|_| Error::Ingest {
                row,
                column: "score".into(),
                message: format!("`{raw_score}` is not an integer"),
            })?;
            spec.scores.push(score);
            spec.cdf[0].push(num(1)?);
            spec.cdf[1].push(num(2)?);
            spec.repay[0].push(num(3)?);
            spec.repay[1].push(num(4)?);
        }
        Ok(spec)
    }

    pub fn from_path(path: &Path, group_weights: [f64; 2]) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file, group_weights)
    }
}

#[derive(Debug, Clone)]
pub struct ScoreTableEnv {
    spec: Arc<ScoreTableSpec>,
}

impl ScoreTableEnv {
    pub fn spec(&self) -> &ScoreTableSpec {
        &self.spec
    }

    pub fn domain(&self) -> (i64, i64) {
        (self.spec.scores[0], *self.spec.scores.last().unwrap())
    }

    pub(crate) fn sample_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> Individual {
        let s = if rng.random::<f64>() < self.spec.group_weights[0] { 0u8 } else { 1u8 };
        // inverse transform: smallest score whose CDF reaches u
        let u: f64 = rng.random();
        let cdf = &self.spec.cdf[s as usize];
        let i = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        Individual::new(vec![self.spec.scores[i] as f64], s)
    }

    fn index_of(&self, score: f64) -> Option<usize> {
        if score.fract() != 0.0 {
            return None;
        }
        self.spec.scores.binary_search(&(score as i64)).ok()
    }

    pub(crate) fn conditional(&self, individual: &Individual) -> Result<f64> {
        let i = self
            .index_of(individual.x[0])
            .ok_or_else(|| Error::config(format!("score {} not in the table domain", individual.x[0])))?;
        Ok(self.spec.repay[individual.s as usize][i])
    }
}

pub fn make_score_table_env(spec: ScoreTableSpec) -> Result<Environment> {
    spec.validate()?;
    Ok(Environment::ScoreTable(ScoreTableEnv { spec: Arc::new(spec) }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_point() -> ScoreTableSpec {
        ScoreTableSpec {
            scores: vec![300, 820],
            cdf: [vec![0.5, 1.0], vec![0.5, 1.0]],
            repay: [vec![0.2, 0.9], vec![0.1, 0.8]],
            group_weights: [0.8, 0.2],
        }
    }

    #[test]
    fn inverse_transform_two_points() {
        let env = make_score_table_env(two_point()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let xs = env.sample_individuals(n, &mut rng).unwrap();
        let low = xs.iter().filter(|i| i.x[0] == 300.0).count() as f64 / n as f64;
        assert!(xs.iter().all(|i| i.x[0] == 300.0 || i.x[0] == 820.0));
        assert!((low - 0.5).abs() <= 3.0 * (0.25f64 / n as f64).sqrt());
        let g0 = xs.iter().filter(|i| i.s == 0).count() as f64 / n as f64;
        assert!((g0 - 0.8).abs() <= 3.0 * (0.8f64 * 0.2 / n as f64).sqrt());
    }

    #[test]
    fn single_group_weight() {
        let mut spec = two_point();
        spec.group_weights = [1.0, 0.0];
        let env = make_score_table_env(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(env.sample_individuals(10_000, &mut rng).unwrap().iter().all(|i| i.s == 0));
    }

    #[test]
    fn repayment_lookup() {
        let mut spec = two_point();
        spec.scores = vec![300, 700];
        spec.repay[0][1] = 0.9;
        let env = make_score_table_env(spec).unwrap();
        assert_eq!(env.true_conditional(&Individual::new(vec![700.0], 0)).unwrap(), 0.9);
        assert!(env.true_conditional(&Individual::new(vec![701.0], 0)).is_err());
    }

    #[test]
    fn full_domain_samples_stay_inside() {
        let scores: Vec<i64> = (300..=820).collect();
        let n = scores.len();
        let cdf: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let spec = ScoreTableSpec {
            scores,
            cdf: [cdf.clone(), cdf],
            repay: [vec![0.5; n], vec![0.5; n]],
            group_weights: [0.8, 0.2],
        };
        let env = make_score_table_env(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for ind in env.sample_individuals(20_000, &mut rng).unwrap() {
            assert!((300.0..=820.0).contains(&ind.x[0]));
        }
    }

    #[test]
    fn non_monotone_cdf_rejected() {
        let mut spec = two_point();
        spec.scores = vec![300, 500, 820];
        spec.cdf = [vec![0.6, 0.4, 1.0], vec![0.5, 0.6, 1.0]];
        spec.repay = [vec![0.5; 3], vec![0.5; 3]];
        let err = make_score_table_env(spec).unwrap_err();
        assert!(err.to_string().contains("decreases"));
    }

    #[test]
    fn csv_ingestion() {
        let text = "score,cdf_group0,cdf_group1,p_repay_group0,p_repay_group1\n300,0.5,0.5,0.2,0.1\n820,1.0,1.0,0.9,0.8\n";
        let spec = ScoreTableSpec::from_csv_reader(text.as_bytes(), [0.8, 0.2]).unwrap();
        assert_eq!(spec, two_point());
        let bad = "score,cdf_group0,cdf_group1,p_repay_group0,p_repay_group1\n300,0.5,abc,0.2,0.1\n";
        match ScoreTableSpec::from_csv_reader(bad.as_bytes(), [0.8, 0.2]) {
            Err(Error::Ingest { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "cdf_group1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
