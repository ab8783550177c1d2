use super::{Environment, Individual, LabeledExample};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

/// A table of `(features, s, y)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<LabeledExample>,
}

fn parse_binary(raw: &str, row: usize, column: &str) -> Result<u8> {
    match raw.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::Ingest {
            row,
            column: column.into(),
            message: format!("`{raw}` is not 0 or 1"),
        }),
    }
}

impl Dataset {
    /// Parse a CSV with a header; every column other than `s` and `y` is a
    /// numeric feature, kept in header order.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
        let find = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Ingest {
                row: 1,
                column: name.into(),
                message: "missing column".into(),
            })
        };
        let s_idx = find("s")?;
        let y_idx = find("y")?;
        let feature_idx: Vec<usize> = (0..headers.len()).filter(|&i| i != s_idx && i != y_idx).collect();
        if feature_idx.is_empty() {
            return Err(Error::Ingest {
                row: 1,
                column: String::new(),
                message: "no feature columns".into(),
            });
        }
        let feature_names = feature_idx.iter().map(|&i| headers[i].to_string()).collect();
        let mut rows = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let row = r + 2;
            let rec = rec.map_err(|e| Error::Ingest {
                row,
                column: String::new(),
                message: e.to_string(),
            })?;
            let get = |i: usize| -> Result<&str> {
                rec.get(i).ok_or_else(|| Error::Ingest {
                    row,
                    column: headers[i].to_string(),
                    message: "missing value".into(),
                })
            };
            let mut x = Vec::with_capacity(feature_idx.len());
            for &i in &feature_idx {
                let raw = get(i)?;
                let v = raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Ingest {
                    row,
                    column: headers[i].to_string(),
                    message: format!("`{raw}` is not a finite number"),
                })?;
                x.push(v);
            }
            let s = parse_binary(get(s_idx)?, row, "s")?;
            let y = parse_binary(get(y_idx)?, row, "y")?;
            rows.push(LabeledExample {
                individual: Individual::new(x, s),
                y,
            });
        }
        Ok(Dataset { feature_names, rows })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }
}

#[derive(Debug, Clone)]
pub struct EmpiricalEnv {
    feature_names: Arc<Vec<String>>,
    train: Arc<Vec<LabeledExample>>,
    test: Arc<Vec<LabeledExample>>,
}

impl EmpiricalEnv {
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn train_pool(&self) -> &[LabeledExample] {
        &self.train
    }

    pub fn test_set(&self) -> &[LabeledExample] {
        &self.test
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Bootstrap one individual (uniform, with replacement) from the pool.
    pub(crate) fn sample_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Individual> {
        if self.train.is_empty() {
            return Err(Error::config("empirical environment has an empty training pool"));
        }
        let row = rng.random_range(0..self.train.len());
        let mut ind = self.train[row].individual.clone();
        ind.source_row = Some(row);
        Ok(ind)
    }

    pub(crate) fn stored_label(&self, individual: &Individual) -> u8 {
        let row = individual
            .source_row
            .expect("empirical labels require an individual drawn from the training pool");
        self.train[row].y
    }
}

/// Shuffle the dataset with `rng` and split it into a training pool of
/// `round(split_fraction·n)` rows and a disjoint held-out test set.
pub fn make_empirical_env<R: Rng + ?Sized>(dataset: Dataset, split_fraction: f64, rng: &mut R) -> Result<Environment> {
    if dataset.rows.is_empty() {
        return Err(Error::EmptyData("dataset has no rows".into()));
    }
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::config("split_fraction must lie in (0, 1)"));
    }
    let n = dataset.rows.len();
    let n_train = ((n as f64) * split_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::config(format!(
            "split {split_fraction} of {n} rows leaves an empty training or test set"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (k, &i) in order.iter().enumerate() {
        let mut ex = dataset.rows[i].clone();
        ex.individual.source_row = None;
        if k < n_train {
            train.push(ex);
        } else {
            test.push(ex);
        }
    }
    Ok(Environment::Empirical(EmpiricalEnv {
        feature_names: Arc::new(dataset.feature_names),
        train: Arc::new(train),
        test: Arc::new(test),
    }))
}
